//! Raw sample files, the plain-text truth sidecar, and scenario configs.
//!
//! All binary formats are little-endian. Integer samples map to `[-1, 1)` by
//! dividing by the type's largest magnitude (128 or 32768).

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::detect::Indicator;
use crate::error::{Error, Result};
use crate::eval::{threshold_grid, EpochSource, EpochTruth, PassEpoch};
use crate::geometry::PassGeometry;
use crate::integrate::{IntegrationSpec, Strategy};
use crate::synth::{SampledSignal, SynthParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SampleFormat {
    Int8Real,
    Int16Real,
    Float32Real,
    Int8Iq,
    Int16Iq,
    Float32Iq,
}

impl SampleFormat {
    pub const ALL: [SampleFormat; 6] = [
        SampleFormat::Int8Real,
        SampleFormat::Int16Real,
        SampleFormat::Float32Real,
        SampleFormat::Int8Iq,
        SampleFormat::Int16Iq,
        SampleFormat::Float32Iq,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SampleFormat::Int8Real => "int8-real",
            SampleFormat::Int16Real => "int16-real",
            SampleFormat::Float32Real => "float32-real",
            SampleFormat::Int8Iq => "int8-iq",
            SampleFormat::Int16Iq => "int16-iq",
            SampleFormat::Float32Iq => "float32-iq",
        }
    }

    pub fn is_iq(self) -> bool {
        matches!(
            self,
            SampleFormat::Int8Iq | SampleFormat::Int16Iq | SampleFormat::Float32Iq
        )
    }

    /// Bytes per scalar component.
    fn component_width(self) -> usize {
        match self {
            SampleFormat::Int8Real | SampleFormat::Int8Iq => 1,
            SampleFormat::Int16Real | SampleFormat::Int16Iq => 2,
            SampleFormat::Float32Real | SampleFormat::Float32Iq => 4,
        }
    }

    /// Bytes per sample (both components for I/Q).
    pub fn sample_width(self) -> usize {
        self.component_width() * if self.is_iq() { 2 } else { 1 }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self.component_width() {
            1 => f64::from(b[0] as i8) / 128.0,
            2 => f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0,
            _ => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
        }
    }

    /// Appends one component; returns whether it was clipped.
    fn encode(self, v: f64, out: &mut Vec<u8>) -> bool {
        let quantize = |scale: f64, lo: f64, hi: f64| {
            let q = (v * scale).round();
            (q.clamp(lo, hi), !(lo..=hi).contains(&q))
        };
        match self.component_width() {
            1 => {
                let (q, clipped) = quantize(128.0, -128.0, 127.0);
                out.push(q as i8 as u8);
                clipped
            }
            2 => {
                let (q, clipped) = quantize(32768.0, -32768.0, 32767.0);
                out.extend_from_slice(&(q as i16).to_le_bytes());
                clipped
            }
            _ => {
                out.extend_from_slice(&(v as f32).to_le_bytes());
                false
            }
        }
    }
}

impl fmt::Display for SampleFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SampleFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SampleFormat::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::UnknownFormat(s.to_string()))
    }
}

impl TryFrom<String> for SampleFormat {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SampleFormat> for String {
    fn from(f: SampleFormat) -> String {
        f.tag().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleFileMeta {
    pub sample_rate: f64,
    pub intermediate_freq: f64,
    pub format: SampleFormat,
    pub t0: f64,
}

/// Number of whole samples in the file at `path`, rejecting trailing bytes.
pub fn sample_count(path: &Path, format: SampleFormat) -> Result<u64> {
    let len = std::fs::metadata(path)?.len();
    let width = format.sample_width();
    let rem = len % width as u64;
    if rem != 0 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            len,
            width,
            offset: len - rem,
        });
    }
    Ok(len / width as u64)
}

/// Reads `count` samples starting at sample `offset`.
pub fn read_samples(
    path: &Path,
    meta: &SampleFileMeta,
    offset: u64,
    count: u64,
) -> Result<SampledSignal> {
    let available = sample_count(path, meta.format)?;
    let width = meta.format.sample_width() as u64;
    let end = offset.saturating_add(count);
    if end > available {
        return Err(Error::OutOfRange {
            offset,
            end,
            available,
            byte_offset: offset.saturating_mul(width),
        });
    }
    let mut file = File::open(path)?;
    file.seek(SeekFrom::Start(offset * width))?;
    let mut bytes = vec![0u8; (count * width) as usize];
    file.read_exact(&mut bytes)?;
    let cw = meta.format.component_width();
    let mut samples = Vec::with_capacity(count as usize);
    let mut quadrature = meta.format.is_iq().then(|| Vec::with_capacity(count as usize));
    for chunk in bytes.chunks_exact(width as usize) {
        samples.push(meta.format.decode(&chunk[..cw]));
        if let Some(q) = quadrature.as_mut() {
            q.push(meta.format.decode(&chunk[cw..]));
        }
    }
    Ok(SampledSignal {
        samples,
        quadrature,
        sample_rate: meta.sample_rate,
        t0: meta.t0 + offset as f64 / meta.sample_rate,
        truth: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WriteReport {
    pub samples: usize,
    /// Components saturated by an integer format.
    pub clipped: usize,
}

fn encode_signal(signal: &SampledSignal, format: SampleFormat, out: &mut Vec<u8>) -> Result<usize> {
    if signal.samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("signal contains non-finite samples"));
    }
    let mut clipped = 0;
    match (format.is_iq(), &signal.quadrature) {
        (false, _) => {
            for &v in &signal.samples {
                clipped += usize::from(format.encode(v, out));
            }
        }
        (true, Some(q)) => {
            if q.len() != signal.samples.len() {
                return Err(Error::LengthMismatch {
                    left: signal.samples.len(),
                    right: q.len(),
                });
            }
            if q.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("signal contains non-finite samples"));
            }
            for (&i, &qv) in signal.samples.iter().zip(q) {
                clipped += usize::from(format.encode(i, out));
                clipped += usize::from(format.encode(qv, out));
            }
        }
        (true, None) => {
            return Err(Error::param(format!(
                "{format} needs a quadrature component; the signal is real"
            )))
        }
    }
    Ok(clipped)
}

pub fn write_samples(signal: &SampledSignal, path: &Path, format: SampleFormat) -> Result<WriteReport> {
    let mut bytes = Vec::with_capacity(signal.samples.len() * format.sample_width());
    let clipped = encode_signal(signal, format, &mut bytes)?;
    std::fs::write(path, bytes)?;
    Ok(WriteReport {
        samples: signal.samples.len(),
        clipped,
    })
}

/// Sample file opened for appending consecutive signals.
pub struct SampleWriter {
    out: BufWriter<File>,
    format: SampleFormat,
    report: WriteReport,
    buf: Vec<u8>,
}

impl SampleWriter {
    pub fn create(path: &Path, format: SampleFormat) -> Result<Self> {
        Ok(Self {
            out: BufWriter::new(File::create(path)?),
            format,
            report: WriteReport {
                samples: 0,
                clipped: 0,
            },
            buf: Vec::new(),
        })
    }

    pub fn append(&mut self, signal: &SampledSignal) -> Result<()> {
        self.buf.clear();
        self.report.clipped += encode_signal(signal, self.format, &mut self.buf)?;
        self.report.samples += signal.samples.len();
        self.out.write_all(&self.buf)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<WriteReport> {
        self.out.flush()?;
        Ok(self.report)
    }
}

/// `<name>.truth` next to the sample file `<name>.<ext>`.
pub fn truth_path(sample_path: &Path) -> PathBuf {
    sample_path.with_extension("truth")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthEpoch {
    pub t: f64,
    pub doppler: f64,
    pub doppler_rate: f64,
    /// Code delay in samples at the start of the epoch.
    pub code_phase: f64,
    /// Code delay drift in samples per second.
    pub code_rate: f64,
    pub predicted_doppler: f64,
    pub amplitude: f64,
    pub cn0: Option<f64>,
}

/// Everything needed to label a sample file without re-synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthFile {
    pub prn: u32,
    pub sample_rate: f64,
    pub intermediate_freq: f64,
    pub format: SampleFormat,
    pub t0: f64,
    pub epoch_step: f64,
    pub samples_per_epoch: u64,
    pub epochs: Vec<TruthEpoch>,
}

impl TruthFile {
    pub fn meta(&self) -> SampleFileMeta {
        SampleFileMeta {
            sample_rate: self.sample_rate,
            intermediate_freq: self.intermediate_freq,
            format: self.format,
            t0: self.t0,
        }
    }

    pub fn write<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "prn={}", self.prn)?;
        writeln!(out, "sample_rate={}", self.sample_rate)?;
        writeln!(out, "intermediate_freq={}", self.intermediate_freq)?;
        writeln!(out, "format={}", self.format)?;
        writeln!(out, "t0={}", self.t0)?;
        writeln!(out, "epoch_step={}", self.epoch_step)?;
        writeln!(out, "samples_per_epoch={}", self.samples_per_epoch)?;
        writeln!(out, "epochs={}", self.epochs.len())?;
        for e in &self.epochs {
            let cn0 = e.cn0.map_or_else(|| "none".to_string(), |c| c.to_string());
            writeln!(
                out,
                "epoch t={} doppler={} doppler_rate={} code_phase={} code_rate={} predicted_doppler={} amplitude={} cn0={cn0}",
                e.t, e.doppler, e.doppler_rate, e.code_phase, e.code_rate, e.predicted_doppler, e.amplitude
            )?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(BufReader::new(File::open(path)?))
    }

    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut epochs = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |what: &str| Error::Truth(format!("line {}: {what}", n + 1));
            if let Some(rest) = line.strip_prefix("epoch ") {
                let mut fields = BTreeMap::new();
                for kv in rest.split_whitespace() {
                    let (k, v) = kv.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                    fields.insert(k, v);
                }
                let num = |k: &str| -> Result<f64> {
                    fields
                        .get(k)
                        .ok_or_else(|| bad(&format!("missing `{k}`")))?
                        .parse::<f64>()
                        .map_err(|_| bad(&format!("`{k}` is not a number")))
                };
                let cn0 = match fields.get("cn0") {
                    None | Some(&"none") => None,
                    Some(_) => Some(num("cn0")?),
                };
                epochs.push(TruthEpoch {
                    t: num("t")?,
                    doppler: num("doppler")?,
                    doppler_rate: num("doppler_rate")?,
                    code_phase: num("code_phase")?,
                    code_rate: num("code_rate")?,
                    predicted_doppler: num("predicted_doppler")?,
                    amplitude: num("amplitude")?,
                    cn0,
                });
            } else {
                let (k, v) = line.split_once('=').ok_or_else(|| bad("expected key=value"))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| {
            header
                .get(k)
                .ok_or_else(|| Error::Truth(format!("missing header `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Truth(format!("header `{k}` is not a number")))
        };
        let int = |k: &str| -> Result<u64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Truth(format!("header `{k}` is not an integer")))
        };
        let declared = int("epochs")?;
        if declared != epochs.len() as u64 {
            return Err(Error::Truth(format!(
                "header declares {declared} epochs, file lists {}",
                epochs.len()
            )));
        }
        Ok(Self {
            prn: u32::try_from(int("prn")?).map_err(|_| Error::Truth("prn too large".into()))?,
            sample_rate: num("sample_rate")?,
            intermediate_freq: num("intermediate_freq")?,
            format: get("format")?.parse()?,
            t0: num("t0")?,
            epoch_step: num("epoch_step")?,
            samples_per_epoch: int("samples_per_epoch")?,
            epochs,
        })
    }
}

/// Epochs read back from a sample file laid out as described by its truth.
pub struct FileEpochs {
    path: PathBuf,
    truth: TruthFile,
}

impl FileEpochs {
    pub fn open(path: &Path, truth: TruthFile) -> Result<Self> {
        let have = sample_count(path, truth.format)?;
        let need = truth.samples_per_epoch * truth.epochs.len() as u64;
        if have < need {
            return Err(Error::OutOfRange {
                offset: 0,
                end: need,
                available: have,
                byte_offset: have * truth.format.sample_width() as u64,
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            truth,
        })
    }

    pub fn truth(&self) -> &TruthFile {
        &self.truth
    }
}

impl EpochSource for FileEpochs {
    fn len(&self) -> usize {
        self.truth.epochs.len()
    }

    fn epoch_step(&self) -> f64 {
        self.truth.epoch_step
    }

    fn epoch(&self, index: usize) -> Result<PassEpoch> {
        let e = self
            .truth
            .epochs
            .get(index)
            .ok_or_else(|| Error::param(format!("epoch {index} out of range")))?;
        let n = self.truth.samples_per_epoch;
        let signal = read_samples(&self.path, &self.truth.meta(), index as u64 * n, n)?;
        Ok(PassEpoch {
            t: e.t,
            samples: signal.samples,
            quadrature: signal.quadrature,
            truth: EpochTruth {
                t: e.t,
                doppler: e.doppler,
                doppler_rate: e.doppler_rate,
                code_phase: e.code_phase,
                code_rate: e.code_rate,
            },
            predicted_doppler: e.predicted_doppler,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    /// Error-rate ceiling for the reported threshold bounds.
    pub target: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            start: 1.0,
            stop: 5.0,
            step: 0.05,
            target: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub strategies: Vec<Strategy>,
    pub total_ms: Vec<u32>,
    pub threshold: f64,
    pub indicator: Indicator,
    /// Fixed search center in Hz; absent means centered on the predicted Doppler.
    pub search_center_hz: Option<f64>,
    pub half_span_hz: f64,
    /// Bias of the Doppler prediction relative to the truth.
    pub aiding_error_hz: f64,
    pub format: SampleFormat,
    pub sweep: SweepConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::Coherent],
            total_ms: vec![1],
            threshold: 2.5,
            indicator: Indicator::Mtsmr,
            search_center_hz: None,
            half_span_hz: 500.0,
            aiding_error_hz: 0.0,
            format: SampleFormat::Float32Real,
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    pub signal: SynthParams,
    pub geometry: PassGeometry,
    pub run: RunConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: PathBuf::from("out"),
            signal: SynthParams::default(),
            geometry: PassGeometry::default(),
            run: RunConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every downstream precondition that is knowable up front.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.signal
            .validate()
            .map_err(|e| Error::Config(format!("signal: {e}")))?;
        let g = &self.geometry;
        if g.carrier_freq != self.signal.carrier_freq {
            return cfg(format!(
                "geometry carrier {} Hz differs from signal carrier {} Hz",
                g.carrier_freq, self.signal.carrier_freq
            ));
        }
        if !(g.epoch_step > 0.0) || !(0.0..90.0).contains(&g.elevation_mask) {
            return cfg("geometry needs epoch_step > 0 and a mask in [0, 90)".into());
        }
        let r = &self.run;
        if r.strategies.is_empty() || r.total_ms.is_empty() {
            return cfg("run needs at least one strategy and one total_ms".into());
        }
        if !(r.threshold > 0.0) || !(r.half_span_hz > 0.0) || !r.aiding_error_hz.is_finite() {
            return cfg("run needs threshold > 0, half_span_hz > 0 and a finite aiding error".into());
        }
        threshold_grid(r.sweep.start, r.sweep.stop, r.sweep.step)
            .map_err(|e| Error::Config(format!("sweep: {e}")))?;
        if !(r.sweep.target > 0.0 && r.sweep.target < 1.0) {
            return cfg(format!("sweep target {} outside (0, 1)", r.sweep.target));
        }
        if self.specs().0.is_empty() {
            return cfg("no valid strategy/total_ms combination".into());
        }
        Ok(())
    }

    /// Valid strategy x total_ms combinations, and the rejected ones.
    pub fn specs(&self) -> (Vec<IntegrationSpec>, Vec<(Strategy, u32)>) {
        let mut ok = Vec::new();
        let mut skipped = Vec::new();
        for &s in &self.run.strategies {
            for &t in &self.run.total_ms {
                match IntegrationSpec::new(s, t) {
                    Ok(spec) => ok.push(spec),
                    Err(_) => skipped.push((s, t)),
                }
            }
        }
        (ok, skipped)
    }

    /// Window length per pass epoch: the longest integration requested.
    pub fn epoch_window(&self) -> f64 {
        f64::from(self.run.total_ms.iter().copied().max().unwrap_or(1)) * 1e-3
    }
}
