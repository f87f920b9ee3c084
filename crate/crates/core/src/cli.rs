//! Command-line front end. Exit status: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{error::ErrorKind, Args, Parser, Subcommand};

use crate::acq::Correlator;
use crate::detect::{Indicator, RESULT_CSV_HEADER};
use crate::error::Error;
use crate::eval::{
    acquisition_timelines, pf_sweep, threshold_bounds, threshold_grid, write_bounds_csv,
    write_duration_csv, EpochList, EpochSource, EpochTruth, PassEpoch, SearchCenter, SearchWindow,
    SyntheticPass, Timeline, TimelineOptions,
};
use crate::geometry::{simulate_pass, PassGeometry};
use crate::integrate::{IntegrationSpec, Strategy};
use crate::io::{
    read_samples, sample_count, truth_path, FileEpochs, SampleFileMeta, SampleFormat,
    SampleWriter, ScenarioConfig, TruthEpoch, TruthFile,
};
use crate::prn::generate_code;
use crate::synth::{synthesize, SynthParams};

#[derive(Debug, Parser)]
#[command(name = "leo-acq", version, about = "Weak-signal acquisition for LEO navigation signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a sample file and its truth sidecar from a scenario config.
    Synth(SynthArgs),
    /// Write the pass geometry time series as CSV.
    Pass(PassArgs),
    /// Acquire a sample file and write one result row per epoch and strategy.
    Acquire(AcquireArgs),
    /// Error rate versus threshold per strategy, plus threshold bounds.
    Sweep(EvalArgs),
    /// Successful acquisition duration versus integration length.
    Duration(EvalArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run seed; overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sample file to write; the truth goes next to it as `<name>.truth`.
    #[arg(long)]
    out: PathBuf,
    /// Synthesize one window per pass epoch instead of a single signal.
    #[arg(long)]
    pass: bool,
    #[arg(long)]
    format: Option<SampleFormat>,
}

#[derive(Debug, Args)]
struct PassArgs {
    /// Scenario config supplying the geometry; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Orbit height in meters.
    #[arg(long)]
    height: Option<f64>,
    /// Elevation mask in degrees.
    #[arg(long)]
    mask: Option<f64>,
    /// Station distance from the ground track in meters.
    #[arg(long)]
    offset: Option<f64>,
    /// Epoch step in seconds.
    #[arg(long)]
    step: Option<f64>,
    /// Carrier frequency in Hz.
    #[arg(long)]
    carrier: Option<f64>,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AcquireArgs {
    #[arg(long)]
    input: PathBuf,
    /// Truth sidecar describing the file; `<name>.truth` is used when present.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    format: Option<SampleFormat>,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long = "if")]
    intermediate_freq: Option<f64>,
    #[arg(long)]
    prn: Option<u32>,
    #[arg(long, value_delimiter = ',', default_value = "coherent")]
    strategy: Vec<Strategy>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    total_ms: Vec<u32>,
    /// Search center in Hz.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    center: f64,
    /// Center each epoch's search on the truth file's predicted Doppler.
    #[arg(long, conflicts_with = "center")]
    aided: bool,
    #[arg(long, default_value_t = 10_000.0)]
    half_span: f64,
    #[arg(long, default_value_t = 2.5)]
    threshold: f64,
    #[arg(long, default_value = "mtsmr")]
    indicator: Indicator,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run seed; overrides the config's seed. Needed unless `--input` is given.
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluate a synthesized sample file (with its truth sidecar) instead of
    /// synthesizing the pass.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory; overrides the config's.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(Error::Io(e))
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

/// Runs the command line `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Pass(a) => pass(a),
        Command::Acquire(a) => acquire(a),
        Command::Sweep(a) => evaluate_pass(a, Report::Sweep),
        Command::Duration(a) => evaluate_pass(a, Report::Duration),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        // A closed downstream pipe (e.g. `| head`) is not a failure.
        Err(Failure::Data(Error::Io(e))) if e.kind() == io::ErrorKind::BrokenPipe => 0,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn seed_of(flag: Option<u64>, cfg: &ScenarioConfig) -> CliResult<u64> {
    flag.or(cfg.seed)
        .ok_or_else(|| Failure::Usage("a seed is required: pass --seed or set `seed` in the config".into()))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn synth(a: SynthArgs) -> CliResult {
    let cfg = ScenarioConfig::load(&a.config)?;
    let seed = seed_of(a.seed, &cfg)?;
    let format = a.format.unwrap_or(cfg.run.format);
    let sidecar = truth_path(&a.out);
    if sidecar == a.out {
        return Err(Failure::Usage("sample file must not use the .truth extension".into()));
    }
    let chip_rate = generate_code(cfg.signal.prn_id)?.chip_rate();
    let mut writer = SampleWriter::create(&a.out, format)?;
    let base = SynthParams {
        seed,
        ..cfg.signal.clone()
    };
    let (epochs, step, per_epoch) = if a.pass {
        let scenario = simulate_pass(&cfg.geometry)?;
        let base = SynthParams {
            duration: cfg.epoch_window(),
            ..base
        };
        let source = SyntheticPass::new(&scenario, &base, cfg.run.aiding_error_hz)?;
        let mut epochs = Vec::with_capacity(source.len());
        for (k, plan) in source.plans().iter().enumerate() {
            writer.append(&synthesize(&plan.params)?)?;
            let truth = source.truth(k);
            epochs.push(TruthEpoch {
                t: truth.t,
                doppler: truth.doppler,
                doppler_rate: truth.doppler_rate,
                code_phase: truth.code_phase,
                code_rate: truth.code_rate,
                predicted_doppler: source.predicted_doppler(k),
                amplitude: plan.params.amplitude,
                cn0: plan.params.cn0,
            });
        }
        (epochs, scenario.epoch_step, base.sample_count() as u64)
    } else {
        let signal = synthesize(&base)?;
        writer.append(&signal)?;
        let epoch = TruthEpoch {
            t: 0.0,
            doppler: base.doppler0,
            doppler_rate: base.doppler_rate,
            code_phase: base.code_phase_samples(chip_rate),
            code_rate: base.code_rate_samples(),
            predicted_doppler: base.doppler0 + cfg.run.aiding_error_hz,
            amplitude: base.amplitude,
            cn0: base.cn0,
        };
        (vec![epoch], base.duration, signal.samples.len() as u64)
    };
    let report = writer.finish()?;
    TruthFile {
        prn: base.prn_id,
        sample_rate: base.sample_rate,
        intermediate_freq: base.intermediate_freq,
        format,
        t0: 0.0,
        epoch_step: step,
        samples_per_epoch: per_epoch,
        epochs,
    }
    .save(&sidecar)?;
    if report.clipped > 0 {
        eprintln!(
            "warning: {} components saturated the {format} range; lower the amplitude",
            report.clipped
        );
    }
    eprintln!(
        "wrote {} samples ({} clipped) to {} and truth to {}",
        report.samples,
        report.clipped,
        a.out.display(),
        sidecar.display()
    );
    Ok(())
}

fn pass(a: PassArgs) -> CliResult {
    let mut g = match &a.config {
        Some(p) => ScenarioConfig::load(p)?.geometry,
        None => PassGeometry::default(),
    };
    g.orbit_height = a.height.unwrap_or(g.orbit_height);
    g.elevation_mask = a.mask.unwrap_or(g.elevation_mask);
    g.cross_track_offset = a.offset.unwrap_or(g.cross_track_offset);
    g.epoch_step = a.step.unwrap_or(g.epoch_step);
    g.carrier_freq = a.carrier.unwrap_or(g.carrier_freq);
    let scenario = simulate_pass(&g)?;
    match &a.out {
        Some(path) => {
            let mut out = create(path)?;
            scenario.write_csv(&mut out)?;
            out.flush()?;
        }
        None => scenario.write_csv(io::stdout().lock())?,
    }
    Ok(())
}

fn build_specs(strategies: &[Strategy], totals: &[u32]) -> CliResult<Vec<IntegrationSpec>> {
    let mut specs = Vec::new();
    for &s in strategies {
        for &t in totals {
            specs.push(IntegrationSpec::new(s, t).map_err(|e| Failure::Usage(format!("{s} at {t} ms: {e}")))?);
        }
    }
    Ok(specs)
}

fn acquire(a: AcquireArgs) -> CliResult {
    let specs = build_specs(&a.strategy, &a.total_ms)?;
    let sidecar = a.truth.clone().or_else(|| {
        let p = truth_path(&a.input);
        (p != a.input && p.exists()).then_some(p)
    });
    let truth = sidecar.as_deref().map(TruthFile::load).transpose()?;
    if a.aided && truth.is_none() {
        return Err(Failure::Usage("--aided needs a truth sidecar".into()));
    }
    let format = a
        .format
        .or(truth.as_ref().map(|t| t.format))
        .unwrap_or(SampleFormat::Float32Real);
    let meta = SampleFileMeta {
        sample_rate: a.sample_rate.or(truth.as_ref().map(|t| t.sample_rate)).unwrap_or(4.092e6),
        intermediate_freq: a
            .intermediate_freq
            .or(truth.as_ref().map(|t| t.intermediate_freq))
            .unwrap_or(1.25e6),
        format,
        t0: truth.as_ref().map_or(0.0, |t| t.t0),
    };
    let prn = a.prn.or(truth.as_ref().map(|t| t.prn)).unwrap_or(1);
    let correlator = Correlator::new(&generate_code(prn)?, meta.sample_rate, meta.intermediate_freq)?;
    let total = sample_count(&a.input, format)?;
    let source: Box<dyn EpochSource> = match truth {
        Some(t) => Box::new(FileEpochs::open(&a.input, t)?),
        None => {
            let max_ms = specs.iter().map(|s| s.total_ms).max().unwrap_or(1);
            let window = correlator.samples_per_code() as u64 * u64::from(max_ms);
            let count = total / window;
            if count == 0 {
                return Err(Error::param(format!(
                    "{} holds {total} samples, fewer than one {max_ms} ms window",
                    a.input.display()
                ))
                .into());
            }
            let mut epochs = Vec::with_capacity(count as usize);
            for k in 0..count {
                let sig = read_samples(&a.input, &meta, k * window, window)?;
                epochs.push(PassEpoch {
                    t: sig.t0,
                    samples: sig.samples,
                    quadrature: sig.quadrature,
                    truth: EpochTruth {
                        t: sig.t0,
                        doppler: f64::NAN,
                        doppler_rate: 0.0,
                        code_phase: f64::NAN,
                        code_rate: 0.0,
                    },
                    predicted_doppler: a.center,
                });
            }
            Box::new(EpochList {
                step: window as f64 / meta.sample_rate,
                epochs,
            })
        }
    };
    let opts = TimelineOptions {
        window: SearchWindow {
            center: if a.aided {
                SearchCenter::Predicted
            } else {
                SearchCenter::Fixed(a.center)
            },
            half_span: a.half_span,
        },
        threshold: a.threshold,
        indicator: a.indicator,
    };
    let timelines = acquisition_timelines(source.as_ref(), &correlator, &specs, &opts)?;
    let write = |out: &mut dyn Write| -> io::Result<()> {
        writeln!(out, "{RESULT_CSV_HEADER}")?;
        for k in 0..source.len() {
            for tl in &timelines {
                writeln!(out, "{}", tl.results[k].csv_row())?;
            }
        }
        out.flush()
    };
    match &a.out {
        Some(path) => write(&mut create(path)?)?,
        None => write(&mut io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Clone, Copy, PartialEq)]
enum Report {
    Sweep,
    Duration,
}

fn spec_dir(root: &Path, spec: &IntegrationSpec) -> PathBuf {
    root.join(format!("{}_{}ms", spec.strategy, spec.total_ms))
}

fn evaluate_pass(a: EvalArgs, report: Report) -> CliResult {
    let cfg = ScenarioConfig::load(&a.config)?;
    let (specs, skipped) = cfg.specs();
    for (s, t) in skipped {
        eprintln!("skipping {s} at {t} ms: not defined for that length");
    }
    let out_dir = a.out_dir.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let correlator = Correlator::new(
        &generate_code(cfg.signal.prn_id)?,
        cfg.signal.sample_rate,
        cfg.signal.intermediate_freq,
    )?;
    let opts = TimelineOptions {
        window: SearchWindow {
            center: cfg
                .run
                .search_center_hz
                .map_or(SearchCenter::Predicted, SearchCenter::Fixed),
            half_span: cfg.run.half_span_hz,
        },
        threshold: cfg.run.threshold,
        indicator: cfg.run.indicator,
    };
    let timelines = match &a.input {
        Some(input) => {
            let truth = TruthFile::load(&truth_path(input))?;
            let source = FileEpochs::open(input, truth)?;
            acquisition_timelines(&source, &correlator, &specs, &opts)?
        }
        None => {
            let seed = seed_of(a.seed, &cfg)?;
            let scenario = simulate_pass(&cfg.geometry)?;
            let base = SynthParams {
                seed,
                duration: cfg.epoch_window(),
                ..cfg.signal.clone()
            };
            let source = SyntheticPass::new(&scenario, &base, cfg.run.aiding_error_hz)?;
            acquisition_timelines(&source, &correlator, &specs, &opts)?
        }
    };
    fs::create_dir_all(&out_dir)?;
    write_timelines(&out_dir, &timelines)?;
    match report {
        Report::Sweep => write_sweep(&out_dir, &cfg, &timelines)?,
        Report::Duration => {
            let mut out = create(&out_dir.join("duration_vs_T.csv"))?;
            write_duration_csv(&mut out, &timelines)?;
            out.flush()?;
        }
    }
    eprintln!("wrote results for {} strategies to {}", timelines.len(), out_dir.display());
    Ok(())
}

fn write_timelines(root: &Path, timelines: &[Timeline]) -> CliResult {
    for tl in timelines {
        let mut out = create(&spec_dir(root, &tl.spec).join("timeline.csv"))?;
        tl.write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn write_sweep(root: &Path, cfg: &ScenarioConfig, timelines: &[Timeline]) -> CliResult {
    let sw = &cfg.run.sweep;
    let thresholds = threshold_grid(sw.start, sw.stop, sw.step)?;
    let mut bounds = Vec::with_capacity(timelines.len());
    for tl in timelines {
        let curve = pf_sweep(&tl.results, &tl.labels, &thresholds, cfg.run.indicator)?;
        let mut out = create(&spec_dir(root, &tl.spec).join("pf_curve.csv"))?;
        curve.write_csv(&mut out)?;
        out.flush()?;
        bounds.push((tl.spec, threshold_bounds(&curve, sw.target)?));
    }
    let mut out = create(&root.join("bounds.csv"))?;
    write_bounds_csv(&mut out, &bounds)?;
    out.flush()?;
    Ok(())
}
