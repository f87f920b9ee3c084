//! The 1 ms processing unit: parallel code-phase search by FFT circular
//! correlation, one complex grid (Doppler bin x code-phase sample) per unit.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::prn::{sample_code, ChipSequence};

/// Search bin width in Hz for a coherent span of `coherent_ms`.
pub fn bin_width(coherent_ms: u32) -> f64 {
    500.0 / f64::from(coherent_ms)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyPlan {
    pub center: f64,
    pub half_span: f64,
    pub bin_width: f64,
    pub bins: Vec<f64>,
}

impl FrequencyPlan {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Index of the bin closest to `freq`.
    pub fn nearest(&self, freq: f64) -> usize {
        let side = (self.bins.len() / 2) as f64;
        let k = ((freq - self.center) / self.bin_width).round().clamp(-side, side);
        (k + side) as usize
    }
}

pub fn make_plan(center: f64, half_span: f64, total_coh_ms: u32) -> Result<FrequencyPlan> {
    if !(half_span.is_finite() && half_span > 0.0) {
        return Err(Error::param(format!("half span {half_span} must be positive")));
    }
    if !center.is_finite() {
        return Err(Error::param("plan center must be finite"));
    }
    if total_coh_ms == 0 {
        return Err(Error::param("coherent span must be at least 1 ms"));
    }
    let bw = bin_width(total_coh_ms);
    let side = (half_span / bw).ceil() as i64;
    let bins = (-side..=side).map(|k| center + k as f64 * bw).collect();
    Ok(FrequencyPlan {
        center,
        half_span,
        bin_width: bw,
        bins,
    })
}

/// Complex correlation values indexed `(bin, code-phase sample)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGrid {
    pub values: Vec<Complex64>,
    pub plan: FrequencyPlan,
    pub samples_per_code: usize,
    pub samples_per_chip: usize,
}

impl CorrelationGrid {
    pub fn rows(&self) -> usize {
        self.plan.len()
    }

    pub fn cols(&self) -> usize {
        self.samples_per_code
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.samples_per_code..(i + 1) * self.samples_per_code]
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.samples_per_code + j]
    }

    /// Same data scaled by a complex factor (handy for invariance checks).
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Reusable correlation engine for one code at one sample rate and IF.
///
/// The conjugate spectrum of the sampled replica is computed once. Bins whose
/// mixing frequencies differ by a whole number of DFT bins share one forward
/// transform (the shift is an exact circular rotation of the spectrum).
pub struct Correlator {
    sample_rate: f64,
    intermediate_freq: f64,
    n: usize,
    samples_per_chip: usize,
    code_fft_conj: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Correlator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Correlator")
            .field("sample_rate", &self.sample_rate)
            .field("intermediate_freq", &self.intermediate_freq)
            .field("n", &self.n)
            .finish()
    }
}

/// `exp(-2πi·cycles_per_sample·k)` for `k` in `0..n`, by complex recurrence
/// reseeded every 256 samples so rounding error stays near machine precision.
fn mixer(cycles_per_sample: f64, n: usize) -> impl Iterator<Item = Complex64> {
    let step = Complex64::from_polar(1.0, -2.0 * PI * cycles_per_sample);
    let mut w = Complex64::new(1.0, 0.0);
    (0..n).map(move |k| {
        if k % 256 == 0 {
            w = Complex64::from_polar(1.0, -2.0 * PI * cycles_per_sample * k as f64);
        }
        let out = w;
        w *= step;
        out
    })
}

impl Correlator {
    pub fn new(code: &ChipSequence, sample_rate: f64, intermediate_freq: f64) -> Result<Self> {
        if !intermediate_freq.is_finite() {
            return Err(Error::param("intermediate frequency must be finite"));
        }
        let exact = sample_rate * code.period();
        if (exact - exact.round()).abs() > 1e-6 {
            return Err(Error::param(format!(
                "one code period spans {exact} samples; it must be a whole number"
            )));
        }
        let replica = sample_code(code, sample_rate, 0.0, 1.0)?;
        let n = replica.len();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let mut spec: Vec<Complex64> = replica.iter().map(|&c| Complex64::new(c, 0.0)).collect();
        fwd.process(&mut spec);
        let code_fft_conj = spec.into_iter().map(|v| v.conj()).collect();
        Ok(Self {
            sample_rate,
            intermediate_freq,
            n,
            samples_per_chip: (sample_rate / code.chip_rate()).round() as usize,
            code_fft_conj,
            fwd,
            inv,
        })
    }

    pub fn samples_per_code(&self) -> usize {
        self.n
    }

    pub fn samples_per_chip(&self) -> usize {
        self.samples_per_chip
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn intermediate_freq(&self) -> f64 {
        self.intermediate_freq
    }

    /// Correlation rows for Doppler offsets `offsets` on one unit whose first
    /// sample has absolute index `first_sample` (keeps the local oscillator
    /// phase continuous across units). Rows are concatenated, one row of
    /// `samples_per_code` lags per offset.
    pub fn correlate(&self, unit: &[f64], first_sample: u64, offsets: &[f64]) -> Result<Vec<Complex64>> {
        if unit.len() != self.n {
            return Err(Error::UnitLength {
                expected: self.n,
                actual: unit.len(),
            });
        }
        Ok(self.correlate_with(|k| Complex64::new(unit[k], 0.0), first_sample, offsets))
    }

    /// Same as [`Correlator::correlate`] for complex (I/Q) samples.
    pub fn correlate_complex(
        &self,
        unit: &[Complex64],
        first_sample: u64,
        offsets: &[f64],
    ) -> Result<Vec<Complex64>> {
        if unit.len() != self.n {
            return Err(Error::UnitLength {
                expected: self.n,
                actual: unit.len(),
            });
        }
        Ok(self.correlate_with(|k| unit[k], first_sample, offsets))
    }

    fn correlate_with(
        &self,
        sample: impl Fn(usize) -> Complex64,
        first_sample: u64,
        offsets: &[f64],
    ) -> Vec<Complex64> {
        let n = self.n;
        let nf = n as f64;
        let mut scratch =
            vec![Complex64::default(); self.fwd.get_inplace_scratch_len().max(self.inv.get_inplace_scratch_len())];
        // Fractional DFT shift -> forward spectrum of the pre-mixed unit.
        let mut spectra: HashMap<u64, Vec<Complex64>> = HashMap::new();
        let mut out = vec![Complex64::default(); offsets.len() * n];
        for (&offset, row) in offsets.iter().zip(out.chunks_exact_mut(n)) {
            let f = self.intermediate_freq + offset;
            let shift = f * nf / self.sample_rate;
            // Rounded to 1e-11 bin so offsets a whole bin apart share a key;
            // the induced phase error stays far below 1e-9 of the peak.
            let shift = (shift * 1e11).round() / 1e11;
            let whole = shift.floor();
            let frac = shift - whole;
            let spectrum = spectra.entry(frac.to_bits()).or_insert_with(|| {
                let mut buf: Vec<Complex64> = mixer(frac / nf, n)
                    .enumerate()
                    .map(|(k, w)| sample(k) * w)
                    .collect();
                self.fwd.process_with_scratch(&mut buf, &mut scratch);
                buf
            });
            let rot = whole.rem_euclid(nf) as usize;
            // The local oscillator phase at the unit start and the inverse
            // transform scaling are folded into the spectrum product.
            let cycles = (f * first_sample as f64 / self.sample_rate).fract();
            let lo = Complex64::from_polar(1.0 / nf, -2.0 * PI * cycles);
            let (head, tail) = spectrum.split_at(rot);
            let (row_head, row_tail) = row.split_at_mut(n - rot);
            for (dst, (s, c)) in row_head.iter_mut().zip(tail.iter().zip(&self.code_fft_conj)) {
                *dst = s * c * lo;
            }
            for (dst, (s, c)) in row_tail.iter_mut().zip(head.iter().zip(&self.code_fft_conj[n - rot..])) {
                *dst = s * c * lo;
            }
            self.inv.process_with_scratch(row, &mut scratch);
        }
        out
    }

    pub fn process_unit_at(
        &self,
        unit: &[f64],
        first_sample: u64,
        plan: &FrequencyPlan,
    ) -> Result<CorrelationGrid> {
        let rows = self.correlate(unit, first_sample, &plan.bins)?;
        Ok(self.assemble(rows, plan))
    }

    /// Grid from rows produced by [`Correlator::correlate`] for `plan.bins`.
    pub fn assemble(&self, values: Vec<Complex64>, plan: &FrequencyPlan) -> CorrelationGrid {
        CorrelationGrid {
            values,
            plan: plan.clone(),
            samples_per_code: self.n,
            samples_per_chip: self.samples_per_chip,
        }
    }

    pub fn process_unit(&self, unit: &[f64], plan: &FrequencyPlan) -> Result<CorrelationGrid> {
        self.process_unit_at(unit, 0, plan)
    }

    /// One grid per consecutive unit of `samples`.
    pub fn process_units(
        &self,
        samples: &[f64],
        plan: &FrequencyPlan,
    ) -> Result<Vec<CorrelationGrid>> {
        if samples.is_empty() || !samples.len().is_multiple_of(self.n) {
            return Err(Error::UnitLength {
                expected: self.n * (samples.len() / self.n).max(1),
                actual: samples.len(),
            });
        }
        samples
            .par_chunks(self.n)
            .enumerate()
            .map(|(m, unit)| self.process_unit_at(unit, (m * self.n) as u64, plan))
            .collect()
    }
}

/// One-shot form of [`Correlator::process_unit`].
pub fn process_unit(
    unit: &[f64],
    sample_rate: f64,
    intermediate_freq: f64,
    code: &ChipSequence,
    plan: &FrequencyPlan,
) -> Result<CorrelationGrid> {
    Correlator::new(code, sample_rate, intermediate_freq)?.process_unit(unit, plan)
}

/// One-shot form of [`Correlator::process_units`].
pub fn process_units(
    samples: &[f64],
    sample_rate: f64,
    intermediate_freq: f64,
    code: &ChipSequence,
    plan: &FrequencyPlan,
) -> Result<Vec<CorrelationGrid>> {
    Correlator::new(code, sample_rate, intermediate_freq)?.process_units(samples, plan)
}
