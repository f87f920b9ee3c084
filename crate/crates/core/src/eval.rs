//! Evaluation against injected truth: per-epoch labels, error rate versus
//! threshold, threshold bounds, and acquisition timelines over a pass.

use std::collections::HashMap;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::acq::{make_plan, CorrelationGrid, Correlator, FrequencyPlan};
use crate::detect::{decide, evaluate, AcqResult, Indicator, RESULT_CSV_HEADER};
use crate::error::{Error, Result};
use crate::geometry::PassScenario;
use crate::integrate::{Accumulator, DetectionGrid, IntegrationSpec};
use crate::prn::generate_code;
use crate::synth::{plan_pass_epochs, synthesize, EpochPlan, SynthParams};

pub const PF_CSV_HEADER: &str = "threshold,pf,miss_rate,false_alarm_rate";
pub const BOUNDS_CSV_HEADER: &str = "strategy,total_ms,lower,upper";
pub const DURATION_CSV_HEADER: &str = "strategy,total_ms,success_s,decided_s";

/// True signal state at the start of an epoch's integration window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochTruth {
    pub t: f64,
    pub doppler: f64,
    pub doppler_rate: f64,
    /// Code delay in samples.
    pub code_phase: f64,
    /// Rate of change of the code delay in samples per second.
    pub code_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLabel {
    pub t: f64,
    pub truth_doppler: f64,
    pub truth_code_phase: f64,
    pub doppler_error: f64,
    pub code_error: f64,
    pub estimate_ok: bool,
}

/// Distance between two positions on a circle of circumference `n`.
pub fn cyclic_error(estimate: f64, truth: f64, n: f64) -> f64 {
    let d = (estimate - truth).rem_euclid(n);
    d.min(n - d)
}

/// Half a bin, widened by the Doppler drift to the middle of the window.
pub fn doppler_tolerance(result: &AcqResult, doppler_rate: f64) -> f64 {
    0.5 * result.bin_width + 0.5 * doppler_rate.abs() * f64::from(result.total_ms) * 1e-3
}

/// Code delay at the middle of the integration window, where an integrated
/// peak settles when code Doppler moves the delay during the window.
pub fn mid_window_code_phase(result: &AcqResult, truth: &EpochTruth) -> f64 {
    let n = result.samples_per_code as f64;
    (truth.code_phase + 0.5 * truth.code_rate * f64::from(result.total_ms) * 1e-3).rem_euclid(n)
}

pub fn label_epoch(result: &AcqResult, truth: &EpochTruth) -> EpochLabel {
    let doppler_error = (result.doppler_hat - truth.doppler).abs();
    let reference = mid_window_code_phase(result, truth);
    let code_error = cyclic_error(
        result.code_phase_hat as f64,
        reference,
        result.samples_per_code as f64,
    );
    EpochLabel {
        t: truth.t,
        truth_doppler: truth.doppler,
        truth_code_phase: reference,
        doppler_error,
        code_error,
        estimate_ok: doppler_error <= doppler_tolerance(result, truth.doppler_rate)
            && code_error <= 1.0,
    }
}

pub fn label_epochs(results: &[AcqResult], truth: &[EpochTruth]) -> Result<Vec<EpochLabel>> {
    if results.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: results.len(),
            right: truth.len(),
        });
    }
    Ok(results.iter().zip(truth).map(|(r, t)| label_epoch(r, t)).collect())
}

/// Combined error rate of threshold decisions against truth labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PfCurve {
    pub thresholds: Vec<f64>,
    pub pf: Vec<f64>,
    /// Correct estimates rejected by the threshold.
    pub miss_rate: Vec<f64>,
    /// Wrong estimates accepted by the threshold.
    pub false_alarm_rate: Vec<f64>,
}

impl PfCurve {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{PF_CSV_HEADER}")?;
        for k in 0..self.thresholds.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.thresholds[k], self.pf[k], self.miss_rate[k], self.false_alarm_rate[k]
            )?;
        }
        Ok(())
    }

    /// Index of the smallest error rate (first one on ties).
    pub fn argmin(&self) -> Option<usize> {
        (0..self.pf.len()).reduce(|a, b| if self.pf[b] < self.pf[a] { b } else { a })
    }
}

pub fn pf_sweep(
    results: &[AcqResult],
    labels: &[EpochLabel],
    thresholds: &[f64],
    indicator: Indicator,
) -> Result<PfCurve> {
    if results.is_empty() {
        return Err(Error::Empty("acquisition results"));
    }
    if thresholds.is_empty() {
        return Err(Error::Empty("thresholds"));
    }
    if results.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: results.len(),
            right: labels.len(),
        });
    }
    if thresholds.iter().any(|t| !t.is_finite())
        || thresholds.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::param("thresholds must be finite and ascending"));
    }
    let total = results.len() as f64;
    let mut curve = PfCurve {
        thresholds: thresholds.to_vec(),
        pf: Vec::with_capacity(thresholds.len()),
        miss_rate: Vec::with_capacity(thresholds.len()),
        false_alarm_rate: Vec::with_capacity(thresholds.len()),
    };
    for &th in thresholds {
        let (mut miss, mut false_alarm) = (0usize, 0usize);
        for (r, l) in results.iter().zip(labels) {
            match (decide(r.indicator_value(indicator), th), l.estimate_ok) {
                (false, true) => miss += 1,
                (true, false) => false_alarm += 1,
                _ => {}
            }
        }
        curve.miss_rate.push(miss as f64 / total);
        curve.false_alarm_rate.push(false_alarm as f64 / total);
        curve.pf.push((miss + false_alarm) as f64 / total);
    }
    Ok(curve)
}

/// Smallest and largest threshold whose error rate is at most `target`.
pub fn threshold_bounds(curve: &PfCurve, target: f64) -> Result<Option<(f64, f64)>> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::param(format!("target {target} outside (0, 1)")));
    }
    let mut inside = curve
        .thresholds
        .iter()
        .zip(&curve.pf)
        .filter(|(_, pf)| **pf <= target)
        .map(|(t, _)| *t);
    Ok(inside.next().map(|lo| (lo, inside.next_back().unwrap_or(lo))))
}

/// `start, start + step, ...` up to and including `stop`.
pub fn threshold_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && start.is_finite() && stop >= start) {
        return Err(Error::param("threshold grid needs step > 0 and stop >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

pub fn write_bounds_csv<W: Write>(
    mut out: W,
    rows: &[(IntegrationSpec, Option<(f64, f64)>)],
) -> std::io::Result<()> {
    writeln!(out, "{BOUNDS_CSV_HEADER}")?;
    for (spec, bounds) in rows {
        match bounds {
            Some((lo, hi)) => writeln!(out, "{},{},{lo},{hi}", spec.strategy, spec.total_ms)?,
            None => writeln!(out, "{},{},,", spec.strategy, spec.total_ms)?,
        }
    }
    Ok(())
}

/// Peak-to-background contrast at a known cell: the cell's value over the mean
/// outside the rectangle of adjacent bins and code phases within one chip.
/// Quadratic strategies are reported on an amplitude scale.
pub fn true_cell_contrast(grid: &DetectionGrid, bin: usize, code_phase: usize) -> Result<f64> {
    let rows = grid.rows();
    if bin >= rows || code_phase >= grid.cols {
        return Err(Error::param(format!(
            "cell ({bin}, {code_phase}) outside a {rows}x{} grid",
            grid.cols
        )));
    }
    let n = grid.cols;
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..rows {
        for j in 0..n {
            let d = j.abs_diff(code_phase);
            let near = i.abs_diff(bin) <= 1 && d.min(n - d) <= grid.samples_per_chip;
            if !near {
                sum += grid.get(i, j);
                count += 1;
            }
        }
    }
    if count == 0 || sum <= 0.0 {
        return Err(Error::ExclusionTooWide);
    }
    let ratio = grid.get(bin, code_phase) / (sum / count as f64);
    Ok(if grid.spec.strategy.is_quadratic() {
        ratio.sqrt()
    } else {
        ratio
    })
}

/// One epoch's integration window plus its truth and a priori Doppler.
#[derive(Debug, Clone, PartialEq)]
pub struct PassEpoch {
    pub t: f64,
    pub samples: Vec<f64>,
    /// Quadrature samples when the epoch comes from a complex capture.
    pub quadrature: Option<Vec<f64>>,
    pub truth: EpochTruth,
    /// Doppler predicted from ephemeris, used to center an aided search.
    pub predicted_doppler: f64,
}

/// Random-access epochs of a pass; implementations must be deterministic.
pub trait EpochSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn epoch_step(&self) -> f64;

    fn epoch(&self, index: usize) -> Result<PassEpoch>;
}

/// Fully materialized epochs (small passes and tests).
#[derive(Debug, Clone)]
pub struct EpochList {
    pub step: f64,
    pub epochs: Vec<PassEpoch>,
}

impl EpochSource for EpochList {
    fn len(&self) -> usize {
        self.epochs.len()
    }

    fn epoch_step(&self) -> f64 {
        self.step
    }

    fn epoch(&self, index: usize) -> Result<PassEpoch> {
        self.epochs
            .get(index)
            .cloned()
            .ok_or_else(|| Error::param(format!("epoch {index} out of range")))
    }
}

/// Epochs synthesized on demand from a pass scenario.
#[derive(Debug, Clone)]
pub struct SyntheticPass {
    plans: Vec<EpochPlan>,
    step: f64,
    chip_rate: f64,
    aiding_error: f64,
}

impl SyntheticPass {
    /// `base.duration` sets the window length per epoch; `aiding_error` is a
    /// fixed bias added to the true Doppler to form the prediction.
    pub fn new(scenario: &PassScenario, base: &SynthParams, aiding_error: f64) -> Result<Self> {
        base.validate()?;
        let code = generate_code(base.prn_id)?;
        Ok(Self {
            plans: plan_pass_epochs(scenario, base)?,
            step: scenario.epoch_step,
            chip_rate: code.chip_rate(),
            aiding_error,
        })
    }

    pub fn plans(&self) -> &[EpochPlan] {
        &self.plans
    }

    pub fn truth(&self, index: usize) -> EpochTruth {
        let p = &self.plans[index];
        EpochTruth {
            t: p.t,
            doppler: p.params.doppler0,
            doppler_rate: p.params.doppler_rate,
            code_phase: p.params.code_phase_samples(self.chip_rate),
            code_rate: p.params.code_rate_samples(),
        }
    }

    pub fn predicted_doppler(&self, index: usize) -> f64 {
        self.plans[index].params.doppler0 + self.aiding_error
    }
}

impl EpochSource for SyntheticPass {
    fn len(&self) -> usize {
        self.plans.len()
    }

    fn epoch_step(&self) -> f64 {
        self.step
    }

    fn epoch(&self, index: usize) -> Result<PassEpoch> {
        let plan = self
            .plans
            .get(index)
            .ok_or_else(|| Error::param(format!("epoch {index} out of range")))?;
        Ok(PassEpoch {
            t: plan.t,
            samples: synthesize(&plan.params)?.samples,
            quadrature: None,
            truth: self.truth(index),
            predicted_doppler: self.predicted_doppler(index),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchCenter {
    Fixed(f64),
    /// Centered on each epoch's predicted Doppler.
    Predicted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchWindow {
    pub center: SearchCenter,
    pub half_span: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineOptions {
    pub window: SearchWindow,
    pub threshold: f64,
    pub indicator: Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineSummary {
    pub epochs: usize,
    /// Time covered by epochs whose estimate matches the truth.
    pub success_s: f64,
    /// First and last epoch whose estimate matches the truth.
    pub success_interval: Option<(f64, f64)>,
    /// Time covered by epochs whose indicator passes the threshold.
    pub decided_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub spec: IntegrationSpec,
    pub results: Vec<AcqResult>,
    pub labels: Vec<EpochLabel>,
    pub summary: TimelineSummary,
}

impl Timeline {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{RESULT_CSV_HEADER},ok")?;
        for (r, l) in self.results.iter().zip(&self.labels) {
            writeln!(out, "{},{}", r.csv_row(), l.estimate_ok)?;
        }
        Ok(())
    }
}

fn summarize(results: &[AcqResult], labels: &[EpochLabel], step: f64) -> TimelineSummary {
    let ok: Vec<&EpochLabel> = labels.iter().filter(|l| l.estimate_ok).collect();
    TimelineSummary {
        epochs: results.len(),
        success_s: ok.len() as f64 * step,
        success_interval: ok.first().zip(ok.last()).map(|(a, b)| (a.t, b.t)),
        decided_s: results.iter().filter(|r| r.decided).count() as f64 * step,
    }
}

fn search_plan(spec: &IntegrationSpec, window: &SearchWindow, predicted: f64) -> Result<FrequencyPlan> {
    let center = match window.center {
        SearchCenter::Fixed(c) => c,
        SearchCenter::Predicted => predicted,
    };
    make_plan(center, window.half_span, spec.coherent_ms())
}

/// Runs every spec on one epoch and applies the detector to each grid.
pub fn process_epoch(
    epoch: &PassEpoch,
    correlator: &Correlator,
    specs: &[IntegrationSpec],
    opts: &TimelineOptions,
) -> Result<Vec<AcqResult>> {
    epoch_grids(epoch, correlator, specs, &opts.window)?
        .iter()
        .map(|g| evaluate(g, epoch.t, opts.threshold, opts.indicator))
        .collect()
}

/// Detection grids for every spec on one epoch. Unit correlations are
/// computed once over the union of all specs' bins and fed to each spec's
/// accumulator.
pub fn epoch_grids(
    epoch: &PassEpoch,
    correlator: &Correlator,
    specs: &[IntegrationSpec],
    window: &SearchWindow,
) -> Result<Vec<DetectionGrid>> {
    let n = correlator.samples_per_code();
    let units = specs.iter().map(|s| s.units()).max().unwrap_or(0);
    let short = |len: usize| len < units * n;
    if short(epoch.samples.len()) || epoch.quadrature.as_ref().is_some_and(|q| short(q.len())) {
        return Err(Error::param(format!(
            "epoch at t={} s holds {} samples, {} needed",
            epoch.t,
            epoch.samples.len(),
            units * n
        )));
    }
    let plans = specs
        .iter()
        .map(|s| search_plan(s, window, epoch.predicted_doppler))
        .collect::<Result<Vec<_>>>()?;
    let mut union = Vec::new();
    let mut slot: HashMap<i64, usize> = HashMap::new();
    let row_maps: Vec<Vec<usize>> = plans
        .iter()
        .map(|p| {
            p.bins
                .iter()
                .map(|&b| {
                    *slot.entry((b * 1e6).round() as i64).or_insert_with(|| {
                        union.push(b);
                        union.len() - 1
                    })
                })
                .collect()
        })
        .collect();
    let mut accs = specs
        .iter()
        .zip(&plans)
        .map(|(s, p)| Accumulator::new(*s, p.clone(), n, correlator.samples_per_chip()))
        .collect::<Result<Vec<_>>>()?;
    for m in 0..units {
        let span = m * n..(m + 1) * n;
        let first = (m * n) as u64;
        let rows = match &epoch.quadrature {
            None => correlator.correlate(&epoch.samples[span], first, &union)?,
            Some(q) => {
                let unit: Vec<Complex64> = epoch.samples[span.clone()]
                    .iter()
                    .zip(&q[span])
                    .map(|(&i, &q)| Complex64::new(i, q))
                    .collect();
                correlator.correlate_complex(&unit, first, &union)?
            }
        };
        let mut rows = Some(rows);
        let single = accs.len() == 1;
        for ((acc, plan), map) in accs.iter_mut().zip(&plans).zip(&row_maps) {
            if acc.is_full() {
                continue;
            }
            let values = match rows.take_if(|_| single) {
                // One spec searches exactly the union, in order.
                Some(all) => all,
                None => {
                    let all = rows.as_deref().unwrap_or_default();
                    let mut values = Vec::with_capacity(map.len() * n);
                    for &r in map {
                        values.extend_from_slice(&all[r * n..(r + 1) * n]);
                    }
                    values
                }
            };
            let grid = CorrelationGrid {
                values,
                plan: plan.clone(),
                samples_per_code: n,
                samples_per_chip: correlator.samples_per_chip(),
            };
            acc.push_owned(grid)?;
        }
    }
    accs.into_iter().map(Accumulator::finish).collect()
}

/// One acquisition of `samples` (starting at a code-period boundary of the
/// local time base) with a fixed search window.
pub fn acquire_window(
    correlator: &Correlator,
    samples: &[f64],
    spec: IntegrationSpec,
    opts: &TimelineOptions,
) -> Result<AcqResult> {
    let nan = f64::NAN;
    let epoch = PassEpoch {
        t: 0.0,
        samples: samples.to_vec(),
        quadrature: None,
        truth: EpochTruth {
            t: 0.0,
            doppler: nan,
            doppler_rate: nan,
            code_phase: nan,
            code_rate: 0.0,
        },
        predicted_doppler: nan,
    };
    if matches!(opts.window.center, SearchCenter::Predicted) {
        return Err(Error::param("a single window needs a fixed search center"));
    }
    let needed = spec.units() * correlator.samples_per_code();
    if samples.len() < needed {
        return Err(Error::UnitLength {
            expected: needed,
            actual: samples.len(),
        });
    }
    Ok(process_epoch(&epoch, correlator, &[spec], opts)?.remove(0))
}

/// Timelines for several specs over the same pass, sharing unit correlations.
/// Epochs run in parallel; the output order is the epoch order.
pub fn acquisition_timelines(
    source: &dyn EpochSource,
    correlator: &Correlator,
    specs: &[IntegrationSpec],
    opts: &TimelineOptions,
) -> Result<Vec<Timeline>> {
    if specs.is_empty() {
        return Err(Error::Empty("integration specs"));
    }
    if source.is_empty() {
        return Err(Error::Empty("pass epochs"));
    }
    let per_epoch = (0..source.len())
        .into_par_iter()
        .map(|k| {
            let epoch = source.epoch(k)?;
            let results = process_epoch(&epoch, correlator, specs, opts)?;
            Ok((epoch.truth, results))
        })
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<EpochTruth> = per_epoch.iter().map(|(t, _)| *t).collect();
    specs
        .iter()
        .enumerate()
        .map(|(s, spec)| {
            let results: Vec<AcqResult> = per_epoch.iter().map(|(_, r)| r[s].clone()).collect();
            let labels = label_epochs(&results, &truth)?;
            let summary = summarize(&results, &labels, source.epoch_step());
            Ok(Timeline {
                spec: *spec,
                results,
                labels,
                summary,
            })
        })
        .collect()
}

pub fn acquisition_timeline(
    source: &dyn EpochSource,
    correlator: &Correlator,
    spec: IntegrationSpec,
    opts: &TimelineOptions,
) -> Result<Timeline> {
    Ok(acquisition_timelines(source, correlator, &[spec], opts)?.remove(0))
}

pub fn write_duration_csv<W: Write>(mut out: W, timelines: &[Timeline]) -> std::io::Result<()> {
    writeln!(out, "{DURATION_CSV_HEADER}")?;
    for tl in timelines {
        writeln!(
            out,
            "{},{},{},{}",
            tl.spec.strategy, tl.spec.total_ms, tl.summary.success_s, tl.summary.decided_s
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::Strategy;
    use crate::synth::DataBits;
    use proptest::prelude::*;

    fn result(doppler: f64, code: usize, mtsmr: f64) -> AcqResult {
        AcqResult {
            t: 0.0,
            strategy: Strategy::Coherent,
            total_ms: 1,
            doppler_hat: doppler,
            code_phase_hat: code,
            mtsmr,
            mtmr: mtsmr,
            decided: false,
            threshold_used: 2.5,
            indicator: Indicator::Mtsmr,
            bin_width: 500.0,
            samples_per_code: 4092,
        }
    }

    fn truth(doppler: f64, code: f64) -> EpochTruth {
        EpochTruth {
            t: 0.0,
            doppler,
            doppler_rate: 0.0,
            code_phase: code,
            code_rate: 0.0,
        }
    }

    fn label(ok: bool) -> EpochLabel {
        EpochLabel {
            t: 0.0,
            truth_doppler: 0.0,
            truth_code_phase: 0.0,
            doppler_error: 0.0,
            code_error: 0.0,
            estimate_ok: ok,
        }
    }

    #[test]
    fn labels_use_half_bin_and_one_sample() {
        assert!(label_epoch(&result(1000.0, 10, 3.0), &truth(1000.0, 10.0)).estimate_ok);
        assert!(!label_epoch(&result(1500.0, 10, 3.0), &truth(1000.0, 10.0)).estimate_ok);
        assert!(label_epoch(&result(1250.0, 10, 3.0), &truth(1000.0, 10.0)).estimate_ok);
        assert!(label_epoch(&result(0.0, 0, 3.0), &truth(0.0, 4091.2)).estimate_ok);
        assert!(!label_epoch(&result(0.0, 12, 3.0), &truth(0.0, 10.5)).estimate_ok);
        let mut drifting = truth(1000.0, 10.0);
        drifting.doppler_rate = -400.0;
        let mut r = result(1255.0, 10, 3.0);
        assert!(!label_epoch(&r, &drifting).estimate_ok);
        r.total_ms = 40;
        assert!(label_epoch(&r, &drifting).estimate_ok);
        assert!(label_epochs(&[r], &[]).is_err());
    }

    #[test]
    fn pf_examples() {
        let th: Vec<f64> = (1..=12).map(f64::from).collect();
        let rs = vec![result(0.0, 0, 10.0); 5];
        let good = vec![label(true); 5];
        let c = pf_sweep(&rs, &good, &th, Indicator::Mtsmr).unwrap();
        for (t, pf) in c.thresholds.iter().zip(&c.pf) {
            assert_eq!(*pf, if *t <= 10.0 { 0.0 } else { 1.0 });
        }
        let bad = vec![label(false); 5];
        let c = pf_sweep(&rs, &bad, &th, Indicator::Mtsmr).unwrap();
        for (t, pf) in c.thresholds.iter().zip(&c.pf) {
            assert_eq!(*pf, if *t <= 10.0 { 1.0 } else { 0.0 });
        }
        assert!(pf_sweep(&rs, &bad, &[2.0, 1.0], Indicator::Mtsmr).is_err());
        assert!(pf_sweep(&[], &[], &th, Indicator::Mtsmr).is_err());
    }

    #[test]
    fn bounds_examples() {
        let curve = PfCurve {
            thresholds: vec![1.0, 1.5, 2.0, 2.5, 3.0, 3.5],
            pf: vec![0.5, 0.2, 0.1, 0.05, 0.1, 0.4],
            miss_rate: vec![0.0; 6],
            false_alarm_rate: vec![0.0; 6],
        };
        assert_eq!(threshold_bounds(&curve, 0.10).unwrap(), Some((2.0, 3.0)));
        assert_eq!(threshold_bounds(&curve, 0.01).unwrap(), None);
        assert!(threshold_bounds(&curve, 1.5).is_err());
        assert_eq!(curve.argmin(), Some(3));
    }

    #[test]
    fn threshold_grid_is_inclusive() {
        let g = threshold_grid(1.0, 4.0, 0.05).unwrap();
        assert_eq!(g.len(), 61);
        assert!((g[60] - 4.0).abs() < 1e-12);
    }

    fn short_pass(cn0: Option<f64>) -> (SyntheticPass, Correlator) {
        let ranges: Vec<f64> = (0..5).map(|k| 1.2e6 - 6e3 * k as f64).collect();
        let scenario = PassScenario::from_ranges(1.0, 1.5e9, &ranges, &[30.0; 5]).unwrap();
        let base = SynthParams {
            duration: 5e-3,
            data_bits: DataBits::Random,
            cn0,
            seed: 5,
            ..SynthParams::default()
        };
        let pass = SyntheticPass::new(&scenario, &base, 40.0).unwrap();
        let corr = Correlator::new(&generate_code(1).unwrap(), 4.092e6, 1.25e6).unwrap();
        (pass, corr)
    }

    fn opts() -> TimelineOptions {
        TimelineOptions {
            window: SearchWindow {
                center: SearchCenter::Predicted,
                half_span: 300.0,
            },
            threshold: 2.5,
            indicator: Indicator::Mtsmr,
        }
    }

    #[test]
    fn strong_pass_succeeds_everywhere() {
        let (pass, corr) = short_pass(None);
        let specs = [
            IntegrationSpec::new(Strategy::Coherent, 1).unwrap(),
            IntegrationSpec::new(Strategy::NonCoherent, 5).unwrap(),
            IntegrationSpec::new(Strategy::Differential, 5).unwrap(),
        ];
        let tls = acquisition_timelines(&pass, &corr, &specs, &opts()).unwrap();
        for tl in &tls {
            assert_eq!(tl.summary.success_s, 5.0, "{:?}", tl.labels);
            assert_eq!(tl.summary.success_interval, Some((0.0, 4.0)));
        }
        // Shared computation gives the same answer as a lone run.
        let alone = acquisition_timeline(&pass, &corr, specs[1], &opts()).unwrap();
        assert_eq!(alone, tls[1]);
        let mut csv = Vec::new();
        tls[0].write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t_s,strategy,total_ms,doppler_hz,code_phase_samples,mtsmr,mtmr,decided,ok\n"));
        assert_eq!(text.lines().count(), 6);
    }

    #[test]
    fn short_epochs_are_rejected() {
        let (pass, corr) = short_pass(None);
        let spec = IntegrationSpec::new(Strategy::Coherent, 10).unwrap();
        assert!(acquisition_timeline(&pass, &corr, spec, &opts()).is_err());
    }

    #[test]
    fn contrast_scales_quadratic_strategies() {
        let plan = make_plan(0.0, 500.0, 1).unwrap();
        let mut values = vec![1.0; 3 * 20];
        values[20 + 5] = 16.0;
        let mut grid = DetectionGrid {
            values,
            cols: 20,
            samples_per_chip: 1,
            spec: IntegrationSpec::new(Strategy::NonCoherent, 2).unwrap(),
            plan,
        };
        assert_eq!(true_cell_contrast(&grid, 1, 5).unwrap(), 16.0);
        grid.spec = IntegrationSpec::new(Strategy::Differential, 2).unwrap();
        assert_eq!(true_cell_contrast(&grid, 1, 5).unwrap(), 4.0);
        assert!(true_cell_contrast(&grid, 3, 5).is_err());
    }

    proptest! {
        #[test]
        fn pf_components_are_monotone(
            cases in prop::collection::vec((1.0f64..6.0, any::<bool>()), 1..60),
        ) {
            let rs: Vec<AcqResult> = cases.iter().map(|(m, _)| result(0.0, 0, *m)).collect();
            let ls: Vec<EpochLabel> = cases.iter().map(|(_, ok)| label(*ok)).collect();
            let th = threshold_grid(1.0, 6.0, 0.1).unwrap();
            let c = pf_sweep(&rs, &ls, &th, Indicator::Mtsmr).unwrap();
            for k in 1..th.len() {
                prop_assert!(c.false_alarm_rate[k] <= c.false_alarm_rate[k - 1]);
                prop_assert!(c.miss_rate[k] >= c.miss_rate[k - 1]);
                prop_assert!((c.pf[k] - c.miss_rate[k] - c.false_alarm_rate[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn bounds_nest(pf in prop::collection::vec(0.0f64..1.0, 2..40), t1 in 0.01f64..0.98, dt in 0.0f64..0.5) {
            let t2 = (t1 + dt).min(0.99);
            let n = pf.len();
            let curve = PfCurve {
                thresholds: (0..n).map(|k| k as f64 * 0.1).collect(),
                pf,
                miss_rate: vec![0.0; n],
                false_alarm_rate: vec![0.0; n],
            };
            if let Some((lo1, hi1)) = threshold_bounds(&curve, t1).unwrap() {
                let (lo2, hi2) = threshold_bounds(&curve, t2).unwrap().unwrap();
                prop_assert!(lo2 <= lo1 && hi1 <= hi2);
            }
        }
    }
}
