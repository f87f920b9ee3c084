//! Peak search and peak-to-background indicators on a detection grid.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{DetectionGrid, Strategy};

pub const RESULT_CSV_HEADER: &str =
    "t_s,strategy,total_ms,doppler_hz,code_phase_samples,mtsmr,mtmr,decided";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub code_phase: usize,
    pub value: f64,
}

/// Which indicator is compared against the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Indicator {
    /// Peak over the strongest same-row cell outside the exclusion window.
    #[default]
    Mtsmr,
    /// Peak over the mean of the grid outside the exclusion rectangle.
    Mtmr,
}

impl fmt::Display for Indicator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Indicator::Mtsmr => "mtsmr",
            Indicator::Mtmr => "mtmr",
        })
    }
}

impl FromStr for Indicator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mtsmr" => Ok(Indicator::Mtsmr),
            "mtmr" => Ok(Indicator::Mtmr),
            _ => Err(Error::param(format!("unknown indicator `{s}`"))),
        }
    }
}

/// Location of the largest value; ties go to the lowest bin, then the lowest
/// code phase.
pub fn peak_of(values: &[f64], cols: usize) -> Result<Peak> {
    if values.is_empty() || cols == 0 {
        return Err(Error::EmptyGrid);
    }
    if !values.len().is_multiple_of(cols) {
        return Err(Error::Shape(format!(
            "{} values do not fill rows of {cols}",
            values.len()
        )));
    }
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    Ok(Peak {
        bin: best / cols,
        code_phase: best % cols,
        value: values[best],
    })
}

pub fn peak(grid: &DetectionGrid) -> Result<Peak> {
    peak_of(&grid.values, grid.cols)
}

fn cyclic_distance(a: usize, b: usize, n: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(n - d)
}

/// Peak over the largest value in the peak's row, skipping code phases within
/// `exclusion` samples (cyclically) of the peak.
pub fn mtsmr_of(values: &[f64], cols: usize, exclusion: usize) -> Result<f64> {
    mtsmr_at(values, cols, exclusion, &peak_of(values, cols)?)
}

fn mtsmr_at(values: &[f64], cols: usize, exclusion: usize, p: &Peak) -> Result<f64> {
    if 2 * exclusion + 1 >= cols {
        return Err(Error::ExclusionTooWide);
    }
    let row = &values[p.bin * cols..(p.bin + 1) * cols];
    let second = row
        .iter()
        .enumerate()
        .filter(|(j, _)| cyclic_distance(*j, p.code_phase, cols) > exclusion)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(p.value / second)
}

/// Peak over the mean of all cells outside the rectangle of bins within one of
/// the peak and code phases within `exclusion` samples (cyclically).
pub fn mtmr_of(values: &[f64], cols: usize, exclusion: usize) -> Result<f64> {
    mtmr_at(values, cols, exclusion, &peak_of(values, cols)?)
}

fn mtmr_at(values: &[f64], cols: usize, exclusion: usize, p: &Peak) -> Result<f64> {
    let rows = values.len() / cols;
    let bins = p.bin.saturating_sub(1)..(p.bin + 2).min(rows);
    // Cyclic code-phase window, each column counted once even if it wraps
    // onto itself.
    let width = (2 * exclusion + 1).min(cols);
    let first = (p.code_phase + cols - exclusion % cols) % cols;
    let inside_count = bins.len() * width;
    let count = values.len() - inside_count;
    if count == 0 {
        return Err(Error::ExclusionTooWide);
    }
    let mut inside = 0.0;
    for i in bins {
        let row = &values[i * cols..(i + 1) * cols];
        inside += (0..width).map(|d| row[(first + d) % cols]).sum::<f64>();
    }
    let total: f64 = values.iter().sum();
    Ok(p.value / ((total - inside) / count as f64))
}

pub fn mtsmr(grid: &DetectionGrid) -> Result<f64> {
    mtsmr_of(&grid.values, grid.cols, grid.samples_per_chip)
}

pub fn mtmr(grid: &DetectionGrid) -> Result<f64> {
    mtmr_of(&grid.values, grid.cols, grid.samples_per_chip)
}

pub fn decide(indicator: f64, threshold: f64) -> bool {
    indicator >= threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcqResult {
    pub t: f64,
    pub strategy: Strategy,
    pub total_ms: u32,
    pub doppler_hat: f64,
    pub code_phase_hat: usize,
    pub mtsmr: f64,
    pub mtmr: f64,
    pub decided: bool,
    pub threshold_used: f64,
    pub indicator: Indicator,
    /// Bin width of the plan that produced the estimate.
    pub bin_width: f64,
    pub samples_per_code: usize,
}

impl AcqResult {
    pub fn indicator_value(&self, indicator: Indicator) -> f64 {
        match indicator {
            Indicator::Mtsmr => self.mtsmr,
            Indicator::Mtmr => self.mtmr,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.t,
            self.strategy,
            self.total_ms,
            self.doppler_hat,
            self.code_phase_hat,
            self.mtsmr,
            self.mtmr,
            self.decided
        )
    }
}

/// Full detector pass over one grid.
pub fn evaluate(
    grid: &DetectionGrid,
    t: f64,
    threshold: f64,
    indicator: Indicator,
) -> Result<AcqResult> {
    let p = peak(grid)?;
    let s = mtsmr_at(&grid.values, grid.cols, grid.samples_per_chip, &p)?;
    let m = mtmr_at(&grid.values, grid.cols, grid.samples_per_chip, &p)?;
    let used = match indicator {
        Indicator::Mtsmr => s,
        Indicator::Mtmr => m,
    };
    Ok(AcqResult {
        t,
        strategy: grid.spec.strategy,
        total_ms: grid.spec.total_ms,
        doppler_hat: grid.plan.bins[p.bin],
        code_phase_hat: p.code_phase,
        mtsmr: s,
        mtmr: m,
        decided: decide(used, threshold),
        threshold_used: threshold,
        indicator,
        bin_width: grid.plan.bin_width,
        samples_per_code: grid.cols,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_mtsmr(values: &[f64], cols: usize, excl: usize) -> f64 {
        let p = peak_of(values, cols).unwrap();
        let mut best = f64::NEG_INFINITY;
        for j in 0..cols {
            let d = (j as i64 - p.code_phase as i64).rem_euclid(cols as i64) as usize;
            if d > excl && cols - d > excl {
                best = best.max(values[p.bin * cols + j]);
            }
        }
        p.value / best
    }

    #[test]
    fn worked_row() {
        let row = [10.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0, 0.0];
        assert_eq!(mtsmr_of(&row, 8, 2).unwrap(), 2.5);
        // Cyclic window around j=0 excludes 6,7,0,1,2.
        let row = [10.0, 0.0, 0.0, 4.0, 0.0, 0.0, 9.0, 0.0];
        assert_eq!(mtsmr_of(&row, 8, 2).unwrap(), 2.5);
    }

    #[test]
    fn flat_grid_gives_one() {
        let v = vec![3.0; 40];
        assert_eq!(mtsmr_of(&v, 10, 2).unwrap(), 1.0);
        assert_eq!(mtmr_of(&v, 10, 2).unwrap(), 1.0);
    }

    #[test]
    fn tie_break_lowest_index() {
        let v = [0.0, 5.0, 5.0, 0.0, 5.0, 0.0];
        let p = peak_of(&v, 3).unwrap();
        assert_eq!((p.bin, p.code_phase), (0, 1));
    }

    #[test]
    fn mtmr_excludes_rectangle() {
        // 3 rows x 6 cols, peak at (1, 0), exclusion 1: rows 0..=2, cols {5,0,1}.
        let mut v = vec![1.0; 18];
        v[6] = 120.0;
        for i in 0..3 {
            v[i * 6 + 1] = 100.0;
            v[i * 6 + 5] = 100.0;
        }
        v[0] = 11.0;
        assert_eq!(mtmr_of(&v, 6, 1).unwrap(), 120.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(peak_of(&[], 4), Err(Error::EmptyGrid)));
        assert!(matches!(mtsmr_of(&[1.0; 5], 5, 2), Err(Error::ExclusionTooWide)));
        assert!(matches!(mtmr_of(&[1.0; 5], 5, 2), Err(Error::ExclusionTooWide)));
    }

    #[test]
    fn decide_is_inclusive() {
        assert!(decide(2.0, 2.0));
        assert!(!decide(1.999, 2.0));
    }

    proptest! {
        #[test]
        fn mtsmr_matches_brute_and_is_scale_free(
            values in prop::collection::vec(0.01f64..100.0, 24),
            scale in 0.001f64..1000.0,
        ) {
            let got = mtsmr_of(&values, 8, 2).unwrap();
            prop_assert!((got - brute_mtsmr(&values, 8, 2)).abs() < 1e-12 * got);
            prop_assert!(got >= 1.0);
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            prop_assert!((mtsmr_of(&scaled, 8, 2).unwrap() - got).abs() < 1e-9 * got);
            prop_assert!((mtmr_of(&scaled, 8, 2).unwrap() - mtmr_of(&values, 8, 2).unwrap()).abs()
                < 1e-9 * got.max(1.0) * 10.0);
        }
    }
}
