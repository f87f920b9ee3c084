//! Combination of M unit grids into one detection grid.
//!
//! Every strategy is a cellwise fold in ascending unit order, implemented as a
//! streaming [`Accumulator`] so long integrations never hold all unit grids.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::acq::{CorrelationGrid, FrequencyPlan};
use crate::error::{Error, Result};

/// Units per alternate-half-bit block (10 ms at 1 ms per unit).
pub const HALF_BIT_UNITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Coherent,
    NonCoherent,
    PreGuess,
    Differential,
    AlternateHalfBit,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Coherent,
        Strategy::NonCoherent,
        Strategy::PreGuess,
        Strategy::Differential,
        Strategy::AlternateHalfBit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Coherent => "coherent",
            Strategy::NonCoherent => "non-coherent",
            Strategy::PreGuess => "pre-guess",
            Strategy::Differential => "differential",
            Strategy::AlternateHalfBit => "alternate-half-bit",
        }
    }

    /// Whether the strategy's output is quadratic in signal amplitude.
    pub fn is_quadratic(self) -> bool {
        matches!(self, Strategy::Differential)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::param(format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IntegrationSpec {
    pub strategy: Strategy,
    pub unit_ms: u32,
    pub total_ms: u32,
}

impl IntegrationSpec {
    pub fn new(strategy: Strategy, total_ms: u32) -> Result<Self> {
        let spec = Self {
            strategy,
            unit_ms: 1,
            total_ms,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.unit_ms != 1 {
            return Err(Error::param("the processing unit is fixed at 1 ms"));
        }
        if self.total_ms == 0 || !self.total_ms.is_multiple_of(self.unit_ms) {
            return Err(Error::param(format!(
                "total {} ms is not a positive multiple of the unit",
                self.total_ms
            )));
        }
        match self.strategy {
            Strategy::Differential if self.total_ms < 2 => Err(Error::TooFewUnits(self.units())),
            Strategy::AlternateHalfBit if !self.total_ms.is_multiple_of(2 * HALF_BIT_UNITS as u32) => {
                Err(Error::param(format!(
                    "alternate half-bit needs a multiple of 20 ms, got {}",
                    self.total_ms
                )))
            }
            _ => Ok(()),
        }
    }

    /// M, the number of processing units.
    pub fn units(&self) -> usize {
        (self.total_ms / self.unit_ms) as usize
    }

    /// Span over which signal is summed with phase retained; sets the bin width.
    pub fn coherent_ms(&self) -> u32 {
        match self.strategy {
            Strategy::Coherent | Strategy::PreGuess => self.total_ms,
            Strategy::AlternateHalfBit => HALF_BIT_UNITS as u32 * self.unit_ms,
            Strategy::NonCoherent | Strategy::Differential => self.unit_ms,
        }
    }
}

/// Non-negative detection values with the same shape as the unit grids.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionGrid {
    pub values: Vec<f64>,
    pub cols: usize,
    pub samples_per_chip: usize,
    pub spec: IntegrationSpec,
    pub plan: FrequencyPlan,
}

impl DetectionGrid {
    pub fn rows(&self) -> usize {
        if self.cols == 0 {
            0
        } else {
            self.values.len() / self.cols
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// `|z|` without the overflow guard of `hypot`; correlation sums stay far
/// from the range where squaring could overflow.
#[inline]
pub fn magnitude(z: Complex64) -> f64 {
    z.norm_sqr().sqrt()
}

enum State {
    Coherent(Vec<Complex64>),
    NonCoherent(Vec<f64>),
    PreGuess(Vec<Complex64>),
    Differential {
        prev: Option<Vec<Complex64>>,
        sum: Vec<Complex64>,
    },
    HalfBit {
        block: Vec<Complex64>,
        odd: Vec<f64>,
        even: Vec<f64>,
    },
}

/// Streaming form of the integrators: push unit grids in order, then finish.
pub struct Accumulator {
    spec: IntegrationSpec,
    plan: FrequencyPlan,
    cols: usize,
    samples_per_chip: usize,
    pushed: usize,
    state: State,
}

impl Accumulator {
    pub fn new(spec: IntegrationSpec, plan: FrequencyPlan, cols: usize, samples_per_chip: usize) -> Result<Self> {
        spec.validate()?;
        let cells = plan.len() * cols;
        let zc = || vec![Complex64::default(); cells];
        let state = match spec.strategy {
            // Seeded by the first unit.
            Strategy::Coherent => State::Coherent(Vec::new()),
            Strategy::NonCoherent => State::NonCoherent(vec![0.0; cells]),
            Strategy::PreGuess => State::PreGuess(Vec::new()),
            Strategy::Differential => State::Differential { prev: None, sum: zc() },
            Strategy::AlternateHalfBit => State::HalfBit {
                block: zc(),
                odd: vec![0.0; cells],
                even: vec![0.0; cells],
            },
        };
        Ok(Self {
            spec,
            plan,
            cols,
            samples_per_chip,
            pushed: 0,
            state,
        })
    }

    pub fn spec(&self) -> &IntegrationSpec {
        &self.spec
    }

    pub fn is_full(&self) -> bool {
        self.pushed >= self.spec.units()
    }

    pub fn push(&mut self, grid: &CorrelationGrid) -> Result<()> {
        self.check(grid)?;
        self.add(Cow::Borrowed(&grid.values));
        Ok(())
    }

    /// Like [`Accumulator::push`], reusing the grid's storage when it can.
    pub fn push_owned(&mut self, grid: CorrelationGrid) -> Result<()> {
        self.check(&grid)?;
        self.add(Cow::Owned(grid.values));
        Ok(())
    }

    fn check(&self, grid: &CorrelationGrid) -> Result<()> {
        if grid.plan != self.plan || grid.samples_per_code != self.cols {
            return Err(Error::Shape(
                "unit grid does not share the accumulator's plan and shape".into(),
            ));
        }
        if self.is_full() {
            return Err(Error::param(format!(
                "accumulator already holds {} units",
                self.spec.units()
            )));
        }
        Ok(())
    }

    fn add(&mut self, values: Cow<'_, [Complex64]>) {
        let first = self.pushed == 0;
        self.pushed += 1;
        match &mut self.state {
            // The first unit seeds the running sum (and the pre-guess sign).
            State::Coherent(sum) | State::PreGuess(sum) if first => *sum = values.into_owned(),
            State::Coherent(sum) => {
                for (a, v) in sum.iter_mut().zip(values.iter()) {
                    *a += v;
                }
            }
            State::NonCoherent(sum) => {
                for (a, v) in sum.iter_mut().zip(values.iter()) {
                    *a += magnitude(*v);
                }
            }
            State::PreGuess(acc) => {
                for (a, v) in acc.iter_mut().zip(values.iter()) {
                    if (*a + v).norm_sqr() > (*a - v).norm_sqr() {
                        *a += v;
                    } else {
                        *a -= v;
                    }
                }
            }
            State::Differential { prev, sum } => {
                if let Some(p) = prev.as_mut() {
                    for ((a, q), v) in sum.iter_mut().zip(p.iter_mut()).zip(values.iter()) {
                        *a += q.conj() * v;
                        *q = *v;
                    }
                } else {
                    *prev = Some(values.into_owned());
                }
            }
            State::HalfBit { block, odd, even } => {
                for (a, v) in block.iter_mut().zip(values.iter()) {
                    *a += v;
                }
                if self.pushed.is_multiple_of(HALF_BIT_UNITS) {
                    // Blocks are numbered from 1, so block index 0 is odd.
                    let target = if ((self.pushed - 1) / HALF_BIT_UNITS).is_multiple_of(2) {
                        odd
                    } else {
                        even
                    };
                    for (t, b) in target.iter_mut().zip(block.iter_mut()) {
                        *t += magnitude(*b);
                        *b = Complex64::default();
                    }
                }
            }
        }
    }

    pub fn finish(self) -> Result<DetectionGrid> {
        if self.pushed != self.spec.units() {
            return Err(Error::param(format!(
                "{} units pushed, {} required",
                self.pushed,
                self.spec.units()
            )));
        }
        let values = match self.state {
            State::Coherent(sum) | State::PreGuess(sum) => sum.iter().map(|&v| magnitude(v)).collect(),
            State::NonCoherent(sum) => sum,
            State::Differential { sum, .. } => sum.iter().map(|&v| magnitude(v)).collect(),
            State::HalfBit { odd, even, .. } => {
                odd.iter().zip(&even).map(|(o, e)| o.max(*e)).collect()
            }
        };
        Ok(DetectionGrid {
            values,
            cols: self.cols,
            samples_per_chip: self.samples_per_chip,
            spec: self.spec,
            plan: self.plan,
        })
    }
}

fn units_spec(strategy: Strategy, grids: &[CorrelationGrid]) -> Result<IntegrationSpec> {
    let first = grids.first().ok_or(Error::Empty("unit grids"))?;
    if grids
        .iter()
        .any(|g| g.plan != first.plan || g.samples_per_code != first.samples_per_code)
    {
        return Err(Error::Shape("unit grids differ in plan or shape".into()));
    }
    let m = u32::try_from(grids.len()).map_err(|_| Error::param("too many units"))?;
    IntegrationSpec::new(strategy, m)
}

/// Integrates `grids` with `strategy`, M = `grids.len()`.
pub fn integrate(strategy: Strategy, grids: &[CorrelationGrid]) -> Result<DetectionGrid> {
    let spec = units_spec(strategy, grids)?;
    let first = &grids[0];
    let mut acc = Accumulator::new(
        spec,
        first.plan.clone(),
        first.samples_per_code,
        first.samples_per_chip,
    )?;
    for g in grids {
        acc.push(g)?;
    }
    acc.finish()
}

/// Cellwise `sum_m |S(m)|`.
pub fn integrate_noncoherent(grids: &[CorrelationGrid]) -> Result<DetectionGrid> {
    integrate(Strategy::NonCoherent, grids)
}

/// Cellwise `|sum_m S(m)|`.
pub fn integrate_coherent(grids: &[CorrelationGrid]) -> Result<DetectionGrid> {
    integrate(Strategy::Coherent, grids)
}

/// Cellwise `|sum_m sign(m) S(m)|` with each sign picked greedily to enlarge
/// the running sum, independently per cell.
pub fn integrate_pre_guess(grids: &[CorrelationGrid]) -> Result<DetectionGrid> {
    integrate(Strategy::PreGuess, grids)
}

/// Cellwise `|sum_{m=2..M} conj(S(m-1)) S(m)|`.
pub fn integrate_differential(grids: &[CorrelationGrid]) -> Result<DetectionGrid> {
    integrate(Strategy::Differential, grids)
}

/// 10-unit coherent blocks, non-coherently summed over odd and even blocks
/// separately; the larger of the two per cell.
pub fn integrate_alternate_half_bit(grids: &[CorrelationGrid]) -> Result<DetectionGrid> {
    integrate(Strategy::AlternateHalfBit, grids)
}
