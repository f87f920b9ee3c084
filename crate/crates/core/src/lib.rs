//! Acquisition engine for weak LEO navigation signals: code generation, pass
//! geometry, IF synthesis, FFT code-phase search, long integration strategies
//! and peak detection, plus the evaluation tools built on them.

pub mod acq;
pub mod cli;
pub mod detect;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod integrate;
pub mod io;
pub mod prn;
pub mod synth;

pub use error::{Error, Result};
