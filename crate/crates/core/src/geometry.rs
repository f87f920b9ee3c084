//! LEO pass geometry for a ground station: range, elevation, radial velocity,
//! Doppler, Doppler rate and free-space loss as time series.
//!
//! Circular two-body orbit over a spherical, non-rotating Earth. Positive
//! radial velocity means closing range, which gives positive Doppler.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const EARTH_RADIUS: f64 = 6_371e3;
pub const EARTH_MU: f64 = 3.986004418e14;

pub const PASS_CSV_HEADER: &str =
    "t_s,range_m,elev_deg,vrad_mps,doppler_hz,doppler_rate_hzps,path_loss_db";

/// Doppler shift in Hz for a closing speed in m/s.
pub fn doppler_shift(carrier_freq: f64, radial_velocity: f64) -> f64 {
    carrier_freq * radial_velocity / SPEED_OF_LIGHT
}

/// Friis free-space path loss in dB.
pub fn free_space_loss(range: f64, freq: f64) -> f64 {
    20.0 * (4.0 * PI * range * freq / SPEED_OF_LIGHT).log10()
}

/// Radial velocity from a range series sampled every `dt` seconds.
///
/// Central differences inside, one-sided at the ends, negated so that a
/// shrinking range yields positive velocity.
pub fn radial_velocity(range: &[f64], dt: f64) -> Result<Vec<f64>> {
    derivative(range, dt).map(|d| d.into_iter().map(|v| -v).collect())
}

fn derivative(series: &[f64], dt: f64) -> Result<Vec<f64>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::param(format!(
            "series needs at least 2 samples, got {n}"
        )));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::param(format!("step {dt} must be positive")));
    }
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                (series[1] - series[0]) / dt
            } else if i == n - 1 {
                (series[n - 1] - series[n - 2]) / dt
            } else {
                (series[i + 1] - series[i - 1]) / (2.0 * dt)
            }
        })
        .collect())
}

/// Slant range to a satellite at `height` seen at `elevation_deg`.
pub fn slant_range(height: f64, elevation_deg: f64) -> f64 {
    let s = elevation_deg.to_radians().sin();
    let re = EARTH_RADIUS;
    (re * re * s * s + 2.0 * re * height + height * height).sqrt() - re * s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassSample {
    pub t: f64,
    pub range: f64,
    pub elevation: f64,
    pub radial_velocity: f64,
    pub doppler: f64,
    pub doppler_rate: f64,
    pub path_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassScenario {
    pub epoch_step: f64,
    pub carrier_freq: f64,
    pub samples: Vec<PassSample>,
}

impl PassScenario {
    /// Builds a scenario from a range/elevation series. Velocity, Doppler,
    /// Doppler rate and loss are all derived here so they stay consistent.
    pub fn from_ranges(
        epoch_step: f64,
        carrier_freq: f64,
        ranges: &[f64],
        elevations: &[f64],
    ) -> Result<Self> {
        if ranges.len() != elevations.len() {
            return Err(Error::LengthMismatch {
                left: ranges.len(),
                right: elevations.len(),
            });
        }
        if !(carrier_freq.is_finite() && carrier_freq > 0.0) {
            return Err(Error::param("carrier frequency must be positive"));
        }
        if let Some(r) = ranges.iter().find(|r| !(**r > 0.0)) {
            return Err(Error::param(format!("range {r} must be positive")));
        }
        let vrad = radial_velocity(ranges, epoch_step)?;
        let doppler: Vec<f64> = vrad
            .iter()
            .map(|&v| doppler_shift(carrier_freq, v))
            .collect();
        let rate = derivative(&doppler, epoch_step)?;
        let samples = (0..ranges.len())
            .map(|k| PassSample {
                t: k as f64 * epoch_step,
                range: ranges[k],
                elevation: elevations[k],
                radial_velocity: vrad[k],
                doppler: doppler[k],
                doppler_rate: rate[k],
                path_loss: free_space_loss(ranges[k], carrier_freq),
            })
            .collect();
        Ok(Self {
            epoch_step,
            carrier_freq,
            samples,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 * self.epoch_step
    }

    pub fn min_path_loss(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.path_loss)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{PASS_CSV_HEADER}")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.t, s.range, s.elevation, s.radial_velocity, s.doppler, s.doppler_rate, s.path_loss
            )?;
        }
        Ok(())
    }
}

/// Orbit and station geometry for [`simulate_pass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PassGeometry {
    pub orbit_height: f64,
    pub elevation_mask: f64,
    /// Ground distance in meters between the station and the ground track.
    pub cross_track_offset: f64,
    pub epoch_step: f64,
    pub carrier_freq: f64,
}

impl Default for PassGeometry {
    fn default() -> Self {
        Self {
            orbit_height: 645e3,
            elevation_mask: 10.0,
            cross_track_offset: 0.0,
            epoch_step: 1.0,
            carrier_freq: 1.5e9,
        }
    }
}

struct Frame {
    radius: f64,
    station: [f64; 3],
    up: [f64; 3],
}

impl Frame {
    fn new(g: &PassGeometry) -> Self {
        let beta = g.cross_track_offset / EARTH_RADIUS;
        let up = [beta.cos(), 0.0, beta.sin()];
        Self {
            radius: EARTH_RADIUS + g.orbit_height,
            station: up.map(|u| u * EARTH_RADIUS),
            up,
        }
    }

    /// Range and elevation (deg) at orbit angle `theta` from closest approach.
    fn look(&self, theta: f64) -> (f64, f64) {
        let sat = [self.radius * theta.cos(), self.radius * theta.sin(), 0.0];
        let d = [
            sat[0] - self.station[0],
            sat[1] - self.station[1],
            sat[2] - self.station[2],
        ];
        let range = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        let up = d[0] * self.up[0] + d[1] * self.up[1] + d[2] * self.up[2];
        (range, (up / range).clamp(-1.0, 1.0).asin().to_degrees())
    }
}

/// Simulates one overhead pass, keeping only epochs at or above the mask.
///
/// Closest approach always falls exactly on an epoch.
pub fn simulate_pass(g: &PassGeometry) -> Result<PassScenario> {
    if !(g.orbit_height > 200e3 && g.orbit_height < 2000e3) {
        return Err(Error::param(format!(
            "orbit height {} m outside (200 km, 2000 km)",
            g.orbit_height
        )));
    }
    if !(g.elevation_mask >= 0.0 && g.elevation_mask < 90.0) {
        return Err(Error::param(format!(
            "elevation mask {} deg outside [0, 90)",
            g.elevation_mask
        )));
    }
    if !(g.epoch_step.is_finite() && g.epoch_step > 0.0) {
        return Err(Error::param("epoch step must be positive"));
    }
    if !g.cross_track_offset.is_finite() {
        return Err(Error::param("cross-track offset must be finite"));
    }
    let frame = Frame::new(g);
    if frame.look(0.0).1 < g.elevation_mask {
        return Err(Error::NoVisibility {
            mask_deg: g.elevation_mask,
        });
    }
    // Elevation falls monotonically with |theta| until the horizon.
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frame.look(mid).1 >= g.elevation_mask {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let omega = (EARTH_MU / frame.radius.powi(3)).sqrt();
    let half = (lo / omega / g.epoch_step).floor() as i64;
    let mut ranges = Vec::with_capacity((2 * half + 1) as usize);
    let mut elevations = Vec::with_capacity(ranges.capacity());
    for k in -half..=half {
        let (r, e) = frame.look(omega * k as f64 * g.epoch_step);
        ranges.push(r);
        elevations.push(e);
    }
    if ranges.len() < 2 {
        return Err(Error::NoVisibility {
            mask_deg: g.elevation_mask,
        });
    }
    PassScenario::from_ranges(g.epoch_step, g.carrier_freq, &ranges, &elevations)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn fspl_strictly_increasing(r in 1e3f64..1e8, f in 1e6f64..1e10, k in 1.0001f64..10.0) {
            prop_assert!(free_space_loss(r * k, f) > free_space_loss(r, f));
            prop_assert!(free_space_loss(r, f * k) > free_space_loss(r, f));
        }
    }
}
