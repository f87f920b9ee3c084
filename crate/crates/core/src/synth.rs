//! Real-valued IF signal synthesis: BPSK spreading, 50 bps data, carrier at
//! IF plus a linearly drifting Doppler, code-Doppler coupling and AWGN.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PassScenario, SPEED_OF_LIGHT};
use crate::prn::{generate_code, ChipSequence};

/// Navigation data bit duration.
pub const BIT_SECONDS: f64 = 20e-3;

/// Data bits modulated onto the signal, one per 20 ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataBits {
    /// Independent equiprobable bits drawn from the synthesis seed.
    Random,
    /// Explicit `±1` bits; the first applies before the first boundary.
    Fixed(Vec<i8>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub prn_id: u32,
    pub sample_rate: f64,
    pub intermediate_freq: f64,
    /// Carrier frequency, only used for code-Doppler coupling.
    pub carrier_freq: f64,
    pub amplitude: f64,
    /// Code delay in chips: the code epoch arrives `code_phase0` chips late.
    pub code_phase0: f64,
    pub doppler0: f64,
    pub doppler_rate: f64,
    pub data_bits: DataBits,
    /// Milliseconds from the start of the signal to the first bit boundary.
    pub bit_phase0: f64,
    /// Carrier-to-noise density in dB-Hz; `None` synthesizes a noiseless signal.
    pub cn0: Option<f64>,
    pub duration: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            prn_id: 1,
            sample_rate: 4.092e6,
            intermediate_freq: 1.25e6,
            carrier_freq: 1.5e9,
            amplitude: 1.0,
            code_phase0: 0.0,
            doppler0: 0.0,
            doppler_rate: 0.0,
            data_bits: DataBits::Fixed(vec![1]),
            bit_phase0: 0.0,
            cn0: None,
            duration: 1e-3,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn sample_count(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }

    /// Number of data bits touched by the signal (bit 0 precedes the first boundary).
    pub fn bits_needed(&self) -> usize {
        let first = self.bit_phase0 * 1e-3;
        if self.duration <= first {
            1
        } else {
            self.leading_bit() + ((self.duration - first) / BIT_SECONDS).ceil() as usize
        }
    }

    /// 1 when a partial bit precedes the first boundary, 0 when a boundary
    /// falls exactly on the first sample.
    fn leading_bit(&self) -> usize {
        usize::from(self.bit_phase0 > 0.0)
    }

    fn bit_index(&self, t_ms: f64) -> usize {
        if t_ms < self.bit_phase0 {
            0
        } else {
            self.leading_bit() + ((t_ms - self.bit_phase0) / 20.0).floor() as usize
        }
    }

    /// Code delay of the signal start expressed in samples.
    pub fn code_phase_samples(&self, chip_rate: f64) -> f64 {
        self.code_phase0 * self.sample_rate / chip_rate
    }

    /// Rate at which code Doppler changes the code delay, in samples per
    /// second, at the start of the signal.
    pub fn code_rate_samples(&self) -> f64 {
        -self.doppler0 * self.sample_rate / self.carrier_freq
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.sample_rate,
            self.intermediate_freq,
            self.carrier_freq,
            self.amplitude,
            self.code_phase0,
            self.doppler0,
            self.doppler_rate,
            self.bit_phase0,
            self.duration,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("synthesis parameters must be finite"));
        }
        if self.sample_rate <= 0.0 || self.carrier_freq <= 0.0 || self.intermediate_freq < 0.0 {
            return Err(Error::param(
                "sample rate and carrier must be positive, IF non-negative",
            ));
        }
        if self.amplitude <= 0.0 {
            return Err(Error::param("amplitude must be positive"));
        }
        if self.duration < 0.0 {
            return Err(Error::param("duration must be non-negative"));
        }
        if !(0.0..20.0).contains(&self.bit_phase0) {
            return Err(Error::param(format!(
                "bit phase {} ms outside [0, 20)",
                self.bit_phase0
            )));
        }
        let top = self.intermediate_freq
            + self.doppler0.abs()
            + self.doppler_rate.abs() * self.duration;
        if self.sample_rate <= 2.0 * top {
            return Err(Error::param(format!(
                "sample rate {} Hz violates Nyquist for a {top} Hz carrier",
                self.sample_rate
            )));
        }
        if let Some(cn0) = self.cn0 {
            if !cn0.is_finite() {
                return Err(Error::param("C/N0 must be finite"));
            }
        }
        if let DataBits::Fixed(bits) = &self.data_bits {
            if bits.iter().any(|&b| b != 1 && b != -1) {
                return Err(Error::param("data bits must be +1 or -1"));
            }
            if bits.len() < self.bits_needed() {
                return Err(Error::param(format!(
                    "{} data bits given, {} needed",
                    bits.len(),
                    self.bits_needed()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    /// Real samples, or the in-phase component of a complex capture.
    pub samples: Vec<f64>,
    /// Quadrature component for complex captures.
    pub quadrature: Option<Vec<f64>>,
    pub sample_rate: f64,
    pub t0: f64,
    pub truth: Option<SynthParams>,
}

/// Noise standard deviation giving `cn0` dB-Hz for a carrier of amplitude
/// `amplitude`, with the noise power spread over the full real Nyquist band.
pub fn noise_sigma(cn0: f64, amplitude: f64, sample_rate: f64) -> f64 {
    let carrier_power = amplitude * amplitude / 2.0;
    (carrier_power * (sample_rate / 2.0) / 10f64.powf(cn0 / 10.0)).sqrt()
}

pub fn synthesize(params: &SynthParams) -> Result<SampledSignal> {
    params.validate()?;
    let code = generate_code(params.prn_id)?;
    synthesize_with_code(params, &code)
}

/// Like [`synthesize`] but with a caller-supplied spreading code.
pub fn synthesize_with_code(params: &SynthParams, code: &ChipSequence) -> Result<SampledSignal> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let bits = match &params.data_bits {
        DataBits::Fixed(b) => b.clone(),
        DataBits::Random => (0..params.bits_needed())
            .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
            .collect(),
    };
    let n = params.sample_count();
    let fs = params.sample_rate;
    let len = code.code_length() as f64;
    let chips = code.chips();
    let chip_rate = code.chip_rate();
    let code_scale = chip_rate / params.carrier_freq;
    let sigma = params
        .cn0
        .map(|c| noise_sigma(c, params.amplitude, fs))
        .unwrap_or(0.0);

    let drift_at = |kf: f64| {
        let t = kf / fs;
        params.doppler0 * t + 0.5 * params.doppler_rate * t * t
    };
    // Code phase in chips, with the Doppler-scaled chipping rate integrated.
    // Products are formed before dividing by fs so that whole chip and bit
    // boundaries land exactly on the samples that start them.
    let code_at = |kf: f64| kf * chip_rate / fs + code_scale * drift_at(kf) - params.code_phase0;

    let mut samples = Vec::with_capacity(n);
    let mut code_start = code_at(0.0);
    for k in 0..n {
        let kf = k as f64;
        // Carrier phase in cycles, integrated exactly for a linear chirp.
        let cycles = (kf * params.intermediate_freq / fs).fract() + drift_at(kf);
        let code_end = code_at(kf + 1.0);
        let chip = mean_chip(chips, len, code_start, code_end);
        code_start = code_end;
        let bit = bits[params.bit_index(kf * 1e3 / fs).min(bits.len() - 1)];
        let mut v = params.amplitude
            * chip
            * f64::from(bit)
            * (2.0 * std::f64::consts::PI * cycles.fract()).sin();
        if sigma > 0.0 {
            v += sigma * rng.sample::<f64, _>(StandardNormal);
        }
        samples.push(v);
    }
    Ok(SampledSignal {
        samples,
        quadrature: None,
        sample_rate: fs,
        t0: 0.0,
        truth: Some(params.clone()),
    })
}

/// Code value averaged over one sample interval `[start, end)` in chips, as an
/// integrate-and-dump front end would see it. A sample straddling a chip edge
/// takes the time-weighted mix of both chips, which keeps fractional code
/// delays observable after sampling.
fn mean_chip(chips: &[i8], len: f64, start: f64, end: f64) -> f64 {
    let chip = |c: f64| f64::from(chips[c.rem_euclid(len) as usize]);
    let first = start.floor();
    if end <= first + 1.0 {
        return chip(first);
    }
    let mut acc = (first + 1.0 - start) * chip(first);
    let mut edge = first + 1.0;
    while edge + 1.0 < end {
        acc += chip(edge);
        edge += 1.0;
    }
    acc += (end - edge) * chip(edge);
    acc / (end - start)
}

/// Signal parameters for one pass epoch, derived from the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochPlan {
    pub index: usize,
    pub t: f64,
    pub params: SynthParams,
}

/// Per-epoch synthesis parameters along a pass.
///
/// Doppler and Doppler rate follow the scenario; amplitude drops with the
/// extra path loss relative to closest approach while the noise floor stays
/// fixed (so the effective C/N0 drops by the same amount). Code delay and bit
/// boundary phase follow the propagation delay `range / c`. Each epoch gets
/// seed `base.seed ^ index`.
pub fn plan_pass_epochs(scenario: &PassScenario, base: &SynthParams) -> Result<Vec<EpochPlan>> {
    if scenario.samples.is_empty() {
        return Err(Error::Empty("pass scenario"));
    }
    let code = generate_code(base.prn_id)?;
    let len = code.code_length() as f64;
    let pl_min = scenario.min_path_loss();
    scenario
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let extra_db = s.path_loss - pl_min;
            let delay = s.range / SPEED_OF_LIGHT;
            let params = SynthParams {
                amplitude: base.amplitude * 10f64.powf(-extra_db / 20.0),
                cn0: base.cn0.map(|c| c - extra_db),
                doppler0: s.doppler,
                doppler_rate: s.doppler_rate,
                code_phase0: (base.code_phase0 + delay * code.chip_rate()).rem_euclid(len),
                bit_phase0: (base.bit_phase0 + delay * 1e3).rem_euclid(20.0),
                seed: base.seed ^ index as u64,
                ..base.clone()
            };
            Ok(EpochPlan {
                index,
                t: s.t,
                params,
            })
        })
        .collect()
}

/// Synthesizes one window of `base.duration` seconds at every pass epoch.
pub fn synthesize_pass_signal(
    scenario: &PassScenario,
    base: &SynthParams,
) -> Result<impl Iterator<Item = Result<SampledSignal>>> {
    let plans = plan_pass_epochs(scenario, base)?;
    Ok(plans.into_iter().map(|p| {
        let mut sig = synthesize(&p.params)?;
        sig.t0 = p.t;
        Ok(sig)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{simulate_pass, PassGeometry};
    use crate::prn::sample_code;
    use rustfft::{num_complex::Complex64, FftPlanner};

    fn base() -> SynthParams {
        SynthParams {
            data_bits: DataBits::Fixed(vec![1; 4]),
            ..SynthParams::default()
        }
    }

    #[test]
    fn first_sample_is_zero() {
        let s = synthesize(&base()).unwrap();
        assert_eq!(s.samples[0], 0.0);
        assert_eq!(s.samples.len(), 4092);
    }

    #[test]
    fn deterministic_given_seed() {
        let p = SynthParams {
            cn0: Some(40.0),
            data_bits: DataBits::Random,
            duration: 0.05,
            seed: 99,
            ..base()
        };
        assert_eq!(synthesize(&p).unwrap(), synthesize(&p).unwrap());
        let other = SynthParams { seed: 100, ..p.clone() };
        assert_ne!(synthesize(&p).unwrap().samples, synthesize(&other).unwrap().samples);
    }

    #[test]
    fn noise_sigma_examples() {
        let s = noise_sigma(45.0, 1.0, 4.092e6);
        assert!((s - (0.5f64 * 2.046e6 / 10f64.powf(4.5)).sqrt()).abs() < 1e-12);
        assert!((s - 5.69).abs() < 0.01);
        let s4 = noise_sigma(45.0, 1.0, 4.0 * 4.092e6);
        assert!((s4 / s - 2.0).abs() < 1e-12);
        assert!(noise_sigma(400.0, 1.0, 4.092e6) < 1e-15);
    }

    #[test]
    fn noise_statistics() {
        let p = SynthParams {
            amplitude: 1e-9,
            cn0: Some(-130.0),
            duration: 0.25,
            seed: 7,
            data_bits: DataBits::Random,
            ..base()
        };
        let sig = synthesize(&p).unwrap();
        let n = sig.samples.len() as f64;
        assert!(n >= 1e6);
        let sigma = noise_sigma(-130.0, 1e-9, p.sample_rate);
        let mean = sig.samples.iter().sum::<f64>() / n;
        let var = sig.samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 4.0 * sigma / n.sqrt(), "mean {mean}");
        assert!((var / (sigma * sigma) - 1.0).abs() < 0.01, "var ratio {}", var / sigma / sigma);
    }

    #[test]
    fn flipping_bits_negates_signal() {
        let p = SynthParams {
            duration: 0.06,
            bit_phase0: 7.0,
            doppler0: 1234.0,
            doppler_rate: -300.0,
            data_bits: DataBits::Fixed(vec![1, -1, -1, 1]),
            ..base()
        };
        let q = SynthParams {
            data_bits: DataBits::Fixed(vec![-1, 1, 1, -1]),
            ..p.clone()
        };
        let a = synthesize(&p).unwrap();
        let b = synthesize(&q).unwrap();
        assert!(a.samples.iter().zip(&b.samples).all(|(x, y)| *x == -*y));
    }

    fn despread_spectrum(p: &SynthParams) -> (Vec<f64>, usize) {
        let sig = synthesize(p).unwrap();
        let code = generate_code(p.prn_id).unwrap();
        let replica = sample_code(&code, p.sample_rate, 0.0, 1.0).unwrap();
        let mut buf: Vec<Complex64> = sig
            .samples
            .iter()
            .zip(&replica)
            .map(|(x, c)| Complex64::new(x * c, 0.0))
            .collect();
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
        let power: Vec<f64> = buf.iter().map(|v| v.norm_sqr()).collect();
        let half = &power[..power.len() / 2];
        let argmax = (0..half.len())
            .max_by(|&a, &b| half[a].total_cmp(&half[b]))
            .unwrap();
        (power, argmax)
    }

    #[test]
    fn despread_tone_sits_at_if_plus_doppler() {
        let p = SynthParams {
            doppler0: 1000.0,
            ..base()
        };
        let (_, argmax) = despread_spectrum(&p);
        // 1 ms window: 1 kHz DFT bins.
        assert_eq!(argmax, ((p.intermediate_freq + 1000.0) / 1000.0).round() as usize);
    }

    #[test]
    fn despread_energy_concentrates_in_one_tone() {
        let p = base();
        let (power, argmax) = despread_spectrum(&p);
        let total: f64 = power.iter().sum();
        let mirror = power.len() - argmax;
        let tone = power[argmax] + power[mirror];
        assert!(tone / total >= 0.99, "{}", tone / total);
    }

    #[test]
    fn chirp_phase_is_continuous() {
        let p = SynthParams {
            doppler0: 20e3,
            doppler_rate: -400.0,
            duration: 0.01,
            ..base()
        };
        let sig = synthesize(&p).unwrap();
        let code = generate_code(1).unwrap();
        // Undo code and bits, then check the carrier never jumps more than
        // one sample's worth of instantaneous phase.
        let fs = p.sample_rate;
        let max_step = 2.0 * std::f64::consts::PI * (p.intermediate_freq + 20e3 + 1.0) / fs;
        let mut prev = None;
        for (k, v) in sig.samples.iter().enumerate() {
            let t = k as f64 / fs;
            let chips = code.chip_rate() * t
                + code.chip_rate() / p.carrier_freq * (p.doppler0 * t + 0.5 * p.doppler_rate * t * t);
            let c = f64::from(code.chips()[chips.floor() as usize % 1023]);
            let carrier = v * c;
            if let Some(prev) = prev {
                let d: f64 = carrier - prev;
                assert!(d.abs() <= max_step + 1e-12, "jump at {k}");
            }
            prev = Some(carrier);
        }
    }

    #[test]
    fn nyquist_and_bit_checks() {
        let p = SynthParams {
            sample_rate: 2.0e6,
            ..base()
        };
        assert!(synthesize(&p).is_err());
        let p = SynthParams {
            duration: 0.05,
            data_bits: DataBits::Fixed(vec![1]),
            ..base()
        };
        assert!(synthesize(&p).is_err());
    }

    #[test]
    fn pass_epochs_follow_scenario() {
        let pass = simulate_pass(&PassGeometry {
            elevation_mask: 30.0,
            ..PassGeometry::default()
        })
        .unwrap();
        let plans = plan_pass_epochs(&pass, &base()).unwrap();
        assert_eq!(plans.len(), pass.samples.len());
        let mid = plans.len() / 2;
        let amp_max = plans.iter().map(|p| p.params.amplitude).fold(0.0, f64::max);
        assert_eq!(plans[mid].params.amplitude, amp_max);
        assert_eq!(plans[mid].params.doppler0, 0.0);
        for w in plans.windows(2).skip(2).take(plans.len() - 5) {
            let delta = w[1].params.doppler0 - w[0].params.doppler0;
            let avg_rate = 0.5 * (w[0].params.doppler_rate + w[1].params.doppler_rate);
            assert!((delta - avg_rate).abs() <= 0.01 * avg_rate.abs(), "{delta} vs {avg_rate}");
        }
        let mut epochs = synthesize_pass_signal(&pass, &base()).unwrap();
        let first = epochs.next().unwrap().unwrap();
        assert_eq!(first.t0, 0.0);
        assert_eq!(first.samples.len(), 4092);
    }

    #[test]
    fn constant_range_pass_has_identical_epochs() {
        let pass = PassScenario::from_ranges(1.0, 1.5e9, &[1e6; 5], &[45.0; 5]).unwrap();
        let plans = plan_pass_epochs(&pass, &base()).unwrap();
        for p in &plans {
            assert_eq!(p.params.doppler0, 0.0);
            assert_eq!(p.params.amplitude, plans[0].params.amplitude);
        }
    }
}
