//! Spreading-code generation and sampling.
//!
//! The default family is the GPS C/A Gold set: two 10-stage maximal-length
//! shift registers (G1 = 1 + x^3 + x^10, G2 = 1 + x^2 + x^3 + x^6 + x^8 + x^9 + x^10)
//! combined through a per-PRN G2 phase selector. Chips are stored as `±1` so
//! BPSK modulation is a multiplication.

use crate::error::{Error, Result};

/// Duration of one code period, which is also the acquisition processing unit.
pub const UNIT_SECONDS: f64 = 1e-3;
pub const CA_CHIP_RATE: f64 = 1.023e6;
pub const CA_CODE_LENGTH: usize = 1023;
pub const MAX_PRN: u32 = 37;

/// G2 phase-selector tap pairs (1-based stage numbers), PRN 1..=37.
const G2_TAPS: [(usize, usize); 37] = [
    (2, 6),
    (3, 7),
    (4, 8),
    (5, 9),
    (1, 9),
    (2, 10),
    (1, 8),
    (2, 9),
    (3, 10),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (7, 8),
    (8, 9),
    (9, 10),
    (1, 4),
    (2, 5),
    (3, 6),
    (4, 7),
    (5, 8),
    (6, 9),
    (1, 3),
    (4, 6),
    (5, 7),
    (6, 8),
    (7, 9),
    (8, 10),
    (1, 6),
    (2, 7),
    (3, 8),
    (4, 9),
    (5, 10),
    (4, 10),
    (1, 7),
    (2, 8),
    (4, 10),
];

/// One period of a `±1` spreading sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ChipSequence {
    prn_id: u32,
    chips: Vec<i8>,
    chip_rate: f64,
}

impl ChipSequence {
    /// Wraps an arbitrary `±1` sequence. The period `chips.len() / chip_rate`
    /// must equal [`UNIT_SECONDS`].
    pub fn from_chips(prn_id: u32, chips: Vec<i8>, chip_rate: f64) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::param("code must hold at least one chip"));
        }
        if let Some(pos) = chips.iter().position(|&c| c != 1 && c != -1) {
            return Err(Error::param(format!(
                "chip {pos} is {}, expected +1 or -1",
                chips[pos]
            )));
        }
        if !(chip_rate.is_finite() && chip_rate > 0.0) {
            return Err(Error::param(format!("chip rate {chip_rate} must be positive")));
        }
        let period = chips.len() as f64 / chip_rate;
        if (period - UNIT_SECONDS).abs() > 1e-12 {
            return Err(Error::param(format!(
                "code period {period} s does not match the {UNIT_SECONDS} s processing unit"
            )));
        }
        Ok(Self {
            prn_id,
            chips,
            chip_rate,
        })
    }

    pub fn prn_id(&self) -> u32 {
        self.prn_id
    }

    pub fn chips(&self) -> &[i8] {
        &self.chips
    }

    pub fn chip_rate(&self) -> f64 {
        self.chip_rate
    }

    pub fn code_length(&self) -> usize {
        self.chips.len()
    }

    /// Seconds spanned by one period.
    pub fn period(&self) -> f64 {
        self.chips.len() as f64 / self.chip_rate
    }
}

/// Generates the C/A Gold code for `prn_id` (1..=37) at 1.023 Mchip/s.
pub fn generate_code(prn_id: u32) -> Result<ChipSequence> {
    if prn_id == 0 || prn_id > MAX_PRN {
        return Err(Error::UnknownPrn(prn_id));
    }
    let (s1, s2) = G2_TAPS[(prn_id - 1) as usize];
    let mut g1 = [1u8; 10];
    let mut g2 = [1u8; 10];
    let mut chips = Vec::with_capacity(CA_CODE_LENGTH);
    for _ in 0..CA_CODE_LENGTH {
        let bit = g1[9] ^ g2[s1 - 1] ^ g2[s2 - 1];
        chips.push(1 - 2 * bit as i8);
        let f1 = g1[2] ^ g1[9];
        let f2 = g2[1] ^ g2[2] ^ g2[5] ^ g2[7] ^ g2[8] ^ g2[9];
        g1.rotate_right(1);
        g2.rotate_right(1);
        g1[0] = f1;
        g2[0] = f2;
    }
    ChipSequence::from_chips(prn_id, chips, CA_CHIP_RATE)
}

/// Samples one processing unit of `code`.
///
/// Sample `k` holds chip `floor(k * chip_rate * code_rate_scale / sample_rate + code_phase) mod L`.
/// `code_phase` is in chips; `code_rate_scale` carries code Doppler (`1 + f_d / f_carrier`).
pub fn sample_code(
    code: &ChipSequence,
    sample_rate: f64,
    code_phase: f64,
    code_rate_scale: f64,
) -> Result<Vec<f64>> {
    if !(sample_rate.is_finite() && sample_rate > 0.0) {
        return Err(Error::param(format!(
            "sample rate {sample_rate} must be finite and positive"
        )));
    }
    if sample_rate <= 2.0 * code.chip_rate {
        return Err(Error::param(format!(
            "sample rate {sample_rate} must exceed twice the chip rate {}",
            code.chip_rate
        )));
    }
    let len = code.code_length();
    if !(code_phase.is_finite() && code_phase >= 0.0 && code_phase < len as f64) {
        return Err(Error::param(format!(
            "code phase {code_phase} outside [0, {len})"
        )));
    }
    if !(code_rate_scale.is_finite() && code_rate_scale > 0.0) {
        return Err(Error::param(format!(
            "code rate scale {code_rate_scale} must be positive"
        )));
    }
    let n = (sample_rate * code.period()).round() as usize;
    let step = code.chip_rate * code_rate_scale / sample_rate;
    let chips = &code.chips;
    Ok((0..n)
        .map(|k| {
            // A small guard keeps exact boundaries from rounding down a chip.
            let idx = (k as f64 * step + code_phase + 1e-9).floor() as usize % len;
            f64::from(chips[idx])
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    /// G2 output delays (chips) for PRN 1..=32, an independent way of
    /// building the same family.
    const G2_DELAY: [usize; 32] = [
        5, 6, 7, 8, 17, 18, 139, 140, 141, 251, 252, 254, 255, 256, 257, 258, 469, 470, 471, 472,
        473, 474, 509, 512, 513, 514, 515, 516, 859, 860, 861, 862,
    ];

    fn mls(taps: &[usize]) -> Vec<u8> {
        let mut reg = [1u8; 10];
        let mut out = Vec::new();
        // Run two periods so the period can be measured rather than assumed.
        for _ in 0..2 * 1023 {
            out.push(reg[9]);
            let fb = taps.iter().fold(0, |acc, &t| acc ^ reg[t - 1]);
            reg.rotate_right(1);
            reg[0] = fb;
        }
        out
    }

    fn period_of(seq: &[u8]) -> usize {
        (1..=seq.len() / 2)
            .find(|&p| (0..seq.len() - p).all(|i| seq[i] == seq[i + p]))
            .unwrap()
    }

    fn oracle_code(prn: usize) -> Vec<i8> {
        let g1 = mls(&[3, 10]);
        let g2 = mls(&[2, 3, 6, 8, 9, 10]);
        let d = G2_DELAY[prn - 1];
        (0..1023)
            .map(|i| 1 - 2 * (g1[i] ^ g2[(i + 1023 - d) % 1023]) as i8)
            .collect()
    }

    #[test]
    fn registers_are_maximal_length() {
        assert_eq!(period_of(&mls(&[3, 10])), 1023);
        assert_eq!(period_of(&mls(&[2, 3, 6, 8, 9, 10])), 1023);
        assert_eq!(generate_code(1).unwrap().code_length(), 1023);
    }

    #[test]
    fn matches_delay_oracle_for_all_32_gps_prns() {
        for prn in 1..=32u32 {
            let code = generate_code(prn).unwrap();
            assert_eq!(code.chips(), &oracle_code(prn as usize)[..], "PRN {prn}");
        }
    }

    #[test]
    fn prn1_first_chips_are_octal_1440() {
        let code = generate_code(1).unwrap();
        let bits: String = code.chips()[..10]
            .iter()
            .map(|&c| if c < 0 { '1' } else { '0' })
            .collect();
        assert_eq!(bits, "1100100000");
    }

    #[test]
    fn balance_is_one_chip() {
        let sum: i32 = generate_code(1).unwrap().chips().iter().map(|&c| c as i32).sum();
        assert_eq!(sum.abs(), 1);
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate_code(7).unwrap(), generate_code(7).unwrap());
    }

    #[test]
    fn unknown_prn() {
        assert!(matches!(generate_code(0), Err(Error::UnknownPrn(0))));
        assert!(matches!(generate_code(38), Err(Error::UnknownPrn(38))));
    }

    #[test]
    fn rejects_non_unit_chips() {
        assert!(ChipSequence::from_chips(1, vec![1, 0, -1], 3000.0).is_err());
        assert!(ChipSequence::from_chips(1, vec![1, -1, 1], 2000.0).is_err());
    }

    #[test]
    fn autocorrelation_peak_and_cross_correlation_bound() {
        let codes: Vec<_> = (1..=MAX_PRN).map(|p| generate_code(p).unwrap()).collect();
        let corr = |a: &[i8], b: &[i8], lag: usize| -> i32 {
            (0..1023)
                .map(|n| a[n] as i32 * b[(n + lag) % 1023] as i32)
                .sum()
        };
        for c in &codes {
            assert_eq!(corr(c.chips(), c.chips(), 0), 1023);
        }
        for (i, a) in codes.iter().enumerate() {
            for b in &codes[i + 1..] {
                // PRN 34 and 37 share a tap pair and are the same sequence.
                if a.chips() == b.chips() {
                    continue;
                }
                let worst = (0..1023)
                    .map(|lag| corr(a.chips(), b.chips(), lag).abs())
                    .max()
                    .unwrap();
                assert!(worst <= 65, "PRN {} vs {}: {worst}", a.prn_id(), b.prn_id());
            }
        }
    }

    #[test]
    fn integer_oversampling_repeats_chips() {
        let code = generate_code(3).unwrap();
        let s = sample_code(&code, 4.0 * CA_CHIP_RATE, 0.0, 1.0).unwrap();
        assert_eq!(s.len(), 4092);
        for (k, v) in s.iter().enumerate() {
            assert_eq!(*v, f64::from(code.chips()[k / 4]));
        }
    }

    #[test]
    fn half_period_phase_is_a_rotation() {
        let code = generate_code(5).unwrap();
        let fs = 4.0 * CA_CHIP_RATE;
        let base = sample_code(&code, fs, 0.0, 1.0).unwrap();
        let shifted = sample_code(&code, fs, 511.5, 1.0).unwrap();
        let mut rotated = base.clone();
        rotated.rotate_left(2046);
        assert_eq!(shifted, rotated);
    }

    #[test]
    fn code_doppler_accumulates_phase() {
        let scale = 1.0 + 5e-6;
        let fs = 4.0 * CA_CHIP_RATE;
        let n = 4092.0;
        let extra = n * CA_CHIP_RATE * (scale - 1.0) / fs;
        assert!((extra - 1023.0 * 5e-6).abs() < 1e-12);
        assert!((extra - 5.1e-3).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_sample_rate() {
        let code = generate_code(1).unwrap();
        assert!(sample_code(&code, f64::NAN, 0.0, 1.0).is_err());
        assert!(sample_code(&code, -1.0, 0.0, 1.0).is_err());
        assert!(sample_code(&code, 2.0 * CA_CHIP_RATE, 0.0, 1.0).is_err());
        assert!(sample_code(&code, 4.092e6, 1023.0, 1.0).is_err());
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn cyclic_shift_for_whole_sample_phases(prn in 1u32..=37, shift in 0usize..4092, spc in 3usize..=5) {
            let code = generate_code(prn).unwrap();
            let fs = spc as f64 * CA_CHIP_RATE;
            let shift = shift % (1023 * spc);
            let phase = shift as f64 / spc as f64;
            let base = sample_code(&code, fs, 0.0, 1.0).unwrap();
            let shifted = sample_code(&code, fs, phase, 1.0).unwrap();
            let mut rotated = base.clone();
            rotated.rotate_left(shift);
            prop_assert_eq!(shifted, rotated);
        }
    }
}
