//! C ABI over the acquisition engine.
//!
//! Objects are opaque heap handles created by `*_new` functions and released
//! by the matching `*_free`. Every fallible call returns a [`LeoAcqStatus`];
//! on failure a message is kept per thread for [`leo_acq_last_error`].
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use leo_acq::acq::Correlator;
use leo_acq::detect::Indicator;
use leo_acq::eval::{acquire_window, SearchCenter, SearchWindow, TimelineOptions};
use leo_acq::integrate::{IntegrationSpec, Strategy};
use leo_acq::prn::{generate_code, ChipSequence};
use leo_acq::synth::{synthesize, DataBits, SampledSignal, SynthParams};
use leo_acq::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeoAcqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownPrn = 3,
    LengthMismatch = 4,
    Io = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeoAcqStrategy {
    Coherent = 0,
    NonCoherent = 1,
    PreGuess = 2,
    Differential = 3,
    AlternateHalfBit = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeoAcqIndicator {
    Mtsmr = 0,
    Mtmr = 1,
}

/// Synthesis parameters. `cn0` NaN gives a noiseless signal; `random_bits`
/// zero keeps every data bit at +1.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LeoAcqSynthParams {
    pub prn: u32,
    pub sample_rate: f64,
    pub intermediate_freq: f64,
    pub carrier_freq: f64,
    pub amplitude: f64,
    /// Code delay in chips.
    pub code_phase: f64,
    pub doppler: f64,
    pub doppler_rate: f64,
    /// Milliseconds to the first data-bit boundary, in [0, 20).
    pub bit_phase_ms: f64,
    pub cn0: f64,
    pub duration: f64,
    pub seed: u64,
    pub random_bits: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LeoAcqOptions {
    pub strategy: LeoAcqStrategy,
    pub total_ms: u32,
    pub center: f64,
    pub half_span: f64,
    pub threshold: f64,
    pub indicator: LeoAcqIndicator,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LeoAcqResult {
    pub doppler: f64,
    pub code_phase: u64,
    pub mtsmr: f64,
    pub mtmr: f64,
    /// 1 when the chosen indicator reached the threshold.
    pub decided: i32,
}

/// Spreading code handle.
pub struct LeoAcqCode(ChipSequence);

/// Correlation engine handle bound to one code, sample rate and IF.
pub struct LeoAcqCorrelator(Correlator);

/// Synthesized signal handle.
pub struct LeoAcqSignal(SampledSignal);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> LeoAcqStatus {
    match e {
        Error::UnknownPrn(_) => LeoAcqStatus::UnknownPrn,
        Error::UnitLength { .. } | Error::LengthMismatch { .. } => LeoAcqStatus::LengthMismatch,
        Error::Io(_) => LeoAcqStatus::Io,
        _ => LeoAcqStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (LeoAcqStatus, String)>) -> LeoAcqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LeoAcqStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            LeoAcqStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (LeoAcqStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LeoAcqStatus, String) {
    (LeoAcqStatus::NullPointer, format!("{what} is null"))
}

/// Copies the thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL, or 0
/// when there is none.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn leo_acq_status_str(status: LeoAcqStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        LeoAcqStatus::Ok => b"ok\0",
        LeoAcqStatus::NullPointer => b"null pointer\0",
        LeoAcqStatus::InvalidArgument => b"invalid argument\0",
        LeoAcqStatus::UnknownPrn => b"unknown PRN\0",
        LeoAcqStatus::LengthMismatch => b"length mismatch\0",
        LeoAcqStatus::Io => b"I/O error\0",
        LeoAcqStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}

/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_code_new(prn: u32, out: *mut *mut LeoAcqCode) -> LeoAcqStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let code = generate_code(prn).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LeoAcqCode(code)));
        Ok(())
    })
}

/// Chips per period, or 0 for a null handle.
///
/// # Safety
/// `code` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_code_length(code: *const LeoAcqCode) -> usize {
    code.as_ref().map_or(0, |c| c.0.code_length())
}

/// Copies the `+1`/`-1` chips into `buf`, which must hold the code length.
///
/// # Safety
/// `code` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_code_chips(
    code: *const LeoAcqCode,
    buf: *mut i8,
    len: usize,
) -> LeoAcqStatus {
    guard(|| {
        let code = code.as_ref().ok_or_else(|| null("code"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let chips = code.0.chips();
        if len < chips.len() {
            return Err((
                LeoAcqStatus::LengthMismatch,
                format!("buffer holds {len} chips, code has {}", chips.len()),
            ));
        }
        ptr::copy_nonoverlapping(chips.as_ptr(), buf, chips.len());
        Ok(())
    })
}

/// # Safety
/// `code` must be null or a handle from [`leo_acq_code_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_code_free(code: *mut LeoAcqCode) {
    if !code.is_null() {
        drop(Box::from_raw(code));
    }
}

/// # Safety
/// `params` must be valid to read and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_synthesize(
    params: *const LeoAcqSynthParams,
    out: *mut *mut LeoAcqSignal,
) -> LeoAcqStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let base = SynthParams {
            prn_id: p.prn,
            sample_rate: p.sample_rate,
            intermediate_freq: p.intermediate_freq,
            carrier_freq: p.carrier_freq,
            amplitude: p.amplitude,
            code_phase0: p.code_phase,
            doppler0: p.doppler,
            doppler_rate: p.doppler_rate,
            bit_phase0: p.bit_phase_ms,
            cn0: (!p.cn0.is_nan()).then_some(p.cn0),
            duration: p.duration,
            seed: p.seed,
            data_bits: DataBits::Random,
        };
        let params = if p.random_bits != 0 {
            base
        } else {
            let bits = vec![1; base.bits_needed()];
            SynthParams {
                data_bits: DataBits::Fixed(bits),
                ..base
            }
        };
        let sig = synthesize(&params).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LeoAcqSignal(sig)));
        Ok(())
    })
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_signal_len(signal: *const LeoAcqSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.samples.len())
}

/// Borrowed pointer to the samples, valid until the handle is freed.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_signal_samples(signal: *const LeoAcqSignal) -> *const f64 {
    signal
        .as_ref()
        .map_or(ptr::null(), |s| s.0.samples.as_ptr())
}

/// # Safety
/// `signal` must be null or a handle from [`leo_acq_synthesize`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_signal_free(signal: *mut LeoAcqSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// # Safety
/// `code` must be a live handle and `out` valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_correlator_new(
    code: *const LeoAcqCode,
    sample_rate: f64,
    intermediate_freq: f64,
    out: *mut *mut LeoAcqCorrelator,
) -> LeoAcqStatus {
    guard(|| {
        let code = code.as_ref().ok_or_else(|| null("code"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = Correlator::new(&code.0, sample_rate, intermediate_freq).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LeoAcqCorrelator(c)));
        Ok(())
    })
}

/// Samples in one code period, or 0 for a null handle.
///
/// # Safety
/// `corr` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_correlator_samples_per_code(corr: *const LeoAcqCorrelator) -> usize {
    corr.as_ref().map_or(0, |c| c.0.samples_per_code())
}

/// Acquires `len` real samples, which must cover `total_ms` code periods.
///
/// # Safety
/// `corr` must be a live handle, `samples` valid for `len` reads, `opts`
/// valid to read and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_acquire(
    corr: *const LeoAcqCorrelator,
    samples: *const f64,
    len: usize,
    opts: *const LeoAcqOptions,
    out: *mut LeoAcqResult,
) -> LeoAcqStatus {
    guard(|| {
        let corr = corr.as_ref().ok_or_else(|| null("corr"))?;
        let o = opts.as_ref().ok_or_else(|| null("opts"))?;
        if samples.is_null() {
            return Err(null("samples"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let strategy = match o.strategy {
            LeoAcqStrategy::Coherent => Strategy::Coherent,
            LeoAcqStrategy::NonCoherent => Strategy::NonCoherent,
            LeoAcqStrategy::PreGuess => Strategy::PreGuess,
            LeoAcqStrategy::Differential => Strategy::Differential,
            LeoAcqStrategy::AlternateHalfBit => Strategy::AlternateHalfBit,
        };
        let spec = IntegrationSpec::new(strategy, o.total_ms).map_err(lib_err)?;
        let opts = TimelineOptions {
            window: SearchWindow {
                center: SearchCenter::Fixed(o.center),
                half_span: o.half_span,
            },
            threshold: o.threshold,
            indicator: match o.indicator {
                LeoAcqIndicator::Mtsmr => Indicator::Mtsmr,
                LeoAcqIndicator::Mtmr => Indicator::Mtmr,
            },
        };
        let data = std::slice::from_raw_parts(samples, len);
        let r = acquire_window(&corr.0, data, spec, &opts).map_err(lib_err)?;
        *out = LeoAcqResult {
            doppler: r.doppler_hat,
            code_phase: r.code_phase_hat as u64,
            mtsmr: r.mtsmr,
            mtmr: r.mtmr,
            decided: i32::from(r.decided),
        };
        Ok(())
    })
}

/// # Safety
/// `corr` must be null or a handle from [`leo_acq_correlator_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn leo_acq_correlator_free(corr: *mut LeoAcqCorrelator) {
    if !corr.is_null() {
        drop(Box::from_raw(corr));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn status_strings_are_distinct() {
        let all = [
            LeoAcqStatus::Ok,
            LeoAcqStatus::NullPointer,
            LeoAcqStatus::InvalidArgument,
            LeoAcqStatus::UnknownPrn,
            LeoAcqStatus::LengthMismatch,
            LeoAcqStatus::Io,
            LeoAcqStatus::Internal,
        ];
        let texts: Vec<_> = all
            .iter()
            .map(|s| unsafe { CStr::from_ptr(leo_acq_status_str(*s)) }.to_owned())
            .collect();
        for (i, a) in texts.iter().enumerate() {
            for b in &texts[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn panics_are_contained() {
        let status = guard(|| panic!("boom"));
        assert_eq!(status, LeoAcqStatus::Internal);
        let mut buf = [0 as c_char; 64];
        let n = unsafe { leo_acq_last_error(buf.as_mut_ptr(), buf.len()) };
        assert_eq!(n, "internal panic".len());
    }
}
