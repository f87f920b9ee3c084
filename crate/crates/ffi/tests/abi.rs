use std::ffi::{c_char, CStr};
use std::path::Path;
use std::process::Command;
use std::ptr;

use leo_acq_ffi::*;

fn last_error() -> String {
    let mut buf = [0 as c_char; 256];
    let n = unsafe { leo_acq_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn params(prn: u32) -> LeoAcqSynthParams {
    LeoAcqSynthParams {
        prn,
        sample_rate: 4.092e6,
        intermediate_freq: 1.023e6,
        carrier_freq: 1.57542e9,
        amplitude: 1.0,
        code_phase: 300.0,
        doppler: 1500.0,
        doppler_rate: 0.0,
        bit_phase_ms: 0.0,
        cn0: f64::NAN,
        duration: 0.005,
        seed: 9,
        random_bits: 0,
    }
}

#[test]
fn code_round_trip() {
    let mut code = ptr::null_mut();
    assert_eq!(unsafe { leo_acq_code_new(1, &mut code) }, LeoAcqStatus::Ok);
    let n = unsafe { leo_acq_code_length(code) };
    assert_eq!(n, 1023);
    let mut chips = vec![0i8; n];
    assert_eq!(
        unsafe { leo_acq_code_chips(code, chips.as_mut_ptr(), n) },
        LeoAcqStatus::Ok
    );
    // PRN 1 starts with octal 1440 in its first ten chips.
    let first: Vec<i8> = chips[..10].to_vec();
    assert_eq!(first, [-1, -1, 1, 1, -1, 1, 1, 1, 1, 1]);
    assert_eq!(
        unsafe { leo_acq_code_chips(code, chips.as_mut_ptr(), 10) },
        LeoAcqStatus::LengthMismatch
    );
    unsafe { leo_acq_code_free(code) };
}

#[test]
fn bad_inputs_report_status_and_message() {
    let mut code = ptr::null_mut();
    assert_eq!(unsafe { leo_acq_code_new(99, &mut code) }, LeoAcqStatus::UnknownPrn);
    assert!(code.is_null());
    assert!(last_error().contains("99"));
    assert_eq!(
        unsafe { leo_acq_code_new(1, ptr::null_mut()) },
        LeoAcqStatus::NullPointer
    );
    assert_eq!(unsafe { leo_acq_code_length(ptr::null()) }, 0);
    unsafe { leo_acq_code_free(ptr::null_mut()) };
    let mut p = params(1);
    p.sample_rate = -1.0;
    let mut sig = ptr::null_mut();
    assert_eq!(
        unsafe { leo_acq_synthesize(&p, &mut sig) },
        LeoAcqStatus::InvalidArgument
    );
}

#[test]
fn synthesize_then_acquire() {
    let p = params(7);
    let mut sig = ptr::null_mut();
    assert_eq!(unsafe { leo_acq_synthesize(&p, &mut sig) }, LeoAcqStatus::Ok);
    let len = unsafe { leo_acq_signal_len(sig) };
    assert_eq!(len, 20_460);
    let samples = unsafe { leo_acq_signal_samples(sig) };

    let mut code = ptr::null_mut();
    assert_eq!(unsafe { leo_acq_code_new(7, &mut code) }, LeoAcqStatus::Ok);
    let mut corr = ptr::null_mut();
    assert_eq!(
        unsafe { leo_acq_correlator_new(code, 4.092e6, 1.023e6, &mut corr) },
        LeoAcqStatus::Ok
    );
    assert_eq!(unsafe { leo_acq_correlator_samples_per_code(corr) }, 4092);
    let opts = LeoAcqOptions {
        strategy: LeoAcqStrategy::NonCoherent,
        total_ms: 5,
        center: 0.0,
        half_span: 5000.0,
        threshold: 2.0,
        indicator: LeoAcqIndicator::Mtsmr,
    };
    let mut out = LeoAcqResult::default();
    assert_eq!(
        unsafe { leo_acq_acquire(corr, samples, len, &opts, &mut out) },
        LeoAcqStatus::Ok
    );
    assert_eq!(out.decided, 1);
    assert_eq!(out.code_phase, 1200);
    assert!((out.doppler - 1500.0).abs() <= 250.0);

    // Too few samples for the requested span.
    assert_eq!(
        unsafe { leo_acq_acquire(corr, samples, 4092, &opts, &mut out) },
        LeoAcqStatus::LengthMismatch
    );
    unsafe {
        leo_acq_correlator_free(corr);
        leo_acq_code_free(code);
        leo_acq_signal_free(sig);
    }
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/leo_acq.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "leo_acq_code_new",
        "leo_acq_synthesize",
        "leo_acq_correlator_new",
        "leo_acq_acquire",
        "leo_acq_last_error",
        "LEO_ACQ_STATUS_NULL_POINTER",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler; skipped syntax check");
        return;
    };
    assert!(status.success());
}
