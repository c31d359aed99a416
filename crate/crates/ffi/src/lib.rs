//! C ABI over the `apfid` library.
//!
//! Conventions:
//! - Fallible calls return an [`ApfidStatus`]; on failure a description is
//!   available from [`apfid_last_error`] on the same thread until the next
//!   call that fails or succeeds.
//! - Objects cross the boundary as opaque handles created by `*_new` or by
//!   an identification call and released with the matching `*_free`.
//! - Strings returned through `char **` are owned by the caller and released
//!   with [`apfid_string_free`].
//! - Array accessors copy at most `capacity` elements and return the total
//!   count, so a first call with `capacity = 0` sizes the buffer.
//! - Panics never unwind into the caller; they surface as
//!   `APFID_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;
use std::slice;

use apfid::identify::{detect_astatism, identify_channel, select_order};
use apfid::io::{emit_report, identify_record, parse_csv, simulate_record, write_csv, RunConfig, SimulationSpec};
use apfid::{ChannelIdentification, Complex64, Error, GainSign, IdentifyConfig, PeakPolicy, Signal};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApfidStatus {
    Ok = 0,
    NullPointer,
    InvalidArgument,
    InvalidUtf8,
    Aliasing,
    SingularPlant,
    AmbiguousCoupling,
    DegenerateInput,
    UnclassifiableAstatism,
    DegenerateFit,
    Underdetermined,
    NoConsistentModel,
    NoCommonFrequencies,
    Parse,
    Io,
    Json,
    Panic,
}

/// A uniformly sampled record.
pub struct ApfidSignal(Signal);

/// Outcome of identifying one channel.
pub struct ApfidIdentification(ChannelIdentification);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApfidComplex {
    pub re: f64,
    pub im: f64,
}

/// Identification settings; start from [`apfid_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApfidConfig {
    /// Frequency resolution in rad/s; 0 uses the record's own.
    pub delta: f64,
    /// Largest relative residual of a consistent fit.
    pub fit_tolerance: f64,
    pub max_order: usize,
    /// Upper end of the spectral scan in rad/s; 0 scans to just below the
    /// sampling limit.
    pub omega_max: f64,
    /// Peaks below this fraction of the spectrum maximum are ignored.
    pub rel_threshold: f64,
    /// Sidelobe rejection factor on the leakage envelope of stronger peaks.
    pub leakage_margin: f64,
    pub refine: bool,
    pub polish: bool,
    pub joint_projection: bool,
    /// Every coefficient of the channel polynomial is negative.
    pub negative_gain: bool,
}

impl From<&IdentifyConfig> for ApfidConfig {
    fn from(c: &IdentifyConfig) -> Self {
        ApfidConfig {
            delta: c.delta.unwrap_or(0.0),
            fit_tolerance: c.fit_tolerance,
            max_order: c.max_order,
            omega_max: c.omega_max.unwrap_or(0.0),
            rel_threshold: c.peak.rel_threshold,
            leakage_margin: c.peak.leakage_margin,
            refine: c.peak.refine,
            polish: c.peak.polish,
            joint_projection: c.joint_projection,
            negative_gain: c.gain_sign == GainSign::Negative,
        }
    }
}

impl From<&ApfidConfig> for IdentifyConfig {
    fn from(c: &ApfidConfig) -> Self {
        let auto = |v: f64| if v == 0.0 { None } else { Some(v) };
        IdentifyConfig {
            delta: auto(c.delta),
            peak: PeakPolicy {
                rel_threshold: c.rel_threshold,
                refine: c.refine,
                polish: c.polish,
                leakage_margin: c.leakage_margin,
            },
            fit_tolerance: c.fit_tolerance,
            max_order: c.max_order,
            omega_max: auto(c.omega_max),
            gain_sign: if c.negative_gain {
                GainSign::Negative
            } else {
                GainSign::Positive
            },
            joint_projection: c.joint_projection,
        }
    }
}

struct Failure(ApfidStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::InvalidArgument(_) => ApfidStatus::InvalidArgument,
            Error::Aliasing { .. } => ApfidStatus::Aliasing,
            Error::SingularPlant { .. } => ApfidStatus::SingularPlant,
            Error::AmbiguousCoupling { .. } => ApfidStatus::AmbiguousCoupling,
            Error::DegenerateInput(_) => ApfidStatus::DegenerateInput,
            Error::UnclassifiableAstatism { .. } => ApfidStatus::UnclassifiableAstatism,
            Error::DegenerateFit { .. } => ApfidStatus::DegenerateFit,
            Error::Underdetermined { .. } => ApfidStatus::Underdetermined,
            Error::NoConsistentModel { .. } => ApfidStatus::NoConsistentModel,
            Error::NoCommonFrequencies => ApfidStatus::NoCommonFrequencies,
            Error::Parse { .. } => ApfidStatus::Parse,
            Error::Io { .. } => ApfidStatus::Io,
            Error::Json(_) => ApfidStatus::Json,
            Error::Stage { .. } => unreachable!("root strips stage tags"),
        };
        Failure(status, e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: Option<&str>) {
    let message = message.map(|m| CString::new(m.replace('\0', " ")).expect("interior nul removed"));
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn guarded(f: impl FnOnce() -> Outcome<()>) -> ApfidStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            ApfidStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(Some(&message));
            status
        }
        Err(payload) => {
            let what = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(&format!("internal error: {what}")));
            ApfidStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ApfidStatus::NullPointer, format!("{what} is null"))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Outcome<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn array<'a, T>(p: *const T, len: usize, what: &str) -> Outcome<&'a [T]> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(null(what)),
        (false, _) => Ok(slice::from_raw_parts(p, len)),
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(ApfidStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Clears `*out` up front so callers never see a stale handle on failure.
unsafe fn out_slot<'a, T>(out: *mut *mut T) -> Outcome<&'a mut *mut T> {
    let slot = out.as_mut().ok_or_else(|| null("output pointer"))?;
    *slot = ptr::null_mut();
    Ok(slot)
}

fn owned_string(s: String) -> Outcome<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Failure(ApfidStatus::InvalidArgument, e.to_string()))
}

unsafe fn copy_out<T: Copy>(items: &[T], out: *mut T, capacity: usize) -> usize {
    if !out.is_null() {
        let n = items.len().min(capacity);
        ptr::copy_nonoverlapping(items.as_ptr(), out, n);
    }
    items.len()
}

fn complex(c: ApfidComplex) -> Complex64 {
    Complex64::new(c.re, c.im)
}

fn to_c(c: &Complex64) -> ApfidComplex {
    ApfidComplex { re: c.re, im: c.im }
}

unsafe fn config_or_default(config: *const ApfidConfig) -> IdentifyConfig {
    config.as_ref().map(IdentifyConfig::from).unwrap_or_default()
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn apfid_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn apfid_status_name(status: ApfidStatus) -> *const c_char {
    let name: &'static str = match status {
        ApfidStatus::Ok => "ok\0",
        ApfidStatus::NullPointer => "null pointer\0",
        ApfidStatus::InvalidArgument => "invalid argument\0",
        ApfidStatus::InvalidUtf8 => "invalid utf-8\0",
        ApfidStatus::Aliasing => "aliasing\0",
        ApfidStatus::SingularPlant => "singular plant\0",
        ApfidStatus::AmbiguousCoupling => "ambiguous coupling\0",
        ApfidStatus::DegenerateInput => "degenerate input\0",
        ApfidStatus::UnclassifiableAstatism => "unclassifiable astatism\0",
        ApfidStatus::DegenerateFit => "degenerate fit\0",
        ApfidStatus::Underdetermined => "underdetermined\0",
        ApfidStatus::NoConsistentModel => "no consistent model\0",
        ApfidStatus::NoCommonFrequencies => "no common frequencies\0",
        ApfidStatus::Parse => "parse error\0",
        ApfidStatus::Io => "i/o error\0",
        ApfidStatus::Json => "json error\0",
        ApfidStatus::Panic => "panic\0",
    };
    name.as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// Valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn apfid_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |m| m.as_ptr()))
}

#[no_mangle]
pub extern "C" fn apfid_config_default() -> ApfidConfig {
    ApfidConfig::from(&IdentifyConfig::default())
}

/// Copies `len` samples taken every `dt` seconds from `t0`.
///
/// # Safety
/// `samples` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_signal_new(
    samples: *const f64,
    len: usize,
    dt: f64,
    t0: f64,
    out: *mut *mut ApfidSignal,
) -> ApfidStatus {
    guarded(|| {
        let slot = out_slot(out)?;
        let samples = array(samples, len, "samples")?;
        let signal = Signal::with_start(samples.to_vec(), dt, t0)?;
        *slot = Box::into_raw(Box::new(ApfidSignal(signal)));
        Ok(())
    })
}

/// # Safety
/// `signal` must be null or a handle from [`apfid_signal_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apfid_signal_free(signal: *mut ApfidSignal) {
    if !signal.is_null() {
        drop(Box::from_raw(signal));
    }
}

/// Sample count; 0 for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn apfid_signal_len(signal: *const ApfidSignal) -> usize {
    signal.as_ref().map_or(0, |s| s.0.len())
}

/// Record resolution `2*pi / ((N - 1) * dt)`; NaN for a null handle.
///
/// # Safety
/// `signal` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn apfid_signal_resolution(signal: *const ApfidSignal) -> f64 {
    signal.as_ref().map_or(f64::NAN, |s| s.0.resolution())
}

/// Full pipeline for the channel from `inputs[channel]` to `output`. A null
/// `config` uses the defaults.
///
/// # Safety
/// `inputs` must point to `input_count` live signal handles; `output` must
/// be a live handle; `config` null or readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_identify_channel(
    inputs: *const *const ApfidSignal,
    input_count: usize,
    output: *const ApfidSignal,
    channel: usize,
    config: *const ApfidConfig,
    out: *mut *mut ApfidIdentification,
) -> ApfidStatus {
    guarded(|| {
        let slot = out_slot(out)?;
        let handles = array(inputs, input_count, "inputs")?;
        let signals = handles
            .iter()
            .map(|&h| reference(h, "input signal").map(|s| s.0.clone()))
            .collect::<Outcome<Vec<_>>>()?;
        let y = reference(output, "output signal")?;
        let id = identify_channel(&signals, &y.0, channel, &config_or_default(config))?;
        *slot = Box::into_raw(Box::new(ApfidIdentification(id)));
        Ok(())
    })
}

/// Order selection alone, from Fourier coefficients of input and output at
/// `count` frequencies and a known astatism degree.
///
/// # Safety
/// The three arrays must each hold `count` elements; `config` null or
/// readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_select_order(
    input_coefficients: *const ApfidComplex,
    output_coefficients: *const ApfidComplex,
    omegas: *const f64,
    count: usize,
    astatism: u8,
    config: *const ApfidConfig,
    out: *mut *mut ApfidIdentification,
) -> ApfidStatus {
    guarded(|| {
        let slot = out_slot(out)?;
        let in_c: Vec<Complex64> = array(input_coefficients, count, "input coefficients")?
            .iter()
            .copied()
            .map(complex)
            .collect();
        let out_c: Vec<Complex64> = array(output_coefficients, count, "output coefficients")?
            .iter()
            .copied()
            .map(complex)
            .collect();
        let omegas = array(omegas, count, "frequencies")?;
        let id = select_order(&in_c, &out_c, omegas, astatism, &config_or_default(config))?;
        *slot = Box::into_raw(Box::new(ApfidIdentification(id)));
        Ok(())
    })
}

/// Astatism degree from a transfer value `W = conj(c_y / c_x)`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_detect_astatism(w: ApfidComplex, out: *mut u8) -> ApfidStatus {
    guarded(|| {
        let slot = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *slot = detect_astatism(complex(w))?;
        Ok(())
    })
}

/// # Safety
/// `id` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_free(id: *mut ApfidIdentification) {
    if !id.is_null() {
        drop(Box::from_raw(id));
    }
}

/// Selected order; 0 for a null handle.
///
/// # Safety
/// `id` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_order(id: *const ApfidIdentification) -> usize {
    id.as_ref().map_or(0, |i| i.0.order)
}

/// Astatism degree; 0 for a null handle.
///
/// # Safety
/// `id` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_astatism(id: *const ApfidIdentification) -> u8 {
    id.as_ref().map_or(0, |i| i.0.astatism)
}

/// Coefficients `T_{p_a} ..= T_{p_a + order}`.
///
/// # Safety
/// `id` must be null or a live handle; `out` null or writable for
/// `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_coefficients(
    id: *const ApfidIdentification,
    out: *mut f64,
    capacity: usize,
) -> usize {
    id.as_ref().map_or(0, |i| copy_out(&i.0.coefficients, out, capacity))
}

/// Matched frequencies in ascending order.
///
/// # Safety
/// As for [`apfid_identification_coefficients`].
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_frequencies(
    id: *const ApfidIdentification,
    out: *mut f64,
    capacity: usize,
) -> usize {
    id.as_ref()
        .map_or(0, |i| copy_out(&i.0.matched_frequencies, out, capacity))
}

/// Input (`which = 0`) or output (`which = 1`) Fourier coefficients at the
/// matched frequencies.
///
/// # Safety
/// As for [`apfid_identification_coefficients`].
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_fourier(
    id: *const ApfidIdentification,
    which: u8,
    out: *mut ApfidComplex,
    capacity: usize,
) -> usize {
    let Some(i) = id.as_ref() else { return 0 };
    let source = match which {
        0 => &i.0.input_coefficients,
        1 => &i.0.output_coefficients,
        _ => return 0,
    };
    let items: Vec<ApfidComplex> = source.iter().map(to_c).collect();
    copy_out(&items, out, capacity)
}

/// Relative residual of the fit at `order`; `APFID_STATUS_INVALID_ARGUMENT`
/// if that order was not attempted.
///
/// # Safety
/// `id` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_residual(
    id: *const ApfidIdentification,
    order: usize,
    out: *mut f64,
) -> ApfidStatus {
    guarded(|| {
        let id = reference(id, "identification")?;
        let slot = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *slot =
            id.0.residual(order)
                .ok_or_else(|| Failure(ApfidStatus::InvalidArgument, format!("order {order} was not attempted")))?;
        Ok(())
    })
}

/// The identification as a JSON object.
///
/// # Safety
/// `id` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_identification_to_json(
    id: *const ApfidIdentification,
    out: *mut *mut c_char,
) -> ApfidStatus {
    guarded(|| {
        let slot = out_slot(out)?;
        let id = reference(id, "identification")?;
        let json = serde_json::to_string_pretty(&id.0).map_err(Error::from)?;
        *slot = owned_string(json)?;
        Ok(())
    })
}

/// Identifies every channel of a JSON run configuration against telemetry
/// CSV text and returns the JSON report. `jobs` bounds concurrency; 0 means 1.
///
/// # Safety
/// `csv` and `config_json` must be nul-terminated strings; `report` writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_identify_csv(
    csv: *const c_char,
    config_json: *const c_char,
    jobs: usize,
    report: *mut *mut c_char,
) -> ApfidStatus {
    guarded(|| {
        let slot = out_slot(report)?;
        let record = parse_csv(text(csv, "csv")?)?;
        let config = RunConfig::from_json(text(config_json, "config")?)?;
        let results = identify_record(&record, &config, jobs.max(1))?;
        *slot = owned_string(emit_report(&results, &config)?)?;
        Ok(())
    })
}

/// Simulates a rig described in JSON and returns the telemetry as CSV text.
///
/// # Safety
/// `spec_json` must be a nul-terminated string; `csv` writable.
#[no_mangle]
pub unsafe extern "C" fn apfid_simulate_csv(spec_json: *const c_char, csv: *mut *mut c_char) -> ApfidStatus {
    guarded(|| {
        let slot = out_slot(csv)?;
        let spec = SimulationSpec::from_json(text(spec_json, "simulation spec")?)?;
        *slot = owned_string(write_csv(&simulate_record(&spec)?))?;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn apfid_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_c_layout() {
        let c = IdentifyConfig {
            delta: Some(0.01),
            omega_max: Some(3.0),
            gain_sign: GainSign::Negative,
            max_order: 4,
            ..IdentifyConfig::default()
        };
        assert_eq!(IdentifyConfig::from(&ApfidConfig::from(&c)), c);
        assert_eq!(IdentifyConfig::from(&apfid_config_default()), IdentifyConfig::default());
    }

    #[test]
    fn stage_tags_do_not_hide_the_status() {
        let e = Error::Stage {
            stage: apfid::Stage::Matching,
            source: Box::new(Error::NoCommonFrequencies),
        };
        let Failure(status, message) = e.into();
        assert_eq!(status, ApfidStatus::NoCommonFrequencies);
        assert!(message.contains("frequency matching"));
    }

    #[test]
    fn panics_become_status_codes() {
        let status = guarded(|| panic!("boom"));
        assert_eq!(status, ApfidStatus::Panic);
        let msg = unsafe { CStr::from_ptr(apfid_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
        assert_eq!(guarded(|| Ok(())), ApfidStatus::Ok);
        assert!(apfid_last_error().is_null());
    }
}
