//! C ABI over `sagnac-core`.
//!
//! Every fallible call returns a [`SagnacStatus`]; on failure the message is
//! kept per thread and can be read with [`sagnac_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use sagnac_core::analysis::{fit_power_law, qber_from_variance, visibility_from_variance, PowerLawPoint};
use sagnac_core::fiber::{impulse_response, Direction, FiberSegment, LoopLayout, LossPoint};
use sagnac_core::runner::{run, Command, RunOptions};
use sagnac_core::scenario::{load_scenario, parse_scenario, Scenario};
use sagnac_core::signal::optimal_duty_two_user;
use sagnac_core::units::{GroupVelocity, TimeGrid};
use sagnac_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SagnacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    InvalidLayout = 4,
    GridError = 5,
    Infeasible = 6,
    FitFailed = 7,
    ScenarioError = 8,
    IoError = 9,
    InvalidUtf8 = 10,
    Internal = 11,
    Panic = 12,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SagnacFiber {
    Smf28 = 0,
    Smf28Ull = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SagnacDirection {
    Clockwise = 0,
    Counterclockwise = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SagnacCommand {
    Simulate = 0,
    AnalyzePhase = 1,
    FitOtdr = 2,
    OptimizeBurst = 3,
    Psd = 4,
}

/// Result of `variance = a L^b (+ c)`. `c` and `c_sigma` are zero without an offset.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SagnacPowerLaw {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
    pub c_sigma: f64,
    pub reduced_chi2: f64,
}

/// Ring under construction: segments in order plus discrete loss points.
pub struct SagnacLayout {
    segments: Vec<FiberSegment>,
    loss_points: Vec<LossPoint>,
}

impl SagnacLayout {
    fn build(&self) -> Result<LoopLayout, Error> {
        LoopLayout::new(self.segments.clone(), self.loss_points.clone(), GroupVelocity::default())
    }
}

/// A validated scenario document.
pub struct SagnacScenario {
    inner: Scenario,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> SagnacStatus {
    match err {
        Error::Context { source, .. } => status_of(source),
        Error::InvalidParameter { .. } => SagnacStatus::InvalidArgument,
        Error::EmptyLayout | Error::LossPointOutOfRange { .. } => SagnacStatus::InvalidLayout,
        Error::GridTooShort { .. }
        | Error::GridMismatch(_)
        | Error::NonPeriodic(_)
        | Error::UnresolvableWidth { .. }
        | Error::BandwidthAboveNyquist { .. }
        | Error::GridTooCoarse { .. }
        | Error::SpanTooShort { .. } => SagnacStatus::GridError,
        Error::InfeasibleBurst(_) => SagnacStatus::Infeasible,
        Error::InsufficientData(_)
        | Error::DegenerateDesign(_)
        | Error::NoConvergence { .. }
        | Error::InvalidCorrection { .. } => SagnacStatus::FitFailed,
        Error::ScenarioParse { .. } | Error::ScenarioInvalid { .. } => SagnacStatus::ScenarioError,
        Error::Io(_) => SagnacStatus::IoError,
        _ => SagnacStatus::Internal,
    }
}

/// Runs `body`, records any error or panic, and maps it to a status.
fn guard(body: impl FnOnce() -> Result<(), (SagnacStatus, String)>) -> SagnacStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SagnacStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SagnacStatus::Panic
        }
    }
}

fn core(err: Error) -> (SagnacStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(name: &str) -> (SagnacStatus, String) {
    (SagnacStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn text<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, (SagnacStatus, String)> {
    if ptr.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| (SagnacStatus::InvalidUtf8, format!("`{name}` is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sagnac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sagnac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an empty layout.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_new(out: *mut *mut SagnacLayout) -> SagnacStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let layout = Box::new(SagnacLayout {
            segments: Vec::new(),
            loss_points: Vec::new(),
        });
        *out = Box::into_raw(layout);
        Ok(())
    })
}

/// # Safety
/// `layout` must be NULL or a handle from [`sagnac_layout_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_free(layout: *mut SagnacLayout) {
    if !layout.is_null() {
        drop(Box::from_raw(layout));
    }
}

/// Appends a segment of a standard fiber type.
///
/// # Safety
/// `layout` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_add_fiber(layout: *mut SagnacLayout, fiber: SagnacFiber, length_km: f64) -> SagnacStatus {
    guard(|| {
        let layout = layout.as_mut().ok_or_else(|| null("layout"))?;
        let seg = match fiber {
            SagnacFiber::Smf28 => FiberSegment::smf28(length_km),
            SagnacFiber::Smf28Ull => FiberSegment::smf28_ull(length_km),
        }
        .map_err(core)?;
        layout.segments.push(seg);
        Ok(())
    })
}

/// Appends a segment with explicit attenuation (dB/km) and backscatter
/// coefficient (1/s).
///
/// # Safety
/// `layout` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_add_segment(
    layout: *mut SagnacLayout,
    length_km: f64,
    alpha_db_per_km: f64,
    eta_per_s: f64,
) -> SagnacStatus {
    guard(|| {
        let layout = layout.as_mut().ok_or_else(|| null("layout"))?;
        let seg = FiberSegment::new(length_km, alpha_db_per_km, eta_per_s, "custom").map_err(core)?;
        layout.segments.push(seg);
        Ok(())
    })
}

/// Adds a discrete loss at `position_km` from the clockwise launch point.
/// The position is checked against the ring length when the layout is used.
///
/// # Safety
/// `layout` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_add_loss_point(layout: *mut SagnacLayout, position_km: f64, loss_db: f64) -> SagnacStatus {
    guard(|| {
        let layout = layout.as_mut().ok_or_else(|| null("layout"))?;
        if !(position_km.is_finite() && loss_db.is_finite() && loss_db >= 0.0) {
            return Err((SagnacStatus::InvalidArgument, format!("loss point ({position_km}, {loss_db}) is invalid")));
        }
        layout.loss_points.push(LossPoint { position_km, loss_db });
        Ok(())
    })
}

/// # Safety
/// `layout` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_total_loss_db(layout: *const SagnacLayout, out: *mut f64) -> SagnacStatus {
    guard(|| {
        let layout = layout.as_ref().ok_or_else(|| null("layout"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = layout.build().map_err(core)?.total_loss_db();
        Ok(())
    })
}

/// One-way transit time of the ring in seconds.
///
/// # Safety
/// `layout` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_transit_time_s(layout: *const SagnacLayout, out: *mut f64) -> SagnacStatus {
    guard(|| {
        let layout = layout.as_ref().ok_or_else(|| null("layout"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = layout.build().map_err(core)?.transit_time();
        Ok(())
    })
}

/// Samples the backscatter response (1/s per unit pulse energy) from t = 0
/// to the round-trip horizon with step `dt_s`.
///
/// `required` always receives the number of samples. When `capacity` is
/// smaller, nothing is written to `buffer` and `BufferTooSmall` is returned;
/// pass a NULL buffer with zero capacity to query the size.
///
/// # Safety
/// `layout` must be a live handle, `required` writable and `buffer` valid
/// for `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sagnac_layout_impulse_response(
    layout: *const SagnacLayout,
    direction: SagnacDirection,
    dt_s: f64,
    buffer: *mut f64,
    capacity: usize,
    required: *mut usize,
) -> SagnacStatus {
    guard(|| {
        let layout = layout.as_ref().ok_or_else(|| null("layout"))?;
        let required = required.as_mut().ok_or_else(|| null("required"))?;
        let built = layout.build().map_err(core)?;
        if !(dt_s.is_finite() && dt_s > 0.0) {
            return Err((SagnacStatus::InvalidArgument, format!("dt_s = {dt_s} must be > 0")));
        }
        let grid = TimeGrid::covering(dt_s, built.round_trip_horizon() + dt_s).map_err(core)?;
        let dir = match direction {
            SagnacDirection::Clockwise => Direction::Clockwise,
            SagnacDirection::Counterclockwise => Direction::Counterclockwise,
        };
        let h = impulse_response(&built, dir, &grid).map_err(core)?;
        *required = h.values.len();
        if capacity < h.values.len() {
            return Err((
                SagnacStatus::BufferTooSmall,
                format!("buffer holds {capacity} samples, {} needed", h.values.len()),
            ));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        std::slice::from_raw_parts_mut(buffer, h.values.len()).copy_from_slice(&h.values);
        Ok(())
    })
}

/// Fringe visibility for a Gaussian phase variance.
#[no_mangle]
pub extern "C" fn sagnac_visibility_from_variance(sigma2: f64) -> f64 {
    visibility_from_variance(sigma2)
}

/// Quantum bit error rate for a Gaussian phase variance.
#[no_mangle]
pub extern "C" fn sagnac_qber_from_variance(sigma2: f64) -> f64 {
    qber_from_variance(sigma2)
}

/// Duty cycle that maximizes throughput for two users sharing the loop.
#[no_mangle]
pub extern "C" fn sagnac_optimal_duty() -> f64 {
    optimal_duty_two_user()
}

/// Fits `variance = a L^b` (plus `c` when `with_offset` is nonzero).
/// `sigmas` may be NULL for an unweighted fit.
///
/// # Safety
/// `lengths_km` and `variances` (and `sigmas` unless NULL) must be valid for
/// `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sagnac_fit_power_law(
    lengths_km: *const f64,
    variances: *const f64,
    sigmas: *const f64,
    n: usize,
    with_offset: i32,
    out: *mut SagnacPowerLaw,
) -> SagnacStatus {
    guard(|| {
        if lengths_km.is_null() {
            return Err(null("lengths_km"));
        }
        if variances.is_null() {
            return Err(null("variances"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let l = std::slice::from_raw_parts(lengths_km, n);
        let v = std::slice::from_raw_parts(variances, n);
        let s = (!sigmas.is_null()).then(|| std::slice::from_raw_parts(sigmas, n));
        let points: Vec<PowerLawPoint> = (0..n)
            .map(|i| PowerLawPoint {
                length_km: l[i],
                variance: v[i],
                sigma: s.map(|s| s[i]),
            })
            .collect();
        let fit = fit_power_law(&points, with_offset != 0).map_err(core)?;
        let (c, c_sigma) = fit.get("c").unwrap_or((0.0, 0.0));
        *out = SagnacPowerLaw {
            a: fit.value("a"),
            b: fit.value("b"),
            c,
            a_sigma: fit.sigma("a"),
            b_sigma: fit.sigma("b"),
            c_sigma,
            reduced_chi2: fit.reduced_chi2,
        };
        Ok(())
    })
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sagnac_scenario_load(path: *const c_char, out: *mut *mut SagnacScenario) -> SagnacStatus {
    guard(|| {
        let path = text(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = load_scenario(Path::new(path)).map_err(core)?;
        *out = Box::into_raw(Box::new(SagnacScenario { inner }));
        Ok(())
    })
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sagnac_scenario_parse(json: *const c_char, out: *mut *mut SagnacScenario) -> SagnacStatus {
    guard(|| {
        let json = text(json, "json")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = parse_scenario(json).map_err(core)?;
        *out = Box::into_raw(Box::new(SagnacScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be NULL or a live scenario handle.
#[no_mangle]
pub unsafe extern "C" fn sagnac_scenario_free(scenario: *mut SagnacScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs one subcommand and writes its tables and `report.json` to `out_dir`.
/// Seeds `seed .. seed + seeds` are used; `timestamps` nonzero also writes
/// the raw detection streams.
///
/// # Safety
/// `scenario` must be a live handle and `out_dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sagnac_scenario_run(
    scenario: *const SagnacScenario,
    command: SagnacCommand,
    out_dir: *const c_char,
    seed: u64,
    seeds: usize,
    timestamps: i32,
) -> SagnacStatus {
    guard(|| {
        let scenario = scenario.as_ref().ok_or_else(|| null("scenario"))?;
        let dir = text(out_dir, "out_dir")?;
        let command = match command {
            SagnacCommand::Simulate => Command::Simulate,
            SagnacCommand::AnalyzePhase => Command::AnalyzePhase,
            SagnacCommand::FitOtdr => Command::FitOtdr,
            SagnacCommand::OptimizeBurst => Command::OptimizeBurst,
            SagnacCommand::Psd => Command::Psd,
        };
        let options = RunOptions {
            seed,
            seeds,
            timestamps: timestamps != 0,
        };
        run(&scenario.inner, command, Path::new(dir), &options).map_err(core)?;
        Ok(())
    })
}
