//! C ABI over the chrono-cdr engine.
//!
//! Every fallible function returns a [`CcdrStatus`]. On failure the message
//! is kept per thread and can be fetched with [`ccdr_last_error`]. Strings
//! handed out by this library must be released with [`ccdr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use chrono_cdr::circadian::{detect_daily_edges, smooth, DayView, EdgeParams, SearchWindow};
use chrono_cdr::config::RunConfig;
use chrono_cdr::geo::{build_voronoi, distance_km, BoundingBox, LatLon, LocalProjection, Location, SiteGeometry, Tessellation};
use chrono_cdr::mobility::{location_entropy, pearson_r, radius_of_gyration, VisitSet};
use chrono_cdr::pipeline::{self, Subcommand};
use chrono_cdr::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcdrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// The quantity has no value for this input, e.g. a constant series.
    Undefined = 3,
    MissingArtifact = 4,
    Io = 5,
    Panic = 6,
}

/// Edge detection settings. Times are minutes after local midnight; the
/// bed window may extend past 1440.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcdrEdgeParams {
    pub half_fraction: f64,
    pub wake_start_min: f64,
    pub wake_end_min: f64,
    pub bed_start_min: f64,
    pub bed_end_min: f64,
    pub noise_floor: f64,
}

/// Opaque Voronoi tessellation.
pub struct CcdrTessellation(Tessellation);

/// Opaque pipeline run bound to a loaded configuration.
pub struct CcdrRun {
    cfg: RunConfig,
    threads: Option<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: CcdrStatus, msg: impl Into<String>) -> CcdrStatus {
    set_error(msg);
    status
}

fn from_error(e: &Error) -> CcdrStatus {
    let status = match e {
        Error::MissingArtifact { .. } => CcdrStatus::MissingArtifact,
        Error::UndefinedCorrelation(_) => CcdrStatus::Undefined,
        _ if e.exit_code() == 4 => CcdrStatus::Io,
        _ => CcdrStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> CcdrStatus) -> CcdrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(CcdrStatus::Panic, "internal panic"))
}

/// Borrow `n` elements, accepting a null pointer only when `n` is zero.
unsafe fn slice<'a, T>(p: *const T, n: usize) -> Option<&'a [T]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

macro_rules! need {
    ($e:expr, $what:literal) => {
        match $e {
            Some(v) => v,
            None => return fail(CcdrStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

/// Message of the last failure on this thread, or null. The caller owns the
/// returned string.
#[no_mangle]
pub extern "C" fn ccdr_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map_or(ptr::null_mut(), CString::into_raw))
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ccdr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Great-circle distance in km.
#[no_mangle]
pub extern "C" fn ccdr_distance_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    distance_km(LatLon::new(lat1, lon1), LatLon::new(lat2, lon2))
}

unsafe fn visits(lats: *const f64, lons: *const f64, counts: *const u32, n: usize) -> Option<VisitSet> {
    let (la, lo, c) = (slice(lats, n)?, slice(lons, n)?, slice(counts, n)?);
    Some(VisitSet::from_visits((0..n).map(|i| (LatLon::new(la[i], lo[i]), c[i]))))
}

/// Radius of gyration in km of `n` weighted locations.
///
/// # Safety
/// Each array must hold `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccdr_gyration_km(
    lats: *const f64,
    lons: *const f64,
    counts: *const u32,
    n: usize,
    out: *mut f64,
) -> CcdrStatus {
    guard(|| {
        let v = need!(visits(lats, lons, counts, n), "input array");
        let out = need!(out.as_mut(), "out");
        let origin = v.visits().first().map_or(LatLon::new(0.0, 0.0), |x| x.location);
        *out = radius_of_gyration(&v, &LocalProjection::new(origin));
        CcdrStatus::Ok
    })
}

/// Visit entropy over distinct locations, normalized by ln of the total
/// visit count.
///
/// # Safety
/// Each array must hold `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccdr_entropy(
    lats: *const f64,
    lons: *const f64,
    counts: *const u32,
    n: usize,
    out: *mut f64,
) -> CcdrStatus {
    guard(|| {
        let v = need!(visits(lats, lons, counts, n), "input array");
        *need!(out.as_mut(), "out") = location_entropy(&v);
        CcdrStatus::Ok
    })
}

/// Sample Pearson correlation. Returns `Undefined` for constant input or
/// fewer than two points.
///
/// # Safety
/// `x` and `y` must hold `n` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccdr_pearson(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> CcdrStatus {
    guard(|| {
        let (x, y) = (need!(slice(x, n), "x"), need!(slice(y, n), "y"));
        let out = need!(out.as_mut(), "out");
        match pearson_r(x, y) {
            Ok(r) => {
                *out = r;
                CcdrStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// Centered moving average over `window` samples, shrinking at the ends.
/// `out` may alias `values`.
///
/// # Safety
/// `values` and `out` must hold `n` elements.
#[no_mangle]
pub unsafe extern "C" fn ccdr_smooth(values: *const f64, n: usize, window: usize, out: *mut f64) -> CcdrStatus {
    guard(|| {
        if window == 0 {
            return fail(CcdrStatus::InvalidArgument, "window must be at least 1");
        }
        let s = smooth(need!(slice(values, n), "values"), window);
        if n > 0 {
            need!((!out.is_null()).then_some(()), "out");
            ptr::copy(s.as_ptr(), out, n);
        }
        CcdrStatus::Ok
    })
}

#[no_mangle]
pub extern "C" fn ccdr_edge_params_default() -> CcdrEdgeParams {
    let p = EdgeParams::default();
    CcdrEdgeParams {
        half_fraction: p.half_fraction,
        wake_start_min: p.rise.start_min,
        wake_end_min: p.rise.end_min,
        bed_start_min: p.fall.start_min,
        bed_end_min: p.fall.end_min,
        noise_floor: p.noise_floor,
    }
}

/// Wake and bed times of one smoothed day. `values[k]` sits at minute
/// `10*k + offset_min`; pass up to two days so late falls are visible.
/// Undetected edges are written as NaN.
///
/// # Safety
/// `values` must hold `n` elements; `params`, `wake` and `bed` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ccdr_detect_edges(
    values: *const f64,
    n: usize,
    offset_min: f64,
    params: *const CcdrEdgeParams,
    wake: *mut f64,
    bed: *mut f64,
) -> CcdrStatus {
    guard(|| {
        let values = need!(slice(values, n), "values");
        let p = need!(params.as_ref(), "params");
        let (wake, bed) = (need!(wake.as_mut(), "wake"), need!(bed.as_mut(), "bed"));
        if !(p.half_fraction > 0.0 && p.half_fraction < 1.0) {
            return fail(CcdrStatus::InvalidArgument, "half_fraction must be in (0, 1)");
        }
        let params = EdgeParams {
            half_fraction: p.half_fraction,
            rise: SearchWindow::new(p.wake_start_min, p.wake_end_min),
            fall: SearchWindow::new(p.bed_start_min, p.bed_end_min),
            noise_floor: p.noise_floor,
        };
        let e = detect_daily_edges(&DayView::new(values, offset_min), &params);
        *wake = e.wake_min.unwrap_or(f64::NAN);
        *bed = e.bed_min.unwrap_or(f64::NAN);
        CcdrStatus::Ok
    })
}

/// Voronoi cells of `n` sites clipped to their bounding box grown by
/// `pad_km`. Site `i` keeps index `i`.
///
/// # Safety
/// `lats` and `lons` must hold `n` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ccdr_tessellation_new(
    lats: *const f64,
    lons: *const f64,
    n: usize,
    pad_km: f64,
    out: *mut *mut CcdrTessellation,
) -> CcdrStatus {
    guard(|| {
        let (la, lo) = (need!(slice(lats, n), "lats"), need!(slice(lons, n), "lons"));
        let out = need!(out.as_mut(), "out");
        *out = ptr::null_mut();
        let sites: Vec<SiteGeometry> = (0..n)
            .map(|i| SiteGeometry {
                site_id: format!("{i:010}"),
                location: LatLon::new(la[i], lo[i]),
                member_cells: Vec::new(),
                polygon: Vec::new(),
            })
            .collect();
        let Some(bbox) = BoundingBox::around(sites.iter().map(|s| &s.location), pad_km) else {
            return fail(CcdrStatus::InvalidArgument, "at least one site is required");
        };
        match build_voronoi(sites, bbox) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(CcdrTessellation(t)));
                CcdrStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `t` must come from [`ccdr_tessellation_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ccdr_tessellation_free(t: *mut CcdrTessellation) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Index of the cell containing the point, or -1 outside the box.
///
/// # Safety
/// `t` must be a live tessellation and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ccdr_tessellation_locate(
    t: *const CcdrTessellation,
    lat: f64,
    lon: f64,
    out: *mut i64,
) -> CcdrStatus {
    guard(|| {
        let t = need!(t.as_ref(), "tessellation");
        *need!(out.as_mut(), "out") = match t.0.locate(LatLon::new(lat, lon)) {
            Location::Site(i) => i as i64,
            Location::OutOfArea => -1,
        };
        CcdrStatus::Ok
    })
}

/// Area in km² of cell `i`.
///
/// # Safety
/// `t` must be a live tessellation and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ccdr_tessellation_area_km2(t: *const CcdrTessellation, i: usize, out: *mut f64) -> CcdrStatus {
    guard(|| {
        let t = need!(t.as_ref(), "tessellation");
        if i >= t.0.sites().len() {
            return fail(CcdrStatus::InvalidArgument, "site index out of range");
        }
        *need!(out.as_mut(), "out") = t.0.area_km2(i);
        CcdrStatus::Ok
    })
}

/// Loads and validates a run configuration. `threads` of 0 uses all cores.
///
/// # Safety
/// `config_path` must be a NUL-terminated UTF-8 path; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ccdr_run_open(config_path: *const c_char, threads: usize, out: *mut *mut CcdrRun) -> CcdrStatus {
    guard(|| {
        let out = need!(out.as_mut(), "out");
        *out = ptr::null_mut();
        let path = need!((!config_path.is_null()).then(|| CStr::from_ptr(config_path)), "config_path");
        let Ok(path) = path.to_str() else {
            return fail(CcdrStatus::InvalidArgument, "config_path is not UTF-8");
        };
        match RunConfig::load(Path::new(path)).and_then(|c| c.validate().map(|()| c)) {
            Ok(cfg) => {
                let threads = (threads > 0).then_some(threads);
                *out = Box::into_raw(Box::new(CcdrRun { cfg, threads }));
                CcdrStatus::Ok
            }
            Err(e) => from_error(&e),
        }
    })
}

/// # Safety
/// `run` must come from [`ccdr_run_open`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ccdr_run_free(run: *mut CcdrRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Runs one step by its command-line name, e.g. `"working-hours"`, or
/// `"all"` for every step in order.
///
/// # Safety
/// `run` must be live; `step` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ccdr_run_step(run: *const CcdrRun, step: *const c_char) -> CcdrStatus {
    guard(|| {
        let run = need!(run.as_ref(), "run");
        let step = need!((!step.is_null()).then(|| CStr::from_ptr(step)), "step");
        let name = step.to_string_lossy();
        let result = if name == "all" {
            pipeline::run_all(&run.cfg, run.threads)
        } else {
            match Subcommand::ALL.iter().find(|s| s.as_str() == name) {
                Some(s) => pipeline::run(*s, &run.cfg, run.threads),
                None => return fail(CcdrStatus::InvalidArgument, format!("unknown step `{name}`")),
            }
        };
        result.map_or_else(|e| from_error(&e), |()| CcdrStatus::Ok)
    })
}

/// Effective configuration as flat JSON. The caller owns the string.
///
/// # Safety
/// `run` must be live.
#[no_mangle]
pub unsafe extern "C" fn ccdr_run_effective_config(run: *const CcdrRun) -> *mut c_char {
    let Some(run) = run.as_ref() else {
        set_error("run is null");
        return ptr::null_mut();
    };
    let json = serde_json::Value::Object(run.cfg.effective()).to_string();
    CString::new(json).map_or(ptr::null_mut(), CString::into_raw)
}
