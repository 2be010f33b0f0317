//! C ABI over the millsurf core.
//!
//! Every fallible call returns a `MillsurfStatus`. On failure the message
//! is kept per thread and can be fetched with
//! `millsurf_last_error_message`. Objects cross the boundary as opaque
//! handles that the caller releases with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use millsurf::analytic::{predict_sz, SzBranch};
use millsurf::areal::{compute_all, ArealOptions, ParamValue};
use millsurf::config::{ConfigFile, RunConfig};
use millsurf::heightfield::HeightField;
use millsurf::tool::{effective_radius, EffectiveRadiusForm, ToolDefinition};
use millsurf::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MillsurfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Domain = 3,
    SingularOrientation = 4,
    Resource = 5,
    Config = 6,
    Parse = 7,
    Input = 8,
    Io = 9,
    EmptyResult = 10,
    RankDeficient = 11,
    Unbalanced = 12,
    BufferTooSmall = 13,
    Panic = 14,
}

impl From<&Error> for MillsurfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => Self::Domain,
            Error::SingularOrientation { .. } => Self::SingularOrientation,
            Error::Resource(_) => Self::Resource,
            Error::Config(_) => Self::Config,
            Error::Parse { .. } => Self::Parse,
            Error::Input(_) => Self::Input,
            Error::Io { .. } => Self::Io,
            Error::EmptyResult => Self::EmptyResult,
            Error::RankDeficient(_) => Self::RankDeficient,
            Error::Unbalanced(_) => Self::Unbalanced,
        }
    }
}

/// Radius form selector for `millsurf_effective_radius`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MillsurfRadiusForm {
    AsPrinted = 0,
    Variant = 1,
}

/// Branch selector for `millsurf_predict_sz`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MillsurfSzBranch {
    AsPrinted = 0,
    HcAdditiveSwapped = 1,
}

/// Areal parameters of a leveled field. Undefined entries are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MillsurfArealParams {
    /// µm
    pub sz: f64,
    pub sa: f64,
    pub sq: f64,
    pub sku: f64,
    pub ssk: f64,
    /// µm
    pub sv: f64,
    /// 1/mm²
    pub sds: f64,
    /// mm
    pub sal: f64,
    /// degrees
    pub std: f64,
}

/// Height field in µm on a regular grid in mm.
pub struct MillsurfHeightField(HeightField);

/// Key/value configuration, interpreted when a simulation runs.
pub struct MillsurfConfig(ConfigFile);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: MillsurfStatus, msg: impl Into<String>) -> MillsurfStatus {
    set_error(msg.into());
    status
}

/// Run `f`, recording errors and turning panics into a status.
fn guard(f: impl FnOnce() -> Result<(), MillsurfStatus>) -> MillsurfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MillsurfStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(MillsurfStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn core(e: Error) -> MillsurfStatus {
    let s = MillsurfStatus::from(&e);
    fail(s, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, MillsurfStatus> {
    if p.is_null() {
        return Err(fail(MillsurfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(MillsurfStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, MillsurfStatus> {
    p.as_mut()
        .ok_or_else(|| fail(MillsurfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, MillsurfStatus> {
    p.as_ref()
        .ok_or_else(|| fail(MillsurfStatus::NullPointer, format!("{what} is null")))
}

/// Message for the last failed call on this thread, or null after a
/// successful call. Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn millsurf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn millsurf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a field from `nx * ny` row-major heights (µm, NaN = masked).
///
/// # Safety
/// `z` must point to `nx * ny` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_heightfield_new(
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    z: *const f64,
    out: *mut *mut MillsurfHeightField,
) -> MillsurfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if z.is_null() {
            return Err(fail(MillsurfStatus::NullPointer, "z is null"));
        }
        let n = nx
            .checked_mul(ny)
            .ok_or_else(|| fail(MillsurfStatus::Input, "nx * ny overflows"))?;
        let heights = std::slice::from_raw_parts(z, n).to_vec();
        let hf = HeightField::new(nx, ny, dx, dy, heights).map_err(core)?;
        *out = Box::into_raw(Box::new(MillsurfHeightField(hf)));
        Ok(())
    })
}

/// Read a height-field CSV file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_heightfield_read_csv(
    path: *const c_char,
    out: *mut *mut MillsurfHeightField,
) -> MillsurfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let hf = HeightField::read_csv(Path::new(path)).map_err(core)?;
        *out = Box::into_raw(Box::new(MillsurfHeightField(hf)));
        Ok(())
    })
}

/// Write the field as CSV.
///
/// # Safety
/// `hf` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn millsurf_heightfield_write_csv(
    hf: *const MillsurfHeightField,
    path: *const c_char,
) -> MillsurfStatus {
    guard(|| {
        let hf = handle(hf, "heightfield")?;
        let path = str_arg(path, "path")?;
        hf.0.write_csv(Path::new(path)).map_err(core)
    })
}

/// Grid size and spacing (mm). Any output pointer may be null.
///
/// # Safety
/// `hf` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_heightfield_shape(
    hf: *const MillsurfHeightField,
    nx: *mut usize,
    ny: *mut usize,
    dx: *mut f64,
    dy: *mut f64,
) -> MillsurfStatus {
    guard(|| {
        let hf = &handle(hf, "heightfield")?.0;
        if let Some(p) = nx.as_mut() {
            *p = hf.nx;
        }
        if let Some(p) = ny.as_mut() {
            *p = hf.ny;
        }
        if let Some(p) = dx.as_mut() {
            *p = hf.dx;
        }
        if let Some(p) = dy.as_mut() {
            *p = hf.dy;
        }
        Ok(())
    })
}

/// Copy the row-major heights into `buf`, which holds `len` doubles.
///
/// # Safety
/// `hf` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn millsurf_heightfield_copy_heights(
    hf: *const MillsurfHeightField,
    buf: *mut f64,
    len: usize,
) -> MillsurfStatus {
    guard(|| {
        let z = &handle(hf, "heightfield")?.0.z;
        if buf.is_null() {
            return Err(fail(MillsurfStatus::NullPointer, "buf is null"));
        }
        if len < z.len() {
            return Err(fail(
                MillsurfStatus::BufferTooSmall,
                format!("buffer holds {len} values, field has {}", z.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, z.len()).copy_from_slice(z);
        Ok(())
    })
}

/// # Safety
/// `hf` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn millsurf_heightfield_free(hf: *mut MillsurfHeightField) {
    if !hf.is_null() {
        drop(Box::from_raw(hf));
    }
}

/// Level the field and compute the areal parameters. `sal_threshold` ≤ 0
/// selects the default autocorrelation threshold.
///
/// # Safety
/// `hf` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_areal_params(
    hf: *const MillsurfHeightField,
    sal_threshold: f64,
    out: *mut MillsurfArealParams,
) -> MillsurfStatus {
    guard(|| {
        let hf = &handle(hf, "heightfield")?.0;
        let out = out_arg(out, "out")?;
        let mut opts = ArealOptions::default();
        if sal_threshold > 0.0 {
            opts.sal_threshold = sal_threshold;
        }
        let p = compute_all(hf, &opts);
        let v = |p: &ParamValue| p.value().unwrap_or(f64::NAN);
        *out = MillsurfArealParams {
            sz: v(&p.sz),
            sa: v(&p.sa),
            sq: v(&p.sq),
            sku: v(&p.sku),
            ssk: v(&p.ssk),
            sv: v(&p.sv),
            sds: v(&p.sds),
            sal: v(&p.sal),
            std: v(&p.std),
        };
        Ok(())
    })
}

/// Equivalent cutting radius (mm) for yaw and tilt in degrees.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_effective_radius(
    yaw_deg: f64,
    tilt_deg: f64,
    radius_mm: f64,
    corner_radius_mm: f64,
    form: MillsurfRadiusForm,
    out: *mut f64,
) -> MillsurfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let tool = ToolDefinition::new(radius_mm, corner_radius_mm).map_err(core)?;
        let form = match form {
            MillsurfRadiusForm::AsPrinted => EffectiveRadiusForm::AsPrinted,
            MillsurfRadiusForm::Variant => EffectiveRadiusForm::Variant,
        };
        *out = effective_radius(yaw_deg.to_radians(), tilt_deg.to_radians(), &tool, form).map_err(core)?;
        Ok(())
    })
}

/// Closed-form Sz estimate in mm; all inputs in mm.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_predict_sz(
    fz_mm: f64,
    scallop_mm: f64,
    req_mm: f64,
    corner_radius_mm: f64,
    branch: MillsurfSzBranch,
    out: *mut f64,
) -> MillsurfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let branch = match branch {
            MillsurfSzBranch::AsPrinted => SzBranch::AsPrinted,
            MillsurfSzBranch::HcAdditiveSwapped => SzBranch::HcAdditiveSwapped,
        };
        *out = predict_sz(fz_mm, scallop_mm, req_mm, corner_radius_mm, branch).map_err(core)?;
        Ok(())
    })
}

/// Empty configuration: every key takes its default.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_config_new(out: *mut *mut MillsurfConfig) -> MillsurfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(MillsurfConfig(ConfigFile::default())));
        Ok(())
    })
}

/// Read a configuration file. Relative paths inside it resolve against
/// its directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_config_read(
    path: *const c_char,
    out: *mut *mut MillsurfConfig,
) -> MillsurfStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let cfg = ConfigFile::read(Path::new(path)).map_err(core)?;
        *out = Box::into_raw(Box::new(MillsurfConfig(cfg)));
        Ok(())
    })
}

/// Apply one `section.key=value` override.
///
/// # Safety
/// `cfg` must be a live handle and `assignment` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn millsurf_config_set(cfg: *mut MillsurfConfig, assignment: *const c_char) -> MillsurfStatus {
    guard(|| {
        let cfg = out_arg(cfg, "config")?;
        let assignment = str_arg(assignment, "assignment")?;
        cfg.0.set(assignment).map_err(core)
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn millsurf_config_free(cfg: *mut MillsurfConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the simulation described by `cfg` and return the cut height field.
///
/// # Safety
/// `cfg` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn millsurf_simulate(
    cfg: *const MillsurfConfig,
    out: *mut *mut MillsurfHeightField,
) -> MillsurfStatus {
    guard(|| {
        let cfg = handle(cfg, "config")?;
        let out = out_arg(out, "out")?;
        let run = RunConfig::from_file(&cfg.0).map_err(core)?;
        let (hf, _) = match run.threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| fail(MillsurfStatus::Resource, e.to_string()))?
                .install(|| millsurf::cli::simulate_config(&run)),
            None => millsurf::cli::simulate_config(&run),
        }
        .map_err(core)?;
        *out = Box::into_raw(Box::new(MillsurfHeightField(hf)));
        Ok(())
    })
}
