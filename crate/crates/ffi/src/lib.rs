//! C ABI for `ck_lab`.
//!
//! Every call returns a [`CkStatus`]; results go through out-pointers.
//! Handles are opaque and must be released with their `_free` function.
//! After a failure, [`ck_last_error`] copies the message of the most recent
//! error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use ck_lab::curve_tracer::{trace_curve, CurveParam};
use ck_lab::phase_core::{by_name, check_abc, check_bourgain, ABCData, PhaseSpec};
use ck_lab::straightener::fit_error_order;
use ck_lab::tan_example::{coniness_det, TanConfig};
use ck_lab::tube_lab::{make_sticky_family, union_volume, FamilyMode, Shading, Tube, TubeFamily};
use ck_lab::LabError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Degenerate = 4,
    Numerical = 5,
    NotStraightenable = 6,
    Geometry = 7,
    Panic = 99,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &LabError) -> CkStatus {
    match e {
        LabError::Domain(_) => CkStatus::Domain,
        LabError::Degenerate(_) | LabError::SingularH2(_) => CkStatus::Degenerate,
        LabError::Trace { .. }
        | LabError::IllConditioned(_)
        | LabError::UnsupportedOrder(_)
        | LabError::AmbiguousRoot(_)
        | LabError::Pole(_) => CkStatus::Numerical,
        LabError::NotDiffeomorphism(_)
        | LabError::InvalidAnchor(_)
        | LabError::InconsistentData(_)
        | LabError::Extraction(_) => CkStatus::NotStraightenable,
        LabError::Containment { .. } | LabError::Resolution { .. } | LabError::MismatchedDelta(..) => {
            CkStatus::Geometry
        }
        LabError::Config(_) => CkStatus::InvalidArgument,
    }
}

enum Fail {
    Null,
    Arg(String),
    Lab(LabError),
}

impl From<LabError> for Fail {
    fn from(e: LabError) -> Self {
        Fail::Lab(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CkStatus::Ok,
        Ok(Err(Fail::Null)) => {
            set_error("null pointer argument".into());
            CkStatus::NullPointer
        }
        Ok(Err(Fail::Arg(m))) => {
            set_error(m);
            CkStatus::InvalidArgument
        }
        Ok(Err(Fail::Lab(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CkStatus::Panic
        }
    }
}

unsafe fn slice_in<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null);
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null)
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ck_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let k = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, k);
            *buf.add(k) = 0;
        }
        msg.len()
    })
}

/// A phase function.
pub struct CkPhase {
    spec: PhaseSpec,
}

/// Built-in phase `name` (`rest`, `bochner_riesz`, `tan`, `worst`) in
/// dimension `n`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ck_phase_builtin(name: *const c_char, n: usize, out_phase: *mut *mut CkPhase) -> CkStatus {
    guard(|| {
        if name.is_null() {
            return Err(Fail::Null);
        }
        let o = out(out_phase)?;
        let name = CStr::from_ptr(name)
            .to_str()
            .map_err(|_| Fail::Arg("phase name is not UTF-8".into()))?;
        let spec = by_name(name, n)?;
        *o = Box::into_raw(Box::new(CkPhase { spec }));
        Ok(())
    })
}

/// # Safety
/// `phase` must come from [`ck_phase_builtin`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ck_phase_free(phase: *mut CkPhase) {
    if !phase.is_null() {
        drop(Box::from_raw(phase));
    }
}

/// The dimension `n`, or 0 for a null handle.
///
/// # Safety
/// `phase` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ck_phase_dim(phase: *const CkPhase) -> usize {
    phase.as_ref().map_or(0, |p| p.spec.n())
}

unsafe fn phase_ref<'a>(p: *const CkPhase) -> Result<&'a PhaseSpec, Fail> {
    p.as_ref().map(|p| &p.spec).ok_or(Fail::Null)
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CkConditionReport {
    pub h1_sigma_min: f64,
    pub h2_det: f64,
    pub lambda_hat: f64,
    pub residual: f64,
    pub holds: bool,
}

/// Pointwise rank, curvature and proportionality check. `x` and `xi` have
/// `n − 1` entries.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ck_check_bourgain(
    phase: *const CkPhase,
    x: *const f64,
    t: f64,
    xi: *const f64,
    tol: f64,
    report: *mut CkConditionReport,
) -> CkStatus {
    guard(|| {
        let p = phase_ref(phase)?;
        let m = p.n() - 1;
        let (x, xi) = (slice_in(x, m)?, slice_in(xi, m)?);
        let o = out(report)?;
        let r = check_bourgain(p, x, t, xi, tol)?;
        *o = CkConditionReport {
            h1_sigma_min: r.h1_sigma_min,
            h2_det: r.h2_det,
            lambda_hat: r.bourgain_lambda_hat,
            residual: r.bourgain_residual,
            holds: r.holds,
        };
        Ok(())
    })
}

fn known_abc(p: &PhaseSpec) -> Result<ABCData, Fail> {
    ABCData::for_phase(p).ok_or_else(|| Fail::Arg(format!("no (A, B, c) triple for {}", p.label())))
}

/// Residual of the `(A, B, c)` identity of a built-in phase.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ck_check_abc(
    phase: *const CkPhase,
    x: *const f64,
    t: f64,
    xi: *const f64,
    residual: *mut f64,
) -> CkStatus {
    guard(|| {
        let p = phase_ref(phase)?;
        let m = p.n() - 1;
        let (x, xi) = (slice_in(x, m)?, slice_in(xi, m)?);
        let o = out(residual)?;
        *o = check_abc(p, &known_abc(p)?, x, t, xi)?.residual;
        Ok(())
    })
}

/// Traces `∇_ξφ = v` at `count` heights; writes `count × (n − 1)` values
/// row by row into `points`.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ck_trace_curve(
    phase: *const CkPhase,
    xi: *const f64,
    v: *const f64,
    t_grid: *const f64,
    count: usize,
    points: *mut f64,
) -> CkStatus {
    guard(|| {
        let p = phase_ref(phase)?;
        let m = p.n() - 1;
        let param = CurveParam::new(slice_in(xi, m)?.to_vec(), slice_in(v, m)?.to_vec());
        let grid = slice_in(t_grid, count)?;
        if count == 0 {
            return Err(Fail::Arg("empty t grid".into()));
        }
        if points.is_null() {
            return Err(Fail::Null);
        }
        let sample = trace_curve(p, &param, grid)?;
        let dst = slice::from_raw_parts_mut(points, count * m);
        for (row, x) in dst.chunks_mut(m).zip(&sample.points) {
            row.copy_from_slice(x);
        }
        Ok(())
    })
}

/// Fitted error order of the straightening anchored at `(ξ₀, v₀)`.
/// `exact` is set when every error is below the exact threshold, in which
/// case `slope` is NaN.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ck_straightening_order(
    phase: *const CkPhase,
    xi0: *const f64,
    v0: *const f64,
    radii: *const f64,
    radii_count: usize,
    samples: usize,
    seed: u64,
    slope: *mut f64,
    exact: *mut bool,
) -> CkStatus {
    guard(|| {
        let p = phase_ref(phase)?;
        let m = p.n() - 1;
        let (xi0, v0) = (slice_in(xi0, m)?, slice_in(v0, m)?);
        let radii = slice_in(radii, radii_count)?;
        if radii.len() < 2 || samples == 0 {
            return Err(Fail::Arg("need two radii and one sample".into()));
        }
        let (s, e) = (out(slope)?, out(exact)?);
        let r = fit_error_order(p, &known_abc(p)?, xi0, v0, radii, samples, seed)?;
        *s = r.slope().unwrap_or(f64::NAN);
        *e = r.exact;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CkConiness {
    pub det: f64,
    pub leading: f64,
    pub rel_err: f64,
    pub noise_floor: f64,
}

/// Tangent-frame determinant of the tan pencil through `𝐩 = (p, t₀)`;
/// `p` has `n − 1` entries.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn ck_tan_coniness(n: usize, t0: f64, p: *const f64, report: *mut CkConiness) -> CkStatus {
    guard(|| {
        if n < 3 {
            return Err(Fail::Arg(format!("n = {n} below 3")));
        }
        let p = slice_in(p, n - 1)?.to_vec();
        let o = out(report)?;
        let r = coniness_det(&TanConfig::new(n, t0, p)?)?;
        *o = CkConiness {
            det: r.det,
            leading: r.leading,
            rel_err: r.rel_err,
            noise_floor: r.noise_floor,
        };
        Ok(())
    })
}

/// A family of shaded `δ`-tubes.
pub struct CkFamily {
    family: TubeFamily,
}

/// Empty family over `phase`.
///
/// # Safety
/// `phase` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ck_family_new(phase: *const CkPhase, delta: f64, out_family: *mut *mut CkFamily) -> CkStatus {
    guard(|| {
        let p = phase_ref(phase)?;
        let o = out(out_family)?;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Fail::Arg(format!("delta = {delta} not in (0, 1]")));
        }
        *o = Box::into_raw(Box::new(CkFamily {
            family: TubeFamily::new(p, delta, "ffi"),
        }));
        Ok(())
    })
}

/// Generated test family: `mode` 0 is the grid family, 1 the Cantor family.
///
/// # Safety
/// `phase` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ck_family_sticky(
    phase: *const CkPhase,
    delta: f64,
    mode: u32,
    seed: u64,
    out_family: *mut *mut CkFamily,
) -> CkStatus {
    guard(|| {
        let p = phase_ref(phase)?;
        let o = out(out_family)?;
        let mode = match mode {
            0 => FamilyMode::Grid,
            1 => FamilyMode::Cantor,
            k => return Err(Fail::Arg(format!("unknown family mode {k}"))),
        };
        *o = Box::into_raw(Box::new(CkFamily {
            family: make_sticky_family(p, delta, mode, seed)?,
        }));
        Ok(())
    })
}

/// Appends the tube at `(ξ, v)` shaded on `[t_lo, t_hi]`.
///
/// # Safety
/// `family` must be live; `xi` and `v` have `n − 1` entries.
#[no_mangle]
pub unsafe extern "C" fn ck_family_push(
    family: *mut CkFamily,
    xi: *const f64,
    v: *const f64,
    t_lo: f64,
    t_hi: f64,
) -> CkStatus {
    guard(|| {
        let f = family.as_mut().ok_or(Fail::Null)?;
        let m = f.family.phase.n() - 1;
        let param = CurveParam::new(slice_in(xi, m)?.to_vec(), slice_in(v, m)?.to_vec());
        let tube = Tube::new(param, f.family.delta)?;
        f.family.push(tube, Shading::new(vec![(t_lo, t_hi)])?)?;
        Ok(())
    })
}

/// # Safety
/// `family` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn ck_family_len(family: *const CkFamily) -> usize {
    family.as_ref().map_or(0, |f| f.family.len())
}

/// Voxel volume of the union of the shaded tubes on a `grid_resⁿ` grid.
///
/// # Safety
/// `family` must be live; `volume` writable.
#[no_mangle]
pub unsafe extern "C" fn ck_family_union_volume(family: *const CkFamily, grid_res: usize, volume: *mut f64) -> CkStatus {
    guard(|| {
        let f = family.as_ref().ok_or(Fail::Null)?;
        let o = out(volume)?;
        *o = union_volume(&f.family, grid_res)?;
        Ok(())
    })
}

/// # Safety
/// `family` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ck_family_free(family: *mut CkFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}
