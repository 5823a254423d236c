//! C ABI over `nhl-core`.
//!
//! Every function returns an [`NhlStatus`]; results go through out-pointers.
//! On failure [`nhl_last_error`] gives a message for the calling thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nhl_core::discretize::{assemble_operator, DiscreteOperator, Grid, OperatorMode, ScalarField};
use nhl_core::evolve::stable_dt;
use nhl_core::kernels::RadialKernel;
use nhl_core::modulus::{z_epsilon_max, ModulusProfile, ScanSettings};
use nhl_core::spectral::{self, energy_form, FormSpec};
use nhl_core::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Unsupported = 3,
    Numerical = 4,
    TooLarge = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhlKernelFamily {
    Indicator = 0,
    Gaussian = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NhlOperatorMode {
    FullSpace = 0,
    Regional = 1,
}

/// Opaque kernel handle.
pub struct NhlKernel(RadialKernel);

/// Opaque operator handle.
pub struct NhlOperator(DiscreteOperator);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> NhlStatus {
    match err {
        Error::Unsupported(_) => NhlStatus::Unsupported,
        Error::TooLarge { .. } => NhlStatus::TooLarge,
        Error::Unstable { .. } | Error::NonFinite { .. } | Error::Eigen(_) | Error::ProfileDegenerated { .. } => {
            NhlStatus::Numerical
        }
        _ => NhlStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), (NhlStatus, String)>>(f: F) -> NhlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NhlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            NhlStatus::Panic
        }
    }
}

trait Lift<T> {
    fn lift(self) -> Result<T, (NhlStatus, String)>;
}

impl<T> Lift<T> for nhl_core::Result<T> {
    fn lift(self) -> Result<T, (NhlStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(what: &str) -> (NhlStatus, String) {
    (NhlStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> (NhlStatus, String) {
    (NhlStatus::InvalidArgument, msg.into())
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (NhlStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), (NhlStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nhl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Unit-mass indicator (`width` = radius) or gaussian (`width` = sigma) kernel.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_kernel_new(family: NhlKernelFamily, dim: u32, width: f64, out: *mut *mut NhlKernel) -> NhlStatus {
    guard(|| {
        let k = match family {
            NhlKernelFamily::Indicator => RadialKernel::indicator(dim as usize, width),
            NhlKernelFamily::Gaussian => RadialKernel::gaussian(dim as usize, width),
        }
        .lift()?;
        write_out(out, Box::into_raw(Box::new(NhlKernel(k))), "out")
    })
}

/// Truncated fractional kernel of order `s`; a cutoff `<= 0` is left unset.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_kernel_new_fractional(dim: u32, s: f64, rmin: f64, rmax: f64, out: *mut *mut NhlKernel) -> NhlStatus {
    guard(|| {
        let opt = |v: f64| (v > 0.0).then_some(v);
        let k = RadialKernel::fractional(dim as usize, s, opt(rmin), opt(rmax)).lift()?;
        write_out(out, Box::into_raw(Box::new(NhlKernel(k))), "out")
    })
}

/// `ρ(r)` for a vector `r` of length `len` (the kernel dimension).
///
/// # Safety
/// `r` must point to `len` doubles, `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_kernel_eval(kernel: *const NhlKernel, r: *const f64, len: usize, out: *mut f64) -> NhlStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        if len != k.0.dim() {
            return Err(invalid(format!("vector length {len} does not match kernel dimension {}", k.0.dim())));
        }
        let r = slice(r, len, "r")?;
        write_out(out, k.0.eval(r), "out")
    })
}

/// Total mass `∫ρ`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_kernel_mass(kernel: *const NhlKernel, out: *mut f64) -> NhlStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        write_out(out, k.0.mass().lift()?, "out")
    })
}

/// # Safety
/// `kernel` must come from `nhl_kernel_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nhl_kernel_free(kernel: *mut NhlKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Assembles the operator on the node grid `[lower, upper]` (arrays of length
/// `dim`) with spacing `h`.
///
/// # Safety
/// `lower`/`upper` must point to `dim` doubles, `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_operator_assemble(
    kernel: *const NhlKernel,
    dim: u32,
    lower: *const f64,
    upper: *const f64,
    h: f64,
    mode: NhlOperatorMode,
    out: *mut *mut NhlOperator,
) -> NhlStatus {
    guard(|| {
        let k = kernel.as_ref().ok_or_else(|| null("kernel"))?;
        let (lo, hi) = (slice(lower, dim as usize, "lower")?, slice(upper, dim as usize, "upper")?);
        let grid = match dim {
            1 => Grid::line(lo[0], hi[0], h),
            2 => Grid::rect([lo[0], lo[1]], [hi[0], hi[1]], h),
            d => return Err((NhlStatus::Unsupported, format!("dimension {d} unsupported"))),
        }
        .lift()?;
        let mode = match mode {
            NhlOperatorMode::FullSpace => OperatorMode::FullSpace,
            NhlOperatorMode::Regional => OperatorMode::Regional,
        };
        let op = assemble_operator(&k.0, &grid, mode).lift()?;
        write_out(out, Box::into_raw(Box::new(NhlOperator(op))), "out")
    })
}

/// Number of grid nodes.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_operator_len(op: *const NhlOperator, out: *mut usize) -> NhlStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("operator"))?;
        write_out(out, op.0.grid().len(), "out")
    })
}

/// `out = L values`. Full-space operators use the far field
/// `(far_minus, far_plus)`; regional operators ignore it.
///
/// # Safety
/// `values` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nhl_operator_apply(
    op: *const NhlOperator,
    values: *const f64,
    len: usize,
    far_minus: f64,
    far_plus: f64,
    out: *mut f64,
) -> NhlStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("operator"))?;
        let grid = op.0.grid();
        if len != grid.len() {
            return Err(invalid(format!("expected {} values, got {len}", grid.len())));
        }
        let v = slice(values, len, "values")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let far = (op.0.mode() == OperatorMode::FullSpace).then_some((far_minus, far_plus));
        let u = ScalarField::new(grid.clone(), v.to_vec(), 0.0, far).lift()?;
        let lu = op.0.apply(&u).lift()?;
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&lu.values);
        Ok(())
    })
}

/// `safety / max row mass`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_operator_stable_dt(op: *const NhlOperator, safety: f64, out: *mut f64) -> NhlStatus {
    guard(|| {
        let op = op.as_ref().ok_or_else(|| null("operator"))?;
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(invalid(format!("safety must lie in (0, 1], got {safety}")));
        }
        write_out(out, stable_dt(&op.0, safety), "out")
    })
}

/// # Safety
/// `op` must come from `nhl_operator_assemble` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nhl_operator_free(op: *mut NhlOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Regional form `c_n/2 ∬ (u(x)-u(y))²/|x-y|^{1+2s}` of cell values on `[a, b]`
/// split into `cells` cells.
///
/// # Safety
/// `values` must hold `cells` doubles, `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_energy_form(values: *const f64, cells: usize, a: f64, b: f64, s: f64, cn: f64, out: *mut f64) -> NhlStatus {
    guard(|| {
        let spec = FormSpec::interval(a, b, cells, s, cn).lift()?;
        let v = slice(values, cells, "values")?;
        let u = ScalarField::new(spec.grid().clone(), v.to_vec(), 0.0, None).lift()?;
        write_out(out, energy_form(&u, &spec).lift()?, "out")
    })
}

/// Smallest nonzero eigenvalue of the regional form on `[a, b]`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn nhl_lambda2(a: f64, b: f64, cells: usize, s: f64, cn: f64, out: *mut f64) -> NhlStatus {
    guard(|| {
        let spec = FormSpec::interval(a, b, cells, s, cn).lift()?;
        let rep = spectral::lambda2(&spec, 2).lift()?;
        write_out(out, rep.lambda2(), "out")
    })
}

/// `max_{x,y} u(y) - u(x) - 2φ(|y-x|/2) - ε e^{ct}(1 + x² + y²)` for 1D node
/// values `u` on `lower + k h` and profile values `phi` on `k * phi_spacing`.
/// `pair` receives the maximizing node indices `(x, y)` when non-null.
///
/// # Safety
/// `u` must hold `len` doubles, `phi` `phi_len` doubles; `out` must be valid
/// for writes and `pair`, if non-null, for two `usize`.
#[no_mangle]
pub unsafe extern "C" fn nhl_z_epsilon_max(
    u: *const f64,
    len: usize,
    lower: f64,
    h: f64,
    time: f64,
    phi: *const f64,
    phi_len: usize,
    phi_spacing: f64,
    eps: f64,
    c: f64,
    out: *mut f64,
    pair: *mut usize,
) -> NhlStatus {
    guard(|| {
        if len < 3 {
            return Err(invalid("need at least 3 nodes"));
        }
        let v = slice(u, len, "u")?;
        let p = slice(phi, phi_len, "phi")?;
        let grid = Grid::line(lower, lower + (len - 1) as f64 * h, h).lift()?;
        let field = ScalarField::new(grid, v.to_vec(), time, None).lift()?;
        let profile = ModulusProfile::from_values(phi_spacing, p.to_vec(), time).lift()?;
        let res = z_epsilon_max(&field, &profile, eps, c, &ScanSettings::default()).lift()?;
        write_out(out, res.value, "out")?;
        if !pair.is_null() {
            pair.write(res.pair.0);
            pair.add(1).write(res.pair.1);
        }
        Ok(())
    })
}
