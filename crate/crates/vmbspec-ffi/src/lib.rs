//! C ABI for `vmbspec`.
//!
//! Objects are opaque handles created by `vmb_*_new` and released by the
//! matching `vmb_*_free`. Every fallible call returns a `VmbStatus`; on a
//! nonzero status, `vmb_last_error` copies a message for the calling thread.
//! Complex vectors cross the boundary as separate real and imaginary arrays.

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use vmbspec::collision::{self, CollisionMatrices, Species};
use vmbspec::dispersion::asymptotic_coefficients;
use vmbspec::modes::{assemble_mode, Frame, ModeKind, ModeOperator};
use vmbspec::semigroup::propagate_sym;
use vmbspec::spectra::eig_all;
use vmbspec::velocity::{build_grid, VelocityGrid};
use vmbspec::{c64, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    /// Grid too coarse or a discretization check failed.
    Discretization = 4,
    /// Solver failure, ill-conditioning or nonconvergence.
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmbSpecies {
    /// operator `L` (five-dimensional null space)
    One = 0,
    /// operator `L1` (one-dimensional null space)
    Two = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VmbModeKind {
    Boltzmann = 0,
    TwoSpecies = 1,
    OneSpecies = 2,
}

/// Expansion and transport coefficients.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VmbCoefficients {
    pub a1_two: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
}

pub struct VmbGrid(VelocityGrid);
pub struct VmbCollision(CollisionMatrices);
pub struct VmbMode(ModeOperator);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> VmbStatus {
    match e {
        Error::InvalidResolution(_)
        | Error::Dimension { .. }
        | Error::Index(_)
        | Error::Domain(_)
        | Error::PoleExclusion => VmbStatus::InvalidArgument,
        Error::DiagonalSingularity | Error::Assembly(_) | Error::Discretization(_) => VmbStatus::Discretization,
        _ => VmbStatus::Numerical,
    }
}

/// Runs `f`, recording errors and converting panics.
fn guard(f: impl FnOnce() -> Result<(), (VmbStatus, String)>) -> VmbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            VmbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            VmbStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (VmbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (VmbStatus, String) {
    (VmbStatus::NullPointer, format!("{what} is null"))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn vmb_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Builds a tensor Gauss-Hermite velocity grid with `n_per_axis` points per axis.
///
/// # Safety
/// `out` must be valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn vmb_grid_new(n_per_axis: usize, scale: f64, out: *mut *mut VmbGrid) -> VmbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = build_grid(n_per_axis, scale).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(VmbGrid(g)));
        Ok(())
    })
}

/// # Safety
/// `grid` must be null or a handle from `vmb_grid_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vmb_grid_free(grid: *mut VmbGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of velocity nodes, or 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vmb_grid_len(grid: *const VmbGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.len())
}

/// Assembles the collision operators on `grid`.
///
/// # Safety
/// `grid` must be a live handle and `out` valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn vmb_collision_new(grid: *const VmbGrid, out: *mut *mut VmbCollision) -> VmbStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cm = collision::assemble(&g.0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(VmbCollision(cm)));
        Ok(())
    })
}

/// # Safety
/// `c` must be null or a handle from `vmb_collision_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vmb_collision_free(c: *mut VmbCollision) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Spectral gap `mu_h` of `L` or `L1` on the complement of its null space.
///
/// # Safety
/// `c` must be a live handle and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn vmb_collision_gap(c: *const VmbCollision, species: VmbSpecies, out: *mut f64) -> VmbStatus {
    guard(|| {
        let c = c.as_ref().ok_or_else(|| null("collision"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = c.0.gap(match species {
            VmbSpecies::One => Species::One,
            VmbSpecies::Two => Species::Two,
        });
        Ok(())
    })
}

/// Low-frequency expansion and transport coefficients.
///
/// # Safety
/// Handles must be live, `c` assembled on `grid`, and `out` valid for writing.
#[no_mangle]
pub unsafe extern "C" fn vmb_coefficients(
    grid: *const VmbGrid,
    c: *const VmbCollision,
    out: *mut VmbCoefficients,
) -> VmbStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        let c = c.as_ref().ok_or_else(|| null("collision"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if c.0.dim() != g.0.len() {
            return Err((VmbStatus::InvalidArgument, "collision operator was assembled on another grid".into()));
        }
        let k = asymptotic_coefficients(&c.0, &g.0).map_err(lib_err)?;
        *out = VmbCoefficients {
            a1_two: k.a1_two,
            a0: k.a0,
            a1: k.a1,
            a2: k.a2,
            a3: k.a3,
            b1: k.b1,
            b2: k.b2,
            kappa1: k.kappa1,
            kappa2: k.kappa2,
            kappa3: k.kappa3,
        };
        Ok(())
    })
}

/// Generator of the Fourier mode with `|xi| = s` along the first axis.
///
/// # Safety
/// Handles must be live, `c` assembled on `grid`, and `out` valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn vmb_mode_new(
    grid: *const VmbGrid,
    c: *const VmbCollision,
    kind: VmbModeKind,
    s: f64,
    out: *mut *mut VmbMode,
) -> VmbStatus {
    guard(|| {
        let g = grid.as_ref().ok_or_else(|| null("grid"))?;
        let c = c.as_ref().ok_or_else(|| null("collision"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if c.0.dim() != g.0.len() {
            return Err((VmbStatus::InvalidArgument, "collision operator was assembled on another grid".into()));
        }
        let kind = match kind {
            VmbModeKind::Boltzmann => ModeKind::Boltzmann,
            VmbModeKind::TwoSpecies => ModeKind::TwoSpecies,
            VmbModeKind::OneSpecies => ModeKind::OneSpecies,
        };
        let op = assemble_mode(kind, s, Frame::canonical(), &c.0, &g.0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(VmbMode(op)));
        Ok(())
    })
}

/// # Safety
/// `m` must be null or a handle from `vmb_mode_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vmb_mode_free(m: *mut VmbMode) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// State dimension: velocity nodes plus four field components when coupled.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn vmb_mode_dim(m: *const VmbMode) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// All eigenvalues. `re` and `im` must hold `vmb_mode_dim` entries; `len`
/// is their capacity.
///
/// # Safety
/// `m` must be live; `re` and `im` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vmb_mode_eigenvalues(m: *const VmbMode, re: *mut f64, im: *mut f64, len: usize) -> VmbStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("mode"))?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        if len < m.0.dim() {
            return Err((VmbStatus::BufferTooSmall, format!("need {} entries, got {len}", m.0.dim())));
        }
        let rep = eig_all(&m.0).map_err(lib_err)?;
        let (re, im) = (std::slice::from_raw_parts_mut(re, len), std::slice::from_raw_parts_mut(im, len));
        for (k, z) in rep.eigenvalues.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// `e^{tA} y0` in symmetric coordinates (`sqrt(w_a) f(v_a)` followed by the
/// tangent field components). All four arrays have length `len = vmb_mode_dim`.
///
/// # Safety
/// `m` must be live; the input arrays valid for `len` reads and the output
/// arrays for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn vmb_mode_propagate(
    m: *const VmbMode,
    t: f64,
    re_in: *const f64,
    im_in: *const f64,
    re_out: *mut f64,
    im_out: *mut f64,
    len: usize,
) -> VmbStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("mode"))?;
        if re_in.is_null() || im_in.is_null() || re_out.is_null() || im_out.is_null() {
            return Err(null("vector"));
        }
        if len != m.0.dim() {
            return Err((VmbStatus::InvalidArgument, format!("expected length {}, got {len}", m.0.dim())));
        }
        let (ri, ii) = (std::slice::from_raw_parts(re_in, len), std::slice::from_raw_parts(im_in, len));
        let y0: Vec<c64> = ri.iter().zip(ii).map(|(&a, &b)| c64::new(a, b)).collect();
        let p = propagate_sym(&m.0, &y0, &[t], None).map_err(lib_err)?;
        let (ro, io) = (std::slice::from_raw_parts_mut(re_out, len), std::slice::from_raw_parts_mut(im_out, len));
        for (k, z) in p.states[0].iter().enumerate() {
            ro[k] = z.re;
            io[k] = z.im;
        }
        Ok(())
    })
}
