//! C interface to `hermite-fp`.
//!
//! Objects are opaque handles created by `hfp_*_new` style functions and
//! released with the matching `hfp_*_free`. Every fallible call returns an
//! [`HfpStatus`]; on failure [`hfp_last_error`] gives a message for the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use hermite_fp::bifurcation::{find_fixed_points, SelfConsistencyMap, SpectralSetup, XWeight};
use hermite_fp::mc::{simulate, McConfig};
use hermite_fp::operators::{colored_operator, white_operator, ColoredModel, ProblemSpec};
use hermite_fp::solver::steady_state_linear;
use hermite_fp::{Error, HermiteBasis, IndexShape, Poly1, SpectralField};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HfpStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    Singular = 3,
    NonConvergence = 4,
    NonFinite = 5,
    Unsupported = 6,
    Io = 7,
    NullPointer = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

pub const HFP_MODEL_OU: u32 = 0;
pub const HFP_MODEL_H: u32 = 1;
pub const HFP_MODEL_B: u32 = 2;
pub const HFP_MODEL_NS: u32 = 3;

pub const HFP_SHAPE_TRIANGLE: u32 = 0;
pub const HFP_SHAPE_SQUARE: u32 = 1;
pub const HFP_SHAPE_RECTANGLE: u32 = 2;

pub const HFP_WEIGHT_ZERO: u32 = 0;
pub const HFP_WEIGHT_BETA_V: u32 = 1;
pub const HFP_WEIGHT_BOLTZMANN: u32 = 2;

/// Problem definition: potential, coupling, temperature and noise.
pub struct HfpProblem(ProblemSpec);

/// Spectral discretisation settings for a problem.
pub struct HfpBasis {
    setup: SpectralSetup,
    basis: Arc<HermiteBasis>,
}

/// Density in a Hermite basis.
pub struct HfpField(SpectralField);

/// Self-consistency map `m -> R(m, beta)`.
pub struct HfpMap(SelfConsistencyMap);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> HfpStatus {
    match err {
        Error::InvalidArgument(_) | Error::Config(_) | Error::QuadratureNonConvergence { .. } => {
            HfpStatus::InvalidArgument
        }
        Error::DimensionMismatch(_) => HfpStatus::DimensionMismatch,
        Error::Singular { .. } | Error::DegenerateMass { .. } => HfpStatus::Singular,
        Error::NonConvergence(_) | Error::Oscillation(_) | Error::StepUnderflow { .. } => {
            HfpStatus::NonConvergence
        }
        Error::NonFinite { .. } => HfpStatus::NonFinite,
        Error::Unsupported(_) => HfpStatus::Unsupported,
        Error::Io(_) => HfpStatus::Io,
    }
}

/// Run `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HfpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HfpStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HfpStatus::Panic
        }
    }
}

struct Failure(HfpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(HfpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(HfpStatus::InvalidArgument, msg.into())
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

fn model_of(code: u32) -> Result<ColoredModel, Failure> {
    match code {
        HFP_MODEL_OU => Ok(ColoredModel::OU),
        HFP_MODEL_H => Ok(ColoredModel::H),
        HFP_MODEL_B => Ok(ColoredModel::B),
        HFP_MODEL_NS => Ok(ColoredModel::NS),
        _ => Err(invalid(format!("unknown noise model {code}"))),
    }
}

/// Message describing the last failure on this thread; empty after success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hfp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hfp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// White-noise problem with potential `sum coeffs[k] x^k`.
///
/// # Safety
/// `coeffs` must point to `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_problem_white(
    coeffs: *const f64,
    n: usize,
    theta: f64,
    beta: f64,
    out: *mut *mut HfpProblem,
) -> HfpStatus {
    guard(|| {
        let c = slice_arg(coeffs, n, "coeffs")?;
        let spec = ProblemSpec::white(Poly1::new(c.to_vec()), theta, beta)?;
        write_out(out, Box::into_raw(Box::new(HfpProblem(spec))), "out")
    })
}

/// Colored-noise problem; `model` is one of the `HFP_MODEL_*` constants.
///
/// # Safety
/// As [`hfp_problem_white`].
#[no_mangle]
pub unsafe extern "C" fn hfp_problem_colored(
    model: u32,
    coeffs: *const f64,
    n: usize,
    theta: f64,
    beta: f64,
    epsilon: f64,
    out: *mut *mut HfpProblem,
) -> HfpStatus {
    guard(|| {
        let c = slice_arg(coeffs, n, "coeffs")?;
        let spec = ProblemSpec::colored(
            model_of(model)?,
            Poly1::new(c.to_vec()),
            theta,
            beta,
            epsilon,
        )?;
        write_out(out, Box::into_raw(Box::new(HfpProblem(spec))), "out")
    })
}

/// Number of coordinates (1 for white noise, 2 or 3 otherwise).
///
/// # Safety
/// `problem` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hfp_problem_dims(problem: *const HfpProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.dims())
}

/// # Safety
/// `problem` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hfp_problem_free(problem: *mut HfpProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Basis for `problem`: one degree and one `sigma` per dimension.
/// `shape` is an `HFP_SHAPE_*` constant and `x_weight` an `HFP_WEIGHT_*` one.
///
/// # Safety
/// `degrees` and `sigma` must point to `dims` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_basis_new(
    problem: *const HfpProblem,
    shape: u32,
    degrees: *const usize,
    sigma: *const f64,
    dims: usize,
    x_weight: u32,
    out: *mut *mut HfpBasis,
) -> HfpStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        let shape = match shape {
            HFP_SHAPE_TRIANGLE => IndexShape::Triangle,
            HFP_SHAPE_SQUARE => IndexShape::Square,
            HFP_SHAPE_RECTANGLE => IndexShape::Rectangle,
            _ => return Err(invalid(format!("unknown index set shape {shape}"))),
        };
        let x_weight = match x_weight {
            HFP_WEIGHT_ZERO => XWeight::Zero,
            HFP_WEIGHT_BETA_V => XWeight::BetaV,
            HFP_WEIGHT_BOLTZMANN => XWeight::Boltzmann,
            _ => return Err(invalid(format!("unknown weight {x_weight}"))),
        };
        let setup = SpectralSetup {
            shape,
            degrees: slice_arg(degrees, dims, "degrees")?.to_vec(),
            sigma: slice_arg(sigma, dims, "sigma")?.to_vec(),
            x_weight,
            quad_degree: None,
        };
        let basis = Arc::new(setup.basis(&p.0)?);
        write_out(
            out,
            Box::into_raw(Box::new(HfpBasis { setup, basis })),
            "out",
        )
    })
}

/// Number of basis functions.
///
/// # Safety
/// `basis` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn hfp_basis_len(basis: *const HfpBasis) -> usize {
    basis.as_ref().map_or(0, |b| b.basis.len())
}

/// # Safety
/// `basis` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hfp_basis_free(basis: *mut HfpBasis) {
    if !basis.is_null() {
        drop(Box::from_raw(basis));
    }
}

/// Steady state of the linear operator with the mean frozen at `m`,
/// normalised to unit mass.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_steady_state(
    problem: *const HfpProblem,
    basis: *const HfpBasis,
    m: f64,
    out: *mut *mut HfpField,
) -> HfpStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        let b = ref_arg(basis, "basis")?;
        let op = if p.0.noise.is_white() {
            white_operator(&p.0, m, &b.basis)?
        } else {
            colored_operator(&p.0, m, &b.basis)?
        };
        let ss = steady_state_linear(&op, &b.basis, None)?;
        write_out(out, Box::into_raw(Box::new(HfpField(ss.field))), "out")
    })
}

/// `E[x]` under the field.
///
/// # Safety
/// `field` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_field_first_moment(
    field: *const HfpField,
    out: *mut f64,
) -> HfpStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        write_out(out, f.0.first_moment()?, "out")
    })
}

/// Density at the point `x` of `dims` coordinates.
///
/// # Safety
/// `x` must point to `dims` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_field_evaluate(
    field: *const HfpField,
    x: *const f64,
    dims: usize,
    out: *mut f64,
) -> HfpStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        let x = slice_arg(x, dims, "x")?;
        if dims != f.0.basis.dims() {
            return Err(Failure(
                HfpStatus::DimensionMismatch,
                format!(
                    "field has {} dimensions, point has {dims}",
                    f.0.basis.dims()
                ),
            ));
        }
        write_out(out, f.0.evaluate(x), "out")
    })
}

/// Copy the coefficients into `buf`. `needed` receives the count; when
/// `capacity` is too small nothing is copied and `BufferTooSmall` returned.
///
/// # Safety
/// `buf` must have room for `capacity` doubles; `needed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_field_coeffs(
    field: *const HfpField,
    buf: *mut f64,
    capacity: usize,
    needed: *mut usize,
) -> HfpStatus {
    guard(|| {
        let f = ref_arg(field, "field")?;
        let n = f.0.coeffs.len();
        write_out(needed, n, "needed")?;
        if capacity < n {
            return Err(Failure(
                HfpStatus::BufferTooSmall,
                format!("need {n} entries, have {capacity}"),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        ptr::copy_nonoverlapping(f.0.coeffs.as_ptr(), buf, n);
        Ok(())
    })
}

/// # Safety
/// `field` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hfp_field_free(field: *mut HfpField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Exact white-noise map by quadrature.
///
/// # Safety
/// `coeffs` must point to `n` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_map_white(
    coeffs: *const f64,
    n: usize,
    theta: f64,
    out: *mut *mut HfpMap,
) -> HfpStatus {
    guard(|| {
        let c = slice_arg(coeffs, n, "coeffs")?;
        let map = SelfConsistencyMap::white_exact(Poly1::new(c.to_vec()), theta)?;
        write_out(out, Box::into_raw(Box::new(HfpMap(map))), "out")
    })
}

/// Small-correlation-time expansion for OU noise.
///
/// # Safety
/// As [`hfp_map_white`].
#[no_mangle]
pub unsafe extern "C" fn hfp_map_asymptotic_ou(
    coeffs: *const f64,
    n: usize,
    theta: f64,
    epsilon: f64,
    out: *mut *mut HfpMap,
) -> HfpStatus {
    guard(|| {
        let c = slice_arg(coeffs, n, "coeffs")?;
        let map = SelfConsistencyMap::asymptotic_ou(Poly1::new(c.to_vec()), theta, epsilon)?;
        write_out(out, Box::into_raw(Box::new(HfpMap(map))), "out")
    })
}

/// Spectral map for `problem` discretised as `basis`. The problem's `beta`
/// is replaced at each evaluation.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_map_spectral(
    problem: *const HfpProblem,
    basis: *const HfpBasis,
    out: *mut *mut HfpMap,
) -> HfpStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        let b = ref_arg(basis, "basis")?;
        let model = ColoredModel::ALL
            .into_iter()
            .find(|m| m.noise().ok().as_ref() == Some(&p.0.noise));
        let map = SelfConsistencyMap::spectral(p.0.clone(), model, b.setup.clone())?;
        write_out(out, Box::into_raw(Box::new(HfpMap(map))), "out")
    })
}

/// `R(m, beta)`.
///
/// # Safety
/// `map` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_map_evaluate(
    map: *const HfpMap,
    m: f64,
    beta: f64,
    out: *mut f64,
) -> HfpStatus {
    guard(|| {
        let map = ref_arg(map, "map")?;
        write_out(out, map.0.evaluate(m, beta)?, "out")
    })
}

/// Fixed points of the map at `beta` in `[lo, hi]`, scanned on `n_grid`
/// points. `count` receives the number found; at most `capacity` are copied
/// and `BufferTooSmall` is returned if some did not fit.
///
/// # Safety
/// `buf` must have room for `capacity` doubles; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_map_fixed_points(
    map: *const HfpMap,
    beta: f64,
    lo: f64,
    hi: f64,
    n_grid: usize,
    buf: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> HfpStatus {
    guard(|| {
        let map = ref_arg(map, "map")?;
        let roots = find_fixed_points(&map.0, beta, lo, hi, n_grid)?;
        write_out(count, roots.len(), "count")?;
        let k = roots.len().min(capacity);
        if k > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            ptr::copy_nonoverlapping(roots.as_ptr(), buf, k);
        }
        if k < roots.len() {
            return Err(Failure(
                HfpStatus::BufferTooSmall,
                format!("{} roots, room for {capacity}", roots.len()),
            ));
        }
        Ok(())
    })
}

/// # Safety
/// `map` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hfp_map_free(map: *mut HfpMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Noise scaling constant for `model`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_zeta(model: u32, out: *mut f64) -> HfpStatus {
    guard(|| {
        write_out(
            out,
            hermite_fp::asymptotics::zeta_for(model_of(model)?)?,
            "out",
        )
    })
}

/// Time-averaged particle mean with its batch-means standard error.
/// `dt <= 0` selects the default step.
///
/// # Safety
/// `problem` must be live; `m_hat` and `std_error` writable.
#[no_mangle]
pub unsafe extern "C" fn hfp_mc_simulate(
    problem: *const HfpProblem,
    n_particles: usize,
    dt: f64,
    burn_in: f64,
    window: f64,
    seed: u64,
    m_hat: *mut f64,
    std_error: *mut f64,
) -> HfpStatus {
    guard(|| {
        let p = ref_arg(problem, "problem")?;
        let cfg = McConfig {
            n_particles,
            dt: (dt > 0.0).then_some(dt),
            burn_in,
            window,
            seed,
            ..McConfig::default()
        };
        let e = simulate(&p.0, &cfg)?;
        write_out(m_hat, e.m_hat, "m_hat")?;
        write_out(std_error, e.std_error, "std_error")
    })
}
