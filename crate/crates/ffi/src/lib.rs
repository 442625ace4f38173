//! C ABI over `pacbayes_markov`.
//!
//! Kernels and trajectories are opaque handles owned by the caller and
//! released with the matching `*_free`. Every fallible call returns a
//! [`PbmStatus`]; on failure a message is available from
//! [`pbm_last_error_message`] on the same thread. No call unwinds across
//! the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pacbayes_markov::error::Error;
use pacbayes_markov::estimation::{estimate_pseudo_spectral_gap, EstimatorConfig};
use pacbayes_markov::markov::{
    build_benchmark_kernel, interpolate_kernels, mixing_time, sample_trajectory, stationary_distribution, MixingTime,
    Trajectory, TransitionMatrix,
};
use pacbayes_markov::pacbayes::{
    bound_finite_erm, bound_finite_erm_empirical, bound_markov, bound_markov_empirical, bound_rio_general,
    phi_mixing_bound, BoundParams, BoundReport, MixingInputs,
};
use pacbayes_markov::spectral::pseudo_spectral_gap;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidKernel = 2,
    NotErgodic = 3,
    InvalidArgument = 4,
    LambdaTooLarge = 5,
    BufferTooSmall = 6,
    Numerical = 7,
    Panic = 8,
}

/// Opaque transition matrix.
pub struct PbmKernel {
    inner: TransitionMatrix,
}

/// Opaque state sequence, 0-based.
pub struct PbmTrajectory {
    inner: Trajectory,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PbmGapResult {
    pub gamma: f64,
    pub argmax_k: usize,
    /// Non-zero when the maximum sits at `k = k_max`.
    pub boundary_hit: i32,
}

/// Shared bound inputs. `lambda <= 0` or NaN means "not supplied".
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbmBoundParams {
    pub n: usize,
    pub c: f64,
    pub delta: f64,
    pub lambda: f64,
    pub epsilon: f64,
    pub a: f64,
}

/// `rhs = term_emp + term_var + term_kl`. `lambda` is NaN when the
/// formula does not use one. When `valid` is 0 the reason is available
/// from `pbm_last_error_message`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PbmBoundResult {
    pub rhs: f64,
    pub term_emp: f64,
    pub term_var: f64,
    pub term_kl: f64,
    pub lambda: f64,
    pub valid: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> PbmStatus {
    match e {
        Error::EmptyMatrix | Error::NotSquare { .. } | Error::NegativeEntry { .. } | Error::RowSumViolation { .. } => {
            PbmStatus::InvalidKernel
        }
        Error::NonUniqueStationary { .. } | Error::ZeroStationaryMass(_) => PbmStatus::NotErgodic,
        Error::LambdaTooLarge { .. } => PbmStatus::LambdaTooLarge,
        Error::Numerical(_) => PbmStatus::Numerical,
        _ => PbmStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), (PbmStatus, String)>) -> PbmStatus {
    set_last_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PbmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            PbmStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn st(self) -> Result<T, (PbmStatus, String)>;
}

impl<T> OrStatus<T> for Result<T, Error> {
    fn st(self) -> Result<T, (PbmStatus, String)> {
        self.map_err(|e| (status_of(&e), e.to_string()))
    }
}

fn null(name: &str) -> (PbmStatus, String) {
    (PbmStatus::NullPointer, format!("{name} is null"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (PbmStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (PbmStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), (PbmStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pbm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or an empty string.
/// Valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn pbm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a kernel from `d * d` row-major entries.
///
/// # Safety
/// `entries` must point to `d * d` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pbm_kernel_new(entries: *const f64, d: usize, out: *mut *mut PbmKernel) -> PbmStatus {
    guard(|| {
        let len = d.checked_mul(d).ok_or((PbmStatus::InvalidArgument, "d overflows".to_string()))?;
        let flat = slice(entries, len, "entries")?;
        let rows: Vec<Vec<f64>> = flat.chunks(d.max(1)).map(<[f64]>::to_vec).collect();
        let k = TransitionMatrix::from_rows(&rows).st()?;
        write(out, Box::into_raw(Box::new(PbmKernel { inner: k })), "out")
    })
}

/// Benchmark family member `t P + (1 - t) Q` on `d >= 4` states.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn pbm_kernel_benchmark(d: usize, p: f64, q: f64, t: f64, out: *mut *mut PbmKernel) -> PbmStatus {
    guard(|| {
        let (pk, qk) = build_benchmark_kernel(d, p, q).st()?;
        let k = interpolate_kernels(&pk, &qk, t).st()?;
        write(out, Box::into_raw(Box::new(PbmKernel { inner: k })), "out")
    })
}

/// # Safety
/// `kernel` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pbm_kernel_free(kernel: *mut PbmKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `kernel` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbm_kernel_dim(kernel: *const PbmKernel) -> usize {
    kernel.as_ref().map_or(0, |k| k.inner.d())
}

/// Writes the stationary distribution into `out[0..len]`; `len` must be at
/// least the dimension.
///
/// # Safety
/// `kernel` must be live and `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn pbm_kernel_stationary(kernel: *const PbmKernel, out: *mut f64, len: usize) -> PbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        if len < k.inner.d() {
            return Err((PbmStatus::BufferTooSmall, format!("need {} entries, got {len}", k.inner.d())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let pi = stationary_distribution(&k.inner).st()?;
        ptr::copy_nonoverlapping(pi.as_slice().as_ptr(), out, pi.len());
        Ok(())
    })
}

/// Exact pseudo-spectral gap with truncation `k_max`.
///
/// # Safety
/// `kernel` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_pseudo_spectral_gap(
    kernel: *const PbmKernel,
    k_max: usize,
    out: *mut PbmGapResult,
) -> PbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let r = pseudo_spectral_gap(&k.inner, k_max).st()?;
        let res = PbmGapResult { gamma: r.value, argmax_k: r.argmax_k, boundary_hit: r.boundary_hit as i32 };
        write(out, res, "out")
    })
}

/// Smallest `t <= k_max` with worst-case TV distance to stationarity at
/// most `eps`. `*reached` is 0 when the horizon ran out; `*steps` then
/// holds `k_max`.
///
/// # Safety
/// `kernel` must be live; `steps` and `reached` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_mixing_time(
    kernel: *const PbmKernel,
    eps: f64,
    k_max: usize,
    steps: *mut usize,
    reached: *mut i32,
) -> PbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let (s, r) = match mixing_time(&k.inner, eps, k_max).st()? {
            MixingTime::Reached(s) => (s, 1),
            MixingTime::NotReached(s) => (s, 0),
        };
        write(steps, s, "steps")?;
        write(reached, r, "reached")
    })
}

/// Samples `n` states started from the stationary distribution.
///
/// # Safety
/// `kernel` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_trajectory_sample(
    kernel: *const PbmKernel,
    n: usize,
    seed: u64,
    out: *mut *mut PbmTrajectory,
) -> PbmStatus {
    guard(|| {
        let k = deref(kernel, "kernel")?;
        let pi = stationary_distribution(&k.inner).st()?;
        let t = sample_trajectory(&k.inner, n, &pi, seed).st()?;
        write(out, Box::into_raw(Box::new(PbmTrajectory { inner: t })), "out")
    })
}

/// Wraps `n` 0-based states, each below `d`.
///
/// # Safety
/// `states` must hold `n` readable values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_trajectory_new(
    states: *const usize,
    n: usize,
    d: usize,
    out: *mut *mut PbmTrajectory,
) -> PbmStatus {
    guard(|| {
        let s = slice(states, n, "states")?;
        if let Some((position, &state)) = s.iter().enumerate().find(|(_, &x)| x >= d) {
            return Err((PbmStatus::InvalidArgument, Error::StateOutOfRange { position, state, d }.to_string()));
        }
        let t = Trajectory::new(s.to_vec(), None).st()?;
        write(out, Box::into_raw(Box::new(PbmTrajectory { inner: t })), "out")
    })
}

/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pbm_trajectory_len(traj: *const PbmTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.inner.len())
}

/// Copies the states into `out[0..len]`.
///
/// # Safety
/// `traj` must be live and `out` must have room for `len` values.
#[no_mangle]
pub unsafe extern "C" fn pbm_trajectory_states(traj: *const PbmTrajectory, out: *mut usize, len: usize) -> PbmStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        if len < t.inner.len() {
            return Err((PbmStatus::BufferTooSmall, format!("need {} entries, got {len}", t.inner.len())));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        ptr::copy_nonoverlapping(t.inner.states.as_ptr(), out, t.inner.len());
        Ok(())
    })
}

/// # Safety
/// `traj` must come from this library and not be freed twice. Null is a no-op.
#[no_mangle]
pub unsafe extern "C" fn pbm_trajectory_free(traj: *mut PbmTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Plug-in pseudo-spectral gap from a trajectory on `d` states with
/// additive smoothing `alpha`.
///
/// # Safety
/// `traj` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_estimate_gap(
    traj: *const PbmTrajectory,
    d: usize,
    k_max: usize,
    alpha: f64,
    out: *mut PbmGapResult,
) -> PbmStatus {
    guard(|| {
        let t = deref(traj, "traj")?;
        let cfg = EstimatorConfig { k_max, smoothing: alpha };
        let r = estimate_pseudo_spectral_gap(&t.inner, d, &cfg).st()?;
        let res = PbmGapResult { gamma: r.value, argmax_k: r.argmax_k, boundary_hit: r.boundary_hit as i32 };
        write(out, res, "out")
    })
}

fn params_of(p: &PbmBoundParams) -> BoundParams {
    let mut b = BoundParams::new(p.n, p.delta).with_c(p.c).with_epsilon(p.epsilon).with_a(p.a);
    if p.lambda > 0.0 {
        b.lambda = Some(p.lambda);
    }
    b
}

fn result_of(r: &BoundReport) -> PbmBoundResult {
    if let Some(reason) = &r.reason {
        set_last_error(reason);
    }
    PbmBoundResult {
        rhs: r.rhs,
        term_emp: r.terms.empirical_risk,
        term_var: r.terms.variance,
        term_kl: r.terms.kl,
        lambda: r.lambda.unwrap_or(f64::NAN),
        valid: r.valid as i32,
    }
}

unsafe fn bound_call(
    params: *const PbmBoundParams,
    out: *mut PbmBoundResult,
    f: impl FnOnce(&BoundParams) -> Result<BoundReport, Error>,
) -> PbmStatus {
    guard(|| {
        let p = params_of(deref(params, "params")?);
        let r = f(&p).st()?;
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(result_of(&r));
        Ok(())
    })
}

/// Bound with known gap; requires `lambda`.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_bound_markov(
    params: *const PbmBoundParams,
    gamma: f64,
    kl: f64,
    out: *mut PbmBoundResult,
) -> PbmStatus {
    bound_call(params, out, |p| bound_markov(p, gamma, kl))
}

/// Bound with an estimated gap; requires `lambda`.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_bound_markov_empirical(
    params: *const PbmBoundParams,
    gamma_hat: f64,
    kl: f64,
    out: *mut PbmBoundResult,
) -> PbmStatus {
    bound_call(params, out, |p| bound_markov_empirical(p, gamma_hat, kl))
}

/// ERM over `m` parameters with a uniform prior and optimized `lambda`.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_bound_finite_erm(
    params: *const PbmBoundParams,
    gamma: f64,
    m: usize,
    out: *mut PbmBoundResult,
) -> PbmStatus {
    bound_call(params, out, |p| bound_finite_erm(p, gamma, m, None))
}

/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_bound_finite_erm_empirical(
    params: *const PbmBoundParams,
    gamma_hat: f64,
    m: usize,
    out: *mut PbmBoundResult,
) -> PbmStatus {
    bound_call(params, out, |p| bound_finite_erm_empirical(p, gamma_hat, m))
}

/// phi-mixing bound from the gap and the smallest stationary mass;
/// requires `lambda`.
///
/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_bound_phi_mixing(
    params: *const PbmBoundParams,
    gamma: f64,
    pi_star: f64,
    kl: f64,
    out: *mut PbmBoundResult,
) -> PbmStatus {
    bound_call(params, out, |p| phi_mixing_bound(p, gamma, pi_star, kl))
}

/// Rio-type bound from per-step diameters (`n_deltas` must equal
/// `params->n`) and `phi(1..=n_phi)`; requires `lambda`.
///
/// # Safety
/// Arrays must hold the stated number of doubles; `params` readable and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pbm_bound_rio(
    params: *const PbmBoundParams,
    deltas: *const f64,
    n_deltas: usize,
    phi: *const f64,
    n_phi: usize,
    kl: f64,
    out: *mut PbmBoundResult,
) -> PbmStatus {
    let inputs = match (slice(deltas, n_deltas, "deltas"), slice(phi, n_phi, "phi")) {
        (Ok(d), Ok(f)) => MixingInputs::with_phi(d.to_vec(), f.to_vec()),
        (Err((s, m)), _) | (_, Err((s, m))) => {
            set_last_error(&m);
            return s;
        }
    };
    bound_call(params, out, |p| bound_rio_general(p, &inputs, kl))
}
