//! C ABI over `proxnet`.
//!
//! Every fallible call returns a [`ProxnetStatus`]; on failure the message is
//! available from [`proxnet_last_error`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.
//! Vectors cross the boundary as `(pointer, length)` pairs of `double`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nalgebra::DVector;
use proxnet::certify::{certify_network, ConditionUsed};
use proxnet::engine::Iteration;
use proxnet::vi::{lift_fixed_point, monotonicity_check, vi_residual};
use proxnet::{BlockPoint, Error, ExperimentConfig, Network, ScalarActivation, Status};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    DimensionMismatch = 3,
    InvalidParameter = 4,
    Config = 5,
    Io = 6,
    Numerical = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxnetCondition {
    None = 0,
    ZeroFactor = 1,
    NormBound = 2,
    EtaCondition = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxnetRunStatus {
    Converged = 0,
    MaxIterations = 1,
    Diverged = 2,
}

/// Result of certification. `alpha`, `eta` and `mu` are NaN when absent.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ProxnetCertificate {
    pub certified: bool,
    pub alpha: f64,
    pub condition: ProxnetCondition,
    pub eta: f64,
    pub mu: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ProxnetRunSummary {
    pub status: ProxnetRunStatus,
    pub iterations: usize,
    pub residual: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ProxnetMonotonicity {
    pub monotone: bool,
    pub max_eigenvalue: f64,
    pub margin: f64,
}

/// A parsed experiment file together with its network.
pub struct ProxnetExperiment {
    config: ExperimentConfig,
    network: Network,
}

/// A scalar activation parsed from its key.
pub struct ProxnetActivation(ScalarActivation);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ProxnetStatus {
    match e {
        Error::DimensionMismatch { .. } | Error::LayerRange { .. } => ProxnetStatus::DimensionMismatch,
        Error::InvalidParameter(_) | Error::UnknownActivation(_) | Error::NormTooLarge { .. } | Error::ScheduleFault { .. } => {
            ProxnetStatus::InvalidParameter
        }
        Error::Config(_) | Error::Parse(_) => ProxnetStatus::Config,
        Error::Io(_) => ProxnetStatus::Io,
        Error::PotentialUnavailable(_) | Error::Bracketing(_) | Error::MissingReference => ProxnetStatus::Numerical,
    }
}

struct Failure(ProxnetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn guard(body: impl FnOnce() -> FfiResult) -> ProxnetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => ProxnetStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ProxnetStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ProxnetStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(ProxnetStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn vec_arg(p: *const f64, len: usize, expected: usize, what: &str) -> FfiResult<DVector<f64>> {
    if len != expected {
        return Err(Error::DimensionMismatch { expected, found: len }.into());
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(DVector::from_column_slice(std::slice::from_raw_parts(p, len)))
}

unsafe fn write_vec(v: &DVector<f64>, out: *mut f64, len: usize) -> FfiResult {
    if len != v.len() {
        return Err(Error::DimensionMismatch { expected: v.len(), found: len }.into());
    }
    if out.is_null() {
        return Err(null("output buffer"));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(v.as_slice());
    Ok(())
}

fn finish_experiment(config: ExperimentConfig, out: &mut *mut ProxnetExperiment) -> FfiResult {
    let network = config.network()?;
    *out = Box::into_raw(Box::new(ProxnetExperiment { config, network }));
    Ok(())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn proxnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn proxnet_status_str(status: ProxnetStatus) -> *const c_char {
    let s: &'static CStr = match status {
        ProxnetStatus::Ok => c"ok",
        ProxnetStatus::NullPointer => c"null pointer",
        ProxnetStatus::InvalidUtf8 => c"invalid utf-8",
        ProxnetStatus::DimensionMismatch => c"dimension mismatch",
        ProxnetStatus::InvalidParameter => c"invalid parameter",
        ProxnetStatus::Config => c"config error",
        ProxnetStatus::Io => c"i/o error",
        ProxnetStatus::Numerical => c"numerical failure",
        ProxnetStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}

/// Loads an experiment file. Relative paths inside it resolve against its
/// directory.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proxnet_experiment_load(path: *const c_char, out: *mut *mut ProxnetExperiment) -> ProxnetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let config = ExperimentConfig::load(Path::new(str_arg(path, "path")?))?;
        finish_experiment(config, out)
    })
}

/// Parses an experiment from TOML text. `base_dir` may be NULL, in which
/// case relative paths resolve against the working directory.
///
/// # Safety
/// `text` and a non-null `base_dir` must be NUL-terminated strings; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proxnet_experiment_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut ProxnetExperiment,
) -> ProxnetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let base = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        let config = ExperimentConfig::parse(str_arg(text, "text")?, Path::new(base))?;
        finish_experiment(config, out)
    })
}

/// # Safety
/// `exp` must come from this library and not have been freed. NULL is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn proxnet_experiment_free(exp: *mut ProxnetExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Dimension of the network input and output, 0 for NULL.
///
/// # Safety
/// `exp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn proxnet_experiment_dim(exp: *const ProxnetExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.network.dim())
}

/// Number of layers, 0 for NULL.
///
/// # Safety
/// `exp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn proxnet_experiment_depth(exp: *const ProxnetExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.network.depth())
}

/// Total length of a block point (sum of layer output dimensions), 0 for
/// NULL.
///
/// # Safety
/// `exp` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn proxnet_experiment_block_len(exp: *const ProxnetExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.network.layer_dims().iter().sum())
}

/// `out = T x`. Both buffers have length `proxnet_experiment_dim`.
///
/// # Safety
/// Buffers must hold `len` doubles; `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn proxnet_forward(
    exp: *const ProxnetExperiment,
    x: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> ProxnetStatus {
    guard(|| {
        let exp = ref_arg(exp, "experiment")?;
        let x = vec_arg(x, len, exp.network.dim(), "x")?;
        write_vec(&exp.network.forward(&x)?, out, out_len)
    })
}

/// Smallest certified averagedness constant on the configured grid.
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proxnet_certify(exp: *const ProxnetExperiment, out: *mut ProxnetCertificate) -> ProxnetStatus {
    guard(|| {
        let exp = ref_arg(exp, "experiment")?;
        let out = out_arg(out, "out")?;
        let cert = certify_network(&exp.network, exp.config.alpha_step())?;
        *out = ProxnetCertificate {
            certified: cert.alpha.is_some(),
            alpha: cert.alpha.unwrap_or(f64::NAN),
            condition: match cert.condition_used {
                ConditionUsed::None => ProxnetCondition::None,
                ConditionUsed::ZeroFactor => ProxnetCondition::ZeroFactor,
                ConditionUsed::NormBound => ProxnetCondition::NormBound,
                ConditionUsed::EtaCondition => ProxnetCondition::EtaCondition,
            },
            eta: cert.eta.unwrap_or(f64::NAN),
            mu: cert.mu.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Runs the configured iteration. `x0` may be NULL to use the configured
/// start; otherwise it has length `len`. The final iterate is written to
/// `x_out` (length `len`, or the network dimension when `x0` is NULL).
///
/// # Safety
/// Non-null buffers must hold `len` doubles; `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn proxnet_run(
    exp: *const ProxnetExperiment,
    x0: *const f64,
    len: usize,
    x_out: *mut f64,
    summary: *mut ProxnetRunSummary,
) -> ProxnetStatus {
    guard(|| {
        let exp = ref_arg(exp, "experiment")?;
        let summary = out_arg(summary, "summary")?;
        let (cfg, net) = (&exp.config, &exp.network);
        let start = if x0.is_null() { cfg.x0(net)? } else { vec_arg(x0, len, net.dim(), "x0")? };
        let perturbation = cfg.perturbation(net)?;
        let mut it = Iteration::new(net, cfg.schedule()?, cfg.stop())?;
        if let Some(p) = &perturbation {
            it = it.with_perturbation(p)?;
        }
        let (x, trace) = it.run(&start)?;
        write_vec(&x, x_out, if x0.is_null() { net.dim() } else { len })?;
        *summary = ProxnetRunSummary {
            status: match trace.status {
                Status::Converged => ProxnetRunStatus::Converged,
                Status::MaxIterations => ProxnetRunStatus::MaxIterations,
                Status::Diverged => ProxnetRunStatus::Diverged,
            },
            iterations: trace.steps(),
            residual: trace.rows.last().map_or(f64::NAN, |r| r.residual),
        };
        Ok(())
    })
}

/// Largest per-layer residual of a block point given as the concatenation
/// of its components (length `proxnet_experiment_block_len`).
///
/// # Safety
/// `point` must hold `len` doubles; `exp` must be a live handle and `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proxnet_vi_residual(
    exp: *const ProxnetExperiment,
    point: *const f64,
    len: usize,
    out: *mut f64,
) -> ProxnetStatus {
    guard(|| {
        let exp = ref_arg(exp, "experiment")?;
        let out = out_arg(out, "out")?;
        let dims = exp.network.layer_dims();
        let flat = vec_arg(point, len, dims.iter().sum(), "point")?;
        let p = BlockPoint::from_concat(&flat, &dims)?;
        *out = vi_residual(&exp.network, &p)?.max;
        Ok(())
    })
}

/// Writes the block point `(T_1 x, T_2 T_1 x, …, x)` for a network input
/// `x` into `out` (length `proxnet_experiment_block_len`).
///
/// # Safety
/// Buffers must hold the stated lengths; `exp` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn proxnet_lift_point(
    exp: *const ProxnetExperiment,
    x: *const f64,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> ProxnetStatus {
    guard(|| {
        let exp = ref_arg(exp, "experiment")?;
        let x = vec_arg(x, len, exp.network.dim(), "x")?;
        write_vec(&lift_fixed_point(&exp.network, &x)?.concat(), out, out_len)
    })
}

/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proxnet_monotonicity(exp: *const ProxnetExperiment, out: *mut ProxnetMonotonicity) -> ProxnetStatus {
    guard(|| {
        let exp = ref_arg(exp, "experiment")?;
        let out = out_arg(out, "out")?;
        let r = monotonicity_check(&exp.network);
        *out = ProxnetMonotonicity { monotone: r.monotone, max_eigenvalue: r.max_eigenvalue, margin: r.margin };
        Ok(())
    })
}

/// Parses an activation key such as `"tanh"` or `"prelu:0.25"`.
///
/// # Safety
/// `key` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proxnet_activation_parse(key: *const c_char, out: *mut *mut ProxnetActivation) -> ProxnetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let act: ScalarActivation = str_arg(key, "key")?.parse()?;
        *out = Box::into_raw(Box::new(ProxnetActivation(act)));
        Ok(())
    })
}

/// # Safety
/// `act` must come from this library and not have been freed. NULL is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn proxnet_activation_free(act: *mut ProxnetActivation) {
    if !act.is_null() {
        drop(Box::from_raw(act));
    }
}

/// Evaluates the activation; NaN for NULL.
///
/// # Safety
/// `act` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn proxnet_activation_eval(act: *const ProxnetActivation, x: f64) -> f64 {
    act.as_ref().map_or(f64::NAN, |a| a.0.eval(x))
}

/// Numerical proximity operator of the activation's potential.
///
/// # Safety
/// `act` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proxnet_activation_prox(
    act: *const ProxnetActivation,
    x: f64,
    tol: f64,
    out: *mut f64,
) -> ProxnetStatus {
    guard(|| {
        let act = ref_arg(act, "activation")?;
        *out_arg(out, "out")? = act.0.prox_oracle(x, tol)?;
        Ok(())
    })
}
