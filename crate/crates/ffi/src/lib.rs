//! C interface to the `dalembert` engine.
//!
//! Models and trajectories are opaque handles released with their `_free`
//! function. Every fallible call returns a [`DzStatus`]; on failure the
//! message is available from [`dz_last_error`] on the same thread. Arrays are
//! caller-allocated: length `N` for configuration vectors, `N*N` row-major for
//! matrices. Strings returned through `char**` are released with
//! [`dz_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dalembert::conserved::{displaced_energy, energy, DisplacedEnergyForm};
use dalembert::dynamics::{eom_accel, integrate, FlowOptions, IntegratorConfig, Trajectory};
use dalembert::prolong::{gamma_eval, mck_at};
use dalembert::scenario::{execute, Scenario};
use dalembert::systems::{make_builtin, Params};
use dalembert::verify::verify_identities;
use dalembert::{DAlembertState, Error, LagrangianModel, PhaseState};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DzStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed input: bad JSON, unknown system, wrong lengths, parse errors.
    InvalidArgument = 2,
    /// The Lagrangian could not be evaluated or differentiated at the state.
    Evaluation = 3,
    /// `det M` too small to solve for accelerations.
    Degenerate = 4,
    /// The integrator gave up (step underflow or step limit).
    Integration = 5,
    /// Input well-formed but outside the model's domain of validity.
    Domain = 6,
    Io = 7,
    Panic = 8,
}

pub struct DzModel(LagrangianModel);

pub struct DzTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> DzStatus {
    match err {
        Error::Parse(_)
        | Error::Schema { .. }
        | Error::Json(_)
        | Error::UnknownSystem(_)
        | Error::MissingParameter { .. }
        | Error::InvalidParameter { .. }
        | Error::DimensionMismatch { .. }
        | Error::InvalidConfig(_) => DzStatus::InvalidArgument,
        Error::Eval(_) | Error::NonFiniteDerivative => DzStatus::Evaluation,
        Error::DegenerateLagrangian { .. } => DzStatus::Degenerate,
        Error::StepSizeUnderflow { .. } | Error::MaxStepsExceeded { .. } => DzStatus::Integration,
        Error::Io(_) => DzStatus::Io,
        _ => DzStatus::Domain,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T> = Result<T, Failure>;

fn guard(f: impl FnOnce() -> Outcome<()>) -> DzStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DzStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            DzStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            DzStatus::InvalidArgument
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            DzStatus::Panic
        }
    }
}

unsafe fn cstr<'a>(p: *const c_char, what: &'static str) -> Outcome<&'a str> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure::Arg(format!("{what} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Outcome<&'a [f64]> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_slice<'a>(p: *mut f64, n: usize, what: &'static str) -> Outcome<&'a mut [f64]> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, n))
}

unsafe fn model<'a>(m: *const DzModel) -> Outcome<&'a LagrangianModel> {
    m.as_ref().map(|m| &m.0).ok_or(Failure::Null("model"))
}

unsafe fn write<T>(out: *mut T, value: T, what: &'static str) -> Outcome<()> {
    if out.is_null() {
        return Err(Failure::Null(what));
    }
    out.write(value);
    Ok(())
}

fn json_string(text: String) -> *mut c_char {
    CString::new(text).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build a catalog system. `params_json` is a JSON object or NULL for defaults.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dz_model_builtin(name: *const c_char, params_json: *const c_char, out: *mut *mut DzModel) -> DzStatus {
    guard(|| {
        let name = cstr(name, "name")?;
        let params: Params = if params_json.is_null() {
            Params::new()
        } else {
            serde_json::from_str(cstr(params_json, "params_json")?).map_err(Error::from)?
        };
        let m = make_builtin(name, &params)?;
        write(out, Box::into_raw(Box::new(DzModel(m))), "out")
    })
}

/// Parse a Lagrangian in `q1.., qd1.., t` and the named numeric parameters.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dz_model_from_dsl(
    lagrangian: *const c_char,
    dim: usize,
    params_json: *const c_char,
    out: *mut *mut DzModel,
) -> DzStatus {
    guard(|| {
        let text = cstr(lagrangian, "lagrangian")?;
        let params: BTreeMap<String, f64> = if params_json.is_null() {
            BTreeMap::new()
        } else {
            serde_json::from_str(cstr(params_json, "params_json")?).map_err(Error::from)?
        };
        let m = LagrangianModel::from_dsl(text, dim, params)?;
        write(out, Box::into_raw(Box::new(DzModel(m))), "out")
    })
}

/// # Safety
/// `m` must come from a `dz_model_*` constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dz_model_free(m: *mut DzModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Configuration dimension `N`, or 0 for NULL.
///
/// # Safety
/// `m` must be a live model handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn dz_model_dim(m: *const DzModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.dim())
}

/// Accelerations `q̈` from the Euler–Lagrange equations.
///
/// # Safety
/// Arrays must hold `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn dz_eom_accel(m: *const DzModel, q: *const f64, qd: *const f64, t: f64, qdd_out: *mut f64) -> DzStatus {
    guard(|| {
        let m = model(m)?;
        let n = m.dim();
        let s = PhaseState::new(slice(q, n, "q")?.to_vec(), slice(qd, n, "qd")?.to_vec(), t);
        out_slice(qdd_out, n, "qdd_out")?.copy_from_slice(&eom_accel(m, &s)?);
        Ok(())
    })
}

/// The prolonged Lagrangian `γ = (∂L/∂q̇)·ε̇ + (∂L/∂q)·ε`.
///
/// # Safety
/// Arrays must hold `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn dz_gamma(
    m: *const DzModel,
    q: *const f64,
    eps: *const f64,
    qd: *const f64,
    epsd: *const f64,
    t: f64,
    out: *mut f64,
) -> DzStatus {
    guard(|| {
        let m = model(m)?;
        let d = dalembert_state(m.dim(), q, eps, qd, epsd, t)?;
        write(out, gamma_eval(m, &d)?, "out")
    })
}

unsafe fn dalembert_state(n: usize, q: *const f64, eps: *const f64, qd: *const f64, epsd: *const f64, t: f64) -> Outcome<DAlembertState> {
    Ok(DAlembertState::new(
        slice(q, n, "q")?.to_vec(),
        slice(eps, n, "eps")?.to_vec(),
        slice(qd, n, "qd")?.to_vec(),
        slice(epsd, n, "epsd")?.to_vec(),
        t,
    ))
}

/// `M`, `C`, `K` of the variational equations `M ε̈ + C ε̇ + K ε = 0`, row-major.
///
/// # Safety
/// `q`, `qd` hold `N` doubles; each output holds `N*N`.
#[no_mangle]
pub unsafe extern "C" fn dz_mck(
    m: *const DzModel,
    q: *const f64,
    qd: *const f64,
    t: f64,
    m_out: *mut f64,
    c_out: *mut f64,
    k_out: *mut f64,
) -> DzStatus {
    guard(|| {
        let m = model(m)?;
        let n = m.dim();
        let s = PhaseState::new(slice(q, n, "q")?.to_vec(), slice(qd, n, "qd")?.to_vec(), t);
        let (_, mats) = mck_at(m, &s)?;
        for (mat, out, what) in [(&mats.m, m_out, "m_out"), (&mats.c, c_out, "c_out"), (&mats.k, k_out, "k_out")] {
            let dst = out_slice(out, n * n, what)?;
            for i in 0..n {
                for j in 0..n {
                    dst[i * n + j] = mat[(i, j)];
                }
            }
        }
        Ok(())
    })
}

/// `H = (∂L/∂q̇)·q̇ − L`.
///
/// # Safety
/// Arrays must hold `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn dz_energy(m: *const DzModel, q: *const f64, qd: *const f64, t: f64, out: *mut f64) -> DzStatus {
    guard(|| {
        let m = model(m)?;
        let n = m.dim();
        let s = PhaseState::new(slice(q, n, "q")?.to_vec(), slice(qd, n, "qd")?.to_vec(), t);
        write(out, energy(m, &s)?.value, "out")
    })
}

/// Displaced energy `h`, the variation of `H` along `(ε, ε̇)`.
///
/// # Safety
/// Arrays must hold `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn dz_displaced_energy(
    m: *const DzModel,
    q: *const f64,
    eps: *const f64,
    qd: *const f64,
    epsd: *const f64,
    t: f64,
    out: *mut f64,
) -> DzStatus {
    guard(|| {
        let m = model(m)?;
        let d = dalembert_state(m.dim(), q, eps, qd, epsd, t)?;
        write(out, displaced_energy(m, &d, DisplacedEnergyForm::EnergyVariation)?, "out")
    })
}

/// Integrate motion and displacement together. `integrator_json` holds the
/// integrator settings, e.g. `{"method":"dopri5","t_end":10,"output_interval":0.1}`.
///
/// # Safety
/// Arrays must hold `N` doubles; strings NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dz_integrate(
    m: *const DzModel,
    q: *const f64,
    eps: *const f64,
    qd: *const f64,
    epsd: *const f64,
    integrator_json: *const c_char,
    out: *mut *mut DzTrajectory,
) -> DzStatus {
    guard(|| {
        let m = model(m)?;
        let cfg: IntegratorConfig = serde_json::from_str(cstr(integrator_json, "integrator_json")?).map_err(Error::from)?;
        let d = dalembert_state(m.dim(), q, eps, qd, epsd, cfg.t_start)?;
        let traj = integrate(m, &d, &cfg, &FlowOptions::default())?;
        write(out, Box::into_raw(Box::new(DzTrajectory(traj))), "out")
    })
}

/// Number of samples, or 0 for NULL.
///
/// # Safety
/// `tr` must be a live trajectory handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn dz_trajectory_len(tr: *const DzTrajectory) -> usize {
    tr.as_ref().map_or(0, |t| t.0.len())
}

/// Sample `k`: its time and the four state blocks. Any output may be NULL to skip it.
///
/// # Safety
/// Non-NULL outputs must hold `N` doubles.
#[no_mangle]
pub unsafe extern "C" fn dz_trajectory_sample(
    tr: *const DzTrajectory,
    k: usize,
    t_out: *mut f64,
    q_out: *mut f64,
    eps_out: *mut f64,
    qd_out: *mut f64,
    epsd_out: *mut f64,
) -> DzStatus {
    guard(|| {
        let tr = &tr.as_ref().ok_or(Failure::Null("trajectory"))?.0;
        if k >= tr.len() {
            return Err(Failure::Arg(format!("sample {k} out of range (length {})", tr.len())));
        }
        let d = &tr.states[k];
        if !t_out.is_null() {
            t_out.write(tr.times[k]);
        }
        for (src, dst) in [(&d.q, q_out), (&d.eps, eps_out), (&d.qd, qd_out), (&d.epsd, epsd_out)] {
            if !dst.is_null() {
                std::slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `tr` must come from [`dz_integrate`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dz_trajectory_free(tr: *mut DzTrajectory) {
    if !tr.is_null() {
        drop(Box::from_raw(tr));
    }
}

/// Run the identity suite; writes a JSON report and sets `passed` to 0 or 1.
///
/// # Safety
/// `report_out` and `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dz_verify(
    m: *const DzModel,
    n_samples: usize,
    seed: u64,
    report_out: *mut *mut c_char,
    passed: *mut i32,
) -> DzStatus {
    guard(|| {
        let m = model(m)?;
        let report = verify_identities(m, "model", n_samples, seed)?;
        write(passed, report.all_passed as i32, "passed")?;
        write(report_out, json_string(serde_json::to_string(&report).map_err(Error::from)?), "report_out")
    })
}

/// Run a scenario given as JSON text (outputs block ignored). Writes the run
/// report and the exit code the command line would use (0 or 2).
///
/// # Safety
/// `scenario_json` NUL-terminated; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn dz_run_scenario(scenario_json: *const c_char, report_out: *mut *mut c_char, exit_code: *mut i32) -> DzStatus {
    guard(|| {
        let scenario = Scenario::from_json(cstr(scenario_json, "scenario_json")?)?;
        let run = execute(&scenario)?;
        write(exit_code, run.report.exit_code(), "exit_code")?;
        write(report_out, json_string(serde_json::to_string(&run.report).map_err(Error::from)?), "report_out")
    })
}
