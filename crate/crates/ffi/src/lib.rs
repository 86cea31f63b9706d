//! C ABI over `pomdp_voi`.
//!
//! Objects cross the boundary as opaque handles created by `pv_*_new`/`pv_*_load`
//! style functions and released with the matching `pv_*_free`. Every fallible
//! call returns a `PvStatus`; on failure `pv_last_error` holds a message for the
//! calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pomdp_voi::cases::{build_three_component, ControlVariant};
use pomdp_voi::metrics::{self, ControlSetting};
use pomdp_voi::solvers::{self, SolveOutcome, SolveStatus, SolverConfig, SolverKind};
use pomdp_voi::{Belief, Error, PomdpModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidModel = 2,
    Parse = 3,
    Config = 4,
    IncompatibleSettings = 5,
    Contract = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
    Other = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvSolver {
    Perseus = 0,
    Pbvi = 1,
    Gap = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PvMetric {
    Voi = 0,
    Vopi = 1,
    Rvoci = 2,
}

/// Solver settings; start from `pv_solver_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PvSolverOptions {
    pub solver: PvSolver,
    pub epsilon: f64,
    /// Wall-clock budget in seconds; zero or negative means unlimited.
    pub max_seconds: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

/// A metric value and its error budget.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PvEstimate {
    pub value: f64,
    pub uncertainty: f64,
}

/// Opaque model handle.
pub struct PvModel(PomdpModel);

/// Opaque solved-bounds handle.
pub struct PvSolution(SolveOutcome);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> PvStatus {
    match e {
        Error::InvalidModel(_) | Error::SpecInvariantViolation(_) => PvStatus::InvalidModel,
        Error::Parse { .. } => PvStatus::Parse,
        Error::Config(_) => PvStatus::Config,
        Error::IncompatibleSettings(_) => PvStatus::IncompatibleSettings,
        Error::Contract(_) | Error::TrivialActionSelected(_) | Error::ZeroLikelihoodObservation { .. } | Error::EmptyAlphaSet => {
            PvStatus::Contract
        }
        Error::Io(_) => PvStatus::Io,
        _ => PvStatus::Other,
    }
}

fn guard(f: impl FnOnce() -> Result<(), PvStatus>) -> PvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            PvStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            PvStatus::Panic
        }
    }
}

fn fail(e: Error) -> PvStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> PvStatus {
    set_error(format!("{what} is null"));
    PvStatus::NullPointer
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, PvStatus> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        PvStatus::Parse
    })
}

unsafe fn model_ref<'a>(m: *const PvModel) -> Result<&'a PomdpModel, PvStatus> {
    m.as_ref().map(|m| &m.0).ok_or_else(|| null("model"))
}

unsafe fn belief_from(model: &PomdpModel, p: *const f64, len: usize) -> Result<Belief, PvStatus> {
    if p.is_null() {
        return Ok(model.initial_belief.clone());
    }
    if len != model.n_states() {
        return Err(fail(Error::Contract(format!("belief has {len} entries, model has {} states", model.n_states()))));
    }
    Belief::new(std::slice::from_raw_parts(p, len).to_vec()).map_err(fail)
}

fn config_of(o: &PvSolverOptions) -> (SolverKind, SolverConfig) {
    let kind = match o.solver {
        PvSolver::Perseus => SolverKind::Perseus,
        PvSolver::Pbvi => SolverKind::Pbvi,
        PvSolver::Gap => SolverKind::Gap,
    };
    let config = SolverConfig {
        epsilon: o.epsilon,
        max_wall_seconds: (o.max_seconds > 0.0).then_some(o.max_seconds),
        max_iterations: o.max_iterations,
        exploration_seed: o.seed,
        ..SolverConfig::default()
    };
    (kind, config)
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), PvStatus> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pv_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

#[no_mangle]
pub extern "C" fn pv_solver_options_default() -> PvSolverOptions {
    let d = SolverConfig::default();
    PvSolverOptions {
        solver: PvSolver::Perseus,
        epsilon: d.epsilon,
        max_seconds: d.max_wall_seconds.unwrap_or(0.0),
        max_iterations: d.max_iterations,
        seed: d.exploration_seed,
    }
}

/// Parses a TOML model document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pv_model_parse(text: *const c_char, out: *mut *mut PvModel) -> PvStatus {
    guard(|| {
        let t = cstr(text, "text")?;
        let m = pomdp_voi::io::parse_model(t).map_err(fail)?;
        put(out, PvModel(m))
    })
}

/// Loads a TOML model file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pv_model_load(path: *const c_char, out: *mut *mut PvModel) -> PvStatus {
    guard(|| {
        let p = cstr(path, "path")?;
        let m = pomdp_voi::io::load_model(std::path::Path::new(p)).map_err(fail)?;
        put(out, PvModel(m))
    })
}

/// Built-in three-component system; `setting` is 1 (optional inspection) or 2 (permanent monitoring).
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pv_model_three_component(p: f64, setting: u8, out: *mut *mut PvModel) -> PvStatus {
    guard(|| {
        let variant = ControlVariant::from_number(setting).map_err(fail)?;
        let m = build_three_component(p, variant).map_err(fail)?;
        put(out, PvModel(m))
    })
}

/// Derived setting: the observation action `a_o` made permanent and costless.
///
/// # Safety
/// `model` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pv_model_make_perm(model: *const PvModel, a_o: usize, out: *mut *mut PvModel) -> PvStatus {
    guard(|| {
        let m = model_ref(model)?;
        let derived = metrics::make_perm(m, a_o).map_err(fail)?;
        put(out, PvModel(derived.model))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pv_model_free(model: *mut PvModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of states, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_model_n_states(model: *const PvModel) -> usize {
    model.as_ref().map(|m| m.0.n_states()).unwrap_or(0)
}

/// Number of available joint actions, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_model_n_actions(model: *const PvModel) -> usize {
    model.as_ref().map(|m| m.0.actions.len()).unwrap_or(0)
}

/// Solves from `belief` (length `len`), or from the model's initial belief when
/// `belief` is null. A budget-exhausted run still succeeds; check `pv_solution_converged`.
///
/// # Safety
/// `model` must be a live handle, `options` valid, `belief` null or `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn pv_solve(
    model: *const PvModel,
    options: *const PvSolverOptions,
    belief: *const f64,
    len: usize,
    out: *mut *mut PvSolution,
) -> PvStatus {
    guard(|| {
        let m = model_ref(model)?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        let b = belief_from(m, belief, len)?;
        let (kind, config) = config_of(o);
        let outcome = solvers::solve(kind, m, &config, &b, None).map_err(fail)?;
        put(out, PvSolution(outcome))
    })
}

/// # Safety
/// `solution` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pv_solution_free(solution: *mut PvSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// Lower bound at the solve root (NaN for a null handle).
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_solution_lower(solution: *const PvSolution) -> f64 {
    solution.as_ref().map(|s| s.0.lower()).unwrap_or(f64::NAN)
}

/// Upper bound at the solve root (NaN for a null handle).
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_solution_upper(solution: *const PvSolution) -> f64 {
    solution.as_ref().map(|s| s.0.upper()).unwrap_or(f64::NAN)
}

/// Whether the solver met its tolerance (false for a null handle).
///
/// # Safety
/// `solution` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pv_solution_converged(solution: *const PvSolution) -> bool {
    solution.as_ref().map(|s| s.0.status == SolveStatus::Converged).unwrap_or(false)
}

/// Lower-bound value and greedy joint action at an arbitrary belief.
///
/// # Safety
/// `solution` must be a live handle; `belief` must hold `len` doubles; the
/// output pointers must be valid (any may be null to skip).
#[no_mangle]
pub unsafe extern "C" fn pv_solution_query(
    solution: *const PvSolution,
    belief: *const f64,
    len: usize,
    value: *mut f64,
    maintenance: *mut usize,
    observation: *mut usize,
) -> PvStatus {
    guard(|| {
        let s = solution.as_ref().ok_or_else(|| null("solution"))?;
        if belief.is_null() {
            return Err(null("belief"));
        }
        let b = Belief::new(std::slice::from_raw_parts(belief, len).to_vec()).map_err(fail)?;
        if b.len() != s.0.root.len() {
            return Err(fail(Error::Contract("belief length does not match the solved model".into())));
        }
        let policy = s.0.policy();
        let v = policy.value(&b).map_err(fail)?;
        let a = policy.action(&b).map_err(fail)?;
        if !value.is_null() {
            *value = v;
        }
        if !maintenance.is_null() {
            *maintenance = a.maintenance;
        }
        if !observation.is_null() {
            *observation = a.observation;
        }
        Ok(())
    })
}

/// Life-cycle metric of one model at its initial belief. `a_o` is used by `Rvoci` only.
///
/// # Safety
/// `model` must be a live handle; `options` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pv_metric(
    model: *const PvModel,
    metric: PvMetric,
    a_o: usize,
    options: *const PvSolverOptions,
    out: *mut PvEstimate,
) -> PvStatus {
    guard(|| {
        let m = model_ref(model)?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let (kind, config) = config_of(o);
        let b = m.initial_belief.clone();
        let e = match metric {
            PvMetric::Voi => metrics::voi(m, &b, kind, &config),
            PvMetric::Vopi => metrics::vopi(m, &b, kind, &config),
            PvMetric::Rvoci => metrics::rvoci(m, a_o, &b, kind, &config),
        }
        .map_err(fail)?;
        *out = PvEstimate { value: e.value, uncertainty: e.uncertainty };
        Ok(())
    })
}

/// Value of permanent monitoring: `permanent` against `optional` at the optional model's initial belief.
///
/// # Safety
/// Both models must be live handles; `options` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn pv_voshm(
    optional: *const PvModel,
    permanent: *const PvModel,
    options: *const PvSolverOptions,
    out: *mut PvEstimate,
) -> PvStatus {
    guard(|| {
        let m1 = model_ref(optional)?;
        let m2 = model_ref(permanent)?;
        let o = options.as_ref().ok_or_else(|| null("options"))?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let (kind, config) = config_of(o);
        let e = metrics::voshm(
            &ControlSetting::original("optional", m1.clone()),
            &ControlSetting::explicit("permanent", m2.clone()),
            &m1.initial_belief,
            kind,
            &config,
        )
        .map_err(fail)?;
        *out = PvEstimate { value: e.value, uncertainty: e.uncertainty };
        Ok(())
    })
}
