//! C interface to the needlesteer planner.
//!
//! Objects are opaque handles created by `ns_*_new`/`ns_*_load` style
//! functions and released with the matching `ns_*_free`. Every fallible call
//! returns an `NsStatus`; on failure `ns_last_error` describes the problem
//! for the calling thread. Strings returned by the library are released
//! with `ns_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use needlesteer::harness::{plan_report, resolve_config, run_planner, PlannerKind, PlannerOverrides, PlanReport};
use needlesteer::kinematics::Quat;
use needlesteer::nalgebra::Quaternion;
use needlesteer::search::Termination;
use needlesteer::{
    apply_primitive, generate_scenario, load_env, Environment, Error, MotionPrimitive, PlanningProblem, Pose,
    ProblemSpec, ScenarioSpec, Vec3,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    OutOfWorkspace = 5,
    InvalidStart = 6,
    Unsatisfiable = 7,
    TooLarge = 8,
    Panic = 9,
}

pub const NS_PLANNER_ROS: u32 = 0;
pub const NS_PLANNER_RCS: u32 = 1;
pub const NS_PLANNER_RRT: u32 = 2;

pub const NS_TERMINATED_OPEN_EXHAUSTED: u32 = 0;
pub const NS_TERMINATED_TIMEOUT: u32 = 1;

/// Tip pose: position in mm and unit quaternion `(w, x, y, z)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NsPose {
    pub p: [f64; 3],
    pub q: [f64; 4],
}

/// Curvature (1/mm), arc length (mm) and axial pre-rotation (rad).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NsPrimitive {
    pub kappa: f64,
    pub delta_ell: f64,
    pub delta_theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct NsPlanSummary {
    pub found: bool,
    /// NaN when no plan was found.
    pub cost: f64,
    /// NaN when no plan was found.
    pub length: f64,
    pub primitive_count: usize,
    pub nodes_expanded: u64,
    pub nodes_generated: u64,
    /// One of the `NS_TERMINATED_*` constants.
    pub terminated: u32,
    pub elapsed_ms: f64,
}

pub struct NsEnvironment {
    env: Arc<Environment>,
}

pub struct NsProblem {
    problem: PlanningProblem,
}

pub struct NsPlan {
    report: PlanReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> NsStatus {
    match e {
        Error::OutOfWorkspace { .. } => NsStatus::OutOfWorkspace,
        Error::Manifest(_) | Error::Json(_) | Error::DimensionMismatch { .. } => NsStatus::Parse,
        Error::Io { .. } => NsStatus::Io,
        Error::UnsatisfiableSpec { .. } => NsStatus::Unsatisfiable,
        Error::InvalidStart(_) => NsStatus::InvalidStart,
        Error::InstanceTooLarge { .. } => NsStatus::TooLarge,
        Error::InvalidArgument(_) => NsStatus::InvalidArgument,
    }
}

struct Fail(NsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(NsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording failures and panics in the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            NsStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| Fail(NsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn in_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn to_pose(x: &NsPose) -> Result<Pose, Fail> {
    let q = Quaternion::new(x.q[0], x.q[1], x.q[2], x.q[3]);
    let n = q.norm();
    if !(n.is_finite() && n > 0.0) || x.p.iter().any(|v| !v.is_finite()) {
        return Err(Fail(NsStatus::InvalidArgument, "pose must be finite with a nonzero quaternion".into()));
    }
    Ok(Pose::new(Vec3::from(x.p), Quat::from_quaternion(q)))
}

fn from_pose(x: &Pose) -> NsPose {
    let q = x.q.into_inner();
    NsPose {
        p: [x.p.x, x.p.y, x.p.z],
        q: [q.w, q.i, q.j, q.k],
    }
}

fn planner_kind(code: u32) -> Result<PlannerKind, Fail> {
    match code {
        NS_PLANNER_ROS => Ok(PlannerKind::Ros),
        NS_PLANNER_RCS => Ok(PlannerKind::Rcs),
        NS_PLANNER_RRT => Ok(PlannerKind::Rrt),
        other => Err(Fail(NsStatus::InvalidArgument, format!("unknown planner code {other}"))),
    }
}

fn c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(NsStatus::InvalidArgument, "string contains a NUL byte".into()))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ns_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads an environment from its JSON manifest.
///
/// # Safety
/// `manifest_path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_env_load(manifest_path: *const c_char, out: *mut *mut NsEnvironment) -> NsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = text(manifest_path, "manifest_path")?;
        let env = load_env(path)?;
        *out = Box::into_raw(Box::new(NsEnvironment { env: Arc::new(env) }));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ns_env_free(env: *mut NsEnvironment) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Whether `p` is outside every inflated obstacle and inside the workspace.
///
/// # Safety
/// `env` must be a live handle; `p` must point to three doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_env_is_free(env: *const NsEnvironment, p: *const f64, out: *mut bool) -> NsStatus {
    guard(|| {
        let env = in_ref(env, "env")?;
        let p = in_ref(p as *const [f64; 3], "p")?;
        *out_ptr(out, "out")? = env.env.is_free(&Vec3::from(*p));
        Ok(())
    })
}

/// Interpolated cost at `p`.
///
/// # Safety
/// `env` must be a live handle; `p` must point to three doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_env_point_cost(env: *const NsEnvironment, p: *const f64, out: *mut f64) -> NsStatus {
    guard(|| {
        let env = in_ref(env, "env")?;
        let p = in_ref(p as *const [f64; 3], "p")?;
        let out = out_ptr(out, "out")?;
        *out = env.env.point_cost(&Vec3::from(*p))?;
        Ok(())
    })
}

/// Generates an environment and query from a scenario spec JSON document.
///
/// # Safety
/// `spec_json` must be a NUL-terminated string; both out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ns_generate_scenario(
    spec_json: *const c_char,
    env_out: *mut *mut NsEnvironment,
    problem_out: *mut *mut NsProblem,
) -> NsStatus {
    guard(|| {
        let env_out = out_ptr(env_out, "env_out")?;
        let problem_out = out_ptr(problem_out, "problem_out")?;
        *env_out = ptr::null_mut();
        *problem_out = ptr::null_mut();
        let spec: ScenarioSpec = serde_json::from_str(text(spec_json, "spec_json")?).map_err(Error::from)?;
        let (env, problem) = generate_scenario(&spec)?;
        *env_out = Box::into_raw(Box::new(NsEnvironment { env }));
        *problem_out = Box::into_raw(Box::new(NsProblem { problem }));
        Ok(())
    })
}

/// Builds a query over `env` from a problem JSON document.
///
/// # Safety
/// `env` must be a live handle, `json` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_problem_from_json(
    env: *const NsEnvironment,
    json: *const c_char,
    out: *mut *mut NsProblem,
) -> NsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let env = in_ref(env, "env")?;
        let spec: ProblemSpec = serde_json::from_str(text(json, "json")?).map_err(Error::from)?;
        let problem = PlanningProblem::from_spec(env.env.clone(), &spec);
        problem.check()?;
        *out = Box::into_raw(Box::new(NsProblem { problem }));
        Ok(())
    })
}

/// Problem JSON document of a query.
///
/// # Safety
/// `problem` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_problem_to_json(problem: *const NsProblem, out: *mut *mut c_char) -> NsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let problem = in_ref(problem, "problem")?;
        *out = c_string(serde_json::to_string(&problem.problem.spec()).map_err(Error::from)?)?;
        Ok(())
    })
}

/// # Safety
/// `problem` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ns_problem_free(problem: *mut NsProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Runs a planner. `overrides_json` may be null; otherwise it is a JSON
/// object with any of `budget_ms`, `seed`, `threads`, `n_la`, `d_sim`,
/// `alpha`, `eps`, `dl_min`, `dtheta_min`, `dl_max`, `virtual_clock` and
/// `inevitable_check`. A run that finds no plan still succeeds.
///
/// # Safety
/// `problem` must be a live handle, `overrides_json` null or NUL-terminated,
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_plan(
    problem: *const NsProblem,
    planner: u32,
    overrides_json: *const c_char,
    out: *mut *mut NsPlan,
) -> NsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let problem = &in_ref(problem, "problem")?.problem;
        let kind = planner_kind(planner)?;
        let overrides: PlannerOverrides = if overrides_json.is_null() {
            PlannerOverrides::default()
        } else {
            serde_json::from_str(text(overrides_json, "overrides_json")?).map_err(Error::from)?
        };
        let config = resolve_config(problem, kind, &overrides)?;
        let result = run_planner(problem, &config)?;
        let report = plan_report(problem, &config, &result);
        *out = Box::into_raw(Box::new(NsPlan { report }));
        Ok(())
    })
}

/// # Safety
/// `plan` must be null or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn ns_plan_free(plan: *mut NsPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_plan_summary(plan: *const NsPlan, out: *mut NsPlanSummary) -> NsStatus {
    guard(|| {
        let r = &in_ref(plan, "plan")?.report;
        *out_ptr(out, "out")? = NsPlanSummary {
            found: r.found,
            cost: r.cost.unwrap_or(f64::NAN),
            length: r.length.unwrap_or(f64::NAN),
            primitive_count: r.primitives.len(),
            nodes_expanded: r.nodes_expanded,
            nodes_generated: r.nodes_generated,
            terminated: match r.terminated {
                Termination::OpenExhausted => NS_TERMINATED_OPEN_EXHAUSTED,
                Termination::Timeout => NS_TERMINATED_TIMEOUT,
            },
            elapsed_ms: r.elapsed_ms,
        };
        Ok(())
    })
}

/// Primitive `index` of the best plan.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_plan_primitive(plan: *const NsPlan, index: usize, out: *mut NsPrimitive) -> NsStatus {
    guard(|| {
        let r = &in_ref(plan, "plan")?.report;
        let out = out_ptr(out, "out")?;
        let m = r.primitives.get(index).ok_or_else(|| {
            Fail(
                NsStatus::InvalidArgument,
                format!("primitive index {index} out of range ({} primitives)", r.primitives.len()),
            )
        })?;
        *out = NsPrimitive {
            kappa: m.kappa,
            delta_ell: m.delta_ell,
            delta_theta: m.delta_theta,
        };
        Ok(())
    })
}

/// Full result report as JSON; release with `ns_string_free`.
///
/// # Safety
/// `plan` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ns_plan_to_json(plan: *const NsPlan, out: *mut *mut c_char) -> NsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let r = &in_ref(plan, "plan")?.report;
        *out = c_string(serde_json::to_string(r).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Pose reached by executing `m` from `x`.
///
/// # Safety
/// All pointers must be valid; `out` may alias `x`.
#[no_mangle]
pub unsafe extern "C" fn ns_apply_primitive(x: *const NsPose, m: *const NsPrimitive, out: *mut NsPose) -> NsStatus {
    guard(|| {
        let x = to_pose(in_ref(x, "x")?)?;
        let m = *in_ref(m, "m")?;
        if !(m.kappa >= 0.0 && m.delta_ell >= 0.0 && m.delta_theta.is_finite()) {
            return Err(Fail(
                NsStatus::InvalidArgument,
                "primitive needs kappa >= 0, delta_ell >= 0 and a finite rotation".into(),
            ));
        }
        let next = apply_primitive(&x, &MotionPrimitive::new(m.kappa, m.delta_ell, m.delta_theta));
        *out_ptr(out, "out")? = from_pose(&next);
        Ok(())
    })
}
