//! C interface to the kvfrac solver.
//!
//! Every fallible call returns a [`KvfStatus`]. On failure the message is kept
//! per thread and can be read with [`kvf_last_error_message`].
//! Handles are opaque; free each one with its `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use kvfrac::energy::{paradox_report, EnergyLedger, ParadoxVerdict};
use kvfrac::scenario::{parse_scenario, Prepared, Scenario};
use kvfrac::stepper::{run, Trajectory};
use kvfrac::{PowerLaw, SymTensor2};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KvfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Scenario = 3,
    Solver = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KvfVerdict {
    ParadoxConfirmed = 0,
    GriffithCompatible = 1,
    InconclusiveResolution = 2,
}

impl From<ParadoxVerdict> for KvfVerdict {
    fn from(v: ParadoxVerdict) -> Self {
        match v {
            ParadoxVerdict::ParadoxConfirmed => KvfVerdict::ParadoxConfirmed,
            ParadoxVerdict::GriffithCompatible => KvfVerdict::GriffithCompatible,
            ParadoxVerdict::InconclusiveResolution => KvfVerdict::InconclusiveResolution,
        }
    }
}

/// Symmetric tensor `[[xx, xy], [xy, yy]]`.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KvfTensor {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl From<KvfTensor> for SymTensor2 {
    fn from(t: KvfTensor) -> Self {
        SymTensor2::new(t.xx, t.yy, t.xy)
    }
}

impl From<SymTensor2> for KvfTensor {
    fn from(t: SymTensor2) -> Self {
        KvfTensor { xx: t.xx, yy: t.yy, xy: t.xy }
    }
}

/// One ledger row, same columns as the CSV export.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KvfLedgerRow {
    pub k: usize,
    pub t: f64,
    pub kinetic: f64,
    pub elastic: f64,
    pub viscous_cum: f64,
    pub work_cum: f64,
    pub crack_cum: f64,
    pub residual_kv: f64,
    pub residual_general: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KvfParadoxSummary {
    pub verdict: KvfVerdict,
    pub crack_final: f64,
    pub max_abs_residual: f64,
    pub max_griffith_defect: f64,
    pub tolerance: f64,
    pub min_crack: f64,
}

/// Constitutive law `G(ξ) = |ξ|^{p−2}ξ` with optional regularisation.
pub struct KvfLaw(PowerLaw);

/// A validated scenario.
pub struct KvfScenario(Arc<Prepared>);

/// A finished (or partial) run together with its energy ledger.
pub struct KvfRun {
    prepared: Arc<Prepared>,
    trajectory: Trajectory,
    ledger: EnergyLedger,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: KvfStatus, msg: impl Into<String>) -> KvfStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> KvfStatus) -> KvfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(KvfStatus::Panic, "internal panic"),
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, KvfStatus> {
    p.as_ref()
        .ok_or_else(|| fail(KvfStatus::NullPointer, format!("{what} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, KvfStatus> {
    if p.is_null() {
        return Err(fail(KvfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(KvfStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

/// Message of the last failed call on this thread, or NULL.
/// The pointer stays valid until the next kvf call on the same thread.
#[no_mangle]
pub extern "C" fn kvf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kvf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to write a handle into.
#[no_mangle]
pub unsafe extern "C" fn kvf_law_new(p: f64, eps_reg: f64, out: *mut *mut KvfLaw) -> KvfStatus {
    guard(|| {
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        match PowerLaw::new(p, eps_reg) {
            Ok(law) => {
                *out = Box::into_raw(Box::new(KvfLaw(law)));
                KvfStatus::Ok
            }
            Err(e) => fail(KvfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `law` must be NULL or a handle from [`kvf_law_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kvf_law_free(law: *mut KvfLaw) {
    if !law.is_null() {
        drop(Box::from_raw(law));
    }
}

/// Evaluates `G(xi)`.
///
/// # Safety
/// `law` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kvf_law_g_apply(law: *const KvfLaw, xi: KvfTensor, out: *mut KvfTensor) -> KvfStatus {
    guard(|| {
        let law = tri!(borrow(law, "law"));
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        *out = law.0.g_apply(&xi.into()).into();
        KvfStatus::Ok
    })
}

/// Evaluates the closed-form inverse `G⁻¹(eta)`.
///
/// # Safety
/// `law` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kvf_law_g_inverse(law: *const KvfLaw, eta: KvfTensor, out: *mut KvfTensor) -> KvfStatus {
    guard(|| {
        let law = tri!(borrow(law, "law"));
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        *out = law.0.g_inverse(&eta.into()).into();
        KvfStatus::Ok
    })
}

/// Potential `φ(xi)`; NaN if `law` is NULL.
///
/// # Safety
/// `law` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kvf_law_phi(law: *const KvfLaw, xi: KvfTensor) -> f64 {
    law.as_ref().map_or(f64::NAN, |l| l.0.phi(&xi.into()))
}

/// Conjugate potential `φ*(eta)`; NaN if `law` is NULL.
///
/// # Safety
/// `law` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kvf_law_phi_star(law: *const KvfLaw, eta: KvfTensor) -> f64 {
    law.as_ref().map_or(f64::NAN, |l| l.0.phi_star(&eta.into()))
}

fn store_scenario(result: Result<Prepared, impl ToString>, out: *mut *mut KvfScenario) -> KvfStatus {
    match result {
        Ok(p) => {
            // SAFETY: callers check `out` first.
            unsafe { *out = Box::into_raw(Box::new(KvfScenario(Arc::new(p)))) };
            KvfStatus::Ok
        }
        Err(e) => fail(KvfStatus::Scenario, e.to_string()),
    }
}

/// Reads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kvf_scenario_load(path: *const c_char, out: *mut *mut KvfScenario) -> KvfStatus {
    guard(|| {
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let path = tri!(c_str(path, "path"));
        store_scenario(parse_scenario(Path::new(path)), out)
    })
}

/// Parses and validates a scenario given as JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kvf_scenario_from_json(json: *const c_char, out: *mut *mut KvfScenario) -> KvfStatus {
    guard(|| {
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let json = tri!(c_str(json, "json"));
        store_scenario(Scenario::from_json(json, "<json>").and_then(Scenario::prepare), out)
    })
}

/// Largest step count listed in the scenario, 0 if `scenario` is NULL.
///
/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kvf_scenario_finest_n(scenario: *const KvfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.scenario.finest_n())
}

/// Number of validation warnings.
///
/// # Safety
/// `scenario` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kvf_scenario_warning_count(scenario: *const KvfScenario) -> usize {
    scenario.as_ref().map_or(0, |s| s.0.warnings.len())
}

/// # Safety
/// `scenario` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kvf_scenario_free(scenario: *mut KvfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs `n` time steps; `n = 0` selects the finest listed count.
///
/// On a solver failure the status is `Solver` and `*out` still receives the
/// partial run up to the last converged step.
///
/// # Safety
/// `scenario` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kvf_run(scenario: *const KvfScenario, n: usize, out: *mut *mut KvfRun) -> KvfStatus {
    guard(|| {
        let scenario = tri!(borrow(scenario, "scenario"));
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let prepared = Arc::clone(&scenario.0);
        let n = if n == 0 { prepared.scenario.finest_n() } else { n };
        let (trajectory, status) = match run(&prepared.model, &prepared.scenario.solver_config(n)) {
            Ok(t) => (t, KvfStatus::Ok),
            Err(f) => {
                let status = fail(KvfStatus::Solver, f.error.to_string());
                (*f.partial, status)
            }
        };
        let ledger = EnergyLedger::from_trajectory(&prepared.model.space, &prepared.model.loads, &trajectory);
        *out = Box::into_raw(Box::new(KvfRun { prepared, trajectory, ledger }));
        status
    })
}

/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kvf_run_free(run: *mut KvfRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of stored states (`n + 1` for a complete run).
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kvf_run_num_states(run: *const KvfRun) -> usize {
    run.as_ref().map_or(0, |r| r.trajectory.states.len())
}

/// Length of a displacement vector: two entries per node, `x` then `y`.
///
/// # Safety
/// `run` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kvf_run_field_len(run: *const KvfRun) -> usize {
    run.as_ref().map_or(0, |r| r.prepared.model.space.field_len())
}

/// Copies `u_k` into `buf`, which must hold `len` doubles with
/// `len == kvf_run_field_len(run)`.
///
/// # Safety
/// `run` must be a live handle and `buf` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn kvf_run_displacement(run: *const KvfRun, k: usize, buf: *mut f64, len: usize) -> KvfStatus {
    guard(|| {
        let run = tri!(borrow(run, "run"));
        if buf.is_null() {
            return fail(KvfStatus::NullPointer, "buf is null");
        }
        let Some(state) = run.trajectory.states.get(k) else {
            return fail(KvfStatus::OutOfRange, format!("step {k} not stored"));
        };
        if len != state.u.len() {
            return fail(
                KvfStatus::InvalidArgument,
                format!("buffer holds {len} values, field has {}", state.u.len()),
            );
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(&state.u);
        KvfStatus::Ok
    })
}

/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kvf_run_ledger_row(run: *const KvfRun, k: usize, out: *mut KvfLedgerRow) -> KvfStatus {
    guard(|| {
        let run = tri!(borrow(run, "run"));
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        let Some(r) = run.ledger.rows.get(k) else {
            return fail(KvfStatus::OutOfRange, format!("ledger has no row {k}"));
        };
        *out = KvfLedgerRow {
            k: r.k,
            t: r.t,
            kinetic: r.kinetic,
            elastic: r.elastic,
            viscous_cum: r.viscous_cum,
            work_cum: r.work_cum,
            crack_cum: r.crack_cum,
            residual_kv: r.residual_kv,
            residual_general: r.residual_general,
        };
        KvfStatus::Ok
    })
}

/// Writes the ledger as CSV.
///
/// # Safety
/// `run` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn kvf_run_write_ledger(run: *const KvfRun, path: *const c_char) -> KvfStatus {
    guard(|| {
        let run = tri!(borrow(run, "run"));
        let path = tri!(c_str(path, "path"));
        let written = File::create(path).and_then(|f| {
            let mut w = BufWriter::new(f);
            run.ledger.write_csv(&mut w)?;
            w.flush()
        });
        match written {
            Ok(()) => KvfStatus::Ok,
            Err(e) => fail(KvfStatus::Io, format!("{path}: {e}")),
        }
    })
}

/// Paradox check on this run. A NaN or non-positive `min_crack` selects the
/// scenario's setting, falling back to the shortest crack segment.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kvf_run_paradox(run: *const KvfRun, min_crack: f64, out: *mut KvfParadoxSummary) -> KvfStatus {
    guard(|| {
        let run = tri!(borrow(run, "run"));
        if out.is_null() {
            return fail(KvfStatus::NullPointer, "out is null");
        }
        let min_crack = if min_crack > 0.0 {
            Some(min_crack)
        } else {
            run.prepared.scenario.outputs.paradox_min_crack
        };
        let r = paradox_report(&run.ledger, &run.prepared.model.space, min_crack);
        *out = KvfParadoxSummary {
            verdict: r.verdict.into(),
            crack_final: r.crack_final,
            max_abs_residual: r.max_abs_residual,
            max_griffith_defect: r.max_griffith_defect,
            tolerance: r.tolerance,
            min_crack: r.min_crack,
        };
        KvfStatus::Ok
    })
}
