//! C ABI for the abrsim simulator.
//!
//! Every function returns an [`AbrStatus`]. On failure a message describing
//! the error is kept per thread and can be read with [`abr_last_error`].
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use abrsim::cells::{CellKind, RmCell, VcId};
use abrsim::consolidation::{AlgorithmId, BranchPoint, ConsolidationActions};
use abrsim::metrics::{DEFAULT_NOISE_EPS, DEFAULT_NOISE_WINDOW_S};
use abrsim::{output, MetricsBundle, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Scenario = 4,
    Simulation = 5,
    Io = 6,
    NotFound = 7,
    Consolidation = 8,
    Panic = 99,
}

/// A validated scenario.
pub struct AbrScenario(Scenario);

/// The traces of one finished run.
pub struct AbrRun {
    scenario: Scenario,
    bundle: MetricsBundle,
    names: Vec<CString>,
}

/// Consolidation state of one VC at one branch point.
pub struct AbrBranchPoint(BranchPoint);

/// A resource-management cell. `forward` selects FRM (true) or BRM.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrRmCell {
    pub vc: u32,
    pub forward: bool,
    pub er: f64,
    pub ci: bool,
    pub ni: bool,
    pub ccr: f64,
    pub seq: u64,
}

/// Result of handing a cell to a branch point. `brm` is meaningful only
/// when `has_brm` is set.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbrActions {
    pub multicast_frm: bool,
    pub discard: bool,
    pub has_brm: bool,
    pub brm: AbrRmCell,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbrRmCounts {
    pub frm_sent_by_source: u64,
    pub brm_received_by_source: u64,
    pub brm_in_network: u64,
    pub rm_in_flight_root: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AbrBranchCounters {
    pub skip_increase: u32,
    pub frm_minus_brm: i64,
    pub brms_received: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

type Failure = (AbrStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AbrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AbrStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            AbrStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| (AbrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn reference_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| (AbrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((AbrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| (AbrStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err((AbrStatus::NullPointer, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn algorithm(n: u8) -> Result<AlgorithmId, Failure> {
    AlgorithmId::from_number(n).ok_or_else(|| {
        (
            AbrStatus::InvalidArgument,
            format!("unknown algorithm {n}, expected 1..7"),
        )
    })
}

/// Message for the last failed call on this thread, or an empty string.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn abr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses scenario text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_parse(
    text: *const c_char,
    out: *mut *mut AbrScenario,
) -> AbrStatus {
    guard(|| {
        let text = string(text, "text")?;
        let s = abrsim::parse_scenario(text).map_err(|e| (AbrStatus::Scenario, e.to_string()))?;
        write(out, Box::into_raw(Box::new(AbrScenario(s))), "out")
    })
}

/// Loads a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_load(
    path: *const c_char,
    out: *mut *mut AbrScenario,
) -> AbrStatus {
    guard(|| {
        let path = string(path, "path")?;
        let s = abrsim::load_scenario(Path::new(path))
            .map_err(|e| (AbrStatus::Scenario, e.to_string()))?;
        write(out, Box::into_raw(Box::new(AbrScenario(s))), "out")
    })
}

/// Selects the consolidation algorithm, 1 to 7.
///
/// # Safety
/// `scenario` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_set_algorithm(
    scenario: *mut AbrScenario,
    algorithm_number: u8,
) -> AbrStatus {
    guard(|| {
        let s = reference_mut(scenario, "scenario")?;
        s.0.set_algorithm(algorithm(algorithm_number)?);
        Ok(())
    })
}

/// # Safety
/// `scenario` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_set_horizon(
    scenario: *mut AbrScenario,
    horizon_s: f64,
) -> AbrStatus {
    guard(|| {
        let s = reference_mut(scenario, "scenario")?;
        s.0.set_horizon(horizon_s)
            .map_err(|e| (AbrStatus::InvalidArgument, e.to_string()))
    })
}

/// # Safety
/// `scenario` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_set_alpha(
    scenario: *mut AbrScenario,
    alpha: f64,
) -> AbrStatus {
    guard(|| {
        let s = reference_mut(scenario, "scenario")?;
        s.0.set_alpha(alpha)
            .map_err(|e| (AbrStatus::InvalidArgument, e.to_string()))
    })
}

/// Frees a scenario. Null is ignored.
///
/// # Safety
/// `scenario` must come from this library and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn abr_scenario_free(scenario: *mut AbrScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Simulates a scenario up to its horizon.
///
/// # Safety
/// `scenario` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_run(scenario: *const AbrScenario, out: *mut *mut AbrRun) -> AbrStatus {
    guard(|| {
        let s = reference(scenario, "scenario")?;
        if out.is_null() {
            return Err((AbrStatus::NullPointer, "out is null".into()));
        }
        let bundle = abrsim::run(&s.0).map_err(|e| (AbrStatus::Simulation, e.to_string()))?;
        let names = bundle
            .sources
            .iter()
            .map(|src| CString::new(src.name.as_str()).unwrap_or_default())
            .collect();
        let run = AbrRun {
            scenario: s.0.clone(),
            bundle,
            names,
        };
        write(out, Box::into_raw(Box::new(run)), "out")
    })
}

/// Frees a run. Null is ignored.
///
/// # Safety
/// `run` must come from this library and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn abr_run_free(run: *mut AbrRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Writes the run's CSV files into `dir`, creating it if needed.
///
/// # Safety
/// `run` must come from this library and `dir` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abr_run_write_csv(run: *const AbrRun, dir: *const c_char) -> AbrStatus {
    guard(|| {
        let r = reference(run, "run")?;
        let dir = string(dir, "dir")?;
        output::write_outputs(&r.bundle, &r.scenario, Path::new(dir))
            .map(drop)
            .map_err(|e| (AbrStatus::Io, e.to_string()))
    })
}

/// Number of sources, ABR and background, in the run.
///
/// # Safety
/// `run` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_run_source_count(run: *const AbrRun, out: *mut usize) -> AbrStatus {
    guard(|| {
        let r = reference(run, "run")?;
        write(out, r.bundle.sources.len(), "out")
    })
}

/// Name of source `index`. The string lives as long as the run.
///
/// # Safety
/// `run` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_run_source_name(
    run: *const AbrRun,
    index: usize,
    out: *mut *const c_char,
) -> AbrStatus {
    guard(|| {
        let r = reference(run, "run")?;
        let name = r.names.get(index).ok_or_else(|| {
            (
                AbrStatus::NotFound,
                format!("source index {index} out of range"),
            )
        })?;
        write(out, name.as_ptr(), "out")
    })
}

unsafe fn source<'a>(
    run: *const AbrRun,
    name: *const c_char,
) -> Result<(&'a AbrRun, &'a abrsim::metrics::SourceTrace), Failure> {
    let r = reference(run, "run")?;
    let name = string(name, "source")?;
    let src = r
        .bundle
        .source(name)
        .ok_or_else(|| (AbrStatus::NotFound, format!("no source named {name:?}")))?;
    Ok((r, src))
}

/// Copies up to `capacity` ACR samples of a source into `times` and
/// `rates_mbps`. `total` receives the full trace length, so a call with
/// `capacity` 0 and null buffers asks for the size.
///
/// # Safety
/// The buffers must hold `capacity` doubles each, or be null when
/// `capacity` is 0.
#[no_mangle]
pub unsafe extern "C" fn abr_run_acr_trace(
    run: *const AbrRun,
    name: *const c_char,
    times: *mut f64,
    rates_mbps: *mut f64,
    capacity: usize,
    total: *mut usize,
) -> AbrStatus {
    guard(|| {
        let (_, src) = source(run, name)?;
        if capacity > 0 && (times.is_null() || rates_mbps.is_null()) {
            return Err((AbrStatus::NullPointer, "trace buffer is null".into()));
        }
        for (i, &(t, v)) in src.acr.iter().take(capacity).enumerate() {
            times.add(i).write(t);
            rates_mbps.add(i).write(v);
        }
        write(total, src.acr.len(), "total")
    })
}

/// Fraction of BRMs reaching the source in the final 50 ms whose ER
/// exceeds the max-min fair rate by more than 5%.
///
/// # Safety
/// `run` must come from this library, `name` be a NUL-terminated string
/// and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_run_noise_index(
    run: *const AbrRun,
    name: *const c_char,
    out: *mut f64,
) -> AbrStatus {
    guard(|| {
        let (r, src) = source(run, name)?;
        let v = r
            .bundle
            .noise(&src.name, DEFAULT_NOISE_EPS, DEFAULT_NOISE_WINDOW_S)
            .ok_or_else(|| {
                (
                    AbrStatus::NotFound,
                    format!("{} has no fair rate", src.name),
                )
            })?;
        write(out, v, "out")
    })
}

/// Time after which the source's ACR stays within `tol` of its fair rate.
/// Returns `NotFound` when it never settles.
///
/// # Safety
/// `run` must come from this library, `name` be a NUL-terminated string
/// and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_run_convergence_time(
    run: *const AbrRun,
    name: *const c_char,
    tol: f64,
    out: *mut f64,
) -> AbrStatus {
    guard(|| {
        let (r, src) = source(run, name)?;
        let v = r.bundle.convergence(&src.name, tol).ok_or_else(|| {
            (
                AbrStatus::NotFound,
                format!("{} did not converge", src.name),
            )
        })?;
        write(out, v, "out")
    })
}

/// # Safety
/// `run` must come from this library, `name` be a NUL-terminated string
/// and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_run_rm_counts(
    run: *const AbrRun,
    name: *const c_char,
    out: *mut AbrRmCounts,
) -> AbrStatus {
    guard(|| {
        let (r, src) = source(run, name)?;
        let c = r.bundle.rm_counts.get(&src.vc).copied().unwrap_or_default();
        let counts = AbrRmCounts {
            frm_sent_by_source: c.frm_sent_by_source,
            brm_received_by_source: c.brm_received_by_source,
            brm_in_network: c.brm_in_network,
            rm_in_flight_root: c.rm_in_flight_root,
        };
        write(out, counts, "out")
    })
}

/// Largest queue, in cells, seen at any switch port.
///
/// # Safety
/// `run` must come from this library and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_run_max_queue(run: *const AbrRun, out: *mut u64) -> AbrStatus {
    guard(|| {
        let r = reference(run, "run")?;
        write(out, r.bundle.max_queue(), "out")
    })
}

fn to_core(c: &AbrRmCell) -> RmCell {
    RmCell {
        vc: VcId(c.vc),
        kind: if c.forward {
            CellKind::ForwardRm
        } else {
            CellKind::BackwardRm
        },
        er: c.er,
        ci: c.ci,
        ni: c.ni,
        ccr: c.ccr,
        seq: c.seq,
    }
}

fn from_core(c: &RmCell) -> AbrRmCell {
    AbrRmCell {
        vc: c.vc.0,
        forward: c.kind == CellKind::ForwardRm,
        er: c.er,
        ci: c.ci,
        ni: c.ni,
        ccr: c.ccr,
        seq: c.seq,
    }
}

fn actions(a: ConsolidationActions) -> AbrActions {
    AbrActions {
        multicast_frm: a.multicast_frm,
        discard: a.discard,
        has_brm: a.return_brm.is_some(),
        brm: a.return_brm.as_ref().map(from_core).unwrap_or(AbrRmCell {
            vc: 0,
            forward: false,
            er: 0.0,
            ci: false,
            ni: false,
            ccr: 0.0,
            seq: 0,
        }),
    }
}

/// Creates a branch point running algorithm 1 to 7 over `branches`
/// branches. Rates are in Mbps.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abr_branch_point_new(
    algorithm_number: u8,
    branches: usize,
    pcr_mbps: f64,
    icr_mbps: f64,
    alpha: f64,
    out: *mut *mut AbrBranchPoint,
) -> AbrStatus {
    guard(|| {
        let alg = algorithm(algorithm_number)?;
        let bp = BranchPoint::new(alg, branches, pcr_mbps, icr_mbps, alpha)
            .map_err(|e| (AbrStatus::Consolidation, e.to_string()))?;
        write(out, Box::into_raw(Box::new(AbrBranchPoint(bp))), "out")
    })
}

/// Frees a branch point. Null is ignored.
///
/// # Safety
/// `bp` must come from this library and not be freed already.
#[no_mangle]
pub unsafe extern "C" fn abr_branch_point_free(bp: *mut AbrBranchPoint) {
    if !bp.is_null() {
        drop(Box::from_raw(bp));
    }
}

/// An FRM arrived from the root side.
///
/// # Safety
/// All pointers must be valid; `bp` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn abr_branch_point_on_frm(
    bp: *mut AbrBranchPoint,
    cell: *const AbrRmCell,
    out: *mut AbrActions,
) -> AbrStatus {
    guard(|| {
        let bp = reference_mut(bp, "bp")?;
        let cell = to_core(reference(cell, "cell")?);
        let a =
            bp.0.on_frm(&cell)
                .map_err(|e| (AbrStatus::Consolidation, e.to_string()))?;
        write(out, actions(a), "out")
    })
}

/// A BRM arrived from `branch`. Pass NaN for `local_er_mbps` unless the
/// algorithm is 7, which requires it.
///
/// # Safety
/// All pointers must be valid; `bp` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn abr_branch_point_on_brm(
    bp: *mut AbrBranchPoint,
    branch: usize,
    cell: *const AbrRmCell,
    local_er_mbps: f64,
    out: *mut AbrActions,
) -> AbrStatus {
    guard(|| {
        let bp = reference_mut(bp, "bp")?;
        let cell = to_core(reference(cell, "cell")?);
        let local = (!local_er_mbps.is_nan()).then_some(local_er_mbps);
        let a =
            bp.0.on_brm(branch, &cell, local)
                .map_err(|e| (AbrStatus::Consolidation, e.to_string()))?;
        write(out, actions(a), "out")
    })
}

/// A returned BRM is leaving toward the root through a port offering
/// `erica_er_mbps`. Writes the cell as sent.
///
/// # Safety
/// All pointers must be valid; `bp` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn abr_branch_point_on_brm_scheduled(
    bp: *mut AbrBranchPoint,
    cell: *const AbrRmCell,
    erica_er_mbps: f64,
    out: *mut AbrRmCell,
) -> AbrStatus {
    guard(|| {
        let bp = reference_mut(bp, "bp")?;
        let cell = to_core(reference(cell, "cell")?);
        let sent = bp.0.on_brm_scheduled(cell, erica_er_mbps);
        write(out, from_core(&sent), "out")
    })
}

/// Ends the current round with what has been collected so far, as a
/// round timer would. `has_brm` tells whether a BRM was produced.
///
/// # Safety
/// All pointers must be valid; `bp` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn abr_branch_point_force_round(
    bp: *mut AbrBranchPoint,
    out: *mut AbrActions,
) -> AbrStatus {
    guard(|| {
        let bp = reference_mut(bp, "bp")?;
        let brm = bp.0.force_round_completion();
        let a = ConsolidationActions {
            return_brm: brm,
            ..ConsolidationActions::default()
        };
        write(out, actions(a), "out")
    })
}

/// # Safety
/// All pointers must be valid; `bp` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn abr_branch_point_counters(
    bp: *const AbrBranchPoint,
    out: *mut AbrBranchCounters,
) -> AbrStatus {
    guard(|| {
        let st = &reference(bp, "bp")?.0.state;
        let counters = AbrBranchCounters {
            skip_increase: st.skip_increase,
            frm_minus_brm: st.frm_minus_brm,
            brms_received: st.number_of_brms_received,
        };
        write(out, counters, "out")
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn abr_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}
