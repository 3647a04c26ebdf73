use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use abrsim_ffi::*;

fn scenario_path(name: &str) -> CString {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.scn"));
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(abr_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn rm(forward: bool, er: f64) -> AbrRmCell {
    AbrRmCell {
        vc: 0,
        forward,
        er,
        ci: false,
        ni: false,
        ccr: er,
        seq: 0,
    }
}

#[test]
fn run_through_the_c_api_matches_the_library() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(
            abr_scenario_load(scenario_path("fairness").as_ptr(), &mut s),
            AbrStatus::Ok
        );
        assert_eq!(abr_scenario_set_horizon(s, 0.05), AbrStatus::Ok);
        let mut run = ptr::null_mut();
        assert_eq!(abr_run(s, &mut run), AbrStatus::Ok);
        abr_scenario_free(s);

        let mut n = 0;
        assert_eq!(abr_run_source_count(run, &mut n), AbrStatus::Ok);
        assert_eq!(n, 2);
        let mut name = ptr::null();
        assert_eq!(abr_run_source_name(run, 0, &mut name), AbrStatus::Ok);
        assert_eq!(CStr::from_ptr(name).to_str().unwrap(), "A");
        assert_eq!(abr_run_source_name(run, 2, &mut name), AbrStatus::NotFound);

        let mut total = 0;
        assert_eq!(
            abr_run_acr_trace(run, name, ptr::null_mut(), ptr::null_mut(), 0, &mut total),
            AbrStatus::Ok
        );
        let (mut t, mut v) = (vec![0.0; total], vec![0.0; total]);
        assert_eq!(
            abr_run_acr_trace(run, name, t.as_mut_ptr(), v.as_mut_ptr(), total, &mut total),
            AbrStatus::Ok
        );

        let mut lib =
            abrsim::load_scenario(&PathBuf::from(scenario_path("fairness").to_str().unwrap()))
                .unwrap();
        lib.set_horizon(0.05).unwrap();
        let bundle = abrsim::run(&lib).unwrap();
        let expected = &bundle.source("A").unwrap().acr;
        assert_eq!(t.into_iter().zip(v).collect::<Vec<_>>(), *expected);

        let mut conv = 0.0;
        assert_eq!(
            abr_run_convergence_time(run, name, 0.05, &mut conv),
            AbrStatus::Ok
        );
        assert_eq!(Some(conv), bundle.convergence("A", 0.05));
        let mut counts = AbrRmCounts {
            frm_sent_by_source: 0,
            brm_received_by_source: 0,
            brm_in_network: 0,
            rm_in_flight_root: 0,
        };
        assert_eq!(abr_run_rm_counts(run, name, &mut counts), AbrStatus::Ok);
        assert_eq!(
            counts.frm_sent_by_source,
            bundle.rm_counts[&bundle.source("A").unwrap().vc].frm_sent_by_source
        );

        let dir = tempfile::tempdir().unwrap();
        let cdir = CString::new(dir.path().to_str().unwrap()).unwrap();
        assert_eq!(abr_run_write_csv(run, cdir.as_ptr()), AbrStatus::Ok);
        assert!(dir.path().join("acr_A.csv").exists());
        abr_run_free(run);
    }
}

#[test]
fn errors_are_reported_with_a_message() {
    unsafe {
        let mut s = ptr::null_mut();
        let bad = CString::new("[[link]]\na = \"x\"\nb = \"y\"\nlength_km = 1\n").unwrap();
        assert_eq!(
            abr_scenario_parse(bad.as_ptr(), &mut s),
            AbrStatus::Scenario
        );
        assert!(s.is_null());
        assert!(last_error().contains("unknown node"), "{}", last_error());

        assert_eq!(
            abr_scenario_parse(ptr::null(), &mut s),
            AbrStatus::NullPointer
        );
        let missing = CString::new("/nonexistent.scn").unwrap();
        assert_eq!(
            abr_scenario_load(missing.as_ptr(), &mut s),
            AbrStatus::Scenario
        );
        assert_eq!(
            abr_scenario_load(scenario_path("chain").as_ptr(), &mut s),
            AbrStatus::Ok
        );
        assert_eq!(last_error(), "");
        assert_eq!(abr_scenario_set_algorithm(s, 9), AbrStatus::InvalidArgument);
        assert_eq!(
            abr_scenario_set_horizon(s, -1.0),
            AbrStatus::InvalidArgument
        );
        assert_eq!(abr_scenario_set_alpha(s, 1.5), AbrStatus::InvalidArgument);
        assert_eq!(abr_run(s, ptr::null_mut()), AbrStatus::NullPointer);
        abr_scenario_free(s);
        abr_scenario_free(ptr::null_mut());
        abr_run_free(ptr::null_mut());
        abr_branch_point_free(ptr::null_mut());

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            abr_scenario_parse(invalid.as_ptr().cast(), &mut s),
            AbrStatus::InvalidUtf8
        );
    }
}

#[test]
fn branch_point_handle_consolidates() {
    unsafe {
        let mut bp = ptr::null_mut();
        assert_eq!(
            abr_branch_point_new(4, 0, 149.76, 149.76, 0.95, &mut bp),
            AbrStatus::Consolidation
        );
        assert_eq!(
            abr_branch_point_new(4, 2, 149.76, 149.76, 0.95, &mut bp),
            AbrStatus::Ok
        );
        let mut a = std::mem::zeroed::<AbrActions>();
        assert_eq!(
            abr_branch_point_on_frm(bp, &rm(true, 149.76), &mut a),
            AbrStatus::Ok
        );
        assert!(a.multicast_frm && !a.has_brm);
        assert_eq!(
            abr_branch_point_on_brm(bp, 0, &rm(false, 70.0), f64::NAN, &mut a),
            AbrStatus::Ok
        );
        assert!(!a.has_brm);
        assert_eq!(
            abr_branch_point_on_brm(bp, 1, &rm(false, 30.0), f64::NAN, &mut a),
            AbrStatus::Ok
        );
        assert!(a.has_brm);
        assert_eq!(a.brm.er, 30.0);
        let mut sent = rm(false, 0.0);
        assert_eq!(
            abr_branch_point_on_brm_scheduled(bp, &a.brm, 20.0, &mut sent),
            AbrStatus::Ok
        );
        assert_eq!(sent.er, 20.0);
        assert_eq!(
            abr_branch_point_on_brm(bp, 5, &rm(false, 30.0), f64::NAN, &mut a),
            AbrStatus::Consolidation
        );
        assert!(last_error().contains("out of range"));
        assert_eq!(
            abr_branch_point_on_frm(bp, &rm(false, 30.0), &mut a),
            AbrStatus::Consolidation
        );
        let mut c = std::mem::zeroed::<AbrBranchCounters>();
        assert_eq!(abr_branch_point_counters(bp, &mut c), AbrStatus::Ok);
        assert_eq!(c.brms_received, 0);
        abr_branch_point_free(bp);

        assert_eq!(
            abr_branch_point_new(7, 2, 149.76, 149.76, 0.95, &mut bp),
            AbrStatus::Ok
        );
        assert_eq!(
            abr_branch_point_on_brm(bp, 0, &rm(false, 30.0), f64::NAN, &mut a),
            AbrStatus::Consolidation
        );
        assert_eq!(
            abr_branch_point_on_brm(bp, 0, &rm(false, 30.0), 100.0, &mut a),
            AbrStatus::Ok
        );
        assert_eq!(abr_branch_point_force_round(bp, &mut a), AbrStatus::Ok);
        assert!(a.has_brm);
        abr_branch_point_free(bp);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(abr_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_declares_the_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/abrsim.h")).unwrap();
    for symbol in [
        "ABR_STATUS_OK = 0",
        "typedef struct AbrScenario AbrScenario",
        "abr_run(const struct AbrScenario *scenario, struct AbrRun **out)",
        "abr_branch_point_on_brm(",
        "const char *abr_last_error(void)",
    ] {
        assert!(header.contains(symbol), "{symbol}");
    }
}

/// Compiles the C example against the header and static library, when a C
/// compiler is available.
#[test]
fn c_program_links_and_runs() {
    let Ok(exe) = std::env::current_exe() else {
        return;
    };
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libabrsim_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no cc or {} missing", lib.display());
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("examples/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin)
        .arg(manifest.join("../../scenarios/fairness.scn"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(
        stdout.contains("A converged at") && stdout.contains("max queue"),
        "{stdout}"
    );
}
