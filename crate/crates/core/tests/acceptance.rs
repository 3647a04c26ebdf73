//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are printed even when everything passes.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use abrsim::check::full_check;
use abrsim::consolidation::BranchPoint;
use abrsim::metrics::oracle::LoggedEvent;
use abrsim::metrics::{BranchPointLog, DEFAULT_NOISE_EPS, DEFAULT_NOISE_WINDOW_S};
use abrsim::output::run_and_emit;
use abrsim::{AlgorithmId, MetricsBundle, Scenario};
use common::{gating_violations, scenario, SHIPPED};
use sha2::{Digest, Sha256};

use AlgorithmId::*;

const FAIR: f64 = 67.392;
/// FRM cells per second from a source at PCR: 149.76 Mbps / 424 bits / 32.
const FRM_RATE_AT_PCR: f64 = 149.76e6 / 424.0 / 32.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Every simulation run by this target, kept for the gating check.
#[derive(Default)]
struct Runs {
    done: Vec<(String, MetricsBundle)>,
}

impl Runs {
    fn run(&mut self, name: &str, alg: AlgorithmId) -> MetricsBundle {
        let mut s = scenario(name);
        s.set_algorithm(alg);
        let b = abrsim::run(&s).expect("run succeeds");
        self.done.push((format!("{name}/{alg}"), b.clone()));
        b
    }
}

fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    value >= target / factor && value <= target * factor
}

fn ms(v: Option<f64>) -> String {
    v.map_or("none".into(), |v| format!("{:.1}ms", v * 1e3))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let report = full_check(10_000, 1);
    let secs = start.elapsed().as_secs_f64();
    outcome(
        report.mismatch_count == 0 && secs < 60.0,
        format!(
            "{} sequences, {} mismatches, {secs:.1}s",
            report.sequences, report.mismatch_count
        ),
    )
}

fn criterion_3(runs: &mut Runs) -> Outcome {
    let start = Instant::now();
    let b = runs.run("fairness", A4);
    let secs = start.elapsed().as_secs_f64();
    let mut pass = secs < 10.0;
    let mut detail = Vec::new();
    for src in &b.sources {
        let reference_ok = src.reference_rate.is_some_and(|r| (r - FAIR).abs() < 1e-9);
        let conv = abrsim::metrics::convergence_time(&src.acr, FAIR, 0.05);
        pass &= reference_ok && conv.is_some_and(|t| t <= 0.05);
        let last = src.acr.last().map_or(f64::NAN, |s| s.1);
        detail.push(format!(
            "{} within 5% from {} (final {last:.3})",
            src.name,
            ms(conv)
        ));
    }
    detail.push(format!("wall {secs:.2}s"));
    outcome(pass, detail.join(", "))
}

/// Time-weighted mean and peak-to-peak of a piecewise-constant trace over
/// `[from, to]`.
fn window_stats(trace: &[(f64, f64)], from: f64, to: f64) -> (f64, f64) {
    let mut area = 0.0;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &(t, v)) in trace.iter().enumerate() {
        let end = trace.get(i + 1).map_or(to, |n| n.0).min(to);
        let begin = t.max(from);
        if end <= begin {
            continue;
        }
        area += v * (end - begin);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (area / (to - from), hi - lo)
}

fn criterion_4(chain: &BTreeMap<AlgorithmId, MetricsBundle>) -> Outcome {
    let noise = |alg: AlgorithmId| {
        chain[&alg]
            .noise("S1", DEFAULT_NOISE_EPS, DEFAULT_NOISE_WINDOW_S)
            .unwrap_or(f64::NAN)
    };
    let mut pass = noise(A1) > 0.1 && noise(A3) > 0.1;
    pass &= [A4, A5, A6, A7].iter().all(|&a| noise(a) == 0.0);
    let a3 = &chain[&A3];
    let h = a3.horizon_s;
    let (mean, p2p) = window_stats(&a3.source("S1").unwrap().brm_er, h - 0.05, h);
    pass &= p2p > 20.0 && (mean - 103.0).abs() <= 0.25 * 103.0;
    let list: Vec<String> = AlgorithmId::ALL
        .iter()
        .map(|&a| format!("{a}={:.3}", noise(a)))
        .collect();
    outcome(
        pass,
        format!(
            "noise {}; A3 S1 ER mean {mean:.1} p2p {p2p:.1}",
            list.join(" ")
        ),
    )
}

fn criterion_5(modified: &BTreeMap<AlgorithmId, MetricsBundle>) -> Outcome {
    let conv = |a: AlgorithmId| modified[&a].convergence("S1", 0.1);
    let (Some(a4), Some(a5), Some(a6), Some(a7)) = (conv(A4), conv(A5), conv(A6), conv(A7)) else {
        return outcome(
            false,
            format!(
                "did not converge: A4 {} A5 {} A6 {} A7 {}",
                ms(conv(A4)),
                ms(conv(A5)),
                ms(conv(A6)),
                ms(conv(A7))
            ),
        );
    };
    let pass = a7 < a5.min(a6)
        && a5.max(a6) < a4
        && within_factor(a5 / a6, 1.0, 2.0)
        && a7 < 0.01
        && within_factor(a5, 0.02, 2.0)
        && within_factor(a6, 0.02, 2.0);
    outcome(
        pass,
        format!(
            "A7 {} < A5 {} ~ A6 {} < A4 {}",
            ms(Some(a7)),
            ms(Some(a5)),
            ms(Some(a6)),
            ms(Some(a4))
        ),
    )
}

fn criterion_6(modified: &BTreeMap<AlgorithmId, MetricsBundle>) -> Outcome {
    let q = |a: AlgorithmId| modified[&a].max_queue() as f64;
    let pass = q(A7) < q(A5).min(q(A6))
        && q(A5).max(q(A6)) < q(A4)
        && within_factor(q(A7), 3500.0, 2.0)
        && within_factor(q(A5), 7000.0, 2.0)
        && within_factor(q(A6), 7000.0, 2.0)
        && q(A4) > 16000.0 / 2.0;
    outcome(
        pass,
        format!(
            "max queue A7 {} < A5 {} / A6 {} < A4 {} cells",
            q(A7),
            q(A5),
            q(A6),
            q(A4)
        ),
    )
}

/// Longest source-to-leaf-and-back propagation delay of a VC tree.
fn tree_round_trip(s: &Scenario, vc: usize) -> f64 {
    let spec = &s.vcs[vc];
    spec.leaves
        .iter()
        .map(|&leaf| {
            let mut node = leaf;
            let mut one_way = 0.0;
            while let Some(p) = spec.parent(node) {
                one_way += s.links[s.link_between(p, node).unwrap()].prop_delay_s;
                node = p;
            }
            2.0 * one_way
        })
        .fold(0.0, f64::max)
}

/// Replays a log and reports whether frm_minus_brm ever went negative
/// while skip_increase was 0.
fn negative_without_skip(log: &BranchPointLog) -> bool {
    let cfg = log.config;
    let mut bp =
        BranchPoint::new(cfg.algorithm, cfg.branches, cfg.pcr, cfg.icr, cfg.alpha).unwrap();
    for ev in &log.events {
        match *ev {
            LoggedEvent::Frm(c) => {
                bp.on_frm(&c).unwrap();
            }
            LoggedEvent::Brm {
                branch,
                cell,
                local_er,
            } => {
                bp.on_brm(branch, &cell, local_er).unwrap();
            }
            LoggedEvent::Timeout => {
                bp.force_round_completion();
            }
            LoggedEvent::Scheduled { .. } => {}
        }
        if bp.state.skip_increase == 0 && bp.state.frm_minus_brm < 0 {
            return true;
        }
    }
    false
}

fn criterion_7(
    runs: &mut Runs,
    chain: &BTreeMap<AlgorithmId, MetricsBundle>,
    modified: &BTreeMap<AlgorithmId, MetricsBundle>,
) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    let s1 = |b: &MetricsBundle| b.rm_counts[&b.source("S1").unwrap().vc];

    let c = s1(&chain[&A1]);
    let conserved = c.brm_received_by_source + c.rm_in_flight_root == c.frm_sent_by_source;
    pass &= conserved;
    detail.push(format!(
        "A1 {}+{} in flight of {}",
        c.brm_received_by_source, c.rm_in_flight_root, c.frm_sent_by_source
    ));
    let c = s1(&chain[&A2]);
    pass &= c.brm_received_by_source < c.frm_sent_by_source;
    detail.push(format!(
        "A2 {}/{}",
        c.brm_received_by_source, c.frm_sent_by_source
    ));
    for alg in [A3, A4] {
        let c = s1(&chain[&alg]);
        pass &= c.brm_received_by_source <= c.frm_sent_by_source;
        detail.push(format!(
            "{alg} {}/{}",
            c.brm_received_by_source, c.frm_sent_by_source
        ));
    }

    let overload = runs.run("overload", A5);
    let min_fmb = overload
        .branch_points
        .iter()
        .flat_map(|l| l.frm_minus_brm.iter().map(|s| s.1))
        .min()
        .unwrap_or(0);
    pass &= min_fmb < 0;
    detail.push(format!("A5 overload min frm-brm {min_fmb}"));

    for (name, runs) in [("chain", chain), ("modified_chain", modified)] {
        let s = scenario(name);
        for alg in [A6, A7] {
            for log in &runs[&alg].branch_points {
                let bound = 2.0 * FRM_RATE_AT_PCR * tree_round_trip(&s, log.vc.0 as usize);
                let abs = log.max_abs_frm_minus_brm();
                let skip = log.max_skip_increase();
                let ok = (abs as f64) <= bound
                    && skip <= 5
                    && log.final_skip_increase() == 0
                    && !negative_without_skip(log);
                pass &= ok;
                detail.push(format!(
                    "{name} {alg} {} |frm-brm| {abs}<={bound:.0} skip max {skip} final {}",
                    log.node,
                    log.final_skip_increase()
                ));
            }
        }
    }
    outcome(pass, detail.join("; "))
}

fn criterion_2(runs: &Runs) -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (label, b) in &runs.done {
        for log in &b.branch_points {
            checked += 1;
            bad.extend(
                gating_violations(log)
                    .into_iter()
                    .map(|v| format!("{label}: {v}")),
            );
        }
    }
    let detail = match bad.first() {
        None => format!("{checked} branch point logs from {} runs", runs.done.len()),
        Some(first) => format!("{} violations, first {first}", bad.len()),
    };
    outcome(bad.is_empty(), detail)
}

fn hash_outputs(name: &str) -> BTreeMap<String, Vec<u8>> {
    let dir = tempfile::tempdir().unwrap();
    run_and_emit(&scenario(name), dir.path()).expect("run writes files");
    let mut hashes = BTreeMap::new();
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let digest = Sha256::digest(fs::read(&path).unwrap());
        hashes.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            digest.to_vec(),
        );
    }
    hashes
}

fn criterion_8() -> Outcome {
    let mut files = 0;
    let mut differing = Vec::new();
    for name in SHIPPED {
        let a = hash_outputs(name);
        let b = hash_outputs(name);
        files += a.len();
        if a != b || a.is_empty() {
            differing.push(name);
        }
    }
    outcome(
        differing.is_empty(),
        format!("{files} CSV files hashed twice, differing scenarios {differing:?}"),
    )
}

fn main() -> ExitCode {
    let mut runs = Runs::default();
    let chain: BTreeMap<_, _> = AlgorithmId::ALL
        .iter()
        .map(|&a| (a, runs.run("chain", a)))
        .collect();
    let modified: BTreeMap<_, _> = AlgorithmId::ALL
        .iter()
        .map(|&a| (a, runs.run("modified_chain", a)))
        .collect();
    for name in ["parking_lot", "overload"] {
        for alg in [A1, A2, A4] {
            runs.run(name, alg);
        }
    }

    let mut results = vec![
        (1, "oracle equivalence", criterion_1()),
        (3, "ERICA fairness", criterion_3(&mut runs)),
        (4, "chain noise", criterion_4(&chain)),
        (5, "transient ordering", criterion_5(&modified)),
        (6, "queue ordering", criterion_6(&modified)),
        (7, "RM ratios", criterion_7(&mut runs, &chain, &modified)),
        (8, "determinism", criterion_8()),
    ];
    results.insert(1, (2, "gating invariants", criterion_2(&runs)));

    let mut failed = 0;
    for (n, title, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {n} ({title}): {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
