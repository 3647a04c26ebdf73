#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::PathBuf;

use abrsim::cells::cell_time;
use abrsim::metrics::oracle::LoggedEvent;
use abrsim::metrics::BranchPointLog;
use abrsim::{load_scenario, run, AlgorithmId, BranchPoint, MetricsBundle, Scenario};

pub const SHIPPED: [&str; 5] = [
    "chain",
    "modified_chain",
    "fairness",
    "parking_lot",
    "overload",
];

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.scn"))
}

pub fn scenario(name: &str) -> Scenario {
    load_scenario(&scenario_path(name)).expect("shipped scenario loads")
}

pub fn run_with(name: &str, alg: AlgorithmId, horizon: Option<f64>) -> MetricsBundle {
    let mut s = scenario(name);
    s.set_algorithm(alg);
    if let Some(h) = horizon {
        s.set_horizon(h).unwrap();
    }
    run(&s).expect("run succeeds")
}

/// Replays a branch point log one event at a time and reports every
/// emission that breaks the gating rule of its algorithm:
/// A1 answers each FRM with exactly one BRM, A2 only answers an FRM after
/// some branch reported, A4 only passes a BRM once every branch reported.
pub fn gating_violations(log: &BranchPointLog) -> Vec<String> {
    let cfg = log.config;
    let mut bp = BranchPoint::new(cfg.algorithm, cfg.branches, cfg.pcr, cfg.icr, cfg.alpha)
        .expect("valid config");
    let mut reported = vec![false; cfg.branches];
    let mut brm_since_emit = false;
    let mut pending = VecDeque::new();
    let mut bad = Vec::new();
    for (i, ev) in log.events.iter().enumerate() {
        let emitted = match *ev {
            LoggedEvent::Frm(cell) => bp.on_frm(&cell).expect("valid FRM").return_brm,
            LoggedEvent::Brm {
                branch,
                cell,
                local_er,
            } => {
                reported[branch] = true;
                brm_since_emit = true;
                bp.on_brm(branch, &cell, local_er)
                    .expect("valid BRM")
                    .return_brm
            }
            LoggedEvent::Scheduled { erica_er } => {
                if let Some(cell) = pending.pop_front() {
                    bp.on_brm_scheduled(cell, erica_er);
                }
                None
            }
            LoggedEvent::Timeout => {
                let out = bp.force_round_completion();
                if out.is_some() {
                    reported.fill(false);
                }
                out
            }
        };
        let is_frm = matches!(ev, LoggedEvent::Frm(_));
        let is_brm = matches!(ev, LoggedEvent::Brm { .. });
        match cfg.algorithm {
            AlgorithmId::A1 => {
                if is_frm != emitted.is_some() || (is_brm && emitted.is_some()) {
                    bad.push(format!("{}: A1 event {i} emitted {:?}", log.node, emitted));
                }
            }
            AlgorithmId::A2 => {
                if emitted.is_some() {
                    if !is_frm || !brm_since_emit {
                        bad.push(format!(
                            "{}: A2 emitted at event {i} without a report",
                            log.node
                        ));
                    }
                    brm_since_emit = false;
                }
            }
            AlgorithmId::A4 if emitted.is_some() && is_brm => {
                if !reported.iter().all(|&r| r) {
                    bad.push(format!(
                        "{}: A4 emitted at event {i} with {reported:?}",
                        log.node
                    ));
                }
                reported.fill(false);
            }
            _ => {}
        }
        if let Some(c) = emitted {
            pending.push_back(c);
        }
    }
    bad
}

/// Shortest possible emission-to-delivery time from the VC source to
/// `leaf`: serialization plus propagation on every hop.
pub fn min_path_latency(s: &Scenario, vc: usize, leaf: &str) -> f64 {
    let spec = &s.vcs[vc];
    let mut node = s
        .nodes
        .iter()
        .position(|n| n.name == leaf)
        .expect("leaf exists");
    let mut total = 0.0;
    while let Some(p) = spec.parent(node) {
        let link = &s.links[s.link_between(p, node).expect("tree edge has a link")];
        total += cell_time(link.rate_mbps) + link.prop_delay_s;
        node = p;
    }
    total
}
