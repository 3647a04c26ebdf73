//! Trace recording and post-processing.

pub mod oracle;

use std::collections::BTreeMap;

use crate::cells::VcId;
use crate::consolidation::AlgorithmId;
use crate::scenario::{NodeKind, Scenario};
use oracle::{LoggedEvent, LoggedOutput, OracleConfig};

/// Piecewise-constant trace: each value holds from its time until the next
/// sample.
pub type Trace = Vec<(f64, f64)>;

/// Default relative tolerance above the fair rate before feedback counts as
/// noise.
pub const DEFAULT_NOISE_EPS: f64 = 0.05;
/// Length of the steady-state window at the end of a run.
pub const DEFAULT_NOISE_WINDOW_S: f64 = 0.05;
pub const DEFAULT_CONVERGENCE_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct SourceTrace {
    pub name: String,
    pub vc: VcId,
    /// Allowed cell rate after every change, starting at t = 0.
    pub acr: Trace,
    /// ER of every BRM delivered to the source.
    pub brm_er: Trace,
    /// Max-min fair rate of the VC under the scenario's ERICA capacities.
    pub reference_rate: Option<f64>,
    pub abr: bool,
    pub data_sent: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueTrace {
    pub port: String,
    /// (bin start, largest queue length seen in the bin).
    pub samples: Vec<(f64, u64)>,
    pub max_cells: u64,
    pub enqueued: u64,
    pub transmitted: u64,
    pub queued_at_end: u64,
}

/// Data cells of one VC as seen by one of its leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafDelivery {
    pub vc: VcId,
    pub leaf: String,
    pub delivered: u64,
    /// Every delivered cell carried the next payload tag in sequence.
    pub in_order: bool,
    /// Smallest emission-to-delivery delay observed.
    pub min_latency_s: Option<f64>,
    /// Copies bound for this leaf still queued or on a link at the end.
    pub in_flight: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RmCounts {
    pub frm_sent_by_source: u64,
    pub brm_received_by_source: u64,
    /// BRMs created inside the network by switches turning FRMs around.
    pub brm_in_network: u64,
    /// RM cells of the VC between the source and its first branch point
    /// (either direction) when the run ended.
    pub rm_in_flight_root: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmRatio {
    pub at_root: f64,
    pub in_network: f64,
}

/// Everything one branch point did for one VC.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPointLog {
    pub node: String,
    pub vc: VcId,
    pub config: OracleConfig,
    pub events: Vec<LoggedEvent>,
    pub outputs: Vec<LoggedOutput>,
    /// (time, skip_increase) after every change.
    pub skip_increase: Vec<(f64, u32)>,
    /// (time, frm_minus_brm) after every change.
    pub frm_minus_brm: Vec<(f64, i64)>,
    /// BRMs sent before every branch reported.
    pub early_sends: u64,
}

impl BranchPointLog {
    pub fn max_skip_increase(&self) -> u32 {
        self.skip_increase.iter().map(|s| s.1).max().unwrap_or(0)
    }

    pub fn final_skip_increase(&self) -> u32 {
        self.skip_increase.last().map_or(0, |s| s.1)
    }

    pub fn max_abs_frm_minus_brm(&self) -> i64 {
        self.frm_minus_brm
            .iter()
            .map(|s| s.1.abs())
            .max()
            .unwrap_or(0)
    }

    /// Emitted BRMs in order.
    pub fn emitted(&self) -> impl Iterator<Item = &crate::cells::RmCell> {
        self.outputs.iter().filter_map(|o| match o {
            LoggedOutput::Emitted(c) => Some(c),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsBundle {
    pub scenario: String,
    pub algorithm: Option<AlgorithmId>,
    pub horizon_s: f64,
    pub sources: Vec<SourceTrace>,
    pub queues: Vec<QueueTrace>,
    pub rm_counts: BTreeMap<VcId, RmCounts>,
    pub branch_points: Vec<BranchPointLog>,
    pub leaves: Vec<LeafDelivery>,
    /// Names of the sources whose metrics the scenario asks to report.
    pub report: Vec<String>,
    pub saturated_intervals: u64,
    pub events_processed: u64,
}

impl MetricsBundle {
    pub fn source(&self, name: &str) -> Option<&SourceTrace> {
        self.sources.iter().find(|s| s.name == name)
    }

    pub fn queue(&self, port: &str) -> Option<&QueueTrace> {
        self.queues.iter().find(|q| q.port == port)
    }

    pub fn max_queue(&self) -> u64 {
        self.queues.iter().map(|q| q.max_cells).max().unwrap_or(0)
    }

    /// Noise index of a source over the last `window_s` of the run.
    pub fn noise(&self, name: &str, eps: f64, window_s: f64) -> Option<f64> {
        let src = self.source(name)?;
        let reference = src.reference_rate?;
        let start = (self.horizon_s - window_s).max(0.0);
        Some(noise_index(
            &src.brm_er,
            reference,
            eps,
            (start, self.horizon_s),
        ))
    }

    pub fn convergence(&self, name: &str, tol: f64) -> Option<f64> {
        let src = self.source(name)?;
        convergence_time(&src.acr, src.reference_rate?, tol)
    }

    /// Delivered BRMs above the noise threshold.
    pub fn noise_events(&self, eps: f64) -> Vec<NoiseEvent> {
        let mut out = Vec::new();
        for src in &self.sources {
            let Some(reference) = src.reference_rate else {
                continue;
            };
            for &(t, er) in &src.brm_er {
                if er > reference * (1.0 + eps) {
                    out.push(NoiseEvent {
                        source: src.name.clone(),
                        time: t,
                        er,
                        reference,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEvent {
    pub source: String,
    pub time: f64,
    pub er: f64,
    pub reference: f64,
}

/// Fraction of BRMs delivered inside `window` whose ER exceeds
/// `reference * (1 + eps)`. Zero when no BRM falls in the window.
///
/// This is an operational definition: the feedback a source gets should
/// never promise more than the true bottleneck rate once the run settles.
pub fn noise_index(brm_er: &[(f64, f64)], reference: f64, eps: f64, window: (f64, f64)) -> f64 {
    let (start, end) = window;
    let threshold = reference * (1.0 + eps);
    let (mut total, mut noisy) = (0u64, 0u64);
    for &(t, er) in brm_er {
        if t >= start && t <= end {
            total += 1;
            if er > threshold {
                noisy += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        noisy as f64 / total as f64
    }
}

pub fn brm_frm_ratio(counts: &RmCounts) -> Option<RmRatio> {
    if counts.frm_sent_by_source == 0 {
        return None;
    }
    let frm = counts.frm_sent_by_source as f64;
    Some(RmRatio {
        at_root: counts.brm_received_by_source as f64 / frm,
        in_network: counts.brm_in_network as f64 / frm,
    })
}

/// First time after which the trace stays within `reference * (1 ± tol)`
/// until its end. `None` when the final value is outside the band.
pub fn convergence_time(trace: &[(f64, f64)], reference: f64, tol: f64) -> Option<f64> {
    let band = reference * tol;
    let inside = |v: f64| (v - reference).abs() <= band;
    let mut since = None;
    for &(t, v) in trace {
        if inside(v) {
            since.get_or_insert(t);
        } else {
            since = None;
        }
    }
    since
}

/// Max-min fair rates of every VC, by progressive filling over the switch
/// output ports the VC trees use. Each port offers its ERICA capacity
/// (target utilization times link rate, less the mean background load);
/// ABR VCs are further capped at their PCR. Background VCs get `None`.
pub fn max_min_fair_rates(scenario: &Scenario) -> Vec<Option<f64>> {
    let util = scenario.erica.target_utilization;
    // Resource = directed link (parent -> child) leaving a switch.
    let mut capacity: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut users: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (vi, vc) in scenario.vcs.iter().enumerate() {
        for &(p, c) in &vc.edges {
            if scenario.nodes[p].kind != NodeKind::Switch {
                continue;
            }
            let link = scenario.link_between(p, c).expect("validated link");
            let cap = capacity
                .entry((p, c))
                .or_insert(util * scenario.links[link].rate_mbps);
            match vc.traffic {
                crate::endpoints::TrafficModel::VbrBackground(v) => *cap -= v.mean_rate(),
                _ => users.entry((p, c)).or_default().push(vi),
            }
        }
    }
    let mut rate: Vec<Option<f64>> = vec![None; scenario.vcs.len()];
    let mut frozen = vec![false; scenario.vcs.len()];
    let abr: Vec<usize> = (0..scenario.vcs.len())
        .filter(|&i| scenario.vcs[i].traffic.is_abr())
        .collect();
    let mut level = 0.0f64;
    loop {
        let open: Vec<usize> = abr.iter().copied().filter(|&i| !frozen[i]).collect();
        if open.is_empty() {
            break;
        }
        // Largest uniform increment every open VC can take.
        let mut step = f64::INFINITY;
        for (res, us) in &users {
            let n_open = us.iter().filter(|&&u| !frozen[u]).count();
            if n_open == 0 {
                continue;
            }
            let used: f64 = us
                .iter()
                .map(|&u| {
                    if frozen[u] {
                        rate[u].unwrap_or(0.0)
                    } else {
                        level
                    }
                })
                .sum();
            let spare = (capacity[res] - used).max(0.0);
            step = step.min(spare / n_open as f64);
        }
        for &i in &open {
            step = step.min(scenario.vcs[i].params.pcr - level);
        }
        level += step.max(0.0);
        let mut froze_any = false;
        for &i in &open {
            if scenario.vcs[i].params.pcr - level <= 1e-9 {
                frozen[i] = true;
                rate[i] = Some(scenario.vcs[i].params.pcr);
                froze_any = true;
            }
        }
        for (res, us) in &users {
            let used: f64 = us
                .iter()
                .map(|&u| {
                    if frozen[u] {
                        rate[u].unwrap_or(0.0)
                    } else {
                        level
                    }
                })
                .sum();
            if capacity[res] - used <= 1e-9 {
                for &u in us {
                    if !frozen[u] {
                        frozen[u] = true;
                        rate[u] = Some(level);
                        froze_any = true;
                    }
                }
            }
        }
        if !froze_any {
            // Unconstrained VCs (no switch ports): they get their PCR.
            for &i in &open {
                frozen[i] = true;
                rate[i] = Some(scenario.vcs[i].params.pcr);
            }
        }
    }
    rate
}

/// Bins queue-length changes into fixed-width intervals, keeping the largest
/// value seen in each.
#[derive(Debug, Clone)]
pub struct QueueRecorder {
    bin_s: f64,
    current_bin: Option<u64>,
    current_max: u64,
    pub samples: Vec<(f64, u64)>,
    pub max_cells: u64,
}

impl QueueRecorder {
    pub fn new(bin_s: f64) -> Self {
        Self {
            bin_s,
            current_bin: None,
            current_max: 0,
            samples: Vec::new(),
            max_cells: 0,
        }
    }

    pub fn record(&mut self, now: f64, len: u64) {
        self.max_cells = self.max_cells.max(len);
        let bin = (now / self.bin_s).floor() as u64;
        match self.current_bin {
            Some(b) if b == bin => self.current_max = self.current_max.max(len),
            _ => {
                self.flush();
                self.current_bin = Some(bin);
                self.current_max = len;
            }
        }
    }

    fn flush(&mut self) {
        if let Some(b) = self.current_bin {
            self.samples.push((b as f64 * self.bin_s, self.current_max));
        }
    }

    pub fn finish(mut self) -> (Vec<(f64, u64)>, u64) {
        self.flush();
        (self.samples, self.max_cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    #[test]
    fn constant_trace_has_no_noise() {
        let trace: Trace = (0..100).map(|i| (i as f64 * 1e-3, 67.392)).collect();
        assert_eq!(noise_index(&trace, 67.392, 0.05, (0.0, 1.0)), 0.0);
    }

    #[test]
    fn noise_counts_only_window() {
        let trace = vec![(0.0, 140.0), (0.5, 140.0), (0.6, 60.0), (0.7, 71.0)];
        assert_eq!(noise_index(&trace, 67.392, 0.05, (0.4, 1.0)), 2.0 / 3.0);
        assert_eq!(noise_index(&trace, 67.392, 0.05, (2.0, 3.0)), 0.0);
    }

    #[test]
    fn convergence_of_step() {
        let trace = vec![(0.0, 149.76), (0.02, 67.392), (0.05, 67.0)];
        assert_eq!(convergence_time(&trace, 67.392, 0.1), Some(0.02));
    }

    #[test]
    fn oscillation_never_converges() {
        let trace: Trace = (0..50)
            .map(|i| (i as f64 * 1e-3, if i % 2 == 0 { 140.0 } else { 30.0 }))
            .collect();
        assert_eq!(convergence_time(&trace, 67.392, 0.1), None);
    }

    #[test]
    fn convergence_from_start() {
        assert_eq!(convergence_time(&[(0.0, 67.0)], 67.392, 0.1), Some(0.0));
        assert_eq!(convergence_time(&[], 67.392, 0.1), None);
    }

    #[test]
    fn ratio() {
        let c = RmCounts {
            frm_sent_by_source: 100,
            brm_received_by_source: 99,
            brm_in_network: 200,
            rm_in_flight_root: 1,
        };
        let r = brm_frm_ratio(&c).unwrap();
        assert_eq!(r.at_root, 0.99);
        assert_eq!(r.in_network, 2.0);
        assert!(brm_frm_ratio(&RmCounts::default()).is_none());
    }

    #[test]
    fn recorder_bins() {
        let mut r = QueueRecorder::new(1e-4);
        r.record(0.0, 1);
        r.record(0.5e-4, 3);
        r.record(0.9e-4, 2);
        r.record(2.5e-4, 7);
        let (samples, max) = r.finish();
        assert_eq!(samples, vec![(0.0, 3), (2e-4, 7)]);
        assert_eq!(max, 7);
    }

    fn two_on_one() -> Scenario {
        parse_scenario(
            r#"
[[node]]
name = "A"
kind = "source"
[[node]]
name = "B"
kind = "source"
[[node]]
name = "X"
kind = "switch"
[[node]]
name = "Y"
kind = "switch"
[[node]]
name = "dA"
kind = "destination"
[[node]]
name = "dB"
kind = "destination"
[[link]]
a = "A"
b = "X"
length_km = 1
[[link]]
a = "B"
b = "X"
length_km = 1
[[link]]
a = "X"
b = "Y"
length_km = 1
[[link]]
a = "Y"
b = "dA"
length_km = 1
[[link]]
a = "Y"
b = "dB"
length_km = 1
rate_mbps = 20
[[vc]]
name = "A"
paths = [["A", "X", "Y", "dA"]]
[[vc]]
name = "B"
paths = [["B", "X", "Y", "dB"]]
"#,
        )
        .unwrap()
    }

    #[test]
    fn water_filling() {
        let s = two_on_one();
        let r = max_min_fair_rates(&s);
        // B is held to 0.9 * 20 = 18 on its own link; A takes the rest of
        // 134.784.
        assert!((r[1].unwrap() - 18.0).abs() < 1e-9);
        assert!((r[0].unwrap() - (134.784 - 18.0)).abs() < 1e-9);
    }
}
