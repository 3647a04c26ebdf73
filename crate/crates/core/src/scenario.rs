//! Scenario files: topology, VC trees, traffic, and run parameters.
//!
//! The on-disk format is TOML; `docs/scenario-format.md` gives the grammar.
//! [`parse_scenario`] returns a validated [`Scenario`] with all names
//! resolved to indices.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consolidation::{AlgorithmId, DEFAULT_ALPHA};
use crate::endpoints::{SourceParams, TrafficModel, VbrBackground, DEFAULT_NRM, DEFAULT_RDF};
use crate::erica::EricaParams;

/// OC-3 payload rate once SONET overhead is removed.
pub const OC3_MBPS: f64 = 149.76;
/// Fiber propagation delay.
pub const PROPAGATION_US_PER_KM: f64 = 5.0;
pub const DEFAULT_QUEUE_SAMPLE_S: f64 = 1e-4;
pub const DEFAULT_BURST_CELLS: u64 = 3000;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(#[from] toml::de::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("duplicate {what} name {name:?}")]
    Duplicate { what: &'static str, name: String },
    #[error("{context}: unknown node {name:?}")]
    UnknownNode { context: String, name: String },
    #[error("link {link}: rate must be positive")]
    LinkRate { link: String },
    #[error("link {link}: length must be non-negative")]
    LinkLength { link: String },
    #[error("link {link}: endpoints must differ")]
    SelfLink { link: String },
    #[error("link between {a:?} and {b:?} declared twice")]
    ParallelLink { a: String, b: String },
    #[error("vc {vc}: no link between {a:?} and {b:?}")]
    NoLink { vc: String, a: String, b: String },
    #[error("vc {vc}: not a tree (node {node:?} has two parents)")]
    NotATree { vc: String, node: String },
    #[error("vc {vc}: {reason}")]
    BadRoute { vc: String, reason: String },
    #[error("vc {vc}: {source}")]
    Params {
        vc: String,
        source: crate::endpoints::SourceParamsError,
    },
    #[error("{field} {reason}")]
    Field { field: String, reason: String },
}

fn field_error(field: &str, reason: &str) -> ScenarioError {
    ScenarioError::Field {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub erica: EricaSection,
    #[serde(default)]
    pub links: LinkDefaults,
    #[serde(default, rename = "node")]
    pub nodes: Vec<NodeEntry>,
    #[serde(default, rename = "link")]
    pub link_list: Vec<LinkEntry>,
    #[serde(default, rename = "vc")]
    pub vcs: Vec<VcEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default = "default_algorithm")]
    pub algorithm: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_timeout_s: Option<f64>,
    #[serde(default = "default_queue_sample")]
    pub queue_sample_s: f64,
    /// Names of VCs whose convergence and noise are reported against their
    /// max-min fair rate. Empty means all ABR VCs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub report: Vec<String>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon_s: default_horizon(),
            algorithm: default_algorithm(),
            alpha: default_alpha(),
            branch_timeout_s: None,
            queue_sample_s: default_queue_sample(),
            report: Vec::new(),
        }
    }
}

fn default_horizon() -> f64 {
    0.2
}
fn default_algorithm() -> String {
    "A4".to_string()
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_queue_sample() -> f64 {
    DEFAULT_QUEUE_SAMPLE_S
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EricaSection {
    #[serde(default = "default_target_utilization")]
    pub target_utilization: f64,
    #[serde(default = "default_interval_cells")]
    pub interval_cells: u32,
    #[serde(default = "default_interval_s")]
    pub interval_s: f64,
    /// `inf` disables the gate.
    #[serde(default = "default_max_prev_z_limit")]
    pub max_prev_z_limit: f64,
    /// Take the CCR used for a backward cell from the latest forward RM
    /// cell of the VC instead of the backward cell itself.
    #[serde(default = "default_ccr_table")]
    pub ccr_table: bool,
}

impl Default for EricaSection {
    fn default() -> Self {
        Self {
            target_utilization: default_target_utilization(),
            interval_cells: default_interval_cells(),
            interval_s: default_interval_s(),
            max_prev_z_limit: default_max_prev_z_limit(),
            ccr_table: default_ccr_table(),
        }
    }
}

fn default_ccr_table() -> bool {
    true
}
fn default_max_prev_z_limit() -> f64 {
    crate::erica::DEFAULT_MAX_PREV_Z_LIMIT
}
fn default_target_utilization() -> f64 {
    0.9
}
fn default_interval_cells() -> u32 {
    100
}
fn default_interval_s() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDefaults {
    #[serde(default = "default_rate")]
    pub rate_mbps: f64,
    #[serde(default = "default_us_per_km")]
    pub propagation_us_per_km: f64,
}

impl Default for LinkDefaults {
    fn default() -> Self {
        Self {
            rate_mbps: default_rate(),
            propagation_us_per_km: default_us_per_km(),
        }
    }
}

fn default_rate() -> f64 {
    OC3_MBPS
}
fn default_us_per_km() -> f64 {
    PROPAGATION_US_PER_KM
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Source,
    Destination,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkEntry {
    pub a: String,
    pub b: String,
    pub length_km: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_mbps: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrafficEntry {
    #[default]
    Persistent,
    Bursty {
        #[serde(default = "default_burst")]
        burst_size_cells: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        request_latency_s: Option<f64>,
        #[serde(default)]
        think_time_s: f64,
    },
    Vbr {
        rate_mbps: f64,
        #[serde(default = "default_phase")]
        on_s: f64,
        #[serde(default = "default_phase")]
        off_s: f64,
    },
}

fn default_burst() -> u64 {
    DEFAULT_BURST_CELLS
}
fn default_phase() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VcEntry {
    pub name: String,
    /// Root-to-leaf node paths; their union is the VC tree.
    pub paths: Vec<Vec<String>>,
    #[serde(default)]
    pub traffic: TrafficEntry,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pcr_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icr_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcr_mbps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rif: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rdf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nrm: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tbe: Option<u64>,
}

// ---------------------------------------------------------------------------
// Validated scenario

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub name: String,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub a: usize,
    pub b: usize,
    pub rate_mbps: f64,
    pub length_km: f64,
    pub prop_delay_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcSpec {
    pub name: String,
    pub source: usize,
    /// Tree edges as (parent, child) node indices, in declaration order.
    pub edges: Vec<(usize, usize)>,
    /// Leaves in declaration order.
    pub leaves: Vec<usize>,
    pub params: SourceParams,
    pub traffic: TrafficModel,
    pub start_s: f64,
}

impl VcSpec {
    pub fn children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |(p, _)| *p == node)
            .map(|(_, c)| *c)
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.edges.iter().find(|(_, c)| *c == node).map(|(p, _)| *p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub horizon_s: f64,
    pub algorithm: AlgorithmId,
    pub alpha: f64,
    pub branch_timeout_s: Option<f64>,
    pub queue_sample_s: f64,
    pub erica: EricaParams,
    pub nodes: Vec<NodeSpec>,
    pub links: Vec<LinkSpec>,
    pub vcs: Vec<VcSpec>,
    /// VC indices whose metrics are reported.
    pub report: Vec<usize>,
    source_file: ScenarioFile,
}

impl Scenario {
    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn vc_index(&self, name: &str) -> Option<usize> {
        self.vcs.iter().position(|v| v.name == name)
    }

    pub fn link_between(&self, a: usize, b: usize) -> Option<usize> {
        self.links
            .iter()
            .position(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    pub fn set_algorithm(&mut self, algorithm: AlgorithmId) {
        self.algorithm = algorithm;
        self.source_file.simulation.algorithm = algorithm.to_string();
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<(), ScenarioError> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        self.source_file.simulation.alpha = alpha;
        Ok(())
    }

    pub fn set_horizon(&mut self, horizon_s: f64) -> Result<(), ScenarioError> {
        check_horizon(horizon_s)?;
        self.horizon_s = horizon_s;
        self.source_file.simulation.horizon_s = horizon_s;
        Ok(())
    }

    /// The fully resolved parameter set in file syntax.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.source_file).unwrap_or_default()
    }
}

fn check_alpha(alpha: f64) -> Result<(), ScenarioError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(field_error("simulation.alpha", "must lie in (0, 1)"))
    }
}

fn check_horizon(horizon: f64) -> Result<(), ScenarioError> {
    if horizon >= 0.0 && horizon.is_finite() {
        Ok(())
    } else {
        Err(field_error("simulation.horizon_s", "must be non-negative"))
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text)?;
    validate(file)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut scenario = parse_scenario(&text)?;
    if scenario.source_file.name.is_none() {
        if let Some(stem) = path.file_stem() {
            scenario.name = stem.to_string_lossy().into_owned();
            scenario.source_file.name = Some(scenario.name.clone());
        }
    }
    Ok(scenario)
}

// False for NaN as well.
fn positive(v: f64) -> bool {
    v > 0.0
}

fn non_negative(v: f64) -> bool {
    v >= 0.0
}

pub fn validate(mut file: ScenarioFile) -> Result<Scenario, ScenarioError> {
    let sim = &file.simulation;
    check_horizon(sim.horizon_s)?;
    check_alpha(sim.alpha)?;
    let algorithm: AlgorithmId =
        sim.algorithm
            .parse()
            .map_err(|e: crate::consolidation::ParseAlgorithmError| {
                field_error("simulation.algorithm", &e.to_string())
            })?;
    if !positive(sim.queue_sample_s) {
        return Err(field_error("simulation.queue_sample_s", "must be positive"));
    }
    if let Some(t) = sim.branch_timeout_s {
        if !positive(t) {
            return Err(field_error(
                "simulation.branch_timeout_s",
                "must be positive",
            ));
        }
    }
    let er = &file.erica;
    if !(er.target_utilization > 0.0 && er.target_utilization <= 1.0) {
        return Err(field_error(
            "erica.target_utilization",
            "must lie in (0, 1]",
        ));
    }
    if er.interval_cells == 0 {
        return Err(field_error("erica.interval_cells", "must be positive"));
    }
    if !positive(er.interval_s) {
        return Err(field_error("erica.interval_s", "must be positive"));
    }
    let erica = EricaParams {
        target_utilization: er.target_utilization,
        interval_cells: er.interval_cells,
        interval_s: er.interval_s,
        max_prev_z_limit: (er.max_prev_z_limit != f64::INFINITY).then_some(er.max_prev_z_limit),
        ccr_table: er.ccr_table,
    };
    if !erica.max_prev_z_limit.is_none_or(positive) {
        return Err(field_error("erica.max_prev_z_limit", "must be positive"));
    }
    if !positive(file.links.rate_mbps) {
        return Err(field_error("links.rate_mbps", "rate must be positive"));
    }
    if !non_negative(file.links.propagation_us_per_km) {
        return Err(field_error(
            "links.propagation_us_per_km",
            "must be non-negative",
        ));
    }

    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut nodes = Vec::new();
    for (i, n) in file.nodes.iter().enumerate() {
        if index.insert(n.name.as_str(), i).is_some() {
            return Err(ScenarioError::Duplicate {
                what: "node",
                name: n.name.clone(),
            });
        }
        nodes.push(NodeSpec {
            name: n.name.clone(),
            kind: n.kind,
        });
    }
    let lookup = |context: String, name: &str| -> Result<usize, ScenarioError> {
        index
            .get(name)
            .copied()
            .ok_or_else(|| ScenarioError::UnknownNode {
                context,
                name: name.to_string(),
            })
    };

    let mut links: Vec<LinkSpec> = Vec::new();
    for l in &file.link_list {
        let label = format!("{}-{}", l.a, l.b);
        let a = lookup(format!("link {label}"), &l.a)?;
        let b = lookup(format!("link {label}"), &l.b)?;
        if a == b {
            return Err(ScenarioError::SelfLink { link: label });
        }
        let rate = l.rate_mbps.unwrap_or(file.links.rate_mbps);
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(ScenarioError::LinkRate { link: label });
        }
        if !(l.length_km >= 0.0 && l.length_km.is_finite()) {
            return Err(ScenarioError::LinkLength { link: label });
        }
        if links
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return Err(ScenarioError::ParallelLink {
                a: l.a.clone(),
                b: l.b.clone(),
            });
        }
        links.push(LinkSpec {
            a,
            b,
            rate_mbps: rate,
            length_km: l.length_km,
            prop_delay_s: l.length_km * file.links.propagation_us_per_km * 1e-6,
        });
    }
    let has_link = |a: usize, b: usize| {
        links
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
    };

    let mut vcs = Vec::new();
    let mut vc_names: HashMap<&str, usize> = HashMap::new();
    let mut roots: HashMap<usize, &str> = HashMap::new();
    for (vi, v) in file.vcs.iter().enumerate() {
        if vc_names.insert(v.name.as_str(), vi).is_some() {
            return Err(ScenarioError::Duplicate {
                what: "vc",
                name: v.name.clone(),
            });
        }
        let bad = |reason: String| ScenarioError::BadRoute {
            vc: v.name.clone(),
            reason,
        };
        if v.paths.is_empty() {
            return Err(bad("needs at least one path".into()));
        }
        let mut source = None;
        let mut parent_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut leaves: Vec<usize> = Vec::new();
        for path in &v.paths {
            if path.len() < 2 {
                return Err(bad("a path needs at least two nodes".into()));
            }
            let ids = path
                .iter()
                .map(|n| lookup(format!("vc {}", v.name), n))
                .collect::<Result<Vec<_>, _>>()?;
            match source {
                None => source = Some(ids[0]),
                Some(s) if s != ids[0] => {
                    return Err(bad("all paths must start at the same source".into()))
                }
                _ => {}
            }
            for w in ids.windows(2) {
                let (p, c) = (w[0], w[1]);
                if !has_link(p, c) {
                    return Err(ScenarioError::NoLink {
                        vc: v.name.clone(),
                        a: nodes[p].name.clone(),
                        b: nodes[c].name.clone(),
                    });
                }
                match parent_of.get(&c) {
                    Some(&existing) if existing != p => {
                        return Err(ScenarioError::NotATree {
                            vc: v.name.clone(),
                            node: nodes[c].name.clone(),
                        })
                    }
                    Some(_) => {}
                    None => {
                        parent_of.insert(c, p);
                        edges.push((p, c));
                    }
                }
            }
            let leaf = *ids.last().expect("path has two nodes");
            if !leaves.contains(&leaf) {
                leaves.push(leaf);
            }
        }
        let source = source.expect("at least one path");
        if parent_of.contains_key(&source) {
            return Err(ScenarioError::NotATree {
                vc: v.name.clone(),
                node: nodes[source].name.clone(),
            });
        }
        // Walking parents from any node must reach the source.
        for &start in parent_of.keys() {
            let mut cur = start;
            let mut steps = 0;
            while cur != source {
                cur = parent_of[&cur];
                steps += 1;
                if steps > nodes.len() {
                    return Err(ScenarioError::NotATree {
                        vc: v.name.clone(),
                        node: nodes[start].name.clone(),
                    });
                }
            }
        }
        if nodes[source].kind != NodeKind::Source {
            return Err(bad(format!(
                "root {:?} is not a source node",
                nodes[source].name
            )));
        }
        if let Some(other) = roots.insert(source, v.name.as_str()) {
            return Err(bad(format!(
                "source node {:?} already roots vc {other}",
                nodes[source].name
            )));
        }
        for &(p, c) in &edges {
            let has_children = edges.iter().any(|(pp, _)| *pp == c);
            let kind = nodes[c].kind;
            if has_children && kind != NodeKind::Switch {
                return Err(bad(format!(
                    "interior node {:?} is not a switch",
                    nodes[c].name
                )));
            }
            if !has_children && kind != NodeKind::Destination {
                return Err(bad(format!(
                    "leaf {:?} is not a destination",
                    nodes[c].name
                )));
            }
            let _ = p;
        }
        // Leaves that also appear as interior nodes of a longer path are not leaves.
        leaves.retain(|l| !edges.iter().any(|(p, _)| p == l));

        let traffic = match &v.traffic {
            TrafficEntry::Persistent => TrafficModel::Persistent,
            TrafficEntry::Bursty {
                burst_size_cells,
                request_latency_s,
                think_time_s,
            } => {
                if *burst_size_cells == 0 {
                    return Err(bad("burst_size_cells must be positive".into()));
                }
                if *think_time_s < 0.0 || request_latency_s.is_some_and(|l| l < 0.0) {
                    return Err(bad("burst timing must be non-negative".into()));
                }
                TrafficModel::Bursty {
                    burst_size_cells: *burst_size_cells,
                    request_latency_s: *request_latency_s,
                    think_time_s: *think_time_s,
                }
            }
            TrafficEntry::Vbr {
                rate_mbps,
                on_s,
                off_s,
            } => {
                if !(*rate_mbps >= 0.0 && *on_s > 0.0 && *off_s >= 0.0) {
                    return Err(bad("vbr needs rate >= 0, on_s > 0, off_s >= 0".into()));
                }
                TrafficModel::VbrBackground(VbrBackground {
                    rate_mbps: *rate_mbps,
                    on_s: *on_s,
                    off_s: *off_s,
                })
            }
        };
        let pcr = v.pcr_mbps.unwrap_or(OC3_MBPS);
        let params = SourceParams {
            pcr,
            icr: v.icr_mbps.unwrap_or(pcr),
            rif: v.rif.unwrap_or(1.0),
            rdf: v.rdf.unwrap_or(DEFAULT_RDF),
            mcr: v.mcr_mbps.unwrap_or(0.0),
            nrm: v.nrm.unwrap_or(DEFAULT_NRM),
            tbe: v.tbe.unwrap_or(1 << 24),
        };
        params.validate().map_err(|source| ScenarioError::Params {
            vc: v.name.clone(),
            source,
        })?;
        if !non_negative(v.start_s) {
            return Err(bad("start_s must be non-negative".into()));
        }
        vcs.push(VcSpec {
            name: v.name.clone(),
            source,
            edges,
            leaves,
            params,
            traffic,
            start_s: v.start_s,
        });
    }

    let report = if file.simulation.report.is_empty() {
        vcs.iter()
            .enumerate()
            .filter(|(_, v)| v.traffic.is_abr())
            .map(|(i, _)| i)
            .collect()
    } else {
        file.simulation
            .report
            .iter()
            .map(|name| {
                vc_names.get(name.as_str()).copied().ok_or_else(|| {
                    field_error("simulation.report", &format!("unknown vc {name:?}"))
                })
            })
            .collect::<Result<Vec<_>, _>>()?
    };

    let name = file.name.clone().unwrap_or_else(|| "scenario".to_string());
    file.simulation.algorithm = algorithm.to_string();
    Ok(Scenario {
        name,
        horizon_s: file.simulation.horizon_s,
        algorithm,
        alpha: file.simulation.alpha,
        branch_timeout_s: file.simulation.branch_timeout_s,
        queue_sample_s: file.simulation.queue_sample_s,
        erica,
        nodes,
        links,
        vcs,
        report,
        source_file: file,
    })
}
