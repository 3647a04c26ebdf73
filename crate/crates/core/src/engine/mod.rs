//! Deterministic cell-level discrete-event simulation.
//!
//! Every link is full duplex; each direction is an output port with an
//! unbounded FIFO shared by all VCs, its own ERICA measurement state and a
//! queue-length recorder. Forward cells follow the VC tree from the source
//! to its leaves, BRMs walk the tree edges back. ERICA stamps a BRM when
//! it starts transmission at a switch, using the ports that carry the VC
//! forward from that switch.

mod events;

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::cells::{cell_time, Cell, CellKind, RmCell, VcId};
use crate::consolidation::{BranchPoint, ConsolidationError};
use crate::endpoints::{destination_receive, Emission, SourceParams, SourceState, TrafficModel};
use crate::erica::EricaPortState;
use crate::metrics::oracle::{LoggedEvent, LoggedOutput, OracleConfig};
use crate::metrics::{
    max_min_fair_rates, BranchPointLog, LeafDelivery, MetricsBundle, QueueRecorder, QueueTrace,
    RmCounts, SourceTrace, Trace,
};
use crate::scenario::{NodeKind, Scenario};
use events::{EventKind, EventQueue, NodeId, PortId};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("vc {vc} has no route at node {node}")]
    Routing { vc: String, node: String },
    #[error("branch point {node} for vc {vc}: {source}")]
    Consolidation {
        vc: String,
        node: String,
        source: ConsolidationError,
    },
}

struct Port {
    node: NodeId,
    peer: NodeId,
    rate: f64,
    prop_delay: f64,
    name: String,
    queue: VecDeque<Cell>,
    busy: bool,
    erica: EricaPortState,
    erica_epoch: u64,
    recorder: QueueRecorder,
    enqueued: u64,
    transmitted: u64,
}

/// Routing of one VC at one node.
#[derive(Debug, Clone, Default)]
struct Hop {
    up_port: Option<PortId>,
    down: Vec<(NodeId, PortId)>,
    branch: Option<usize>,
}

struct VcRuntime {
    name: String,
    id: VcId,
    abr: bool,
    params: SourceParams,
    source_node: NodeId,
    source: SourceState,
    start_s: f64,
    emit_generation: u64,
    emit_pending: bool,
    hops: Vec<Option<Hop>>,
    client_leaf: Option<NodeId>,
    request_delay: f64,
    root_segment: HashSet<PortId>,
    acr: Trace,
    brm_er: Trace,
    counts: RmCounts,
    /// Per leaf: ports from the source down to it, and what it received.
    leaves: Vec<(HashSet<PortId>, LeafDelivery)>,
}

struct BranchRuntime {
    vc: usize,
    node: NodeId,
    bp: BranchPoint,
    last_epoch: u64,
    log: BranchPointLog,
}

/// Simulates `scenario` from t = 0 up to its horizon.
pub fn run(scenario: &Scenario) -> Result<MetricsBundle, EngineError> {
    let mut sim = Simulator::new(scenario)?;
    sim.run()?;
    Ok(sim.finish())
}

struct Simulator<'a> {
    scenario: &'a Scenario,
    now: f64,
    queue: EventQueue,
    ports: Vec<Port>,
    vcs: Vec<VcRuntime>,
    branches: Vec<BranchRuntime>,
    events_processed: u64,
}

impl<'a> Simulator<'a> {
    fn new(scenario: &'a Scenario) -> Result<Self, EngineError> {
        let mut ports = Vec::new();
        let mut port_of: HashMap<(NodeId, NodeId), PortId> = HashMap::new();
        for link in &scenario.links {
            for (node, peer) in [(link.a, link.b), (link.b, link.a)] {
                port_of.insert((node, peer), ports.len());
                ports.push(Port {
                    node,
                    peer,
                    rate: link.rate_mbps,
                    prop_delay: link.prop_delay_s,
                    name: format!(
                        "{}-{}",
                        scenario.nodes[node].name, scenario.nodes[peer].name
                    ),
                    queue: VecDeque::new(),
                    busy: false,
                    erica: EricaPortState::new(scenario.erica, link.rate_mbps),
                    erica_epoch: 0,
                    recorder: QueueRecorder::new(scenario.queue_sample_s),
                    enqueued: 0,
                    transmitted: 0,
                });
            }
        }

        let mut vcs = Vec::new();
        let mut branches = Vec::new();
        for (vi, spec) in scenario.vcs.iter().enumerate() {
            let mut hops: Vec<Option<Hop>> = vec![None; scenario.nodes.len()];
            hops[spec.source] = Some(Hop::default());
            for &(p, c) in &spec.edges {
                hops[p]
                    .get_or_insert_with(Hop::default)
                    .down
                    .push((c, port_of[&(p, c)]));
                hops[c].get_or_insert_with(Hop::default).up_port = Some(port_of[&(c, p)]);
            }
            for (node, hop) in hops.iter_mut().enumerate() {
                let Some(hop) = hop else { continue };
                if spec.traffic.is_abr()
                    && scenario.nodes[node].kind == NodeKind::Switch
                    && hop.down.len() > 1
                {
                    let bp = BranchPoint::new(
                        scenario.algorithm,
                        hop.down.len(),
                        spec.params.pcr,
                        spec.params.icr,
                        scenario.alpha,
                    )
                    .map_err(|source| EngineError::Consolidation {
                        vc: spec.name.clone(),
                        node: scenario.nodes[node].name.clone(),
                        source,
                    })?;
                    hop.branch = Some(branches.len());
                    branches.push(BranchRuntime {
                        vc: vi,
                        node,
                        bp,
                        last_epoch: 0,
                        log: BranchPointLog {
                            node: scenario.nodes[node].name.clone(),
                            vc: VcId(vi as u32),
                            config: OracleConfig {
                                algorithm: scenario.algorithm,
                                branches: hop.down.len(),
                                pcr: spec.params.pcr,
                                icr: spec.params.icr,
                                alpha: scenario.alpha,
                            },
                            events: Vec::new(),
                            outputs: Vec::new(),
                            skip_increase: vec![(0.0, 0)],
                            frm_minus_brm: vec![(0.0, 0)],
                            early_sends: 0,
                        },
                    });
                }
            }

            // Ports between the source and the first branch point, both ways.
            let mut root_segment = HashSet::new();
            let mut node = spec.source;
            loop {
                let hop = hops[node].as_ref().expect("tree node");
                if let Some(up) = hop.up_port {
                    root_segment.insert(up);
                }
                if hop.branch.is_some() {
                    break;
                }
                match hop.down.as_slice() {
                    [(child, port)] => {
                        root_segment.insert(*port);
                        node = *child;
                    }
                    _ => break,
                }
            }

            let client_leaf = spec.leaves.first().copied();
            let request_delay = match spec.traffic {
                TrafficModel::Bursty {
                    request_latency_s,
                    think_time_s,
                    ..
                } => {
                    let path_delay = client_leaf
                        .map(|leaf| path_delay(scenario, spec.source, leaf, |n| spec.parent(n)))
                        .unwrap_or(0.0);
                    request_latency_s.unwrap_or(path_delay) + think_time_s
                }
                _ => 0.0,
            };

            let id = VcId(vi as u32);
            let leaves = spec
                .leaves
                .iter()
                .map(|&leaf| {
                    let mut path = HashSet::new();
                    let mut node = leaf;
                    while let Some(p) = spec.parent(node) {
                        path.insert(port_of[&(p, node)]);
                        node = p;
                    }
                    let delivery = LeafDelivery {
                        vc: id,
                        leaf: scenario.nodes[leaf].name.clone(),
                        delivered: 0,
                        in_order: true,
                        min_latency_s: None,
                        in_flight: 0,
                    };
                    (path, delivery)
                })
                .collect();
            vcs.push(VcRuntime {
                name: spec.name.clone(),
                id,
                abr: spec.traffic.is_abr(),
                params: spec.params,
                source_node: spec.source,
                source: SourceState::new(id, &spec.params, spec.traffic),
                start_s: spec.start_s,
                emit_generation: 0,
                emit_pending: false,
                hops,
                client_leaf,
                request_delay,
                root_segment,
                acr: Vec::new(),
                brm_er: Vec::new(),
                counts: RmCounts::default(),
                leaves,
            });
        }

        Ok(Self {
            scenario,
            now: 0.0,
            queue: EventQueue::default(),
            ports,
            vcs,
            branches,
            events_processed: 0,
        })
    }

    fn run(&mut self) -> Result<(), EngineError> {
        let interval_s = self.scenario.erica.interval_s;
        for port in 0..self.ports.len() {
            self.queue
                .schedule(interval_s, EventKind::IntervalTimer { port, epoch: 0 });
        }
        let horizon = self.scenario.horizon_s;
        for vi in 0..self.vcs.len() {
            let vc = &mut self.vcs[vi];
            let start = vc.start_s;
            if vc.abr && start < horizon {
                vc.acr.push((start, vc.source.acr));
            }
            match vc.source.traffic {
                TrafficModel::Bursty { .. } => {
                    let at = start + vc.request_delay;
                    self.queue.schedule(at, EventKind::BurstRequest { vc: vi });
                }
                _ => {
                    vc.emit_pending = true;
                    let generation = vc.emit_generation;
                    self.queue
                        .schedule(start, EventKind::SourceEmit { vc: vi, generation });
                }
            }
        }

        while let Some(ev) = self.queue.pop() {
            if ev.time >= horizon {
                // Keep it for in-flight accounting.
                self.queue.schedule(ev.time, ev.kind);
                break;
            }
            debug_assert!(ev.time >= self.now, "event scheduled in the past");
            self.now = ev.time;
            self.events_processed += 1;
            match ev.kind {
                EventKind::Arrival {
                    node, from, cell, ..
                } => self.on_arrival(node, from, cell)?,
                EventKind::TransmitComplete { port } => {
                    self.ports[port].busy = false;
                    self.start_transmission(port);
                }
                EventKind::IntervalTimer { port, epoch } => {
                    if self.ports[port].erica_epoch == epoch {
                        self.close_interval(port);
                    }
                }
                EventKind::SourceEmit { vc, generation } => {
                    if self.vcs[vc].emit_generation == generation {
                        self.emit(vc);
                    }
                }
                EventKind::BurstRequest { vc } => {
                    self.vcs[vc].source.start_burst();
                    if !self.vcs[vc].emit_pending {
                        self.reschedule_emission(vc);
                    }
                }
                EventKind::RoundTimeout { branch, epoch } => self.on_round_timeout(branch, epoch),
            }
        }
        Ok(())
    }

    fn close_interval(&mut self, port: PortId) {
        let now = self.now;
        let p = &mut self.ports[port];
        p.erica.close_interval(now);
        p.erica_epoch += 1;
        let epoch = p.erica_epoch;
        self.queue.schedule(
            now + self.scenario.erica.interval_s,
            EventKind::IntervalTimer { port, epoch },
        );
    }

    fn enqueue(&mut self, port: PortId, cell: Cell) {
        let abr = self.vcs[cell.vc().0 as usize].abr;
        let now = self.now;
        let p = &mut self.ports[port];
        let full = p.erica.record_arrival(cell.vc(), abr);
        if let Cell::Rm(rm) = &cell {
            if rm.kind == CellKind::ForwardRm {
                p.erica.note_frm(rm);
            }
        }
        p.queue.push_back(cell);
        p.enqueued += 1;
        p.recorder.record(now, p.queue.len() as u64);
        if full {
            self.close_interval(port);
        }
        if !self.ports[port].busy {
            self.start_transmission(port);
        }
    }

    fn start_transmission(&mut self, port: PortId) {
        let now = self.now;
        let Some(mut cell) = self.ports[port].queue.pop_front() else {
            return;
        };
        {
            let p = &mut self.ports[port];
            p.recorder.record(now, p.queue.len() as u64);
        }
        if let Cell::Rm(rm) = cell {
            if rm.is_backward() {
                cell = Cell::Rm(self.stamp_departing_brm(port, rm));
            }
        }
        let p = &mut self.ports[port];
        p.busy = true;
        p.transmitted += 1;
        let tx = cell_time(p.rate);
        let (node, peer, prop) = (p.node, p.peer, p.prop_delay);
        self.queue
            .schedule(now + tx, EventKind::TransmitComplete { port });
        self.queue.schedule(
            now + tx + prop,
            EventKind::Arrival {
                node: peer,
                from: node,
                via: port,
                cell,
            },
        );
    }

    /// ERICA (and, at branch points, the consolidation epilogue) applied to
    /// a BRM about to leave `port`.
    fn stamp_departing_brm(&mut self, port: PortId, rm: RmCell) -> RmCell {
        let node = self.ports[port].node;
        if self.scenario.nodes[node].kind != NodeKind::Switch {
            return rm;
        }
        let vi = rm.vc.0 as usize;
        let Some(hop) = self.vcs[vi].hops[node].as_ref() else {
            return rm;
        };
        match hop.branch {
            Some(b) => {
                let down: Vec<PortId> = hop.down.iter().map(|d| d.1).collect();
                let erica_er = down
                    .iter()
                    .map(|&p| self.ports[p].erica.compute_er_for(&rm))
                    .fold(f64::INFINITY, f64::min);
                let br = &mut self.branches[b];
                let out = br.bp.on_brm_scheduled(rm, erica_er);
                br.log.events.push(LoggedEvent::Scheduled { erica_er });
                br.log.outputs.push(LoggedOutput::Scheduled(out));
                out
            }
            None => match hop.down.as_slice() {
                [(_, p)] => {
                    let p = *p;
                    self.ports[p].erica.stamp_brm(rm)
                }
                _ => rm,
            },
        }
    }

    fn hop(&self, vi: usize, node: NodeId) -> Result<&Hop, EngineError> {
        self.vcs[vi].hops[node]
            .as_ref()
            .ok_or_else(|| EngineError::Routing {
                vc: self.vcs[vi].name.clone(),
                node: self.scenario.nodes[node].name.clone(),
            })
    }

    fn on_arrival(&mut self, node: NodeId, from: NodeId, cell: Cell) -> Result<(), EngineError> {
        let vi = cell.vc().0 as usize;
        match self.scenario.nodes[node].kind {
            NodeKind::Source => {
                if let Cell::Rm(rm) = cell {
                    if rm.is_backward() && self.vcs[vi].source_node == node {
                        self.on_source_brm(vi, &rm);
                    }
                }
                Ok(())
            }
            NodeKind::Destination => {
                let up = self.hop(vi, node)?.up_port;
                match cell {
                    Cell::Data(d) => {
                        let now = self.now;
                        let vc = &mut self.vcs[vi];
                        let leaf_name = &self.scenario.nodes[node].name;
                        if let Some((_, l)) = vc.leaves.iter_mut().find(|l| &l.1.leaf == leaf_name)
                        {
                            l.in_order &= d.payload_tag == l.delivered;
                            l.delivered += 1;
                            let latency = now - d.emit_time;
                            l.min_latency_s =
                                Some(l.min_latency_s.map_or(latency, |m| m.min(latency)));
                        }
                        if vc.client_leaf == Some(node)
                            && vc.source.burst_last_tag == Some(d.payload_tag)
                        {
                            let at = self.now + vc.request_delay;
                            self.queue.schedule(at, EventKind::BurstRequest { vc: vi });
                        }
                    }
                    Cell::Rm(_) => {
                        if let (Some(brm), Some(up)) = (destination_receive(&cell), up) {
                            self.enqueue(up, Cell::Rm(brm));
                        }
                    }
                }
                Ok(())
            }
            NodeKind::Switch => self.on_switch_arrival(vi, node, from, cell),
        }
    }

    fn on_switch_arrival(
        &mut self,
        vi: usize,
        node: NodeId,
        from: NodeId,
        cell: Cell,
    ) -> Result<(), EngineError> {
        let hop = self.hop(vi, node)?.clone();
        match (cell, hop.branch) {
            (Cell::Data(_), _) => {
                for &(_, port) in &hop.down {
                    self.enqueue(port, cell);
                }
            }
            (Cell::Rm(rm), None) => {
                let target = if rm.is_forward() {
                    hop.down.first().map(|d| d.1)
                } else {
                    hop.up_port
                };
                if let Some(port) = target {
                    self.enqueue(port, cell);
                }
            }
            (Cell::Rm(rm), Some(b)) if rm.is_forward() => {
                let actions = self.branches[b]
                    .bp
                    .on_frm(&rm)
                    .map_err(|source| self.consolidation_error(b, source))?;
                let br = &mut self.branches[b];
                br.log.events.push(LoggedEvent::Frm(rm));
                if let Some(out) = actions.return_brm {
                    br.log.outputs.push(LoggedOutput::Emitted(out));
                    self.vcs[vi].counts.brm_in_network += 1;
                }
                self.note_counters(b);
                if actions.multicast_frm {
                    for &(_, port) in &hop.down {
                        self.enqueue(port, cell);
                    }
                }
                if let (Some(out), Some(up)) = (actions.return_brm, hop.up_port) {
                    self.enqueue(up, Cell::Rm(out));
                }
            }
            (Cell::Rm(rm), Some(b)) => {
                let branch = hop.down.iter().position(|d| d.0 == from).ok_or_else(|| {
                    EngineError::Routing {
                        vc: self.vcs[vi].name.clone(),
                        node: self.scenario.nodes[node].name.clone(),
                    }
                })?;
                let local_er = if self.scenario.algorithm == crate::consolidation::AlgorithmId::A7 {
                    Some(
                        hop.down
                            .iter()
                            .map(|&(_, p)| self.ports[p].erica.compute_er_for(&rm))
                            .fold(f64::INFINITY, f64::min),
                    )
                } else {
                    None
                };
                let actions = self.branches[b]
                    .bp
                    .on_brm(branch, &rm, local_er)
                    .map_err(|source| self.consolidation_error(b, source))?;
                let br = &mut self.branches[b];
                br.log.events.push(LoggedEvent::Brm {
                    branch,
                    cell: rm,
                    local_er,
                });
                if let Some(out) = actions.return_brm {
                    br.log.outputs.push(LoggedOutput::Emitted(out));
                    if br.bp.algorithm.counts_branches() && br.bp.state.number_of_brms_received > 0
                    {
                        br.log.early_sends += 1;
                    }
                }
                self.note_counters(b);
                self.arm_round_timer(b);
                if let (Some(out), Some(up)) = (actions.return_brm, hop.up_port) {
                    self.enqueue(up, Cell::Rm(out));
                }
            }
        }
        Ok(())
    }

    fn consolidation_error(&self, b: usize, source: ConsolidationError) -> EngineError {
        let br = &self.branches[b];
        EngineError::Consolidation {
            vc: self.vcs[br.vc].name.clone(),
            node: self.scenario.nodes[br.node].name.clone(),
            source,
        }
    }

    fn note_counters(&mut self, b: usize) {
        let now = self.now;
        let br = &mut self.branches[b];
        let st = &br.bp.state;
        if br.log.skip_increase.last().map(|s| s.1) != Some(st.skip_increase) {
            br.log.skip_increase.push((now, st.skip_increase));
        }
        if br.log.frm_minus_brm.last().map(|s| s.1) != Some(st.frm_minus_brm) {
            br.log.frm_minus_brm.push((now, st.frm_minus_brm));
        }
    }

    fn arm_round_timer(&mut self, b: usize) {
        let Some(timeout) = self.scenario.branch_timeout_s else {
            return;
        };
        let br = &mut self.branches[b];
        let epoch = br.bp.state.round_epoch;
        if epoch != br.last_epoch && br.bp.state.number_of_brms_received > 0 {
            br.last_epoch = epoch;
            self.queue.schedule(
                self.now + timeout,
                EventKind::RoundTimeout { branch: b, epoch },
            );
        }
    }

    fn on_round_timeout(&mut self, b: usize, epoch: u64) {
        let br = &mut self.branches[b];
        if br.bp.state.round_epoch != epoch || br.bp.state.number_of_brms_received == 0 {
            return;
        }
        let Some(out) = br.bp.force_round_completion() else {
            return;
        };
        br.log.events.push(LoggedEvent::Timeout);
        br.log.outputs.push(LoggedOutput::Emitted(out));
        let (vi, node) = (br.vc, br.node);
        self.note_counters(b);
        if let Some(up) = self.vcs[vi].hops[node].as_ref().and_then(|h| h.up_port) {
            self.enqueue(up, Cell::Rm(out));
        }
    }

    fn on_source_brm(&mut self, vi: usize, rm: &RmCell) {
        let now = self.now;
        let vc = &mut self.vcs[vi];
        vc.counts.brm_received_by_source += 1;
        vc.brm_er.push((now, rm.er));
        let before = vc.source.acr;
        let params = vc.params;
        let acr = vc.source.on_brm(&params, rm);
        if acr != before {
            vc.acr.push((now, acr));
            if vc.emit_pending || self.wants_to_send(vi) {
                self.reschedule_emission(vi);
            }
        }
    }

    fn wants_to_send(&self, vi: usize) -> bool {
        let s = &self.vcs[vi].source;
        match s.traffic {
            TrafficModel::Persistent => true,
            TrafficModel::Bursty { .. } => s.burst_remaining > 0,
            TrafficModel::VbrBackground(_) => false,
        }
    }

    fn reschedule_emission(&mut self, vi: usize) {
        let now = self.now;
        let vc = &mut self.vcs[vi];
        if now < vc.start_s {
            return;
        }
        vc.emit_generation += 1;
        if vc.source.acr <= 0.0 {
            vc.emit_pending = false;
            return;
        }
        let at = vc.source.paced_time(now);
        vc.emit_pending = true;
        let generation = vc.emit_generation;
        self.queue
            .schedule(at, EventKind::SourceEmit { vc: vi, generation });
    }

    fn emit(&mut self, vi: usize) {
        let now = self.now;
        let vc = &mut self.vcs[vi];
        let params = vc.params;
        let emission = vc.source.next_emission(&params, now);
        let first_port = vc.hops[vc.source_node]
            .as_ref()
            .and_then(|h| h.down.first().map(|d| d.1));
        let next = match emission {
            Emission::Cell { cell, next } => {
                if cell.kind() == CellKind::ForwardRm {
                    vc.counts.frm_sent_by_source += 1;
                }
                if let Some(port) = first_port {
                    self.enqueue(port, cell);
                }
                next
            }
            Emission::Idle { wake_at } => wake_at,
        };
        let vc = &mut self.vcs[vi];
        match next {
            Some(at) => {
                vc.emit_pending = true;
                let generation = vc.emit_generation;
                self.queue
                    .schedule(at, EventKind::SourceEmit { vc: vi, generation });
            }
            None => vc.emit_pending = false,
        }
    }

    fn finish(mut self) -> MetricsBundle {
        // RM cells still travelling between each source and its first
        // branch point.
        for vi in 0..self.vcs.len() {
            let segment = &self.vcs[vi].root_segment;
            let id = self.vcs[vi].id;
            let is_rm = |c: &Cell| c.vc() == id && c.kind() != CellKind::Data;
            let mut in_flight = 0u64;
            for &p in segment {
                in_flight += self.ports[p].queue.iter().filter(|c| is_rm(c)).count() as u64;
            }
            for ev in self.queue.pending() {
                if let EventKind::Arrival { via, cell, .. } = ev.kind {
                    if segment.contains(&via) && is_rm(&cell) {
                        in_flight += 1;
                    }
                }
            }
            self.vcs[vi].counts.rm_in_flight_root = in_flight;

            let is_data = |c: &Cell| c.vc() == id && c.kind() == CellKind::Data;
            let pending: Vec<(PortId, Cell)> = self
                .queue
                .pending()
                .filter_map(|ev| match ev.kind {
                    EventKind::Arrival { via, cell, .. } if is_data(&cell) => Some((via, cell)),
                    _ => None,
                })
                .collect();
            for (path, delivery) in &mut self.vcs[vi].leaves {
                let queued: usize = path
                    .iter()
                    .map(|&p| self.ports[p].queue.iter().filter(|c| is_data(c)).count())
                    .sum();
                let travelling = pending.iter().filter(|(via, _)| path.contains(via)).count();
                delivery.in_flight = (queued + travelling) as u64;
            }
        }

        let fair = max_min_fair_rates(self.scenario);
        let report = self
            .scenario
            .report
            .iter()
            .map(|&i| self.scenario.vcs[i].name.clone())
            .collect();
        let mut bundle = MetricsBundle {
            scenario: self.scenario.name.clone(),
            algorithm: Some(self.scenario.algorithm),
            horizon_s: self.scenario.horizon_s,
            report,
            events_processed: self.events_processed,
            ..MetricsBundle::default()
        };
        for (vi, vc) in self.vcs.into_iter().enumerate() {
            bundle.rm_counts.insert(vc.id, vc.counts);
            bundle.sources.push(SourceTrace {
                name: vc.name,
                vc: vc.id,
                acr: vc.acr,
                brm_er: vc.brm_er,
                reference_rate: fair[vi],
                abr: vc.abr,
                data_sent: vc.source.data_sent(),
            });
            bundle.leaves.extend(vc.leaves.into_iter().map(|l| l.1));
        }
        for p in self.ports {
            bundle.saturated_intervals += p.erica.saturated_intervals;
            if p.enqueued == 0 {
                continue;
            }
            let queued_at_end = p.queue.len() as u64;
            let (samples, max_cells) = p.recorder.finish();
            bundle.queues.push(QueueTrace {
                port: p.name,
                samples,
                max_cells,
                enqueued: p.enqueued,
                transmitted: p.transmitted,
                queued_at_end,
            });
        }
        bundle.branch_points = self.branches.into_iter().map(|b| b.log).collect();
        bundle
    }
}

/// Sum of propagation delays from `from` down to `leaf`.
fn path_delay(
    scenario: &Scenario,
    from: usize,
    leaf: usize,
    parent: impl Fn(usize) -> Option<usize>,
) -> f64 {
    let mut delay = 0.0;
    let mut node = leaf;
    while node != from {
        let Some(p) = parent(node) else { break };
        if let Some(l) = scenario.link_between(p, node) {
            delay += scenario.links[l].prop_delay_s;
        }
        node = p;
    }
    delay
}
