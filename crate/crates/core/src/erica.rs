//! ERICA explicit-rate computation for one output port.
//!
//! Each port measures its ABR input rate and background usage over an
//! averaging interval that closes after a fixed number of cells or a fixed
//! time, whichever comes first. At interval close it derives the load
//! factor `z`, the ABR capacity and the per-VC fair share; BRMs leaving
//! the switch are then stamped with
//! `min(capacity, max(fair_share, ccr / z, max_er_prev))`.
//!
//! `ccr` is the rate last seen in a forward RM cell of the VC at this
//! port. The CCR field of the backward cell is a round trip older and is
//! only used for VCs the port has not seen an FRM from.

use std::collections::{BTreeMap, BTreeSet};

use crate::cells::{RmCell, VcId, CELL_BITS};

/// Load factor above which the previous-interval maximum is ignored.
pub const DEFAULT_MAX_PREV_Z_LIMIT: f64 = 1.0;
/// Lower bound on the measured load factor, so `ccr / z` stays finite.
pub const Z_FLOOR: f64 = 0.01;
/// Capacity used when background traffic saturates the link, in Mbps.
pub const CAPACITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EricaParams {
    pub target_utilization: f64,
    pub interval_cells: u32,
    pub interval_s: f64,
    /// When set, the previous-interval maximum only takes part in the
    /// allocation while `z` is at or below this value. `None` always
    /// includes it, which lets one generous interval pin every later
    /// allocation at that value.
    pub max_prev_z_limit: Option<f64>,
    /// Take `ccr` from the per-VC table rather than the backward cell.
    pub ccr_table: bool,
}

impl Default for EricaParams {
    fn default() -> Self {
        Self {
            target_utilization: 0.9,
            interval_cells: 100,
            interval_s: 1e-3,
            max_prev_z_limit: Some(DEFAULT_MAX_PREV_Z_LIMIT),
            ccr_table: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EricaPortState {
    pub params: EricaParams,
    pub link_rate: f64,
    pub interval_cell_count: u32,
    pub interval_start: f64,
    pub abr_input_bits: f64,
    pub vbr_cbr_bits: f64,
    pub active_vcs: BTreeSet<VcId>,
    /// CCR of the latest forward RM cell per VC.
    pub vc_ccr: BTreeMap<VcId, f64>,
    pub z: f64,
    pub fair_share: f64,
    pub abr_capacity: f64,
    pub max_er_prev: f64,
    pub max_er_cur: f64,
    pub intervals_closed: u64,
    /// Intervals in which background traffic left no ABR capacity.
    pub saturated_intervals: u64,
}

impl EricaPortState {
    pub fn new(params: EricaParams, link_rate: f64) -> Self {
        let capacity = params.target_utilization * link_rate;
        Self {
            params,
            link_rate,
            interval_cell_count: 0,
            interval_start: 0.0,
            abr_input_bits: 0.0,
            vbr_cbr_bits: 0.0,
            active_vcs: BTreeSet::new(),
            vc_ccr: BTreeMap::new(),
            z: 1.0,
            fair_share: capacity,
            abr_capacity: capacity,
            max_er_prev: 0.0,
            max_er_cur: 0.0,
            intervals_closed: 0,
            saturated_intervals: 0,
        }
    }

    /// Accounts one cell arriving for this port. Returns `true` when the
    /// arrival filled the interval; the caller then closes it.
    pub fn record_arrival(&mut self, vc: VcId, abr: bool) -> bool {
        if abr {
            self.abr_input_bits += CELL_BITS;
            self.active_vcs.insert(vc);
        } else {
            self.vbr_cbr_bits += CELL_BITS;
        }
        self.interval_cell_count += 1;
        self.interval_cell_count >= self.params.interval_cells
    }

    /// Remembers the CCR carried by a forward RM cell headed for this port.
    pub fn note_frm(&mut self, cell: &RmCell) {
        self.vc_ccr.insert(cell.vc, cell.ccr);
    }

    /// The CCR used for a backward cell of `cell.vc`.
    pub fn ccr_for(&self, cell: &RmCell) -> f64 {
        match self.vc_ccr.get(&cell.vc) {
            Some(&ccr) if self.params.ccr_table => ccr,
            _ => cell.ccr,
        }
    }

    /// Closes the current measurement interval at `now`.
    pub fn close_interval(&mut self, now: f64) {
        let length = (now - self.interval_start).max(f64::MIN_POSITIVE);
        let background = self.vbr_cbr_bits / length / 1e6;
        let mut capacity = self.params.target_utilization * self.link_rate - background;
        if capacity <= CAPACITY_FLOOR {
            capacity = CAPACITY_FLOOR;
            self.saturated_intervals += 1;
        }
        let input_rate = self.abr_input_bits / length / 1e6;
        self.abr_capacity = capacity;
        self.z = (input_rate / capacity).max(Z_FLOOR);
        self.fair_share = capacity / self.active_vcs.len().max(1) as f64;
        self.max_er_prev = self.max_er_cur;
        self.max_er_cur = 0.0;
        self.interval_cell_count = 0;
        self.abr_input_bits = 0.0;
        self.vbr_cbr_bits = 0.0;
        self.active_vcs.clear();
        self.interval_start = now;
        self.intervals_closed += 1;
    }

    /// Explicit rate this port can give a VC currently sending at `ccr`.
    pub fn compute_er(&mut self, ccr: f64) -> f64 {
        if self.intervals_closed == 0 {
            // No measurement yet: offer the whole ABR capacity.
            return self.abr_capacity;
        }
        let vc_share = ccr / self.z;
        let mut er = self.fair_share.max(vc_share);
        let use_prev = self
            .params
            .max_prev_z_limit
            .is_none_or(|limit| self.z <= limit);
        if use_prev {
            er = er.max(self.max_er_prev);
        }
        let er = er.min(self.abr_capacity);
        self.max_er_cur = self.max_er_cur.max(er);
        er
    }

    /// [`Self::compute_er`] for the VC of a backward cell.
    pub fn compute_er_for(&mut self, cell: &RmCell) -> f64 {
        self.compute_er(self.ccr_for(cell))
    }

    /// Lowers the ER of a BRM to what this port supports. Never raises it.
    pub fn stamp_brm(&mut self, mut cell: RmCell) -> RmCell {
        let er = self.compute_er_for(&cell);
        cell.er = cell.er.min(er);
        cell
    }
}
