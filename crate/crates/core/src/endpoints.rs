//! ABR source and destination behavior, plus the traffic models that drive
//! sources: persistent, bursty request/response and on/off VBR background.

use thiserror::Error;

use crate::cells::{cell_time, make_initial_frm, Cell, DataCell, RmCell, VcId};

/// Cells per FRM when a scenario does not say otherwise.
pub const DEFAULT_NRM: u32 = 32;
pub const DEFAULT_RDF: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceParamsError {
    #[error("pcr must be positive, got {0}")]
    Pcr(f64),
    #[error("rate ordering mcr <= icr <= pcr violated (mcr={mcr}, icr={icr}, pcr={pcr})")]
    Ordering { mcr: f64, icr: f64, pcr: f64 },
    #[error("{name} must lie in (0, 1], got {value}")]
    Factor { name: &'static str, value: f64 },
    #[error("nrm must be positive")]
    Nrm,
}

/// Static ABR parameters of a source. Rates in Mbps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceParams {
    pub pcr: f64,
    pub icr: f64,
    pub rif: f64,
    pub rdf: f64,
    pub mcr: f64,
    pub nrm: u32,
    /// Transient buffer exposure in cells. Carried for completeness; the
    /// open-loop decrease it governs is not modeled.
    pub tbe: u64,
}

impl SourceParams {
    /// Parameters used throughout the reference scenarios: RIF = 1 and
    /// ICR at the peak rate.
    pub fn with_pcr(pcr: f64) -> Self {
        Self {
            pcr,
            icr: pcr,
            rif: 1.0,
            rdf: DEFAULT_RDF,
            mcr: 0.0,
            nrm: DEFAULT_NRM,
            tbe: 1 << 24,
        }
    }

    pub fn validate(&self) -> Result<(), SourceParamsError> {
        if !(self.pcr > 0.0 && self.pcr.is_finite()) {
            return Err(SourceParamsError::Pcr(self.pcr));
        }
        if !(0.0 <= self.mcr && self.mcr <= self.icr && self.icr <= self.pcr) {
            return Err(SourceParamsError::Ordering {
                mcr: self.mcr,
                icr: self.icr,
                pcr: self.pcr,
            });
        }
        for (name, value) in [("rif", self.rif), ("rdf", self.rdf)] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(SourceParamsError::Factor { name, value });
            }
        }
        if self.nrm == 0 {
            return Err(SourceParamsError::Nrm);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VbrBackground {
    pub rate_mbps: f64,
    pub on_s: f64,
    pub off_s: f64,
}

impl VbrBackground {
    fn period(&self) -> f64 {
        self.on_s + self.off_s
    }

    fn is_on(&self, now: f64) -> bool {
        let phase = now - (now / self.period()).floor() * self.period();
        phase < self.on_s
    }

    /// Start of the first on-phase strictly after `now`.
    fn next_on_start(&self, now: f64) -> f64 {
        ((now / self.period()).floor() + 1.0) * self.period()
    }

    pub fn mean_rate(&self) -> f64 {
        self.rate_mbps * self.on_s / self.period()
    }
}

/// Background rate at `now`: `rate_mbps` while on, zero while off. The
/// source starts in the on-phase at t = 0.
pub fn vbr_instantaneous_rate(model: &VbrBackground, now: f64) -> f64 {
    if model.is_on(now) {
        model.rate_mbps
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrafficModel {
    Persistent,
    Bursty {
        burst_size_cells: u64,
        /// One-way latency of the client request; `None` means the
        /// propagation delay of the path to the client.
        request_latency_s: Option<f64>,
        think_time_s: f64,
    },
    VbrBackground(VbrBackground),
}

impl TrafficModel {
    pub fn is_abr(&self) -> bool {
        !matches!(self, TrafficModel::VbrBackground(_))
    }
}

/// ABR source rate update on receipt of a BRM. Returns the new ACR.
pub fn source_on_brm(acr: f64, params: &SourceParams, cell: &RmCell) -> f64 {
    let mut acr = if cell.ci {
        acr - acr * params.rdf
    } else if !cell.ni {
        acr + params.rif * params.pcr
    } else {
        acr
    };
    acr = acr.min(cell.er).min(params.pcr);
    acr.max(params.mcr)
}

/// Leaf behavior for an arriving FRM: the same cell heads back upstream.
pub fn destination_turnaround(cell: RmCell) -> RmCell {
    debug_assert!(cell.is_forward());
    cell.turned_around()
}

/// Leaf behavior for any arriving cell. Data is consumed; an FRM comes back
/// as a BRM.
pub fn destination_receive(cell: &Cell) -> Option<RmCell> {
    match cell {
        Cell::Rm(rm) if rm.is_forward() => Some(destination_turnaround(*rm)),
        _ => None,
    }
}

/// What a source does at an emission opportunity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Emission {
    /// One cell leaves now. `next` is the next emission opportunity, or
    /// `None` when the source goes idle until something external happens.
    Cell { cell: Cell, next: Option<f64> },
    /// Nothing to send. Wake at `wake_at` if set.
    Idle { wake_at: Option<f64> },
}

/// Mutable state of one source endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceState {
    pub vc: VcId,
    pub acr: f64,
    pub cells_since_frm: u32,
    pub traffic: TrafficModel,
    /// Data cells still to send in the current burst (bursty model).
    pub burst_remaining: u64,
    /// Payload tag of the last cell of the most recent burst.
    pub burst_last_tag: Option<u64>,
    pub bursts_started: u64,
    pub next_emit_time: Option<f64>,
    pub last_emit_time: Option<f64>,
    next_frm_seq: u64,
    next_tag: u64,
}

impl SourceState {
    pub fn new(vc: VcId, params: &SourceParams, traffic: TrafficModel) -> Self {
        Self {
            vc,
            acr: params.icr,
            // The first cell a source sends is an FRM.
            cells_since_frm: params.nrm - 1,
            traffic,
            burst_remaining: 0,
            burst_last_tag: None,
            bursts_started: 0,
            next_emit_time: None,
            last_emit_time: None,
            next_frm_seq: 0,
            next_tag: 0,
        }
    }

    pub fn frms_sent(&self) -> u64 {
        self.next_frm_seq
    }

    pub fn data_sent(&self) -> u64 {
        self.next_tag
    }

    /// A client request arrived: queue a new burst.
    pub fn start_burst(&mut self) {
        if let TrafficModel::Bursty {
            burst_size_cells, ..
        } = self.traffic
        {
            self.burst_remaining += burst_size_cells;
            self.bursts_started += 1;
        }
    }

    /// Applies a BRM to the ACR and returns the new value.
    pub fn on_brm(&mut self, params: &SourceParams, cell: &RmCell) -> f64 {
        self.acr = source_on_brm(self.acr, params, cell);
        self.acr
    }

    fn active(&self) -> bool {
        match self.traffic {
            TrafficModel::Persistent => true,
            TrafficModel::Bursty { .. } => self.burst_remaining > 0,
            TrafficModel::VbrBackground(_) => true,
        }
    }

    /// Earliest time the next cell may leave under the current rate.
    pub fn paced_time(&self, now: f64) -> f64 {
        match self.last_emit_time {
            Some(last) if self.acr > 0.0 => (last + cell_time(self.acr)).max(now),
            _ => now,
        }
    }

    /// Emits one cell at `now` if the traffic model allows it.
    pub fn next_emission(&mut self, params: &SourceParams, now: f64) -> Emission {
        if let TrafficModel::VbrBackground(vbr) = self.traffic {
            return self.vbr_emission(&vbr, now);
        }
        if !self.active() || self.acr <= 0.0 {
            self.next_emit_time = None;
            return Emission::Idle { wake_at: None };
        }
        let cell = if self.cells_since_frm + 1 >= params.nrm {
            self.cells_since_frm = 0;
            let seq = self.next_frm_seq;
            self.next_frm_seq += 1;
            // acr <= pcr holds by construction, so this cannot fail.
            let frm = make_initial_frm(self.vc, params.pcr, self.acr, seq)
                .expect("source acr within (0, pcr]");
            Cell::Rm(frm)
        } else {
            self.cells_since_frm += 1;
            let tag = self.next_tag;
            self.next_tag += 1;
            if let TrafficModel::Bursty { .. } = self.traffic {
                self.burst_remaining -= 1;
                if self.burst_remaining == 0 {
                    self.burst_last_tag = Some(tag);
                }
            }
            Cell::Data(DataCell {
                vc: self.vc,
                emit_time: now,
                payload_tag: tag,
            })
        };
        self.last_emit_time = Some(now);
        let next = self.active().then(|| now + cell_time(self.acr));
        self.next_emit_time = next;
        Emission::Cell { cell, next }
    }

    fn vbr_emission(&mut self, vbr: &VbrBackground, now: f64) -> Emission {
        if vbr.rate_mbps <= 0.0 {
            return Emission::Idle { wake_at: None };
        }
        if !vbr.is_on(now) {
            let wake = vbr.next_on_start(now);
            self.next_emit_time = Some(wake);
            return Emission::Idle {
                wake_at: Some(wake),
            };
        }
        let tag = self.next_tag;
        self.next_tag += 1;
        let mut next = now + cell_time(vbr.rate_mbps);
        if !vbr.is_on(next) {
            next = vbr.next_on_start(now);
        }
        self.last_emit_time = Some(now);
        self.next_emit_time = Some(next);
        Emission::Cell {
            cell: Cell::Data(DataCell {
                vc: self.vc,
                emit_time: now,
                payload_tag: tag,
            }),
            next: Some(next),
        }
    }
}
