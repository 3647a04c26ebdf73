//! Data and resource-management cells.
//!
//! Cells are typed records rather than bit-exact ATM encodings; the only
//! wire property the simulator relies on is the fixed 53-byte cell size.

use std::fmt;

use thiserror::Error;

/// Size of every ATM cell on the wire, in bits (53 bytes).
pub const CELL_BITS: f64 = 424.0;

/// Time needed to serialize one cell at `rate_mbps`, in seconds.
pub fn cell_time(rate_mbps: f64) -> f64 {
    CELL_BITS / (rate_mbps * 1e6)
}

/// Identifier of a virtual circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VcId(pub u32);

impl fmt::Display for VcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "vc{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellKind {
    Data,
    ForwardRm,
    BackwardRm,
}

/// A resource-management cell. Rates are in Mbps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmCell {
    pub vc: VcId,
    pub kind: CellKind,
    pub er: f64,
    pub ci: bool,
    pub ni: bool,
    pub ccr: f64,
    /// Per-VC sequence number of the originating FRM. Bookkeeping only.
    pub seq: u64,
}

impl RmCell {
    pub fn is_forward(&self) -> bool {
        self.kind == CellKind::ForwardRm
    }

    pub fn is_backward(&self) -> bool {
        self.kind == CellKind::BackwardRm
    }

    /// The same cell heading back toward the root.
    pub fn turned_around(mut self) -> Self {
        self.kind = CellKind::BackwardRm;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataCell {
    pub vc: VcId,
    pub emit_time: f64,
    pub payload_tag: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Data(DataCell),
    Rm(RmCell),
}

impl Cell {
    pub fn vc(&self) -> VcId {
        match self {
            Cell::Data(d) => d.vc,
            Cell::Rm(rm) => rm.vc,
        }
    }

    pub fn kind(&self) -> CellKind {
        match self {
            Cell::Data(_) => CellKind::Data,
            Cell::Rm(rm) => rm.kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CellError {
    #[error("rates must be positive and finite (pcr={pcr}, acr={acr})")]
    NonPositiveRate { pcr: f64, acr: f64 },
    #[error("acr {acr} exceeds pcr {pcr}")]
    AcrAbovePcr { pcr: f64, acr: f64 },
}

/// Builds the FRM a source emits: ER starts at PCR, CI and NI clear, CCR is
/// the current allowed rate.
pub fn make_initial_frm(vc: VcId, pcr: f64, acr: f64, seq: u64) -> Result<RmCell, CellError> {
    if !(pcr > 0.0 && acr > 0.0 && pcr.is_finite() && acr.is_finite()) {
        return Err(CellError::NonPositiveRate { pcr, acr });
    }
    if acr > pcr {
        return Err(CellError::AcrAbovePcr { pcr, acr });
    }
    Ok(RmCell {
        vc,
        kind: CellKind::ForwardRm,
        er: pcr,
        ci: false,
        ni: false,
        ccr: acr,
        seq,
    })
}
