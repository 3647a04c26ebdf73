//! Branch-point feedback consolidation.
//!
//! A branch point multicasts every FRM to all of its branches and merges
//! the BRMs coming back from them into the feedback it passes toward the
//! root. Seven algorithms are provided behind one interface:
//!
//! * `A1` turns every FRM around with the minimum collected since the last
//!   turnaround.
//! * `A2` is `A1`, but only turns an FRM around once some branch reported.
//! * `A3` passes the first BRM that arrives after an FRM.
//! * `A4` passes a BRM only once every branch has reported.
//! * `A5` is `A4`, plus immediate pass-through of feedback that indicates
//!   overload relative to the last feedback sent.
//! * `A6` is `A5`, plus a counter that drops later underload feedback to
//!   keep the BRM:FRM ratio at one over the long run.
//! * `A7` is `A6`, with the local ERICA rate folded in on BRM receipt.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::cells::{CellKind, RmCell};

/// Default multiplicative factor for the overload ("much less") test.
pub const DEFAULT_ALPHA: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmId {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 7] = [
        AlgorithmId::A1,
        AlgorithmId::A2,
        AlgorithmId::A3,
        AlgorithmId::A4,
        AlgorithmId::A5,
        AlgorithmId::A6,
        AlgorithmId::A7,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        Self::ALL.get(usize::from(n).checked_sub(1)?).copied()
    }

    /// Whether the algorithm waits for all branches before passing
    /// underload feedback.
    pub fn counts_branches(self) -> bool {
        self >= AlgorithmId::A4
    }

    fn fast_overload(self) -> bool {
        self >= AlgorithmId::A5
    }

    fn skips_increase(self) -> bool {
        self >= AlgorithmId::A6
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown algorithm {0:?}, expected A1..A7")]
pub struct ParseAlgorithmError(String);

impl FromStr for AlgorithmId {
    type Err = ParseAlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix(['A', 'a']).unwrap_or(s);
        digits
            .parse::<u8>()
            .ok()
            .and_then(Self::from_number)
            .ok_or_else(|| ParseAlgorithmError(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsolidationError {
    #[error("branch {branch} out of range for a branch point with {branches} branches")]
    BranchOutOfRange { branch: usize, branches: usize },
    #[error("expected a {expected:?} cell, got {got:?}")]
    WrongKind { expected: CellKind, got: CellKind },
    #[error("A7 needs the local ERICA rate on BRM receipt")]
    MissingLocalEr,
    #[error("a branch point needs at least one branch")]
    NoBranches,
}

/// Per-VC registers kept at a branch point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsolidationState {
    pub mer: f64,
    pub mci: bool,
    pub mni: bool,
    pub at_least_one_brm: bool,
    pub at_least_one_frm: bool,
    pub number_of_branches: usize,
    pub number_of_brms_received: usize,
    pub brm_received: Vec<bool>,
    pub last_er: f64,
    pub skip_increase: u32,
    /// Accounting only; never influences decisions.
    pub frm_minus_brm: i64,
    pub pcr: f64,
    pub icr: f64,
    /// Bumped whenever a collection round starts; lets timers detect stale
    /// rounds.
    pub round_epoch: u64,
    last_brm: Option<RmCell>,
}

impl ConsolidationState {
    pub fn new(number_of_branches: usize, pcr: f64, icr: f64) -> Self {
        Self {
            mer: pcr,
            mci: false,
            mni: false,
            at_least_one_brm: false,
            at_least_one_frm: false,
            number_of_branches,
            number_of_brms_received: 0,
            brm_received: vec![false; number_of_branches],
            last_er: icr,
            skip_increase: 0,
            frm_minus_brm: 0,
            pcr,
            icr,
            round_epoch: 0,
            last_brm: None,
        }
    }

    fn reset_registers(&mut self) {
        self.mer = self.pcr;
        self.mci = false;
        self.mni = false;
    }

    fn reset_round(&mut self) {
        self.number_of_brms_received = 0;
        self.brm_received.iter_mut().for_each(|b| *b = false);
    }

    fn absorb(&mut self, cell: &RmCell) {
        self.mer = self.mer.min(cell.er);
        self.mci |= cell.ci;
        self.mni |= cell.ni;
    }

    fn mark_branch(&mut self, branch: usize) {
        if !self.brm_received[branch] {
            if self.number_of_brms_received == 0 {
                self.round_epoch += 1;
            }
            self.brm_received[branch] = true;
            self.number_of_brms_received += 1;
        }
    }

    fn round_complete(&self) -> bool {
        self.number_of_brms_received == self.number_of_branches
    }

    /// `template` with the consolidated register values.
    fn consolidated(&self, template: &RmCell) -> RmCell {
        RmCell {
            kind: CellKind::BackwardRm,
            er: self.mer,
            ci: self.mci,
            ni: self.mni,
            ..*template
        }
    }
}

/// What the engine must do with a cell handed to the branch point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConsolidationActions {
    pub multicast_frm: bool,
    /// BRM to send toward the root.
    pub return_brm: Option<RmCell>,
    pub discard: bool,
}

impl ConsolidationActions {
    fn multicast(return_brm: Option<RmCell>) -> Self {
        Self {
            multicast_frm: true,
            return_brm,
            discard: false,
        }
    }

    fn pass(cell: RmCell) -> Self {
        Self {
            return_brm: Some(cell),
            ..Self::default()
        }
    }

    fn drop_cell() -> Self {
        Self {
            discard: true,
            ..Self::default()
        }
    }
}

/// Overload ("much less than") test used by A5-A7.
pub fn overload_test(mer: f64, last_er: f64, alpha: f64) -> bool {
    mer < alpha * last_er
}

/// Consolidation logic for one VC at one branch point.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub algorithm: AlgorithmId,
    pub alpha: f64,
    pub state: ConsolidationState,
}

impl BranchPoint {
    pub fn new(
        algorithm: AlgorithmId,
        branches: usize,
        pcr: f64,
        icr: f64,
        alpha: f64,
    ) -> Result<Self, ConsolidationError> {
        if branches == 0 {
            return Err(ConsolidationError::NoBranches);
        }
        Ok(Self {
            algorithm,
            alpha,
            state: ConsolidationState::new(branches, pcr, icr),
        })
    }

    /// An FRM arrived from the root side.
    pub fn on_frm(&mut self, cell: &RmCell) -> Result<ConsolidationActions, ConsolidationError> {
        if !cell.is_forward() {
            return Err(ConsolidationError::WrongKind {
                expected: CellKind::ForwardRm,
                got: cell.kind,
            });
        }
        let st = &mut self.state;
        let actions = match self.algorithm {
            AlgorithmId::A1 => ConsolidationActions::multicast(Some(turn_around(st, cell))),
            AlgorithmId::A2 => {
                if st.at_least_one_brm {
                    let brm = turn_around(st, cell);
                    st.at_least_one_brm = false;
                    ConsolidationActions::multicast(Some(brm))
                } else {
                    ConsolidationActions::multicast(None)
                }
            }
            AlgorithmId::A3 => {
                st.at_least_one_frm = true;
                ConsolidationActions::multicast(None)
            }
            AlgorithmId::A4 => ConsolidationActions::multicast(None),
            AlgorithmId::A5 | AlgorithmId::A6 | AlgorithmId::A7 => {
                st.frm_minus_brm += 1;
                ConsolidationActions::multicast(None)
            }
        };
        Ok(actions)
    }

    /// A BRM arrived from `branch`. For A7, `local_er` is the minimum ERICA
    /// rate over this branch point's branch ports.
    pub fn on_brm(
        &mut self,
        branch: usize,
        cell: &RmCell,
        local_er: Option<f64>,
    ) -> Result<ConsolidationActions, ConsolidationError> {
        if !cell.is_backward() {
            return Err(ConsolidationError::WrongKind {
                expected: CellKind::BackwardRm,
                got: cell.kind,
            });
        }
        let branches = self.state.number_of_branches;
        if branch >= branches {
            return Err(ConsolidationError::BranchOutOfRange { branch, branches });
        }
        let local_er = match (self.algorithm, local_er) {
            (AlgorithmId::A7, None) => return Err(ConsolidationError::MissingLocalEr),
            (AlgorithmId::A7, Some(er)) => Some(er),
            _ => None,
        };

        let alg = self.algorithm;
        let alpha = self.alpha;
        let st = &mut self.state;
        if alg.counts_branches() {
            st.mark_branch(branch);
            st.last_brm = Some(*cell);
        }
        st.absorb(cell);

        let actions = match alg {
            AlgorithmId::A1 => ConsolidationActions::drop_cell(),
            AlgorithmId::A2 => {
                st.at_least_one_brm = true;
                ConsolidationActions::drop_cell()
            }
            AlgorithmId::A3 => {
                if st.at_least_one_frm {
                    let out = st.consolidated(cell);
                    st.reset_registers();
                    st.at_least_one_frm = false;
                    ConsolidationActions::pass(out)
                } else {
                    ConsolidationActions::drop_cell()
                }
            }
            AlgorithmId::A4 => {
                if st.round_complete() {
                    let out = st.consolidated(cell);
                    st.reset_registers();
                    st.reset_round();
                    ConsolidationActions::pass(out)
                } else {
                    ConsolidationActions::drop_cell()
                }
            }
            AlgorithmId::A5 | AlgorithmId::A6 | AlgorithmId::A7 => {
                if let Some(er) = local_er {
                    st.mer = st.mer.min(er);
                }
                fast_overload_decision(alg, alpha, st, cell)
            }
        };
        Ok(actions)
    }

    /// A BRM this branch point passes upstream is about to leave. Applies the
    /// local ERICA rate and, for A5-A7, remembers the feedback sent.
    pub fn on_brm_scheduled(&mut self, mut cell: RmCell, erica_er: f64) -> RmCell {
        cell.er = cell.er.min(erica_er);
        if self.algorithm.fast_overload() {
            self.state.last_er = cell.er;
        }
        cell
    }

    /// Forces completion of an unfinished round, for use by a
    /// non-responsive-branch timer. Only meaningful for A4-A7.
    pub fn force_round_completion(&mut self) -> Option<RmCell> {
        if !self.algorithm.counts_branches() || self.state.number_of_brms_received == 0 {
            return None;
        }
        let st = &mut self.state;
        let template = st.last_brm?;
        let out = st.consolidated(&template);
        st.reset_registers();
        st.reset_round();
        if self.algorithm.fast_overload() {
            st.frm_minus_brm -= 1;
        }
        Some(out)
    }
}

/// A1/A2 turnaround: answer the FRM with the collected minimum, then seed
/// the registers with the FRM's own fields.
fn turn_around(st: &mut ConsolidationState, frm: &RmCell) -> RmCell {
    let out = RmCell {
        kind: CellKind::BackwardRm,
        er: st.mer,
        ci: st.mci,
        ni: st.mni,
        ..*frm
    };
    st.mer = frm.er;
    st.mci = frm.ci;
    st.mni = frm.ni;
    out
}

fn fast_overload_decision(
    alg: AlgorithmId,
    alpha: f64,
    st: &mut ConsolidationState,
    cell: &RmCell,
) -> ConsolidationActions {
    let complete = st.round_complete();
    let overload = overload_test(st.mer, st.last_er, alpha);
    let mut send = false;
    let mut reset = true;

    if alg.skips_increase() && st.mer >= st.last_er && st.skip_increase > 0 && complete {
        st.skip_increase -= 1;
        st.reset_round();
    } else if overload {
        if !complete {
            if alg.skips_increase() {
                st.skip_increase += 1;
            }
            reset = false;
        }
        send = true;
    } else if complete {
        send = true;
    }

    if !send {
        return ConsolidationActions::drop_cell();
    }
    let out = st.consolidated(cell);
    if reset {
        st.reset_registers();
        st.reset_round();
    }
    st.frm_minus_brm -= 1;
    ConsolidationActions::pass(out)
}
