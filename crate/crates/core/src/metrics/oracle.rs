//! Straight-line re-implementation of the branch-point pseudocode, used to
//! cross-check the consolidation module. It shares nothing with
//! [`crate::consolidation`] except the cell type, and trades structure for
//! literalness: every algorithm is spelled out step by step with its own
//! temporaries.

use std::collections::VecDeque;

use crate::cells::{CellKind, RmCell};
use crate::consolidation::AlgorithmId;

/// One input seen by a branch point for one VC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoggedEvent {
    Frm(RmCell),
    Brm {
        branch: usize,
        cell: RmCell,
        local_er: Option<f64>,
    },
    /// The oldest not-yet-scheduled BRM of this VC started transmission
    /// with the given local ERICA rate.
    Scheduled {
        erica_er: f64,
    },
    /// Non-responsive-branch timer fired for the current round.
    Timeout,
}

/// One output of a branch point for one VC.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LoggedOutput {
    /// A BRM decided on, before the local ERICA rate is applied.
    Emitted(RmCell),
    /// The same BRM as it leaves the branch point.
    Scheduled(RmCell),
}

impl LoggedOutput {
    /// Field-for-field comparison with floats compared bitwise.
    pub fn identical(&self, other: &LoggedOutput) -> bool {
        fn same(a: &RmCell, b: &RmCell) -> bool {
            a.vc == b.vc
                && a.kind == b.kind
                && a.er.to_bits() == b.er.to_bits()
                && a.ci == b.ci
                && a.ni == b.ni
                && a.ccr.to_bits() == b.ccr.to_bits()
                && a.seq == b.seq
        }
        match (self, other) {
            (LoggedOutput::Emitted(a), LoggedOutput::Emitted(b)) => same(a, b),
            (LoggedOutput::Scheduled(a), LoggedOutput::Scheduled(b)) => same(a, b),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub algorithm: AlgorithmId,
    pub branches: usize,
    pub pcr: f64,
    pub icr: f64,
    pub alpha: f64,
}

struct Registers {
    mer: f64,
    mci: bool,
    mni: bool,
    at_least_one_brm: bool,
    at_least_one_frm: bool,
    number_of_brms_received: usize,
    brm_received: Vec<bool>,
    last_er: f64,
    skip_increase: u64,
    last_brm: Option<RmCell>,
}

fn backward(template: &RmCell, er: f64, ci: bool, ni: bool) -> RmCell {
    RmCell {
        vc: template.vc,
        kind: CellKind::BackwardRm,
        er,
        ci,
        ni,
        ccr: template.ccr,
        seq: template.seq,
    }
}

/// Replays a recorded input sequence and returns the BRM stream the
/// branch point should have produced.
pub fn oracle_replay(events: &[LoggedEvent], cfg: &OracleConfig) -> Vec<LoggedOutput> {
    let n = cfg.branches;
    let pcr = cfg.pcr;
    let alpha = cfg.alpha;
    let alg = cfg.algorithm.number();
    let mut r = Registers {
        mer: pcr,
        mci: false,
        mni: false,
        at_least_one_brm: false,
        at_least_one_frm: false,
        number_of_brms_received: 0,
        brm_received: vec![false; n],
        last_er: cfg.icr,
        skip_increase: 0,
        last_brm: None,
    };
    let mut pending: VecDeque<RmCell> = VecDeque::new();
    let mut out = Vec::new();

    for ev in events {
        match *ev {
            LoggedEvent::Frm(f) => {
                // Multicast is implicit.
                if alg == 1 {
                    let mxer = f.er;
                    let mxci = f.ci;
                    let mxni = f.ni;
                    let b = backward(&f, r.mer, r.mci, r.mni);
                    out.push(LoggedOutput::Emitted(b));
                    pending.push_back(b);
                    r.mer = mxer;
                    r.mci = mxci;
                    r.mni = mxni;
                } else if alg == 2 {
                    if r.at_least_one_brm {
                        let mxer = f.er;
                        let mxci = f.ci;
                        let mxni = f.ni;
                        let b = backward(&f, r.mer, r.mci, r.mni);
                        out.push(LoggedOutput::Emitted(b));
                        pending.push_back(b);
                        r.mer = mxer;
                        r.mci = mxci;
                        r.mni = mxni;
                        r.at_least_one_brm = false;
                    }
                } else if alg == 3 {
                    r.at_least_one_frm = true;
                } else if alg == 4 {
                    // nothing
                }
                // A5-A7 only bump an accounting counter here.
            }
            LoggedEvent::Brm {
                branch: i,
                cell: c,
                local_er,
            } => {
                if alg == 1 {
                    r.mer = r.mer.min(c.er);
                    r.mci = r.mci || c.ci;
                    r.mni = r.mni || c.ni;
                } else if alg == 2 {
                    r.at_least_one_brm = true;
                    r.mer = r.mer.min(c.er);
                    r.mci = r.mci || c.ci;
                    r.mni = r.mni || c.ni;
                } else if alg == 3 {
                    r.mer = r.mer.min(c.er);
                    r.mci = r.mci || c.ci;
                    r.mni = r.mni || c.ni;
                    if r.at_least_one_frm {
                        let b = backward(&c, r.mer, r.mci, r.mni);
                        out.push(LoggedOutput::Emitted(b));
                        pending.push_back(b);
                        r.mer = pcr;
                        r.mci = false;
                        r.mni = false;
                        r.at_least_one_frm = false;
                    }
                } else if alg == 4 {
                    r.last_brm = Some(c);
                    if !r.brm_received[i] {
                        r.brm_received[i] = true;
                        r.number_of_brms_received += 1;
                    }
                    r.mer = r.mer.min(c.er);
                    r.mci = r.mci || c.ci;
                    r.mni = r.mni || c.ni;
                    if r.number_of_brms_received == n {
                        let b = backward(&c, r.mer, r.mci, r.mni);
                        out.push(LoggedOutput::Emitted(b));
                        pending.push_back(b);
                        r.mer = pcr;
                        r.mci = false;
                        r.mni = false;
                        r.number_of_brms_received = 0;
                        for k in 0..n {
                            r.brm_received[k] = false;
                        }
                    }
                } else {
                    r.last_brm = Some(c);
                    let mut send_brm = false;
                    let mut reset = true;
                    if !r.brm_received[i] {
                        r.brm_received[i] = true;
                        r.number_of_brms_received += 1;
                    }
                    r.mer = r.mer.min(c.er);
                    r.mci = r.mci || c.ci;
                    r.mni = r.mni || c.ni;
                    if alg == 7 {
                        r.mer = r.mer.min(local_er.unwrap_or(f64::INFINITY));
                    }
                    if alg == 5 {
                        if r.mer < alpha * r.last_er {
                            if r.number_of_brms_received < n {
                                reset = false;
                            }
                            send_brm = true;
                        } else if r.number_of_brms_received == n {
                            send_brm = true;
                        }
                    } else if r.mer >= r.last_er
                        && r.skip_increase > 0
                        && r.number_of_brms_received == n
                    {
                        r.skip_increase -= 1;
                        r.number_of_brms_received = 0;
                        for k in 0..n {
                            r.brm_received[k] = false;
                        }
                    } else if r.mer < alpha * r.last_er {
                        if r.number_of_brms_received < n {
                            r.skip_increase += 1;
                            reset = false;
                        }
                        send_brm = true;
                    } else if r.number_of_brms_received == n {
                        send_brm = true;
                    }
                    if send_brm {
                        let b = backward(&c, r.mer, r.mci, r.mni);
                        out.push(LoggedOutput::Emitted(b));
                        pending.push_back(b);
                        if reset {
                            r.mer = pcr;
                            r.mci = false;
                            r.mni = false;
                            r.number_of_brms_received = 0;
                            for k in 0..n {
                                r.brm_received[k] = false;
                            }
                        }
                    }
                }
            }
            LoggedEvent::Scheduled { erica_er } => {
                if let Some(mut b) = pending.pop_front() {
                    if erica_er < b.er {
                        b.er = erica_er;
                    }
                    if alg >= 5 {
                        r.last_er = b.er;
                    }
                    out.push(LoggedOutput::Scheduled(b));
                }
            }
            LoggedEvent::Timeout => {
                if alg >= 4 && r.number_of_brms_received > 0 {
                    if let Some(c) = r.last_brm {
                        let b = backward(&c, r.mer, r.mci, r.mni);
                        out.push(LoggedOutput::Emitted(b));
                        pending.push_back(b);
                        r.mer = pcr;
                        r.mci = false;
                        r.mni = false;
                        r.number_of_brms_received = 0;
                        for k in 0..n {
                            r.brm_received[k] = false;
                        }
                    }
                }
            }
        }
    }
    out
}
