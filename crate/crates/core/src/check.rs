//! Equivalence checking between [`BranchPoint`] and the reference
//! interpreter in [`crate::metrics::oracle`].
//!
//! Outputs are causal, so checking every sequence of length exactly `n`
//! also covers all shorter prefixes.

use std::collections::VecDeque;
use std::fmt;

use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

use crate::cells::{CellKind, RmCell, VcId};
use crate::consolidation::{AlgorithmId, BranchPoint, ConsolidationError};
use crate::metrics::oracle::{oracle_replay, LoggedEvent, LoggedOutput, OracleConfig};

/// Explicit rates used by the enumerated sequences.
pub const ER_VALUES: [f64; 4] = [30.0, 70.0, 100.0, 149.76];
const PCR: f64 = 149.76;
const MAX_KEPT_MISMATCHES: usize = 10;

/// Feeds `events` to a fresh [`BranchPoint`] the way the engine does and
/// records its outputs in the oracle's format.
pub fn drive(
    events: &[LoggedEvent],
    cfg: &OracleConfig,
) -> Result<Vec<LoggedOutput>, ConsolidationError> {
    let mut bp = BranchPoint::new(cfg.algorithm, cfg.branches, cfg.pcr, cfg.icr, cfg.alpha)?;
    let mut pending = VecDeque::new();
    let mut out = Vec::new();
    for ev in events {
        let emitted = match *ev {
            LoggedEvent::Frm(cell) => bp.on_frm(&cell)?.return_brm,
            LoggedEvent::Brm {
                branch,
                cell,
                local_er,
            } => bp.on_brm(branch, &cell, local_er)?.return_brm,
            LoggedEvent::Scheduled { erica_er } => {
                if let Some(cell) = pending.pop_front() {
                    out.push(LoggedOutput::Scheduled(bp.on_brm_scheduled(cell, erica_er)));
                }
                None
            }
            LoggedEvent::Timeout => bp.force_round_completion(),
        };
        if let Some(cell) = emitted {
            out.push(LoggedOutput::Emitted(cell));
            pending.push_back(cell);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Mismatch {
    pub config: OracleConfig,
    pub events: Vec<LoggedEvent>,
    pub expected: Vec<LoggedOutput>,
    pub actual: Result<Vec<LoggedOutput>, ConsolidationError>,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} with {} branches, {} events: expected {:?}, got {:?}",
            self.config.algorithm,
            self.config.branches,
            self.events.len(),
            self.expected,
            self.actual
        )
    }
}

/// Runs both implementations and compares their outputs bitwise.
pub fn compare(events: &[LoggedEvent], cfg: &OracleConfig) -> Result<(), Box<Mismatch>> {
    let expected = oracle_replay(events, cfg);
    let actual = drive(events, cfg);
    let same = match &actual {
        Ok(a) => a.len() == expected.len() && a.iter().zip(&expected).all(|(x, y)| x.identical(y)),
        Err(_) => false,
    };
    if same {
        Ok(())
    } else {
        Err(Box::new(Mismatch {
            config: *cfg,
            events: events.to_vec(),
            expected,
            actual,
        }))
    }
}

#[derive(Debug, Default)]
pub struct CheckReport {
    pub sequences: u64,
    pub events: u64,
    /// The first few mismatches found.
    pub mismatches: Vec<Mismatch>,
    pub mismatch_count: u64,
}

impl CheckReport {
    fn record(&mut self, events: &[LoggedEvent], cfg: &OracleConfig) {
        self.sequences += 1;
        self.events += events.len() as u64;
        if let Err(m) = compare(events, cfg) {
            self.mismatch_count += 1;
            if self.mismatches.len() < MAX_KEPT_MISMATCHES {
                self.mismatches.push(*m);
            }
        }
    }

    fn merge(&mut self, other: CheckReport) {
        self.sequences += other.sequences;
        self.events += other.events;
        self.mismatch_count += other.mismatch_count;
        for m in other.mismatches {
            if self.mismatches.len() < MAX_KEPT_MISMATCHES {
                self.mismatches.push(m);
            }
        }
    }
}

pub fn config(algorithm: AlgorithmId, branches: usize) -> OracleConfig {
    OracleConfig {
        algorithm,
        branches,
        pcr: PCR,
        icr: PCR,
        alpha: crate::consolidation::DEFAULT_ALPHA,
    }
}

fn rm(kind: CellKind, er: f64, ci: bool, ni: bool, ccr: f64, seq: u64) -> RmCell {
    RmCell {
        vc: VcId(0),
        kind,
        er,
        ci,
        ni,
        ccr,
        seq,
    }
}

/// Input symbol of the enumerated sequences: `None` is an FRM, `Some(b)`
/// a BRM from branch `b`.
type Symbol = Option<usize>;

/// Expands a symbol into the events the branch point sees: the cell
/// itself, then the scheduling of any BRM it produced.
fn push_symbol(
    out: &mut Vec<LoggedEvent>,
    alg: AlgorithmId,
    symbol: Symbol,
    er: f64,
    local_er: f64,
    seq: u64,
) {
    match symbol {
        None => out.push(LoggedEvent::Frm(rm(
            CellKind::ForwardRm,
            er,
            false,
            false,
            er,
            seq,
        ))),
        Some(branch) => out.push(LoggedEvent::Brm {
            branch,
            cell: rm(CellKind::BackwardRm, er, false, false, PCR, seq),
            local_er: (alg == AlgorithmId::A7).then_some(local_er),
        }),
    }
    out.push(LoggedEvent::Scheduled { erica_er: local_er });
}

fn mix(mut x: u64) -> u64 {
    // splitmix64 finalizer
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Every sequence of exactly `len` symbols over {FRM, BRM from branch
/// 0..3}, for every algorithm. Cell ERs and scheduling rates are picked
/// from [`ER_VALUES`] by a fixed hash of the sequence and position.
pub fn exhaustive_structural(len: usize) -> CheckReport {
    let branches = 3;
    let alphabet = branches as u64 + 1;
    let total = alphabet.pow(len as u32);
    let mut report = CheckReport::default();
    let mut events = Vec::with_capacity(2 * len);
    for alg in AlgorithmId::ALL {
        let cfg = config(alg, branches);
        for code in 0..total {
            events.clear();
            let mut rest = code;
            for pos in 0..len {
                let digit = (rest % alphabet) as usize;
                rest /= alphabet;
                let symbol = digit.checked_sub(1);
                let h = mix(code ^ ((pos as u64) << 40));
                let er = ER_VALUES[(h & 3) as usize];
                let local = ER_VALUES[((h >> 2) & 3) as usize];
                push_symbol(&mut events, alg, symbol, er, local, pos as u64);
            }
            report.record(&events, &cfg);
        }
    }
    report
}

/// Every sequence of exactly `len` symbols where each symbol is an FRM or
/// a BRM from one of 3 branches carrying one of [`ER_VALUES`]; scheduling
/// uses the same value as the cell.
pub fn exhaustive_values(len: usize) -> CheckReport {
    let branches = 3;
    let per_cell = ER_VALUES.len() as u64;
    let alphabet = (branches as u64 + 1) * per_cell;
    let total = alphabet.pow(len as u32);
    let mut report = CheckReport::default();
    let mut events = Vec::with_capacity(2 * len);
    for alg in AlgorithmId::ALL {
        let cfg = config(alg, branches);
        for code in 0..total {
            events.clear();
            let mut rest = code;
            for pos in 0..len {
                let digit = rest % alphabet;
                rest /= alphabet;
                let er = ER_VALUES[(digit % per_cell) as usize];
                let symbol = ((digit / per_cell) as usize).checked_sub(1);
                let local = ER_VALUES[((digit + pos as u64) % per_cell) as usize];
                push_symbol(&mut events, alg, symbol, er, local, pos as u64);
            }
            report.record(&events, &cfg);
        }
    }
    report
}

fn random_rate(rng: &mut StdRng) -> f64 {
    if rng.random_bool(0.5) {
        ER_VALUES[rng.random_range(0..ER_VALUES.len())]
    } else {
        rng.random_range(0.5..PCR)
    }
}

/// A random sequence mixing all event kinds, flags and arbitrary rates.
pub fn random_sequence(
    rng: &mut StdRng,
    alg: AlgorithmId,
    branches: usize,
    len: usize,
) -> Vec<LoggedEvent> {
    let mut events = Vec::with_capacity(len);
    for seq in 0..len as u64 {
        let roll = rng.random_range(0..100);
        let ev = if roll < 25 {
            let er = random_rate(rng);
            LoggedEvent::Frm(rm(
                CellKind::ForwardRm,
                er,
                rng.random_bool(0.1),
                rng.random_bool(0.1),
                er,
                seq,
            ))
        } else if roll < 70 {
            let cell = rm(
                CellKind::BackwardRm,
                random_rate(rng),
                rng.random_bool(0.1),
                rng.random_bool(0.1),
                random_rate(rng),
                seq,
            );
            LoggedEvent::Brm {
                branch: rng.random_range(0..branches),
                cell,
                local_er: (alg == AlgorithmId::A7).then(|| random_rate(rng)),
            }
        } else if roll < 97 {
            LoggedEvent::Scheduled {
                erica_er: random_rate(rng),
            }
        } else {
            LoggedEvent::Timeout
        };
        events.push(ev);
    }
    events
}

/// `cases` random sequences of 11 to 80 events, cycling through the
/// algorithms and 1 to 5 branches.
pub fn random_equivalence(cases: u64, seed: u64) -> CheckReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = CheckReport::default();
    for case in 0..cases {
        let alg = AlgorithmId::ALL[(case % 7) as usize];
        let branches = rng.random_range(1..=5);
        let len = rng.random_range(11..=80);
        let events = random_sequence(&mut rng, alg, branches, len);
        report.record(&events, &config(alg, branches));
    }
    report
}

/// All three checks with the default sizes.
pub fn full_check(random_cases: u64, seed: u64) -> CheckReport {
    let mut report = exhaustive_structural(10);
    report.merge(exhaustive_values(5));
    report.merge(random_equivalence(random_cases, seed));
    report
}
