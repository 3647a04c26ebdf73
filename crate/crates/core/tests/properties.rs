use abrsim::cells::{cell_time, CellKind, RmCell, VcId};
use abrsim::check::{compare, config, exhaustive_structural, exhaustive_values};
use abrsim::erica::{EricaParams, EricaPortState};
use abrsim::metrics::max_min_fair_rates;
use abrsim::metrics::oracle::LoggedEvent;
use abrsim::{parse_scenario, AlgorithmId};
use proptest::prelude::*;

fn rm(kind: CellKind, er: f64, ci: bool, ni: bool, ccr: f64, seq: u64) -> RmCell {
    RmCell {
        vc: VcId(3),
        kind,
        er,
        ci,
        ni,
        ccr,
        seq,
    }
}

fn rate() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::sample::select(vec![30.0, 70.0, 100.0, 149.76]),
        0.01f64..149.76,
    ]
}

fn event(branches: usize, a7: bool) -> impl Strategy<Value = LoggedEvent> {
    prop_oneof![
        3 => (rate(), any::<bool>(), any::<bool>()).prop_map(|(er, ci, ni)| {
            LoggedEvent::Frm(rm(CellKind::ForwardRm, er, ci, ni, er, 0))
        }),
        5 => (0..branches, rate(), rate(), any::<bool>(), any::<bool>(), rate()).prop_map(
            move |(branch, er, ccr, ci, ni, local)| LoggedEvent::Brm {
                branch,
                cell: rm(CellKind::BackwardRm, er, ci, ni, ccr, 0),
                local_er: a7.then_some(local),
            }
        ),
        3 => rate().prop_map(|erica_er| LoggedEvent::Scheduled { erica_er }),
        1 => Just(LoggedEvent::Timeout),
    ]
}

fn case() -> impl Strategy<Value = (AlgorithmId, usize, Vec<LoggedEvent>)> {
    (prop::sample::select(AlgorithmId::ALL.to_vec()), 1usize..=6).prop_flat_map(|(alg, n)| {
        (
            Just(alg),
            Just(n),
            prop::collection::vec(event(n, alg == AlgorithmId::A7), 0..120),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn consolidation_matches_reference((alg, branches, events) in case()) {
        let cfg = config(alg, branches);
        if let Err(m) = compare(&events, &cfg) {
            prop_assert!(false, "{}", m);
        }
    }

    #[test]
    fn stamping_is_monotone_and_capped(
        input_mbps in 0.0f64..400.0,
        vcs in 1u32..8,
        ccr in 0.01f64..149.76,
        er in 0.0f64..149.76,
        prev in 0.0f64..149.76,
    ) {
        let mut p = EricaPortState::new(EricaParams::default(), 149.76);
        p.abr_input_bits = input_mbps * 1e3;
        p.active_vcs.extend((0..vcs).map(VcId));
        p.close_interval(1e-3);
        p.max_er_prev = prev;
        let cap = p.abr_capacity;
        let out = p.stamp_brm(rm(CellKind::BackwardRm, er, false, false, ccr, 0));
        prop_assert!(out.er <= er);
        prop_assert!(out.er <= cap + 1e-12);
        prop_assert!(p.fair_share * vcs as f64 <= cap + 1e-9);
        prop_assert!(p.z > 0.0);
    }
}

#[test]
fn exhaustive_short_sequences_match_reference() {
    let r = exhaustive_structural(6);
    assert_eq!(r.sequences, 7 * 4u64.pow(6));
    assert_eq!(r.mismatch_count, 0, "{}", r.mismatches[0]);
    let r = exhaustive_values(3);
    assert_eq!(r.sequences, 7 * 16u64.pow(3));
    assert_eq!(r.mismatch_count, 0, "{}", r.mismatches[0]);
}

#[test]
fn cell_timing_constants() {
    // 424 bits at 149.76 Mbps, computed in integers: 424 / 149_760_000 s.
    let exact_ps = 424.0 * 1e12 / 149_760_000.0;
    assert!((cell_time(149.76) * 1e12 - exact_ps).abs() < 1e-3);
    assert!((cell_time(149.76) * 1e6 - 2.8312).abs() < 1e-4);
}

#[test]
fn erica_two_vc_overload_arithmetic() {
    // Integer micro-Mbps arithmetic: 0.9 * 149_760_000 = 134_784_000,
    // 269_568_000 / 134_784_000 = 2, 134_784_000 / 2 = 67_392_000.
    let capacity_u = 9 * 149_760_000u64 / 10;
    assert_eq!(capacity_u, 134_784_000);
    assert_eq!(269_568_000 / capacity_u, 2);
    let fair_u = capacity_u / 2;

    let mut p = EricaPortState::new(EricaParams::default(), 149.76);
    p.abr_input_bits = 269_568.0;
    p.active_vcs.extend([VcId(0), VcId(1)]);
    p.close_interval(1e-3);
    assert!((p.abr_capacity - capacity_u as f64 / 1e6).abs() < 1e-9);
    assert!((p.z - 2.0).abs() < 1e-12);
    assert!((p.fair_share - fair_u as f64 / 1e6).abs() < 1e-9);
    let er = p.compute_er(134.784);
    assert!((er - 67.392).abs() < 1e-9);
}

/// Builds a line of switches with point-to-point VCs spanning sub-ranges.
fn line_scenario(rates: &[f64], spans: &[(usize, usize)]) -> String {
    let mut t = String::new();
    let n = rates.len() + 1;
    for i in 0..n {
        t += &format!("[[node]]\nname = \"Sw{i}\"\nkind = \"switch\"\n");
    }
    for (i, r) in rates.iter().enumerate() {
        t += &format!(
            "[[link]]\na = \"Sw{i}\"\nb = \"Sw{}\"\nlength_km = 1\nrate_mbps = {r}\n",
            i + 1
        );
    }
    for (v, &(from, to)) in spans.iter().enumerate() {
        t += &format!("[[node]]\nname = \"S{v}\"\nkind = \"source\"\n");
        t += &format!("[[node]]\nname = \"D{v}\"\nkind = \"destination\"\n");
        t += &format!(
            "[[link]]\na = \"S{v}\"\nb = \"Sw{from}\"\nlength_km = 1\nrate_mbps = 10000\n"
        );
        t += &format!("[[link]]\na = \"Sw{to}\"\nb = \"D{v}\"\nlength_km = 1\nrate_mbps = 10000\n");
        let hops: Vec<String> = std::iter::once(format!("\"S{v}\""))
            .chain((from..=to).map(|i| format!("\"Sw{i}\"")))
            .chain(std::iter::once(format!("\"D{v}\"")))
            .collect();
        t += &format!(
            "[[vc]]\nname = \"V{v}\"\npaths = [[{}]]\npcr_mbps = 10000\nicr_mbps = 10000\n",
            hops.join(", ")
        );
    }
    t
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Max-min fairness, checked from its definition: every VC crosses a
    /// saturated link on which no other VC gets more.
    #[test]
    fn water_filling_is_max_min_fair(
        rates in prop::collection::vec(10.0f64..200.0, 1..5),
        raw_spans in prop::collection::vec((0usize..8, 0usize..8), 1..6),
    ) {
        let links = rates.len();
        let spans: Vec<(usize, usize)> = raw_spans
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (a % links, b % links);
                (a.min(b), a.max(b) + 1)
            })
            .collect();
        let s = parse_scenario(&line_scenario(&rates, &spans)).unwrap();
        let fair = max_min_fair_rates(&s);
        let uses = |v: usize, l: usize| spans[v].0 <= l && l < spans[v].1;
        let cap = |l: usize| 0.9 * rates[l];
        for l in 0..links {
            let load: f64 = (0..spans.len()).filter(|&v| uses(v, l)).map(|v| fair[v].unwrap()).sum();
            prop_assert!(load <= cap(l) + 1e-6, "link {l} overloaded");
        }
        for v in 0..spans.len() {
            let r = fair[v].unwrap();
            let bottleneck = (0..links).filter(|&l| uses(v, l)).any(|l| {
                let load: f64 = (0..spans.len()).filter(|&w| uses(w, l)).map(|w| fair[w].unwrap()).sum();
                let saturated = (load - cap(l)).abs() <= 1e-6;
                let largest = (0..spans.len()).filter(|&w| uses(w, l)).all(|w| fair[w].unwrap() <= r + 1e-6);
                saturated && largest
            });
            prop_assert!(bottleneck, "vc {v} at {r} has no bottleneck");
        }
    }
}

#[test]
fn background_load_is_taken_off_abr_capacity() {
    // 100 Mbps of VBR on a 149.76 Mbps link: 134.784 - 100 = 34.784.
    let mut p = EricaPortState::new(EricaParams::default(), 149.76);
    p.vbr_cbr_bits = 100_000.0;
    p.abr_input_bits = 34_784.0;
    p.active_vcs.insert(VcId(0));
    p.close_interval(1e-3);
    assert!((p.abr_capacity - 34.784).abs() < 1e-9);
    assert!((p.z - 1.0).abs() < 1e-9);
    assert!((p.compute_er(34.784) - 34.784).abs() < 1e-9);
}
