mod common;

use graphdd_core::bench::{gen_bv, gen_qft, GateDurations, TopologyKind, TopologySpec};
use graphdd_core::graph::{build_graph, connected_components};
use graphdd_core::oracle::{success_proxy, NoiseDraw, NoiseRange};
use graphdd_core::pipeline::{embed, EmbedConfig, Embedding, Strategy};
use graphdd_core::{extract_idles, parse_circuit, DeviceModel, Instruction, RationalTime, ScheduledCircuit};

fn run(c: &ScheduledCircuit, d: &DeviceModel, strategy: Strategy, exact: bool) -> Embedding {
    let cfg = if exact {
        EmbedConfig::exact(strategy)
    } else {
        EmbedConfig::new(strategy)
    };
    embed(c, d, &cfg).unwrap()
}

fn bv(width: usize) -> (ScheduledCircuit, DeviceModel) {
    let d = TopologySpec::line(width).default_device().unwrap();
    (gen_bv(width, &d, &GateDurations::default()).unwrap(), d)
}

fn qft(width: usize) -> (ScheduledCircuit, DeviceModel) {
    let d = TopologySpec::line(width).default_device().unwrap();
    (gen_qft(width, &d, &GateDurations::default()).unwrap(), d)
}

fn median(mut xs: Vec<RationalTime>) -> RationalTime {
    xs.sort();
    xs[xs.len() / 2].clone()
}

#[test]
fn fixture_has_nine_windows_in_two_components() {
    let (c, d) = common::two_component_fixture();
    let windows = extract_idles(&c, &d).windows;
    assert_eq!(windows.len(), 9);
    assert_eq!(windows.iter().map(|w| w.id).collect::<Vec<_>>(), (0..9).collect::<Vec<_>>());
    let g = build_graph(windows, &d);
    assert_eq!(connected_components(&g).len(), 2);
}

#[test]
fn fixture_embeds_exactly_without_fvs() {
    let (c, d) = common::two_component_fixture();
    let e = run(&c, &d, Strategy::GraphDd, true);
    assert_eq!(e.stats.nodes, 9);
    assert_eq!(e.stats.fvs, 0);
    assert_eq!(e.stats.gates, 18);
    assert!(e.ledger.is_zero(), "{}", e.ledger.to_json());
}

#[test]
fn bv5_round_trips_through_json() {
    let (c, d) = bv(5);
    let text = c.to_json();
    let back = parse_circuit(text.as_bytes(), &d).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.to_json(), text);
}

#[test]
fn bv10_uses_two_gates_per_window() {
    let (c, d) = bv(10);
    let e = run(&c, &d, Strategy::GraphDd, true);
    assert_eq!(e.stats.skipped, 0);
    assert_eq!(e.stats.gates, 2 * e.windows.len());
    assert_eq!(e.windows.len(), e.stats.nodes - e.stats.fvs + e.stats.fvs_pieces);
    let inserted = e.circuit.instructions().iter().filter(|i| i.dd).count();
    assert_eq!(inserted, e.stats.gates);
}

#[test]
fn bv20_and_qft16_refocus_exactly() {
    for (c, d) in [bv(20), qft(16)] {
        let e = run(&c, &d, Strategy::GraphDd, true);
        assert!(e.ledger.is_zero(), "{}", c.device());
        assert!(!e.ledger.zz.is_empty());
    }
}

#[test]
fn bv_idle_count_is_linear_in_width() {
    let counts: Vec<usize> = (4..=12).map(|w| extract_idles(&bv(w).0, &bv(w).1).windows.len()).collect();
    let steps: Vec<isize> = counts.windows(2).map(|p| p[1] as isize - p[0] as isize).collect();
    assert!(steps.iter().all(|&s| s == steps[0] && s > 0), "{counts:?}");
}

#[test]
fn qft8_has_more_but_shorter_idles_than_bv8() {
    let (bc, bd) = bv(8);
    let (qc, qd) = qft(8);
    let b = extract_idles(&bc, &bd).windows;
    let q = extract_idles(&qc, &qd).windows;
    assert!(q.len() > b.len(), "qft {} vs bv {}", q.len(), b.len());
    let bm = median(b.iter().map(|w| w.duration()).collect());
    let qm = median(q.iter().map(|w| w.duration()).collect());
    assert!(qm < bm, "qft median {qm} vs bv median {bm}");
}

#[test]
fn standard_dd_leaks_on_asynchronous_idles() {
    // q0 idles over [100, 1100), q1 over [400, 1400).
    let d = DeviceModel::new(2, &[(0, 1)], 1, 0, 100_000, None).unwrap();
    let c = ScheduledCircuit::new(
        "pair",
        2,
        vec![
            Instruction::gate("h", vec![0], 0, 100),
            Instruction::gate("h", vec![1], 0, 400),
            Instruction::gate("h", vec![0], 1100, 400),
            Instruction::gate("h", vec![1], 1400, 100),
            Instruction::measure(vec![0, 1], 1500, 1600),
        ],
    )
    .unwrap();
    let s = run(&c, &d, Strategy::Standard, true);
    assert!(s.ledger.max_abs_z.is_zero());
    assert!(!s.ledger.max_abs_zz.is_zero());
    let g = run(&c, &d, Strategy::GraphDd, true);
    assert!(g.ledger.is_zero());
}

#[test]
fn graphdd_proxy_dominates_on_every_draw() {
    let (c, d) = bv(10);
    let g = run(&c, &d, Strategy::GraphDd, false);
    let s = run(&c, &d, Strategy::Standard, false);
    for draw in NoiseDraw::series(&d, 500, 100, NoiseRange::default()) {
        let one = std::slice::from_ref(&draw);
        let (pg, ps) = (success_proxy(&g.ledger, one), success_proxy(&s.ledger, one));
        assert!(pg >= ps, "seed {}: {pg} < {ps}", draw.seed);
    }
}

#[test]
fn re_embedding_keeps_residuals_zero() {
    let (c, d) = common::two_component_fixture();
    let once = run(&c, &d, Strategy::GraphDd, true);
    let twice = run(&once.circuit, &d, Strategy::GraphDd, true);
    assert!(twice.ledger.is_zero());
}

#[test]
fn heavy_hex_edges_by_enumeration() {
    let d = TopologySpec { kind: TopologyKind::HeavyHex, width: 127 }.default_device().unwrap();
    let n = d.num_qubits();
    let mut degree = vec![0; n];
    let mut edges = 0;
    for a in 0..n {
        for b in a + 1..n {
            if d.coupled(a, b) {
                edges += 1;
                degree[a] += 1;
                degree[b] += 1;
            }
        }
    }
    assert_eq!(n, 127);
    assert_eq!(edges, 144);
    assert!(degree.iter().all(|&k| (1..=3).contains(&k)));
    // Connected, and the cycle rank matches the hexagon count.
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            if !seen[v] && d.coupled(u, v) {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(edges + 1 - n, 18);
}
