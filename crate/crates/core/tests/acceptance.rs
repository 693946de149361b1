//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Run with `cargo test --test acceptance`.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use graphdd_core::bench::{gen_bv, gen_qft, GateDurations, TopologySpec};
use graphdd_core::oracle::{ideal_unitary, predicted_unitary, simulate_dense, success_proxy, NoiseDraw, NoiseRange};
use graphdd_core::pipeline::{graphdd_embed, standard_dd_embed, EmbedConfig, Embedding, Strategy};
use graphdd_core::solver::{
    closed_form_subinterval, delta_of_offset, sign_integral, sign_product_integral, solve_offset, OffsetSolution,
    SignFunction,
};
use graphdd_core::{DeviceModel, IdleWindow, Instruction, Interval, RationalTime, ScheduledCircuit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn rt(n: i64) -> RationalTime {
    RationalTime::from_tick(n)
}

fn graphdd(c: &ScheduledCircuit, d: &DeviceModel, exact: bool) -> Embedding {
    let cfg = if exact {
        EmbedConfig::exact(Strategy::GraphDd)
    } else {
        EmbedConfig::new(Strategy::GraphDd)
    };
    graphdd_embed(c, d, &cfg).expect("graphdd embed")
}

fn standard(c: &ScheduledCircuit, d: &DeviceModel, exact: bool) -> Embedding {
    let cfg = if exact {
        EmbedConfig::exact(Strategy::Standard)
    } else {
        EmbedConfig::new(Strategy::Standard)
    };
    standard_dd_embed(c, d, &cfg).expect("standard embed")
}

fn bv(width: usize) -> (ScheduledCircuit, DeviceModel) {
    let d = TopologySpec::line(width).default_device().unwrap();
    (gen_bv(width, &d, &GateDurations::default()).unwrap(), d)
}

fn qft(width: usize) -> (ScheduledCircuit, DeviceModel) {
    let d = TopologySpec::line(width).default_device().unwrap();
    (gen_qft(width, &d, &GateDurations::default()).unwrap(), d)
}

/// Random suite plus BV 2..=20 and QFT 2..=16, labelled.
fn exact_corpus() -> Vec<(String, ScheduledCircuit, DeviceModel)> {
    let mut out: Vec<_> = common::random_suite()
        .into_iter()
        .enumerate()
        .map(|(k, (c, d))| (format!("random#{k}"), c, d))
        .collect();
    for w in 2..=20 {
        let (c, d) = bv(w);
        out.push((format!("bv{w}"), c, d));
    }
    for w in 2..=16 {
        let (c, d) = qft(w);
        out.push((format!("qft{w}"), c, d));
    }
    out
}

fn exact_refocusing() -> Outcome {
    let t = Instant::now();
    let corpus = exact_corpus();
    let mut entries = 0;
    for (name, c, d) in &corpus {
        let e = graphdd(c, d, true);
        if let Some(z) = e.ledger.nonzero_z().next() {
            return Err(format!("{name}: Z residual {} on idle {}", z.residual, z.idle));
        }
        if let Some(zz) = e.ledger.nonzero_zz().next() {
            return Err(format!("{name}: ZZ residual {} on idles {:?}", zz.residual, zz.idles));
        }
        entries += e.ledger.z.len() + e.ledger.zz.len();
    }
    let elapsed = t.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("all zero but took {elapsed:.1?}"));
    }
    Ok(format!("{} circuits, {entries} ledger entries all exactly 0, {elapsed:.2?}", corpus.len()))
}

fn asynchronous_pair() -> (ScheduledCircuit, DeviceModel) {
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
    (c, d)
}

fn baseline_gap() -> Outcome {
    let (c, d) = asynchronous_pair();
    let s = standard(&c, &d, true);
    let g = graphdd(&c, &d, true);
    if s.ledger.max_abs_zz.is_zero() {
        return Err("standard DD refocused the asynchronous pair".into());
    }
    if !g.ledger.is_zero() {
        return Err(format!("graphdd left ZZ {} on the asynchronous pair", g.ledger.max_abs_zz));
    }
    let (mut mutual, mut leaky) = (0, 0);
    for (c, d) in common::random_suite() {
        let s = standard(&c, &d, false);
        if s.ledger.zz.is_empty() {
            continue;
        }
        mutual += 1;
        if s.ledger.nonzero_zz().next().is_some() {
            leaky += 1;
        }
    }
    let msg = format!(
        "pair: standard ZZ {}, graphdd 0; random suite: {leaky}/{mutual} circuits with mutual idles leak ZZ under standard DD",
        s.ledger.max_abs_zz
    );
    if mutual == 0 || 2 * leaky < mutual {
        Err(msg)
    } else {
        Ok(msg)
    }
}

fn window(s: i64, e: i64, gates: &[RationalTime]) -> IdleWindow {
    let mut w = IdleWindow::new(0, 0, rt(s), rt(e));
    w.gates = gates.to_vec();
    w
}

fn zz_of(sol: &OffsetSolution, current: &IdleWindow, ancestor: &IdleWindow, overlap: &Interval) -> RationalTime {
    let c = SignFunction::new(current.interval(), sol.gate_times.to_vec());
    sign_product_integral(&SignFunction::of_window(ancestor), &c, overlap)
}

fn z_of(sol: &OffsetSolution, current: &IdleWindow) -> RationalTime {
    let c = SignFunction::new(current.interval(), sol.gate_times.to_vec());
    sign_integral(&c, &current.interval())
}

fn closed_form_equivalence() -> Outcome {
    let ancestor_span = (-500, 1500);
    let examples: [(&[i64], [i64; 2]); 3] = [(&[-50, 1200], [0, 500]), (&[400, 1450], [200, 700]), (&[300, 600], [450, 950])];
    let current = window(0, 1000, &[]);
    for (gates, want) in examples {
        let g: Vec<_> = gates.iter().map(|&x| rt(x)).collect();
        let anc = window(ancestor_span.0, ancestor_span.1, &g);
        let sol = closed_form_subinterval(&current, &anc).map_err(|e| e.to_string())?;
        if sol.gate_times != want.map(rt) {
            return Err(format!("ancestor gates {gates:?}: got {:?}, want {want:?}", sol.gate_times));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..1000 {
        let a_start = rng.gen_range(-2000..0);
        let a_end = rng.gen_range(1..2000);
        let s = rng.gen_range(a_start..a_end - 1);
        let e = rng.gen_range(s + 1..=a_end);
        let f1 = rng.gen_range(a_start..a_end);
        let f2 = rng.gen_range(f1 + 1..=a_end);
        let flips = [f1, f2];
        let anc = window(a_start, a_end, &flips.iter().map(|&x| rt(x)).collect::<Vec<_>>());
        let cur = window(s, e, &[]);
        let overlap = cur.interval();
        let closed = closed_form_subinterval(&cur, &anc).map_err(|err| format!("config {k}: {err}"))?;
        let general = solve_offset(&cur, Some((&anc, &overlap)));
        for (label, sol) in [("closed form", &closed), ("solver", &general)] {
            let zz = zz_of(sol, &cur, &anc, &overlap);
            let z = z_of(sol, &cur);
            if !zz.is_zero() || !z.is_zero() {
                return Err(format!(
                    "config {k} ({label}): current [{s}, {e}) ancestor [{a_start}, {a_end}) flips {flips:?}: Z {z}, ZZ {zz}"
                ));
            }
        }
    }
    Ok("3 worked examples exact; 1000 random sub-intervals, both methods give Z = ZZ = 0".into())
}

fn antisymmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut nonzero_delta = 0;
    for k in 0..1000 {
        let s = rng.gen_range(0..1000);
        let e = s + rng.gen_range(1..2000);
        let ov_s = rng.gen_range(s..e);
        let ov_e = rng.gen_range(ov_s + 1..=e);
        let overlap = Interval::new(ov_s, ov_e);
        let a_start = ov_s - rng.gen_range(0..500);
        let a_end = ov_e + rng.gen_range(0..500);
        // Flips on a fine sub-grid so configurations are genuinely rational.
        let nflips = rng.gen_range(0..=6);
        let mut flips: Vec<RationalTime> = (0..nflips)
            .map(|_| RationalTime::new(rng.gen_range(a_start * 3..=a_end * 3), 3))
            .collect();
        flips.sort();
        flips.dedup();
        let cur = window(s, e, &[]);
        let half = cur.duration().half();
        let inside: Vec<RationalTime> = flips.iter().filter(|f| overlap.contains_strictly(f)).cloned().collect();
        let delta = delta_of_offset(&cur, &inside, &overlap);
        let (d0, dh) = (delta.eval(&RationalTime::zero()), delta.eval(&half));
        if d0 != -&dh {
            return Err(format!("config {k}: Δ(0) = {d0}, Δ(T/2) = {dh}"));
        }
        if !d0.is_zero() {
            nonzero_delta += 1;
        }
        let anc = window(a_start, a_end, &flips);
        let sol = solve_offset(&cur, Some((&anc, &overlap)));
        let zz = zz_of(&sol, &cur, &anc, &overlap);
        if !sol.residual_zz.is_zero() || !zz.is_zero() {
            return Err(format!("config {k}: solver residual {} (independent {zz})", sol.residual_zz));
        }
    }
    Ok(format!("1000 configurations ({nonzero_delta} with Δ(0) ≠ 0): antisymmetric, solver residual 0"))
}

/// Idle-only circuit on at most four qubits: pairs of logical X gates
/// separated by idles, closed by a barrier. Every qubit carries an even
/// number of logical X gates, so the ideal unitary is the identity.
fn idle_only_circuit(rng: &mut ChaCha8Rng) -> (ScheduledCircuit, DeviceModel) {
    let n = rng.gen_range(1..=4);
    let pairs: Vec<(usize, usize)> = if n == 4 && rng.gen_bool(0.5) {
        vec![(0, 1), (1, 2), (2, 3), (0, 3)]
    } else {
        (1..n).map(|q| (q - 1, q)).collect()
    };
    let d = DeviceModel::new(n, &pairs, 1, 0, 100_000, None).unwrap();
    let mut instrs = Vec::new();
    let mut end = 0;
    for q in 0..n {
        let mut t = rng.gen_range(0..300);
        let count = 2 * rng.gen_range(1..=3);
        for _ in 0..count {
            instrs.push(Instruction::gate("x", vec![q], t, 20));
            t += 20 + rng.gen_range(50..800);
        }
        end = end.max(t);
    }
    instrs.push(Instruction::barrier((0..n).collect(), end));
    (ScheduledCircuit::new("idle", n, instrs).unwrap(), d)
}

fn dense_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let range = NoiseRange { eps: 1e-3, j: 1e-3 };
    let (mut worst_g, mut worst_s, mut moved) = (0.0f64, 0.0f64, 0);
    for k in 0..50 {
        let (c, d) = idle_only_circuit(&mut rng);
        let draw = NoiseDraw::sample(&d, 500 + k, range);
        let g = graphdd(&c, &d, true);
        let ug = simulate_dense(&g.circuit, &d, &draw).map_err(|e| e.to_string())?;
        let ideal = ideal_unitary(&c).map_err(|e| e.to_string())?;
        let identity = graphdd_core::oracle::DenseUnitary::identity(c.num_qubits());
        if ideal.distance_up_to_phase(&identity) > 1e-12 {
            return Err(format!("circuit {k}: logical X gates do not cancel"));
        }
        worst_g = worst_g.max(ug.distance_up_to_phase(&identity));

        let s = standard(&c, &d, true);
        let us = simulate_dense(&s.circuit, &d, &draw).map_err(|e| e.to_string())?;
        let pred = predicted_unitary(&s.circuit, &s.ledger, &draw).map_err(|e| e.to_string())?;
        worst_s = worst_s.max(us.distance_up_to_phase(&pred));
        if us.distance_up_to_phase(&identity) > 1e-9 {
            moved += 1;
        }
    }
    let msg = format!(
        "50 circuits: graphdd vs identity {worst_g:.1e}, standard vs ledger prediction {worst_s:.1e} ({moved} standard unitaries visibly non-identity)"
    );
    if worst_g < 1e-9 && worst_s < 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn minimal_gates() -> Outcome {
    let mut total_nodes = 0;
    for (name, c, d) in exact_corpus() {
        let e = graphdd(&c, &d, true);
        let graph = e.graph.as_ref().expect("graph");
        let plan = e.plan.as_ref().expect("plan");
        for w in graph.nodes() {
            if !plan.is_fvs(w.id) && w.gates.len() != 2 {
                return Err(format!("{name}: node {} has {} gates", w.id, w.gates.len()));
            }
        }
        let post_split = graph.len() - plan.fvs.len() + e.stats.fvs_pieces;
        if e.stats.gates != 2 * post_split {
            return Err(format!("{name}: {} gates for {post_split} post-split nodes", e.stats.gates));
        }
        total_nodes += post_split;
    }
    Ok(format!("every non-FVS node has 2 gates; gates = 2 x nodes over {total_nodes} post-split nodes"))
}

fn worst_quantized(x_dur: i64) -> (RationalTime, RationalTime) {
    let (mut z, mut zz) = (RationalTime::zero(), RationalTime::zero());
    for k in 0..200 {
        let (c, d) = common::suite_member(k, 8, x_dur, 4000);
        let e = graphdd(&c, &d, false);
        z = z.max(e.ledger.max_abs_z.clone());
        zz = zz.max(e.ledger.max_abs_zz.clone());
    }
    (z, zz)
}

fn quantized_bound() -> Outcome {
    let g = 8;
    let (z, zz) = worst_quantized(0);
    let (z40, zz40) = worst_quantized(40);
    let msg = format!(
        "g = {g}, instantaneous pulses: worst |Z| {z} (bound {}), worst |ZZ| {zz} (bound {}); with 40-tick pulses: |Z| {z40}, |ZZ| {zz40}",
        2 * g,
        4 * g
    );
    if z <= rt(2 * g) && zz <= rt(4 * g) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

/// Median embed wall times `(graphdd, standard, idles)` over `reps` runs,
/// long-idle splitting disabled so that the idle count is also the node
/// count. The two strategies alternate so that machine load hits both.
fn timed(c: &ScheduledCircuit, d: &DeviceModel, reps: usize) -> (Duration, Duration, usize) {
    let configs = [Strategy::GraphDd, Strategy::Standard].map(|s| {
        let mut cfg = EmbedConfig::new(s);
        cfg.max_idle = Some(i64::MAX / 4);
        cfg
    });
    let mut times = [Vec::with_capacity(reps), Vec::with_capacity(reps)];
    let mut idles = 0;
    for _ in 0..reps {
        for (cfg, ts) in configs.iter().zip(&mut times) {
            let e = graphdd_core::pipeline::embed(c, d, cfg).expect("embed");
            idles = e.stats.idles;
            ts.push(e.stats.wall_time);
        }
    }
    let [g, s] = times;
    (median(g), median(s), idles)
}

/// Least-squares slope of log(time) against log(idles).
fn loglog_slope(points: &[(usize, Duration)]) -> f64 {
    let xs: Vec<f64> = points.iter().map(|p| (p.0 as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.as_secs_f64().ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

fn linear_scaling() -> Outcome {
    let reps = 15;
    let families: [(&str, Vec<(ScheduledCircuit, DeviceModel)>); 2] = [
        ("bv", [16, 32, 64, 128].map(bv).to_vec()),
        ("qft", [4, 8, 16, 32].map(qft).to_vec()),
    ];
    let mut parts = Vec::new();
    let mut failures = Vec::new();
    for (name, circuits) in &families {
        let mut points = Vec::new();
        let mut worst_ratio = 0.0f64;
        for (c, d) in circuits {
            let (tg, ts, idles) = timed(c, d, reps);
            worst_ratio = worst_ratio.max(tg.as_secs_f64() / ts.as_secs_f64());
            points.push((idles, tg));
        }
        let span = points.last().unwrap().0 as f64 / points[0].0 as f64;
        let per_doubling = 2f64.powf(loglog_slope(&points));
        parts.push(format!(
            "{name}: idles {}..{} ({span:.1}x), x{per_doubling:.2} per doubling, graphdd/standard <= {worst_ratio:.2}",
            points[0].0,
            points.last().unwrap().0
        ));
        if span < 8.0 {
            failures.push(format!("{name} idle span only {span:.1}x"));
        }
        if per_doubling > 2.5 {
            failures.push(format!("{name} grows x{per_doubling:.2} per doubling"));
        }
        if worst_ratio > 3.0 {
            failures.push(format!("{name} graphdd/standard ratio {worst_ratio:.2}"));
        }
    }
    let msg = parts.join("; ");
    if failures.is_empty() {
        Ok(msg)
    } else {
        Err(format!("{msg} [{}]", failures.join(", ")))
    }
}

fn proxy_ordering() -> Outcome {
    let mut cases: Vec<(String, ScheduledCircuit, DeviceModel)> = Vec::new();
    for w in [5, 10, 15, 20] {
        let (c, d) = bv(w);
        cases.push((format!("bv{w}"), c, d));
    }
    for w in [4, 8, 12, 16] {
        let (c, d) = qft(w);
        cases.push((format!("qft{w}"), c, d));
    }
    let mut parts = Vec::new();
    for (name, c, d) in &cases {
        let draws = NoiseDraw::series(d, 9000, 100, NoiseRange::default());
        let pg = success_proxy(&graphdd(c, d, false).ledger, &draws);
        let ps = success_proxy(&standard(c, d, false).ledger, &draws);
        let exact = success_proxy(&graphdd(c, d, true).ledger, &draws);
        if pg < ps {
            return Err(format!("{name}: graphdd {pg:.6} < standard {ps:.6}"));
        }
        if exact != 1.0 {
            return Err(format!("{name}: exact graphdd proxy {exact}"));
        }
        parts.push(format!("{name} {pg:.4}/{ps:.4}"));
    }
    Ok(format!("graphdd/standard: {}; exact graphdd = 1", parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("exact refocusing", exact_refocusing),
        ("baseline gap", baseline_gap),
        ("closed-form oracle equivalence", closed_form_equivalence),
        ("zero-crossing antisymmetry", antisymmetry),
        ("dense-simulator consistency", dense_consistency),
        ("minimal gate usage", minimal_gates),
        ("quantized-mode bound", quantized_bound),
        ("linear scaling", linear_scaling),
        ("monte-carlo ordering", proxy_ordering),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS  criterion {} ({name}): {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {} ({name}): {detail}", k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
