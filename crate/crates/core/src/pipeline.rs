//! End-to-end embedding: extract → graph → long-idle split → traversal →
//! per-node solve → FVS split → quantize → insert. Also the context-free
//! baseline that puts two gates at 25% and 75% of every idle.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{bfs_traversal, build_graph, DdGraph, TraversalPlan};
use crate::oracle::{compute_residuals, ResidualLedger};
use crate::schedule::{extract_idles, insert_gates, DeviceModel, IdleWindow, ScheduledCircuit};
use crate::solver::solve_offset_preferring;
use crate::splitter::{split_fvs_node, split_long_idles, ContextChangeSet, LongSplitReport};
use crate::time::{ceil_to_grid, floor_to_grid, Interval, RationalTime, Tick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[serde(rename = "graphdd")]
    GraphDd,
    Standard,
    None,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::GraphDd => "graphdd",
            Strategy::Standard => "standard",
            Strategy::None => "none",
        })
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "graphdd" => Ok(Strategy::GraphDd),
            "standard" => Ok(Strategy::Standard),
            "none" => Ok(Strategy::None),
            other => Err(format!("unknown strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbedConfig {
    pub strategy: Strategy,
    pub max_idle: Option<Tick>,
    /// Unit granularity, instantaneous X gates, no rounding.
    pub exact: bool,
}

impl EmbedConfig {
    pub fn new(strategy: Strategy) -> Self {
        EmbedConfig {
            strategy,
            max_idle: None,
            exact: false,
        }
    }

    pub fn exact(strategy: Strategy) -> Self {
        EmbedConfig {
            exact: true,
            ..EmbedConfig::new(strategy)
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EmbedStats {
    pub idles: usize,
    pub skipped: usize,
    /// Graph nodes after long-idle splitting.
    pub nodes: usize,
    pub edges: usize,
    pub fvs: usize,
    pub gates: usize,
    pub long_splits: LongSplitReport,
    pub fvs_pieces: usize,
    pub fvs_merged: usize,
    pub fvs_fallbacks: usize,
    pub wall_time_us: u64,
    pub phases: BTreeMap<String, u64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Everything one embedding run produces.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub circuit: ScheduledCircuit,
    pub stats: EmbedStats,
    /// Computed on the output circuit, outside the timed region.
    pub ledger: ResidualLedger,
    /// Windows that received gates; FVS nodes appear as their pieces.
    pub windows: Vec<IdleWindow>,
    pub graph: Option<DdGraph>,
    pub plan: Option<TraversalPlan>,
}

impl Embedding {
    pub fn graph_dump(&self) -> Option<serde_json::Value> {
        Some(crate::graph::dump_json(self.graph.as_ref()?, self.plan.as_ref()?))
    }
}

struct PhaseClock {
    start: Instant,
    last: Instant,
    phases: BTreeMap<String, u64>,
}

impl PhaseClock {
    fn new() -> Self {
        let now = Instant::now();
        PhaseClock {
            start: now,
            last: now,
            phases: BTreeMap::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        let us = now.duration_since(self.last).as_micros() as u64;
        *self.phases.entry(name.to_string()).or_insert(0) += us;
        self.last = now;
    }

    fn finish(self, stats: &mut EmbedStats) {
        stats.wall_time = self.start.elapsed();
        stats.wall_time_us = stats.wall_time.as_micros() as u64;
        stats.phases = self.phases;
    }
}

/// The device the embedding actually targets under `config`.
pub fn effective_device(device: &DeviceModel, config: &EmbedConfig) -> Result<DeviceModel> {
    let base = if config.exact { device.exact() } else { device.clone() };
    match config.max_idle {
        Some(m) if m <= 0 => Err(Error::InvalidDevice(format!("max_idle override must be positive, got {m}"))),
        Some(m) => base.with_max_idle(m),
        None => Ok(base),
    }
}

/// Snap gate centres onto the device grid inside `window`. Returns pulse
/// start ticks: nearest grid point (ties down), clamped so the pulse fits,
/// then pushed right until consecutive pulses do not overlap.
pub fn quantize(gate_times: &[RationalTime], window: &Interval, device: &DeviceModel) -> Result<Vec<Tick>> {
    let g = device.granularity();
    let xd = device.x_gate_duration();
    let lo = ceil_to_grid(&window.start, g);
    let hi = floor_to_grid(&(&window.end - &RationalTime::from_tick(xd)), g);
    let too_small = || Error::WindowTooSmall {
        start: window.start.clone(),
        end: window.end.clone(),
        gates: gate_times.len(),
    };
    if lo > hi && !gate_times.is_empty() {
        return Err(too_small());
    }
    let half = RationalTime::new(xd, 2);
    let step = xd.max(1);
    let mut out: Vec<Tick> = Vec::with_capacity(gate_times.len());
    for t in gate_times {
        let mut s = (t - &half).round_to_grid(g).clamp(lo, hi);
        if let Some(&p) = out.last() {
            s = s.max(ceil_to_grid(&RationalTime::from_tick(p + step), g));
        }
        out.push(s);
    }
    // A sweep that ran past the end is pulled back from the right.
    if out.last().is_some_and(|&s| s > hi) {
        let mut next = hi + step;
        for s in out.iter_mut().rev() {
            let max = floor_to_grid(&RationalTime::from_tick(next - step), g);
            *s = (*s).min(max);
            next = *s;
        }
        if out[0] < lo {
            return Err(too_small());
        }
    }
    Ok(out)
}

fn centres(starts: &[Tick], device: &DeviceModel) -> Vec<RationalTime> {
    let half = RationalTime::new(device.x_gate_duration(), 2);
    starts.iter().map(|&s| &RationalTime::from_tick(s) + &half).collect()
}

/// Dispatch on `config.strategy`.
pub fn embed(circuit: &ScheduledCircuit, device: &DeviceModel, config: &EmbedConfig) -> Result<Embedding> {
    match config.strategy {
        Strategy::GraphDd => graphdd_embed(circuit, device, config),
        Strategy::Standard => standard_dd_embed(circuit, device, config),
        Strategy::None => passthrough(circuit, device, config),
    }
}

fn passthrough(circuit: &ScheduledCircuit, device: &DeviceModel, config: &EmbedConfig) -> Result<Embedding> {
    let dev = effective_device(device, config)?;
    let mut clock = PhaseClock::new();
    let ex = extract_idles(circuit, &dev);
    clock.lap("extract");
    let mut stats = EmbedStats {
        idles: ex.windows.len(),
        skipped: ex.skipped.len(),
        nodes: ex.windows.len(),
        ..EmbedStats::default()
    };
    clock.finish(&mut stats);
    Ok(Embedding {
        circuit: circuit.clone(),
        ledger: compute_residuals(circuit, &dev),
        stats,
        windows: Vec::new(),
        graph: None,
        plan: None,
    })
}

/// Two gates per idle at 25% and 75% of its length.
pub fn standard_dd_embed(circuit: &ScheduledCircuit, device: &DeviceModel, config: &EmbedConfig) -> Result<Embedding> {
    let dev = effective_device(device, config)?;
    let mut clock = PhaseClock::new();
    let ex = extract_idles(circuit, &dev);
    clock.lap("extract");
    let mut windows = ex.windows;
    for w in &mut windows {
        let quarter = w.duration() / 4;
        let ideal = vec![&w.start + &quarter, &w.end - &quarter];
        w.gates = if config.exact {
            ideal
        } else {
            centres(&quantize(&ideal, &w.interval(), &dev)?, &dev)
        };
    }
    clock.lap("embed");
    let out = insert_gates(circuit, &windows, &dev)?;
    clock.lap("insert");
    let mut stats = EmbedStats {
        idles: windows.len(),
        skipped: ex.skipped.len(),
        nodes: windows.len(),
        gates: out.dd_gate_count() - circuit.dd_gate_count(),
        ..EmbedStats::default()
    };
    clock.finish(&mut stats);
    Ok(Embedding {
        ledger: compute_residuals(&out, &dev),
        circuit: out,
        stats,
        windows,
        graph: None,
        plan: None,
    })
}

/// The graph-based embedding.
pub fn graphdd_embed(circuit: &ScheduledCircuit, device: &DeviceModel, config: &EmbedConfig) -> Result<Embedding> {
    let dev = effective_device(device, config)?;
    let exact = config.exact;
    let mut clock = PhaseClock::new();

    let ex = extract_idles(circuit, &dev);
    let idles = ex.windows.len();
    clock.lap("extract");

    let graph = build_graph(ex.windows, &dev);
    clock.lap("graph");

    let (mut graph, long_splits) = if graph.nodes().iter().any(|w| w.duration() > dev.max_idle()) {
        let mut changes = ContextChangeSet::from_windows(graph.nodes(), &dev);
        let (windows, report) = split_long_idles(graph.into_nodes(), &dev, &mut changes);
        (build_graph(windows, &dev), report)
    } else {
        (graph, LongSplitReport::default())
    };
    clock.lap("split");

    let plan = bfs_traversal(&graph);
    clock.lap("traverse");

    // Preferred offsets keep the first pulse clear of the window start and
    // the second clear of its end.
    let lead = RationalTime::new(dev.x_gate_duration(), 2);
    for &u in plan.order.iter().filter(|&&u| !plan.is_fvs(u)) {
        let node = graph.node(u);
        let ancestor = plan.parent[u].map(|p| {
            let edge = graph.edge_between(u, p).expect("parent is a neighbour");
            (graph.node(p), &edge.overlap)
        });
        let hi = &node.duration().half() - &lead;
        let sol = solve_offset_preferring(node, ancestor, &lead, &hi);
        let gates = if exact {
            sol.gate_times.to_vec()
        } else {
            centres(&quantize(&sol.gate_times, &node.interval(), &dev)?, &dev)
        };
        graph.set_gates(u, gates);
    }
    clock.lap("embed");

    let min_len = if exact {
        RationalTime::zero()
    } else {
        RationalTime::from_tick(dev.min_embeddable())
    };
    let mut done = vec![false; graph.len()];
    let mut pieces_by_node: BTreeMap<usize, Vec<IdleWindow>> = BTreeMap::new();
    let (mut fvs_pieces, mut fvs_merged, mut fvs_fallbacks) = (0, 0, 0);
    for &u in &plan.fvs {
        let split = {
            let neighbours: Vec<(&IdleWindow, Interval)> = graph
                .incident(u)
                .iter()
                .map(|&e| &graph.edges()[e])
                .filter(|e| {
                    let v = e.other(u);
                    !plan.is_fvs(v) || done[v]
                })
                .map(|e| (graph.node(e.other(u)), e.overlap.clone()))
                .collect();
            split_fvs_node(graph.node(u), &neighbours, &min_len, &lead)
        };
        let mut pieces = split.pieces;
        if !exact {
            let ideal: Vec<RationalTime> = pieces.iter().flat_map(|p| p.gates.iter().cloned()).collect();
            let snapped = centres(&quantize(&ideal, &graph.node(u).interval(), &dev)?, &dev);
            for (p, pair) in pieces.iter_mut().zip(snapped.chunks(2)) {
                p.gates = pair.to_vec();
            }
        }
        fvs_pieces += pieces.len();
        fvs_merged += split.merged;
        fvs_fallbacks += split.fallbacks;
        graph.set_gates(u, pieces.iter().flat_map(|p| p.gates.iter().cloned()).collect());
        pieces_by_node.insert(u, pieces);
        done[u] = true;
    }
    clock.lap("fvs");

    let mut embedded = Vec::with_capacity(graph.len() + fvs_pieces);
    for w in graph.nodes() {
        match pieces_by_node.get(&w.id) {
            Some(pieces) => embedded.extend(pieces.iter().cloned()),
            None => embedded.push(w.clone()),
        }
    }
    let out = insert_gates(circuit, &embedded, &dev)?;
    clock.lap("insert");

    let mut stats = EmbedStats {
        idles,
        skipped: ex.skipped.len(),
        nodes: graph.len(),
        edges: graph.edges().len(),
        fvs: plan.fvs.len(),
        gates: out.dd_gate_count() - circuit.dd_gate_count(),
        long_splits,
        fvs_pieces,
        fvs_merged,
        fvs_fallbacks,
        ..EmbedStats::default()
    };
    clock.finish(&mut stats);
    log::debug!(
        "graphdd: {} idles, {} nodes, {} edges, {} fvs, {} gates in {} us",
        stats.idles,
        stats.nodes,
        stats.edges,
        stats.fvs,
        stats.gates,
        stats.wall_time_us
    );
    Ok(Embedding {
        ledger: compute_residuals(&out, &dev),
        circuit: out,
        stats,
        windows: embedded,
        graph: Some(graph),
        plan: Some(plan),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Instruction;

    fn rt(n: i64) -> RationalTime {
        RationalTime::from_tick(n)
    }

    fn dev(g: Tick, xd: Tick) -> DeviceModel {
        DeviceModel::new(2, &[(0, 1)], g, xd, 100_000, None).unwrap()
    }

    #[test]
    fn quantize_on_grid_is_identity() {
        let d = dev(8, 0);
        let q = quantize(&[rt(16), rt(64)], &Interval::new(0, 100), &d).unwrap();
        assert_eq!(q, vec![16, 64]);
    }

    #[test]
    fn quantize_nearest() {
        let d = dev(16, 0);
        let q = quantize(&[RationalTime::new(1000, 3)], &Interval::new(0, 1000), &d).unwrap();
        assert_eq!(q, vec![336]);
    }

    #[test]
    fn quantize_clamps_and_separates() {
        let d = dev(2, 2);
        // Both centres would round onto the same slot.
        let q = quantize(&[rt(1), rt(2)], &Interval::new(0, 8), &d).unwrap();
        assert_eq!(q, vec![0, 2]);
        let err = quantize(&[rt(1), rt(2), rt(3), rt(4)], &Interval::new(0, 6), &d);
        assert!(matches!(err, Err(Error::WindowTooSmall { .. })));
    }

    fn single_idle() -> ScheduledCircuit {
        ScheduledCircuit::new(
            "d",
            1,
            vec![
                Instruction::gate("h", vec![0], 0, 40),
                Instruction::gate("h", vec![0], 1040, 40),
            ],
        )
        .unwrap()
    }

    #[test]
    fn no_idles_means_no_change() {
        let c = ScheduledCircuit::new("d", 1, vec![Instruction::measure(vec![0], 0, 100)]).unwrap();
        let e = graphdd_embed(&c, &dev(1, 0), &EmbedConfig::exact(Strategy::GraphDd)).unwrap();
        assert_eq!(e.circuit, c);
        assert_eq!(e.stats.gates, 0);
    }

    #[test]
    fn lone_idle_gets_start_and_midpoint() {
        let e = graphdd_embed(&single_idle(), &dev(1, 0), &EmbedConfig::exact(Strategy::GraphDd)).unwrap();
        assert_eq!(e.windows[0].gates, vec![rt(40), rt(540)]);
        assert!(e.ledger.is_zero());
    }

    #[test]
    fn standard_quarters() {
        let e = standard_dd_embed(&single_idle(), &dev(1, 0), &EmbedConfig::exact(Strategy::Standard)).unwrap();
        assert_eq!(e.windows[0].gates, vec![rt(290), rt(790)]);
        assert!(e.ledger.max_abs_z.is_zero());
    }

    #[test]
    fn standard_tiny_window_on_coarse_grid() {
        let c = ScheduledCircuit::new(
            "d",
            1,
            vec![
                Instruction::gate("h", vec![0], 0, 4),
                Instruction::gate("h", vec![0], 8, 4),
            ],
        )
        .unwrap();
        let e = standard_dd_embed(&c, &dev(2, 0), &EmbedConfig::new(Strategy::Standard)).unwrap();
        let starts: Vec<_> = e.circuit.instructions().iter().filter(|i| i.dd).map(|i| i.start.clone()).collect();
        assert_eq!(starts, vec![rt(4), rt(6)]);
    }

    #[test]
    fn passthrough_keeps_circuit() {
        let e = embed(&single_idle(), &dev(1, 0), &EmbedConfig::new(Strategy::None)).unwrap();
        assert_eq!(e.circuit, single_idle());
        assert_eq!(e.ledger.max_abs_z, rt(1000));
    }

    #[test]
    fn quantized_pulses_sit_on_grid() {
        let d = dev(8, 40);
        let e = graphdd_embed(&single_idle(), &d, &EmbedConfig::new(Strategy::GraphDd)).unwrap();
        for i in e.circuit.instructions().iter().filter(|i| i.dd) {
            assert_eq!(i.start.to_tick().unwrap() % 8, 0);
            assert_eq!(i.duration, 40);
        }
        assert!(e.ledger.max_abs_z <= rt(16));
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [Strategy::GraphDd, Strategy::Standard, Strategy::None] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("xy4".parse::<Strategy>().is_err());
    }
}
