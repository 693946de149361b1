//! Benchmark circuits: synthetic topologies, an ASAP scheduler, and
//! BV-, QFT- and random-pattern generators.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::{DeviceModel, Instruction, Qubit, ScheduledCircuit};
use crate::time::{ceil_to_grid, RationalTime, Tick};

/// Default gate durations in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GateDurations {
    pub one_qubit: Tick,
    pub two_qubit: Tick,
    pub swap: Tick,
    pub measure: Tick,
    /// Per-coupling calibration spread: pair `(p, p + 1)` runs its two-qubit
    /// gates `k · two_qubit_spread` slower, with `k` in `0..=3` by position.
    /// Swaps, being three two-qubit gates, get three times that.
    pub two_qubit_spread: Tick,
}

impl Default for GateDurations {
    fn default() -> Self {
        GateDurations {
            one_qubit: 40,
            two_qubit: 280,
            swap: 840,
            measure: 1600,
            two_qubit_spread: 40,
        }
    }
}

impl GateDurations {
    fn pair_offset(&self, a: Qubit, b: Qubit) -> Tick {
        const STEPS: [Tick; 4] = [0, 2, 1, 3];
        STEPS[a.min(b) % 4] * self.two_qubit_spread
    }

    /// Two-qubit gate duration on the coupling `(a, b)`.
    pub fn two_qubit_on(&self, a: Qubit, b: Qubit) -> Tick {
        self.two_qubit + self.pair_offset(a, b)
    }

    pub fn swap_on(&self, a: Qubit, b: Qubit) -> Tick {
        self.swap + 3 * self.pair_offset(a, b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSpec {
    pub name: String,
    pub qubits: Vec<Qubit>,
    pub duration: Tick,
}

impl GateSpec {
    pub fn new(name: &str, qubits: &[Qubit], duration: Tick) -> Self {
        GateSpec {
            name: name.to_string(),
            qubits: qubits.to_vec(),
            duration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Line,
    Ring,
    HeavyHex,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::Line => "line",
            TopologyKind::Ring => "ring",
            TopologyKind::HeavyHex => "heavy_hex",
        })
    }
}

impl FromStr for TopologyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "line" => Ok(TopologyKind::Line),
            "ring" => Ok(TopologyKind::Ring),
            "heavy_hex" | "heavy-hex" => Ok(TopologyKind::HeavyHex),
            other => Err(format!("unknown topology {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub width: usize,
}

pub const HEAVY_HEX_SIZES: &[usize] = &[127];

impl TopologySpec {
    pub fn line(width: usize) -> Self {
        TopologySpec {
            kind: TopologyKind::Line,
            width,
        }
    }

    pub fn couplings(&self) -> Result<Vec<(Qubit, Qubit)>> {
        let n = self.width;
        match self.kind {
            TopologyKind::Line => Ok((1..n).map(|i| (i - 1, i)).collect()),
            TopologyKind::Ring => {
                if n < 3 {
                    return Err(Error::UnsupportedTopology(format!("ring of width {n}")));
                }
                let mut pairs: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
                pairs.push((0, n - 1));
                Ok(pairs)
            }
            TopologyKind::HeavyHex if n == 127 => Ok(heavy_hex_127()),
            TopologyKind::HeavyHex => Err(Error::UnsupportedTopology(format!(
                "heavy_hex width {n}; supported: {HEAVY_HEX_SIZES:?}"
            ))),
        }
    }

    /// Device with the given timing on this topology.
    pub fn device(&self, granularity: Tick, x_gate_duration: Tick, max_idle: Tick) -> Result<DeviceModel> {
        DeviceModel::new(self.width, &self.couplings()?, granularity, x_gate_duration, max_idle, None)
    }

    /// Granularity 8, 40-tick X gates, long-idle threshold 4000.
    pub fn default_device(&self) -> Result<DeviceModel> {
        self.device(8, 40, 4000)
    }
}

// Seven rows of qubits joined by groups of four bridge qubits. The outer
// rows hold 14 qubits, the inner ones 15. Bridge groups alternate between
// columns 0,4,8,12 and 2,6,10,14.
fn heavy_hex_127() -> Vec<(Qubit, Qubit)> {
    let rows: [(usize, usize); 7] = [(0, 14), (18, 15), (37, 15), (56, 15), (75, 15), (94, 15), (113, 14)];
    let mut pairs = Vec::with_capacity(144);
    for &(start, len) in &rows {
        for q in start..start + len - 1 {
            pairs.push((q, q + 1));
        }
    }
    // Row 0 starts at column 0, row 6 at column 1; the rest span 0..=14.
    let col = |row: usize, c: usize| -> Qubit {
        let (start, _) = rows[row];
        if row == 6 {
            start + c - 1
        } else {
            start + c
        }
    };
    let bridge_starts = [14, 33, 52, 71, 90, 109];
    for (k, &b0) in bridge_starts.iter().enumerate() {
        let cols: [usize; 4] = if k % 2 == 0 { [0, 4, 8, 12] } else { [2, 6, 10, 14] };
        for (i, &c) in cols.iter().enumerate() {
            let bridge = b0 + i;
            pairs.push((col(k, c), bridge));
            pairs.push((bridge, col(k + 1, c)));
        }
    }
    pairs
}

/// Start each gate as soon as all its qubits are free, rounded up to the
/// grid. Gates named `measure` become measurements.
pub fn asap_schedule(name: &str, num_qubits: usize, gates: &[GateSpec], device: &DeviceModel) -> Result<ScheduledCircuit> {
    if num_qubits > device.num_qubits() {
        return Err(Error::WidthTooLarge {
            width: num_qubits,
            available: device.num_qubits(),
        });
    }
    let g = device.granularity();
    let mut free: Vec<Tick> = vec![0; num_qubits];
    let mut out = Vec::with_capacity(gates.len());
    for spec in gates {
        if spec.duration <= 0 {
            return Err(Error::InvalidInstruction(format!("gate {} has non-positive duration", spec.name)));
        }
        for &q in &spec.qubits {
            if q >= num_qubits {
                return Err(Error::UnknownQubit { qubit: q, num_qubits });
            }
        }
        if spec.name != "measure" && spec.name != "barrier" {
            if let [a, b] = spec.qubits[..] {
                if !device.coupled(a, b) {
                    return Err(Error::CouplingViolation(a, b));
                }
            }
        }
        let ready = spec.qubits.iter().map(|&q| free[q]).max().unwrap_or(0);
        let start = ceil_to_grid(&RationalTime::from_tick(ready), g);
        for &q in &spec.qubits {
            free[q] = start + spec.duration;
        }
        out.push(if spec.name == "measure" {
            Instruction::measure(spec.qubits.clone(), start, spec.duration)
        } else {
            Instruction::gate(&spec.name, spec.qubits.clone(), start, spec.duration)
        });
    }
    ScheduledCircuit::new(name, num_qubits, out)
}

fn check_width(width: usize, device: &DeviceModel) -> Result<()> {
    if width > device.num_qubits() {
        return Err(Error::WidthTooLarge {
            width,
            available: device.num_qubits(),
        });
    }
    if width < 2 {
        return Err(Error::InvalidInstruction(format!("width must be at least 2, got {width}")));
    }
    Ok(())
}

fn require_line(width: usize, device: &DeviceModel) -> Result<()> {
    for q in 1..width {
        if !device.coupled(q - 1, q) {
            return Err(Error::CouplingViolation(q - 1, q));
        }
    }
    Ok(())
}

/// Bernstein-Vazirani with the all-ones secret on a line: the last qubit is
/// the ancilla, the parity is accumulated by a CX cascade and uncomputed by
/// the reverse cascade, then all data qubits are measured together.
pub fn gen_bv(width: usize, device: &DeviceModel, d: &GateDurations) -> Result<ScheduledCircuit> {
    check_width(width, device)?;
    require_line(width, device)?;
    let anc = width - 1;
    let mut gates = vec![GateSpec::new("x", &[anc], d.one_qubit)];
    for q in 0..width {
        gates.push(GateSpec::new("h", &[q], d.one_qubit));
    }
    for q in 0..anc {
        gates.push(GateSpec::new("cx", &[q, q + 1], d.two_qubit_on(q, q + 1)));
    }
    for q in (0..anc.saturating_sub(1)).rev() {
        gates.push(GateSpec::new("cx", &[q, q + 1], d.two_qubit_on(q, q + 1)));
    }
    for q in 0..anc {
        gates.push(GateSpec::new("h", &[q], d.one_qubit));
    }
    let data: Vec<Qubit> = (0..anc).collect();
    gates.push(GateSpec::new("measure", &data, d.measure));
    asap_schedule(&format!("bv{width}"), width, &gates, device)
}

/// QFT on a line: each round applies H to the head qubit and walks it to
/// the tail with controlled-phase + swap steps. The final swap is dropped
/// because it would only relabel outputs. A single X prepares a one-hot
/// input.
pub fn gen_qft(width: usize, device: &DeviceModel, d: &GateDurations) -> Result<ScheduledCircuit> {
    check_width(width, device)?;
    require_line(width, device)?;
    let mut gates = vec![GateSpec::new("x", &[0], d.one_qubit)];
    for round in 0..width {
        gates.push(GateSpec::new("h", &[0], d.one_qubit));
        let steps = width - 1 - round;
        for p in 0..steps {
            gates.push(GateSpec::new("cp", &[p, p + 1], d.two_qubit_on(p, p + 1)));
            let last_step = round + 2 == width && p + 1 == steps;
            if !last_step {
                gates.push(GateSpec::new("swap", &[p, p + 1], d.swap_on(p, p + 1)));
            }
        }
    }
    let all: Vec<Qubit> = (0..width).collect();
    gates.push(GateSpec::new("measure", &all, d.measure));
    asap_schedule(&format!("qft{width}"), width, &gates, device)
}

/// `depth` layers; in each, every qubit independently either waits, takes a
/// one-qubit gate, or pairs with a free coupled neighbour. Durations are
/// random multiples of the grid around the defaults. Ends with a joint
/// measurement.
pub fn gen_random(width: usize, depth: usize, seed: u64, device: &DeviceModel, d: &GateDurations) -> Result<ScheduledCircuit> {
    if width == 0 || width > device.num_qubits() {
        return Err(Error::WidthTooLarge {
            width,
            available: device.num_qubits(),
        });
    }
    let g = device.granularity();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = |base: Tick, rng: &mut ChaCha8Rng| -> Tick {
        let units = (base / g).max(1);
        g * rng.gen_range((units + 1) / 2..=units * 2)
    };
    let mut gates = Vec::new();
    let mut order: Vec<Qubit> = (0..width).collect();
    for _ in 0..depth {
        order.shuffle(&mut rng);
        let mut busy = vec![false; width];
        for &q in &order {
            if busy[q] {
                continue;
            }
            let roll: f64 = rng.gen();
            if roll < 0.3 {
                continue;
            }
            if roll < 0.6 {
                busy[q] = true;
                let dur = jitter(d.one_qubit, &mut rng);
                gates.push(GateSpec::new(["sx", "rz", "x", "h"][rng.gen_range(0..4)], &[q], dur));
                continue;
            }
            let free: Vec<Qubit> = device
                .neighbors(q)
                .iter()
                .copied()
                .filter(|&p| p < width && !busy[p])
                .collect();
            if let Some(&p) = free.choose(&mut rng) {
                busy[q] = true;
                busy[p] = true;
                let dur = jitter(d.two_qubit, &mut rng);
                gates.push(GateSpec::new("cx", &[q, p], dur));
            }
        }
    }
    let all: Vec<Qubit> = (0..width).collect();
    gates.push(GateSpec::new("measure", &all, d.measure));
    asap_schedule(&format!("random{width}x{depth}s{seed}"), width, &gates, device)
}
