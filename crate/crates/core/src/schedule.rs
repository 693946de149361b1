//! Devices, scheduled circuits and idle-window extraction.
//!
//! A [`ScheduledCircuit`] is a flat list of timed instructions. Idle windows
//! are the gaps on each qubit between the first instruction that acts on it
//! and its final measurement. Explicit `delay` instructions do not occupy a
//! qubit, they only annotate a gap; barriers have zero length but still cut
//! a gap in two.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{Interval, RationalTime, Tick};

pub type Qubit = usize;

/// Gate name used for inserted decoupling pulses.
pub const DD_GATE_NAME: &str = "x";

/// Static description of the target device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceModel {
    num_qubits: usize,
    coupling: Vec<(Qubit, Qubit)>,
    neighbors: Vec<Vec<Qubit>>,
    granularity: Tick,
    x_gate_duration: Tick,
    max_idle: Tick,
    t2: Option<Vec<Tick>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DeviceJson {
    num_qubits: usize,
    couplings: Vec<[Qubit; 2]>,
    granularity: Tick,
    x_gate_duration: Tick,
    max_idle: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t2: Option<Vec<Tick>>,
}

impl DeviceModel {
    pub fn new(
        num_qubits: usize,
        couplings: &[(Qubit, Qubit)],
        granularity: Tick,
        x_gate_duration: Tick,
        max_idle: Tick,
        t2: Option<Vec<Tick>>,
    ) -> Result<Self> {
        if granularity < 1 {
            return Err(Error::NonPositiveGranularity(granularity));
        }
        if x_gate_duration < 0 {
            return Err(Error::InvalidDevice(format!(
                "x_gate_duration must be non-negative, got {x_gate_duration}"
            )));
        }
        if max_idle <= 2 * x_gate_duration {
            return Err(Error::InvalidDevice(format!(
                "max_idle {max_idle} must exceed twice the X-gate duration {x_gate_duration}"
            )));
        }
        if let Some(t2) = &t2 {
            if t2.len() != num_qubits {
                return Err(Error::InvalidDevice(format!(
                    "t2 has {} entries for {num_qubits} qubits",
                    t2.len()
                )));
            }
        }
        let mut seen = HashSet::new();
        let mut coupling = Vec::with_capacity(couplings.len());
        for &(a, b) in couplings {
            if a == b {
                return Err(Error::SelfCoupling(a));
            }
            if a >= num_qubits || b >= num_qubits {
                return Err(Error::CouplingOutOfRange(a, b));
            }
            let pair = (a.min(b), a.max(b));
            if !seen.insert(pair) {
                return Err(Error::DuplicateCoupling(a, b));
            }
            coupling.push(pair);
        }
        coupling.sort_unstable();
        let mut neighbors = vec![Vec::new(); num_qubits];
        for &(a, b) in &coupling {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(DeviceModel {
            num_qubits,
            coupling,
            neighbors,
            granularity,
            x_gate_duration,
            max_idle,
            t2,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Coupled pairs, each as `(low, high)`, sorted.
    pub fn coupling(&self) -> &[(Qubit, Qubit)] {
        &self.coupling
    }

    pub fn neighbors(&self, q: Qubit) -> &[Qubit] {
        &self.neighbors[q]
    }

    pub fn coupled(&self, a: Qubit, b: Qubit) -> bool {
        a < self.num_qubits && self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn granularity(&self) -> Tick {
        self.granularity
    }

    pub fn x_gate_duration(&self) -> Tick {
        self.x_gate_duration
    }

    pub fn max_idle(&self) -> Tick {
        self.max_idle
    }

    pub fn t2(&self) -> Option<&[Tick]> {
        self.t2.as_deref()
    }

    /// Shortest idle that can host two X gates on the grid.
    pub fn min_embeddable(&self) -> Tick {
        2 * self.x_gate_duration + 2 * self.granularity
    }

    /// The same device with unit granularity and instantaneous X gates.
    pub fn exact(&self) -> DeviceModel {
        DeviceModel {
            granularity: 1,
            x_gate_duration: 0,
            ..self.clone()
        }
    }

    pub fn with_max_idle(&self, max_idle: Tick) -> Result<DeviceModel> {
        DeviceModel::new(
            self.num_qubits,
            &self.coupling,
            self.granularity,
            self.x_gate_duration,
            max_idle,
            self.t2.clone(),
        )
    }

    pub fn to_json(&self) -> String {
        let raw = DeviceJson {
            num_qubits: self.num_qubits,
            couplings: self.coupling.iter().map(|&(a, b)| [a, b]).collect(),
            granularity: self.granularity,
            x_gate_duration: self.x_gate_duration,
            max_idle: self.max_idle,
            t2: self.t2.clone(),
        };
        serde_json::to_string_pretty(&raw).expect("device serializes")
    }
}

pub fn parse_device(bytes: &[u8]) -> Result<DeviceModel> {
    let raw: DeviceJson = serde_json::from_slice(bytes)?;
    let couplings: Vec<_> = raw.couplings.iter().map(|p| (p[0], p[1])).collect();
    DeviceModel::new(
        raw.num_qubits,
        &couplings,
        raw.granularity,
        raw.x_gate_duration,
        raw.max_idle,
        raw.t2,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum InstructionKind {
    /// Names are shared so that copying a circuit does not copy them.
    Gate(Arc<str>),
    Delay,
    Measure,
    Barrier,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Instruction {
    pub kind: InstructionKind,
    pub qubits: Vec<Qubit>,
    pub start: RationalTime,
    pub duration: Tick,
    /// Marks an inserted decoupling pulse.
    pub dd: bool,
}

impl Instruction {
    pub fn gate(name: &str, qubits: Vec<Qubit>, start: Tick, duration: Tick) -> Self {
        Instruction {
            kind: InstructionKind::Gate(name.into()),
            qubits,
            start: start.into(),
            duration,
            dd: false,
        }
    }

    pub fn measure(qubits: Vec<Qubit>, start: Tick, duration: Tick) -> Self {
        Instruction {
            kind: InstructionKind::Measure,
            qubits,
            start: start.into(),
            duration,
            dd: false,
        }
    }

    pub fn delay(qubit: Qubit, start: Tick, duration: Tick) -> Self {
        Instruction {
            kind: InstructionKind::Delay,
            qubits: vec![qubit],
            start: start.into(),
            duration,
            dd: false,
        }
    }

    pub fn barrier(qubits: Vec<Qubit>, start: Tick) -> Self {
        Instruction {
            kind: InstructionKind::Barrier,
            qubits,
            start: start.into(),
            duration: 0,
            dd: false,
        }
    }

    /// A decoupling X pulse starting at `start`.
    pub fn dd_pulse(qubit: Qubit, start: RationalTime, duration: Tick) -> Self {
        Instruction {
            kind: InstructionKind::Gate(DD_GATE_NAME.into()),
            qubits: vec![qubit],
            start,
            duration,
            dd: true,
        }
    }

    pub fn end(&self) -> RationalTime {
        &self.start + RationalTime::from_tick(self.duration)
    }

    /// Temporal centre; decoupling pulses toggle the frame here.
    pub fn center(&self) -> RationalTime {
        &self.start + RationalTime::new(self.duration, 2)
    }

    pub fn is_delay(&self) -> bool {
        self.kind == InstructionKind::Delay
    }

    pub fn is_measure(&self) -> bool {
        self.kind == InstructionKind::Measure
    }

    pub fn name(&self) -> Option<&str> {
        match &self.kind {
            InstructionKind::Gate(n) => Some(n),
            _ => None,
        }
    }

    fn validate(&self, num_qubits: usize) -> Result<()> {
        if self.qubits.is_empty() {
            return Err(Error::InvalidInstruction("instruction acts on no qubits".into()));
        }
        let mut seen = HashSet::new();
        for &q in &self.qubits {
            if q >= num_qubits {
                return Err(Error::UnknownQubit { qubit: q, num_qubits });
            }
            if !seen.insert(q) {
                return Err(Error::InvalidInstruction(format!("qubit {q} listed twice")));
            }
        }
        if self.start < 0 {
            return Err(Error::InvalidInstruction(format!("negative start {}", self.start)));
        }
        if self.duration < 0 {
            return Err(Error::InvalidInstruction(format!(
                "negative duration {}",
                self.duration
            )));
        }
        match &self.kind {
            InstructionKind::Gate(name) => {
                if name.is_empty() {
                    return Err(Error::InvalidInstruction("gate without a name".into()));
                }
                if self.duration == 0 && !self.dd {
                    return Err(Error::InvalidInstruction(format!(
                        "gate {name} has zero duration"
                    )));
                }
                if self.dd && (&**name != DD_GATE_NAME || self.qubits.len() != 1) {
                    return Err(Error::InvalidInstruction(
                        "only single-qubit x gates may be marked dd".into(),
                    ));
                }
            }
            InstructionKind::Measure if self.duration == 0 => {
                return Err(Error::InvalidInstruction("measure has zero duration".into()));
            }
            InstructionKind::Barrier if self.duration != 0 => {
                return Err(Error::InvalidInstruction("barrier must have zero duration".into()));
            }
            _ => {}
        }
        if self.dd && !matches!(self.kind, InstructionKind::Gate(_)) {
            return Err(Error::InvalidInstruction("dd flag on a non-gate".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstructionJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    qubits: Vec<Qubit>,
    start: RationalTime,
    duration: Tick,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    dd: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CircuitJson {
    device: String,
    num_qubits: usize,
    instructions: Vec<InstructionJson>,
}

impl TryFrom<InstructionJson> for Instruction {
    type Error = Error;

    fn try_from(raw: InstructionJson) -> Result<Self> {
        let kind = match raw.kind.as_str() {
            "gate" => InstructionKind::Gate(
                raw.name
                    .ok_or_else(|| Error::InvalidInstruction("gate without a name".into()))?
                    .into(),
            ),
            "delay" => InstructionKind::Delay,
            "measure" => InstructionKind::Measure,
            "barrier" => InstructionKind::Barrier,
            other => {
                return Err(Error::InvalidInstruction(format!("unknown kind {other:?}")));
            }
        };
        Ok(Instruction {
            kind,
            qubits: raw.qubits,
            start: raw.start,
            duration: raw.duration,
            dd: raw.dd,
        })
    }
}

impl From<&Instruction> for InstructionJson {
    fn from(inst: &Instruction) -> Self {
        let (kind, name) = match &inst.kind {
            InstructionKind::Gate(n) => ("gate", Some(n.to_string())),
            InstructionKind::Delay => ("delay", None),
            InstructionKind::Measure => ("measure", None),
            InstructionKind::Barrier => ("barrier", None),
        };
        InstructionJson {
            kind: kind.to_string(),
            name,
            qubits: inst.qubits.clone(),
            start: inst.start.clone(),
            duration: inst.duration,
            dd: inst.dd,
        }
    }
}

/// A fully scheduled circuit. Instructions are kept sorted by
/// `(start, first qubit)`; ties keep their insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledCircuit {
    device: String,
    num_qubits: usize,
    instructions: Vec<Instruction>,
}

impl ScheduledCircuit {
    pub fn new(
        device: impl Into<String>,
        num_qubits: usize,
        mut instructions: Vec<Instruction>,
    ) -> Result<Self> {
        for inst in &instructions {
            inst.validate(num_qubits)?;
        }
        instructions.sort_by(|a, b| a.start.cmp(&b.start).then(a.qubits[0].cmp(&b.qubits[0])));
        check_disjoint(num_qubits, &instructions)?;
        Ok(ScheduledCircuit {
            device: device.into(),
            num_qubits,
            instructions,
        })
    }

    pub fn device(&self) -> &str {
        &self.device
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn dd_gate_count(&self) -> usize {
        self.instructions.iter().filter(|i| i.dd).count()
    }

    /// End of the last instruction, or zero for an empty circuit.
    pub fn makespan(&self) -> RationalTime {
        self.instructions
            .iter()
            .map(Instruction::end)
            .max()
            .unwrap_or_else(RationalTime::zero)
    }

    pub fn to_json(&self) -> String {
        let raw = CircuitJson {
            device: self.device.clone(),
            num_qubits: self.num_qubits,
            instructions: self.instructions.iter().map(InstructionJson::from).collect(),
        };
        serde_json::to_string_pretty(&raw).expect("circuit serializes")
    }
}

/// Parse a circuit and check it against `device`.
pub fn parse_circuit(bytes: &[u8], device: &DeviceModel) -> Result<ScheduledCircuit> {
    let raw: CircuitJson = serde_json::from_slice(bytes)?;
    if raw.num_qubits > device.num_qubits() {
        return Err(Error::UnknownQubit {
            qubit: raw.num_qubits - 1,
            num_qubits: device.num_qubits(),
        });
    }
    let instructions = raw
        .instructions
        .into_iter()
        .map(Instruction::try_from)
        .collect::<Result<Vec<_>>>()?;
    ScheduledCircuit::new(raw.device, raw.num_qubits, instructions)
}

// Sweep per qubit: an item conflicts when it starts strictly before the
// furthest end seen so far. Zero-length items sort ahead of intervals that
// start at the same time, so a barrier touching a gate edge is fine.
fn sweep_conflicts(qubit: Qubit, items: &mut [(RationalTime, RationalTime)]) -> Result<()> {
    items.sort();
    let mut furthest: Option<(RationalTime, RationalTime)> = None;
    for (start, end) in items.iter() {
        if let Some((fs, fe)) = &furthest {
            if start < fe {
                return Err(Error::Overlap {
                    qubit,
                    first: fs.clone(),
                    second: start.clone(),
                });
            }
        }
        if furthest.as_ref().is_none_or(|(_, fe)| end > fe) {
            furthest = Some((start.clone(), end.clone()));
        }
    }
    Ok(())
}

fn check_disjoint(num_qubits: usize, instructions: &[Instruction]) -> Result<()> {
    let mut occupying = vec![Vec::new(); num_qubits];
    let mut with_delays = vec![Vec::new(); num_qubits];
    for inst in instructions {
        for &q in &inst.qubits {
            let span = (inst.start.clone(), inst.end());
            if !inst.is_delay() {
                occupying[q].push(span.clone());
            }
            // Decoupling pulses may sit inside explicit delays.
            if !inst.dd {
                with_delays[q].push(span);
            }
        }
    }
    for q in 0..num_qubits {
        sweep_conflicts(q, &mut occupying[q])?;
        sweep_conflicts(q, &mut with_delays[q])?;
    }
    Ok(())
}

/// Provenance of a window: the extracted idle it came from and its index
/// among that idle's pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct WindowOrigin {
    pub idle: usize,
    pub split: usize,
}

/// One idle interval on one qubit, plus the X-gate centre times embedded in
/// it (empty until embedded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdleWindow {
    pub id: usize,
    pub qubit: Qubit,
    pub start: RationalTime,
    pub end: RationalTime,
    pub gates: Vec<RationalTime>,
    pub origin: WindowOrigin,
}

impl IdleWindow {
    pub fn new(id: usize, qubit: Qubit, start: RationalTime, end: RationalTime) -> Self {
        IdleWindow {
            id,
            qubit,
            start,
            end,
            gates: Vec::new(),
            origin: WindowOrigin { idle: id, split: 0 },
        }
    }

    pub fn duration(&self) -> RationalTime {
        &self.end - &self.start
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.start.clone(), self.end.clone())
    }

    /// Intersection with another window, if it has positive length.
    pub fn overlap(&self, other: &IdleWindow) -> Option<Interval> {
        self.interval().intersect(&other.interval())
    }
}

/// A gap too short to host two X gates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedIdle {
    pub qubit: Qubit,
    pub start: RationalTime,
    pub end: RationalTime,
}

#[derive(Debug, Clone, Default)]
pub struct IdleExtraction {
    pub windows: Vec<IdleWindow>,
    pub skipped: Vec<SkippedIdle>,
}

/// How previously inserted decoupling pulses are treated when scanning for
/// gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdPulses {
    /// Pulses occupy their qubit like any gate.
    Occupy,
    /// Pulses are ignored, recovering the windows they were embedded into.
    Transparent,
}

/// Gaps per qubit with DD pulses treated as ordinary gates.
pub fn extract_idles(circuit: &ScheduledCircuit, device: &DeviceModel) -> IdleExtraction {
    extract_idles_with(circuit, device, DdPulses::Occupy)
}

pub fn extract_idles_with(
    circuit: &ScheduledCircuit,
    device: &DeviceModel,
    pulses: DdPulses,
) -> IdleExtraction {
    let n = circuit.num_qubits();
    let mut occupying: Vec<Vec<&Instruction>> = vec![Vec::new(); n];
    for inst in circuit.instructions() {
        if inst.is_delay() || (inst.dd && pulses == DdPulses::Transparent) {
            continue;
        }
        for &q in &inst.qubits {
            occupying[q].push(inst);
        }
    }

    let min_len = RationalTime::from_tick(device.min_embeddable());
    let mut gaps = Vec::new();
    let mut skipped = Vec::new();
    for (q, items) in occupying.iter_mut().enumerate() {
        if items.is_empty() {
            continue;
        }
        let order = |a: &&Instruction, b: &&Instruction| a.start.cmp(&b.start).then(a.duration.cmp(&b.duration));
        if !items.is_sorted_by(|a, b| order(a, b).is_le()) {
            items.sort_by(order);
        }
        let limit = match items.iter().rev().find(|i| i.is_measure()) {
            Some(m) => m.start.clone(),
            None => items.iter().map(|i| i.end()).max().expect("non-empty"),
        };
        let mut cursor = items[0].end();
        for inst in &items[1..] {
            if inst.start > cursor && inst.start <= limit {
                let (s, e) = (cursor.clone(), inst.start.clone());
                if &e - &s < min_len {
                    skipped.push(SkippedIdle { qubit: q, start: s, end: e });
                } else {
                    gaps.push((q, s, e));
                }
            }
            let end = inst.end();
            if end > cursor {
                cursor = end;
            }
        }
    }
    gaps.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let windows = gaps
        .into_iter()
        .enumerate()
        .map(|(id, (q, s, e))| IdleWindow::new(id, q, s, e))
        .collect();
    IdleExtraction { windows, skipped }
}

/// Add one DD pulse per embedded gate centre. Original instructions are
/// carried over untouched. Each pulse is checked against the occupied spans
/// of its qubit and against the other new pulses, then merged into the
/// already sorted instruction list.
pub fn insert_gates(
    circuit: &ScheduledCircuit,
    idles: &[IdleWindow],
    device: &DeviceModel,
) -> Result<ScheduledCircuit> {
    let n = circuit.num_qubits();
    let xd = RationalTime::from_tick(device.x_gate_duration());
    let half = xd.half();
    let mut pulses: Vec<Instruction> = Vec::new();
    for w in idles {
        if w.qubit >= n {
            return Err(Error::UnknownQubit { qubit: w.qubit, num_qubits: n });
        }
        for g in &w.gates {
            pulses.push(Instruction::dd_pulse(w.qubit, g - &half, device.x_gate_duration()));
        }
    }
    pulses.sort_by(|a, b| a.start.cmp(&b.start).then(a.qubits[0].cmp(&b.qubits[0])));

    // Occupied spans per qubit; sorted by start and, being disjoint, by end.
    let mut busy: Vec<Vec<(&RationalTime, RationalTime)>> = vec![Vec::new(); n];
    for inst in circuit.instructions().iter().filter(|i| !i.is_delay()) {
        for &q in &inst.qubits {
            busy[q].push((&inst.start, inst.end()));
        }
    }
    let clash = |s: &RationalTime, e: &RationalTime, p: &RationalTime, pe: &RationalTime| s < pe && p < e;
    let mut last: Vec<Option<(RationalTime, RationalTime)>> = vec![None; n];
    for p in &pulses {
        let q = p.qubits[0];
        let pe = &p.start + &xd;
        let spans = &busy[q];
        let k = spans.partition_point(|(_, e)| e <= &p.start);
        let hit = spans.get(k).is_some_and(|(s, e)| clash(s, e, &p.start, &pe));
        let repeat = last[q].as_ref().is_some_and(|(s, e)| clash(s, e, &p.start, &pe) || (s == &p.start && e == &pe));
        if hit || repeat {
            return Err(Error::Collision { qubit: q, time: p.start.clone() });
        }
        last[q] = Some((p.start.clone(), pe));
    }

    let mut merged = Vec::with_capacity(circuit.instructions().len() + pulses.len());
    let mut originals = circuit.instructions().iter().peekable();
    for p in pulses {
        let before = |o: &&Instruction| o.start.cmp(&p.start).then(o.qubits[0].cmp(&p.qubits[0])).is_le();
        while let Some(o) = originals.next_if(before) {
            merged.push(o.clone());
        }
        merged.push(p);
    }
    merged.extend(originals.cloned());
    Ok(ScheduledCircuit {
        device: circuit.device.clone(),
        num_qubits: n,
        instructions: merged,
    })
}
