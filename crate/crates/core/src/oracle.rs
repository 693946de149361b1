//! Verification oracles.
//!
//! The residual ledger recomputes every Z and ZZ integral from the finished
//! circuit alone: windows are re-derived with decoupling pulses ignored, each
//! pulse toggles its qubit's sign at its centre, and integrals are summed
//! segment by segment. Nothing here calls into the solver. The dense
//! simulator evolves the full error Hamiltonian for small idle-only
//! circuits.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::{
    extract_idles_with, DdPulses, DeviceModel, IdleWindow, InstructionKind, Qubit,
    ScheduledCircuit, SkippedIdle,
};
use crate::time::{Interval, RationalTime};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZEntry {
    pub idle: usize,
    pub qubit: Qubit,
    pub start: RationalTime,
    pub end: RationalTime,
    pub flips: usize,
    pub residual: RationalTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZzEntry {
    pub edge: usize,
    pub idles: [usize; 2],
    pub qubits: [Qubit; 2],
    pub overlap: Interval,
    pub residual: RationalTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidualLedger {
    pub z: Vec<ZEntry>,
    pub zz: Vec<ZzEntry>,
    pub max_abs_z: RationalTime,
    pub max_abs_zz: RationalTime,
    /// Gaps too short to embed into; they carry no entries.
    pub skipped: Vec<SkippedIdle>,
    /// DD pulses whose centre falls outside every window.
    pub stray_pulses: usize,
}

impl ResidualLedger {
    pub fn is_zero(&self) -> bool {
        self.max_abs_z.is_zero() && self.max_abs_zz.is_zero()
    }

    pub fn nonzero_z(&self) -> impl Iterator<Item = &ZEntry> {
        self.z.iter().filter(|e| !e.residual.is_zero())
    }

    pub fn nonzero_zz(&self) -> impl Iterator<Item = &ZzEntry> {
        self.zz.iter().filter(|e| !e.residual.is_zero())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ledger serializes")
    }
}

// Sign of a window at the segment starting at `t`: flips at or before `t`.
fn local_sign(flips: &[RationalTime], t: &RationalTime) -> i32 {
    if flips.partition_point(|f| f <= t) % 2 == 0 {
        1
    } else {
        -1
    }
}

fn signed_measure(span: &Interval, a: &[RationalTime], b: Option<&[RationalTime]>) -> RationalTime {
    let mut cuts: Vec<&RationalTime> = a.iter().filter(|t| span.contains_strictly(t)).collect();
    if let Some(b) = b {
        cuts.extend(b.iter().filter(|t| span.contains_strictly(t)));
    }
    cuts.sort();
    let mut total = RationalTime::zero();
    let mut lo = &span.start;
    for hi in cuts.into_iter().chain(std::iter::once(&span.end)) {
        let s = local_sign(a, lo) * b.map_or(1, |b| local_sign(b, lo));
        let seg = hi - lo;
        if s > 0 {
            total += &seg;
        } else {
            total -= &seg;
        }
        lo = hi;
    }
    total
}

fn windows_with_flips(circuit: &ScheduledCircuit, device: &DeviceModel) -> (Vec<IdleWindow>, Vec<SkippedIdle>, usize) {
    let ex = extract_idles_with(circuit, device, DdPulses::Transparent);
    let mut windows = ex.windows;
    let mut per_qubit: Vec<Vec<usize>> = vec![Vec::new(); circuit.num_qubits()];
    for (i, w) in windows.iter().enumerate() {
        per_qubit[w.qubit].push(i);
    }
    let mut stray = 0;
    for inst in circuit.instructions().iter().filter(|i| i.dd) {
        let c = inst.center();
        let q = inst.qubits[0];
        match per_qubit[q]
            .iter()
            .find(|&&i| windows[i].start <= c && c < windows[i].end)
        {
            Some(&i) => windows[i].gates.push(c),
            None => stray += 1,
        }
    }
    for w in &mut windows {
        w.gates.sort();
    }
    (windows, ex.skipped, stray)
}

/// Exact Z residual per window and ZZ residual per overlapping coupled pair.
pub fn compute_residuals(circuit: &ScheduledCircuit, device: &DeviceModel) -> ResidualLedger {
    let (windows, skipped, stray_pulses) = windows_with_flips(circuit, device);

    let z: Vec<ZEntry> = windows
        .iter()
        .map(|w| ZEntry {
            idle: w.id,
            qubit: w.qubit,
            start: w.start.clone(),
            end: w.end.clone(),
            flips: w.gates.len(),
            residual: signed_measure(&w.interval(), &w.gates, None),
        })
        .collect();

    let mut zz = Vec::new();
    for (i, a) in windows.iter().enumerate() {
        for b in &windows[i + 1..] {
            if !device.coupled(a.qubit, b.qubit) {
                continue;
            }
            let Some(overlap) = a.interval().intersect(&b.interval()) else { continue };
            let residual = signed_measure(&overlap, &a.gates, Some(&b.gates));
            zz.push(ZzEntry {
                edge: 0,
                idles: [a.id, b.id],
                qubits: [a.qubit, b.qubit],
                overlap,
                residual,
            });
        }
    }
    for (k, e) in zz.iter_mut().enumerate() {
        e.edge = k;
    }

    let max_abs = |it: &mut dyn Iterator<Item = &RationalTime>| {
        it.map(RationalTime::abs).max().unwrap_or_else(RationalTime::zero)
    };
    ResidualLedger {
        max_abs_z: max_abs(&mut z.iter().map(|e| &e.residual)),
        max_abs_zz: max_abs(&mut zz.iter().map(|e| &e.residual)),
        z,
        zz,
        skipped,
        stray_pulses,
    }
}

/// Uniform ranges for the quasi-static error rates, in radians per tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseRange {
    pub eps: f64,
    pub j: f64,
}

impl Default for NoiseRange {
    fn default() -> Self {
        NoiseRange { eps: 1e-4, j: 1e-4 }
    }
}

/// One sample of the error rates: `eps` per qubit, `j` per coupled pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseDraw {
    pub seed: u64,
    pub eps: Vec<f64>,
    pub pairs: Vec<(Qubit, Qubit)>,
    pub j: Vec<f64>,
}

impl NoiseDraw {
    pub fn sample(device: &DeviceModel, seed: u64, range: NoiseRange) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |r: f64| if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
        let eps = (0..device.num_qubits()).map(|_| uniform(range.eps)).collect();
        let pairs = device.coupling().to_vec();
        let j = pairs.iter().map(|_| uniform(range.j)).collect();
        NoiseDraw { seed, eps, pairs, j }
    }

    /// `count` draws seeded `seed, seed + 1, ...`.
    pub fn series(device: &DeviceModel, seed: u64, count: usize, range: NoiseRange) -> Vec<Self> {
        (0..count as u64)
            .map(|k| NoiseDraw::sample(device, seed.wrapping_add(k), range))
            .collect()
    }

    pub fn j_for(&self, a: Qubit, b: Qubit) -> f64 {
        let key = (a.min(b), a.max(b));
        self.pairs
            .binary_search(&key)
            .map(|k| self.j[k])
            .unwrap_or(0.0)
    }
}

/// Dense `2^n × 2^n` matrix, row-major. Qubit `q` is bit `q` of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseUnitary {
    pub num_qubits: usize,
    pub data: Vec<Complex64>,
}

impl DenseUnitary {
    pub fn identity(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::new(1.0, 0.0);
        }
        DenseUnitary { num_qubits, data }
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    fn scale_rows(&mut self, phase: impl Fn(usize) -> Complex64) {
        let dim = self.dim();
        for (r, row) in self.data.chunks_mut(dim).enumerate() {
            let p = phase(r);
            for x in row {
                *x *= p;
            }
        }
    }

    fn permute_rows(&mut self, mask: usize) {
        if mask == 0 {
            return;
        }
        let dim = self.dim();
        let old = self.data.clone();
        for r in 0..dim {
            let src = r ^ mask;
            self.data[r * dim..(r + 1) * dim].copy_from_slice(&old[src * dim..(src + 1) * dim]);
        }
    }

    /// `min_φ max_ij |A_ij − e^{iφ} B_ij|`, with φ taken from the overlap
    /// `tr(B†A)`.
    pub fn distance_up_to_phase(&self, other: &DenseUnitary) -> f64 {
        assert_eq!(self.num_qubits, other.num_qubits);
        let overlap: Complex64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| b.conj() * a)
            .sum();
        let phase = if overlap.norm() > 0.0 {
            overlap / overlap.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - phase * b).norm())
            .fold(0.0, f64::max)
    }
}

pub const MAX_DENSE_QUBITS: usize = 10;

fn z_of(bits: usize, q: Qubit) -> f64 {
    if bits >> q & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn check_idle_only(circuit: &ScheduledCircuit) -> Result<()> {
    if circuit.num_qubits() > MAX_DENSE_QUBITS {
        return Err(Error::TooManyQubits {
            max: MAX_DENSE_QUBITS,
            actual: circuit.num_qubits(),
        });
    }
    for inst in circuit.instructions() {
        match &inst.kind {
            InstructionKind::Delay | InstructionKind::Barrier => {}
            InstructionKind::Gate(name) if &**name == "x" && inst.qubits.len() == 1 => {}
            InstructionKind::Gate(name) => return Err(Error::UnsupportedGate(name.to_string())),
            InstructionKind::Measure => return Err(Error::UnsupportedGate("measure".into())),
        }
    }
    Ok(())
}

/// Evolve the error Hamiltonian segment by segment: `ε_k Z_k` while qubit `k`
/// is idle, `J Z_j Z_k` while coupled `j` and `k` are both idle, with every X
/// applied as an instantaneous flip at its centre.
pub fn simulate_dense(circuit: &ScheduledCircuit, device: &DeviceModel, draw: &NoiseDraw) -> Result<DenseUnitary> {
    check_idle_only(circuit)?;
    let n = circuit.num_qubits();
    let windows = extract_idles_with(circuit, device, DdPulses::Transparent).windows;

    let mut events: BTreeMap<RationalTime, usize> = BTreeMap::new();
    for w in &windows {
        events.entry(w.start.clone()).or_insert(0);
        events.entry(w.end.clone()).or_insert(0);
    }
    for inst in circuit.instructions() {
        if matches!(inst.kind, InstructionKind::Gate(_)) {
            *events.entry(inst.center()).or_insert(0) ^= 1 << inst.qubits[0];
        }
    }

    let pairs: Vec<(Qubit, Qubit, f64)> = device
        .coupling()
        .iter()
        .filter(|&&(a, b)| a < n && b < n)
        .map(|&(a, b)| (a, b, draw.j_for(a, b)))
        .collect();

    let mut u = DenseUnitary::identity(n);
    let mut prev: Option<RationalTime> = None;
    for (t, mask) in events {
        if let Some(p) = prev {
            let dt = (&t - &p).to_f64();
            let mut idle = vec![false; n];
            for w in &windows {
                if w.start <= p && w.end >= t {
                    idle[w.qubit] = true;
                }
            }
            if idle.iter().any(|&b| b) {
                u.scale_rows(|bits| {
                    let mut h = 0.0;
                    for k in 0..n {
                        if idle[k] {
                            h += draw.eps[k] * z_of(bits, k);
                        }
                    }
                    for &(a, b, j) in &pairs {
                        if idle[a] && idle[b] {
                            h += j * z_of(bits, a) * z_of(bits, b);
                        }
                    }
                    Complex64::from_polar(1.0, -h * dt)
                });
            }
        }
        u.permute_rows(mask);
        prev = Some(t);
    }
    Ok(u)
}

/// Unitary implied by the ledger: all X gates collected into one Pauli
/// string, times the diagonal phase `exp(−i Σ ε z Z − i Σ J zz ZZ)` with
/// each window's residual carried into the global frame.
pub fn predicted_unitary(
    circuit: &ScheduledCircuit,
    ledger: &ResidualLedger,
    draw: &NoiseDraw,
) -> Result<DenseUnitary> {
    check_idle_only(circuit)?;
    let n = circuit.num_qubits();
    let x_centers: Vec<(Qubit, RationalTime)> = circuit
        .instructions()
        .iter()
        .filter(|i| matches!(i.kind, InstructionKind::Gate(_)))
        .map(|i| (i.qubits[0], i.center()))
        .collect();
    let mut mask = 0usize;
    for (q, _) in &x_centers {
        mask ^= 1 << q;
    }
    // Global sign at a window start: X gates centred strictly earlier.
    let frame = |q: Qubit, t: &RationalTime| -> f64 {
        let k = x_centers.iter().filter(|(p, c)| *p == q && c < t).count();
        if k % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    };

    let mut phi_z = vec![0.0; n];
    let mut sigma = BTreeMap::new();
    for e in &ledger.z {
        let s = frame(e.qubit, &e.start);
        sigma.insert(e.idle, s);
        phi_z[e.qubit] += s * e.residual.to_f64();
    }
    let mut phi_zz: Vec<(Qubit, Qubit, f64)> = Vec::new();
    for e in &ledger.zz {
        let s = sigma[&e.idles[0]] * sigma[&e.idles[1]];
        phi_zz.push((e.qubits[0], e.qubits[1], s * e.residual.to_f64()));
    }

    let mut u = DenseUnitary::identity(n);
    u.scale_rows(|bits| {
        let mut h = 0.0;
        for k in 0..n {
            h += draw.eps[k] * phi_z[k] * z_of(bits, k);
        }
        for &(a, b, phi) in &phi_zz {
            h += draw.j_for(a, b) * phi * z_of(bits, a) * z_of(bits, b);
        }
        Complex64::from_polar(1.0, -h)
    });
    u.permute_rows(mask);
    Ok(u)
}

/// Noise-free reference: the X gates alone.
pub fn ideal_unitary(circuit: &ScheduledCircuit) -> Result<DenseUnitary> {
    check_idle_only(circuit)?;
    let mut mask = 0usize;
    for inst in circuit.instructions() {
        if matches!(inst.kind, InstructionKind::Gate(_)) {
            mask ^= 1 << inst.qubits[0];
        }
    }
    let mut u = DenseUnitary::identity(circuit.num_qubits());
    u.permute_rows(mask);
    Ok(u)
}

/// Mean over draws of `∏ cos²(ε·z) · ∏ cos²(J·zz)`.
pub fn success_proxy(ledger: &ResidualLedger, draws: &[NoiseDraw]) -> f64 {
    if draws.is_empty() {
        return 1.0;
    }
    let total: f64 = draws
        .iter()
        .map(|d| {
            let mut p = 1.0;
            for e in &ledger.z {
                p *= (d.eps[e.qubit] * e.residual.to_f64()).cos().powi(2);
            }
            for e in &ledger.zz {
                p *= (d.j_for(e.qubits[0], e.qubits[1]) * e.residual.to_f64()).cos().powi(2);
            }
            p
        })
        .sum();
    total / draws.len() as f64
}

/// `log2(p_correct / p_next)` where `p_next` is the most frequent incorrect
/// outcome.
pub fn selectivity(counts: &BTreeMap<String, f64>, correct: &str) -> f64 {
    let p_correct = counts.get(correct).copied().unwrap_or(0.0);
    let p_next = counts
        .iter()
        .filter(|(k, _)| k.as_str() != correct)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    if p_correct <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p_next <= 0.0 {
        return f64::INFINITY;
    }
    (p_correct / p_next).log2()
}

/// Selectivity under a simple readout model: qubit `k` reads flipped with
/// probability `sin²(φ_k)`, where `φ_k` sums its own Z phase and half of each
/// incident ZZ phase, averaged over draws. Bits are independent, so the most
/// likely wrong string is known in closed form.
pub fn model_selectivity(ledger: &ResidualLedger, draws: &[NoiseDraw], qubits: &[Qubit]) -> f64 {
    if qubits.is_empty() || draws.is_empty() {
        return f64::INFINITY;
    }
    let mut flip = vec![0.0; qubits.len()];
    for d in draws {
        for (slot, &q) in qubits.iter().enumerate() {
            let mut phi = 0.0;
            for e in ledger.z.iter().filter(|e| e.qubit == q) {
                phi += d.eps[q] * e.residual.to_f64();
            }
            for e in ledger.zz.iter().filter(|e| e.qubits.contains(&q)) {
                phi += 0.5 * d.j_for(e.qubits[0], e.qubits[1]) * e.residual.to_f64();
            }
            flip[slot] += phi.sin().powi(2);
        }
    }
    for p in &mut flip {
        *p /= draws.len() as f64;
    }
    let p_correct: f64 = flip.iter().map(|p| 1.0 - p).product();
    let mode_flips: Vec<bool> = flip.iter().map(|&p| p > 0.5).collect();
    let p_next = if mode_flips.iter().any(|&f| f) {
        flip.iter()
            .zip(&mode_flips)
            .map(|(&p, &f)| if f { p } else { 1.0 - p })
            .product()
    } else {
        let best = flip
            .iter()
            .map(|&p| if p >= 1.0 { f64::INFINITY } else { p / (1.0 - p) })
            .fold(0.0, f64::max);
        p_correct * best
    };
    let mut counts = BTreeMap::new();
    counts.insert("correct".to_string(), p_correct);
    counts.insert("next".to_string(), p_next);
    selectivity(&counts, "correct")
}
