//! Window splitting: long idles are cut at context changes before the graph
//! is traversed, and nodes with several embedded neighbours are cut into
//! pieces on which every neighbour sign is constant.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::schedule::{DeviceModel, IdleWindow, Qubit, WindowOrigin};
use crate::solver::{delta_of_offset, PiecewiseLinear};
use crate::time::{ceil_to_grid, floor_to_grid, Interval, RationalTime};

/// Per qubit, the times at which an idle on a coupled qubit starts or ends.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContextChangeSet {
    per_qubit: Vec<BTreeSet<RationalTime>>,
}

impl ContextChangeSet {
    pub fn new(num_qubits: usize) -> Self {
        ContextChangeSet {
            per_qubit: vec![BTreeSet::new(); num_qubits],
        }
    }

    pub fn from_windows(windows: &[IdleWindow], device: &DeviceModel) -> Self {
        let mut set = ContextChangeSet::new(device.num_qubits());
        for w in windows {
            set.add_boundary(device, w.qubit, &w.start);
            set.add_boundary(device, w.qubit, &w.end);
        }
        set
    }

    /// Record a window boundary on `qubit` as a change for its neighbours.
    pub fn add_boundary(&mut self, device: &DeviceModel, qubit: Qubit, t: &RationalTime) {
        for &n in device.neighbors(qubit) {
            self.per_qubit[n].insert(t.clone());
        }
    }

    pub fn times(&self, qubit: Qubit) -> impl Iterator<Item = &RationalTime> {
        self.per_qubit[qubit].iter()
    }

    /// Change closest to `target` within `[lo, hi]`; ties go earlier.
    pub fn nearest(
        &self,
        qubit: Qubit,
        target: &RationalTime,
        lo: &RationalTime,
        hi: &RationalTime,
    ) -> Option<RationalTime> {
        if lo > hi {
            return None;
        }
        let set = &self.per_qubit[qubit];
        let mid = target.clone().max(lo.clone()).min(hi.clone());
        let below = set.range(lo.clone()..=mid.clone()).next_back();
        let above = set.range(mid..=hi.clone()).next();
        match (below, above) {
            (Some(b), Some(a)) => {
                if (a - target).abs() < (target - b).abs() {
                    Some(a.clone())
                } else {
                    Some(b.clone())
                }
            }
            (Some(b), None) => Some(b.clone()),
            (None, Some(a)) => Some(a.clone()),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LongSplitReport {
    /// Windows that were cut.
    pub windows_split: usize,
    /// Extra windows created.
    pub pieces_added: usize,
    /// Cut points that landed on a context change.
    pub snapped: usize,
}

fn split_points(
    w: &IdleWindow,
    device: &DeviceModel,
    changes: &ContextChangeSet,
    report: &mut LongSplitReport,
) -> Vec<RationalTime> {
    let max = RationalTime::from_tick(device.max_idle());
    let min = RationalTime::from_tick(device.min_embeddable());
    let g = device.granularity();
    let total = w.duration();
    let mut n = (&total / &max).ceil_tick();
    while n > 1 && &total / n < min {
        n -= 1;
    }
    let piece = &total / n;
    let tol = piece.clone() / 4;

    let mut cuts = Vec::new();
    let mut prev = w.start.clone();
    for i in 1..n {
        let left = n - i;
        let lo = (&w.end - &(&max * left)).max(&prev + &min);
        let hi = (&prev + &max).min(&w.end - &(&min * left));
        let ideal = &w.start + &(&piece * i);
        let snap_lo = (&ideal - &tol).max(lo.clone());
        let snap_hi = (&ideal + &tol).min(hi.clone());
        let cut = match changes.nearest(w.qubit, &ideal, &snap_lo, &snap_hi) {
            Some(c) if w.interval().contains_strictly(&c) => {
                report.snapped += 1;
                c
            }
            _ => {
                let (glo, ghi) = (ceil_to_grid(&lo, g), floor_to_grid(&hi, g));
                let r = RationalTime::from_tick(ideal.round_to_grid(g));
                if glo <= ghi {
                    r.max(glo.into()).min(ghi.into())
                } else {
                    ideal.max(lo).min(hi)
                }
            }
        };
        prev = cut.clone();
        cuts.push(cut);
    }
    cuts
}

/// Replace every window longer than the device's `max_idle` by contiguous
/// pieces. Output ids are reassigned by `(start, qubit)`.
pub fn split_long_idles(
    idles: Vec<IdleWindow>,
    device: &DeviceModel,
    changes: &mut ContextChangeSet,
) -> (Vec<IdleWindow>, LongSplitReport) {
    let mut report = LongSplitReport::default();
    let mut order: Vec<IdleWindow> = idles;
    order.sort_by(|a, b| (&a.start, a.qubit, a.id).cmp(&(&b.start, b.qubit, b.id)));

    let mut out = Vec::with_capacity(order.len());
    for w in order {
        if w.duration() <= device.max_idle() {
            out.push(w);
            continue;
        }
        let cuts = split_points(&w, device, changes, &mut report);
        if cuts.is_empty() {
            out.push(w);
            continue;
        }
        report.windows_split += 1;
        report.pieces_added += cuts.len();
        let mut bounds = Vec::with_capacity(cuts.len() + 2);
        bounds.push(w.start.clone());
        for c in cuts {
            changes.add_boundary(device, w.qubit, &c);
            bounds.push(c);
        }
        bounds.push(w.end.clone());
        for (k, pair) in bounds.windows(2).enumerate() {
            let mut piece = IdleWindow::new(w.id, w.qubit, pair[0].clone(), pair[1].clone());
            piece.origin = WindowOrigin {
                idle: w.origin.idle,
                split: w.origin.split + k,
            };
            out.push(piece);
        }
    }
    out.sort_by(|a, b| (&a.start, a.qubit).cmp(&(&b.start, b.qubit)));
    for (id, w) in out.iter_mut().enumerate() {
        w.id = id;
    }
    (out, report)
}

/// Result of cutting one multi-constrained node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FvsSplit {
    pub pieces: Vec<IdleWindow>,
    /// Pieces that absorbed a too-short neighbour piece.
    pub merged: usize,
    /// Merged pieces whose best offset still leaves a nonzero edge integral.
    pub fallbacks: usize,
}

/// Cut `node` so that each piece sees constant neighbour signs, then place
/// two gates per piece. `neighbors` pairs each embedded neighbour with its
/// overlap on `node`. Pieces shorter than `min_len` are merged; `lead` is the
/// offset used when any offset works.
pub fn split_fvs_node(
    node: &IdleWindow,
    neighbors: &[(&IdleWindow, Interval)],
    min_len: &RationalTime,
    lead: &RationalTime,
) -> FvsSplit {
    let span = node.interval();
    let mut cuts: Vec<RationalTime> = Vec::new();
    for (n, _) in neighbors {
        for t in [&n.start, &n.end].into_iter().chain(n.gates.iter()) {
            if span.contains_strictly(t) {
                cuts.push(t.clone());
            }
        }
    }
    cuts.sort();
    cuts.dedup();

    // (interval, merged) pieces, left to right.
    let mut pieces: Vec<(Interval, bool)> = Vec::new();
    let mut prev = span.start.clone();
    for t in cuts.into_iter().chain(std::iter::once(span.end.clone())) {
        let iv = Interval::new(prev, t.clone());
        prev = t;
        match pieces.last_mut() {
            Some((last, merged)) if &last.len() < min_len || &iv.len() < min_len => {
                last.end = iv.end;
                *merged = true;
            }
            _ => pieces.push((iv, false)),
        }
    }
    if pieces.len() > 1 && &pieces.last().expect("non-empty").0.len() < min_len {
        let (tail, _) = pieces.pop().expect("non-empty");
        let (last, merged) = pieces.last_mut().expect("non-empty");
        last.end = tail.end;
        *merged = true;
    }

    let mut out = FvsSplit {
        pieces: Vec::with_capacity(pieces.len()),
        merged: 0,
        fallbacks: 0,
    };
    for (k, (iv, merged)) in pieces.into_iter().enumerate() {
        let mut w = IdleWindow::new(node.id, node.qubit, iv.start.clone(), iv.end.clone());
        w.origin = WindowOrigin {
            idle: node.origin.idle,
            split: node.origin.split + k,
        };
        let half = iv.len().half();
        let offset = if merged {
            out.merged += 1;
            let (o, worst) = minimax_offset(&w, neighbors, lead);
            if !worst.is_zero() {
                out.fallbacks += 1;
            }
            o
        } else if lead <= &half {
            lead.clone()
        } else {
            RationalTime::zero()
        };
        let g1 = &iv.start + &offset;
        let g2 = &g1 + &half;
        w.gates = vec![g1, g2];
        out.pieces.push(w);
    }
    out
}

// Offset minimising the largest |edge integral| over the piece, searched over
// every breakpoint and root of the neighbour Δ functions. Offsets in
// [lead, T/2 - lead] win ties, then the smallest.
fn minimax_offset(
    piece: &IdleWindow,
    neighbors: &[(&IdleWindow, Interval)],
    lead: &RationalTime,
) -> (RationalTime, RationalTime) {
    let span = piece.interval();
    let half = span.len().half();
    let deltas: Vec<PiecewiseLinear> = neighbors
        .iter()
        .filter_map(|(n, ov)| {
            let ov = ov.intersect(&span)?;
            Some(delta_of_offset(piece, &n.gates, &ov))
        })
        .collect();
    let mut candidates = vec![RationalTime::zero(), half.clone()];
    if lead <= &half {
        candidates.push(lead.clone());
    }
    for d in &deltas {
        candidates.extend(d.breakpoints.iter().cloned());
        candidates.extend(d.roots());
    }
    candidates.sort();
    candidates.dedup();
    let hi_pref = &half - lead;
    let preferred = |o: &RationalTime| o >= lead && o <= &hi_pref;
    candidates
        .into_iter()
        .map(|o| {
            let worst = deltas
                .iter()
                .map(|d| d.eval(&o).abs())
                .max()
                .unwrap_or_else(RationalTime::zero);
            (worst, !preferred(&o), o)
        })
        .min()
        .map(|(w, _, o)| (o, w))
        .expect("candidate set is non-empty")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{sign_integral, sign_product_integral, SignFunction};

    fn rt(n: i64) -> RationalTime {
        RationalTime::from_tick(n)
    }

    fn dev(max_idle: i64) -> DeviceModel {
        DeviceModel::new(3, &[(0, 1), (1, 2)], 1, 0, max_idle, None).unwrap()
    }

    fn win(id: usize, q: Qubit, s: i64, e: i64) -> IdleWindow {
        IdleWindow::new(id, q, rt(s), rt(e))
    }

    fn bounds(ws: &[IdleWindow], q: Qubit) -> Vec<(RationalTime, RationalTime)> {
        ws.iter()
            .filter(|w| w.qubit == q)
            .map(|w| (w.start.clone(), w.end.clone()))
            .collect()
    }

    #[test]
    fn short_window_untouched() {
        let d = dev(1000);
        let ws = vec![win(0, 0, 0, 1000)];
        let mut cc = ContextChangeSet::from_windows(&ws, &d);
        let (out, rep) = split_long_idles(ws.clone(), &d, &mut cc);
        assert_eq!(out, ws);
        assert_eq!(rep, LongSplitReport::default());
    }

    #[test]
    fn ideal_split_without_changes() {
        let d = dev(1000);
        let ws = vec![win(0, 0, 0, 2000)];
        let mut cc = ContextChangeSet::from_windows(&ws, &d);
        let (out, _) = split_long_idles(ws, &d, &mut cc);
        assert_eq!(bounds(&out, 0), vec![(rt(0), rt(1000)), (rt(1000), rt(2000))]);
        assert_eq!(out[1].origin, WindowOrigin { idle: 0, split: 1 });
    }

    #[test]
    fn snaps_to_context_changes() {
        let d = dev(900);
        // Neighbour windows on qubit 1 end at 650 and start at 1340.
        let ws = vec![win(0, 0, 0, 2000), win(1, 1, 100, 650), win(2, 1, 1340, 1400)];
        let mut cc = ContextChangeSet::from_windows(&ws, &d);
        let (out, rep) = split_long_idles(ws, &d, &mut cc);
        assert_eq!(
            bounds(&out, 0),
            vec![(rt(0), rt(650)), (rt(650), rt(1340)), (rt(1340), rt(2000))]
        );
        assert_eq!(rep.snapped, 2);
        assert_eq!(rep.pieces_added, 2);
    }

    #[test]
    fn far_changes_are_ignored() {
        let d = dev(900);
        let ws = vec![win(0, 0, 0, 2000), win(1, 1, 100, 300)];
        let mut cc = ContextChangeSet::from_windows(&ws, &d);
        let (out, rep) = split_long_idles(ws, &d, &mut cc);
        assert_eq!(rep.snapped, 0);
        assert_eq!(
            bounds(&out, 0),
            vec![(rt(0), rt(667)), (rt(667), rt(1333)), (rt(1333), rt(2000))]
        );
    }

    #[test]
    fn adjacent_long_idles_share_cuts() {
        let d = dev(1000);
        let ws = vec![win(0, 0, 0, 2000), win(1, 1, 0, 2000)];
        let mut cc = ContextChangeSet::from_windows(&ws, &d);
        let (out, _) = split_long_idles(ws, &d, &mut cc);
        assert_eq!(bounds(&out, 0), bounds(&out, 1));
    }

    #[test]
    fn splitting_is_idempotent() {
        let d = dev(700);
        let ws = vec![win(0, 0, 0, 2500), win(1, 1, 300, 1900), win(2, 2, 0, 900)];
        let mut cc = ContextChangeSet::from_windows(&ws, &d);
        let (once, _) = split_long_idles(ws, &d, &mut cc);
        let mut cc2 = ContextChangeSet::from_windows(&once, &d);
        let (twice, rep) = split_long_idles(once.clone(), &d, &mut cc2);
        assert_eq!(once, twice);
        assert_eq!(rep.windows_split, 0);
        assert!(once.iter().all(|w| w.duration() <= 700));
    }

    #[test]
    fn fvs_without_neighbours() {
        let node = win(0, 0, 0, 1000);
        let s = split_fvs_node(&node, &[], &rt(2), &rt(0));
        assert_eq!(s.pieces.len(), 1);
        assert_eq!(s.pieces[0].gates, vec![rt(0), rt(500)]);
    }

    #[test]
    fn fvs_cuts_at_neighbour_gates() {
        let node = win(0, 0, 0, 1000);
        let mut n = win(1, 1, -100, 1100);
        n.gates = vec![rt(250), rt(750)];
        let ov = Interval::new(0, 1000);
        let s = split_fvs_node(&node, &[(&n, ov.clone())], &rt(2), &rt(0));
        let spans: Vec<_> = s.pieces.iter().map(|p| (p.start.clone(), p.end.clone())).collect();
        assert_eq!(spans, vec![(rt(0), rt(250)), (rt(250), rt(750)), (rt(750), rt(1000))]);
        let gates: Vec<_> = s.pieces.iter().flat_map(|p| p.gates.clone()).collect();
        assert_eq!(
            gates,
            [0, 125, 250, 500, 750, 875].map(rt).to_vec()
        );
        let a = SignFunction::of_window(&n);
        for p in &s.pieces {
            let c = SignFunction::of_window(p);
            assert!(sign_product_integral(&a, &c, &p.interval()).is_zero());
            assert!(sign_integral(&c, &p.interval()).is_zero());
        }
    }

    #[test]
    fn fvs_short_pieces_merge() {
        let node = win(0, 0, 0, 1000);
        let mut n = win(1, 1, -100, 1100);
        n.gates = vec![rt(10), rt(600)];
        let s = split_fvs_node(&node, &[(&n, Interval::new(0, 1000))], &rt(100), &rt(0));
        let spans: Vec<_> = s.pieces.iter().map(|p| (p.start.clone(), p.end.clone())).collect();
        assert_eq!(spans, vec![(rt(0), rt(600)), (rt(600), rt(1000))]);
        assert_eq!(s.merged, 1);
        // The merged piece still has an exact root: one flip inside.
        assert_eq!(s.fallbacks, 0);
        let a = SignFunction::of_window(&n);
        let c = SignFunction::of_window(&s.pieces[0]);
        assert!(sign_product_integral(&a, &c, &s.pieces[0].interval()).is_zero());
    }
}
