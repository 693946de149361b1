//! Exact placement of two X gates in an idle window.
//!
//! Each window carries a toggling sign, `+1` at its start and negated at every
//! gate centre. A Z residual is the integral of that sign over the window; a
//! ZZ residual is the integral of the product of two signs over their
//! overlap. Two gates half a window apart always zero the former. Their
//! common offset is then chosen as a root of
//! `Δ(o) = ∫_overlap s_ancestor · s_current(o)`, which is piecewise linear in
//! `o` and satisfies `Δ(0) = -Δ(T/2)`, so a root always exists.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::schedule::IdleWindow;
use crate::time::{Interval, RationalTime};

/// `±1` step function over a window, negated at each flip.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignFunction {
    pub window: Interval,
    flips: Vec<RationalTime>,
    pub initial: i8,
}

impl SignFunction {
    /// Flips are sorted; they may touch the window edges but must not leave it.
    pub fn new(window: Interval, mut flips: Vec<RationalTime>) -> Self {
        flips.sort();
        debug_assert!(flips.windows(2).all(|p| p[0] < p[1]), "flips must be distinct");
        debug_assert!(flips
            .iter()
            .all(|f| &window.start <= f && f <= &window.end));
        SignFunction {
            window,
            flips,
            initial: 1,
        }
    }

    pub fn of_window(w: &IdleWindow) -> Self {
        SignFunction::new(w.interval(), w.gates.clone())
    }

    pub fn negated(mut self) -> Self {
        self.initial = -self.initial;
        self
    }

    pub fn flips(&self) -> &[RationalTime] {
        &self.flips
    }

    /// Sign on the right of `t`: flips at or before `t` count.
    pub fn value_at(&self, t: &RationalTime) -> i8 {
        let k = self.flips.partition_point(|f| f <= t);
        if k % 2 == 0 {
            self.initial
        } else {
            -self.initial
        }
    }

    /// Flips strictly inside `span`.
    pub fn flips_within<'a>(&'a self, span: &'a Interval) -> impl Iterator<Item = &'a RationalTime> {
        let lo = self.flips.partition_point(|f| f <= &span.start);
        let hi = self.flips.partition_point(|f| f < &span.end);
        self.flips[lo..hi.max(lo)].iter()
    }
}

/// Signed measure of `a` alone over `span`.
pub fn sign_integral(a: &SignFunction, span: &Interval) -> RationalTime {
    let mut sign = a.value_at(&span.start);
    let mut cursor = span.start.clone();
    let mut total = RationalTime::zero();
    for f in a.flips_within(span) {
        let seg = f - &cursor;
        if sign > 0 {
            total += &seg;
        } else {
            total -= &seg;
        }
        sign = -sign;
        cursor = f.clone();
    }
    let seg = &span.end - &cursor;
    if sign > 0 {
        total + seg
    } else {
        total - seg
    }
}

/// `∫_span a(t)·c(t) dt`, exact.
pub fn sign_product_integral(a: &SignFunction, c: &SignFunction, span: &Interval) -> RationalTime {
    let mut sign = a.value_at(&span.start) * c.value_at(&span.start);
    let mut cursor = span.start.clone();
    let mut total = RationalTime::zero();
    let mut fa = a.flips_within(span).peekable();
    let mut fc = c.flips_within(span).peekable();
    loop {
        let next = match (fa.peek(), fc.peek()) {
            (None, None) => break,
            (Some(x), None) => {
                let x = (*x).clone();
                fa.next();
                x
            }
            (None, Some(y)) => {
                let y = (*y).clone();
                fc.next();
                y
            }
            (Some(x), Some(y)) => {
                if x < y {
                    let x = (*x).clone();
                    fa.next();
                    x
                } else if y < x {
                    let y = (*y).clone();
                    fc.next();
                    y
                } else {
                    // Simultaneous flips cancel in the product.
                    let x = (*x).clone();
                    fa.next();
                    fc.next();
                    let seg = &x - &cursor;
                    if sign > 0 {
                        total += &seg;
                    } else {
                        total -= &seg;
                    }
                    cursor = x;
                    continue;
                }
            }
        };
        let seg = &next - &cursor;
        if sign > 0 {
            total += &seg;
        } else {
            total -= &seg;
        }
        sign = -sign;
        cursor = next;
    }
    let seg = &span.end - &cursor;
    if sign > 0 {
        total + seg
    } else {
        total - seg
    }
}

/// Continuous piecewise-linear function given by its breakpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseLinear {
    pub breakpoints: Vec<RationalTime>,
    pub values: Vec<RationalTime>,
}

impl PiecewiseLinear {
    pub fn eval(&self, x: &RationalTime) -> RationalTime {
        let k = self.breakpoints.partition_point(|b| b <= x);
        if k == 0 {
            return self.values[0].clone();
        }
        if k == self.breakpoints.len() {
            return self.values[k - 1].clone();
        }
        let (x0, x1) = (&self.breakpoints[k - 1], &self.breakpoints[k]);
        let (y0, y1) = (&self.values[k - 1], &self.values[k]);
        y0 + &(&(y1 - y0) * &(x - x0)) / &(x1 - x0)
    }

    /// Every root in ascending order. A segment that is identically zero
    /// contributes its left end.
    pub fn roots(&self) -> Vec<RationalTime> {
        let mut out: Vec<RationalTime> = Vec::new();
        let mut push = |r: RationalTime| {
            if out.last() != Some(&r) {
                out.push(r);
            }
        };
        for k in 0..self.breakpoints.len() {
            let y = &self.values[k];
            if y.is_zero() {
                push(self.breakpoints[k].clone());
            } else if k + 1 < self.breakpoints.len() {
                let y1 = &self.values[k + 1];
                if !y1.is_zero() && y.signum() != y1.signum() {
                    let (x0, x1) = (&self.breakpoints[k], &self.breakpoints[k + 1]);
                    push(x0 + &(&(x1 - x0) * y) / &(y - y1));
                }
            }
        }
        out
    }

    /// Smallest root inside `[lo, hi]`, if any.
    pub fn first_root_in(&self, lo: &RationalTime, hi: &RationalTime) -> Option<RationalTime> {
        for k in 0..self.breakpoints.len() {
            let (x0, y0) = (&self.breakpoints[k], &self.values[k]);
            if x0 > hi {
                break;
            }
            if y0.is_zero() && x0 >= lo {
                return Some(x0.clone());
            }
            let Some(x1) = self.breakpoints.get(k + 1) else { break };
            let y1 = &self.values[k + 1];
            if x1 < lo {
                continue;
            }
            if y0.is_zero() && y1.is_zero() {
                // Flat zero segment overlapping [lo, hi].
                return Some(lo.clone().max(x0.clone()));
            }
            if !y0.is_zero() && !y1.is_zero() && y0.signum() != y1.signum() {
                let r = x0 + &(&(x1 - x0) * y0) / &(y0 - y1);
                if &r >= lo && &r <= hi {
                    return Some(r);
                }
            }
        }
        None
    }
}

/// Gates at `start + offset` and `start + offset + T/2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffsetSolution {
    pub offset: RationalTime,
    pub gate_times: [RationalTime; 2],
    pub residual_zz: RationalTime,
}

fn pair_sign(window: &Interval, offset: &RationalTime) -> SignFunction {
    let half = window.len().half();
    let g1 = &window.start + offset;
    let g2 = &g1 + &half;
    SignFunction::new(window.clone(), vec![g1, g2])
}

/// `Δ(o)` for a two-gate pair in `current`, against an ancestor whose sign is
/// `+1` at `overlap.start` and flips at `ancestor_flips`.
pub fn delta_of_offset(
    current: &IdleWindow,
    ancestor_flips: &[RationalTime],
    overlap: &Interval,
) -> PiecewiseLinear {
    let window = current.interval();
    let ancestor = SignFunction::new(
        overlap.clone(),
        ancestor_flips
            .iter()
            .filter(|f| overlap.contains_strictly(f))
            .cloned()
            .collect(),
    );
    delta_against(&window, &ancestor, overlap)
}

fn delta_breakpoints(window: &Interval, ancestor: &SignFunction, overlap: &Interval) -> Vec<RationalTime> {
    let half = window.len().half();
    let zero = RationalTime::zero();
    let mut bps = vec![zero.clone(), half.clone()];
    let events = ancestor
        .flips_within(overlap)
        .chain([&overlap.start, &overlap.end]);
    for x in events {
        let o = x - &window.start;
        let o2 = &o - &half;
        for cand in [o, o2] {
            if cand >= zero && cand <= half {
                bps.push(cand);
            }
        }
    }
    bps.sort();
    bps.dedup();
    bps
}

/// Evaluates `Δ` anywhere in `[0, T/2]`. The pair is -1 exactly on
/// `[s + o, s + o + T/2)`, so `Δ(o) = ∫a - 2·∫_{[s+o, s+o+T/2)} a`.
struct DeltaEval<'a> {
    start: &'a RationalTime,
    half: RationalTime,
    prefix: RunningIntegral<'a>,
    total: RationalTime,
}

impl<'a> DeltaEval<'a> {
    fn new(window: &'a Interval, ancestor: &'a SignFunction, overlap: &'a Interval) -> Self {
        let prefix = RunningIntegral::new(ancestor, overlap);
        let total = prefix.at(&overlap.end);
        DeltaEval {
            start: &window.start,
            half: window.len().half(),
            prefix,
            total,
        }
    }

    fn at(&self, o: &RationalTime) -> RationalTime {
        let g1 = self.start + o;
        let g2 = &g1 + &self.half;
        let inner = &self.prefix.at(&g2) - &self.prefix.at(&g1);
        &(&self.total - &inner) - &inner
    }
}

fn delta_against(window: &Interval, ancestor: &SignFunction, overlap: &Interval) -> PiecewiseLinear {
    let breakpoints = delta_breakpoints(window, ancestor, overlap);
    let eval = DeltaEval::new(window, ancestor, overlap);
    let values = breakpoints.iter().map(|o| eval.at(o)).collect();
    PiecewiseLinear { breakpoints, values }
}

// Smallest root in [lo, hi], evaluating Δ only up to where it is found.
fn first_root_lazy(eval: &DeltaEval, bps: &[RationalTime], lo: &RationalTime, hi: &RationalTime) -> Option<RationalTime> {
    let mut prev: Option<(&RationalTime, RationalTime)> = None;
    for x1 in bps {
        if x1 < lo {
            prev = Some((x1, RationalTime::zero()));
            continue;
        }
        let y1 = eval.at(x1);
        match prev.take() {
            Some((x0, y0)) => {
                if x0 > hi {
                    break;
                }
                let y0 = if x0 < lo { eval.at(x0) } else { y0 };
                if let Some(r) = segment_root(x0, &y0, x1, &y1, lo, hi) {
                    return Some(r);
                }
            }
            None if y1.is_zero() && x1 <= hi => return Some(x1.clone()),
            None => {}
        }
        prev = Some((x1, y1));
    }
    None
}

/// First root of the line through `(x0, y0)` and `(x1, y1)` within `[lo, hi]`.
fn segment_root(
    x0: &RationalTime,
    y0: &RationalTime,
    x1: &RationalTime,
    y1: &RationalTime,
    lo: &RationalTime,
    hi: &RationalTime,
) -> Option<RationalTime> {
    let inside = |x: &RationalTime| x >= lo && x <= hi;
    if y0.is_zero() && inside(x0) {
        return Some(x0.clone());
    }
    if y0.is_zero() && y1.is_zero() && x0 <= hi && x1 >= lo {
        return Some(lo.clone().max(x0.clone()));
    }
    if !y0.is_zero() && !y1.is_zero() && y0.signum() != y1.signum() {
        let r = x0 + &(&(x1 - x0) * y0) / &(y0 - y1);
        if inside(&r) {
            return Some(r);
        }
    }
    if y1.is_zero() && inside(x1) {
        return Some(x1.clone());
    }
    None
}

/// `t ↦ ∫_{span.start}^{t} a`, clamped to `span`.
struct RunningIntegral<'a> {
    span: &'a Interval,
    knots: Vec<&'a RationalTime>,
    cum: Vec<RationalTime>,
    first: i8,
}

impl<'a> RunningIntegral<'a> {
    fn new(a: &'a SignFunction, span: &'a Interval) -> Self {
        let first = a.value_at(&span.start);
        let mut knots = vec![&span.start];
        knots.extend(a.flips_within(span));
        let mut cum = Vec::with_capacity(knots.len());
        let mut acc = RationalTime::zero();
        let mut sign = -first;
        for (k, t) in knots.iter().enumerate() {
            if k > 0 {
                let seg = *t - knots[k - 1];
                acc = if sign > 0 { acc + seg } else { acc - seg };
            }
            cum.push(acc.clone());
            sign = -sign;
        }
        RunningIntegral { span, knots, cum, first }
    }

    fn at(&self, t: &RationalTime) -> RationalTime {
        let t = t.clone().max(self.span.start.clone()).min(self.span.end.clone());
        let k = self.knots.partition_point(|x| *x <= &t) - 1;
        let seg = &t - self.knots[k];
        let sign = if k % 2 == 0 { self.first } else { -self.first };
        if sign > 0 {
            &self.cum[k] + &seg
        } else {
            &self.cum[k] - &seg
        }
    }
}

fn solution_at(window: &Interval, offset: RationalTime, ancestor: Option<(&SignFunction, &Interval)>) -> OffsetSolution {
    let sign = pair_sign(window, &offset);
    let residual_zz = match ancestor {
        Some((a, ov)) => sign_product_integral(a, &sign, ov),
        None => RationalTime::zero(),
    };
    let [g1, g2]: [RationalTime; 2] = sign.flips.try_into().expect("two gates");
    OffsetSolution {
        offset,
        gate_times: [g1, g2],
        residual_zz,
    }
}

/// Smallest offset zeroing the ZZ integral against the ancestor, or 0 when
/// there is no ancestor.
pub fn solve_offset(current: &IdleWindow, ancestor: Option<(&IdleWindow, &Interval)>) -> OffsetSolution {
    let half = current.duration().half();
    solve_offset_preferring(current, ancestor, &RationalTime::zero(), &half)
}

/// The same root search on integers. All times in one solve share a small
/// common denominator, so scaling by it avoids rational arithmetic.
mod scaled {
    use num_integer::Integer;

    use super::*;

    const LIMIT: i128 = 1 << 50;
    const MAX_SCALE: i128 = 1 << 20;

    struct Problem {
        scale: i128,
        start: i128,
        half: i128,
        /// Overlap start, then ancestor flips strictly inside the overlap.
        knots: Vec<i128>,
        end: i128,
        cum: Vec<i128>,
        first: i128,
        total: i128,
    }

    impl Problem {
        fn new(window: &Interval, ancestor: &IdleWindow, overlap: &Interval, extra: [&RationalTime; 2]) -> Option<Self> {
            let inside: Vec<&RationalTime> = ancestor
                .gates
                .iter()
                .filter(|f| *f > &overlap.start && *f < &overlap.end)
                .collect();
            let fixed = [&window.start, &window.end, &overlap.start, &overlap.end, extra[0], extra[1]];
            // The extra factor two keeps half the window length integral.
            let mut scale = 1;
            for t in fixed.iter().chain(&inside) {
                scale = scale.lcm(&t.small()?.1);
                if scale > MAX_SCALE {
                    return None;
                }
            }
            scale *= 2;
            let at = |t: &RationalTime| -> Option<i128> {
                let (n, d) = t.small()?;
                let v = n * (scale / d);
                (v.abs() < LIMIT).then_some(v)
            };
            let before = ancestor.gates.iter().filter(|f| *f <= &overlap.start).count();
            let first = if before % 2 == 0 { 1 } else { -1 };
            let mut knots = Vec::with_capacity(inside.len() + 1);
            knots.push(at(&overlap.start)?);
            for f in inside {
                knots.push(at(f)?);
            }
            knots[1..].sort_unstable();
            let mut cum = Vec::with_capacity(knots.len());
            let mut acc = 0;
            cum.push(0);
            for k in 1..knots.len() {
                let sign = if k % 2 == 1 { first } else { -first };
                acc += sign * (knots[k] - knots[k - 1]);
                cum.push(acc);
            }
            let start = at(&window.start)?;
            let mut p = Problem {
                scale,
                start,
                half: (at(&window.end)? - start) / 2,
                knots,
                end: at(&overlap.end)?,
                cum,
                first,
                total: 0,
            };
            p.total = p.prefix(p.end, 1);
            Some(p)
        }

        /// Ancestor integral from the overlap start to `t / den`, times `den`.
        fn prefix(&self, t: i128, den: i128) -> i128 {
            let t = t.clamp(self.knots[0] * den, self.end * den);
            let k = self.knots.partition_point(|&x| x * den <= t) - 1;
            let sign = if k % 2 == 0 { self.first } else { -self.first };
            self.cum[k] * den + sign * (t - self.knots[k] * den)
        }

        /// Δ at offset `o / den`, times `den`.
        fn delta(&self, o: i128, den: i128) -> i128 {
            let g1 = self.start * den + o;
            let inner = self.prefix(g1 + self.half * den, den) - self.prefix(g1, den);
            self.total * den - 2 * inner
        }

        fn breakpoints(&self) -> Vec<i128> {
            let mut bps = Vec::with_capacity(2 * self.knots.len() + 4);
            bps.extend([0, self.half]);
            for &x in self.knots.iter().chain([&self.end]) {
                for o in [x - self.start, x - self.start - self.half] {
                    if (0..=self.half).contains(&o) {
                        bps.push(o);
                    }
                }
            }
            bps.sort_unstable();
            bps.dedup();
            bps
        }

        /// First root in `[lo, hi]` as a fraction with positive denominator.
        fn root(&self, bps: &[i128], lo: i128, hi: i128) -> Option<(i128, i128)> {
            let mut prev: Option<(i128, i128)> = None;
            for &x1 in bps {
                if x1 < lo {
                    prev = Some((x1, 0));
                    continue;
                }
                let y1 = self.delta(x1, 1);
                match prev.take() {
                    Some((x0, y0)) => {
                        if x0 > hi {
                            break;
                        }
                        let y0 = if x0 < lo { self.delta(x0, 1) } else { y0 };
                        if let Some(r) = segment_root(x0, y0, x1, y1, lo, hi) {
                            return Some(r);
                        }
                    }
                    None if y1 == 0 && x1 <= hi => return Some((x1, 1)),
                    None => {}
                }
                prev = Some((x1, y1));
            }
            None
        }
    }

    fn segment_root(x0: i128, y0: i128, x1: i128, y1: i128, lo: i128, hi: i128) -> Option<(i128, i128)> {
        let inside = |x: i128| lo <= x && x <= hi;
        if y0 == 0 && inside(x0) {
            return Some((x0, 1));
        }
        if y0 == 0 && y1 == 0 && x0 <= hi && x1 >= lo {
            return Some((lo.max(x0), 1));
        }
        if y0 != 0 && y1 != 0 && y0.signum() != y1.signum() {
            let (mut n, mut d) = (x0 * (y0 - y1) + (x1 - x0) * y0, y0 - y1);
            if d < 0 {
                (n, d) = (-n, -d);
            }
            if lo * d <= n && n <= hi * d {
                return Some((n, d));
            }
        }
        if y1 == 0 && inside(x1) {
            return Some((x1, 1));
        }
        None
    }

    /// `None` when some time does not fit the integer representation.
    pub(super) fn solve(
        window: &Interval,
        ancestor: &IdleWindow,
        overlap: &Interval,
        lo: &RationalTime,
        hi: &RationalTime,
    ) -> Option<OffsetSolution> {
        let p = Problem::new(window, ancestor, overlap, [lo, hi])?;
        let (lo, hi) = (lo.small()?, hi.small()?);
        let (lo, hi) = (lo.0 * (p.scale / lo.1), hi.0 * (p.scale / hi.1));
        let bps = p.breakpoints();
        let (n, d) = p
            .root(&bps, lo, hi)
            .or_else(|| p.root(&bps, 0, p.half))
            .expect("Δ(0) = -Δ(T/2) guarantees a root");
        let offset = RationalTime::from_i128(n, d * p.scale);
        let residual_zz = RationalTime::from_i128(p.delta(n, d), d * p.scale);
        let g1 = &window.start + &offset;
        let g2 = &g1 + &RationalTime::from_i128(p.half, p.scale);
        Some(OffsetSolution {
            offset,
            gate_times: [g1, g2],
            residual_zz,
        })
    }
}

/// As [`solve_offset`], but prefers the smallest root inside `[lo, hi]` and
/// falls back to the smallest root overall. Without an ancestor every offset
/// is a root, so `lo` is returned.
pub fn solve_offset_preferring(
    current: &IdleWindow,
    ancestor: Option<(&IdleWindow, &Interval)>,
    lo: &RationalTime,
    hi: &RationalTime,
) -> OffsetSolution {
    let window = current.interval();
    let half = window.len().half();
    let Some((anc, overlap)) = ancestor else {
        let o = if lo <= hi && lo <= &half { lo.clone() } else { RationalTime::zero() };
        return solution_at(&window, o, None);
    };
    scaled::solve(&window, anc, overlap, lo, hi).unwrap_or_else(|| solve_rational(&window, anc, overlap, lo, hi))
}

fn solve_rational(
    window: &Interval,
    anc: &IdleWindow,
    overlap: &Interval,
    lo: &RationalTime,
    hi: &RationalTime,
) -> OffsetSolution {
    let half = window.len().half();
    let a = SignFunction::of_window(anc);
    let bps = delta_breakpoints(window, &a, overlap);
    let eval = DeltaEval::new(window, &a, overlap);
    let offset = first_root_lazy(&eval, &bps, lo, hi)
        .or_else(|| first_root_lazy(&eval, &bps, &RationalTime::zero(), &half))
        .expect("Δ(0) = -Δ(T/2) guarantees a root");
    let residual_zz = eval.at(&offset);
    let g1 = &window.start + &offset;
    let g2 = &g1 + &half;
    OffsetSolution {
        offset,
        gate_times: [g1, g2],
        residual_zz,
    }
}

/// Closed-form placement when `current` lies inside a two-gate `ancestor`.
pub fn closed_form_subinterval(current: &IdleWindow, ancestor: &IdleWindow) -> Result<OffsetSolution> {
    if current.start < ancestor.start || current.end > ancestor.end {
        return Err(Error::Precondition(format!(
            "window {} is not inside ancestor {}",
            current.interval(),
            ancestor.interval()
        )));
    }
    if ancestor.gates.len() != 2 {
        return Err(Error::Precondition(format!(
            "ancestor has {} gates, expected 2",
            ancestor.gates.len()
        )));
    }
    let window = current.interval();
    let (s, e) = (&window.start, &window.end);
    let half = window.len().half();
    let inside: Vec<&RationalTime> = ancestor
        .gates
        .iter()
        .filter(|g| window.contains_strictly(g))
        .collect();
    let first = match inside.as_slice() {
        [] => s.clone(),
        [g] => (s + *g).half(),
        [g1, g2] => {
            let mid = (*g1 + *g2).half();
            if &(&mid + &half) <= e {
                mid
            } else {
                &mid - &half
            }
        }
        _ => unreachable!("at most two gates"),
    };
    let a = SignFunction::of_window(ancestor);
    Ok(solution_at(&window, &first - s, Some((&a, &window))))
}
