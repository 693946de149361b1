//! Time axis types.
//!
//! Schedules are expressed in integer device ticks ([`Tick`]). Everything the
//! embedding solver computes lives in [`RationalTime`], an exact rational, so
//! that refocusing conditions can be checked as equalities before any
//! rounding onto the device grid.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Signed count of device time units (dt).
pub type Tick = i64;

/// Exact rational time in lowest terms with a positive denominator.
///
/// Values whose numerator and denominator fit in `i64` are stored inline;
/// anything larger falls back to arbitrary precision. The representation is
/// canonical, so derived equality and hashing agree with numeric equality.
#[derive(Clone)]
pub struct RationalTime(Repr);

#[derive(Clone)]
enum Repr {
    Small(i64, i64),
    Big(Box<BigRational>),
}

impl RationalTime {
    pub fn zero() -> Self {
        RationalTime(Repr::Small(0, 1))
    }

    pub fn from_tick(t: Tick) -> Self {
        RationalTime(Repr::Small(t, 1))
    }

    /// `num / den`, reduced. Panics on a zero denominator.
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        Self::from_i128(num as i128, den as i128)
    }

    // `num / den` with `den > 0`; power-of-two denominators, the common case,
    // reduce by shifting.
    fn reduced(num: i64, den: i64) -> Self {
        if den == 1 {
            return RationalTime(Repr::Small(num, 1));
        }
        if den & (den - 1) == 0 {
            if num == 0 {
                return RationalTime(Repr::Small(0, 1));
            }
            let shift = num.trailing_zeros().min(den.trailing_zeros());
            return RationalTime(Repr::Small(num >> shift, den >> shift));
        }
        if num != i64::MIN {
            let g = num.gcd(&den);
            return RationalTime(Repr::Small(num / g, den / g));
        }
        Self::from_i128(num as i128, den as i128)
    }

    pub(crate) fn from_i128(num: i128, den: i128) -> Self {
        if den == 1 {
            if let Ok(n) = i64::try_from(num) {
                return RationalTime(Repr::Small(n, 1));
            }
        }
        if let (Ok(n), Ok(d)) = (i64::try_from(num), i64::try_from(den)) {
            if n != i64::MIN && d != i64::MIN {
                // 64-bit division is much cheaper than the 128-bit one.
                let g = n.gcd(&d);
                let (n, d) = (n / g, d / g);
                return RationalTime(Repr::Small(n * d.signum(), d.abs()));
            }
        }
        let g = gcd(num, den);
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(n), Ok(d)) => RationalTime(Repr::Small(n, d)),
            _ => RationalTime(Repr::Big(Box::new(BigRational::new(n.into(), d.into())))),
        }
    }

    fn from_big(r: BigRational) -> Self {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(n), Some(d)) => RationalTime(Repr::Small(n, d)),
            _ => RationalTime(Repr::Big(Box::new(r))),
        }
    }

    fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(n, d) => BigRational::new_raw(BigInt::from(*n), BigInt::from(*d)),
            Repr::Big(r) => (**r).clone(),
        }
    }

    pub(crate) fn small(&self) -> Option<(i128, i128)> {
        match self.0 {
            Repr::Small(n, d) => Some((n as i128, d as i128)),
            Repr::Big(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_integer(&self) -> bool {
        matches!(self.0, Repr::Small(_, 1))
    }

    pub fn abs(&self) -> Self {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    pub fn signum(&self) -> i32 {
        match &self.0 {
            Repr::Small(n, _) => n.signum() as i32,
            Repr::Big(r) => {
                if r.is_positive() {
                    1
                } else if r.is_negative() {
                    -1
                } else {
                    0
                }
            }
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(n, _) => BigInt::from(*n),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, d) => BigInt::from(*d),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    /// Largest tick `<= self`.
    pub fn floor_tick(&self) -> Tick {
        match &self.0 {
            Repr::Small(n, d) => n.div_euclid(*d),
            Repr::Big(r) => r.floor().to_integer().to_i64().expect("time out of i64 range"),
        }
    }

    /// Smallest tick `>= self`.
    pub fn ceil_tick(&self) -> Tick {
        match &self.0 {
            Repr::Small(n, d) => -((-(*n as i128)).div_euclid(*d as i128)) as i64,
            Repr::Big(r) => r.ceil().to_integer().to_i64().expect("time out of i64 range"),
        }
    }

    /// The tick value if this time is integral.
    pub fn to_tick(&self) -> Option<Tick> {
        match self.0 {
            Repr::Small(n, 1) => Some(n),
            _ => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match &self.0 {
            Repr::Small(n, d) => *n as f64 / *d as f64,
            Repr::Big(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    pub fn half(&self) -> Self {
        self / 2
    }

    pub fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Nearest multiple of `granularity`; exact ties go to the lower multiple.
    pub fn round_to_grid(&self, granularity: Tick) -> Tick {
        assert!(granularity >= 1);
        let scaled = self / granularity;
        let lo = scaled.floor_tick();
        let frac = &scaled - &RationalTime::from_tick(lo);
        let k = if frac > RationalTime::new(1, 2) { lo + 1 } else { lo };
        k.checked_mul(granularity).expect("time out of i64 range")
    }

    /// Bit length of the denominator, a cheap measure of arithmetic cost.
    pub fn denom_bits(&self) -> u64 {
        self.denom().bits()
    }
}

impl Default for RationalTime {
    fn default() -> Self {
        RationalTime::zero()
    }
}

impl PartialEq for RationalTime {
    fn eq(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Repr::Small(a, b), Repr::Small(c, d)) => a == c && b == d,
            (Repr::Big(x), Repr::Big(y)) => x == y,
            _ => false,
        }
    }
}

impl Eq for RationalTime {}

impl Hash for RationalTime {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match &self.0 {
            Repr::Small(n, d) => (0u8, n, d).hash(state),
            Repr::Big(r) => (1u8, r).hash(state),
        }
    }
}

impl Ord for RationalTime {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.small(), other.small()) {
            (Some((a, b)), Some((c, d))) => (a * d).cmp(&(c * b)),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl PartialOrd for RationalTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Binary gcd on magnitudes; the result is positive for non-zero `b`.
fn gcd(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    if a == 0 {
        return b as i128;
    }
    if b == 0 {
        return a as i128;
    }
    if a <= u64::MAX as u128 && b <= u64::MAX as u128 {
        return (a as u64).gcd(&(b as u64)) as i128;
    }
    let shift = (a | b).trailing_zeros();
    a >>= a.trailing_zeros();
    loop {
        b >>= b.trailing_zeros();
        if a > b {
            std::mem::swap(&mut a, &mut b);
        }
        b -= a;
        if b == 0 {
            return (a << shift) as i128;
        }
    }
}

fn add_small(a: i128, b: i128, c: i128, d: i128) -> Option<(i128, i128)> {
    if b == d {
        return Some((a.checked_add(c)?, b));
    }
    Some((a.checked_mul(d)?.checked_add(c.checked_mul(b)?)?, b.checked_mul(d)?))
}

fn add(x: &RationalTime, y: &RationalTime) -> RationalTime {
    if let (Repr::Small(a, b), Repr::Small(c, d)) = (&x.0, &y.0) {
        if b == d {
            if let Some(n) = a.checked_add(*c) {
                return RationalTime::reduced(n, *b);
            }
        }
        let n = a.checked_mul(*d).and_then(|x| c.checked_mul(*b).and_then(|y| x.checked_add(y)));
        if let (Some(n), Some(m)) = (n, b.checked_mul(*d)) {
            return RationalTime::reduced(n, m);
        }
    }
    if let (Some((a, b)), Some((c, d))) = (x.small(), y.small()) {
        if let Some((n, m)) = add_small(a, b, c, d) {
            return RationalTime::from_i128(n, m);
        }
    }
    RationalTime::from_big(x.to_big() + y.to_big())
}

fn mul(x: &RationalTime, y: &RationalTime) -> RationalTime {
    if let (Repr::Small(a, 1), Repr::Small(c, 1)) = (&x.0, &y.0) {
        if let Some(n) = a.checked_mul(*c) {
            return RationalTime(Repr::Small(n, 1));
        }
    }
    if let (Some((a, b)), Some((c, d))) = (x.small(), y.small()) {
        if let (Some(n), Some(m)) = (a.checked_mul(c), b.checked_mul(d)) {
            return RationalTime::from_i128(n, m);
        }
    }
    RationalTime::from_big(x.to_big() * y.to_big())
}

fn recip(x: &RationalTime) -> RationalTime {
    assert!(!x.is_zero(), "division by zero time");
    match &x.0 {
        Repr::Small(n, d) => RationalTime::from_i128(*d as i128, *n as i128),
        Repr::Big(r) => RationalTime::from_big(r.recip()),
    }
}

pub fn ceil_to_grid(t: &RationalTime, granularity: Tick) -> Tick {
    let q = (t / granularity).ceil_tick();
    q * granularity
}

pub fn floor_to_grid(t: &RationalTime, granularity: Tick) -> Tick {
    let q = (t / granularity).floor_tick();
    q * granularity
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interval {
    pub start: RationalTime,
    pub end: RationalTime,
}

impl Interval {
    pub fn new(start: impl Into<RationalTime>, end: impl Into<RationalTime>) -> Self {
        Interval {
            start: start.into(),
            end: end.into(),
        }
    }

    pub fn len(&self) -> RationalTime {
        &self.end - &self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Strict interior membership.
    pub fn contains_strictly(&self, t: &RationalTime) -> bool {
        &self.start < t && t < &self.end
    }

    /// Intersection, if it has positive length.
    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let start = (&self.start).max(&other.start).clone();
        let end = (&self.end).min(&other.end).clone();
        (start < end).then_some(Interval { start, end })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

impl From<Tick> for RationalTime {
    fn from(t: Tick) -> Self {
        RationalTime::from_tick(t)
    }
}

impl fmt::Debug for RationalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for RationalTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(n, 1) => write!(f, "{n}"),
            Repr::Small(n, d) => write!(f, "{n}/{d}"),
            Repr::Big(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Repr::Big(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid rational time {0:?}")]
pub struct ParseTimeError(String);

impl FromStr for RationalTime {
    type Err = ParseTimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ParseTimeError(s.to_string());
        let s = s.trim();
        match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| bad())?;
                let d: BigInt = d.trim().parse().map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                Ok(RationalTime::from_big(BigRational::new(n, d)))
            }
            None => {
                let n: BigInt = s.parse().map_err(|_| bad())?;
                Ok(RationalTime::from_big(BigRational::from_integer(n)))
            }
        }
    }
}

// Integral times serialize as JSON integers, everything else as "p/q".
impl Serialize for RationalTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.to_tick() {
            Some(t) => serializer.serialize_i64(t),
            None => serializer.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for RationalTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct TimeVisitor;

        impl Visitor<'_> for TimeVisitor {
            type Value = RationalTime;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an integer tick or a \"p/q\" rational string")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(RationalTime::from_tick(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                i64::try_from(v)
                    .map(RationalTime::from_tick)
                    .map_err(|_| E::custom("tick out of range"))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                v.parse().map_err(E::custom)
            }
        }

        deserializer.deserialize_any(TimeVisitor)
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $f:expr) => {
        impl $trait<&RationalTime> for &RationalTime {
            type Output = RationalTime;
            fn $method(self, rhs: &RationalTime) -> RationalTime {
                $f(self, rhs)
            }
        }
        impl $trait<RationalTime> for RationalTime {
            type Output = RationalTime;
            fn $method(self, rhs: RationalTime) -> RationalTime {
                $f(&self, &rhs)
            }
        }
        impl $trait<&RationalTime> for RationalTime {
            type Output = RationalTime;
            fn $method(self, rhs: &RationalTime) -> RationalTime {
                $f(&self, rhs)
            }
        }
        impl $trait<RationalTime> for &RationalTime {
            type Output = RationalTime;
            fn $method(self, rhs: RationalTime) -> RationalTime {
                $f(self, &rhs)
            }
        }
    };
}

forward_binop!(Add, add, add);
forward_binop!(Sub, sub, |x: &RationalTime, y: &RationalTime| add(x, &-y));
forward_binop!(Mul, mul, mul);
forward_binop!(Div, div, |x: &RationalTime, y: &RationalTime| mul(x, &recip(y)));

impl Mul<i64> for &RationalTime {
    type Output = RationalTime;
    fn mul(self, rhs: i64) -> RationalTime {
        mul(self, &RationalTime::from_tick(rhs))
    }
}

impl Mul<i64> for RationalTime {
    type Output = RationalTime;
    fn mul(self, rhs: i64) -> RationalTime {
        &self * rhs
    }
}

impl Div<i64> for &RationalTime {
    type Output = RationalTime;
    fn div(self, rhs: i64) -> RationalTime {
        assert!(rhs != 0, "division by zero");
        mul(self, &RationalTime::new(1, rhs))
    }
}

impl Div<i64> for RationalTime {
    type Output = RationalTime;
    fn div(self, rhs: i64) -> RationalTime {
        &self / rhs
    }
}

impl Neg for &RationalTime {
    type Output = RationalTime;
    fn neg(self) -> RationalTime {
        match &self.0 {
            Repr::Small(n, d) => match n.checked_neg() {
                Some(m) => RationalTime(Repr::Small(m, *d)),
                None => RationalTime::from_big(-self.to_big()),
            },
            Repr::Big(r) => RationalTime::from_big(-(**r).clone()),
        }
    }
}

impl Neg for RationalTime {
    type Output = RationalTime;
    fn neg(self) -> RationalTime {
        -&self
    }
}

impl AddAssign<&RationalTime> for RationalTime {
    fn add_assign(&mut self, rhs: &RationalTime) {
        *self = add(self, rhs);
    }
}

impl SubAssign<&RationalTime> for RationalTime {
    fn sub_assign(&mut self, rhs: &RationalTime) {
        *self = add(self, &-rhs);
    }
}

impl PartialEq<Tick> for RationalTime {
    fn eq(&self, other: &Tick) -> bool {
        self.to_tick() == Some(*other)
    }
}

impl PartialOrd<Tick> for RationalTime {
    fn partial_cmp(&self, other: &Tick) -> Option<Ordering> {
        Some(self.cmp(&RationalTime::from_tick(*other)))
    }
}

impl std::iter::Sum for RationalTime {
    fn sum<I: Iterator<Item = RationalTime>>(iter: I) -> Self {
        iter.fold(RationalTime::zero(), |acc, x| acc + x)
    }
}
