//! Exact rationals, closed intervals, and finite unions of closed intervals.
//!
//! Every endpoint is a `BigRational`, so measures and containment checks are
//! exact. Differences of closed sets are returned as the closure of the
//! point-set difference, and touching members merge.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub mod enclosure;

pub type Rational = BigRational;

pub fn rat(n: i64, d: i64) -> Rational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

/// 2^e for any integer exponent.
pub fn pow2(e: i64) -> Rational {
    let p = BigInt::one() << e.unsigned_abs();
    if e >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// Lowest-terms `p/q`; the denominator is always written, even when it is 1.
pub fn fmt_rat(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Accepts `p/q` or a bare integer.
pub fn parse_rat(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::RejectedInput(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(p, q))
        }
        None => {
            let p: BigInt = s.parse().map_err(|_| bad())?;
            Ok(BigRational::from_integer(p))
        }
    }
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Fractional part in [0, 1).
pub fn fract(r: &Rational) -> Rational {
    r - r.floor()
}

pub fn floor_int(r: &Rational) -> BigInt {
    r.floor().to_integer()
}

/// serde adapter: a rational as a lowest-terms string.
pub mod ratstr {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rat(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rat(&s).map_err(D::Error::custom)
    }
}

/// serde adapter for `Option<Rational>` (null when absent).
pub mod optratstr {
    use super::*;

    pub fn serialize<S: Serializer>(
        r: &Option<Rational>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match r {
            Some(r) => s.serialize_some(&fmt_rat(r)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<Rational>, D::Error> {
        let s = Option::<String>::deserialize(d)?;
        s.map(|s| parse_rat(&s).map_err(D::Error::custom)).transpose()
    }
}

/// serde adapter for `Vec<Rational>` as a list of strings.
pub mod ratvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(fmt_rat))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Rational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse_rat(s).map_err(D::Error::custom))
            .collect()
    }
}

// ============================================================================
// Interval
// ============================================================================

/// Closed interval `[lo, hi]`, possibly a single point.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(Error::RejectedInput(format!(
                "interval with lo > hi: [{}, {}]",
                fmt_rat(&lo),
                fmt_rat(&hi)
            )));
        }
        Ok(Interval { lo, hi })
    }

    /// Builds the interval spanned by two endpoints in either order.
    pub fn spanning(a: Rational, b: Rational) -> Self {
        if a <= b {
            Interval { lo: a, hi: b }
        } else {
            Interval { lo: b, hi: a }
        }
    }

    pub fn point(x: Rational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn len(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn mid(&self) -> Rational {
        (&self.lo + &self.hi) / int(2)
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = (&self.lo).max(&other.lo).clone();
        let hi = (&self.hi).min(&other.hi).clone();
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: (&self.lo).min(&other.lo).clone(),
            hi: (&self.hi).max(&other.hi).clone(),
        }
    }

    /// Image under `x -> lambda x + t`; endpoints swap when lambda < 0.
    pub fn affine(&self, lambda: &Rational, t: &Rational) -> Interval {
        Interval::spanning(lambda * &self.lo + t, lambda * &self.hi + t)
    }

    /// Exact product range of two intervals.
    pub fn mul(&self, other: &Interval) -> Interval {
        let c = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = c.iter().min().unwrap().clone();
        let hi = c.iter().max().unwrap().clone();
        Interval { lo, hi }
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: &self.lo + &other.lo,
            hi: &self.hi + &other.hi,
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: -&self.hi,
            hi: -&self.lo,
        }
    }

    pub fn scale(&self, c: &Rational) -> Interval {
        self.affine(c, &Rational::zero())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", fmt_rat(&self.lo), fmt_rat(&self.hi))
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [fmt_rat(&self.lo), fmt_rat(&self.hi)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[String; 2]>::deserialize(d)?;
        let lo = parse_rat(&lo).map_err(D::Error::custom)?;
        let hi = parse_rat(&hi).map_err(D::Error::custom)?;
        Interval::new(lo, hi).map_err(D::Error::custom)
    }
}

/// Open interval, possibly unbounded on either side. Used for complement
/// components and gaps.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Gap {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

/// Serialized as `[lo, hi]` with `null` for an infinite end.
impl Serialize for Gap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.lo.as_ref().map(fmt_rat), self.hi.as_ref().map(fmt_rat)].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Gap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [lo, hi] = <[Option<String>; 2]>::deserialize(d)?;
        let parse = |s: Option<String>| s.map(|s| parse_rat(&s).map_err(D::Error::custom)).transpose();
        let (lo, hi) = (parse(lo)?, parse(hi)?);
        if let (Some(a), Some(b)) = (&lo, &hi) {
            if a >= b {
                return Err(D::Error::custom("empty gap"));
            }
        }
        Ok(Gap { lo, hi })
    }
}

impl Gap {
    pub fn bounded(lo: Rational, hi: Rational) -> Self {
        Gap {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.lo.as_ref().map_or(true, |lo| lo < x) && self.hi.as_ref().map_or(true, |hi| x < hi)
    }

    /// True when the closed interval sits strictly inside this open gap.
    pub fn contains_interval(&self, iv: &Interval) -> bool {
        self.lo.as_ref().map_or(true, |lo| lo < iv.lo()) && self.hi.as_ref().map_or(true, |hi| iv.hi() < hi)
    }

    pub fn len(&self) -> Option<Rational> {
        match (&self.lo, &self.hi) {
            (Some(a), Some(b)) => Some(b - a),
            _ => None,
        }
    }
}

// ============================================================================
// IntervalSet
// ============================================================================

/// Finite union of closed intervals, sorted, with a gap of positive length
/// between consecutive members.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct IntervalSet {
    intervals: Vec<Interval>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersection,
    Difference,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn from_interval(iv: Interval) -> Self {
        IntervalSet {
            intervals: vec![iv],
        }
    }

    /// Canonical form of an arbitrary list: sorts, then merges overlapping
    /// or touching members.
    pub fn normalize(raw: Vec<Interval>) -> Self {
        let mut raw = raw;
        raw.sort_by(|a, b| a.lo.cmp(&b.lo).then_with(|| a.hi.cmp(&b.hi)));
        let mut out: Vec<Interval> = Vec::with_capacity(raw.len());
        for iv in raw {
            match out.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => out.push(iv),
            }
        }
        IntervalSet { intervals: out }
    }

    /// Wraps an already canonical list, rejecting anything out of order.
    pub fn from_canonical(intervals: Vec<Interval>) -> Result<Self> {
        for w in intervals.windows(2) {
            if w[0].hi >= w[1].lo {
                return Err(Error::RejectedInput(format!(
                    "members {} and {} are unsorted, overlapping or touching",
                    w[0], w[1]
                )));
            }
        }
        Ok(IntervalSet { intervals })
    }

    /// Caller guarantees sorted, pairwise separated members.
    pub(crate) fn from_canonical_unchecked(intervals: Vec<Interval>) -> Self {
        IntervalSet { intervals }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn into_intervals(self) -> Vec<Interval> {
        self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn measure(&self) -> Rational {
        // numerators summed per denominator: far fewer gcds on big sets
        let mut by_den: std::collections::HashMap<BigInt, BigInt> = std::collections::HashMap::new();
        for iv in &self.intervals {
            *by_den.entry(iv.hi.denom().clone()).or_default() += iv.hi.numer();
            *by_den.entry(iv.lo.denom().clone()).or_default() -= iv.lo.numer();
        }
        by_den
            .into_iter()
            .fold(Rational::zero(), |acc, (d, n)| acc + Rational::new(n, d))
    }

    pub fn hull(&self) -> Option<Interval> {
        let first = self.intervals.first()?;
        let last = self.intervals.last()?;
        Some(Interval {
            lo: first.lo.clone(),
            hi: last.hi.clone(),
        })
    }

    /// Index of the first member whose right end is >= x.
    fn first_reaching(&self, x: &Rational) -> usize {
        self.intervals.partition_point(|iv| &iv.hi < x)
    }

    pub fn component_of(&self, x: &Rational) -> Option<&Interval> {
        let i = self.first_reaching(x);
        self.intervals.get(i).filter(|iv| iv.contains(x))
    }

    pub fn contains(&self, x: &Rational) -> bool {
        self.component_of(x).is_some()
    }

    /// Whether some member meets the closed interval.
    pub fn meets(&self, iv: &Interval) -> bool {
        let i = self.first_reaching(&iv.lo);
        self.intervals.get(i).is_some_and(|m| m.lo <= iv.hi)
    }

    /// Complement component holding the whole closed interval, if the
    /// interval misses the set entirely.
    pub fn complement_component(&self, iv: &Interval) -> Option<Gap> {
        let i = self.first_reaching(&iv.lo);
        if self.intervals.get(i).is_some_and(|m| m.lo <= iv.hi) {
            return None;
        }
        let lo = i.checked_sub(1).map(|j| self.intervals[j].hi.clone());
        let hi = self.intervals.get(i).map(|m| m.lo.clone());
        Some(Gap { lo, hi })
    }

    /// Bounded gaps between consecutive members, left to right.
    pub fn gaps(&self) -> Vec<Gap> {
        self.intervals
            .windows(2)
            .map(|w| Gap::bounded(w[0].hi.clone(), w[1].lo.clone()))
            .collect()
    }

    /// All complement components, unbounded ones included.
    fn complement_components(&self) -> Vec<Gap> {
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut prev: Option<Rational> = None;
        for iv in &self.intervals {
            out.push(Gap {
                lo: prev.take(),
                hi: Some(iv.lo.clone()),
            });
            prev = Some(iv.hi.clone());
        }
        out.push(Gap { lo: prev, hi: None });
        out
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        let mut all = self.intervals.clone();
        all.extend(other.intervals.iter().cloned());
        IntervalSet::normalize(all)
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let (a, b) = (&self.intervals, &other.intervals);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            if let Some(c) = a[i].intersection(&b[j]) {
                out.push(c);
            }
            if a[i].hi < b[j].hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        // each piece sits in its own pair of separated members
        IntervalSet { intervals: out }
    }

    /// Closure of the point-set difference.
    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let comps = other.complement_components();
        let mut out = Vec::new();
        for iv in &self.intervals {
            if iv.is_point() {
                if !other.contains(&iv.lo) {
                    out.push(iv.clone());
                }
                continue;
            }
            // first component whose right end lies beyond iv.lo
            let start = comps.partition_point(|g| g.hi.as_ref().is_some_and(|h| h <= &iv.lo));
            for g in &comps[start..] {
                if g.lo.as_ref().is_some_and(|l| l >= &iv.hi) {
                    break;
                }
                let lo = match &g.lo {
                    Some(l) if l > &iv.lo => l.clone(),
                    _ => iv.lo.clone(),
                };
                let hi = match &g.hi {
                    Some(h) if h < &iv.hi => h.clone(),
                    _ => iv.hi.clone(),
                };
                if lo < hi {
                    out.push(Interval { lo, hi });
                }
            }
        }
        IntervalSet::normalize(out)
    }

    pub fn set_op(&self, other: &IntervalSet, op: SetOp) -> IntervalSet {
        match op {
            SetOp::Union => self.union(other),
            SetOp::Intersection => self.intersection(other),
            SetOp::Difference => self.difference(other),
        }
    }

    pub fn affine_image(&self, lambda: &Rational, t: &Rational) -> Result<IntervalSet> {
        if lambda.is_zero() {
            return Err(Error::DegenerateMap);
        }
        let mut out: Vec<Interval> = self.intervals.iter().map(|iv| iv.affine(lambda, t)).collect();
        if lambda.is_negative() {
            out.reverse();
        }
        Ok(IntervalSet { intervals: out })
    }

    pub fn translate(&self, t: &Rational) -> IntervalSet {
        IntervalSet {
            intervals: self
                .intervals
                .iter()
                .map(|iv| Interval {
                    lo: &iv.lo + t,
                    hi: &iv.hi + t,
                })
                .collect(),
        }
    }
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            intervals: &'a [Interval],
        }
        Repr {
            intervals: &self.intervals,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Repr {
            intervals: Vec<Interval>,
        }
        let r = Repr::deserialize(d)?;
        IntervalSet::from_canonical(r.intervals).map_err(D::Error::custom)
    }
}

// ============================================================================
// Parameter boxes
// ============================================================================

/// Rational rectangle of affine parameters (lambda, t) with 0 outside the
/// lambda range.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamBox {
    lambda: Interval,
    t: Interval,
}

impl ParamBox {
    pub fn new(lambda: Interval, t: Interval) -> Result<Self> {
        if lambda.contains(&Rational::zero()) {
            return Err(Error::RejectedInput(format!(
                "lambda range {lambda} contains 0"
            )));
        }
        Ok(ParamBox { lambda, t })
    }

    pub fn point(lambda: Rational, t: Rational) -> Result<Self> {
        ParamBox::new(Interval::point(lambda), Interval::point(t))
    }

    pub fn lambda(&self) -> &Interval {
        &self.lambda
    }

    pub fn t(&self) -> &Interval {
        &self.t
    }

    pub fn is_point(&self) -> bool {
        self.lambda.is_point() && self.t.is_point()
    }

    pub fn corners(&self) -> [(Rational, Rational); 4] {
        let (l, t) = (&self.lambda, &self.t);
        [
            (l.lo.clone(), t.lo.clone()),
            (l.lo.clone(), t.hi.clone()),
            (l.hi.clone(), t.lo.clone()),
            (l.hi.clone(), t.hi.clone()),
        ]
    }

    pub fn contains(&self, lambda: &Rational, t: &Rational) -> bool {
        self.lambda.contains(lambda) && self.t.contains(t)
    }
}

/// Exact range of `lambda x + t` over the box.
pub fn box_image(x: &Rational, b: &ParamBox) -> Interval {
    let a = &b.lambda.lo * x;
    let c = &b.lambda.hi * x;
    let (lo, hi) = match a.cmp(&c) {
        Ordering::Greater => (c, a),
        _ => (a, c),
    };
    Interval {
        lo: lo + &b.t.lo,
        hi: hi + &b.t.hi,
    }
}

/// Range of `lambda x + t` when x itself is only known to lie in an interval.
pub fn box_image_enclosure(x: &Interval, b: &ParamBox) -> Interval {
    b.lambda.mul(x).add(&b.t)
}

pub fn normalize(raw: Vec<Interval>) -> IntervalSet {
    IntervalSet::normalize(raw)
}

/// Validating form of [`normalize`] for raw endpoint pairs.
pub fn normalize_pairs(raw: Vec<(Rational, Rational)>) -> Result<IntervalSet> {
    let ivs = raw
        .into_iter()
        .map(|(lo, hi)| Interval::new(lo, hi))
        .collect::<Result<Vec<_>>>()?;
    Ok(IntervalSet::normalize(ivs))
}

pub fn measure(s: &IntervalSet) -> Rational {
    s.measure()
}

pub fn set_ops(a: &IntervalSet, b: &IntervalSet, op: SetOp) -> IntervalSet {
    a.set_op(b, op)
}

pub fn affine_image(s: &IntervalSet, lambda: &Rational, t: &Rational) -> Result<IntervalSet> {
    s.affine_image(lambda, t)
}
