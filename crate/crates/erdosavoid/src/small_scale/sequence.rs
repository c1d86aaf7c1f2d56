use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::rational_intervals::enclosure::root_enclosure;
use crate::rational_intervals::{fmt_rat, int, parse_rat, Interval, Rational};

/// Term oracle for custom sequences, 1-based.
pub type TermOracle = Arc<dyn Fn(usize) -> Rational + Send + Sync>;

#[derive(Clone)]
pub enum SequenceKind {
    ExplicitList(Vec<Rational>),
    /// `a_n = 1/n`
    Reciprocal,
    /// `a_n = r^n`, `0 < r < 1`
    GeometricDown(Rational),
    /// `a_n = n^(-alpha)`
    ReciprocalPower(Rational),
    /// `a_n = n`
    Linear,
    /// `a_n = b^n`, `b > 1`
    GeometricUp(Rational),
    Custom(TermOracle),
}

impl fmt::Debug for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", describe_kind(self))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Up,
    Down,
}

/// Differences `a_p - a_{p+1}` are non-increasing for `p >= from_index`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DifferenceMetadata {
    pub from_index: usize,
}

#[derive(Clone, Debug)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    pub monotonicity: Monotonicity,
    pub difference_metadata: Option<DifferenceMetadata>,
}

fn describe_kind(k: &SequenceKind) -> String {
    match k {
        SequenceKind::ExplicitList(v) => {
            let parts: Vec<String> = v.iter().map(fmt_rat).collect();
            format!("list:{}", parts.join(","))
        }
        SequenceKind::Reciprocal => "reciprocal".into(),
        SequenceKind::GeometricDown(r) => format!("geometric-down:{}", fmt_rat(r)),
        SequenceKind::ReciprocalPower(a) => format!("reciprocal-power:{}", fmt_rat(a)),
        SequenceKind::Linear => "linear".into(),
        SequenceKind::GeometricUp(b) => format!("geometric-up:{}", fmt_rat(b)),
        SequenceKind::Custom(_) => "custom".into(),
    }
}

impl SequenceSpec {
    pub fn reciprocal() -> Self {
        SequenceSpec {
            kind: SequenceKind::Reciprocal,
            monotonicity: Monotonicity::Down,
            difference_metadata: Some(DifferenceMetadata { from_index: 1 }),
        }
    }

    pub fn geometric_down(r: Rational) -> Result<Self> {
        if !(r.is_positive() && r < int(1)) {
            return Err(Error::InvalidParameter(format!("ratio {} not in (0,1)", fmt_rat(&r))));
        }
        Ok(SequenceSpec {
            kind: SequenceKind::GeometricDown(r),
            monotonicity: Monotonicity::Down,
            difference_metadata: Some(DifferenceMetadata { from_index: 1 }),
        })
    }

    /// `n^(-alpha)` is convex in n, so its differences decrease from the start.
    pub fn reciprocal_power(alpha: Rational) -> Result<Self> {
        if !alpha.is_positive() {
            return Err(Error::InvalidParameter("alpha must be positive".into()));
        }
        Ok(SequenceSpec {
            kind: SequenceKind::ReciprocalPower(alpha),
            monotonicity: Monotonicity::Down,
            difference_metadata: Some(DifferenceMetadata { from_index: 1 }),
        })
    }

    pub fn linear() -> Self {
        SequenceSpec {
            kind: SequenceKind::Linear,
            monotonicity: Monotonicity::Up,
            difference_metadata: None,
        }
    }

    pub fn geometric_up(b: Rational) -> Result<Self> {
        if b <= int(1) {
            return Err(Error::InvalidParameter(format!("base {} must exceed 1", fmt_rat(&b))));
        }
        Ok(SequenceSpec {
            kind: SequenceKind::GeometricUp(b),
            monotonicity: Monotonicity::Up,
            difference_metadata: None,
        })
    }

    /// Finite list; direction is read off the terms, which must be strictly
    /// monotone. Down lists must be positive.
    pub fn explicit(terms: Vec<Rational>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("empty sequence".into()));
        }
        let down = terms.windows(2).all(|w| w[0] > w[1]);
        let up = terms.windows(2).all(|w| w[0] < w[1]);
        let monotonicity = match (down, up) {
            (true, false) => Monotonicity::Down,
            (false, true) => Monotonicity::Up,
            // one term: call it decreasing
            (true, true) => Monotonicity::Down,
            _ => return Err(Error::InvalidParameter("terms are not strictly monotone".into())),
        };
        if monotonicity == Monotonicity::Down && !terms.last().unwrap().is_positive() {
            return Err(Error::InvalidParameter("decreasing terms must stay positive".into()));
        }
        Ok(SequenceSpec {
            kind: SequenceKind::ExplicitList(terms),
            monotonicity,
            difference_metadata: None,
        })
    }

    pub fn custom(
        oracle: TermOracle,
        monotonicity: Monotonicity,
        difference_metadata: Option<DifferenceMetadata>,
    ) -> Self {
        SequenceSpec {
            kind: SequenceKind::Custom(oracle),
            monotonicity,
            difference_metadata,
        }
    }

    pub fn describe(&self) -> String {
        describe_kind(&self.kind)
    }

    pub fn is_down(&self) -> bool {
        self.monotonicity == Monotonicity::Down
    }

    /// Number of terms for finite lists.
    pub fn len(&self) -> Option<usize> {
        match &self.kind {
            SequenceKind::ExplicitList(v) => Some(v.len()),
            _ => None,
        }
    }

    /// True when every term is an exact rational.
    pub fn is_exact(&self) -> bool {
        match &self.kind {
            SequenceKind::ReciprocalPower(a) => a.is_integer(),
            _ => true,
        }
    }

    /// Exact term `a_n`, 1-based.
    pub fn term(&self, n: usize) -> Result<Rational> {
        if n == 0 {
            return Err(Error::InvalidParameter("sequence indices start at 1".into()));
        }
        let e = n as i32;
        Ok(match &self.kind {
            SequenceKind::ExplicitList(v) => v.get(n - 1).cloned().ok_or_else(|| {
                Error::NeedsLongerWindow {
                    k: n,
                    detail: format!("explicit list has {} terms", v.len()),
                }
            })?,
            SequenceKind::Reciprocal => Rational::new(1.into(), n.into()),
            SequenceKind::GeometricDown(r) => r.pow(e),
            SequenceKind::ReciprocalPower(a) => {
                if !a.is_integer() {
                    return Err(Error::Precision(format!(
                        "n^-{} is irrational; use term_enclosure",
                        fmt_rat(a)
                    )));
                }
                let p: u32 = a.to_integer().try_into().map_err(|_| {
                    Error::InvalidParameter("exponent too large".into())
                })?;
                Rational::new(1.into(), num_bigint::BigInt::from(n).pow(p))
            }
            SequenceKind::Linear => int(n as i64),
            SequenceKind::GeometricUp(b) => b.pow(e),
            SequenceKind::Custom(f) => f(n),
        })
    }

    /// Enclosure of `a_n`; a point interval whenever the term is exact.
    pub fn term_enclosure(&self, n: usize, bits: u32) -> Result<Interval> {
        match &self.kind {
            SequenceKind::ReciprocalPower(a) if !a.is_integer() => {
                let (p, q) = (a.numer(), a.denom());
                let p: u32 = p.try_into().map_err(|_| Error::InvalidParameter("exponent too large".into()))?;
                let q: u32 = q.try_into().map_err(|_| Error::InvalidParameter("exponent too large".into()))?;
                let x = Rational::new(1.into(), num_bigint::BigInt::from(n).pow(p));
                root_enclosure(&x, q, bits)
            }
            _ => Ok(Interval::point(self.term(n)?)),
        }
    }

    /// `t_n = sup_{p >= n} (a_p - a_{p+1})`, exact.
    pub fn tail_sup_difference(&self, n: usize) -> Result<Rational> {
        if let Some(len) = self.len() {
            if n + 1 > len {
                return Err(Error::NeedsLongerWindow {
                    k: n,
                    detail: "no difference past the end of the list".into(),
                });
            }
            let mut best = self.term(n)? - self.term(n + 1)?;
            for p in n + 1..len {
                best = best.max(self.term(p)? - self.term(p + 1)?);
            }
            return Ok(best);
        }
        let meta = self.difference_metadata.ok_or_else(|| {
            Error::CannotBoundTail(format!("{} has no difference metadata", self.describe()))
        })?;
        if !self.is_exact() {
            return Err(Error::CannotBoundTail("terms are only known as enclosures".into()));
        }
        let start = meta.from_index.max(n);
        let mut best = self.term(start)? - self.term(start + 1)?;
        for p in n..start {
            best = best.max(self.term(p)? - self.term(p + 1)?);
        }
        Ok(best)
    }
}

/// `reciprocal`, `linear`, `geometric-down:r`, `geometric-up:b`,
/// `reciprocal-power:alpha`, `list:a1,a2,...`.
impl FromStr for SequenceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (s.trim(), None),
        };
        let need = |arg: Option<&str>| {
            arg.ok_or_else(|| Error::InvalidParameter(format!("sequence {name} needs a parameter")))
                .and_then(parse_rat)
        };
        match name {
            "reciprocal" => Ok(SequenceSpec::reciprocal()),
            "linear" => Ok(SequenceSpec::linear()),
            "geometric-down" => SequenceSpec::geometric_down(need(arg)?),
            "geometric-up" => SequenceSpec::geometric_up(need(arg)?),
            "reciprocal-power" => SequenceSpec::reciprocal_power(need(arg)?),
            "list" => {
                let terms = arg
                    .unwrap_or("")
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| parse_rat(t.trim()))
                    .collect::<Result<Vec<_>>>()?;
                SequenceSpec::explicit(terms)
            }
            _ => Err(Error::InvalidParameter(format!("unknown sequence {s:?}"))),
        }
    }
}

/// `ceil(a / b)` for positive rationals.
pub(crate) fn ceil_div(a: &Rational, b: &Rational) -> num_bigint::BigInt {
    let q = a / b;
    let (d, r) = q.numer().div_rem(q.denom());
    if r.is_zero() { d } else { d + num_bigint::BigInt::one() }
}
