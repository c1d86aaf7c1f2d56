use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational_intervals::{fmt_rat, fract, int, ratstr, ratvec, Interval, Rational};
use crate::small_scale::SequenceSpec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mod1Profile {
    pub n: usize,
    /// Sorted `⟨y_lo a_k⟩`, exact parts when `y` is a point.
    #[serde(with = "ratvec")]
    pub parts: Vec<Rational>,
    /// Largest circular gap between consecutive parts.
    #[serde(with = "ratstr")]
    pub max_gap: Rational,
    /// The true gap lies within `max_gap ± error`; 0 for exact `y`.
    #[serde(with = "ratstr")]
    pub error: Rational,
}

impl Mod1Profile {
    pub fn exact(&self) -> bool {
        self.error.is_zero()
    }

    /// Upper end of the enclosure of the true max gap.
    pub fn max_gap_hi(&self) -> Rational {
        &self.max_gap + &self.error
    }
}

fn circular_max_gap(sorted: &[Rational]) -> Rational {
    let wrap = int(1) - sorted.last().unwrap() + &sorted[0];
    sorted
        .windows(2)
        .map(|w| &w[1] - &w[0])
        .fold(wrap, |a, b| a.max(b))
}

/// Sorted lower parts, max gap and the drift bound `2 max_k |y| a_k`.
fn profile(values: impl Iterator<Item = (Rational, Rational)>) -> Result<(Vec<Rational>, Rational, Rational)> {
    let mut parts = Vec::new();
    let mut width = Rational::zero();
    for (lo, w) in values {
        parts.push(fract(&lo));
        width = width.max(w);
    }
    parts.sort();
    let gap = circular_max_gap(&parts);
    let error = int(2) * width;
    if !error.is_zero() && &error * int(1000) >= gap {
        return Err(Error::Precision(format!(
            "enclosure drift {} too large against gap {}; tighten the enclosure of y",
            fmt_rat(&error),
            fmt_rat(&gap)
        )));
    }
    Ok((parts, gap, error))
}

/// Circular max gap of `{⟨y a_n⟩ : n <= N}`.
pub fn density_mod1(seq: &SequenceSpec, y: &Interval, n: usize) -> Result<Mod1Profile> {
    if n < 2 {
        return Err(Error::InvalidParameter("N must be at least 2".into()));
    }
    let terms: Vec<Rational> = (1..=n).map(|k| seq.term(k)).collect::<Result<_>>()?;
    let w = y.len();
    let (parts, max_gap, error) = profile(terms.iter().map(|a| (y.lo() * a, &w * a)))?;
    Ok(Mod1Profile {
        n,
        parts,
        max_gap,
        error,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DubickasReport {
    pub n: usize,
    /// Shortest circular interval holding every `⟨y 2^k⟩`, `k <= N`.
    #[serde(with = "ratstr")]
    pub covering_length: Rational,
    #[serde(with = "ratstr")]
    pub error: Rational,
}

/// Whether `y` is admissible for the cited bound is left to the caller.
pub fn dubickas_gap_check(y: &Interval, n: usize) -> Result<DubickasReport> {
    if n < 2 {
        return Err(Error::InvalidParameter("N must be at least 2".into()));
    }
    if y.contains(&Rational::zero()) {
        return Err(Error::InvalidParameter(format!("y-range {y} contains 0")));
    }
    let w = y.len();
    let mut pow = int(1);
    let values = (1..=n).map(|_| {
        pow *= int(2);
        (y.lo() * &pow, &w * &pow)
    });
    let (_, gap, error) = profile(values)?;
    Ok(DubickasReport {
        n,
        covering_length: int(1) - gap,
        error,
    })
}
