//! p-large sets on `[0, ∞)` and the escape machinery for increasing
//! sequences.
//!
//! A cell `k` stores `(E - k) ∩ [0,1]` as closed intervals, but membership is
//! read half-open: `z ∈ E` iff `⟨z⟩ ∈ [lo, hi)` for a component of cell
//! `⌊z⌋`. This is what makes `{⟨x⟩ < p}` and the digit parts
//! `[j/m, (j+1)/m)` exact; measures are unaffected.

mod ell;
mod escape;
mod mod1;

pub use ell::{ell_upper_bound, l1_of_product, EllBound};
pub use escape::{
    certify_linear_escape, certify_linear_escape_adaptive, geometric_escape_via_log, orbit_escape,
    validate_sample, EscapeRule, LinePiece, LinearCertificate, LinearPiece,
};
pub use mod1::{density_mod1, dubickas_gap_check, DubickasReport, Mod1Profile};

use std::borrow::Cow;

use num_bigint::BigInt;
use num_integer::Roots;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational_intervals::{floor_int, fmt_rat, fract, int, ratstr, Interval, IntervalSet, Rational};
use crate::small_scale::SequenceSpec;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// `{⟨x⟩ < p}`
    Fractional {
        #[serde(with = "ratstr")]
        p: Rational,
    },
    /// Digit-repetition avoider with `m` parts per cell.
    Digit { m: u32 },
    /// `D ∩ yD` with `D = {⟨x⟩ < q}`; `y` may be an enclosure, in which
    /// case cells hold the part certain for every y in it.
    Quotient {
        y: Interval,
        #[serde(with = "ratstr")]
        q: Rational,
    },
    /// Interleaved digit tracks, one per dilation.
    CountableDilation { m: u32, tracks: u32 },
    /// No rule beyond the stored window.
    Explicit,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PLargeSet {
    #[serde(with = "ratstr")]
    p: Rational,
    window: usize,
    cells: Vec<IntervalSet>,
    generator: Generator,
}

/// Start of block `r` (1-based) in a schedule over `d` digits.
fn block_start(d: u64, r: u64) -> u64 {
    d * r * (r - 1) / 2
}

/// `b_k` of the digit schedule over digits `0..d`: block `r` lists each
/// digit `r` times in order.
pub fn schedule_digit(d: u32, k: u64) -> u32 {
    let d64 = d as u64;
    // r(r-1)/2 <= k/d
    let mut r = ((1 + (1 + 8 * (k / d64)).sqrt()) / 2).max(1);
    while block_start(d64, r) > k {
        r -= 1;
    }
    while block_start(d64, r + 1) <= k {
        r += 1;
    }
    ((k - block_start(d64, r)) / r) as u32
}

/// Cell with parts `removed` (indices into `[j/m, (j+1)/m)`) taken out.
fn parts_cell(m: u32, removed: &[u32]) -> IntervalSet {
    let mq = Rational::from_integer(m.into());
    let parts = (0..m)
        .filter(|j| !removed.contains(j))
        .map(|j| {
            let lo = Rational::from_integer(j.into()) / &mq;
            Interval::new(lo.clone(), lo + Rational::from_integer(1.into()) / &mq).expect("ordered")
        })
        .collect();
    IntervalSet::normalize(parts)
}

fn dilation_digit(m: u32, tracks: u32, k: u64) -> u32 {
    let (s, i) = (k / tracks as u64, (k % tracks as u64) as u32);
    (schedule_digit(m - 1, s) + i) % (m - 1)
}

/// Half-open pieces `[y2 j, y1 (j+q))` of `yD` meeting `[k, k+1)`, shifted
/// to the cell and cut with `[0, q)`.
fn quotient_cell(y: &Interval, q: &Rational, k: u64) -> IntervalSet {
    let kq = Rational::from_integer(k.into());
    let (y1, y2) = (y.lo(), y.hi());
    let j_lo = floor_int(&(&kq / y2)) - BigInt::from(1);
    let j_hi = floor_int(&((&kq + int(1)) / y1)) + BigInt::from(1);
    let mut pieces = Vec::new();
    if !q.is_positive() {
        return IntervalSet::empty();
    }
    let mut j = j_lo.max(BigInt::zero());
    while j <= j_hi {
        let jq = Rational::from_integer(j.clone());
        let lo = y2 * &jq - &kq;
        let hi = y1 * (&jq + q) - &kq;
        let lo = lo.max(int(0));
        let hi = hi.min(q.clone());
        if lo < hi {
            pieces.push(Interval::new(lo, hi).expect("ordered"));
        }
        j += 1;
    }
    IntervalSet::normalize(pieces)
}

impl PLargeSet {
    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    /// The materialized prefix.
    pub fn cells(&self) -> &[IntervalSet] {
        &self.cells
    }

    /// Explicit set from stored cells; nothing exists past the window.
    pub fn from_cells(p: Rational, cells: Vec<IntervalSet>) -> Result<Self> {
        let unit = Interval::new(int(0), int(1))?;
        if cells.iter().any(|c| c.hull().is_some_and(|h| !unit.contains_interval(&h))) {
            return Err(Error::InvalidParameter("cells must lie in [0,1]".into()));
        }
        Ok(PLargeSet {
            p,
            window: cells.len(),
            cells,
            generator: Generator::Explicit,
        })
    }

    fn generate(&self, k: u64) -> Option<IntervalSet> {
        Some(match &self.generator {
            Generator::Fractional { p } => fractional_cell(p),
            Generator::Digit { m } => parts_cell(*m, &[schedule_digit(m - 1, k), m - 1]),
            Generator::Quotient { y, q } => quotient_cell(y, q, k),
            Generator::CountableDilation { m, tracks } => {
                parts_cell(*m, &[dilation_digit(*m, *tracks, k), m - 1])
            }
            Generator::Explicit => return None,
        })
    }

    /// Cell `k`, generated on demand past the window.
    pub fn cell(&self, k: u64) -> Option<Cow<'_, IntervalSet>> {
        match usize::try_from(k).ok().and_then(|i| self.cells.get(i)) {
            Some(c) => Some(Cow::Borrowed(c)),
            None => self.generate(k).map(Cow::Owned),
        }
    }

    /// Parts per cell when every cell is a union of `[j/m, (j+1)/m)`.
    pub fn part_grid(&self) -> Option<u32> {
        match &self.generator {
            Generator::Digit { m } | Generator::CountableDilation { m, .. } => Some(*m),
            _ => None,
        }
    }

    /// Removed digit of cell `k` besides the top part, for digit-type sets.
    pub fn removed_digit(&self, k: u64) -> Option<u32> {
        match &self.generator {
            Generator::Digit { m } => Some(schedule_digit(m - 1, k)),
            Generator::CountableDilation { m, tracks } => Some(dilation_digit(*m, *tracks, k)),
            _ => None,
        }
    }

    /// Exact membership; `None` when `z` lies past an explicit window.
    pub fn contains(&self, z: &Rational) -> Option<bool> {
        if z.is_negative() {
            return Some(false);
        }
        let k = floor_int(z).to_u64()?;
        let f = fract(z);
        if let Some(m) = self.part_grid() {
            // fast path: the part index decides
            let j = floor_int(&(&f * Rational::from_integer(m.into()))).to_u32()?;
            return Some(j != m - 1 && Some(j) != self.removed_digit(k));
        }
        let cell = self.cell(k)?;
        let comps = cell.intervals();
        let i = comps.partition_point(|c| c.hi() <= &f);
        Some(comps.get(i).is_some_and(|c| c.lo() <= &f))
    }

    /// Whether global part `P` (the part `[P/m, (P+1)/m)`) is removed.
    fn part_removed(&self, m: u32, part: &BigInt) -> Option<bool> {
        if part.is_negative() {
            return Some(true);
        }
        let mb = BigInt::from(m);
        let k = (part / &mb).to_u64()?;
        let j = (part % &mb).to_u32()?;
        Some(j == m - 1 || Some(j) == self.removed_digit(k))
    }

    /// Removed run `[A, B)` of whole parts holding `z`, followed at most
    /// `reach` parts each way (so possibly a sub-run). `A = None` when the run
    /// reaches the negative half-line. Digit-type sets only.
    pub fn removed_run(&self, z: &Rational, reach: usize) -> Option<(Option<Rational>, Rational)> {
        let m = self.part_grid()?;
        let mq = Rational::from_integer(m.into());
        let part = floor_int(&(z * &mq));
        if !self.part_removed(m, &part)? {
            return None;
        }
        let mut lo = part.clone();
        let mut start = None;
        for _ in 0..reach {
            if lo.is_negative() {
                break;
            }
            let prev = &lo - 1;
            if !self.part_removed(m, &prev)? {
                start = Some(Rational::from_integer(lo.clone()) / &mq);
                break;
            }
            lo = prev;
        }
        if !lo.is_negative() && start.is_none() {
            start = Some(Rational::from_integer(lo.clone()) / &mq);
        }
        let mut hi = &part + 1;
        for _ in 0..reach {
            if !self.part_removed(m, &hi)? {
                break;
            }
            hi += 1;
        }
        Some((start, Rational::from_integer(hi) / &mq))
    }
}

fn fractional_cell(p: &Rational) -> IntervalSet {
    IntervalSet::from_interval(Interval::new(int(0), p.clone()).expect("p >= 0"))
}

/// `E_p = {x >= 0 : ⟨x⟩ < p}`.
pub fn fractional_set(p: &Rational, window: usize) -> Result<PLargeSet> {
    if p.is_negative() || p >= &int(1) {
        return Err(Error::InvalidParameter(format!("p = {} not in [0,1)", fmt_rat(p))));
    }
    Ok(PLargeSet {
        p: p.clone(),
        window,
        cells: vec![fractional_cell(p); window],
        generator: Generator::Fractional { p: p.clone() },
    })
}

/// Cell `k` drops part `b_k` and the top part; `p = (m-2)/m`.
pub fn digit_avoider(m: u32, window: usize) -> Result<PLargeSet> {
    if m < 3 {
        return Err(Error::InvalidParameter("m must be at least 3".into()));
    }
    let g = Generator::Digit { m };
    let mut e = PLargeSet {
        p: Rational::new((m - 2).into(), m.into()),
        window,
        cells: Vec::new(),
        generator: g,
    };
    e.cells = (0..window as u64).map(|k| e.generate(k).unwrap()).collect();
    Ok(e)
}

/// Every materialized cell has measure at least `p`.
pub fn is_p_large(e: &PLargeSet, p: &Rational) -> bool {
    e.cells.iter().all(|c| &c.measure() >= p)
}

/// Grid resolution for the removal fraction `p'` in [`quotient_avoider`].
const QUOTIENT_GRID: u32 = 64;

/// `E = D ∩ yD`, `D = {⟨x⟩ < 1 - p'}`, with the largest grid value
/// `p' = (1-p) i / 64` whose cells all pass `m(I \ E) <= 1 - p` exactly.
pub fn quotient_avoider(y: &Interval, p: &Rational, window: usize) -> Result<PLargeSet> {
    if y.lo() <= &int(1) {
        return Err(Error::InvalidParameter(format!("y = {y} must exceed 1")));
    }
    if p.is_negative() || p >= &int(1) {
        return Err(Error::InvalidParameter(format!("p = {} not in [0,1)", fmt_rat(p))));
    }
    let slack = int(1) - p;
    for i in (1..=QUOTIENT_GRID).rev() {
        let p_removed = &slack * Rational::new(i.into(), QUOTIENT_GRID.into());
        let q = int(1) - &p_removed;
        let cells: Vec<IntervalSet> = (0..window as u64).map(|k| quotient_cell(y, &q, k)).collect();
        if cells.iter().all(|c| int(1) - c.measure() <= slack) {
            return Ok(PLargeSet {
                p: p.clone(),
                window,
                cells,
                generator: Generator::Quotient { y: y.clone(), q },
            });
        }
    }
    Err(Error::Infeasible(format!(
        "no removal on the 1/{QUOTIENT_GRID} grid keeps y = {y} cells {}-large",
        fmt_rat(p)
    )))
}

/// Largest removed fraction `1 - q` of `D` for a quotient set.
pub fn quotient_removal(e: &PLargeSet) -> Option<Rational> {
    match &e.generator {
        Generator::Quotient { q, .. } => Some(int(1) - q),
        _ => None,
    }
}

/// x-grid probed by the countable-dilation audit.
const AUDIT_GRID: u32 = 16;
/// Orbit length searched per audited point.
const AUDIT_ORBIT: usize = 1 << 16;

/// p-large set with one interleaved digit track per dilation in `c`; every
/// `(x, y)` with `x` on a 1/16 grid and `y ∈ c` is audited for an orbit
/// point `x + y a_n` outside the set.
pub fn countable_dilation_avoider(
    seq: &SequenceSpec,
    c: &[Rational],
    p: &Rational,
    window: usize,
) -> Result<PLargeSet> {
    if seq.is_down() {
        return Err(Error::InvalidParameter("sequence must increase".into()));
    }
    if c.is_empty() || c.iter().any(|y| !y.is_positive()) {
        return Err(Error::InvalidParameter("dilations must be positive and nonempty".into()));
    }
    if p.is_negative() || p >= &int(1) {
        return Err(Error::InvalidParameter(format!("p = {} not in [0,1)", fmt_rat(p))));
    }
    // smallest m >= 3 with (m-2)/m >= p, i.e. m >= 2/(1-p)
    let need = int(2) / (int(1) - p);
    let m = need.ceil().to_integer().to_u32().unwrap_or(u32::MAX).max(3);
    if m > 1 << 16 {
        return Err(Error::Resource(format!("p = {} needs {m} parts per cell", fmt_rat(p))));
    }
    let tracks = c.len() as u32;
    let mut e = PLargeSet {
        p: Rational::new((m - 2).into(), m.into()),
        window,
        cells: Vec::new(),
        generator: Generator::CountableDilation { m, tracks },
    };
    e.cells = (0..window as u64).map(|k| e.generate(k).unwrap()).collect();
    if !is_p_large(&e, p) {
        return Err(Error::ConstructionAudit(format!("cells below {}", fmt_rat(p))));
    }
    for y in c {
        for i in 0..AUDIT_GRID {
            let x = Rational::new(i.into(), AUDIT_GRID.into());
            if orbit_escape(&e, seq, &x, y, AUDIT_ORBIT)?.is_none() {
                return Err(Error::ConstructionAudit(format!(
                    "x = {}, y = {}: no escape within {AUDIT_ORBIT} terms",
                    fmt_rat(&x),
                    fmt_rat(y)
                )));
            }
        }
    }
    Ok(e)
}
