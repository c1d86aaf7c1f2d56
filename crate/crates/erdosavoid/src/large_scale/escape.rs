//! Escape certificates for orbits `x + n y` (n >= 1) against digit-type
//! p-large sets.
//!
//! Three rules, each sound for a whole piece of the parameter box:
//! - direct: the image `[x1 + n y1, x2 + n y2]` sits in one removed run;
//! - small step: `y` lies within `1/(mq)` of some `a/q` but not on it, so
//!   along `n = 1 + qj` the fractional part moves by less than `1/m` each
//!   step and cannot jump over the removed top part `[(m-1)/m, 1)`;
//! - rational line: `y = a/q` exactly; along each residue class the part is
//!   fixed and the cell advances by `a`, so a digit run longer than `a`
//!   catches it.

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::PLargeSet;
use crate::error::{Error, Result};
use crate::rational_intervals::enclosure::ln_interval;
use crate::rational_intervals::{fmt_rat, int, optratstr, ratstr, Interval, Rational};
use crate::small_scale::{SequenceSpec, Status};

/// Longest orbit scanned by the rational-line rule before giving up.
const LINE_SCAN_CAP: u64 = 1 << 24;
/// Depth limit for y-bisection.
const MAX_SPLIT_DEPTH: u32 = 40;
/// Total piece budget per certificate.
const MAX_PIECES: usize = 20_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinePiece {
    #[serde(with = "ratstr")]
    pub x_lo: Rational,
    #[serde(with = "ratstr")]
    pub x_hi: Rational,
    /// Only the degenerate end piece `[x_hi, x_hi]` is closed on the right.
    pub hi_closed: bool,
    pub n: u64,
}

impl LinePiece {
    fn contains(&self, x: &Rational) -> bool {
        &self.x_lo <= x && (x < &self.x_hi || (self.hi_closed && x == &self.x_hi))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EscapeRule {
    Direct {
        n: u64,
        #[serde(with = "optratstr")]
        run_lo: Option<Rational>,
        #[serde(with = "ratstr")]
        run_hi: Rational,
    },
    /// Covers every y of the piece except `a/q` itself.
    SmallStep { a: u64, q: u64 },
    RationalLine { a: u64, q: u64, pieces: Vec<LinePiece> },
    Composite { parts: Vec<LinearPiece> },
    Split { parts: Vec<LinearPiece> },
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearPiece {
    pub x: Interval,
    pub y: Interval,
    /// The lower y end is excluded (used for `y = 0`).
    pub y_lo_open: bool,
    #[serde(flatten)]
    pub rule: EscapeRule,
}

impl LinearPiece {
    fn contains(&self, x: &Rational, y: &Rational) -> bool {
        self.x.contains(x) && self.y.contains(y) && !(self.y_lo_open && y == self.y.lo())
    }

    fn certified(&self) -> bool {
        match &self.rule {
            EscapeRule::Inconclusive => false,
            EscapeRule::Composite { parts } | EscapeRule::Split { parts } => {
                parts.iter().all(|p| p.certified())
            }
            _ => true,
        }
    }

    fn count(&self) -> usize {
        match &self.rule {
            EscapeRule::Composite { parts } | EscapeRule::Split { parts } => {
                1 + parts.iter().map(|p| p.count()).sum::<usize>()
            }
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearCertificate {
    pub x_box: Interval,
    pub y_box: Interval,
    pub status: Status,
    pub nmax: usize,
    pub root: LinearPiece,
}

impl LinearCertificate {
    /// Witness index when the whole box escapes at one `n`.
    pub fn witness_n(&self) -> Option<u64> {
        match &self.root.rule {
            EscapeRule::Direct { n, .. } => Some(*n),
            EscapeRule::RationalLine { pieces, .. } if pieces.len() == 1 => Some(pieces[0].n),
            _ => None,
        }
    }

    /// Cell of the witness run's start, for direct certificates.
    pub fn witness_cell(&self) -> Option<BigInt> {
        match &self.root.rule {
            EscapeRule::Direct { run_lo: Some(a), .. } => Some(a.floor().to_integer()),
            _ => None,
        }
    }

    pub fn pieces(&self) -> usize {
        self.root.count()
    }

    /// Name of the root rule.
    pub fn rule_name(&self) -> &'static str {
        match &self.root.rule {
            EscapeRule::Direct { .. } => "direct",
            EscapeRule::SmallStep { .. } => "small_step",
            EscapeRule::RationalLine { .. } => "rational_line",
            EscapeRule::Composite { .. } => "composite",
            EscapeRule::Split { .. } => "split",
            EscapeRule::Inconclusive => "inconclusive",
        }
    }
}

struct Ctx<'a> {
    e: &'a PLargeSet,
    m: u32,
    nmax: usize,
    pieces: usize,
}

fn member(e: &PLargeSet, z: &Rational) -> Result<bool> {
    e.contains(z)
        .ok_or_else(|| Error::Resource(format!("cell of {} out of range", fmt_rat(z))))
}

fn direct(ctx: &Ctx, x: &Interval, y: &Interval) -> Result<Option<EscapeRule>> {
    let reach = 4 * ctx.m as usize;
    for n in 1..=ctx.nmax as u64 {
        let nq = Rational::from_integer(n.into());
        let lo = x.lo() + &nq * y.lo();
        let hi = x.hi() + &nq * y.hi();
        if let Some((a, b)) = ctx.e.removed_run(&lo, reach) {
            if hi < b {
                return Ok(Some(EscapeRule::Direct {
                    n,
                    run_lo: a,
                    run_hi: b,
                }));
            }
        }
    }
    Ok(None)
}

/// Witness for every x in `[u, v)` on the line `y = a/q`, read at `u`.
fn line_witness(e: &PLargeSet, u: &Rational, y: &Rational) -> Result<u64> {
    for n in 1..=LINE_SCAN_CAP {
        let z = u + Rational::from_integer(n.into()) * y;
        if !member(e, &z)? {
            return Ok(n);
        }
    }
    Err(Error::Resource(format!(
        "no escape for x = {}, y = {} within {LINE_SCAN_CAP} terms",
        fmt_rat(u),
        fmt_rat(y)
    )))
}

/// Rational-line rule over the whole x-range.
pub(crate) fn rational_line(e: &PLargeSet, m: u32, x: &Interval, a: u64, q: u64) -> Result<Vec<LinePiece>> {
    let y = Rational::new(a.into(), q.into());
    let mq = Rational::from_integer(m.into());
    let mut cuts: Vec<Rational> = Vec::new();
    for r in 1..=q {
        let shift = Rational::from_integer(r.into()) * &y;
        // x = i/m - r y strictly inside (x1, x2]
        let first: BigInt = ((x.lo() + &shift) * &mq).floor().to_integer() + 1;
        let last: BigInt = ((x.hi() + &shift) * &mq).floor().to_integer();
        let mut i = first;
        while i <= last {
            cuts.push(Rational::from_integer(i.clone()) / &mq - &shift);
            i += 1;
        }
    }
    cuts.sort();
    cuts.dedup();
    let mut pieces = Vec::with_capacity(cuts.len() + 2);
    let mut u = x.lo().clone();
    for c in cuts.into_iter().chain(std::iter::once(x.hi().clone())) {
        if c > u {
            let n = line_witness(e, &u, &y)?;
            pieces.push(LinePiece {
                x_lo: u,
                x_hi: c.clone(),
                hi_closed: false,
                n,
            });
            u = c;
        }
    }
    let n = line_witness(e, x.hi(), &y)?;
    pieces.push(LinePiece {
        x_lo: x.hi().clone(),
        x_hi: x.hi().clone(),
        hi_closed: true,
        n,
    });
    Ok(pieces)
}

/// `(a, q)` with `q <= 2m` whose `1/(mq)`-neighbourhood holds the y-range.
fn structural_center(m: u32, y: &Interval, y_lo_open: bool) -> Option<(u64, u64)> {
    for q in 1..=2 * m as u64 {
        let qq = Rational::from_integer(q.into());
        let r = Rational::new(1.into(), (m as u64 * q).into());
        let a_lo = (y.lo() * &qq).floor().to_integer().max(BigInt::zero());
        let a_hi = (y.hi() * &qq).ceil().to_integer();
        let mut a = a_lo;
        while a <= a_hi {
            let c = Rational::from_integer(a.clone()) / &qq;
            let inside = &c - &r < *y.lo() || (y_lo_open && &c - &r <= *y.lo());
            if inside && y.hi() < &(&c + &r) {
                return Some((a.to_u64()?, q));
            }
            a += 1;
        }
    }
    None
}

fn certify_piece(ctx: &mut Ctx, x: &Interval, y: &Interval, y_lo_open: bool, depth: u32) -> Result<LinearPiece> {
    ctx.pieces += 1;
    let piece = |rule| LinearPiece {
        x: x.clone(),
        y: y.clone(),
        y_lo_open,
        rule,
    };
    if let Some(rule) = direct(ctx, x, y)? {
        return Ok(piece(rule));
    }
    if let Some((a, q)) = structural_center(ctx.m, y, y_lo_open) {
        let c = Rational::new(a.into(), q.into());
        let excluded = !y.contains(&c) || (y_lo_open && &c == y.lo());
        if excluded {
            return Ok(piece(EscapeRule::SmallStep { a, q }));
        }
        let line = LinearPiece {
            x: x.clone(),
            y: Interval::point(c),
            y_lo_open: false,
            rule: EscapeRule::RationalLine {
                a,
                q,
                pieces: rational_line(ctx.e, ctx.m, x, a, q)?,
            },
        };
        let around = piece(EscapeRule::SmallStep { a, q });
        return Ok(piece(EscapeRule::Composite {
            parts: vec![around, line],
        }));
    }
    if depth >= MAX_SPLIT_DEPTH || ctx.pieces >= MAX_PIECES {
        return Ok(piece(EscapeRule::Inconclusive));
    }
    let mid = y.mid();
    let lower = Interval::new(y.lo().clone(), mid.clone())?;
    let upper = Interval::new(mid, y.hi().clone())?;
    let parts = vec![
        certify_piece(ctx, x, &lower, y_lo_open, depth + 1)?,
        certify_piece(ctx, x, &upper, false, depth + 1)?,
    ];
    Ok(piece(EscapeRule::Split { parts }))
}

/// Certificate that every orbit `x + n y` with `(x, y)` in the box leaves
/// `e`. A lower y end of 0 is read as open. `x` may be any real range;
/// negative orbit points count as outside.
pub fn certify_linear_escape(e: &PLargeSet, x_box: &Interval, y_box: &Interval, nmax: usize) -> Result<LinearCertificate> {
    let m = e
        .part_grid()
        .ok_or_else(|| Error::InvalidParameter("linear escape needs a digit-type set".into()))?;
    if y_box.lo().is_negative() || !y_box.hi().is_positive() {
        return Err(Error::InvalidParameter(format!("y-box {y_box} must lie in (0, ∞)")));
    }
    let y_lo_open = y_box.lo().is_zero();
    let mut ctx = Ctx {
        e,
        m,
        nmax,
        pieces: 0,
    };
    let root = certify_piece(&mut ctx, x_box, y_box, y_lo_open, 0)?;
    let status = if root.certified() {
        Status::Certified
    } else {
        Status::Inconclusive
    };
    Ok(LinearCertificate {
        x_box: x_box.clone(),
        y_box: y_box.clone(),
        status,
        nmax,
        root,
    })
}

/// Retries with doubled `nmax` up to `cap` while the box stays inconclusive.
pub fn certify_linear_escape_adaptive(
    e: &PLargeSet,
    x_box: &Interval,
    y_box: &Interval,
    nmax: usize,
    cap: usize,
) -> Result<LinearCertificate> {
    let mut n = nmax.max(1);
    loop {
        let c = certify_linear_escape(e, x_box, y_box, n)?;
        if c.status == Status::Certified || n >= cap {
            return Ok(c);
        }
        n = (2 * n).min(cap);
    }
}

/// First `n <= max_n` with `x + y a_n` outside `e`.
pub fn orbit_escape(e: &PLargeSet, seq: &SequenceSpec, x: &Rational, y: &Rational, max_n: usize) -> Result<Option<usize>> {
    for n in 1..=max_n {
        let Ok(a) = seq.term(n) else {
            break;
        };
        match e.contains(&(x + y * a)) {
            Some(false) => return Ok(Some(n)),
            Some(true) => {}
            None => break,
        }
    }
    Ok(None)
}

fn check_leaf(e: &PLargeSet, m: u32, p: &LinearPiece, x: &Rational, y: &Rational) -> Result<bool> {
    match &p.rule {
        EscapeRule::Direct { n, run_lo, run_hi } => {
            let z = x + Rational::from_integer((*n).into()) * y;
            let in_run = run_lo.as_ref().map_or(true, |a| a <= &z) && &z < run_hi;
            Ok(in_run && !member(e, &z)?)
        }
        EscapeRule::SmallStep { a, q } => {
            let c = Rational::new((*a).into(), (*q).into());
            let eps = y - &c;
            let qq = Rational::from_integer((*q).into());
            if eps.is_zero() || (&qq * &eps).abs() * Rational::from_integer(m.into()) >= int(1) {
                return Ok(false);
            }
            // the step along n = 1 + qj is a + q eps; this many steps suffice
            // once the orbit is past 0
            let step = (&qq * &eps).abs();
            let start = x + y;
            let to_zero = if start.is_negative() { (-&start / (&qq * y)).ceil().to_integer() } else { BigInt::zero() };
            let bound: BigInt = (int(1) / step).ceil().to_integer() + to_zero + BigInt::from(2);
            let bound = bound.to_u64().ok_or_else(|| Error::Resource("orbit bound too large".into()))?;
            for j in 0..=bound {
                let n = 1 + q * j;
                if !member(e, &(x + Rational::from_integer(n.into()) * y))? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        EscapeRule::RationalLine { a, q, pieces } => {
            if y != &Rational::new((*a).into(), (*q).into()) {
                return Ok(false);
            }
            let Some(lp) = pieces.iter().find(|lp| lp.contains(x)) else {
                return Ok(false);
            };
            Ok(!member(e, &(x + Rational::from_integer(lp.n.into()) * y))?)
        }
        _ => Ok(false),
    }
}

/// Re-checks one sample `(x, y)` of a certified box against the rule that
/// claims it, with exact membership.
pub fn validate_sample(e: &PLargeSet, cert: &LinearCertificate, x: &Rational, y: &Rational) -> Result<bool> {
    let m = e
        .part_grid()
        .ok_or_else(|| Error::InvalidParameter("linear escape needs a digit-type set".into()))?;
    let mut node = &cert.root;
    if !node.contains(x, y) {
        return Ok(false);
    }
    loop {
        match &node.rule {
            EscapeRule::Split { parts } => {
                let Some(next) = parts.iter().find(|p| p.contains(x, y)) else {
                    return Ok(false);
                };
                node = next;
            }
            EscapeRule::Composite { parts } => {
                // the line part owns y = a/q, the structural part the rest
                let line = parts.iter().find(|p| p.y.is_point() && p.y.lo() == y);
                node = match line {
                    Some(l) => l,
                    None => &parts[0],
                };
            }
            _ => return check_leaf(e, m, node, x, y),
        }
    }
}

/// Escape of `y b^-n` from `exp(-F)`: the logs `-ln y + n ln b` must leave
/// `F`, certified on outward log enclosures of the boxes.
pub fn geometric_escape_via_log(
    f: &PLargeSet,
    y_box: &Interval,
    b_box: &Interval,
    nmax: usize,
    bits: u32,
) -> Result<LinearCertificate> {
    if !y_box.lo().is_positive() {
        return Err(Error::InvalidParameter(format!("y-box {y_box} must be positive")));
    }
    if b_box.lo() <= &int(1) {
        return Err(Error::InvalidParameter(format!("b-box {b_box} must exceed 1")));
    }
    let x = ln_interval(y_box, bits)?.neg();
    let s = ln_interval(b_box, bits)?;
    if !s.lo().is_positive() {
        return Err(Error::Precision(format!("ln enclosure of {b_box} reaches 0; raise bits")));
    }
    certify_linear_escape(f, &x, &s, nmax)
}
