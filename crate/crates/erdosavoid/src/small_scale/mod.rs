//! Constructions for decreasing sequences: the sublacunary avoider, the
//! lacunary bi-Lipschitz embedder, finite Steinhaus embeddings and probes.

mod sequence;

pub use sequence::{DifferenceMetadata, Monotonicity, SequenceKind, SequenceSpec, TermOracle};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational_intervals::enclosure::ln_enclosure;
use crate::rational_intervals::{
    box_image_enclosure, fmt_rat, int, parse_rat, ratstr, Gap, Interval, IntervalSet, ParamBox, Rational,
};
use sequence::ceil_div;

/// Scan limit for index searches over infinite sequences.
pub const INDEX_WINDOW: usize = 1 << 21;

/// Bits used when a term is only known through an enclosure.
const TERM_BITS: u32 = 96;

fn check_down(seq: &SequenceSpec) -> Result<()> {
    if !seq.is_down() {
        return Err(Error::InvalidParameter(format!("{} is not decreasing", seq.describe())));
    }
    Ok(())
}

fn window_end(seq: &SequenceSpec) -> usize {
    seq.len().unwrap_or(INDEX_WINDOW)
}

/// Indices `n_1 < ... < n_K` picked by
/// `n_{k+1} = min{p > n_k : a_{n_k} - a_p >= t_{n_k}}`.
pub fn regularize_subsequence(seq: &SequenceSpec, count: usize) -> Result<Vec<usize>> {
    check_down(seq)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let end = window_end(seq);
    let mut out = vec![1usize];
    while out.len() < count {
        let n = *out.last().unwrap();
        let t = seq.tail_sup_difference(n)?;
        let a = seq.term(n)?;
        let mut p = n + 1;
        loop {
            if p > end {
                return Err(Error::NeedsLongerWindow {
                    k: out.len() + 1,
                    detail: format!("no index after {n} within {end} terms"),
                });
            }
            if &a - seq.term(p)? >= t {
                break;
            }
            p += 1;
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoiderLevel {
    pub k: usize,
    pub n_k: usize,
    #[serde(with = "ratstr")]
    pub delta: Rational,
    pub ell: u64,
    /// `ell_k delta_k`, audited against `2 * 4^-k`.
    #[serde(with = "ratstr")]
    pub ell_delta: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoiderLog {
    pub sequence: String,
    pub levels: Vec<AvoiderLevel>,
    #[serde(with = "ratstr")]
    pub measure: Rational,
    /// `1 - sum_{k<=K} 2 * 4^-k`
    #[serde(with = "ratstr")]
    pub measure_bound: Rational,
}

fn four_pow(k: usize) -> Rational {
    Rational::from_integer(num_bigint::BigInt::from(4u32).pow(k as u32))
}

/// The pieces `[j/ell + delta/2, (j+1)/ell - delta/2]`, reduced exactly.
fn hole_grid(ell: u64, delta: &Rational) -> impl Fn(u64) -> Interval {
    // numerators over the common denominator 2 q ell, delta = p / q
    let (p, q) = (delta.numer(), delta.denom());
    let den = BigInt::from(2) * q * BigInt::from(ell);
    let step = BigInt::from(2) * q;
    let shift = p * BigInt::from(ell);
    let small = match (den.to_u128(), step.to_u128(), shift.to_u128()) {
        (Some(d), Some(st), Some(sh)) if st.checked_mul(ell as u128 + 1).is_some() => Some((d, st, sh)),
        _ => None,
    };
    move |j: u64| match small {
        Some((d, st, sh)) => {
            let reduced = |n: u128| {
                let g = n.gcd(&d);
                Rational::new_raw(BigInt::from(n / g), BigInt::from(d / g))
            };
            let j = j as u128;
            Interval::spanning(reduced(st * j + sh), reduced(st * (j + 1) - sh))
        }
        None => {
            let j = BigInt::from(j);
            Interval::spanning(
                Rational::new(&step * &j + &shift, den.clone()),
                Rational::new(&step * (j + 1) - &shift, den.clone()),
            )
        }
    }
}

/// `e` minus the open holes of width `delta` centred at `j/ell`,
/// `0 <= j <= ell`; `e` must lie in `[0, 1]`.
fn punch(e: &IntervalSet, ell: u64, delta: &Rational) -> Result<IntervalSet> {
    if delta * Rational::from_integer(ell.into()) >= int(1) {
        return Err(Error::ConstructionAudit("holes cover the unit interval".into()));
    }
    let piece = hole_grid(ell, delta);
    let ellq = Rational::from_integer(ell.into());
    let mut out = Vec::new();
    for c in e.intervals() {
        let j0 = (c.lo() * &ellq).floor().to_integer().to_u64().unwrap_or(0);
        let j1 = (c.hi() * &ellq).floor().to_integer().to_u64().unwrap_or(0).min(ell - 1);
        for j in j0..=j1 {
            let pc = piece(j);
            // only the end pieces can stick out of c
            if j == j0 || j == j1 {
                out.extend(pc.intersection(c));
            } else {
                out.push(pc);
            }
        }
    }
    Ok(IntervalSet::from_canonical_unchecked(out))
}

/// `E = E_1 ∩ ... ∩ E_K`, each `E_k` the unit interval punched at the
/// multiples of `1/ell_k`.
pub fn build_sublacunary_avoider(seq: &SequenceSpec, levels: usize) -> Result<(IntervalSet, AvoiderLog)> {
    check_down(seq)?;
    let end = window_end(seq);
    let mut e = IntervalSet::from_interval(Interval::new(int(0), int(1))?);
    let mut log = Vec::with_capacity(levels);
    let mut bound = int(1);
    let mut n = 0usize;
    for k in 1..=levels {
        let target = Rational::new(1.into(), (k * k).into()) / four_pow(k);
        n += 1;
        let (a, a1) = loop {
            if n + 1 > end {
                return Err(Error::NeedsLongerWindow {
                    k,
                    detail: format!("no index up to {end} with relative gap <= {}", fmt_rat(&target)),
                });
            }
            let (a, a1) = (seq.term(n)?, seq.term(n + 1)?);
            if (&a - &a1) / &a <= target {
                break (a, a1);
            }
            n += 1;
        };
        let kq = int(k as i64);
        let delta = &kq * (&a - &a1);
        let ell_big = ceil_div(&kq, &a);
        let ell: u64 = ell_big.try_into().map_err(|_| Error::Resource(format!("ell_{k} too large")))?;
        let ell_delta = Rational::from_integer(ell.into()) * &delta;
        let cap = int(2) / four_pow(k);
        if ell_delta > cap || ell_delta >= int(1) {
            return Err(Error::ConstructionAudit(format!(
                "level {k}: ell*delta = {} exceeds {}",
                fmt_rat(&ell_delta),
                fmt_rat(&cap)
            )));
        }
        bound -= cap;
        e = punch(&e, ell, &delta)?;
        log.push(AvoiderLevel {
            k,
            n_k: n,
            delta,
            ell,
            ell_delta,
        });
    }
    let measure = e.measure();
    if measure < bound {
        return Err(Error::ConstructionAudit(format!(
            "measure {} below {}",
            fmt_rat(&measure),
            fmt_rat(&bound)
        )));
    }
    Ok((
        e,
        AvoiderLog {
            sequence: seq.describe(),
            levels: log,
            measure,
            measure_bound: bound,
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Certified,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeCertificate {
    #[serde(rename = "box")]
    pub param_box: ParamBox,
    pub status: Status,
    pub witness_n: Option<usize>,
    pub witness_gap: Option<Gap>,
}

impl EscapeCertificate {
    fn inconclusive(b: &ParamBox) -> Self {
        EscapeCertificate {
            param_box: b.clone(),
            status: Status::Inconclusive,
            witness_n: None,
            witness_gap: None,
        }
    }
}

/// First `n <= max_n` whose image `lambda a_n + t` over the whole box sits in
/// one complement component of `e`.
fn escape_for_box(e: &IntervalSet, seq: &SequenceSpec, b: &ParamBox, max_n: usize) -> EscapeCertificate {
    let end = max_n.min(window_end(seq));
    for n in 1..=end {
        let Ok(a) = seq.term_enclosure(n, TERM_BITS) else {
            break;
        };
        let img = box_image_enclosure(&a, b);
        if let Some(gap) = e.complement_component(&img) {
            return EscapeCertificate {
                param_box: b.clone(),
                status: Status::Certified,
                witness_n: Some(n),
                witness_gap: Some(gap),
            };
        }
    }
    EscapeCertificate::inconclusive(b)
}

pub fn certify_no_affine_copy(
    e: &IntervalSet,
    seq: &SequenceSpec,
    boxes: &[ParamBox],
    max_n: usize,
) -> Vec<EscapeCertificate> {
    boxes.par_iter().map(|b| escape_for_box(e, seq, b, max_n)).collect()
}

/// Monotone piecewise-linear map through `breakpoints`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewiseLinearMap {
    points: Vec<(Rational, Rational)>,
    slope_bounds: Interval,
}

#[derive(Serialize, Deserialize)]
struct PlmRepr {
    breakpoints: Vec<(String, String)>,
    slope_bounds: Interval,
}

impl Serialize for PiecewiseLinearMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PlmRepr {
            breakpoints: self.points.iter().map(|(x, y)| (fmt_rat(x), fmt_rat(y))).collect(),
            slope_bounds: self.slope_bounds.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PiecewiseLinearMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = PlmRepr::deserialize(d)?;
        let points = r
            .breakpoints
            .iter()
            .map(|(x, y)| Ok((parse_rat(x)?, parse_rat(y)?)))
            .collect::<Result<Vec<_>>>()
            .map_err(D::Error::custom)?;
        PiecewiseLinearMap::new(points, r.slope_bounds).map_err(D::Error::custom)
    }
}

impl PiecewiseLinearMap {
    pub fn new(points: Vec<(Rational, Rational)>, slope_bounds: Interval) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("need at least two breakpoints".into()));
        }
        if !slope_bounds.lo().is_positive() {
            return Err(Error::InvalidParameter("lower slope bound must be positive".into()));
        }
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 || w[0].1 >= w[1].1 {
                return Err(Error::InvalidParameter("breakpoints must increase strictly".into()));
            }
            let s = (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0);
            if !slope_bounds.contains(&s) {
                return Err(Error::InvalidParameter(format!(
                    "slope {} outside {slope_bounds}",
                    fmt_rat(&s)
                )));
            }
        }
        Ok(PiecewiseLinearMap {
            points,
            slope_bounds,
        })
    }

    pub fn points(&self) -> &[(Rational, Rational)] {
        &self.points
    }

    pub fn slope_bounds(&self) -> &Interval {
        &self.slope_bounds
    }

    pub fn slopes(&self) -> Vec<Rational> {
        self.points
            .windows(2)
            .map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0))
            .collect()
    }

    /// Value at `x` inside the breakpoint range.
    pub fn eval(&self, x: &Rational) -> Option<Rational> {
        let i = self.points.partition_point(|(px, _)| px < x);
        let p = self.points.get(i)?;
        if &p.0 == x {
            return Some(p.1.clone());
        }
        let q = self.points.get(i.checked_sub(1)?)?;
        Some(&q.1 + (x - &q.0) * (&p.1 - &q.1) / (&p.0 - &q.0))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LacunaryEmbedding {
    pub map: PiecewiseLinearMap,
    #[serde(with = "ratstr")]
    pub delta: Rational,
    #[serde(with = "ratstr")]
    pub eta: Rational,
    /// First index from which `[eta a_n, a_n]` meets E up to `max_n`.
    pub n0: usize,
    /// `[(eta - delta)/(1 - delta), (1 - eta delta)/(1 - delta)]`, valid for
    /// segments at or below `a_{n0}`.
    pub formula_bounds: Interval,
    /// Actual extreme slopes over all segments.
    pub observed: Interval,
    /// Indices where the tightened eta had to fall back to the base eta.
    pub fallbacks: Vec<usize>,
}

/// Largest point of `e` in `[lo, hi]`.
fn largest_in(e: &IntervalSet, lo: &Rational, hi: &Rational) -> Option<Rational> {
    let comps = e.intervals();
    let i = comps.partition_point(|c| c.lo() <= hi);
    let c = comps.get(i.checked_sub(1)?)?;
    (c.hi() >= lo).then(|| c.hi().min(hi).clone())
}

/// A point of `e` strictly above `x`: the next component's left end, or the
/// right end of the component holding `x`.
fn next_point_above(e: &IntervalSet, x: &Rational) -> Option<Rational> {
    let comps = e.intervals();
    let i = comps.partition_point(|c| c.hi() <= x);
    let c = comps.get(i)?;
    Some(if c.lo() > x { c.lo().clone() } else { c.hi().clone() })
}

/// Increasing map with `f(a_n) = b_n ∈ E ∩ [eta a_n, a_n]`, extended linearly
/// and through the origin. With `unit_derivative` the lower end of the window
/// is pushed to `max(eta, 1 - 1/n)` where E allows it; nothing is claimed
/// about the resulting derivative at 0.
pub fn embed_lacunary(
    seq: &SequenceSpec,
    e: &IntervalSet,
    eta: &Rational,
    max_n: usize,
    unit_derivative: bool,
) -> Result<LacunaryEmbedding> {
    check_down(seq)?;
    if max_n < 2 {
        return Err(Error::InvalidParameter("max_n must be at least 2".into()));
    }
    let a: Vec<Rational> = (1..=max_n).map(|n| seq.term(n)).collect::<Result<_>>()?;
    let delta = a
        .windows(2)
        .map(|w| &w[1] / &w[0])
        .max()
        .expect("two terms");
    if delta >= int(1) {
        return Err(Error::InvalidParameter("ratio bound must be below 1".into()));
    }
    if !(eta > &delta && eta < &int(1)) {
        return Err(Error::InvalidParameter(format!(
            "eta {} must lie in (delta, 1) = ({}, 1)",
            fmt_rat(eta),
            fmt_rat(&delta)
        )));
    }
    let mut b: Vec<Option<Rational>> = Vec::with_capacity(max_n);
    let mut fallbacks = Vec::new();
    for (i, an) in a.iter().enumerate() {
        let n = i + 1;
        let base = largest_in(e, &(eta * an), an);
        let pick = if unit_derivative {
            let tight = eta.clone().max(int(1) - Rational::new(1.into(), n.into()));
            match largest_in(e, &(&tight * an), an) {
                Some(p) => Some(p),
                None => {
                    if base.is_some() {
                        fallbacks.push(n);
                    }
                    base
                }
            }
        } else {
            base
        };
        b.push(pick);
    }
    let n0 = match b.iter().rposition(|x| x.is_none()) {
        None => 1,
        Some(i) if i + 1 == max_n => return Err(Error::DensityPointViolation { n: max_n }),
        Some(i) => i + 2,
    };
    // f(a_n) for n < n0: greedy points of E, increasing upward
    for n in (1..n0).rev() {
        let prev = b[n].clone().expect("filled from n0 upward");
        let an = &a[n - 1];
        let pick = if an > &prev { largest_in(e, &prev, an).filter(|p| p > &prev) } else { None };
        let pick = match pick {
            Some(p) => p,
            None => next_point_above(e, an.max(&prev)).ok_or(Error::DensityPointViolation { n })?,
        };
        b[n - 1] = Some(pick);
    }
    let mut points: Vec<(Rational, Rational)> = vec![(Rational::zero(), Rational::zero())];
    for i in (0..max_n).rev() {
        points.push((a[i].clone(), b[i].clone().unwrap()));
    }
    let one = int(1);
    let formula_bounds = Interval::new(
        (eta - &delta) / (&one - &delta),
        (&one - eta * &delta) / (&one - &delta),
    )?;
    let slopes: Vec<Rational> = points
        .windows(2)
        .map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0))
        .collect();
    let observed = Interval::new(
        slopes.iter().min().unwrap().clone(),
        slopes.iter().max().unwrap().clone(),
    )?;
    let map = PiecewiseLinearMap::new(points, formula_bounds.hull(&observed))?;
    Ok(LacunaryEmbedding {
        map,
        delta,
        eta: eta.clone(),
        n0,
        formula_bounds,
        observed,
        fallbacks,
    })
}

/// `delta in (0, T]` with `delta A ⊂ E`, scanning `T i / grid` downward and
/// then refining the grid a few times.
pub fn steinhaus_embed(a: &[Rational], e: &IntervalSet, t_max: &Rational, grid: usize) -> Result<Rational> {
    if a.is_empty() || grid == 0 || !t_max.is_positive() {
        return Err(Error::InvalidParameter("need nonempty A, positive T and grid".into()));
    }
    let top = a.iter().max().unwrap().clone();
    if !a.iter().all(|x| x.is_positive()) {
        return Err(Error::InvalidParameter("A must be positive".into()));
    }
    let normalized: Vec<Rational> = a.iter().map(|x| x / &top).collect();
    let fits = |d: &Rational| normalized.iter().all(|x| e.contains(&(d * x)));
    const REFINEMENTS: u32 = 4;
    for r in 0..=REFINEMENTS {
        let g = grid << r;
        for i in (1..=g).rev() {
            // points of coarser grids were already tried
            if r > 0 && i % 2 == 0 {
                continue;
            }
            let d = t_max * Rational::new(i.into(), g.into());
            if fits(&d) {
                return Ok(d / &top);
            }
        }
    }
    Err(Error::NotFound)
}

/// `delta_n = min_{i<n} (a_i - a_{i+1}) / a_1` and an enclosure of
/// `-ln(delta_n) / n`.
pub fn kolountzakis_delta(seq: &SequenceSpec, n: usize) -> Result<(Rational, Interval)> {
    check_down(seq)?;
    if n < 2 {
        return Err(Error::InvalidParameter("n must be at least 2".into()));
    }
    let terms: Vec<Rational> = (1..=n).map(|i| seq.term(i)).collect::<Result<_>>()?;
    let d = terms.windows(2).map(|w| &w[0] - &w[1]).min().unwrap() / &terms[0];
    let score = ln_enclosure(&d, 64)?.scale(&Rational::new((-1).into(), n.into()));
    Ok((d, score))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErdosProbeEntry {
    pub t: Interval,
    pub status: Status,
    pub witness_n: Option<usize>,
    pub witness_gap: Option<Gap>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErdosProbeReport {
    #[serde(with = "ratstr")]
    pub x: Rational,
    pub entries: Vec<ErdosProbeEntry>,
    /// Total length of certified t-boxes over total length probed.
    #[serde(with = "ratstr")]
    pub certified_fraction: Rational,
}

/// Looks for `n` with `x + t a_n` outside `K` for every `t` in each box.
pub fn erdos_point_probe(
    k: &IntervalSet,
    seq: &SequenceSpec,
    x: &Rational,
    t_boxes: &[Interval],
    max_n: usize,
) -> Result<ErdosProbeReport> {
    if !k.contains(x) {
        return Err(Error::RejectedInput(format!("{} is not in K", fmt_rat(x))));
    }
    if let Some(b) = t_boxes.iter().find(|b| b.contains(&Rational::zero())) {
        return Err(Error::RejectedInput(format!("t-box {b} contains 0")));
    }
    let end = max_n.min(window_end(seq));
    let entries: Vec<ErdosProbeEntry> = t_boxes
        .par_iter()
        .map(|tb| {
            for n in 1..=end {
                let Ok(an) = seq.term_enclosure(n, TERM_BITS) else {
                    break;
                };
                let img = tb.mul(&an).add(&Interval::point(x.clone()));
                if let Some(gap) = k.complement_component(&img) {
                    return ErdosProbeEntry {
                        t: tb.clone(),
                        status: Status::Certified,
                        witness_n: Some(n),
                        witness_gap: Some(gap),
                    };
                }
            }
            ErdosProbeEntry {
                t: tb.clone(),
                status: Status::Inconclusive,
                witness_n: None,
                witness_gap: None,
            }
        })
        .collect();
    let total: Rational = t_boxes.iter().map(|b| b.len()).sum();
    let good: Rational = entries
        .iter()
        .filter(|e| e.status == Status::Certified)
        .map(|e| e.t.len())
        .sum();
    let certified_fraction = if total.is_zero() {
        let c = entries.iter().filter(|e| e.status == Status::Certified).count();
        Rational::new(c.into(), entries.len().max(1).into())
    } else {
        good / total
    };
    Ok(ErdosProbeReport {
        x: x.clone(),
        entries,
        certified_fraction,
    })
}

/// Grid of `a x b` boxes over a rectangle, ids in row-major order.
pub fn grid_boxes(lambda: &Interval, t: &Interval, a: usize, b: usize) -> Result<Vec<ParamBox>> {
    let mut out = Vec::with_capacity(a * b);
    let (ls, ts) = (
        lambda.len() / Rational::from_integer(a.into()),
        t.len() / Rational::from_integer(b.into()),
    );
    for i in 0..a {
        let l0 = lambda.lo() + &ls * Rational::from_integer(i.into());
        for j in 0..b {
            let t0 = t.lo() + &ts * Rational::from_integer(j.into());
            out.push(ParamBox::new(
                Interval::new(l0.clone(), &l0 + &ls)?,
                Interval::new(t0.clone(), &t0 + &ts)?,
            )?);
        }
    }
    Ok(out)
}
