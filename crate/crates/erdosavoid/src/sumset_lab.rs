//! Sumset side of full-measure universality: `X` fails to be full measure
//! universal iff some null `M` has `(λX + t) ∩ M ≠ ∅` for every `λ ≠ 0, t`,
//! iff `X + λM = ℝ` for every `λ ≠ 0`. The null set used here is
//! `M = ∪ 2^n (K + l)` with `K` the middle-`1/(2N+1)` Cantor set, restricted
//! to a finite window of `(n, l)`.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cantor_trees::{affine_tree, from_middle_ratio, label_of, thickness, to_interval_set, GapTree};
use crate::error::{Error, Result};
use crate::intersection_engine::{check_gap_lemma, GapLemmaReason};
use crate::rational_intervals::{
    fmt_rat, int, optratstr, pow2, ratstr, Interval, IntervalSet, ParamBox, Rational,
};

// ============================================================================
// Family
// ============================================================================

/// Window `n_range × l_range` of the members `2^n (K + l)`. Ranges are
/// inclusive; `lo > hi` is an empty range.
#[derive(Debug)]
pub struct MFamily {
    big_n: i64,
    depth: usize,
    n_range: (i64, i64),
    l_range: (i64, i64),
    base: GapTree,
    members: RwLock<BTreeMap<(i64, i64), Arc<GapTree>>>,
}

impl Clone for MFamily {
    fn clone(&self) -> Self {
        MFamily {
            big_n: self.big_n,
            depth: self.depth,
            n_range: self.n_range,
            l_range: self.l_range,
            base: self.base.clone(),
            members: RwLock::new(self.members.read().expect("member cache").clone()),
        }
    }
}

impl PartialEq for MFamily {
    fn eq(&self, other: &Self) -> bool {
        (self.big_n, self.depth, self.n_range, self.l_range)
            == (other.big_n, other.depth, other.n_range, other.l_range)
    }
}

pub fn build_m_family(big_n: i64, depth: usize, n_range: (i64, i64), l_range: (i64, i64)) -> Result<MFamily> {
    let base = from_middle_ratio(big_n, depth, Interval::new(int(0), int(1))?)?;
    Ok(MFamily {
        big_n,
        depth,
        n_range,
        l_range,
        base,
        members: RwLock::new(BTreeMap::new()),
    })
}

fn range_len(r: (i64, i64)) -> u64 {
    if r.0 > r.1 {
        0
    } else {
        (r.1 - r.0) as u64 + 1
    }
}

impl MFamily {
    pub fn big_n(&self) -> i64 {
        self.big_n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_range(&self) -> (i64, i64) {
        self.n_range
    }

    pub fn l_range(&self) -> (i64, i64) {
        self.l_range
    }

    /// `K` on `[0, 1]`.
    pub fn base(&self) -> &GapTree {
        &self.base
    }

    pub fn is_empty(&self) -> bool {
        range_len(self.n_range) == 0 || range_len(self.l_range) == 0
    }

    pub fn contains_frame(&self, n: i64, l: i64) -> bool {
        (self.n_range.0..=self.n_range.1).contains(&n) && (self.l_range.0..=self.l_range.1).contains(&l)
    }

    pub fn frames(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.n_range.0..=self.n_range.1).flat_map(move |n| (self.l_range.0..=self.l_range.1).map(move |l| (n, l)))
    }

    /// Scale and shift of the member map `y ↦ 2^n (y + l)`.
    pub fn member_map(n: i64, l: i64) -> (Rational, Rational) {
        let s = pow2(n);
        let shift = &s * int(l);
        (s, shift)
    }

    fn check_frame(&self, n: i64, l: i64) -> Result<()> {
        if self.contains_frame(n, l) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "frame (n, l) = ({n}, {l}) lies outside the family window {:?} x {:?}",
                self.n_range, self.l_range
            )))
        }
    }

    /// The member tree, built on first use and cached.
    pub fn member(&self, n: i64, l: i64) -> Result<Arc<GapTree>> {
        self.check_frame(n, l)?;
        if let Some(t) = self.members.read().expect("member cache").get(&(n, l)) {
            return Ok(t.clone());
        }
        let mut cache = self.members.write().expect("member cache");
        if let Some(t) = cache.get(&(n, l)) {
            return Ok(t.clone());
        }
        let (s, shift) = Self::member_map(n, l);
        let t = Arc::new(affine_tree(&self.base, &s, &shift)?);
        cache.insert((n, l), t.clone());
        Ok(t)
    }

    pub fn materialized(&self) -> usize {
        self.members.read().expect("member cache").len()
    }

    /// `Σ_{(n,l)} 2^n (2N/(2N+1))^d`, the summed level-`d` measure of the
    /// window (overlaps counted twice, so an upper bound for the union).
    pub fn level_measure(&self, d: usize) -> Result<Rational> {
        if d > self.depth {
            return Err(Error::LevelOutOfRange {
                level: d,
                depth: self.depth,
            });
        }
        let ratio = Rational::new((2 * self.big_n).into(), (2 * self.big_n + 1).into());
        let mut r = Rational::one();
        for _ in 0..d {
            r *= &ratio;
        }
        let scales: Rational = if range_len(self.n_range) == 0 {
            Rational::zero()
        } else {
            (self.n_range.0..=self.n_range.1).map(pow2).sum()
        };
        Ok(scales * r * int(range_len(self.l_range) as i64))
    }
}

#[derive(Serialize, Deserialize)]
struct FamilyRepr {
    #[serde(rename = "N")]
    big_n: i64,
    depth: usize,
    n_range: (i64, i64),
    l_range: (i64, i64),
}

impl Serialize for MFamily {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FamilyRepr {
            big_n: self.big_n,
            depth: self.depth,
            n_range: self.n_range,
            l_range: self.l_range,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MFamily {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FamilyRepr::deserialize(d)?;
        build_m_family(r.big_n, r.depth, r.n_range, r.l_range).map_err(serde::de::Error::custom)
    }
}

// ============================================================================
// Frames
// ============================================================================

/// The unique `(n, l)` with `|λ| ∈ (2^{n-1}, 2^n]` and `t ∈ (l 2^n, (l+1) 2^n]`.
pub fn select_frame(lambda: &Rational, t: &Rational) -> Result<(i64, i64)> {
    if lambda.is_zero() {
        return Err(Error::DegenerateMap);
    }
    let a = lambda.abs();
    let mut n = a.numer().bits() as i64 - a.denom().bits() as i64;
    while pow2(n) < a {
        n += 1;
    }
    while pow2(n - 1) >= a {
        n -= 1;
    }
    let l = (t / pow2(n)).ceil().to_integer() - num_bigint::BigInt::one();
    let l = l
        .to_i64()
        .ok_or_else(|| Error::Resource(format!("translation {} out of range", fmt_rat(t))))?;
    Ok((n, l))
}

// ============================================================================
// Gap-lemma certification over parameter boxes
// ============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub n: i64,
    pub l: i64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum GlwOutcome {
    /// Every map in the box sends the level-`depth` set of `X` onto a set
    /// containing `witness`, and `witness` lies in the member's level set.
    Certified { frame: Frame, witness: Interval },
    /// Lemma hypotheses hold on the whole box; no common component at this depth.
    ApplicableUnwitnessed { frame: Frame },
    NotApplicable { frame: Frame, reason: GapLemmaReason },
    Split { parts: Vec<GlwTrace> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlwTrace {
    #[serde(rename = "box")]
    pub param_box: ParamBox,
    pub depth: usize,
    /// Gaps were scanned down to these depths of `X` and of the member.
    pub scan_depths: (usize, usize),
    #[serde(flatten)]
    pub outcome: GlwOutcome,
}

impl GlwTrace {
    pub fn leaves(&self) -> Vec<&GlwTrace> {
        match &self.outcome {
            GlwOutcome::Split { parts } => parts.iter().flat_map(|p| p.leaves()).collect(),
            _ => vec![self],
        }
    }

    /// `(certified, applicable but unwitnessed, not applicable)` leaf counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut c = (0, 0, 0);
        for leaf in self.leaves() {
            match leaf.outcome {
                GlwOutcome::Certified { .. } => c.0 += 1,
                GlwOutcome::ApplicableUnwitnessed { .. } => c.1 += 1,
                GlwOutcome::NotApplicable { .. } => c.2 += 1,
                GlwOutcome::Split { .. } => {}
            }
        }
        c
    }

    pub fn status_name(&self) -> &'static str {
        match self.outcome {
            GlwOutcome::Certified { .. } => "certified",
            GlwOutcome::ApplicableUnwitnessed { .. } => "applicable_unwitnessed",
            GlwOutcome::NotApplicable { .. } => "not_applicable",
            GlwOutcome::Split { .. } => "split",
        }
    }
}

fn abs_range(lambda: &Interval) -> (Rational, Rational) {
    let (a, b) = (lambda.lo().abs(), lambda.hi().abs());
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn sub_box(pbox: &ParamBox, lambda: Option<Interval>, t: Option<Interval>) -> Result<ParamBox> {
    ParamBox::new(
        lambda.unwrap_or_else(|| pbox.lambda().clone()),
        t.unwrap_or_else(|| pbox.t().clone()),
    )
}

/// A frame whose closed region holds the whole box, or the two halves of
/// the box cut at the first frame boundary inside it.
fn frame_or_split(pbox: &ParamBox) -> Result<std::result::Result<(i64, i64), (ParamBox, ParamBox)>> {
    let (amin, amax) = abs_range(pbox.lambda());
    let (n, l) = select_frame(&amax, pbox.t().hi())?;
    let sign = if pbox.lambda().lo().is_negative() { int(-1) } else { int(1) };
    let cut = pow2(n - 1);
    if amin < cut {
        let c = &cut * &sign;
        let (lo, hi) = (pbox.lambda().lo().clone(), pbox.lambda().hi().clone());
        let a = Interval::new(lo, c.clone())?;
        let b = Interval::new(c, hi)?;
        return Ok(Err((sub_box(pbox, Some(a), None)?, sub_box(pbox, Some(b), None)?)));
    }
    let tcut = pow2(n) * int(l);
    if pbox.t().lo() < &tcut {
        let a = Interval::new(pbox.t().lo().clone(), tcut.clone())?;
        let b = Interval::new(tcut, pbox.t().hi().clone())?;
        return Ok(Err((sub_box(pbox, None, Some(a))?, sub_box(pbox, None, Some(b))?)));
    }
    Ok(Ok((n, l)))
}

fn distinct_corners(pbox: &ParamBox) -> Vec<(Rational, Rational)> {
    let mut cs: Vec<(Rational, Rational)> = pbox.corners().to_vec();
    cs.sort();
    cs.dedup();
    cs
}

/// Hypotheses of the gap lemma for `λX + t` against the frame's member,
/// checked for the whole box. The member is never built: both sets are
/// pulled back through the member map, which preserves every relation.
fn box_conditions(x: &GapTree, m: &MFamily, pbox: &ParamBox, frame: (i64, i64)) -> Result<Option<GapLemmaReason>> {
    let (amin, amax) = abs_range(pbox.lambda());
    let (s, shift) = MFamily::member_map(frame.0, frame.1);
    let hull2 = Interval::new(shift.clone(), &shift + &s)?;
    let gap2 = m.base().largest_gap().map(|g| g * &s);
    // a closed hull is never inside an open gap that is no longer
    if gap2.is_some_and(|g| g > amin) {
        return Ok(Some(GapLemmaReason::K1InsideGapOfK2));
    }
    if x.largest_gap().is_some_and(|g| g * &amax > hull2.len()) {
        return Ok(Some(GapLemmaReason::K2InsideGapOfK1));
    }
    for (lambda, t) in distinct_corners(pbox) {
        if !x.hull().affine(&lambda, &t).intersects(&hull2) {
            return Ok(Some(GapLemmaReason::K1InsideGapOfK2));
        }
        let pulled = affine_tree(x, &(&lambda / &s), &((&t - &shift) / &s))?;
        let v = check_gap_lemma(&pulled, m.base());
        if !v.applicable {
            return Ok(Some(v.reason));
        }
    }
    Ok(None)
}

/// Points of `λ x + t` common to every map of the box, per component.
fn robust_core(level: &IntervalSet, pbox: &ParamBox) -> IntervalSet {
    let corners = distinct_corners(pbox);
    let mut cores = Vec::with_capacity(level.len());
    for iv in level.intervals() {
        let mut core: Option<Interval> = Some(iv.affine(&corners[0].0, &corners[0].1));
        for (lambda, t) in &corners[1..] {
            core = core.and_then(|c| c.intersection(&iv.affine(lambda, t)));
        }
        cores.extend(core);
    }
    IntervalSet::normalize(cores)
}

/// Gap-lemma hypotheses and a finite-depth common component of `λX + t` and
/// the member `2^n (K + l)` chosen by the frame rule, for every `(λ, t)` in
/// the box. Boxes crossing a frame boundary are split, at most
/// `split_budget` leaves in total.
pub fn glw_intersect_certify(
    x: &GapTree,
    m: &MFamily,
    pbox: &ParamBox,
    depth: usize,
    split_budget: usize,
) -> Result<GlwTrace> {
    let hull = x.hull();
    if !hull.lo().is_zero() || !hull.hi().is_one() {
        return Err(Error::InvalidParameter(format!(
            "X must have hull [0, 1], got {hull}; normalize it with affine_tree first"
        )));
    }
    if let Some(tx) = thickness(x).finite() {
        if tx * int(m.big_n()) <= int(1) {
            return Err(Error::InvalidParameter(format!(
                "thickness(X) * N = {} is not above 1",
                fmt_rat(&(tx * int(m.big_n())))
            )));
        }
    }
    for d in [x.depth(), m.depth()] {
        if depth > d {
            return Err(Error::LevelOutOfRange { level: depth, depth: d });
        }
    }
    let x_level = to_interval_set(x, depth)?;
    let k_level = to_interval_set(m.base(), depth)?;
    let mut leaves = 0usize;
    certify_box(x, m, pbox, depth, &x_level, &k_level, &mut leaves, split_budget)
}

#[allow(clippy::too_many_arguments)]
fn certify_box(
    x: &GapTree,
    m: &MFamily,
    pbox: &ParamBox,
    depth: usize,
    x_level: &IntervalSet,
    k_level: &IntervalSet,
    leaves: &mut usize,
    budget: usize,
) -> Result<GlwTrace> {
    let scan_depths = (x.depth(), m.depth());
    let (n, l) = match frame_or_split(pbox)? {
        Err((a, b)) => {
            let a = certify_box(x, m, &a, depth, x_level, k_level, leaves, budget)?;
            let b = certify_box(x, m, &b, depth, x_level, k_level, leaves, budget)?;
            return Ok(GlwTrace {
                param_box: pbox.clone(),
                depth,
                scan_depths,
                outcome: GlwOutcome::Split { parts: vec![a, b] },
            });
        }
        Ok(f) => f,
    };
    *leaves += 1;
    if *leaves > budget {
        return Err(Error::SplitBudget(budget));
    }
    m.check_frame(n, l)?;
    let frame = Frame { n, l };
    let outcome = if let Some(reason) = box_conditions(x, m, pbox, (n, l))? {
        GlwOutcome::NotApplicable { frame, reason }
    } else {
        let (s, shift) = MFamily::member_map(n, l);
        let pulled = robust_core(x_level, pbox)
            .affine_image(&s.recip(), &(-&shift / &s))?
            .intersection(k_level);
        match pulled.intervals().first() {
            Some(w) => GlwOutcome::Certified {
                frame,
                witness: w.affine(&s, &shift),
            },
            None => GlwOutcome::ApplicableUnwitnessed { frame },
        }
    };
    Ok(GlwTrace {
        param_box: pbox.clone(),
        depth,
        scan_depths,
        outcome,
    })
}

/// Re-checks every certified leaf: the witness must lie in the member's
/// level set and in `λX + t` at that level for each corner of its box.
pub fn glw_recheck(x: &GapTree, m: &MFamily, trace: &GlwTrace) -> Result<bool> {
    for leaf in trace.leaves() {
        if let GlwOutcome::Certified { frame, witness } = &leaf.outcome {
            let member = m.member(frame.n, frame.l)?;
            let ml = to_interval_set(&member, leaf.depth)?;
            if !ml.intervals().iter().any(|c| c.contains_interval(witness)) {
                return Ok(false);
            }
            let xl = to_interval_set(x, leaf.depth)?;
            for (lambda, t) in distinct_corners(&leaf.param_box) {
                let img = xl.affine_image(&lambda, &t)?;
                if !img.intervals().iter().any(|c| c.contains_interval(witness)) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

// ============================================================================
// Tree pairs under affine maps
// ============================================================================

/// A gap tree seen through `y ↦ mu y + c`, cut at `depth`.
struct Mapped<'a> {
    tree: &'a GapTree,
    mu: Rational,
    c: Rational,
    depth: usize,
}

fn level_of(i: usize) -> usize {
    (usize::BITS - 1 - (i + 1).leading_zeros()) as usize
}

impl Mapped<'_> {
    fn interval(&self, i: usize) -> Interval {
        self.tree.node(i).interval.affine(&self.mu, &self.c)
    }

    fn is_leaf(&self, i: usize) -> bool {
        level_of(i) >= self.depth
    }

    /// Mapped length of the node's own gap, absent on leaves.
    fn gap(&self, i: usize) -> Option<Rational> {
        if self.is_leaf(i) {
            return None;
        }
        self.tree.node(i).gap.as_ref().map(|g| g.len() * self.mu.abs())
    }
}

fn hull_distance(a: &Interval, b: &Interval) -> Rational {
    let d1 = b.lo() - a.hi();
    let d2 = a.lo() - b.hi();
    d1.max(d2).max(Rational::zero())
}

/// Exact distance between the level-`depth` sets, never above `best`.
fn level_distance(a: &Mapped, b: &Mapped, mut best: Option<Rational>) -> Option<Rational> {
    let mut stack = vec![(0usize, 0usize)];
    while let Some((i, j)) = stack.pop() {
        let (ia, ib) = (a.interval(i), b.interval(j));
        let d = hull_distance(&ia, &ib);
        if best.as_ref().is_some_and(|b| &d >= b) {
            continue;
        }
        match (a.is_leaf(i), b.is_leaf(j)) {
            (true, true) => {
                let zero = d.is_zero();
                best = Some(d);
                if zero {
                    break;
                }
            }
            (false, true) => stack.extend([(2 * i + 2, j), (2 * i + 1, j)]),
            (true, false) => stack.extend([(i, 2 * j + 2), (i, 2 * j + 1)]),
            (false, false) => {
                if ia.len() >= ib.len() {
                    stack.extend([(2 * i + 2, j), (2 * i + 1, j)]);
                } else {
                    stack.extend([(i, 2 * j + 2), (i, 2 * j + 1)]);
                }
            }
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessRule {
    /// The two node intervals share an endpoint, which lies in both sets.
    Endpoint,
    /// The two subtrees satisfy the gap lemma, so their limit sets meet.
    GapLemma,
}

/// Two nodes whose limit sets provably meet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairWitness {
    pub x_node: String,
    pub m_node: String,
    pub rule: WitnessRule,
}

/// Searches node pairs down to the cut depth. Only disjoint hulls prune, so
/// the explored set, and the verdict, only grows with depth.
fn meeting_pair(a: &Mapped, b: &Mapped, lemma: bool, cap: usize) -> Option<PairWitness> {
    let mut stack = vec![(0usize, 0usize)];
    let mut visited = 0usize;
    while let Some((i, j)) = stack.pop() {
        visited += 1;
        if visited > cap {
            return None;
        }
        let (ia, ib) = (a.interval(i), b.interval(j));
        if !ia.intersects(&ib) {
            continue;
        }
        let witness = |rule| {
            Some(PairWitness {
                x_node: label_of(i),
                m_node: label_of(j),
                rule,
            })
        };
        if ia.lo() == ib.lo() || ia.lo() == ib.hi() || ia.hi() == ib.lo() || ia.hi() == ib.hi() {
            return witness(WitnessRule::Endpoint);
        }
        // in a self-similar tree no gap below a node exceeds the node's own
        let a_fits = b.gap(j).map(|g| ia.len() >= g);
        let b_fits = a.gap(i).map(|g| ib.len() >= g);
        if lemma && a_fits == Some(true) && b_fits == Some(true) {
            return witness(WitnessRule::GapLemma);
        }
        if a_fits == Some(false) {
            stack.extend([(i, 2 * j + 2), (i, 2 * j + 1)]);
        } else if b_fits == Some(false) {
            stack.extend([(2 * i + 2, j), (2 * i + 1, j)]);
        } else if !a.is_leaf(i) && (b.is_leaf(j) || ia.len() >= ib.len()) {
            stack.extend([(2 * i + 2, j), (2 * i + 1, j)]);
        } else if !b.is_leaf(j) {
            stack.extend([(i, 2 * j + 2), (i, 2 * j + 1)]);
        }
    }
    None
}

const PAIR_CAP: usize = 1 << 18;

/// Whether the lemma rule may be used: both trees self-similar (so finite
/// thickness is exact and gaps shrink downwards) with product at least 1.
fn lemma_allowed(x: &GapTree, m: &MFamily) -> bool {
    x.is_self_similar() && thickness(x).product_at_least_one(&thickness(m.base()))
}

/// Members whose hull image under `y ↦ mu_scale·2^n (y + l) + c` can meet `target_hull`.
fn relevant_frames(m: &MFamily, mu: &Rational, c: &Rational, target_hull: &Interval) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    for n in m.n_range.0..=m.n_range.1 {
        let s = pow2(n);
        let scale = mu * &s;
        // y-range whose image can meet the hull, in units of the member
        let back = Interval::spanning(
            (target_hull.lo() - c) / &scale,
            (target_hull.hi() - c) / &scale,
        );
        let lo = back.lo().floor().to_integer().to_i64().unwrap_or(i64::MIN) - 1;
        let hi = back.hi().ceil().to_integer().to_i64().unwrap_or(i64::MAX);
        for l in lo.max(m.l_range.0)..=hi.min(m.l_range.1) {
            out.push((n, l));
        }
    }
    out
}

// ============================================================================
// Coverage probe
// ============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetOutcome {
    /// `r ∈ X + λM`: a witnessed pair of meeting subtrees.
    Certified,
    /// The level sets still meet at this depth.
    Unresolved,
    /// The level sets are disjoint, so `r ∉ X + λ M_window`.
    Missed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetStatus {
    #[serde(with = "ratstr")]
    pub target: Rational,
    pub status: TargetOutcome,
    #[serde(default)]
    pub frame: Option<Frame>,
    #[serde(default)]
    pub witness: Option<PairWitness>,
    /// Distance between `X` and `r − λM` at the probe depth, for failures.
    #[serde(default, with = "optratstr")]
    pub nearest_miss: Option<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    #[serde(with = "ratstr")]
    pub lambda: Rational,
    pub depth: usize,
    pub probed: usize,
    pub certified: usize,
    pub missed: usize,
    /// Summed level-`depth` measure of the family window.
    #[serde(with = "ratstr")]
    pub window_measure: Rational,
    pub targets: Vec<TargetStatus>,
}

impl CoverageReport {
    pub fn failures(&self) -> impl Iterator<Item = &TargetStatus> {
        self.targets.iter().filter(|t| t.status != TargetOutcome::Certified)
    }

    pub fn certified_fraction(&self) -> Rational {
        if self.probed == 0 {
            Rational::zero()
        } else {
            Rational::new(self.certified.into(), self.probed.into())
        }
    }
}

fn check_depth(x: &GapTree, m: &MFamily, depth: usize) -> Result<()> {
    for d in [x.depth(), m.depth()] {
        if depth > d {
            return Err(Error::LevelOutOfRange { level: depth, depth: d });
        }
    }
    Ok(())
}

fn probe_target(x: &GapTree, m: &MFamily, lambda: &Rational, r: &Rational, depth: usize, lemma: bool) -> TargetStatus {
    let xa = Mapped {
        tree: x,
        mu: int(1),
        c: int(0),
        depth,
    };
    // r − λ 2^n (y + l)
    let frames = relevant_frames(m, &-lambda, r, x.hull());
    let mapped = |(n, l): (i64, i64)| {
        let (s, shift) = MFamily::member_map(n, l);
        Mapped {
            tree: m.base(),
            mu: -lambda * &s,
            c: r - lambda * shift,
            depth,
        }
    };
    for &f in &frames {
        if let Some(w) = meeting_pair(&xa, &mapped(f), lemma, PAIR_CAP) {
            return TargetStatus {
                target: r.clone(),
                status: TargetOutcome::Certified,
                frame: Some(Frame { n: f.0, l: f.1 }),
                witness: Some(w),
                nearest_miss: None,
            };
        }
    }
    let mut best: Option<Rational> = None;
    for &f in &frames {
        best = level_distance(&xa, &mapped(f), best);
        if best.as_ref().is_some_and(|b| b.is_zero()) {
            break;
        }
    }
    let status = match &best {
        Some(d) if d.is_zero() => TargetOutcome::Unresolved,
        _ => TargetOutcome::Missed,
    };
    TargetStatus {
        target: r.clone(),
        status,
        frame: None,
        witness: None,
        nearest_miss: best,
    }
}

/// For each target `r`, looks for `r ∈ X + λM` through a meeting pair of
/// subtrees of `X` and `r − λ 2^n (K + l)`. Failures carry the exact
/// distance of the level-`depth` sets (absent when no member is in reach).
pub fn sumset_cover_probe(
    x: &GapTree,
    m: &MFamily,
    lambda: &Rational,
    targets: &[Rational],
    depth: usize,
) -> Result<CoverageReport> {
    if lambda.is_zero() {
        return Err(Error::DegenerateMap);
    }
    check_depth(x, m, depth)?;
    let lemma = lemma_allowed(x, m);
    let statuses: Vec<TargetStatus> = targets
        .par_iter()
        .map(|r| probe_target(x, m, lambda, r, depth, lemma))
        .collect();
    let certified = statuses.iter().filter(|s| s.status == TargetOutcome::Certified).count();
    let missed = statuses.iter().filter(|s| s.status == TargetOutcome::Missed).count();
    Ok(CoverageReport {
        lambda: lambda.clone(),
        depth,
        probed: statuses.len(),
        certified,
        missed,
        window_measure: m.level_measure(depth)?,
        targets: statuses,
    })
}

/// Whether `(λX + t) ∩ M_window = ∅` already at level `depth`, which
/// implies it for the limit sets.
pub fn certify_affine_escape(x: &GapTree, m: &MFamily, lambda: &Rational, t: &Rational, depth: usize) -> Result<bool> {
    if lambda.is_zero() {
        return Err(Error::DegenerateMap);
    }
    check_depth(x, m, depth)?;
    let xa = Mapped {
        tree: x,
        mu: lambda.clone(),
        c: t.clone(),
        depth,
    };
    let hull = x.hull().affine(lambda, t);
    for f in relevant_frames(m, &int(1), &int(0), &hull) {
        let (s, shift) = MFamily::member_map(f.0, f.1);
        let mb = Mapped {
            tree: m.base(),
            mu: s,
            c: shift,
            depth,
        };
        if level_distance(&xa, &mb, None).is_some_and(|d| d.is_zero()) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests;
