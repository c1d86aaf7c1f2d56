//! Constructive intersection of Cantor gap trees.
//!
//! The gap-lemma checker only certifies that the lemma's hypotheses hold.
//! Actual common points come from the containment walker, which descends
//! both trees in lockstep keeping `I_σ(K) ⊂ I_σ'(K̃)`.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::cantor_trees::{label_of, level_start, thickness, GapTree, Node};
use crate::error::{Error, Result};
use crate::rational_intervals::{fmt_rat, int, ratstr, Gap, Interval, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapLemmaReason {
    Ok,
    ThicknessProductBelowOne,
    K1InsideGapOfK2,
    K2InsideGapOfK1,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapLemmaVerdict {
    pub applicable: bool,
    pub reason: GapLemmaReason,
    /// Gaps were scanned only down to the recorded depth of each tree.
    pub scan_depths: (usize, usize),
}

/// Whether the closed hull of `inner` sits inside a gap of `outer`, the two
/// unbounded complement components included.
fn hull_inside_gap(inner: &GapTree, outer: &GapTree) -> bool {
    let h = inner.hull();
    let o = outer.hull();
    if h.hi() < o.lo() || o.hi() < h.lo() {
        return true;
    }
    // an open gap no longer than the hull cannot hold it
    match outer.largest_gap() {
        None => return false,
        Some(g) if g <= h.len() => return false,
        _ => {}
    }
    let gaps = outer.gaps_sorted();
    let i = gaps.partition_point(|g| g.hi() <= h.lo());
    gaps.get(i).is_some_and(|g| {
        Gap::bounded(g.lo().clone(), g.hi().clone()).contains_interval(h)
    })
}

pub fn check_gap_lemma(k1: &GapTree, k2: &GapTree) -> GapLemmaVerdict {
    let scan_depths = (k1.depth(), k2.depth());
    let reason = if !thickness(k1).product_at_least_one(&thickness(k2)) {
        GapLemmaReason::ThicknessProductBelowOne
    } else if hull_inside_gap(k1, k2) {
        GapLemmaReason::K1InsideGapOfK2
    } else if hull_inside_gap(k2, k1) {
        GapLemmaReason::K2InsideGapOfK1
    } else {
        GapLemmaReason::Ok
    };
    GapLemmaVerdict {
        applicable: reason == GapLemmaReason::Ok,
        reason,
        scan_depths,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkTrace {
    /// `(σ_n, σ'_n)` for n = 1..depth.
    pub chain: Vec<(String, String)>,
    #[serde(rename = "point", with = "ratstr")]
    pub point_estimate: Rational,
    #[serde(rename = "error", with = "ratstr")]
    pub error_bound: Rational,
    pub final_k: Interval,
    pub final_tilde: Interval,
}

fn check_walk_preconditions(k: &GapTree, kt: &GapTree, depth: usize) -> Result<()> {
    if depth > k.depth() || depth > kt.depth() {
        return Err(Error::WalkPrecondition(format!(
            "walk depth {depth} exceeds tree depths {} / {}",
            k.depth(),
            kt.depth()
        )));
    }
    if !kt.hull().contains_interval(k.hull()) {
        return Err(Error::WalkPrecondition(format!(
            "hull {} is not inside hull {}",
            k.hull(),
            kt.hull()
        )));
    }
    for n in 0..depth {
        let (tmax, kmin) = (kt.max_gap(n).unwrap(), k.min_gap(n).unwrap());
        if tmax >= kmin {
            return Err(Error::WalkPrecondition(format!(
                "level {n}: largest tilde gap {} is not below smallest gap {}",
                fmt_rat(&tmax),
                fmt_rat(&kmin)
            )));
        }
    }
    Ok(())
}

/// Lockstep descent proving `K ∩ K̃ ≠ ∅` to finite depth.
pub fn containment_walk(k: &GapTree, kt: &GapTree, depth: usize) -> Result<WalkTrace> {
    check_walk_preconditions(k, kt, depth)?;
    let (mut i, mut j) = (0usize, 0usize);
    let mut chain = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (k0, k1) = (&k.node(2 * i + 1).interval, &k.node(2 * i + 2).interval);
        let (t0, t1) = (&kt.node(2 * j + 1).interval, &kt.node(2 * j + 2).interval);
        if t0.contains_interval(k0) {
            i = 2 * i + 1;
            j = 2 * j + 1;
        } else if t1.contains_interval(k1) {
            i = 2 * i + 2;
            j = 2 * j + 2;
        } else {
            // unreachable under the gap-length precondition
            return Err(Error::WalkPrecondition(format!(
                "no containable child at nodes {:?} / {:?}",
                label_of(i),
                label_of(j)
            )));
        }
        chain.push((label_of(i), label_of(j)));
    }
    let final_k = k.node(i).interval.clone();
    let final_tilde = kt.node(j).interval.clone();
    debug_assert!(final_tilde.contains_interval(&final_k));
    Ok(WalkTrace {
        chain,
        point_estimate: final_k.lo().clone(),
        error_bound: final_tilde.len(),
        final_k,
        final_tilde,
    })
}

/// Tree on the hull of `K` widened by `margin` on both sides whose level-n
/// gaps are a quarter of the smallest level-n gap of `K` (so strictly below
/// half of it).
pub fn build_tilde(k: &GapTree, depth: usize, margin: &Rational) -> Result<GapTree> {
    if margin <= &Rational::zero() {
        return Err(Error::InvalidParameter("margin must be positive".into()));
    }
    if depth > k.depth() {
        return Err(Error::LevelOutOfRange {
            level: depth,
            depth: k.depth(),
        });
    }
    let hull = Interval::new(k.hull().lo() - margin, k.hull().hi() + margin)?;
    let mut nodes = Vec::with_capacity(level_start(depth + 1));
    nodes.push(Node {
        interval: hull,
        gap: None,
    });
    for level in 0..depth {
        let g = k.min_gap(level).expect("positive gaps to depth") / int(4);
        for i in level_start(level)..level_start(level + 1) {
            let iv = nodes[i].interval.clone();
            if g >= iv.len() {
                return Err(Error::InvalidParameter(format!(
                    "level {level}: gap {} does not fit in {iv}",
                    fmt_rat(&g)
                )));
            }
            let side = (iv.len() - &g) / int(2);
            let a = iv.lo() + &side;
            let b = &a + &g;
            nodes[i].gap = Some(Interval::new(a.clone(), b.clone())?);
            nodes.push(Node {
                interval: Interval::new(iv.lo().clone(), a)?,
                gap: None,
            });
            nodes.push(Node {
                interval: Interval::new(b, iv.hi().clone())?,
                gap: None,
            });
        }
    }
    GapTree::from_nodes(nodes, false)
}

/// Walk preconditions for `lambda K + t` against `K̃` on the whole closed
/// box `[1/(1+δ), 1+δ] × [-δ, δ]`. The hull condition is affine in
/// `(lambda, t)`, so corners decide it; gap lengths scale by lambda, so the
/// smallest lambda decides the gap condition.
fn box_ok(k: &GapTree, kt: &GapTree, depth: usize, delta: &Rational) -> bool {
    let one = int(1);
    let l_lo = &one / (&one + delta);
    let l_hi = &one + delta;
    let th = kt.hull();
    for l in [&l_lo, &l_hi] {
        for t in [-delta.clone(), delta.clone()] {
            if !th.contains_interval(&k.hull().affine(l, &t)) {
                return false;
            }
        }
    }
    (0..depth).all(|n| kt.max_gap(n).unwrap() < &l_lo * k.min_gap(n).unwrap())
}

/// Radius δ such that every `(lambda, t)` in `(1/(1+δ), 1+δ) × (-δ, δ)`
/// keeps the walk preconditions, found by dyadic bisection against the
/// exact corner check.
pub fn perturbation_delta(k: &GapTree, kt: &GapTree, depth: usize) -> Result<Rational> {
    check_walk_preconditions(k, kt, depth)?;
    let (kh, th) = (k.hull(), kt.hull());
    let strict_hull = th.lo() < kh.lo() && kh.hi() < th.hi();
    let half_gaps =
        (0..depth).all(|n| int(2) * kt.max_gap(n).unwrap() < k.min_gap(n).unwrap());
    if !strict_hull || !half_gaps {
        return Err(Error::ZeroSlack);
    }
    if box_ok(k, kt, depth, &int(1)) {
        return Ok(int(1));
    }
    let (mut lo, mut hi) = (Rational::zero(), int(1));
    for _ in 0..48 {
        let mid = (&lo + &hi) / int(2);
        if box_ok(k, kt, depth, &mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo.is_zero() {
        return Err(Error::ZeroSlack);
    }
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor_trees::{affine_tree, from_middle_ratio, to_interval_set};
    use crate::rational_intervals::{pow2, rat};
    use proptest::prelude::*;

    fn iv(a: Rational, b: Rational) -> Interval {
        Interval::new(a, b).unwrap()
    }

    fn thirds(depth: usize) -> GapTree {
        from_middle_ratio(1, depth, iv(int(0), int(1))).unwrap()
    }

    #[test]
    fn identical_middle_thirds_are_applicable() {
        let v = check_gap_lemma(&thirds(6), &thirds(6));
        assert!(v.applicable);
        assert_eq!(v.reason, GapLemmaReason::Ok);
    }

    #[test]
    fn glw_positioned_pair_is_applicable() {
        // tau(X) = 2 hull [0,1]; lambda = 3 lies in (2, 4] so n = 2, t = 1 in (0, 4]
        let x = from_middle_ratio(2, 6, iv(int(0), int(1))).unwrap();
        let k1 = affine_tree(&x, &int(3), &int(1)).unwrap();
        let k2 = affine_tree(&thirds(6), &int(4), &int(0)).unwrap();
        assert!(check_gap_lemma(&k1, &k2).applicable);
        assert!(check_gap_lemma(&k2, &k1).applicable);
    }

    #[test]
    fn thin_trees_fail_on_thickness() {
        // middle 2/3 removed at every node: thickness 1/2
        let thin = |d| {
            let mut nodes = vec![Node { interval: iv(int(0), int(1)), gap: None }];
            for i in 0..level_start(d) {
                let c = nodes[i].interval.clone();
                let s = c.len() / int(6);
                let a = c.lo() + &s;
                let b = c.hi() - &s;
                nodes[i].gap = Some(iv(a.clone(), b.clone()));
                nodes.push(Node { interval: iv(c.lo().clone(), a), gap: None });
                nodes.push(Node { interval: iv(b, c.hi().clone()), gap: None });
            }
            GapTree::from_nodes(nodes, true).unwrap()
        };
        let v = check_gap_lemma(&thin(4), &thin(4));
        assert!(!v.applicable);
        assert_eq!(v.reason, GapLemmaReason::ThicknessProductBelowOne);
    }

    #[test]
    fn small_copy_inside_a_gap() {
        let big = thirds(4);
        let small = affine_tree(&thirds(4), &rat(1, 10), &rat(4, 10)).unwrap();
        let v = check_gap_lemma(&small, &big);
        assert_eq!(v.reason, GapLemmaReason::K1InsideGapOfK2);
        assert_eq!(check_gap_lemma(&big, &small).reason, GapLemmaReason::K2InsideGapOfK1);
        let far = affine_tree(&thirds(4), &int(1), &int(5)).unwrap();
        assert!(!check_gap_lemma(&far, &big).applicable);
    }

    #[test]
    fn walk_prefers_left_children() {
        let k = thirds(4);
        let kt = build_tilde(&k, 4, &rat(1, 100)).unwrap();
        let w = containment_walk(&k, &kt, 4).unwrap();
        assert!(w.chain.iter().all(|(a, b)| a == b && a.chars().all(|c| c == '0')));
        assert_eq!(w.point_estimate, int(0));
        // identical trees have no strict gap slack
        assert!(containment_walk(&k, &k, 4).is_err());
    }

    #[test]
    fn tilde_of_middle_thirds() {
        let k = thirds(3);
        let kt = build_tilde(&k, 3, &rat(1, 10)).unwrap();
        for n in 0..3 {
            let bound = num_traits::pow(rat(1, 3), n + 1) / int(2);
            assert!(kt.max_gap(n).unwrap() < bound);
        }
        assert_eq!(kt.hull(), &iv(rat(-1, 10), rat(11, 10)));
        let th = thickness(&kt);
        assert!(th.finite().unwrap() > &int(0));
        let w = containment_walk(&k, &kt, 3).unwrap();
        assert_eq!(w.chain.len(), 3);
        assert_eq!(w.error_bound, w.final_tilde.len());
    }

    #[test]
    fn precondition_errors_name_the_level() {
        let k = thirds(3);
        let wide = from_middle_ratio(1, 3, iv(int(-1), int(2))).unwrap();
        let err = containment_walk(&k, &wide, 3).unwrap_err();
        assert!(err.to_string().contains("level 0"), "{err}");
    }

    #[test]
    fn delta_for_generous_margins() {
        let k = thirds(4);
        let margin = rat(1, 4);
        let kt = build_tilde(&k, 4, &margin).unwrap();
        let d = perturbation_delta(&k, &kt, 4).unwrap();
        assert!(d >= &margin / int(2));
        assert!(d > int(0));
        // no slack: identical hulls
        assert!(perturbation_delta(&k, &k, 4).is_err());
        let tight = build_tilde(&k, 4, &pow2(-70)).unwrap();
        assert_eq!(perturbation_delta(&k, &tight, 4), Err(Error::ZeroSlack));
    }

    #[test]
    fn json_shape() {
        let k = thirds(2);
        let kt = build_tilde(&k, 2, &rat(1, 8)).unwrap();
        let w = containment_walk(&k, &kt, 2).unwrap();
        let v: serde_json::Value = serde_json::to_value(&w).unwrap();
        assert_eq!(v["chain"][0][0], "0");
        assert_eq!(v["point"], "0/1");
        assert!(v["error"].is_string());
    }

    proptest! {
        #[test]
        fn gap_lemma_is_symmetric(seed in prop::collection::vec(any::<u8>(), 8..40), l in 1i64..30, t in -30i64..30, n in 1i64..4) {
            let a = crate::cantor_trees::tests::random_tree(&seed, 3);
            let b = affine_tree(&from_middle_ratio(n, 3, iv(int(0), int(1))).unwrap(), &rat(l, 10), &rat(t, 10)).unwrap();
            prop_assert_eq!(check_gap_lemma(&a, &b).applicable, check_gap_lemma(&b, &a).applicable);
        }

        #[test]
        fn walks_on_random_trees(seed in prop::collection::vec(any::<u8>(), 8..40), depth in 1usize..6, m in 1i64..10) {
            let k = crate::cantor_trees::tests::random_tree(&seed, depth);
            let kt = build_tilde(&k, depth, &rat(m, 7)).unwrap();
            let w = containment_walk(&k, &kt, depth).unwrap();
            // error bounds shrink along the chain
            let mut last = kt.hull().len();
            for (_, b) in &w.chain {
                let len = kt.node_by_label(b).unwrap().interval.len();
                prop_assert!(len <= last);
                last = len;
            }
            prop_assert!(w.final_k.intersects(&w.final_tilde));
            let common = to_interval_set(&k, depth).unwrap().intersection(&to_interval_set(&kt, depth).unwrap());
            prop_assert!(common.meets(&w.final_k));
        }

        #[test]
        fn sampled_perturbations_still_walk(seed in prop::collection::vec(any::<u8>(), 8..40), fl in -8i64..=8, ft in -8i64..=8) {
            let k = crate::cantor_trees::tests::random_tree(&seed, 4);
            let kt = build_tilde(&k, 4, &rat(1, 2)).unwrap();
            let d = perturbation_delta(&k, &kt, 4).unwrap();
            // lambda strictly inside (1/(1+d), 1+d), t strictly inside (-d, d)
            let lam = if fl >= 0 { int(1) + &d * rat(fl, 9) } else { int(1) / (int(1) + &d * rat(-fl, 9)) };
            let t = &d * rat(ft, 9);
            let moved = affine_tree(&k, &lam, &t).unwrap();
            prop_assert!(containment_walk(&moved, &kt, 4).is_ok());
        }
    }
}
