//! Binary gap-tree presentations of Cantor sets.
//!
//! A node `σ` carries its interval `I_σ`; internal nodes also carry the gap
//! `U_σ` (stored by its endpoints, treated as open) that splits `I_σ` into
//! `I_σ0`, `U_σ`, `I_σ1`. Nodes live in heap order: the root is 0 and the
//! children of `i` are `2i+1` (label bit 0) and `2i+2` (label bit 1), so the
//! nodes of level `n` are the contiguous range `2^n - 1 .. 2^(n+1) - 1`.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rational_intervals::{fmt_rat, int, Interval, IntervalSet, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Node {
    pub interval: Interval,
    /// Open gap `U_σ` by its endpoints; `None` on the last level.
    pub gap: Option<Interval>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GapTree {
    depth: usize,
    nodes: Vec<Node>,
    self_similar: bool,
}

/// How far a finite-tree thickness can be trusted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exactness {
    /// Every node of the infinite construction repeats the recorded ratios.
    Exact,
    /// Minimum over recorded nodes only; the infimum over all nodes can be
    /// smaller.
    UpperBound,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ThicknessValue {
    Finite(Rational),
    Infinite,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thickness {
    pub value: ThicknessValue,
    pub exactness: Exactness,
}

impl Thickness {
    pub fn finite(&self) -> Option<&Rational> {
        match &self.value {
            ThicknessValue::Finite(r) => Some(r),
            ThicknessValue::Infinite => None,
        }
    }

    /// `tau1 * tau2 >= 1`, with +inf times anything positive counting as
    /// large and +inf times 0 counting as large as well (an interval meets
    /// any set it straddles).
    pub fn product_at_least_one(&self, other: &Thickness) -> bool {
        match (self.finite(), other.finite()) {
            (Some(a), Some(b)) => a * b >= int(1),
            _ => true,
        }
    }
}

impl fmt::Display for Thickness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.exactness {
            Exactness::Exact => "exact",
            Exactness::UpperBound => "upper bound",
        };
        match &self.value {
            ThicknessValue::Finite(r) => write!(f, "{} ({tag})", fmt_rat(r)),
            ThicknessValue::Infinite => write!(f, "+inf ({tag})"),
        }
    }
}

pub fn level_start(level: usize) -> usize {
    (1usize << level) - 1
}

/// Binary label of a heap index, root = "".
pub fn label_of(index: usize) -> String {
    let mut bits = Vec::new();
    let mut i = index;
    while i > 0 {
        bits.push(if i % 2 == 1 { '0' } else { '1' });
        i = (i - 1) / 2;
    }
    bits.iter().rev().collect()
}

pub fn index_of(label: &str) -> Option<usize> {
    label.chars().try_fold(0usize, |i, c| match c {
        '0' => Some(2 * i + 1),
        '1' => Some(2 * i + 2),
        _ => None,
    })
}

impl GapTree {
    /// Validates a heap-ordered node list: full binary shape, positive gaps,
    /// and `I_σ = I_σ0 ∪ closure(U_σ) ∪ I_σ1` at every internal node.
    pub fn from_nodes(nodes: Vec<Node>, self_similar: bool) -> Result<Self> {
        let count = nodes.len() + 1;
        if !count.is_power_of_two() || count < 2 {
            return Err(Error::RejectedInput(format!(
                "{} nodes do not form a full binary tree",
                nodes.len()
            )));
        }
        let depth = count.trailing_zeros() as usize - 1;
        for (i, node) in nodes.iter().enumerate() {
            let internal = i < level_start(depth);
            match (&node.gap, internal) {
                (Some(gap), true) => {
                    let (l, r) = (&nodes[2 * i + 1].interval, &nodes[2 * i + 2].interval);
                    let ok = gap.lo() < gap.hi()
                        && l.lo() == node.interval.lo()
                        && l.hi() == gap.lo()
                        && r.lo() == gap.hi()
                        && r.hi() == node.interval.hi();
                    if !ok {
                        return Err(Error::RejectedInput(format!(
                            "node {:?} does not split as I0, U, I1",
                            label_of(i)
                        )));
                    }
                }
                (None, false) => {}
                _ => {
                    return Err(Error::RejectedInput(format!(
                        "node {:?} has a gap on the wrong level",
                        label_of(i)
                    )))
                }
            }
        }
        Ok(GapTree {
            depth,
            nodes,
            self_similar,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn hull(&self) -> &Interval {
        &self.nodes[0].interval
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    pub fn node_by_label(&self, label: &str) -> Option<&Node> {
        index_of(label).and_then(|i| self.nodes.get(i))
    }

    pub fn is_self_similar(&self) -> bool {
        self.self_similar
    }

    pub fn level(&self, level: usize) -> &[Node] {
        &self.nodes[level_start(level)..level_start(level + 1)]
    }

    fn gap_lengths(&self, level: usize) -> impl Iterator<Item = Rational> + '_ {
        self.level(level)
            .iter()
            .filter_map(|n| n.gap.as_ref().map(Interval::len))
    }

    /// Smallest gap among level-`level` nodes (`level < depth`).
    pub fn min_gap(&self, level: usize) -> Option<Rational> {
        self.gap_lengths(level).min()
    }

    pub fn max_gap(&self, level: usize) -> Option<Rational> {
        self.gap_lengths(level).max()
    }

    /// Largest recorded gap of the whole tree.
    pub fn largest_gap(&self) -> Option<Rational> {
        self.nodes
            .iter()
            .filter_map(|n| n.gap.as_ref().map(Interval::len))
            .max()
    }

    /// Every recorded gap, left to right.
    pub fn gaps_sorted(&self) -> Vec<Interval> {
        let mut g: Vec<Interval> = self.nodes.iter().filter_map(|n| n.gap.clone()).collect();
        g.sort_by(|a, b| a.lo().cmp(b.lo()));
        g
    }
}

/// Symmetric tree removing the middle `1/(2N+1)` of every interval.
pub fn from_middle_ratio(n: i64, depth: usize, hull: Interval) -> Result<GapTree> {
    if n <= 0 {
        return Err(Error::InvalidParameter(format!("N = {n} must be positive")));
    }
    from_side_ratio(&Rational::new(n.into(), (2 * n + 1).into()), depth, hull)
}

/// Symmetric tree keeping both end pieces of relative length `side`, so the
/// thickness is `side / (1 - 2 side)`.
pub fn from_side_ratio(side: &Rational, depth: usize, hull: Interval) -> Result<GapTree> {
    if !side.is_positive() || side * int(2) >= int(1) {
        return Err(Error::InvalidParameter(format!(
            "side ratio {} must lie in (0, 1/2)",
            fmt_rat(side)
        )));
    }
    if depth < 1 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    if hull.is_point() {
        return Err(Error::InvalidParameter("hull must be nondegenerate".into()));
    }
    let total = level_start(depth + 1);
    let mut nodes: Vec<Node> = Vec::with_capacity(total);
    nodes.push(Node {
        interval: hull,
        gap: None,
    });
    for i in 0..level_start(depth) {
        let iv = nodes[i].interval.clone();
        let piece = iv.len() * side;
        let a = iv.lo() + &piece;
        let b = iv.hi() - &piece;
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
    Ok(GapTree {
        depth,
        nodes,
        self_similar: true,
    })
}

/// Largest-gap (ties leftmost) bisection of a finite union of intervals.
pub fn decompose(s: &IntervalSet, depth: usize) -> Result<GapTree> {
    let comps = s.intervals();
    if comps.is_empty() {
        return Err(Error::NotEnoughStructure {
            node: String::new(),
            detail: "empty set".into(),
        });
    }
    let total = level_start(depth + 1);
    // each slot holds the component range [a, b) governing that node
    let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(total);
    let mut nodes: Vec<Node> = Vec::with_capacity(total);
    ranges.push((0, comps.len()));
    for i in 0..total {
        let (a, b) = ranges[i];
        let interval = Interval::new(comps[a].lo().clone(), comps[b - 1].hi().clone())?;
        let mut gap = None;
        if i < level_start(depth) {
            if b - a < 2 {
                return Err(Error::NotEnoughStructure {
                    node: label_of(i),
                    detail: format!(
                        "node interval {interval} holds a single component; cannot split to depth {depth}"
                    ),
                });
            }
            let mut best = a;
            let mut best_len = comps[a + 1].lo() - comps[a].hi();
            for k in a + 1..b - 1 {
                let len = comps[k + 1].lo() - comps[k].hi();
                if len > best_len {
                    best = k;
                    best_len = len;
                }
            }
            gap = Some(Interval::new(comps[best].hi().clone(), comps[best + 1].lo().clone())?);
            ranges.push((a, best + 1));
            ranges.push((best + 1, b));
        }
        nodes.push(Node { interval, gap });
    }
    Ok(GapTree {
        depth,
        nodes,
        self_similar: false,
    })
}

/// Minimum over internal nodes of `min(|I_σ0|, |I_σ1|) / |U_σ|`.
pub fn thickness(t: &GapTree) -> Thickness {
    let exactness = if t.self_similar {
        Exactness::Exact
    } else {
        Exactness::UpperBound
    };
    let mut best: Option<Rational> = None;
    for i in 0..level_start(t.depth) {
        let gap = t.nodes[i].gap.as_ref().expect("internal node has a gap");
        let l = t.nodes[2 * i + 1].interval.len();
        let r = t.nodes[2 * i + 2].interval.len();
        let ratio = l.min(r) / gap.len();
        if best.as_ref().map_or(true, |b| &ratio < b) {
            best = Some(ratio);
        }
    }
    Thickness {
        value: best.map_or(ThicknessValue::Infinite, ThicknessValue::Finite),
        exactness,
    }
}

/// The `2^level` intervals of one level as a normalized set.
pub fn to_interval_set(t: &GapTree, level: usize) -> Result<IntervalSet> {
    if level > t.depth {
        return Err(Error::LevelOutOfRange {
            level,
            depth: t.depth,
        });
    }
    Ok(IntervalSet::normalize(
        t.level(level).iter().map(|n| n.interval.clone()).collect(),
    ))
}

/// Node-wise image under `x -> lambda x + t`; a negative lambda mirrors
/// every level so children stay ordered left to right.
pub fn affine_tree(tree: &GapTree, lambda: &Rational, t: &Rational) -> Result<GapTree> {
    if lambda.is_zero() {
        return Err(Error::DegenerateMap);
    }
    let flip = lambda.is_negative();
    let mut nodes = Vec::with_capacity(tree.nodes.len());
    for level in 0..=tree.depth {
        let src = tree.level(level);
        let width = src.len();
        for p in 0..width {
            let old = if flip { &src[width - 1 - p] } else { &src[p] };
            nodes.push(Node {
                interval: old.interval.affine(lambda, t),
                gap: old.gap.as_ref().map(|g| g.affine(lambda, t)),
            });
        }
    }
    Ok(GapTree {
        depth: tree.depth,
        nodes,
        self_similar: tree.self_similar,
    })
}

// ============================================================================
// JSON
// ============================================================================

#[derive(Serialize, Deserialize)]
struct NodeRepr {
    interval: Interval,
    gap: Option<Interval>,
    #[serde(default)]
    left: Option<Box<NodeRepr>>,
    #[serde(default)]
    right: Option<Box<NodeRepr>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    self_similar: bool,
}

impl GapTree {
    fn repr(&self, i: usize) -> NodeRepr {
        let internal = i < level_start(self.depth);
        NodeRepr {
            interval: self.nodes[i].interval.clone(),
            gap: self.nodes[i].gap.clone(),
            left: internal.then(|| Box::new(self.repr(2 * i + 1))),
            right: internal.then(|| Box::new(self.repr(2 * i + 2))),
            self_similar: i == 0 && self.self_similar,
        }
    }
}

impl Serialize for GapTree {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.repr(0).serialize(s)
    }
}

impl<'de> Deserialize<'de> for GapTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let root = NodeRepr::deserialize(d)?;
        let self_similar = root.self_similar;
        // breadth-first flattening into heap order
        let mut nodes = Vec::new();
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(n) = queue.pop_front() {
            nodes.push(Node {
                interval: n.interval,
                gap: n.gap,
            });
            match (n.left, n.right) {
                (Some(l), Some(r)) => {
                    queue.push_back(*l);
                    queue.push_back(*r);
                }
                (None, None) => {}
                _ => return Err(D::Error::custom("node with exactly one child")),
            }
        }
        GapTree::from_nodes(nodes, self_similar).map_err(D::Error::custom)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rational_intervals::rat;
    use proptest::prelude::*;

    fn unit() -> Interval {
        Interval::new(int(0), int(1)).unwrap()
    }

    fn iv(a: Rational, b: Rational) -> Interval {
        Interval::new(a, b).unwrap()
    }

    #[test]
    fn labels_round_trip() {
        for i in 0..64 {
            assert_eq!(index_of(&label_of(i)), Some(i));
        }
        assert_eq!(label_of(0), "");
        assert_eq!(label_of(1), "0");
        assert_eq!(label_of(4), "01");
    }

    #[test]
    fn middle_thirds_level_one() {
        let t = from_middle_ratio(1, 1, unit()).unwrap();
        assert_eq!(t.node_by_label("0").unwrap().interval, iv(int(0), rat(1, 3)));
        assert_eq!(t.node(0).gap, Some(iv(rat(1, 3), rat(2, 3))));
        assert_eq!(t.node_by_label("1").unwrap().interval, iv(rat(2, 3), int(1)));
    }

    #[test]
    fn n2_pieces() {
        let t = from_middle_ratio(2, 2, unit()).unwrap();
        for n in t.level(1) {
            assert_eq!(n.interval.len(), rat(2, 5));
        }
        assert_eq!(t.node(0).gap.as_ref().unwrap().len(), rat(1, 5));
    }

    #[test]
    fn invalid_n() {
        assert!(matches!(
            from_middle_ratio(0, 2, unit()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn classical_level_two() {
        let t = from_middle_ratio(1, 2, unit()).unwrap();
        let s = to_interval_set(&t, 2).unwrap();
        let want = IntervalSet::normalize(vec![
            iv(int(0), rat(1, 9)),
            iv(rat(2, 9), rat(1, 3)),
            iv(rat(2, 3), rat(7, 9)),
            iv(rat(8, 9), int(1)),
        ]);
        assert_eq!(s, want);
        assert_eq!(to_interval_set(&t, 0).unwrap(), IntervalSet::from_interval(unit()));
        assert!(to_interval_set(&t, 3).is_err());
        assert_eq!(decompose(&s, 2).unwrap().nodes(), t.nodes());
    }

    #[test]
    fn decompose_picks_largest_gap() {
        let s = IntervalSet::normalize(vec![
            iv(int(0), int(1)),
            iv(int(2), int(3)),
            iv(int(10), int(11)),
        ]);
        let t = decompose(&s, 1).unwrap();
        assert_eq!(t.node(0).gap, Some(iv(int(3), int(10))));
    }

    #[test]
    fn decompose_ties_go_left() {
        let s = IntervalSet::normalize(vec![
            iv(int(0), int(1)),
            iv(int(2), int(3)),
            iv(int(4), int(5)),
        ]);
        let t = decompose(&s, 1).unwrap();
        assert_eq!(t.node(0).gap, Some(iv(int(1), int(2))));
    }

    #[test]
    fn decompose_reports_failing_node() {
        let s = IntervalSet::normalize(vec![iv(int(0), int(1)), iv(int(5), int(6)), iv(int(7), int(8))]);
        match decompose(&s, 2) {
            Err(Error::NotEnoughStructure { node, .. }) => assert_eq!(node, "0"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shrunken_child_thickness() {
        // I = [0, 5/2], I0 = [0, 1/2], U = (1/2, 3/2), I1 = [3/2, 5/2]
        let nodes = vec![
            Node { interval: iv(int(0), rat(5, 2)), gap: Some(iv(rat(1, 2), rat(3, 2))) },
            Node { interval: iv(int(0), rat(1, 2)), gap: None },
            Node { interval: iv(rat(3, 2), rat(5, 2)), gap: None },
        ];
        let t = GapTree::from_nodes(nodes, false).unwrap();
        let th = thickness(&t);
        assert_eq!(th.finite(), Some(&rat(1, 2)));
        assert_eq!(th.exactness, Exactness::UpperBound);
    }

    #[test]
    fn depth_zero_is_infinite() {
        let s = IntervalSet::from_interval(unit());
        let t = decompose(&s, 0).unwrap();
        assert_eq!(thickness(&t).value, ThicknessValue::Infinite);
    }

    #[test]
    fn affine_examples() {
        let t = from_middle_ratio(1, 3, unit()).unwrap();
        assert_eq!(affine_tree(&t, &int(1), &int(0)).unwrap(), t);
        let img = affine_tree(&t, &int(3), &int(1)).unwrap();
        assert_eq!(img.hull(), &iv(int(1), int(4)));
        assert_eq!(img.node(0).gap, Some(iv(int(2), int(3))));
        assert!(affine_tree(&t, &int(0), &int(1)).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = from_middle_ratio(2, 3, unit()).unwrap();
        let js = serde_json::to_string(&t).unwrap();
        let back: GapTree = serde_json::from_str(&js).unwrap();
        assert_eq!(back, t);
        let leaf = r#"{"interval":["0","1"],"gap":["1/3","2/3"],"left":{"interval":["0","1/3"],"gap":null},"right":{"interval":["1/2","1"],"gap":null}}"#;
        assert!(serde_json::from_str::<GapTree>(leaf).is_err());
    }

    // ====================================================================
    // Properties
    // ====================================================================

    /// Random tree whose gaps shrink strictly from each node into its
    /// subtree, so largest-gap decomposition recovers it.
    pub(crate) fn random_tree(seed: &[u8], depth: usize) -> GapTree {
        let mut k = 0usize;
        let mut next = |lo: i64, hi: i64| {
            let b = seed[k % seed.len()] as i64;
            k += 1;
            lo + b % (hi - lo + 1)
        };
        let lo = int(next(-5, 5));
        let hull = iv(lo.clone(), &lo + rat(next(1, 9), next(1, 3)));
        let mut nodes = vec![Node { interval: hull, gap: None }];
        for i in 0..level_start(depth) {
            let iv0 = nodes[i].interval.clone();
            let len = iv0.len();
            // gap fraction in [1/5, 1/3], left share of the rest in [1/3, 2/3]
            let g = rat(next(15, 25), 75);
            let share = rat(next(10, 20), 30);
            let gap_len = &len * &g;
            let left_len = (&len - &gap_len) * &share;
            let a = iv0.lo() + &left_len;
            let b = &a + &gap_len;
            nodes[i].gap = Some(iv(a.clone(), b.clone()));
            nodes.push(Node { interval: iv(iv0.lo().clone(), a), gap: None });
            nodes.push(Node { interval: iv(b, iv0.hi().clone()), gap: None });
        }
        GapTree::from_nodes(nodes, false).unwrap()
    }

    proptest! {
        #[test]
        fn node_lengths_add_up(seed in prop::collection::vec(any::<u8>(), 8..40), depth in 1usize..5) {
            let t = random_tree(&seed, depth);
            for i in 0..level_start(depth) {
                let n = t.node(i);
                let sum = t.node(2 * i + 1).interval.len() + n.gap.as_ref().unwrap().len() + t.node(2 * i + 2).interval.len();
                prop_assert_eq!(n.interval.len(), sum);
            }
        }

        #[test]
        fn decompose_inverts_level_sets(seed in prop::collection::vec(any::<u8>(), 8..40), depth in 1usize..5) {
            let t = random_tree(&seed, depth);
            let s = to_interval_set(&t, depth).unwrap();
            prop_assert_eq!(s.len(), 1usize << depth);
            let back = decompose(&s, depth).unwrap();
            prop_assert_eq!(back.nodes(), t.nodes());
            prop_assert_eq!(to_interval_set(&back, depth).unwrap(), s);
        }

        #[test]
        fn thickness_is_affine_invariant(seed in prop::collection::vec(any::<u8>(), 8..40), depth in 1usize..4, l in -20i64..20, d in 1i64..7, t in -20i64..20) {
            prop_assume!(l != 0);
            let tree = random_tree(&seed, depth);
            let img = affine_tree(&tree, &rat(l, d), &rat(t, 3)).unwrap();
            prop_assert_eq!(thickness(&img), thickness(&tree));
            prop_assert!(GapTree::from_nodes(img.nodes().to_vec(), false).is_ok());
        }

        #[test]
        fn middle_ratio_thickness_is_n(n in 1i64..12, depth in 1usize..7) {
            let t = from_middle_ratio(n, depth, unit()).unwrap();
            let th = thickness(&t);
            prop_assert_eq!(th.finite(), Some(&int(n)));
            prop_assert_eq!(th.exactness, Exactness::Exact);
            let m = to_interval_set(&t, depth).unwrap().measure();
            let ratio = Rational::new((2 * n).into(), (2 * n + 1).into());
            prop_assert_eq!(m, num_traits::pow(ratio, depth));
        }
    }
}
