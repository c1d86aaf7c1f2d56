use super::*;
use crate::cantor_trees::{from_side_ratio, Exactness, ThicknessValue};
use crate::rational_intervals::rat;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit() -> Interval {
    Interval::new(int(0), int(1)).unwrap()
}

fn fifth(depth: usize) -> GapTree {
    from_middle_ratio(2, depth, unit()).unwrap()
}

/// Thickness 1/8: pieces of length 1/10 at both ends.
fn thin(depth: usize) -> GapTree {
    from_side_ratio(&rat(1, 10), depth, unit()).unwrap()
}

fn point_box(l: Rational, t: Rational) -> ParamBox {
    ParamBox::point(l, t).unwrap()
}

fn wide_family(depth: usize) -> MFamily {
    build_m_family(1, depth, (-3, 3), (-33, 32)).unwrap()
}

#[test]
fn family_members() {
    let m = build_m_family(1, 4, (0, 0), (0, 0)).unwrap();
    assert_eq!(*m.member(0, 0).unwrap(), *m.base());
    assert_eq!(m.base().hull(), &unit());
    let m = build_m_family(2, 5, (-2, 3), (-3, 3)).unwrap();
    assert_eq!(m.member(2, -1).unwrap().hull(), &Interval::new(int(-4), int(0)).unwrap());
    assert!(m.member(4, 0).is_err());
    for (n, l) in [(-2, 3), (0, -3), (3, 1)] {
        let t = thickness(&m.member(n, l).unwrap());
        assert_eq!(t.value, ThicknessValue::Finite(int(2)));
        assert_eq!(t.exactness, Exactness::Exact);
    }
    assert_eq!(m.materialized(), 4);
    let v = serde_json::to_value(&m).unwrap();
    assert_eq!(v["N"], 2);
    assert_eq!(v["n_range"][0], -2);
    let back: MFamily = serde_json::from_value(v).unwrap();
    assert_eq!(back, m);
}

#[test]
fn member_level_measures() {
    let m = build_m_family(1, 6, (-1, 1), (-2, 1)).unwrap();
    let mut total_prev: Option<Rational> = None;
    for d in 0..=6 {
        let ratio = rat(2, 3);
        let mut sum = Rational::zero();
        for (n, l) in m.frames() {
            let meas = to_interval_set(&m.member(n, l).unwrap(), d).unwrap().measure();
            let mut expect = pow2(n);
            for _ in 0..d {
                expect *= &ratio;
            }
            assert_eq!(meas, expect);
            sum += meas;
        }
        let total = m.level_measure(d).unwrap();
        assert_eq!(total, sum);
        if let Some(p) = total_prev {
            assert!(total < p);
        }
        total_prev = Some(total);
    }
    assert!(m.level_measure(7).is_err());
}

#[test]
fn frames() {
    assert_eq!(select_frame(&int(1), &rat(1, 2)).unwrap(), (0, 0));
    assert_eq!(select_frame(&int(3), &int(-1)).unwrap(), (2, -1));
    assert_eq!(select_frame(&int(-3), &int(-1)).unwrap(), (2, -1));
    for k in -5..6 {
        assert_eq!(select_frame(&pow2(k), &int(0)).unwrap().0, k);
    }
    // right-closed in t
    assert_eq!(select_frame(&int(1), &int(1)).unwrap(), (0, 0));
    assert_eq!(select_frame(&int(1), &int(0)).unwrap(), (0, -1));
    assert!(select_frame(&int(0), &int(0)).is_err());
}

#[test]
fn glw_unit_map_has_a_common_point() {
    let x = fifth(8);
    let m = wide_family(8);
    let tr = glw_intersect_certify(&x, &m, &point_box(int(1), int(0)), 8, 16).unwrap();
    match &tr.outcome {
        GlwOutcome::Certified { frame, witness } => {
            assert_eq!(*frame, Frame { n: 0, l: -1 });
            // independent oracle: intersection of the two level-8 sets
            let xs = to_interval_set(&x, 8).unwrap();
            let ms = to_interval_set(&m.member(0, -1).unwrap(), 8).unwrap();
            let both = xs.intersection(&ms);
            assert!(!both.is_empty());
            assert!(both.intervals().iter().any(|c| c.contains_interval(witness)));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(glw_recheck(&x, &m, &tr).unwrap());
}

#[test]
fn glw_splits_at_frame_boundaries() {
    let x = fifth(6);
    let m = wide_family(6);
    let b = ParamBox::new(
        Interval::new(rat(3, 2), rat(5, 2)).unwrap(),
        Interval::new(rat(1, 4), rat(1, 2)).unwrap(),
    )
    .unwrap();
    let tr = glw_intersect_certify(&x, &m, &b, 6, 16).unwrap();
    let leaves = tr.leaves();
    assert_eq!(leaves.len(), 2);
    let frames: Vec<Frame> = leaves
        .iter()
        .map(|l| match &l.outcome {
            GlwOutcome::Certified { frame, .. } | GlwOutcome::ApplicableUnwitnessed { frame } => *frame,
            other => panic!("unexpected {other:?}"),
        })
        .collect();
    assert_eq!(frames, vec![Frame { n: 1, l: 0 }, Frame { n: 2, l: 0 }]);
    assert!(glw_recheck(&x, &m, &tr).unwrap());
    assert!(matches!(
        glw_intersect_certify(&x, &m, &b, 6, 1),
        Err(Error::SplitBudget(1))
    ));
    let s = serde_json::to_string(&tr).unwrap();
    let back: GlwTrace = serde_json::from_str(&s).unwrap();
    assert_eq!(back, tr);
}

#[test]
fn glw_rejects_bad_input() {
    let m = wide_family(6);
    assert!(glw_intersect_certify(&thin(6), &m, &point_box(int(1), int(0)), 6, 4).is_err());
    let shifted = affine_tree(&fifth(6), &int(1), &int(1)).unwrap();
    assert!(glw_intersect_certify(&shifted, &m, &point_box(int(1), int(0)), 6, 4).is_err());
    assert!(glw_intersect_certify(&fifth(6), &m, &point_box(int(1), int(0)), 7, 4).is_err());
    // outside the window
    assert!(glw_intersect_certify(&fifth(6), &m, &point_box(int(64), int(0)), 6, 4).is_err());
}

#[test]
fn glw_point_sweep() {
    let x = fifth(8);
    let m = wide_family(8);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut certified = 0;
    for _ in 0..100 {
        let mag = rat(rng.gen_range(1..=64), 8);
        let lambda = if rng.gen_bool(0.5) { -mag } else { mag };
        let t = rat(rng.gen_range(-400..=400), 100);
        let tr = glw_intersect_certify(&x, &m, &point_box(lambda, t), 8, 4).unwrap();
        let (c, u, na) = tr.counts();
        assert_eq!(na, 0);
        certified += c;
        assert_eq!(c + u, 1);
        assert!(glw_recheck(&x, &m, &tr).unwrap());
    }
    assert_eq!(certified, 100);
}

#[test]
fn glw_small_boxes() {
    let x = fifth(8);
    let m = wide_family(8);
    let b = ParamBox::new(
        Interval::new(int(1), rat(65, 64)).unwrap(),
        Interval::new(rat(1, 8), rat(9, 64)).unwrap(),
    )
    .unwrap();
    let tr = glw_intersect_certify(&x, &m, &b, 8, 8).unwrap();
    assert_eq!(tr.counts().2, 0);
    assert!(glw_recheck(&x, &m, &tr).unwrap());
}

#[test]
fn endpoint_targets_are_covered() {
    let x = thin(6);
    let m = build_m_family(1, 6, (0, 0), (0, 0)).unwrap();
    let rep = sumset_cover_probe(&x, &m, &int(1), &[int(1), int(0)], 6).unwrap();
    assert_eq!(rep.certified, 2);
    assert_eq!(rep.targets[0].witness.as_ref().unwrap().rule, WitnessRule::Endpoint);
}

#[test]
fn empty_family_covers_nothing() {
    let m = build_m_family(1, 4, (0, -1), (0, 0)).unwrap();
    assert!(m.is_empty());
    let rep = sumset_cover_probe(&fifth(4), &m, &int(1), &[int(0), rat(1, 2)], 4).unwrap();
    assert_eq!(rep.certified, 0);
    assert_eq!(rep.probed, 2);
    assert!(rep.targets.iter().all(|t| t.nearest_miss.is_none() && t.status == TargetOutcome::Missed));
    assert_eq!(rep.window_measure, int(0));
}

#[test]
fn thick_probe_certifies_most_targets() {
    let x = fifth(10);
    let m = build_m_family(1, 10, (-3, 2), (-16, 16)).unwrap();
    let targets: Vec<Rational> = (0..200).map(|i| rat(-2, 1) + rat(4 * i + 1, 200)).collect();
    let rep = sumset_cover_probe(&x, &m, &rat(3, 2), &targets, 10).unwrap();
    assert_eq!(rep.probed, 200);
    assert!(rep.certified <= rep.probed);
    // the lemma covers every target whose frame member lies in the window
    assert_eq!(rep.certified, 200, "{:?}", rep.failures().next());
    let json = serde_json::to_value(&rep).unwrap();
    assert_eq!(json["lambda"], "3/2");
    assert_eq!(json["targets"][0]["status"], "certified");
}

#[test]
fn thin_probe_reports_misses_with_distances() {
    let x = thin(6);
    let m = build_m_family(1, 6, (-1, 1), (-4, 4)).unwrap();
    let targets: Vec<Rational> = (0..40).map(|i| rat(i, 20)).collect();
    let rep = sumset_cover_probe(&x, &m, &rat(1, 7), &targets, 6).unwrap();
    assert!(rep.missed > 0);
    let xs = to_interval_set(&x, 6).unwrap();
    for f in rep.failures() {
        let d = f.nearest_miss.clone().unwrap();
        if f.status == TargetOutcome::Missed {
            assert!(d.is_positive());
            // oracle: no member level set meets r − λ·(member) within X
            for (n, l) in m.frames() {
                let ms = to_interval_set(&m.member(n, l).unwrap(), 6).unwrap();
                let img = ms.affine_image(&-rat(1, 7), &f.target).unwrap();
                assert!(xs.intersection(&img).is_empty());
            }
        } else {
            assert!(d.is_zero());
        }
    }
}

#[test]
fn escapes_match_coverage_gaps() {
    let x = thin(5);
    let m = build_m_family(1, 5, (-2, 1), (-8, 8)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut escapes = 0;
    for _ in 0..200 {
        let lp = rat(rng.gen_range(1..=40), 40);
        let t = rat(rng.gen_range(-100..=100), 50);
        let esc = certify_affine_escape(&x, &m, &lp, &t, 5).unwrap();
        let r = -&t / &lp;
        let lambda = -lp.recip();
        let rep = sumset_cover_probe(&x, &m, &lambda, &[r], 5).unwrap();
        assert_eq!(esc, rep.targets[0].status == TargetOutcome::Missed);
        escapes += esc as usize;
    }
    assert!(escapes > 0);
}

proptest! {
    #[test]
    fn frame_is_unique(ln in -2000i64..2000, ld in 1i64..300, tn in -2000i64..2000, td in 1i64..300) {
        prop_assume!(ln != 0);
        let lambda = rat(ln, ld);
        let t = rat(tn, td);
        let (n, l) = select_frame(&lambda, &t).unwrap();
        let a = lambda.abs();
        prop_assert!(pow2(n - 1) < a && a <= pow2(n));
        prop_assert!(pow2(n) * int(l) < t && t <= pow2(n) * int(l + 1));
        for dn in [-1i64, 1] {
            let m = n + dn;
            prop_assert!(!(pow2(m - 1) < a && a <= pow2(m)));
        }
    }

    #[test]
    fn certified_traces_recheck(li in 1i64..64, ti in -32i64..32, neg in any::<bool>()) {
        let x = fifth(6);
        let m = build_m_family(1, 6, (-3, 3), (-33, 32)).unwrap();
        let lambda = if neg { -rat(li, 8) } else { rat(li, 8) };
        let tr = glw_intersect_certify(&x, &m, &point_box(lambda, rat(ti, 8)), 6, 4).unwrap();
        prop_assert_eq!(tr.counts().2, 0);
        prop_assert!(glw_recheck(&x, &m, &tr).unwrap());
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn coverage_monotone(seed in any::<u64>(), lnum in 1i64..16) {
        let x = thin(6);
        let lambda = rat(lnum, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let targets: Vec<Rational> = (0..10).map(|_| rat(rng.gen_range(-200..200), 100)).collect();
        let small = build_m_family(1, 6, (-1, 0), (-2, 2)).unwrap();
        let big = build_m_family(1, 6, (-2, 1), (-4, 4)).unwrap();
        let a = sumset_cover_probe(&x, &small, &lambda, &targets, 4).unwrap();
        let b = sumset_cover_probe(&x, &small, &lambda, &targets, 6).unwrap();
        let c = sumset_cover_probe(&x, &big, &lambda, &targets, 6).unwrap();
        prop_assert!(a.certified <= b.certified);
        prop_assert!(b.certified <= c.certified);
    }
}
