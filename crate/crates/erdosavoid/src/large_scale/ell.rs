//! Bounded search for `ℓ(b) = inf L(fg)` over polynomials `g` with constant
//! term 1 or leading coefficient 1, `L` the sum of absolute coefficients.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational_intervals::{int, ratstr, ratvec, Rational};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EllBound {
    /// An upper bound on the infimum, never the infimum itself.
    #[serde(with = "ratstr")]
    pub value: Rational,
    /// Best `g`, constant term first. With `leading_one` the coefficients are
    /// listed reversed, i.e. this is the reversal of the actual `g`.
    #[serde(with = "ratvec")]
    pub g: Vec<Rational>,
    pub leading_one: bool,
}

fn mul(f: &[Rational], g: &[Rational]) -> Vec<Rational> {
    let mut out = vec![Rational::zero(); f.len() + g.len() - 1];
    for (i, a) in f.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, b) in g.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn l1(v: &[Rational]) -> Rational {
    v.iter().map(|c| c.abs()).sum()
}

/// `L(fg)`, coefficients constant term first.
pub fn l1_of_product(f: &[Rational], g: &[Rational]) -> Rational {
    if f.is_empty() || g.is_empty() {
        return Rational::zero();
    }
    l1(&mul(f, g))
}

/// Minimizer of `sum_j |base_j + c f_{j-i}|` over real `c` (weighted median
/// of the breakpoints).
fn weighted_median(base: &[Rational], f: &[Rational], i: usize) -> Rational {
    let mut pts: Vec<(Rational, Rational)> = f
        .iter()
        .enumerate()
        .filter(|(_, fk)| !fk.is_zero())
        .map(|(k, fk)| (-&base[i + k] / fk, fk.abs()))
        .collect();
    pts.sort();
    let total: Rational = pts.iter().map(|p| p.1.clone()).sum();
    let mut acc = Rational::zero();
    for (c, w) in &pts {
        acc += w;
        if int(2) * &acc >= total {
            return c.clone();
        }
    }
    Rational::zero()
}

/// Coordinate descent on the grid `step Z ∩ [-bound, bound]`, `g_0 = 1`
/// fixed. Only strict improvements are taken, so the value never rises.
fn descend(f: &[Rational], g: &mut Vec<Rational>, step: &Rational, bound: &Rational) -> Rational {
    let cap = (bound / step).floor() * step;
    let mut prod = mul(f, g);
    let mut best = l1(&prod);
    for _ in 0..200 {
        let mut improved = false;
        for i in 1..g.len() {
            // remove coordinate i
            let old = g[i].clone();
            let mut base = prod.clone();
            for (k, fk) in f.iter().enumerate() {
                base[i + k] -= fk * &old;
            }
            let c = weighted_median(&base, f, i);
            let lo = (&c / step).floor() * step;
            let hi = (&c / step).ceil() * step;
            for cand in [lo, hi] {
                let cand = cand.max(-cap.clone()).min(cap.clone());
                let mut trial = base.clone();
                for (k, fk) in f.iter().enumerate() {
                    trial[i + k] += fk * &cand;
                }
                let v = l1(&trial);
                if v < best {
                    best = v;
                    g[i] = cand;
                    prod = trial;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    best
}

/// Best value over degrees `<= max_deg` and grids `step 2^k` (coarse to
/// fine, each warm-started from the coarser grid and the lower degree).
fn branch(f: &[Rational], max_deg: usize, step: &Rational, bound: &Rational) -> (Rational, Vec<Rational>) {
    let mut steps = vec![step.clone()];
    while &(steps.last().unwrap() * int(2)) <= bound {
        let next = steps.last().unwrap() * int(2);
        steps.push(next);
    }
    steps.reverse();
    // best[k] for the previous degree
    let mut prev: Vec<(Rational, Vec<Rational>)> = Vec::new();
    for d in 0..=max_deg {
        let mut cur: Vec<(Rational, Vec<Rational>)> = Vec::with_capacity(steps.len());
        for (k, s) in steps.iter().enumerate() {
            let mut start: Vec<Rational> = if d == 0 {
                vec![int(1)]
            } else {
                let mut g = prev[k].1.clone();
                g.push(Rational::zero());
                g
            };
            if k > 0 && cur[k - 1].0 < l1_of_product(f, &start) {
                start = cur[k - 1].1.clone();
            }
            let v = descend(f, &mut start, s, bound);
            cur.push((v, start));
        }
        prev = cur;
    }
    prev.pop().expect("at least one grid")
}

/// Upper bound on `ℓ(b)` for `b` with minimal polynomial `f` (integer
/// coefficients, constant term first).
pub fn ell_upper_bound(f: &[i64], max_deg: usize, step: &Rational, bound: &Rational) -> Result<EllBound> {
    let mut f: Vec<Rational> = f.iter().map(|&c| int(c)).collect();
    while f.last().is_some_and(|c| c.is_zero()) {
        f.pop();
    }
    if f.is_empty() {
        return Err(Error::InvalidParameter("f must be nonzero".into()));
    }
    if !step.is_positive() || bound.is_negative() {
        return Err(Error::InvalidParameter("grid step must be positive and bound non-negative".into()));
    }
    // leading coefficient 1 on g is constant term 1 on the reversal, and
    // L(fg) = L(rev f rev g)
    let mut rev: Vec<Rational> = f.iter().rev().cloned().collect();
    while rev.last().is_some_and(|c| c.is_zero()) {
        rev.pop();
    }
    while rev.first().is_some_and(|c| c.is_zero()) {
        rev.remove(0);
    }
    let (v0, g0) = branch(&f, max_deg, step, bound);
    let (v1, g1) = branch(&rev, max_deg, step, bound);
    Ok(if v1 < v0 {
        EllBound {
            value: v1,
            g: g1,
            leading_one: true,
        }
    } else {
        EllBound {
            value: v0,
            g: g0,
            leading_one: false,
        }
    })
}
