use anyhow::{anyhow, bail, Context};
use erdosavoid::cantor_trees::{from_middle_ratio, thickness, to_interval_set, Exactness};
use erdosavoid::large_scale::{
    certify_linear_escape_adaptive, countable_dilation_avoider, density_mod1, digit_avoider, dubickas_gap_check,
    ell_upper_bound, fractional_set, geometric_escape_via_log, is_p_large, quotient_avoider, validate_sample, PLargeSet,
};
use erdosavoid::rational_intervals::{fmt_rat, int, rat, Interval, IntervalSet, ParamBox, Rational};
use erdosavoid::small_scale::{build_sublacunary_avoider, certify_no_affine_copy, grid_boxes, SequenceSpec, Status};
use erdosavoid::sumset_lab::{build_m_family, glw_intersect_certify, sumset_cover_probe, TargetOutcome};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::args::{self, need, Format, ObjectArgs, Params};
use crate::output;
use crate::sweep::{self, Row, Sweep};

/// Exit code of a finished run: 0 when everything asked for was
/// certified, 2 when inconclusive items remain.
pub type Code = i32;

pub fn sequence(s: &str) -> anyhow::Result<SequenceSpec> {
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (s, None),
    };
    let arg = || arg.ok_or_else(|| anyhow!("sequence {kind} needs a parameter, e.g. {kind}:1/2"));
    Ok(match kind {
        "reciprocal" => SequenceSpec::reciprocal(),
        "linear" => SequenceSpec::linear(),
        "geometric-down" => SequenceSpec::geometric_down(args::rational(arg()?)?)?,
        "geometric-up" => SequenceSpec::geometric_up(args::rational(arg()?)?)?,
        "reciprocal-power" => SequenceSpec::reciprocal_power(args::rational(arg()?)?)?,
        "list" => SequenceSpec::explicit(args::rational_list(arg()?)?)?,
        _ => bail!("unknown sequence {s:?}"),
    })
}

fn seq_or(p: &Params, default: &str) -> anyhow::Result<SequenceSpec> {
    sequence(p.seq.as_deref().unwrap_or(default))
}

fn range_or(v: &Option<String>, default: &str) -> anyhow::Result<Interval> {
    args::interval(v.as_deref().unwrap_or(default))
}

fn int_range_or(v: &Option<String>, default: (i64, i64)) -> anyhow::Result<(i64, i64)> {
    v.as_deref().map(args::int_range).transpose().map(|r| r.unwrap_or(default))
}

fn no_csv(p: &Params, object: &str) -> anyhow::Result<()> {
    if p.format == Format::Csv {
        bail!("{object} has no CSV form; use --format json");
    }
    Ok(())
}

fn unit() -> Interval {
    Interval::spanning(int(0), int(1))
}

fn set_csv(s: &IntervalSet) -> anyhow::Result<Vec<u8>> {
    output::csv_bytes(
        &["lo", "hi"],
        s.intervals().iter().map(|iv| vec![fmt_rat(iv.lo()), fmt_rat(iv.hi())]),
    )
}

fn large_set_csv(e: &PLargeSet) -> anyhow::Result<Vec<u8>> {
    output::csv_bytes(
        &["cell", "lo", "hi"],
        e.cells().iter().enumerate().flat_map(|(k, c)| {
            c.intervals()
                .iter()
                .map(move |iv| vec![k.to_string(), fmt_rat(iv.lo()), fmt_rat(iv.hi())])
        }),
    )
}

// ---------------------------------------------------------------------------
// construct

pub fn construct(a: &ObjectArgs) -> anyhow::Result<Code> {
    let p = &a.params;
    let obj = a.object.as_str();
    let bytes = match obj {
        "sublacunary-avoider" => {
            let seq = seq_or(p, "reciprocal")?;
            let (set, log) = build_sublacunary_avoider(&seq, p.levels.unwrap_or(4))?;
            if p.format == Format::Csv {
                set_csv(&set)?
            } else {
                let measure = fmt_rat(&log.measure);
                output::json_bytes(&output::envelope(
                    "construct",
                    obj,
                    p,
                    json!({ "measure": measure, "log": log, "set": set }),
                )?)?
            }
        }
        "digit-avoider" | "fractional" | "quotient-avoider" | "countable-dilation" => {
            let window = p.window.unwrap_or(16);
            let e = match obj {
                "digit-avoider" => digit_avoider(p.m.unwrap_or(4), window)?,
                "fractional" => fractional_set(&args::rational(need(&p.p, "p")?)?, window)?,
                "quotient-avoider" => quotient_avoider(
                    &args::real(need(&p.y, "y")?, p.bits.unwrap_or(64))?,
                    &args::rational(need(&p.p, "p")?)?,
                    window,
                )?,
                _ => countable_dilation_avoider(
                    &seq_or(p, "linear")?,
                    &args::rational_list(need(&p.c, "c")?)?,
                    &args::rational(p.p.as_deref().unwrap_or("1/2"))?,
                    window,
                )?,
            };
            if p.format == Format::Csv {
                large_set_csv(&e)?
            } else {
                // mean cell measure over the stored window
                let cells = e.cells();
                let total: Rational = cells.iter().map(IntervalSet::measure).sum();
                let mean = total / int(cells.len().max(1) as i64);
                let p_large = is_p_large(&e, e.p());
                output::json_bytes(&output::envelope(
                    "construct",
                    obj,
                    p,
                    json!({ "measure": fmt_rat(&mean), "p_large": p_large, "set": e }),
                )?)?
            }
        }
        "middle-tree" => {
            no_csv(p, obj)?;
            let depth = p.depth.unwrap_or(4);
            let t = from_middle_ratio(p.x_n.unwrap_or(1), depth, unit())?;
            let th = thickness(&t);
            let level = to_interval_set(&t, depth)?;
            output::json_bytes(&output::envelope(
                "construct",
                obj,
                p,
                json!({
                    "measure": fmt_rat(&level.measure()),
                    "thickness": th.finite().map(fmt_rat),
                    "thickness_exact": th.exactness == Exactness::Exact,
                    "tree": t,
                }),
            )?)?
        }
        "m-family" => {
            no_csv(p, obj)?;
            let depth = p.depth.unwrap_or(4);
            let m = build_m_family(
                p.family_n.unwrap_or(1),
                depth,
                int_range_or(&p.n_range, (-3, 2))?,
                int_range_or(&p.l_range, (-16, 16))?,
            )?;
            let measure = fmt_rat(&m.level_measure(depth)?);
            output::json_bytes(&output::envelope(
                "construct",
                obj,
                p,
                json!({ "measure": measure, "family": m }),
            )?)?
        }
        _ => bail!("unknown object for construct: {obj:?}"),
    };
    output::emit(p.out.as_deref(), &bytes)?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// certify

/// Identity of a sweep for resuming: command, object and every parameter.
pub fn fingerprint(command: &str, a: &ObjectArgs) -> anyhow::Result<String> {
    Ok(serde_json::to_string(&json!({ "command": command, "object": a.object, "params": a.params }))?)
}

fn grid_cells(a: &Interval, b: &Interval, grid: &str) -> anyhow::Result<Vec<(Interval, Interval)>> {
    let (na, nb) = args::grid(grid)?;
    let mut out = Vec::with_capacity(na * nb);
    for i in 0..na {
        let (ai, aj) = (int(i as i64) / int(na as i64), int(i as i64 + 1) / int(na as i64));
        let ac = Interval::new(a.lo() + a.len() * ai, a.lo() + a.len() * aj)?;
        for j in 0..nb {
            let (bi, bj) = (int(j as i64) / int(nb as i64), int(j as i64 + 1) / int(nb as i64));
            out.push((ac.clone(), Interval::new(b.lo() + b.len() * bi, b.lo() + b.len() * bj)?));
        }
    }
    Ok(out)
}

fn row(id: usize, a: &Interval, b: &Interval, certified: bool, rule: &str, witness: String) -> Row {
    Row {
        id,
        a: a.clone(),
        b: b.clone(),
        status: if certified { "certified" } else { "inconclusive" }.into(),
        rule: rule.into(),
        witness,
    }
}

/// A point strictly inside `iv` (or `iv` itself when degenerate).
fn interior(rng: &mut ChaCha8Rng, iv: &Interval) -> Rational {
    iv.lo() + iv.len() * rat(rng.gen_range(1..1 << 20), 1 << 20)
}

pub fn certify(a: &ObjectArgs) -> anyhow::Result<Code> {
    let p = &a.params;
    let obj = a.object.as_str();
    let grid = p.grid.as_deref().unwrap_or("10x10");
    let out = p.out.as_deref();
    let fp = fingerprint("certify", a)?;

    let (axes, rows) = match obj {
        "digit-avoider" => {
            let e = digit_avoider(p.m.unwrap_or(4), p.window.unwrap_or(200))?;
            let nmax = p.nmax.unwrap_or(16);
            let cap = p.cap.unwrap_or(4096).max(nmax);
            let samples = p.samples.unwrap_or(0);
            let sw = Sweep {
                fingerprint: fp,
                axes: ["x", "y"],
                boxes: grid_cells(&range_or(&p.x, "0:1")?, &range_or(&p.y, "0:10")?, grid)?,
            };
            let rows = sweep::run(&sw, out, |id, x, y| {
                let c = certify_linear_escape_adaptive(&e, x, y, nmax, cap)?;
                let ok = c.status == Status::Certified;
                let mut r = row(id, x, y, ok, c.rule_name(), format!("nmax={} pieces={}", c.nmax, c.pieces()));
                if ok && samples > 0 {
                    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ id as u64);
                    for _ in 0..samples {
                        let (xs, ys) = (interior(&mut rng, x), interior(&mut rng, y));
                        if !validate_sample(&e, &c, &xs, &ys)? {
                            r.status = "validation_failed".into();
                            break;
                        }
                    }
                }
                Ok(r)
            })?;
            (sw.axes, rows)
        }
        "geometric" => {
            let f = digit_avoider(p.m.unwrap_or(4), p.window.unwrap_or(256))?;
            let nmax = p.nmax.unwrap_or(256);
            let bits = p.bits.unwrap_or(64);
            let sw = Sweep {
                fingerprint: fp,
                axes: ["y", "b"],
                boxes: grid_cells(&range_or(&p.y, "1:2")?, &range_or(&p.b, "3/2:3")?, grid)?,
            };
            let rows = sweep::run(&sw, out, |id, y, b| {
                let c = geometric_escape_via_log(&f, y, b, nmax, bits)?;
                Ok(row(
                    id,
                    y,
                    b,
                    c.status == Status::Certified,
                    c.rule_name(),
                    format!("nmax={} pieces={}", c.nmax, c.pieces()),
                ))
            })?;
            (sw.axes, rows)
        }
        "sublacunary-avoider" => {
            let seq = seq_or(p, "reciprocal")?;
            let (e, _) = build_sublacunary_avoider(&seq, p.levels.unwrap_or(4))?;
            let nmax = p.nmax.unwrap_or(64);
            let (lam, t) = (range_or(&p.lambda, "1/2:2")?, range_or(&p.t, "-1:1")?);
            let (na, nb) = args::grid(grid)?;
            let boxes: Vec<(Interval, Interval)> = grid_boxes(&lam, &t, na, nb)?
                .into_iter()
                .map(|b| (b.lambda().clone(), b.t().clone()))
                .collect();
            let sw = Sweep { fingerprint: fp, axes: ["lambda", "t"], boxes };
            let rows = sweep::run(&sw, out, |id, l, t| {
                let b = ParamBox::new(l.clone(), t.clone())?;
                let c = certify_no_affine_copy(&e, &seq, std::slice::from_ref(&b), nmax)
                    .pop()
                    .context("empty certificate list")?;
                let w = c.witness_n.map(|n| format!("n={n}")).unwrap_or_default();
                Ok(row(id, l, t, c.status == Status::Certified, "term_in_gap", w))
            })?;
            (sw.axes, rows)
        }
        "glw" => {
            // a witness needs boxes narrower than the level-depth components of X
            let depth = p.depth.unwrap_or(1);
            let x = from_middle_ratio(p.x_n.unwrap_or(2), depth, unit())?;
            let m = build_m_family(
                p.family_n.unwrap_or(1),
                depth,
                int_range_or(&p.n_range, (-3, 3))?,
                int_range_or(&p.l_range, (-33, 32))?,
            )?;
            let budget = p.split_budget.unwrap_or(16);
            let sw = Sweep {
                fingerprint: fp,
                axes: ["lambda", "t"],
                boxes: grid_cells(&range_or(&p.lambda, "1:2")?, &range_or(&p.t, "0:1")?, grid)?,
            };
            let rows = sweep::run(&sw, out, |id, l, t| {
                let tr = glw_intersect_certify(&x, &m, &ParamBox::new(l.clone(), t.clone())?, depth, budget)?;
                let (c, u, n) = tr.counts();
                Ok(row(id, l, t, u == 0 && n == 0, tr.status_name(), format!("certified={c} unwitnessed={u} not_applicable={n}")))
            })?;
            (sw.axes, rows)
        }
        _ => bail!("unknown object for certify: {obj:?}"),
    };

    let bytes = sweep::render(&rows, axes, p.format, obj, p)?;
    output::emit(out, &bytes)?;
    sweep::finish(out)?;
    let certified = rows.iter().filter(|r| r.certified()).count();
    if out.is_some() {
        println!("{}/{} boxes certified", certified, rows.len());
    }
    Ok(if certified == rows.len() { 0 } else { 2 })
}

// ---------------------------------------------------------------------------
// probe

pub fn probe(a: &ObjectArgs) -> anyhow::Result<Code> {
    let p = &a.params;
    let obj = a.object.as_str();
    let bits = p.bits.unwrap_or(128);
    let mut code = 0;
    let bytes = match obj {
        "mod1" => {
            no_csv(p, obj)?;
            let seq = seq_or(p, "linear")?;
            let y = args::real(need(&p.y, "y")?, bits)?;
            let prof = density_mod1(&seq, &y, *need(&p.big_n, "N")?)?;
            let hi = fmt_rat(&prof.max_gap_hi());
            output::json_bytes(&output::envelope(
                "probe",
                obj,
                p,
                json!({ "exact": prof.exact(), "max_gap_hi": hi, "profile": prof }),
            )?)?
        }
        "dubickas" => {
            no_csv(p, obj)?;
            let y = args::real(need(&p.y, "y")?, bits)?;
            let rep = dubickas_gap_check(&y, *need(&p.big_n, "N")?)?;
            output::json_bytes(&output::envelope("probe", obj, p, rep)?)?
        }
        "ell" => {
            no_csv(p, obj)?;
            let f = args::int_list(need(&p.f, "f")?)?;
            let b = ell_upper_bound(
                &f,
                p.max_deg.unwrap_or(6),
                &args::rational(p.step.as_deref().unwrap_or("1/64"))?,
                &args::rational(p.bound.as_deref().unwrap_or("2"))?,
            )?;
            output::json_bytes(&output::envelope("probe", obj, p, b)?)?
        }
        "sumset" => {
            let depth = p.depth.unwrap_or(8);
            let x = from_middle_ratio(p.x_n.unwrap_or(2), depth, unit())?;
            let m = build_m_family(
                p.family_n.unwrap_or(1),
                depth,
                int_range_or(&p.n_range, (-3, 2))?,
                int_range_or(&p.l_range, (-16, 16))?,
            )?;
            let lambda = args::rational(need(&p.lambda, "lambda")?)?;
            let range = range_or(&p.range, "-2:2")?;
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            let targets: Vec<Rational> = (0..p.targets.unwrap_or(100))
                .map(|_| range.lo() + range.len() * rat(rng.gen_range(0..=1 << 20), 1 << 20))
                .collect();
            let rep = sumset_cover_probe(&x, &m, &lambda, &targets, depth)?;
            if rep.certified < rep.probed {
                code = 2;
            }
            match p.format {
                Format::Csv => output::csv_bytes(
                    &["target", "status", "rule", "nearest_miss"],
                    rep.targets.iter().map(|t| {
                        vec![
                            fmt_rat(&t.target),
                            serde_json::to_value(t.status)
                                .ok()
                                .and_then(|v| v.as_str().map(str::to_string))
                                .unwrap_or_default(),
                            t.witness
                                .as_ref()
                                .and_then(|w| serde_json::to_value(w.rule).ok())
                                .and_then(|v| v.as_str().map(str::to_string))
                                .unwrap_or_default(),
                            t.nearest_miss.as_ref().map(fmt_rat).unwrap_or_default(),
                        ]
                    }),
                )?,
                Format::Json => {
                    let unresolved = rep.targets.iter().filter(|t| t.status == TargetOutcome::Unresolved).count();
                    output::json_bytes(&output::envelope(
                        "probe",
                        obj,
                        p,
                        json!({
                            "total": rep.probed,
                            "certified": rep.certified,
                            "unresolved": unresolved,
                            "certified_fraction": fmt_rat(&rep.certified_fraction()),
                            "report": rep,
                        }),
                    )?)?
                }
            }
        }
        _ => bail!("unknown object for probe: {obj:?}"),
    };
    output::emit(p.out.as_deref(), &bytes)?;
    Ok(code)
}
