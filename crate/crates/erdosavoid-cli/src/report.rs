//! Aggregation of earlier outputs. The summary depends only on the input
//! bytes and their order on the command line.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context};
use erdosavoid::rational_intervals::{fmt_rat, int, Rational};
use serde::Serialize;
use serde_json::Value;

use crate::args::{self, ReportArgs};
use crate::output;

#[derive(Debug, Default, Serialize)]
struct FileSummary {
    path: String,
    kind: String,
    object: Option<String>,
    total: usize,
    certified: usize,
}

#[derive(Debug, Serialize)]
struct LedgerEntry {
    path: String,
    object: Option<String>,
    measure: String,
}

#[derive(Debug, Serialize)]
struct Totals {
    total: usize,
    certified: usize,
    certified_fraction: String,
}

#[derive(Debug, Serialize)]
struct Summary {
    kind: &'static str,
    files: Vec<FileSummary>,
    totals: Totals,
    by_status: BTreeMap<String, usize>,
    measure_ledger: Vec<LedgerEntry>,
}

struct Acc {
    files: Vec<FileSummary>,
    by_status: BTreeMap<String, usize>,
    ledger: Vec<LedgerEntry>,
}

fn mismatch(path: &str, why: impl std::fmt::Display) -> anyhow::Error {
    anyhow!("schema mismatch in {path}: {why}")
}

fn tally<'a>(acc: &mut Acc, f: &mut FileSummary, statuses: impl Iterator<Item = &'a str>) {
    for s in statuses {
        f.total += 1;
        if s == "certified" {
            f.certified += 1;
        }
        *acc.by_status.entry(s.to_string()).or_default() += 1;
    }
}

fn read_json(acc: &mut Acc, path: &str, text: &str) -> anyhow::Result<()> {
    let v: Value = serde_json::from_str(text).map_err(|e| mismatch(path, e))?;
    let kind = v.get("kind").and_then(Value::as_str).ok_or_else(|| mismatch(path, "no \"kind\" field"))?;
    let object = v.get("object").and_then(Value::as_str).map(str::to_string);
    let mut f = FileSummary {
        path: path.to_string(),
        kind: kind.to_string(),
        object: object.clone(),
        ..Default::default()
    };
    match kind {
        "sweep" => {
            let rows = v.get("rows").and_then(Value::as_array).ok_or_else(|| mismatch(path, "sweep without rows"))?;
            let statuses: Vec<&str> = rows
                .iter()
                .map(|r| r.get("status").and_then(Value::as_str).ok_or_else(|| mismatch(path, "row without status")))
                .collect::<anyhow::Result<_>>()?;
            tally(acc, &mut f, statuses.into_iter());
        }
        "probe" => {
            // coverage probes carry counts; other probes are listed only
            if let (Some(t), Some(c)) = (
                v.get("total").and_then(Value::as_u64),
                v.get("certified").and_then(Value::as_u64),
            ) {
                if c > t {
                    return Err(mismatch(path, "certified exceeds total"));
                }
                f.total = t as usize;
                f.certified = c as usize;
                *acc.by_status.entry("certified".into()).or_default() += c as usize;
                *acc.by_status.entry("not_certified".into()).or_default() += (t - c) as usize;
            }
        }
        "construct" => {
            let m = v.get("measure").and_then(Value::as_str).ok_or_else(|| mismatch(path, "construct without measure"))?;
            let m = args::rational(m).map_err(|e| mismatch(path, e))?;
            acc.ledger.push(LedgerEntry {
                path: path.to_string(),
                object,
                measure: fmt_rat(&m),
            });
        }
        other => bail!(mismatch(path, format!("unknown kind {other:?}"))),
    }
    acc.files.push(f);
    Ok(())
}

fn read_csv(acc: &mut Acc, path: &str, text: &str) -> anyhow::Result<()> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| mismatch(path, e))?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let records: Vec<csv::StringRecord> = r.records().collect::<Result<_, _>>().map_err(|e| mismatch(path, e))?;
    if let Some(s) = col("status") {
        let mut f = FileSummary {
            path: path.to_string(),
            kind: "sweep".into(),
            ..Default::default()
        };
        tally(acc, &mut f, records.iter().map(|rec| rec.get(s).unwrap_or("")));
        acc.files.push(f);
        return Ok(());
    }
    let (Some(lo), Some(hi)) = (col("lo"), col("hi")) else {
        bail!(mismatch(path, format!("unrecognised columns {header:?}")));
    };
    // a set, possibly split into unit cells; the ledger gets the mean cell measure
    let cell = col("cell");
    let mut total = Rational::from_integer(0.into());
    let mut cells = std::collections::BTreeSet::new();
    for rec in &records {
        let a = args::rational(rec.get(lo).unwrap_or("")).map_err(|e| mismatch(path, e))?;
        let b = args::rational(rec.get(hi).unwrap_or("")).map_err(|e| mismatch(path, e))?;
        total += b - a;
        if let Some(c) = cell {
            cells.insert(rec.get(c).unwrap_or("").to_string());
        }
    }
    let measure = total / int(cells.len().max(1) as i64);
    acc.ledger.push(LedgerEntry {
        path: path.to_string(),
        object: None,
        measure: fmt_rat(&measure),
    });
    acc.files.push(FileSummary {
        path: path.to_string(),
        kind: "construct".into(),
        ..Default::default()
    });
    Ok(())
}

pub fn report(a: &ReportArgs) -> anyhow::Result<i32> {
    let mut acc = Acc {
        files: Vec::new(),
        by_status: BTreeMap::new(),
        ledger: Vec::new(),
    };
    for p in &a.paths {
        let name = p.display().to_string();
        let text = std::fs::read_to_string(p).with_context(|| format!("reading {name}"))?;
        let is_json = p.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            read_json(&mut acc, &name, &text)?;
        } else {
            read_csv(&mut acc, &name, &text)?;
        }
    }
    let total: usize = acc.files.iter().map(|f| f.total).sum();
    let certified: usize = acc.files.iter().map(|f| f.certified).sum();
    let frac = if total == 0 {
        "0/1".to_string()
    } else {
        fmt_rat(&(int(certified as i64) / int(total as i64)))
    };
    let summary = Summary {
        kind: "report",
        files: acc.files,
        totals: Totals {
            total,
            certified,
            certified_fraction: frac,
        },
        by_status: acc.by_status,
        measure_ledger: acc.ledger,
    };
    let bytes = output::json_bytes(&serde_json::to_value(&summary)?)?;
    output::emit(a.out.as_deref().map(Path::new), &bytes)?;
    Ok(0)
}
