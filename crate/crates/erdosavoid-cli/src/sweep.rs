//! Resumable box sweeps.
//!
//! Finished rows are appended to `<out>.partial` one JSON line at a time
//! after each chunk. A rerun with the same fingerprint skips the ids found
//! there; the final file is written in id order and the partial removed.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use erdosavoid::rational_intervals::Interval;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::Format;
use crate::output;

const CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub id: usize,
    pub a: Interval,
    pub b: Interval,
    pub status: String,
    pub rule: String,
    pub witness: String,
}

impl Row {
    pub fn certified(&self) -> bool {
        self.status == "certified"
    }
}

pub struct Sweep {
    /// Must match for a partial file to be reused.
    pub fingerprint: String,
    pub axes: [&'static str; 2],
    pub boxes: Vec<(Interval, Interval)>,
}

fn partial_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

#[derive(Serialize, Deserialize)]
struct Header {
    fingerprint: String,
}

/// Rows from a matching partial file. A torn last line is dropped.
fn load_partial(path: &Path, fingerprint: &str, total: usize) -> anyhow::Result<Option<BTreeMap<usize, Row>>> {
    let Ok(f) = File::open(path) else {
        return Ok(None);
    };
    let mut lines = BufReader::new(f).lines();
    let header: Option<Header> = match lines.next() {
        Some(l) => serde_json::from_str(&l?).ok(),
        None => None,
    };
    if header.map(|h| h.fingerprint) != Some(fingerprint.to_string()) {
        eprintln!("note: {} belongs to a different run; starting over", path.display());
        return Ok(None);
    }
    let mut done = BTreeMap::new();
    for l in lines {
        match serde_json::from_str::<Row>(&l?) {
            Ok(r) if r.id < total => {
                done.insert(r.id, r);
            }
            _ => break,
        }
    }
    Ok(Some(done))
}

/// Runs `eval` on every box not already done and returns all rows in id
/// order. Without `out` nothing is persisted along the way.
pub fn run<F>(sweep: &Sweep, out: Option<&Path>, eval: F) -> anyhow::Result<Vec<Row>>
where
    F: Fn(usize, &Interval, &Interval) -> anyhow::Result<Row> + Sync,
{
    let total = sweep.boxes.len();
    let partial = out.map(partial_path);
    let mut done = match &partial {
        Some(p) => load_partial(p, &sweep.fingerprint, total)?.unwrap_or_default(),
        None => BTreeMap::new(),
    };
    let mut log = match &partial {
        Some(p) => {
            // rewrite so a torn tail or stale header does not linger
            let mut f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            writeln!(f, "{}", serde_json::to_string(&Header { fingerprint: sweep.fingerprint.clone() })?)?;
            for r in done.values() {
                writeln!(f, "{}", serde_json::to_string(r)?)?;
            }
            f.sync_all()?;
            Some(OpenOptions::new().append(true).open(p)?)
        }
        None => None,
    };
    if !done.is_empty() {
        eprintln!("resuming: {} of {total} boxes already done", done.len());
    }
    let todo: Vec<usize> = (0..total).filter(|i| !done.contains_key(i)).collect();
    for chunk in todo.chunks(CHUNK) {
        let rows: Vec<Row> = chunk
            .par_iter()
            .map(|&i| eval(i, &sweep.boxes[i].0, &sweep.boxes[i].1))
            .collect::<anyhow::Result<_>>()?;
        if let Some(f) = log.as_mut() {
            let mut buf = String::new();
            for r in &rows {
                buf.push_str(&serde_json::to_string(r)?);
                buf.push('\n');
            }
            f.write_all(buf.as_bytes())?;
            f.sync_data()?;
        }
        done.extend(rows.into_iter().map(|r| (r.id, r)));
    }
    Ok(done.into_values().collect())
}

/// Final artifact bytes for a finished sweep.
pub fn render(
    rows: &[Row],
    axes: [&str; 2],
    format: Format,
    object: &str,
    params: &crate::args::Params,
) -> anyhow::Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let h: Vec<String> = vec![
                "id".into(),
                format!("{}_lo", axes[0]),
                format!("{}_hi", axes[0]),
                format!("{}_lo", axes[1]),
                format!("{}_hi", axes[1]),
                "status".into(),
                "rule".into(),
                "witness".into(),
            ];
            let h: Vec<&str> = h.iter().map(String::as_str).collect();
            output::csv_bytes(
                &h,
                rows.iter().map(|r| {
                    vec![
                        r.id.to_string(),
                        fmt(r.a.lo()),
                        fmt(r.a.hi()),
                        fmt(r.b.lo()),
                        fmt(r.b.hi()),
                        r.status.clone(),
                        r.rule.clone(),
                        r.witness.clone(),
                    ]
                }),
            )
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "id": r.id,
                        axes[0]: r.a,
                        axes[1]: r.b,
                        "status": r.status,
                        "rule": r.rule,
                        "witness": r.witness,
                    })
                })
                .collect();
            let certified = rows.iter().filter(|r| r.certified()).count();
            let doc = output::envelope(
                "sweep",
                object,
                params,
                json!({ "axes": axes, "total": rows.len(), "certified": certified, "rows": items }),
            )?;
            output::json_bytes(&doc)
        }
    }
}

fn fmt(r: &erdosavoid::rational_intervals::Rational) -> String {
    erdosavoid::rational_intervals::fmt_rat(r)
}

/// Removes the partial log once the final file is in place.
pub fn finish(out: Option<&Path>) -> anyhow::Result<()> {
    if let Some(p) = out.map(partial_path) {
        if p.exists() {
            fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}
