//! Flags, config-file merging and the small value parsers shared by the
//! commands.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use erdosavoid::rational_intervals::enclosure::sqrt_enclosure;
use erdosavoid::rational_intervals::{parse_rat, Interval, Rational};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "erdosavoid", version, about = "Exact avoiding-set constructions and escape certificates")]
#[command(args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a named object and write it out.
    Construct(ObjectArgs),
    /// Run a certification sweep over a grid of boxes.
    Certify(ObjectArgs),
    /// Run a numerical probe.
    Probe(ObjectArgs),
    /// Aggregate earlier JSON/CSV outputs into one summary.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct ObjectArgs {
    /// Object name, e.g. digit-avoider, sublacunary-avoider, mod1.
    pub object: String,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Files written by earlier runs.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Every object parameter. Only the ones an object reads matter to it.
#[derive(Clone, Debug, Default, Args, Serialize)]
pub struct Params {
    /// Sequence: reciprocal, linear, geometric-down:r, geometric-up:b, reciprocal-power:a, list:a,b,...
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seq: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    /// Number of parts per unit cell of a digit avoider.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    /// A rational, a range lo:hi, or sqrt:q.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<String>,
    /// Comma-separated rationals.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<String>,
    /// Integer polynomial coefficients, constant term first.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub big_n: Option<usize>,
    #[arg(long = "Nmax", alias = "nmax")]
    #[serde(rename = "Nmax", skip_serializing_if = "Option::is_none")]
    pub nmax: Option<usize>,
    /// Upper limit for adaptive Nmax doubling.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bits: Option<u32>,
    /// Seeded interior samples re-checked per certificate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_deg: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<String>,
    /// Number of seeded targets for the sumset probe.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<String>,
    /// X is the middle-1/(2N+1) tree with this N.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_n: Option<i64>,
    /// N of the null family 2^n (K + l).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family_n: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_range: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_range: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_budget: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Grid size AxB.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Flat key = value file; flags on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// `key = value` (or `key: value`) lines, `#` comments, as flag pairs.
pub fn config_flags(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || k == "config" {
            bail!("{}:{}: bad key {k:?}", path.display(), i + 1);
        }
        out.push(format!("--{k}"));
        out.push(v.to_string());
    }
    Ok(out)
}

/// Command-line args with the config file's pairs spliced in right after
/// the subcommand, so any flag given explicitly overrides them.
pub fn merged_args(argv: &[String]) -> anyhow::Result<Vec<String>> {
    let mut config = None;
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            config = argv.get(i + 1).cloned();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        }
    }
    let Some(path) = config else {
        return Ok(argv.to_vec());
    };
    let pairs = config_flags(Path::new(&path))?;
    let mut out = argv[..2.min(argv.len())].to_vec();
    out.extend(pairs);
    out.extend(argv.iter().skip(2).cloned());
    Ok(out)
}

// ---------------------------------------------------------------------------
// value parsers

pub fn need<'a, T>(v: &'a Option<T>, name: &str) -> anyhow::Result<&'a T> {
    v.as_ref().ok_or_else(|| anyhow!("missing --{name}"))
}

pub fn rational(s: &str) -> anyhow::Result<Rational> {
    parse_rat(s.trim()).map_err(|e| anyhow!("bad rational {s:?}: {e}"))
}

/// `lo:hi` or a single point.
pub fn interval(s: &str) -> anyhow::Result<Interval> {
    match s.split_once(':') {
        Some((a, b)) => Interval::new(rational(a)?, rational(b)?).map_err(|e| anyhow!("bad range {s:?}: {e}")),
        None => Ok(Interval::point(rational(s)?)),
    }
}

/// Like [`interval`], plus `sqrt:q` for an outward enclosure of `√q`.
pub fn real(s: &str, bits: u32) -> anyhow::Result<Interval> {
    if let Some(q) = s.strip_prefix("sqrt:") {
        return sqrt_enclosure(&rational(q)?, bits).map_err(|e| anyhow!("sqrt:{q}: {e}"));
    }
    interval(s)
}

pub fn int_range(s: &str) -> anyhow::Result<(i64, i64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("expected lo:hi, got {s:?}"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

pub fn grid(s: &str) -> anyhow::Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| anyhow!("expected grid AxB, got {s:?}"))?;
    let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
    if a == 0 || b == 0 {
        bail!("grid {s:?} must be positive");
    }
    Ok((a, b))
}

pub fn rational_list(s: &str) -> anyhow::Result<Vec<Rational>> {
    s.split(',').map(rational).collect()
}

pub fn int_list(s: &str) -> anyhow::Result<Vec<i64>> {
    s.split(',')
        .map(|v| v.trim().parse::<i64>().with_context(|| format!("bad integer {v:?}")))
        .collect()
}
