use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args};
use rnkit::l1::L1NamePrefix;
use rnkit::radon_nikodym::KnownDensity;
use rnkit::rational::{self, Rational};
use rnkit::stepfn::StepFunction;

use crate::io;

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["mu", "trace", "name"])))]
pub struct ExportArgs {
    /// Sample the exact density of this measure against λ₀.
    #[arg(long)]
    mu: Option<String>,
    /// Sample every recorded t_n of an `approx` trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Sample every approximant of an L¹ name prefix.
    #[arg(long)]
    name: Option<PathBuf>,
    /// Grid of 2^level left endpoints.
    #[arg(long, default_value_t = 6)]
    level: u32,
    /// Add approximate decimal columns.
    #[arg(long)]
    decimal: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// One labelled sampled function.
pub struct Series {
    pub label: String,
    pub samples: Vec<(Rational, Rational)>,
}

impl Series {
    pub fn of_step(label: String, s: &StepFunction, level: u32) -> Result<Series> {
        Ok(Series { label, samples: s.sample_grid(level)? })
    }
}

pub fn to_csv(series: &[Series], decimal: bool) -> String {
    let mut out = String::from(if decimal { "series,x,value,x_decimal,value_decimal\n" } else { "series,x,value\n" });
    for s in series {
        for (x, v) in &s.samples {
            write!(out, "{},{},{}", s.label, rational::format(x), rational::format(v)).unwrap();
            if decimal {
                write!(out, ",{},{}", io::decimal(x), io::decimal(v)).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

fn density_series(h: &KnownDensity, level: u32) -> Result<Series> {
    let samples = match h {
        KnownDensity::Step(s) => s.sample_grid(level)?,
        KnownDensity::Linear { c0, c1 } => {
            if level > 24 {
                bail!("grid level {level} is too fine to export");
            }
            (0..1i64 << level)
                .map(|k| {
                    let x = rational::ratio(k, 1 << level);
                    let v = c0 + c1 * &x;
                    (x, v)
                })
                .collect()
        }
    };
    Ok(Series { label: "h".into(), samples })
}

fn trace_series(path: &PathBuf, level: u32) -> Result<Vec<Series>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trace: serde_json::Value = serde_json::from_str(&text).context("trace JSON")?;
    let Some(levels) = trace["levels"].as_array() else { bail!("trace has no `levels` array") };
    levels
        .iter()
        .map(|record| {
            let n = record["n"].as_u64().context("level record without `n`")?;
            let t: StepFunction = serde_json::from_value(record["t"].clone()).context("level record `t`")?;
            Series::of_step(format!("t_{n}"), &t, level)
        })
        .collect()
}

fn name_series(path: &PathBuf, level: u32) -> Result<Vec<Series>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let prefix: L1NamePrefix = serde_json::from_str(&text).context("name prefix JSON")?;
    prefix.approximants.iter().enumerate().map(|(i, s)| Series::of_step(format!("s_{i}"), s, level)).collect()
}

pub fn run(args: ExportArgs) -> Result<ExitCode> {
    let series = if let Some(mu) = &args.mu {
        vec![density_series(&KnownDensity::from_spec(&io::load_spec(mu)?)?, args.level)?]
    } else if let Some(path) = &args.trace {
        trace_series(path, args.level)?
    } else if let Some(path) = &args.name {
        name_series(path, args.level)?
    } else {
        unreachable!("clap requires a source")
    };
    io::emit(args.out.as_deref(), &to_csv(&series, args.decimal))?;
    Ok(ExitCode::SUCCESS)
}
