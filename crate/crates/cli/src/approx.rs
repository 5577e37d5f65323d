use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use rnkit::ec::{self, EcOracle};
use rnkit::l1::L1NamePrefix;
use rnkit::measures::{Measure, MeasureSpec};
use rnkit::radon_nikodym::{DensityApprox, KnownDensity, RnConfig, RnPipeline};
use rnkit::rational::{self, Rational};
use rnkit::stepfn::StepFunction;
use serde::Serialize;

use crate::grid::{self, Series};
use crate::io;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EcMode {
    /// Membership iff listed within the first `--budget` entries.
    Budgeted,
    /// A true modulus computed from the known density (λ must be λ₀).
    Certified,
    /// Answers from the known density without reading the name (λ must be λ₀).
    Cheat,
}

#[derive(Args)]
pub struct ApproxArgs {
    /// Reference measure λ: `lebesgue`, inline JSON, or a JSON file.
    #[arg(long, default_value = "lebesgue")]
    lambda: String,
    /// The measure μ ≪ λ, in the same forms.
    #[arg(long)]
    mu: String,
    /// Record t_0 … t_n in the trace.
    #[arg(short = 'n', long = "depth", default_value_t = 6)]
    depth: usize,
    /// Approximants of the output name to emit.
    #[arg(long, default_value_t = 6)]
    name_len: usize,
    #[arg(long, value_enum, default_value_t = EcMode::Certified)]
    ec: EcMode,
    /// Entries read by budgeted EC.
    #[arg(long, default_value_t = 256)]
    budget: usize,
    /// Search stages per level before reporting exhaustion.
    #[arg(long)]
    stages: Option<usize>,
    /// Trace JSON destination; stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write samples of every recorded t_n as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    csv_level: u32,
    /// Add approximate decimal fields next to exact errors and CSV values.
    #[arg(long)]
    decimal: bool,
}

#[derive(Serialize)]
struct LevelRecord {
    #[serde(flatten)]
    approx: DensityApprox,
    /// Exact `‖t_n - dμ/dλ₀‖_{λ₀}`, when the density is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_error_decimal: Option<f64>,
}

#[derive(Serialize)]
struct NameError {
    k: usize,
    n_k: usize,
    exact_error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    exact_error_decimal: Option<f64>,
}

#[derive(Serialize)]
struct ApproxReport {
    lambda: MeasureSpec,
    mu: MeasureSpec,
    ec_mode: &'static str,
    selected: Vec<usize>,
    levels: Vec<LevelRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    name_errors: Vec<NameError>,
    name: L1NamePrefix,
}

fn oracle(args: &ApproxArgs, pipeline: &RnPipeline, h: Option<&KnownDensity>) -> Result<EcOracle> {
    Ok(match (args.ec, h) {
        (EcMode::Budgeted, _) => EcOracle::Budgeted { budget: args.budget },
        (EcMode::Certified, Some(h)) => pipeline.certified_oracle(h.clone())?,
        (EcMode::Cheat, Some(h)) => pipeline.cheat_oracle(h.clone())?,
        (mode, None) => {
            let mode = mode.to_possible_value().expect("no skipped variants");
            bail!("--ec {} needs λ = lebesgue so the density is known exactly; use --ec budgeted", mode.get_name())
        }
    })
}

pub fn run(args: ApproxArgs) -> Result<ExitCode> {
    let lambda_spec = io::load_spec(&args.lambda)?;
    let mu_spec = io::load_spec(&args.mu)?;
    let lambda: Measure = lambda_spec.build()?;
    let mu = mu_spec.build()?;
    let h = match lambda_spec {
        MeasureSpec::Lebesgue => Some(KnownDensity::from_spec(&mu_spec)?),
        _ => None,
    };
    let mut config = RnConfig::default();
    if let Some(stages) = args.stages {
        config.search.max_stages = stages;
    }

    let pipeline = RnPipeline::new(lambda, mu, config);
    let guard = ec::single_use_guard(oracle(&args, &pipeline, h.as_ref())?);
    let selection = pipeline.run(&guard)?;
    let trace = pipeline.trace(&selection, args.name_len)?;
    let mut approxes = trace.levels;
    for n in approxes.len()..=args.depth {
        approxes.push((*pipeline.sequence().get(n)?).clone());
    }

    let exact = |s: &StepFunction| h.as_ref().map(|h| h.distance(s));
    let shown = |d: &Option<Rational>| (d.as_ref().map(rational::format), d.as_ref().filter(|_| args.decimal).map(io::decimal));
    let levels: Vec<LevelRecord> = approxes
        .into_iter()
        .map(|approx| {
            let (exact_error, exact_error_decimal) = shown(&exact(&approx.t));
            LevelRecord { approx, exact_error, exact_error_decimal }
        })
        .collect();
    let name_errors = trace
        .name
        .approximants
        .iter()
        .zip(&trace.selected)
        .enumerate()
        .filter_map(|(k, (s, &n_k))| {
            let (exact_error, exact_error_decimal) = shown(&exact(s));
            Some(NameError { k, n_k, exact_error: exact_error?, exact_error_decimal })
        })
        .collect();

    if let Some(path) = &args.csv {
        let series = levels
            .iter()
            .map(|r| Series::of_step(format!("t_{}", r.approx.n), &r.approx.t, args.csv_level))
            .collect::<Result<Vec<_>>>()?;
        io::emit(Some(path), &grid::to_csv(&series, args.decimal))?;
    }
    let report = ApproxReport {
        lambda: lambda_spec,
        mu: mu_spec,
        ec_mode: trace.ec_mode,
        selected: trace.selected,
        levels,
        name_errors,
        name: trace.name,
    };
    io::emit(args.out.as_deref(), &io::pretty_json(&report)?)?;
    Ok(ExitCode::SUCCESS)
}
