use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgGroup, Args, ValueEnum};
use rnkit::ec::{self, EnFormat, EnName};
use rnkit::lowerbound::{self, Rn0Realizer};
use rnkit::radon_nikodym::{KnownDensity, RnConfig};
use rnkit::rational;
use serde::Serialize;

use crate::io;

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RealizerMode {
    /// Answers with the exact density of the known input set.
    Cheat,
    /// Runs the full pipeline against λ₀ with certified EC.
    #[value(name = "thm1-certified")]
    Certified,
}

impl RealizerMode {
    fn label(self) -> &'static str {
        match self {
            RealizerMode::Cheat => "cheat",
            RealizerMode::Certified => "thm1-certified",
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum EnFormatArg {
    Auto,
    Word,
    Numeric,
}

#[derive(Args)]
#[command(group(ArgGroup::new("input").required(true).args(["set", "en_file"])))]
pub struct ReduceArgs {
    /// Members as a comma-separated list such as `1,3,6`; empty for ∅.
    #[arg(long)]
    set: Option<String>,
    /// An enumeration of the set, as a 0/1 word or one entry per line.
    #[arg(long)]
    en_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EnFormatArg::Auto)]
    en_format: EnFormatArg,
    #[arg(long, value_enum, default_value_t = RealizerMode::Cheat)]
    realizer: RealizerMode,
    /// Decode and compare bits 0 through this index.
    #[arg(long, default_value_t = 10)]
    range: u64,
    /// Cauchy-check the realizer's name to this depth; 0 skips the check.
    #[arg(long, default_value_t = 0)]
    validate_depth: usize,
    /// Report JSON destination; stdout by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ReduceReport {
    input_set: Vec<u64>,
    /// Bit `n` of the decoded characteristic function, for `n ≤ range`.
    decoded_bits: Vec<bool>,
    /// Exact band integral each bit was read from.
    per_n_integrals: Vec<String>,
    realizer_mode: &'static str,
    mismatches: Vec<u64>,
    warnings: Vec<String>,
}

fn parse_set(text: &str) -> Result<BTreeSet<u64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().with_context(|| format!("set member {s:?}")))
        .collect()
}

fn input(args: &ReduceArgs) -> Result<(BTreeSet<u64>, EnName)> {
    if let Some(text) = &args.set {
        let set = parse_set(text)?;
        let name = ec::en_encode(&set);
        return Ok((set, name));
    }
    let path = args.en_file.as_ref().expect("clap requires an input");
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let format = match args.en_format {
        EnFormatArg::Auto => None,
        EnFormatArg::Word => Some(EnFormat::Word),
        EnFormatArg::Numeric => Some(EnFormat::Numeric),
    };
    let entries = ec::parse_en(&text, format).with_context(|| format!("En-name in {}", path.display()))?;
    let set = entries.iter().filter(|&&v| v != 0).map(|v| v - 1).collect();
    Ok((set, EnName::from_entries(entries)))
}

fn realizer(mode: RealizerMode, set: &BTreeSet<u64>) -> Result<Rn0Realizer> {
    Ok(match mode {
        RealizerMode::Cheat => lowerbound::cheat_realizer(set.clone())?,
        RealizerMode::Certified => {
            let h = KnownDensity::Step(lowerbound::density_of_set(set)?);
            lowerbound::pipeline_realizer(RnConfig::default(), h)
        }
    })
}

pub fn run(args: ReduceArgs) -> Result<ExitCode> {
    let (set, name) = input(&args)?;
    let guard = lowerbound::rn0_guard(realizer(args.realizer, &set)?);
    let reduction = lowerbound::ec_via_rn0(&name, &guard, args.validate_depth)?;
    let decoded = (0..=args.range).map(|n| reduction.decode(n)).collect::<rnkit::Result<Vec<_>>>()?;
    let mismatches: Vec<u64> = decoded.iter().filter(|d| d.bit != set.contains(&d.n)).map(|d| d.n).collect();
    for d in decoded.iter().filter(|d| mismatches.contains(&d.n)) {
        eprintln!(
            "bit {}: input {}, decoded {} from integral {}",
            d.n,
            u8::from(set.contains(&d.n)),
            u8::from(d.bit),
            rational::format(&d.integral)
        );
    }
    let report = ReduceReport {
        input_set: set.iter().copied().collect(),
        decoded_bits: decoded.iter().map(|d| d.bit).collect(),
        per_n_integrals: decoded.iter().map(|d| rational::format(&d.integral)).collect(),
        realizer_mode: args.realizer.label(),
        warnings: reduction.warnings.clone(),
        mismatches,
    };
    io::emit(args.out.as_deref(), &io::pretty_json(&report)?)?;
    Ok(if report.mismatches.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
