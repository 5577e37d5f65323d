use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use num_traits::ToPrimitive;
use rnkit::measures::MeasureSpec;
use rnkit::Rational;
use serde::Serialize;

/// A measure given inline (`lebesgue` or JSON) or as a path to a JSON file.
pub fn load_spec(arg: &str) -> Result<MeasureSpec> {
    let trimmed = arg.trim();
    if trimmed == "lebesgue" || trimmed.starts_with('{') {
        return MeasureSpec::parse(trimmed).context("inline measure spec");
    }
    let text = fs::read_to_string(arg).with_context(|| format!("reading measure spec {arg}"))?;
    MeasureSpec::parse(&text).with_context(|| format!("measure spec in {arg}"))
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

pub fn pretty_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// For display columns only; every computation stays exact.
pub fn decimal(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}
