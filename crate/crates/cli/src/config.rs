use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use tlrmt_core::xcorr::Estimator;

/// Settings shared by all subcommands, read from a TOML file. Command-line
/// flags take precedence over every field here.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub lags: Option<LagSpec>,
    pub estimator: Option<Estimator>,
    pub fit_range: Option<[usize; 2]>,
    /// Level at which p-values are reported as significant.
    pub significance: Option<f64>,
    pub screen_threshold: Option<f64>,
    pub seed: Option<u64>,
}

/// A lag grid written either as a range string (`"0:100"`) or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LagSpec {
    Text(String),
    List(Vec<usize>),
}

impl LagSpec {
    pub fn resolve(&self) -> Result<Vec<usize>> {
        match self {
            LagSpec::Text(s) => parse_lags(s),
            LagSpec::List(v) if v.is_empty() => bail!("lag grid is empty"),
            LagSpec::List(v) => Ok(v.clone()),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(s) = cfg.significance {
            if !(s > 0.0 && s < 1.0) {
                bail!("significance must lie in (0, 1), got {s}");
            }
        }
        Ok(cfg)
    }
}

/// Parses `a:b` (inclusive), `a:b:step`, a comma-separated list, or a single lag.
pub fn parse_lags(s: &str) -> Result<Vec<usize>> {
    let s = s.trim();
    if s.is_empty() {
        bail!("lag grid is empty");
    }
    let num = |t: &str| -> Result<usize> {
        t.trim()
            .parse::<usize>()
            .with_context(|| format!("invalid lag {t:?} in {s:?}"))
    };
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let (lo, hi, step) = match parts.as_slice() {
            [a, b] => (num(a)?, num(b)?, 1),
            [a, b, c] => (num(a)?, num(b)?, num(c)?),
            _ => bail!("lag range must be a:b or a:b:step, got {s:?}"),
        };
        if step == 0 {
            bail!("lag step must be positive");
        }
        if hi < lo {
            bail!("lag range {s:?} is empty");
        }
        return Ok((lo..=hi).step_by(step).collect());
    }
    s.split(',').map(num).collect()
}

/// Parses a fit range written `lo:hi`.
pub fn parse_range(s: &str) -> Result<[usize; 2]> {
    match parse_lags(s)?.as_slice() {
        [lo, .., hi] if s.contains(':') => Ok([*lo, *hi]),
        _ => bail!("fit range must be lo:hi, got {s:?}"),
    }
}
