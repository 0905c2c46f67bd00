//! Synthetic panels with known structure.
//!
//! A global-factor scenario generates `R_it = mu_i + b_i M_t + eps_it` with a
//! GJR-GARCH(1,1) factor `M_t` and independent Gaussian residuals, then
//! optionally zeroes random cells to mimic non-trading days.
//!
//! Scenario files are JSON or TOML:
//!
//! ```toml
//! version = 1
//! n = 4
//! t = 2000
//! b = [0.5, 0.8, 1.0, 0.0]
//! sigma_eps = 2.0            # scalar or one value per series
//! mu = 0.0
//! holiday_prob = 0.0
//! seed = 7
//! log_price_scale = 0.01     # returns are in percent
//!
//! [factor_params]
//! alpha0 = 0.2486
//! alpha1 = 0.017
//! beta1 = 0.879
//! gamma = 0.1591
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garch::{simulate_gjr, unconditional_variance, GjrGarchParams};
use crate::output::io_err;
use crate::panel::{MaskedPanel, PricePanel, ReturnPanel};

pub const SCENARIO_VERSION: u32 = 1;
pub const MAX_HOLIDAY_PROB: f64 = 0.2;
pub const INITIAL_PRICE: f64 = 100.0;

/// A value given once for all series or once per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerSeries {
    All(f64),
    Each(Vec<f64>),
}

impl PerSeries {
    fn expand(&self, n: usize, what: &str) -> Result<Vec<f64>> {
        match self {
            PerSeries::All(v) => Ok(vec![*v; n]),
            PerSeries::Each(v) if v.len() == n => Ok(v.clone()),
            PerSeries::Each(v) => Err(Error::invalid(format!(
                "{what} has {} values, expected {n}",
                v.len()
            ))),
        }
    }
}

impl Default for PerSeries {
    fn default() -> Self {
        PerSeries::All(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfmScenario {
    #[serde(default = "default_version")]
    pub version: u32,
    pub n: usize,
    /// Number of returns; the price panel has `t + 1` columns.
    pub t: usize,
    #[serde(default)]
    pub mu: PerSeries,
    pub b: Vec<f64>,
    pub sigma_eps: PerSeries,
    pub factor_params: GjrGarchParams,
    #[serde(default)]
    pub holiday_prob: PerSeries,
    pub seed: u64,
    /// Log prices move by `log_price_scale * R`; the default 0.01 reads the
    /// returns as percentages, the unit of the bundled factor coefficients.
    #[serde(default = "default_log_price_scale")]
    pub log_price_scale: f64,
}

fn default_log_price_scale() -> f64 {
    0.01
}

fn default_version() -> u32 {
    SCENARIO_VERSION
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub mu: Vec<f64>,
    pub sigma_eps: Vec<f64>,
    pub holiday_prob: Vec<f64>,
}

impl GfmScenario {
    pub fn from_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let scenario: GfmScenario = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text)?,
            _ => serde_json::from_str(&text)?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<ResolvedScenario> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::invalid(format!(
                "unsupported scenario version {} (expected {SCENARIO_VERSION})",
                self.version
            )));
        }
        if self.n < 2 {
            return Err(Error::invalid("scenario needs n >= 2"));
        }
        if self.b.len() != self.n {
            return Err(Error::invalid(format!(
                "b has {} values, expected {}",
                self.b.len(),
                self.n
            )));
        }
        self.factor_params.validate()?;
        if !(self.log_price_scale > 0.0 && self.log_price_scale.is_finite()) {
            return Err(Error::invalid("log_price_scale must be positive"));
        }
        let resolved = ResolvedScenario {
            mu: self.mu.expand(self.n, "mu")?,
            sigma_eps: self.sigma_eps.expand(self.n, "sigma_eps")?,
            holiday_prob: self.holiday_prob.expand(self.n, "holiday_prob")?,
        };
        if resolved.sigma_eps.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::invalid("sigma_eps must be > 0"));
        }
        if resolved
            .holiday_prob
            .iter()
            .any(|p| !(0.0..=MAX_HOLIDAY_PROB).contains(p))
        {
            return Err(Error::invalid(format!(
                "holiday_prob must lie in [0, {MAX_HOLIDAY_PROB}]"
            )));
        }
        Ok(resolved)
    }

    /// Population correlation of each series with the factor,
    /// `b_i sd(M) / sqrt(b_i^2 Var(M) + sigma_i^2)`.
    pub fn factor_correlations(&self) -> Result<Vec<f64>> {
        let r = self.validate()?;
        let vm = unconditional_variance(&self.factor_params)?;
        Ok(self
            .b
            .iter()
            .zip(&r.sigma_eps)
            .map(|(b, s)| b * vm.sqrt() / (b * b * vm + s * s).sqrt())
            .collect())
    }

    pub fn series_names(&self) -> Vec<String> {
        let width = (self.n.max(2) - 1).to_string().len();
        (0..self.n).map(|i| format!("s{i:0width$}")).collect()
    }
}

/// `n` loadings drawn uniformly from `range` with the first `zero_count` set to 0.
pub fn draw_loadings(n: usize, range: (f64, f64), zero_count: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    (0..n)
        .map(|i| {
            let b = rng.random_range(range.0..=range.1);
            if i < zero_count {
                0.0
            } else {
                b
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfmSample {
    pub prices: PricePanel,
    pub returns: ReturnPanel,
    /// Returns before holiday zeros were injected.
    pub clean_returns: ReturnPanel,
    pub factor: Vec<f64>,
    pub factor_variance: Vec<f64>,
}

pub fn generate(scenario: &GfmScenario) -> Result<GfmSample> {
    let resolved = scenario.validate()?;
    let (n, t) = (scenario.n, scenario.t);
    let path = simulate_gjr(&scenario.factor_params, t, scenario.seed)?;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    rng.set_stream(1);
    let mut clean = DMatrix::zeros(n, t);
    for k in 0..t {
        for i in 0..n {
            let eps: f64 = StandardNormal.sample(&mut rng);
            clean[(i, k)] = resolved.mu[i]
                + scenario.b[i] * path.series[k]
                + resolved.sigma_eps[i] * eps;
        }
    }

    let mut holidays = ChaCha8Rng::seed_from_u64(scenario.seed);
    holidays.set_stream(2);
    let mut mask = DMatrix::from_element(n, t, false);
    for k in 0..t {
        for i in 0..n {
            let u: f64 = holidays.random();
            if u < resolved.holiday_prob[i] {
                mask[(i, k)] = true;
            }
        }
    }

    let mut prices = DMatrix::zeros(n, t + 1);
    for i in 0..n {
        prices[(i, 0)] = INITIAL_PRICE;
        let mut log_price = INITIAL_PRICE.ln();
        for k in 0..t {
            if !mask[(i, k)] {
                log_price += scenario.log_price_scale * clean[(i, k)];
            }
            prices[(i, k + 1)] = log_price.exp();
        }
    }

    let names = scenario.series_names();
    let price_stamps: Vec<String> = (0..=t).map(|k| k.to_string()).collect();
    let return_stamps = price_stamps[1..].to_vec();
    let price_panel = PricePanel::new(
        names.clone(),
        price_stamps,
        prices,
        DMatrix::from_element(n, t + 1, false),
    )?;
    let returns = MaskedPanel::new(names.clone(), return_stamps.clone(), clean.clone(), mask)?;
    let clean_returns = MaskedPanel::new(
        names,
        return_stamps,
        clean,
        DMatrix::from_element(n, t, false),
    )?;
    Ok(GfmSample {
        prices: price_panel,
        returns: ReturnPanel::from_panel(returns),
        clean_returns: ReturnPanel::from_panel(clean_returns),
        factor: path.series,
        factor_variance: path.variance,
    })
}

/// `n` independent standard-normal series of length `t`, no masked cells.
pub fn noise_panel(n: usize, t: usize, seed: u64) -> Result<ReturnPanel> {
    if t <= n {
        return Err(Error::invalid(format!("noise panel needs t > n, got n = {n}, t = {t}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = DMatrix::from_fn(n, t, |_, _| StandardNormal.sample(&mut rng));
    Ok(ReturnPanel::from_panel(MaskedPanel::unmasked(values)?))
}
