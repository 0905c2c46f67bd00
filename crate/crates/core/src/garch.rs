//! GJR-GARCH(1,1) with Gaussian innovations.
//!
//! ```text
//! M_t       = sigma_t * eta_t,            eta_t ~ N(0, 1)
//! sigma^2_t = alpha0 + (alpha1 + gamma * I[M_{t-1} < 0]) * M^2_{t-1} + beta1 * sigma^2_{t-1}
//! ```
//!
//! Fitting maximizes the Gaussian log-likelihood over a smooth
//! reparameterization that keeps every coefficient non-negative and the
//! persistence `alpha1 + beta1 + gamma / 2` inside (0, 1).

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{hessian, nelder_mead, NelderMeadOptions};
use crate::output::{round_sig, write_columns, write_json};
use crate::stats::{two_sided_normal_p, variance};

/// Minimum series length accepted by [`fit_gjr`].
pub const MIN_FIT_LEN: usize = 500;
/// Fits with persistence above this are reported as boundary solutions.
pub const MAX_PERSISTENCE: f64 = 0.9999;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GjrGarchParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub gamma: f64,
}

impl GjrGarchParams {
    /// Coefficients estimated for the global factor of 48 world indices.
    pub const WORLD_FACTOR: GjrGarchParams = GjrGarchParams {
        alpha0: 0.2486,
        alpha1: 0.0170,
        beta1: 0.8790,
        gamma: 0.1591,
    };

    pub fn new(alpha0: f64, alpha1: f64, beta1: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            alpha0,
            alpha1,
            beta1,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha0, self.alpha1, self.beta1, self.gamma];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("GJR-GARCH coefficients must be finite"));
        }
        if !(self.alpha0 > 0.0) {
            return Err(Error::invalid(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if self.alpha1 < 0.0 || self.beta1 < 0.0 || self.gamma < 0.0 {
            return Err(Error::invalid("alpha1, beta1 and gamma must be >= 0"));
        }
        let p = self.persistence();
        if p >= 1.0 {
            return Err(Error::NonStationary(p));
        }
        Ok(())
    }

    /// `alpha1 + beta1 + gamma / 2`.
    pub fn persistence(&self) -> f64 {
        self.alpha1 + self.beta1 + 0.5 * self.gamma
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.alpha0, self.alpha1, self.beta1, self.gamma]
    }

    fn from_slice(x: &[f64]) -> Self {
        Self {
            alpha0: x[0],
            alpha1: x[1],
            beta1: x[2],
            gamma: x[3],
        }
    }

    fn next_variance(&self, prev_shock: f64, prev_var: f64) -> f64 {
        let leverage = if prev_shock < 0.0 { self.gamma } else { 0.0 };
        self.alpha0 + (self.alpha1 + leverage) * prev_shock * prev_shock + self.beta1 * prev_var
    }
}

pub const PARAM_NAMES: [&str; 4] = ["alpha0", "alpha1", "beta1", "gamma"];

/// `alpha0 / (1 - alpha1 - beta1 - gamma / 2)`.
pub fn unconditional_variance(params: &GjrGarchParams) -> Result<f64> {
    let p = params.persistence();
    if p >= 1.0 {
        return Err(Error::NonStationary(p));
    }
    Ok(params.alpha0 / (1.0 - p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GjrPath {
    pub series: Vec<f64>,
    pub variance: Vec<f64>,
}

/// Simulates `t` observations, starting from the unconditional variance.
pub fn simulate_gjr(params: &GjrGarchParams, t: usize, seed: u64) -> Result<GjrPath> {
    params.validate()?;
    if t < 100 {
        return Err(Error::invalid(format!("simulation length must be >= 100, got {t}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::with_capacity(t);
    let mut var = Vec::with_capacity(t);
    let mut s2 = unconditional_variance(params)?;
    for k in 0..t {
        if k > 0 {
            s2 = params.next_variance(series[k - 1], s2);
        }
        let eta: f64 = StandardNormal.sample(&mut rng);
        series.push(s2.sqrt() * eta);
        var.push(s2);
    }
    Ok(GjrPath {
        series,
        variance: var,
    })
}

/// Conditional variance path with `sigma^2_1` equal to the sample variance.
pub fn conditional_variance(params: &GjrGarchParams, series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut s2 = variance(series);
    for (k, _) in series.iter().enumerate() {
        if k > 0 {
            s2 = params.next_variance(series[k - 1], s2);
        }
        out.push(s2);
    }
    out
}

/// Gaussian log-likelihood. Returns `-inf` if any conditional variance is not
/// positive, which can happen when probing slightly negative coefficients.
pub fn log_likelihood(params: &GjrGarchParams, series: &[f64]) -> f64 {
    let mut s2 = variance(series);
    let mut ll = 0.0;
    for (k, &x) in series.iter().enumerate() {
        if k > 0 {
            s2 = params.next_variance(series[k - 1], s2);
        }
        if !(s2 > 0.0) {
            return f64::NEG_INFINITY;
        }
        ll += LN_2PI + s2.ln() + x * x / s2;
    }
    -0.5 * ll
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Maps unconstrained `(ln alpha0, logit persistence, a, b)` to coefficients;
/// the persistence is split across alpha1, beta1 and gamma/2 by softmax(a, b, 0).
fn decode(theta: &[f64]) -> GjrGarchParams {
    let alpha0 = theta[0].exp();
    let p = logistic(theta[1]);
    let m = theta[2].max(theta[3]).max(0.0);
    let (ea, eb, ec) = ((theta[2] - m).exp(), (theta[3] - m).exp(), (-m).exp());
    let total = ea + eb + ec;
    GjrGarchParams {
        alpha0,
        alpha1: p * ea / total,
        beta1: p * eb / total,
        gamma: 2.0 * p * ec / total,
    }
}

fn encode(params: &GjrGarchParams) -> Vec<f64> {
    let p = params.persistence();
    let floor = 1e-8;
    let a1 = params.alpha1.max(floor);
    let b1 = params.beta1.max(floor);
    let g2 = (0.5 * params.gamma).max(floor);
    vec![
        params.alpha0.ln(),
        (p / (1.0 - p)).ln(),
        (a1 / g2).ln(),
        (b1 / g2).ln(),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct GjrGarchFit {
    pub params: GjrGarchParams,
    pub cond_variance: Vec<f64>,
    pub loglik: f64,
    /// Log-likelihood at the moment-matched starting point.
    pub start_loglik: f64,
    pub std_errors: [f64; 4],
    pub t_values: [f64; 4],
    pub p_values: [f64; 4],
    pub innovations: Vec<f64>,
    pub evaluations: usize,
}

impl GjrGarchFit {
    pub fn n_obs(&self) -> usize {
        self.cond_variance.len()
    }

    /// Last observation of the fitted series.
    pub fn last_shock(&self) -> f64 {
        let k = self.n_obs() - 1;
        self.innovations[k] * self.cond_variance[k].sqrt()
    }

    pub fn last_variance(&self) -> f64 {
        self.cond_variance[self.n_obs() - 1]
    }

    pub fn persistence(&self) -> f64 {
        self.params.persistence()
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        #[derive(Serialize)]
        struct Out {
            params: GjrGarchParams,
            std_errors: GjrGarchParams,
            t_values: GjrGarchParams,
            p_values: GjrGarchParams,
            loglik: f64,
            persistence: f64,
            unconditional_variance: f64,
            n_obs: usize,
        }
        let r = |a: [f64; 4]| {
            GjrGarchParams::from_slice(&a.iter().map(|v| round_sig(*v)).collect::<Vec<_>>())
        };
        write_json(
            path,
            &Out {
                params: r(self.params.as_array()),
                std_errors: r(self.std_errors),
                t_values: r(self.t_values),
                p_values: r(self.p_values),
                loglik: round_sig(self.loglik),
                persistence: round_sig(self.persistence()),
                unconditional_variance: round_sig(unconditional_variance(&self.params)?),
                n_obs: self.n_obs(),
            },
        )
    }

    /// CSV `t,series,cond_variance,cond_volatility`.
    pub fn write_variance_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let t: Vec<usize> = (0..self.n_obs()).collect();
        let series: Vec<f64> = self
            .innovations
            .iter()
            .zip(&self.cond_variance)
            .map(|(e, v)| e * v.sqrt())
            .collect();
        let vol: Vec<f64> = self.cond_variance.iter().map(|v| v.sqrt()).collect();
        write_columns(
            path,
            "t",
            &t,
            &["series", "cond_variance", "cond_volatility"],
            &[&series, &self.cond_variance, &vol],
        )
    }
}

fn starting_points(sample_var: f64) -> Vec<GjrGarchParams> {
    let start = |p: f64, a1: f64, b1: f64, g: f64| GjrGarchParams {
        alpha0: sample_var * (1.0 - p),
        alpha1: a1,
        beta1: b1,
        gamma: g,
    };
    vec![
        start(0.95, 0.05, 0.85, 0.10),
        start(0.98, 0.03, 0.92, 0.06),
        start(0.60, 0.15, 0.30, 0.30),
    ]
}

/// Maximum-likelihood GJR-GARCH(1,1) fit.
///
/// The series should already have its mean removed. Standard errors come from
/// the inverse of the numerically differentiated observed information.
pub fn fit_gjr(series: &[f64]) -> Result<GjrGarchFit> {
    if series.len() < MIN_FIT_LEN {
        return Err(Error::invalid(format!(
            "GJR-GARCH fit needs at least {MIN_FIT_LEN} observations, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let sample_var = variance(series);
    if !(sample_var > 0.0) {
        return Err(Error::ZeroVariance("series".into()));
    }

    let objective = |theta: &[f64]| -log_likelihood(&decode(theta), series);
    let starts = starting_points(sample_var);
    let start_loglik = log_likelihood(&starts[0], series);

    let opts = NelderMeadOptions {
        max_evals: 6_000,
        f_tol: 1e-12,
        x_tol: 1e-7,
        initial_step: 0.5,
        max_restarts: 6,
    };
    let best = starts
        .iter()
        .map(|s| nelder_mead(objective, &encode(s), &opts))
        .min_by(|a, b| a.f.total_cmp(&b.f))
        .expect("at least one starting point");
    if !best.f.is_finite() {
        return Err(Error::Optimizer("likelihood is not finite at the optimum".into()));
    }
    let params = decode(&best.x);
    if params.persistence() > MAX_PERSISTENCE {
        return Err(Error::Optimizer(format!(
            "boundary solution: persistence {:.6} > {MAX_PERSISTENCE} (params {params:?})",
            params.persistence()
        )));
    }

    let x = params.as_array();
    let steps: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    let h = hessian(
        |p: &[f64]| log_likelihood(&GjrGarchParams::from_slice(p), series),
        &x,
        &steps,
    );
    let info = DMatrix::from_fn(4, 4, |i, j| -h[i][j]);
    let std_errors = match info.try_inverse() {
        Some(cov) => {
            let mut se = [f64::NAN; 4];
            for (k, s) in se.iter_mut().enumerate() {
                if cov[(k, k)] > 0.0 {
                    *s = cov[(k, k)].sqrt();
                }
            }
            se
        }
        None => [f64::NAN; 4],
    };
    let mut t_values = [f64::NAN; 4];
    let mut p_values = [f64::NAN; 4];
    for k in 0..4 {
        t_values[k] = x[k] / std_errors[k];
        p_values[k] = two_sided_normal_p(t_values[k]);
    }

    let cond_variance = conditional_variance(&params, series);
    let innovations = series
        .iter()
        .zip(&cond_variance)
        .map(|(m, v)| m / v.sqrt())
        .collect();
    Ok(GjrGarchFit {
        params,
        loglik: -best.f,
        start_loglik,
        cond_variance,
        std_errors,
        t_values,
        p_values,
        innovations,
        evaluations: best.evals,
    })
}

/// State from which a variance forecast starts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LastShock {
    /// Realized last observation; its sign selects the leverage term.
    Realized(f64),
    /// Only the squared shock is known; the leverage indicator is replaced by 1/2.
    SquaredExpected(f64),
}

/// Expected conditional variance for steps `1..=horizon` after the last
/// observation. Steps beyond the first replace the leverage indicator by its
/// expectation 1/2, which is exact for symmetric innovations.
pub fn forecast_path(
    params: &GjrGarchParams,
    last_variance: f64,
    last: LastShock,
    horizon: usize,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(horizon);
    if horizon == 0 {
        return out;
    }
    let first = match last {
        LastShock::Realized(eps) => params.next_variance(eps, last_variance),
        LastShock::SquaredExpected(eps2) => {
            params.alpha0 + (params.alpha1 + 0.5 * params.gamma) * eps2 + params.beta1 * last_variance
        }
    };
    out.push(first);
    let p = params.persistence();
    for k in 1..horizon {
        out.push(params.alpha0 + p * out[k - 1]);
    }
    out
}

pub fn forecast_variance(fit: &GjrGarchFit, horizon: usize) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::invalid("forecast horizon must be >= 1"));
    }
    fit.params.validate()?;
    Ok(forecast_path(
        &fit.params,
        fit.last_variance(),
        LastShock::Realized(fit.last_shock()),
        horizon,
    ))
}
