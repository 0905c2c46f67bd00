//! Single global factor estimated by principal component analysis.
//!
//! Rows of the return panel are standardized, the equal-time correlation
//! matrix `C = z zᵀ / T` is diagonalized as `U Λ Uᵀ`, and the first principal
//! component `α_1 = u_1ᵀ z` is taken as the global factor `M_t`. The loading
//! of series `i` is `σ_i u_1i` and its residual is `σ_i (z_i - u_1i M)`.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::output::{round_sig, write_columns, write_json};
use crate::panel::{to_magnitudes, MaskedPanel, ReturnPanel};
use crate::spectrum::{lambda_curve, CurveOptions, SpectrumCurve, SpectrumSource};
use crate::stats::chi_squared_sf;
use crate::xcorr::{corr_matrix, wishart_bounds, Estimator};

pub const DEFAULT_LJUNG_BOX_DEPTH: usize = 20;
pub const DEFAULT_SCREEN_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedPanel {
    /// Standardized values; masked cells hold 0.
    pub z: MaskedPanel,
    pub row_means: Vec<f64>,
    pub row_sigmas: Vec<f64>,
}

impl StandardizedPanel {
    pub fn n_series(&self) -> usize {
        self.z.n_series()
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Rescales each row to zero mean and unit population variance over its
/// unmasked cells.
pub fn standardize(panel: &ReturnPanel) -> Result<StandardizedPanel> {
    let (n, t) = panel.values().shape();
    let mut z = DMatrix::zeros(n, t);
    let mut row_means = Vec::with_capacity(n);
    let mut row_sigmas = Vec::with_capacity(n);
    for i in 0..n {
        let (count, mean, sd) = panel.row_moments(i, 0..t);
        if count < 2 || !(sd > 0.0) {
            return Err(Error::ZeroVariance(panel.names()[i].clone()));
        }
        for k in 0..t {
            if !panel.is_masked(i, k) {
                z[(i, k)] = (panel.values()[(i, k)] - mean) / sd;
            }
        }
        row_means.push(mean);
        row_sigmas.push(sd);
    }
    Ok(StandardizedPanel {
        z: MaskedPanel::new(
            panel.names().to_vec(),
            panel.timestamps().to_vec(),
            z,
            panel.mask().clone(),
        )?,
        row_means,
        row_sigmas,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecomposeOptions {
    /// Build `C` with the overlap-corrected lag-0 estimator instead of `z zᵀ / T`.
    pub overlap_corrected: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorDecomposition {
    pub names: Vec<String>,
    pub timestamps: Vec<String>,
    pub correlation: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` is `u_k`, sign-fixed so its components sum to a positive value.
    pub eigenvectors: DMatrix<f64>,
    /// Row `k` is the principal component `α_k`.
    pub pcs: DMatrix<f64>,
    pub global_factor: Vec<f64>,
    pub loadings: Vec<f64>,
    pub row_means: Vec<f64>,
    pub row_sigmas: Vec<f64>,
    pub residuals: ReturnPanel,
    pub lambda_plus: f64,
    pub n_significant: usize,
}

fn orient(u: &mut DMatrix<f64>) {
    for mut col in u.column_iter_mut() {
        let sum: f64 = col.iter().sum();
        let flip = if sum.abs() > 1e-12 {
            sum < 0.0
        } else {
            col.iter().find(|v| v.abs() > 1e-12).is_some_and(|v| *v < 0.0)
        };
        if flip {
            col.neg_mut();
        }
    }
}

pub fn decompose(z: &StandardizedPanel) -> Result<FactorDecomposition> {
    decompose_with(z, DecomposeOptions::default())
}

/// Eigenvalue ties keep the eigensolver's order, which is deterministic but
/// carries no meaning.
pub fn decompose_with(z: &StandardizedPanel, options: DecomposeOptions) -> Result<FactorDecomposition> {
    let (n, t) = (z.n_series(), z.len());
    if n >= t {
        return Err(Error::invalid(format!("decomposition needs N < T, got N = {n}, T = {t}")));
    }
    let zv = z.z.values();
    let correlation = if options.overlap_corrected {
        corr_matrix(&z.z, 0, Estimator::OverlapCorrected)?.values
    } else {
        zv * zv.transpose() / t as f64
    };
    let eig = SymmetricEigen::try_new(correlation.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        Error::Eigen(format!(
            "no convergence for the {n}x{n} correlation matrix (trace {})",
            correlation.trace()
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut eigenvectors = DMatrix::from_fn(n, n, |i, k| eig.eigenvectors[(i, order[k])]);
    orient(&mut eigenvectors);

    let pcs = eigenvectors.transpose() * zv;
    let global_factor: Vec<f64> = pcs.row(0).iter().copied().collect();
    let u1: Vec<f64> = eigenvectors.column(0).iter().copied().collect();
    let loadings = z.row_sigmas.iter().zip(&u1).map(|(s, u)| s * u).collect();

    let mut resid = DMatrix::zeros(n, t);
    for k in 0..t {
        for i in 0..n {
            if !z.z.is_masked(i, k) {
                resid[(i, k)] = z.row_sigmas[i] * (zv[(i, k)] - u1[i] * global_factor[k]);
            }
        }
    }
    let residuals = ReturnPanel::from_panel(MaskedPanel::new(
        z.z.names().to_vec(),
        z.z.timestamps().to_vec(),
        resid,
        z.z.mask().clone(),
    )?);

    let lambda_plus = wishart_bounds(n, t)?.lambda_plus;
    let n_significant = eigenvalues.iter().filter(|&&l| l > lambda_plus).count();
    Ok(FactorDecomposition {
        names: z.z.names().to_vec(),
        timestamps: z.z.timestamps().to_vec(),
        correlation,
        eigenvalues,
        eigenvectors,
        pcs,
        global_factor,
        loadings,
        row_means: z.row_means.clone(),
        row_sigmas: z.row_sigmas.clone(),
        residuals,
        lambda_plus,
        n_significant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceShares {
    /// `λ_1 / Σ λ_i`.
    pub share_total: f64,
    /// `λ_1 / Σ_{significant} λ_i`; absent when no eigenvalue is significant.
    pub share_significant: Option<f64>,
}

impl VarianceShares {
    /// `eigenvalues` in descending order; the first `n_significant` are
    /// significant. `total` is the trace of the correlation matrix.
    pub fn from_eigenvalues(eigenvalues: &[f64], total: f64, n_significant: usize) -> Result<Self> {
        let first = *eigenvalues
            .first()
            .ok_or_else(|| Error::invalid("no eigenvalues"))?;
        if !(total > 0.0) || n_significant > eigenvalues.len() {
            return Err(Error::invalid("invalid total variance or significant count"));
        }
        let share_significant = (n_significant >= 1)
            .then(|| first / eigenvalues[..n_significant].iter().sum::<f64>());
        Ok(Self {
            share_total: first / total,
            share_significant,
        })
    }
}

pub fn variance_shares(d: &FactorDecomposition) -> VarianceShares {
    let total: f64 = d.eigenvalues.iter().sum();
    VarianceShares::from_eigenvalues(&d.eigenvalues, total, d.n_significant)
        .expect("decomposition has positive trace")
}

/// Correlation of the global factor with each series, `√λ_1 u_1i / √C_ii`.
/// Without masked cells `C_ii = 1`.
pub fn factor_index_corr(d: &FactorDecomposition) -> Vec<f64> {
    let root = d.eigenvalues[0].max(0.0).sqrt();
    (0..d.names.len())
        .map(|i| (root * d.eigenvectors[(i, 0)] / d.correlation[(i, i)].sqrt()).clamp(-1.0, 1.0))
        .collect()
}

/// Series whose absolute correlation with the factor is below `threshold`,
/// most weakly correlated first.
pub fn screen_uncorrelated(names: &[String], correlations: &[f64], threshold: f64) -> Result<Vec<String>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    if names.len() != correlations.len() {
        return Err(Error::invalid("names and correlations differ in length"));
    }
    let mut hits: Vec<(f64, &String)> = correlations
        .iter()
        .zip(names)
        .filter(|(c, _)| c.abs() < threshold)
        .map(|(c, n)| (c.abs(), n))
        .collect();
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(hits.into_iter().map(|(_, n)| n.clone()).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcfReport {
    pub lags: Vec<usize>,
    pub acf: Vec<f64>,
    pub ci_halfwidth: f64,
    pub ljung_box_depth: usize,
    pub ljung_box_stat: f64,
    pub ljung_box_p: f64,
}

impl AcfReport {
    /// Lags >= 1 whose autocorrelation lies outside the 95% band.
    pub fn outside_band(&self) -> Vec<usize> {
        self.lags
            .iter()
            .zip(&self.acf)
            .filter(|(l, a)| **l > 0 && a.abs() > self.ci_halfwidth)
            .map(|(l, _)| *l)
            .collect()
    }

    /// CSV `lag,acf,ci_lower,ci_upper`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let lo = vec![-self.ci_halfwidth; self.lags.len()];
        let hi = vec![self.ci_halfwidth; self.lags.len()];
        write_columns(path, "lag", &self.lags, &["acf", "ci_lower", "ci_upper"], &[&self.acf, &lo, &hi])
    }
}

fn sample_acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let t = series.len();
    let m = series.iter().sum::<f64>() / t as f64;
    let d: Vec<f64> = series.iter().map(|x| x - m).collect();
    let denom: f64 = d.iter().map(|x| x * x).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance("series".into()));
    }
    Ok((0..=max_lag)
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                d[..t - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / denom
            }
        })
        .collect())
}

pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfReport> {
    acf_with_depth(series, max_lag, DEFAULT_LJUNG_BOX_DEPTH)
}

/// Sample autocorrelation up to `max_lag`, the 95% band `±1.96/√T` and the
/// Ljung-Box statistic `T(T+2) Σ_{k=1}^{h} ρ_k² / (T-k)`.
pub fn acf_with_depth(series: &[f64], max_lag: usize, ljung_box_depth: usize) -> Result<AcfReport> {
    let t = series.len();
    if max_lag == 0 || 4 * max_lag >= t {
        return Err(Error::invalid(format!(
            "max_lag must satisfy 0 < max_lag < T/4 (T = {t}, max_lag = {max_lag})"
        )));
    }
    if ljung_box_depth == 0 || ljung_box_depth >= t {
        return Err(Error::invalid("Ljung-Box depth must lie in [1, T)"));
    }
    let rho = sample_acf(series, max_lag.max(ljung_box_depth))?;
    let tf = t as f64;
    let q = tf
        * (tf + 2.0)
        * (1..=ljung_box_depth)
            .map(|k| rho[k] * rho[k] / (tf - k as f64))
            .sum::<f64>();
    Ok(AcfReport {
        lags: (0..=max_lag).collect(),
        acf: rho[..=max_lag].to_vec(),
        ci_halfwidth: 1.96 / tf.sqrt(),
        ljung_box_depth,
        ljung_box_stat: q,
        ljung_box_p: chi_squared_sf(q, ljung_box_depth as f64),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSpectra {
    pub returns: SpectrumCurve,
    pub magnitudes: SpectrumCurve,
}

/// λ_L curves of the residual panel and of its magnitudes.
pub fn residual_spectrum(
    d: &FactorDecomposition,
    lags: &[usize],
    options: CurveOptions,
) -> Result<ResidualSpectra> {
    if d.residuals.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("residual panel has non-finite values"));
    }
    let magnitudes = to_magnitudes(&d.residuals)?;
    let mut returns = lambda_curve(&d.residuals, lags, SpectrumSource::Residuals, options)?;
    let mut mags = lambda_curve(&magnitudes, lags, SpectrumSource::Residuals, options)?;
    returns.source = SpectrumSource::Residuals;
    mags.source = SpectrumSource::Residuals;
    Ok(ResidualSpectra {
        returns,
        magnitudes: mags,
    })
}

#[derive(Serialize)]
struct DecompositionJson<'a> {
    names: &'a [String],
    eigenvalues: Vec<f64>,
    lambda_plus: f64,
    n_significant: usize,
    shares: VarianceShares,
    loadings: Vec<f64>,
    factor_index_correlations: Vec<f64>,
    uncorrelated: Vec<String>,
    screen_threshold: f64,
}

impl FactorDecomposition {
    pub fn write_json<P: AsRef<Path>>(&self, path: P, screen_threshold: f64) -> Result<()> {
        let corr = factor_index_corr(self);
        let shares = variance_shares(self);
        let r = |v: &[f64]| v.iter().map(|x| round_sig(*x)).collect::<Vec<_>>();
        write_json(
            path,
            &DecompositionJson {
                names: &self.names,
                eigenvalues: r(&self.eigenvalues),
                lambda_plus: round_sig(self.lambda_plus),
                n_significant: self.n_significant,
                shares: VarianceShares {
                    share_total: round_sig(shares.share_total),
                    share_significant: shares.share_significant.map(round_sig),
                },
                loadings: r(&self.loadings),
                uncorrelated: screen_uncorrelated(&self.names, &corr, screen_threshold)?,
                factor_index_correlations: r(&corr),
                screen_threshold,
            },
        )
    }

    /// CSV `date,M`.
    pub fn write_factor_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .timestamps
            .iter()
            .zip(&self.global_factor)
            .map(|(ts, m)| vec![ts.clone(), crate::output::fmt_num(*m)])
            .collect();
        crate::output::write_table(path, &["date".into(), "M".into()], &rows)
    }
}
