//! Singular-value spectra of lag-correlation matrices and the decay of the
//! largest singular value with the lag.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{fmt_num, round_sig, write_json, write_table};
use crate::panel::MaskedPanel;
use crate::xcorr::{corr_matrix, Estimator, LagCorrMatrix};

/// Default lag grid `0..=100`.
pub fn default_lags() -> Vec<usize> {
    (0..=100).collect()
}

/// Singular values of `c`, descending, from the eigenvalues of `CᵀC`.
pub fn singular_values(c: &DMatrix<f64>) -> Result<Vec<f64>> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let gram = c.transpose() * c;
    let eig = SymmetricEigen::try_new(gram, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigensolver did not converge".into()))?;
    let mut sv: Vec<f64> = eig.eigenvalues.iter().map(|e| e.max(0.0).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

pub fn svd_spectrum(c: &LagCorrMatrix) -> Result<Vec<f64>> {
    singular_values(&c.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumSource {
    Returns,
    Magnitudes,
    Residuals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumCurve {
    pub lags: Vec<usize>,
    pub lambda_l: Vec<f64>,
    pub full_spectra: Option<Vec<Vec<f64>>>,
    pub source: SpectrumSource,
}

impl SpectrumCurve {
    pub fn value_at(&self, lag: usize) -> Option<f64> {
        self.lags
            .iter()
            .position(|&l| l == lag)
            .map(|k| self.lambda_l[k])
    }

    /// CSV with columns `lag,lambda_L`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .lags
            .iter()
            .zip(&self.lambda_l)
            .map(|(l, v)| vec![l.to_string(), fmt_num(*v)])
            .collect();
        write_table(path, &["lag".into(), "lambda_L".into()], &rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveOptions {
    pub estimator: Estimator,
    pub keep_full_spectra: bool,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::OverlapCorrectedUnitDiagonal,
            keep_full_spectra: false,
        }
    }
}

/// Largest singular value of the lag-`dt` correlation matrix for every lag.
/// Lags are processed in parallel.
pub fn lambda_curve<P: AsRef<MaskedPanel> + Sync>(
    panel: &P,
    lags: &[usize],
    source: SpectrumSource,
    options: CurveOptions,
) -> Result<SpectrumCurve> {
    if lags.is_empty() {
        return Err(Error::invalid("lag grid is empty"));
    }
    let spectra: Vec<Vec<f64>> = lags
        .par_iter()
        .map(|&lag| {
            let c = corr_matrix(panel, lag, options.estimator)?;
            svd_spectrum(&c)
        })
        .collect::<Result<_>>()?;
    let lambda_l = spectra.iter().map(|s| s[0]).collect();
    Ok(SpectrumCurve {
        lags: lags.to_vec(),
        lambda_l,
        full_spectra: options.keep_full_spectra.then_some(spectra),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLawFit {
    /// Decay rate: `lambda_L ~ amplitude * lag^(-exponent)`.
    pub exponent: f64,
    pub amplitude: f64,
    pub fit_range: [usize; 2],
    pub r_squared: f64,
    pub n_points: usize,
}

impl PowerLawFit {
    pub fn write_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        #[derive(Serialize)]
        struct Out {
            exponent: f64,
            amplitude: f64,
            fit_range: [usize; 2],
            r_squared: f64,
        }
        write_json(
            path,
            &Out {
                exponent: round_sig(self.exponent),
                amplitude: round_sig(self.amplitude),
                fit_range: self.fit_range,
                r_squared: round_sig(self.r_squared),
            },
        )
    }
}

/// Ordinary least squares of `ln lambda_L` on `ln lag` over lags in
/// `[range.0, range.1]`. Lag 0 is always excluded.
pub fn fit_power_law(curve: &SpectrumCurve, range: (usize, usize)) -> Result<PowerLawFit> {
    let (lo, hi) = range;
    let points: Vec<(usize, f64)> = curve
        .lags
        .iter()
        .zip(&curve.lambda_l)
        .filter(|(l, _)| **l >= lo.max(1) && **l <= hi)
        .map(|(l, v)| (*l, *v))
        .collect();
    if points.len() < 5 {
        return Err(Error::invalid(format!(
            "power-law fit needs at least 5 lags in [{lo}, {hi}], found {}",
            points.len()
        )));
    }
    if let Some((l, v)) = points.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::invalid(format!(
            "non-positive lambda_L {v} at lag {l} in fit range"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(l, _)| (*l as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(PowerLawFit {
        exponent: -slope,
        amplitude: intercept.exp(),
        fit_range: [points[0].0, points[points.len() - 1].0],
        r_squared,
        n_points: points.len(),
    })
}
