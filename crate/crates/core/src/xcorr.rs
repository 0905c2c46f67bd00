//! Time-lag cross-correlation matrices and Wishart reference statistics.
//!
//! For a lag `dt` the matrix entry `(i, j)` correlates `x_i(t)` with
//! `x_j(t + dt)` over the aligned window `t = 0 .. T - dt`.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::output::{fmt_num, round_sig, write_json, write_table};
use crate::panel::MaskedPanel;
use crate::stats::{ks_critical_5pct, normal_cdf};

/// Pairs whose joint overlap is below this are flagged as unreliable.
pub const MIN_RELIABLE_OVERLAP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Pearson correlation over the full aligned window, masked zeros left in.
    Plain,
    /// Cross-moment restricted to jointly unmasked points, own-cell moments.
    OverlapCorrected,
    /// Overlap-corrected with the diagonal replaced by 1 at every lag.
    #[default]
    OverlapCorrectedUnitDiagonal,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Estimator::Plain => "plain",
            Estimator::OverlapCorrected => "overlap-corrected",
            Estimator::OverlapCorrectedUnitDiagonal => "overlap-corrected-unit-diagonal",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Estimator::Plain),
            "overlap-corrected" | "overlap" => Ok(Estimator::OverlapCorrected),
            "overlap-corrected-unit-diagonal" | "unit-diagonal" => {
                Ok(Estimator::OverlapCorrectedUnitDiagonal)
            }
            other => Err(Error::invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LagCorrMatrix {
    pub lag: usize,
    pub values: DMatrix<f64>,
    pub estimator: Estimator,
    /// Number of jointly usable time points per pair.
    pub overlap: DMatrix<usize>,
    /// Length of the aligned window, `T - lag`.
    pub window: usize,
    /// `(i, j)` pairs with overlap below [`MIN_RELIABLE_OVERLAP`].
    pub unreliable: Vec<(usize, usize)>,
}

#[derive(Serialize)]
struct MatrixEnvelope<'a> {
    lag: usize,
    estimator: String,
    window: usize,
    names: &'a [String],
    overlap: Vec<Vec<usize>>,
    unreliable_pairs: &'a [(usize, usize)],
    values: Vec<Vec<f64>>,
}

impl LagCorrMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Upper-triangle entries (i < j).
    pub fn off_diagonal(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P, names: &[String]) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .values
            .row_iter()
            .map(|r| r.iter().map(|v| fmt_num(*v)).collect())
            .collect();
        write_table(path, names, &rows)
    }

    pub fn write_json<P: AsRef<Path>>(&self, path: P, names: &[String]) -> Result<()> {
        let env = MatrixEnvelope {
            lag: self.lag,
            estimator: self.estimator.to_string(),
            window: self.window,
            names,
            overlap: self
                .overlap
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            unreliable_pairs: &self.unreliable,
            values: self
                .values
                .row_iter()
                .map(|r| r.iter().map(|v| round_sig(*v)).collect())
                .collect(),
        };
        write_json(path, &env)
    }
}

/// Largest lag accepted for a series of length `len`.
pub fn max_lag(len: usize) -> usize {
    len / 4
}

struct Window {
    values: DMatrix<f64>,
    usable: DMatrix<f64>,
    mean: Vec<f64>,
    sd: Vec<f64>,
}

fn window(panel: &MaskedPanel, start: usize, len: usize, own_cells: bool) -> Result<Window> {
    let n = panel.n_series();
    let values = panel.values().columns(start, len).into_owned();
    let usable = panel
        .mask()
        .columns(start, len)
        .map(|m| if m { 0.0 } else { 1.0 });
    let mut mean = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for i in 0..n {
        let (count, m, s) = if own_cells {
            panel.row_moments(i, start..start + len)
        } else {
            let cells = (start..start + len).map(|t| (panel.values()[(i, t)], true));
            crate::stats::masked_moments(cells)
        };
        if count < 2 {
            return Err(Error::invalid(format!(
                "series {:?} has {count} usable cells in the lag window, need at least 2",
                panel.names()[i]
            )));
        }
        if !(s > 0.0) {
            return Err(Error::ZeroVariance(panel.names()[i].clone()));
        }
        mean.push(m);
        sd.push(s);
    }
    Ok(Window {
        values,
        usable,
        mean,
        sd,
    })
}

/// Lag-`lag` cross-correlation matrix of a return or magnitude panel.
pub fn corr_matrix<P: AsRef<MaskedPanel>>(
    panel: &P,
    lag: usize,
    estimator: Estimator,
) -> Result<LagCorrMatrix> {
    let panel = panel.as_ref();
    let t = panel.len();
    let n = panel.n_series();
    if lag > max_lag(t) {
        return Err(Error::LagTooLarge {
            lag,
            max: max_lag(t),
            len: t,
        });
    }
    let len = t - lag;
    let own_cells = estimator != Estimator::Plain;
    let lead = window(panel, 0, len, own_cells)?;
    let follow = window(panel, lag, len, own_cells)?;

    let cross = &lead.values * follow.values.transpose();
    let mut values = DMatrix::zeros(n, n);
    let mut overlap = DMatrix::from_element(n, n, len);
    let mut unreliable = Vec::new();

    match estimator {
        Estimator::Plain => {
            for i in 0..n {
                for j in 0..n {
                    let c = cross[(i, j)] / len as f64 - lead.mean[i] * follow.mean[j];
                    values[(i, j)] = c / (lead.sd[i] * follow.sd[j]);
                }
            }
        }
        Estimator::OverlapCorrected | Estimator::OverlapCorrectedUnitDiagonal => {
            let joint = &lead.usable * follow.usable.transpose();
            for i in 0..n {
                for j in 0..n {
                    let tp = joint[(i, j)].round() as usize;
                    overlap[(i, j)] = tp;
                    if tp < MIN_RELIABLE_OVERLAP {
                        unreliable.push((i, j));
                    }
                    if tp == 0 {
                        continue;
                    }
                    let c = cross[(i, j)] / tp as f64 - lead.mean[i] * follow.mean[j];
                    values[(i, j)] = c / (lead.sd[i] * follow.sd[j]);
                }
            }
            if estimator == Estimator::OverlapCorrectedUnitDiagonal {
                values.fill_diagonal(1.0);
            }
        }
    }

    Ok(LagCorrMatrix {
        lag,
        values,
        estimator,
        overlap,
        window: len,
        unreliable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WishartBounds {
    pub q: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Standard deviation of an off-diagonal entry of a noise correlation matrix.
    pub sigma_w: f64,
}

/// Eigenvalue support of the correlation matrix of `n` uncorrelated series of
/// length `t`: `1 + 1/Q +- 2 sqrt(1/Q)` with `Q = t / n`.
pub fn wishart_bounds(n: usize, t: usize) -> Result<WishartBounds> {
    if n < 2 {
        return Err(Error::invalid(format!("need n >= 2, got {n}")));
    }
    if t <= n {
        return Err(Error::invalid(format!(
            "Wishart bounds need t > n (Q > 1), got n = {n}, t = {t}"
        )));
    }
    let q = t as f64 / n as f64;
    let spread = 2.0 * (1.0 / q).sqrt();
    Ok(WishartBounds {
        q,
        lambda_plus: 1.0 + 1.0 / q + spread,
        lambda_minus: 1.0 + 1.0 / q - spread,
        sigma_w: 1.0 / (t as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffDiagHistogram {
    /// `bins + 1` bin edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Empirical density per bin (integrates to 1).
    pub density: Vec<f64>,
    /// Reference normal density at each bin centre.
    pub reference_density: Vec<f64>,
    pub reference_sd: f64,
    pub n_entries: usize,
    pub ks_distance: f64,
    pub ks_critical_5pct: f64,
}

/// Histogram of the upper-triangle entries against `N(0, 1/sqrt(T_eff))`,
/// with `T_eff` the aligned window length.
pub fn offdiag_histogram(c: &LagCorrMatrix, bins: usize) -> Result<OffDiagHistogram> {
    if c.n() < 3 {
        return Err(Error::invalid("off-diagonal histogram needs N >= 3"));
    }
    if bins == 0 {
        return Err(Error::invalid("bins must be positive"));
    }
    let mut entries = c.off_diagonal();
    entries.sort_by(|a, b| a.total_cmp(b));
    let count = entries.len();
    let reference_sd = 1.0 / (c.window as f64).sqrt();

    let mut lo = entries[0];
    let mut hi = entries[count - 1];
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for &x in &entries {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let density = counts
        .iter()
        .map(|&k| k as f64 / (count as f64 * width))
        .collect();
    let norm = 1.0 / (reference_sd * (2.0 * std::f64::consts::PI).sqrt());
    let reference_density = (0..bins)
        .map(|k| {
            let x = lo + (k as f64 + 0.5) * width;
            norm * (-0.5 * (x / reference_sd).powi(2)).exp()
        })
        .collect();

    let mut ks: f64 = 0.0;
    for (k, &x) in entries.iter().enumerate() {
        let f = normal_cdf(x, 0.0, reference_sd);
        ks = ks
            .max((k + 1) as f64 / count as f64 - f)
            .max(f - k as f64 / count as f64);
    }

    Ok(OffDiagHistogram {
        edges,
        counts,
        density,
        reference_density,
        reference_sd,
        n_entries: count,
        ks_distance: ks,
        ks_critical_5pct: ks_critical_5pct(count),
    })
}
