//! Small numeric helpers shared by the analysis modules.
//!
//! All moments are population moments (divide by the count), matching the
//! random-matrix conventions used throughout the crate.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Mean and population standard deviation over the cells where `keep` is true.
/// Returns the count as well so callers can check it.
pub fn masked_moments<'a, I>(cells: I) -> (usize, f64, f64)
where
    I: IntoIterator<Item = (f64, bool)> + Clone + 'a,
{
    let mut count = 0usize;
    let mut sum = 0.0;
    for (x, keep) in cells.clone() {
        if keep {
            count += 1;
            sum += x;
        }
    }
    if count == 0 {
        return (0, f64::NAN, f64::NAN);
    }
    let m = sum / count as f64;
    let ss: f64 = cells
        .into_iter()
        .filter(|&(_, keep)| keep)
        .map(|(x, _)| (x - m) * (x - m))
        .sum();
    (count, m, (ss / count as f64).sqrt())
}

/// Pearson correlation with population moments.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx * syy).sqrt()
}

pub fn kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd)
        .expect("normal parameters are validated by callers")
        .cdf(x)
}

/// Two-sided p-value of a standard-normal test statistic.
pub fn two_sided_normal_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    2.0 * (1.0 - normal_cdf(z.abs(), 0.0, 1.0))
}

/// Upper-tail probability of a chi-squared variable with `dof` degrees of freedom.
pub fn chi_squared_sf(x: f64, dof: f64) -> f64 {
    let dist = ChiSquared::new(dof).expect("dof > 0");
    1.0 - dist.cdf(x)
}

/// Asymptotic 5% critical value of the one-sample Kolmogorov-Smirnov statistic.
pub fn ks_critical_5pct(n: usize) -> f64 {
    1.358 / (n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_moments_skip_masked_cells() {
        let cells = [(1.0, true), (100.0, false), (3.0, true)];
        let (n, m, s) = masked_moments(cells.iter().copied());
        assert_eq!(n, 2);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn chi_squared_tail_matches_table() {
        // 95th percentile of chi2(20) is 31.410
        assert!((chi_squared_sf(31.410, 20.0) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn normal_p_value() {
        assert!((two_sided_normal_p(1.959964) - 0.05).abs() < 1e-6);
        assert_eq!(two_sided_normal_p(f64::INFINITY), 0.0);
    }
}
