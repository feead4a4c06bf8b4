//! Gaussian outlier pruning of detrended HRV samples.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::UnevenSeries;

/// Maximum-likelihood normal fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianFit {
    pub mu: f64,
    /// Square root of the divide-by-n variance.
    pub sigma: f64,
    pub n: usize,
}

impl GaussianFit {
    pub fn bounds(&self, alpha: f64) -> (f64, f64) {
        (self.mu - alpha * self.sigma, self.mu + alpha * self.sigma)
    }

    pub fn contains(&self, value: f64, alpha: f64) -> bool {
        (value - self.mu).abs() <= alpha * self.sigma
    }
}

pub fn fit_gaussian(series: &UnevenSeries) -> Result<GaussianFit> {
    let v = series.values();
    let n = v.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "{n} samples, at least 2 needed for a Gaussian fit"
        )));
    }
    let mu = v.iter().sum::<f64>() / n as f64;
    let var = v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64;
    Ok(GaussianFit {
        mu,
        sigma: var.sqrt(),
        n,
    })
}

/// Keeps the samples with `|value − μ| ≤ α·σ`, in order. One pass, no refit.
pub fn prune(series: &UnevenSeries, fit: &GaussianFit, alpha: f64) -> Result<UnevenSeries> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::validation(format!("alpha must be positive, got {alpha}")));
    }
    Ok(series.filter_by(|_, v| fit.contains(v, alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::Unit;

    fn series(values: &[f64]) -> UnevenSeries {
        let t = (0..values.len()).map(|i| i as f64).collect();
        UnevenSeries::new(t, values.to_vec(), Unit::Bpm).unwrap()
    }

    #[test]
    fn two_point_fit() {
        let f = fit_gaussian(&series(&[-1.0, 1.0])).unwrap();
        assert_eq!((f.mu, f.sigma, f.n), (0.0, 1.0, 2));
    }

    #[test]
    fn constant_fit() {
        let f = fit_gaussian(&series(&[4.5; 6])).unwrap();
        assert_eq!((f.mu, f.sigma), (4.5, 0.0));
        let kept = prune(&series(&[4.5, 4.5, 4.6]), &f, 3.0).unwrap();
        assert_eq!(kept.values(), &[4.5, 4.5]);
    }

    #[test]
    fn too_few_samples() {
        assert!(fit_gaussian(&series(&[1.0])).is_err());
    }

    #[test]
    fn all_inside_is_identity() {
        let s = series(&[0.1, -0.3, 0.2, 0.0]);
        let f = fit_gaussian(&s).unwrap();
        assert_eq!(prune(&s, &f, 3.0).unwrap(), s);
    }

    #[test]
    fn boundary_is_retained() {
        let fit = GaussianFit { mu: 1.0, sigma: 0.5, n: 3 };
        let s = series(&[1.0, 2.5, 2.5000001, -0.5]);
        let kept = prune(&s, &fit, 3.0).unwrap();
        assert_eq!(kept.values(), &[1.0, 2.5, -0.5]);
        assert_eq!(kept.times(), &[0.0, 1.0, 3.0]);
    }

    #[test]
    fn rejects_bad_alpha() {
        let s = series(&[0.0, 1.0]);
        let f = fit_gaussian(&s).unwrap();
        assert!(prune(&s, &f, 0.0).is_err());
    }
}
