//! Conditional-variance ratios for strong local nondeterminism.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::ols_slope;
use crate::covariance::FieldModel;
use crate::error::{FieldError, Result};
use crate::linalg::symmetric_pinv;

/// Relative eigenvalue cutoff for the conditioning pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

pub const DEFAULT_MAX_POINTS: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SlndReport {
    pub configs: Vec<Vec<Vec<f64>>>,
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Scale factors `c` (one per config) when the configs are rescalings
    /// `c^E t` of one base configuration.
    pub scales: Option<Vec<f64>>,
    /// Slope of `ln ratio` against `ln c`.
    pub scale_slope: Option<f64>,
}

/// `Var(X(tⁿ) | X(t¹), …, X(tⁿ⁻¹)) / min_{0≤k<n} τ_E(tⁿ - tᵏ)²` with `t⁰ = 0`.
pub fn slnd_ratio(model: &FieldModel, points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(FieldError::Domain("need at least one point".into()));
    }
    let e = model.exponent();
    let last = &points[n - 1];
    let mut min_tau = e.tau(last)?;
    for p in &points[..n - 1] {
        let d: Vec<f64> = last.iter().zip(p).map(|(a, b)| a - b).collect();
        min_tau = min_tau.min(e.tau(&d)?);
    }
    if min_tau == 0.0 {
        return Err(FieldError::Domain(
            "last point coincides with an earlier point or the origin".into(),
        ));
    }
    let cov = model.covariance_matrix(points)?;
    let var = if n == 1 {
        cov[(0, 0)]
    } else {
        let sigma = cov.view((0, 0), (n - 1, n - 1)).into_owned();
        let c = DVector::from_iterator(n - 1, (0..n - 1).map(|i| cov[(i, n - 1)]));
        let pinv = symmetric_pinv(&sigma, PINV_CUTOFF);
        cov[(n - 1, n - 1)] - c.dot(&(&pinv * &c))
    };
    Ok(var / (min_tau * min_tau))
}

fn summarize(configs: Vec<Vec<Vec<f64>>>, ratios: Vec<f64>) -> SlndReport {
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    SlndReport {
        configs,
        ratios,
        min_ratio,
        max_ratio,
        scales: None,
        scale_slope: None,
    }
}

/// Ratios for `count` random configurations of `1..=max_points` points
/// drawn uniformly in `[0, 1]^N`.
pub fn slnd_random(model: &FieldModel, count: usize, max_points: usize, seed: u64) -> Result<SlndReport> {
    if !(1..=DEFAULT_MAX_POINTS).contains(&max_points) {
        return Err(FieldError::Domain(format!(
            "max_points must lie in 1..={DEFAULT_MAX_POINTS}, got {max_points}"
        )));
    }
    let n = model.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut configs = Vec::with_capacity(count);
    let mut ratios = Vec::with_capacity(count);
    for _ in 0..count {
        let m = rng.random_range(1..=max_points);
        let pts: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
        ratios.push(slnd_ratio(model, &pts)?);
        configs.push(pts);
    }
    Ok(summarize(configs, ratios))
}

/// Ratios for `c^E t` over the given scale factors.
pub fn slnd_scaling(model: &FieldModel, points: &[Vec<f64>], scales: &[f64]) -> Result<SlndReport> {
    let e = model.exponent();
    let mut configs = Vec::with_capacity(scales.len());
    let mut ratios = Vec::with_capacity(scales.len());
    for &c in scales {
        if !(c > 0.0) {
            return Err(FieldError::Domain(format!("scale must be positive, got {c}")));
        }
        let pts: Vec<Vec<f64>> = points.iter().map(|p| e.apply_power_log(c.ln(), p)).collect();
        ratios.push(slnd_ratio(model, &pts)?);
        configs.push(pts);
    }
    let mut report = summarize(configs, ratios);
    if scales.len() >= 2 {
        let lx: Vec<f64> = scales.iter().map(|c| c.ln()).collect();
        let ly: Vec<f64> = report.ratios.iter().map(|r| r.ln()).collect();
        report.scale_slope = Some(ols_slope(&lx, &ly));
    }
    report.scales = Some(scales.to_vec());
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::ExponentSpec;

    fn oracle() -> FieldModel {
        FieldModel::tau_dual(ExponentSpec::diagonal(&[2.0]).unwrap()).unwrap()
    }

    #[test]
    fn single_point_is_comparability_ratio() {
        let model = oracle();
        let r = slnd_ratio(&model, &[vec![0.3]]).unwrap();
        assert!((r - model.comparability_ratio(&[0.3]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn brownian_conditioning() {
        // Cov = 4π(|s| + |t| - |s - t|) is 8π·min(s, t): conditional variance
        // of X(3/4) given X(1/4), X(1/2) is 8π/4, and τ_E(h)² = |h|/2.
        let model = oracle();
        let r = slnd_ratio(&model, &[vec![0.25], vec![0.5], vec![0.75]]).unwrap();
        let want = (8.0 * std::f64::consts::PI / 4.0) / 0.125;
        assert!((r - want).abs() < 1e-6 * want, "{r} vs {want}");
    }

    #[test]
    fn duplicate_point_is_rejected() {
        let model = oracle();
        assert!(matches!(
            slnd_ratio(&model, &[vec![0.5], vec![0.5]]),
            Err(FieldError::Domain(_))
        ));
    }
}
