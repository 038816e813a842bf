//! Deterministic second-moment checks: operator scaling and truncation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::FieldModel;
use crate::error::{FieldError, Result};

pub const SCALING_TOL: f64 = 5e-4;
pub const TRUNCATION_SLACK: f64 = 1e-3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingReport {
    pub factors: Vec<f64>,
    pub lags: Vec<Vec<f64>>,
    /// `|γ(c^E h) - c²γ(h)| / c²γ(h)`, `[factor][lag]`.
    pub rel_errors: Vec<Vec<f64>>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `count` lags drawn uniformly in `[-1, 1]^N` away from the origin.
pub fn random_lags(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| loop {
            let h: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if h.iter().map(|v| v * v).sum::<f64>() > 1e-4 {
                break h;
            }
        })
        .collect()
}

/// Compares `γ(c^E h)` with `c² γ(h)`.
pub fn scaling_check(model: &FieldModel, lags: &[Vec<f64>], factors: &[f64]) -> Result<ScalingReport> {
    if factors.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(FieldError::Domain(format!(
            "scale factors must be positive, got {factors:?}"
        )));
    }
    let base = model.variogram_many(lags)?;
    let e = model.exponent();
    let mut rel_errors = Vec::with_capacity(factors.len());
    for &c in factors {
        let scaled: Vec<Vec<f64>> = lags.iter().map(|h| e.apply_power_log(c.ln(), h)).collect();
        let g = model.variogram_many(&scaled)?;
        rel_errors.push(
            g.iter()
                .zip(&base)
                .map(|(gs, gb)| (gs - c * c * gb).abs() / (c * c * gb))
                .collect::<Vec<f64>>(),
        );
    }
    let max_rel_err = rel_errors.iter().flatten().copied().fold(0.0, f64::max);
    Ok(ScalingReport {
        factors: factors.to_vec(),
        lags: lags.to_vec(),
        rel_errors,
        max_rel_err,
        tol: SCALING_TOL,
        pass: max_rel_err <= SCALING_TOL,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationSample {
    pub t: Vec<f64>,
    pub u: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationReport {
    pub r0: f64,
    pub samples: Vec<TruncationSample>,
    pub max_ratio: f64,
    pub slack: f64,
    pub pass: bool,
}

/// `count` random `(t, u)` with `τ_E(t)·u ≤ r₀`: `t` uniform in `[-1, 1]^N`,
/// `u` log-uniform between `10⁻³` and `1` times its upper bound.
pub fn truncation_study(model: &FieldModel, count: usize, seed: u64) -> Result<TruncationReport> {
    let r0 = model.truncation_radius()?;
    let e = model.exponent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(Vec<f64>, f64)> = random_lags(e.dim(), count, rng.random())
        .into_iter()
        .map(|t| {
            let frac = (rng.random_range(-3.0f64..0.0) * std::f64::consts::LN_10).exp();
            (t, frac)
        })
        .collect();
    let samples: Vec<TruncationSample> = draws
        .into_par_iter()
        .map(|(t, frac)| -> Result<TruncationSample> {
            let u = frac * r0 / e.tau(&t)?;
            let c = model.truncation_check(&t, u)?;
            Ok(TruncationSample {
                t,
                u,
                lhs: c.lhs,
                rhs: c.rhs,
            })
        })
        .collect::<Result<_>>()?;
    let max_ratio = samples.iter().map(|s| s.lhs / s.rhs).fold(0.0, f64::max);
    Ok(TruncationReport {
        r0,
        samples,
        max_ratio,
        slack: TRUNCATION_SLACK,
        pass: max_ratio <= 1.0 + TRUNCATION_SLACK,
    })
}
