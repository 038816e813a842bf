//! The Jordan-cell exponent `E = [[a, 0], [1, a]]` in the plane: the function
//! `α(θ)`, `τ_E` along three curve families and curve-restricted moduli.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modulus::{log_e, CV_GATE};
use super::stats::{ols_slope, Estimate};
use crate::covariance::FieldModel;
use crate::error::{FieldError, Result};
use crate::exponent::{ExponentSpec, JordanBlock};
use crate::quadrature::{golden_section_min, integrate, Tolerance};
use crate::sampler::CholeskySampler;

/// The exponent `[[a, 0], [1, a]]`.
pub fn planar_cell_exponent(a: f64) -> Result<ExponentSpec> {
    ExponentSpec::new(vec![JordanBlock::cell(a, 2)], None)
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(FieldError::Domain(format!("a must exceed 1, got {a}")));
    }
    Ok(())
}

/// `α(θ) = ∫₀¹ t^{a-1} √(1 + (θ + ln t)²) dt`, computed as
/// `∫₀^∞ e^{-au} √(1 + (θ - u)²) du`.
pub fn alpha_theta(a: f64, theta: f64) -> Result<f64> {
    check_a(a)?;
    if !theta.is_finite() {
        return Err(FieldError::Domain(format!("θ must be finite, got {theta}")));
    }
    let top = (30.0 + (theta.abs() + 30.0).ln()) / a;
    let f = |u: f64| (-a * u).exp() * (1.0 + (theta - u) * (theta - u)).sqrt();
    let tol = Tolerance::new(0.0, 1e-12);
    let value = if theta > 0.0 && theta < top {
        integrate(f, 0.0, theta, tol).value + integrate(f, theta, top, tol).value
    } else {
        integrate(f, 0.0, top, tol).value
    };
    Ok(value)
}

/// `(θ₀, α(θ₀))` minimising the convex function `α`.
pub fn alpha_argmin(a: f64) -> Result<(f64, f64)> {
    check_a(a)?;
    let (theta, value) = golden_section_min(|t| alpha_theta(a, t).unwrap_or(f64::INFINITY), -20.0, 20.0, 1e-9);
    Ok((theta, value))
}

/// Curve families along which `‖y‖ → 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Curve {
    /// `θ = c - ln s`.
    LogShift { c: f64 },
    /// `θ = ±∞`, i.e. `y = (0, a s^a)`.
    Axis,
    /// Fixed finite `θ`.
    FixedTheta { theta: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveRow {
    pub y_norm: f64,
    /// Curve parameter; equals `τ_E(y)` by construction.
    pub s: f64,
    pub tau: f64,
    pub predicted: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveTable {
    pub a: f64,
    pub curve: Curve,
    pub rows: Vec<CurveRow>,
    /// Slope of `ln ratio` against `ln ‖y‖` over the smallest decade.
    pub tail_slope: f64,
    pub slope_tol: f64,
    pub stable: bool,
}

pub const SLOPE_TOL: f64 = 0.05;

/// `y(s, θ, w) = (-1)^w s^a / α(θ) · (1, θ + ln s)`.
pub fn curve_point(a: f64, s: f64, theta: f64, w: u8) -> Result<Vec<f64>> {
    let sign = if w.is_multiple_of(2) { 1.0 } else { -1.0 };
    let scale = sign * s.powf(a) / alpha_theta(a, theta)?;
    Ok(vec![scale, scale * (theta + s.ln())])
}

fn point_on(a: f64, curve: Curve, s: f64) -> Result<Vec<f64>> {
    match curve {
        Curve::LogShift { c } => {
            let alpha = alpha_theta(a, c - s.ln())?;
            let v = s.powf(a) / alpha;
            Ok(vec![v, c * v])
        }
        Curve::Axis => Ok(vec![0.0, a * s.powf(a)]),
        Curve::FixedTheta { theta } => curve_point(a, s, theta, 0),
    }
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Curve parameter `s` with `‖y(s)‖ = target`, by bisection in `ln s`.
fn solve_s(a: f64, curve: Curve, target: f64) -> Result<f64> {
    let g = |l: f64| -> Result<f64> { Ok(norm(&point_on(a, curve, l.exp())?).ln() - target.ln()) };
    let mut lo = target.ln() / a - 1.0;
    while g(lo)? > 0.0 {
        lo -= 4.0;
    }
    let mut hi = lo + 1.0;
    while g(hi)? < 0.0 {
        hi += 1.0;
        if hi > 50.0 {
            return Err(FieldError::Numeric("curve parameter bracket failed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// `τ_E(y)` against the predicted power-log law along `curve` at the
/// requested norms (decreasing, each in `(0, 1)`).
pub fn planar_cell_curves(a: f64, curve: Curve, y_norms: &[f64]) -> Result<CurveTable> {
    check_a(a)?;
    if y_norms.len() < 2 || y_norms.iter().any(|v| !(*v > 0.0 && *v < 1.0)) || y_norms.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(FieldError::Domain(
            "y_norms must be a decreasing sequence in (0, 1) of length ≥ 2".into(),
        ));
    }
    let e = planar_cell_exponent(a)?;
    let rows: Vec<CurveRow> = y_norms
        .par_iter()
        .map(|&rho| -> Result<CurveRow> {
            let s = match curve {
                Curve::Axis => (rho / a).powf(1.0 / a),
                _ => solve_s(a, curve, rho)?,
            };
            let y = point_on(a, curve, s)?;
            let y_norm = norm(&y);
            let tau = e.tau(&y)?;
            let l = y_norm.ln().abs();
            let base = y_norm.powf(1.0 / a);
            let predicted = match curve {
                Curve::LogShift { .. } => base * l.powf(1.0 / a),
                Curve::Axis => base * a.powf(-1.0 / a),
                Curve::FixedTheta { .. } => base * l.powf(-1.0 / a),
            };
            Ok(CurveRow {
                y_norm,
                s,
                tau,
                predicted,
                ratio: tau / predicted,
            })
        })
        .collect::<Result<_>>()?;
    let floor = rows.last().map(|r| r.y_norm).unwrap_or(0.0);
    let tail: Vec<&CurveRow> = rows
        .iter()
        .filter(|r| r.y_norm <= 10.0 * floor * (1.0 + 1e-9))
        .collect();
    let tail_slope = if tail.len() >= 2 {
        let x: Vec<f64> = tail.iter().map(|r| r.y_norm.ln()).collect();
        let y: Vec<f64> = tail.iter().map(|r| r.ratio.ln()).collect();
        ols_slope(&x, &y)
    } else {
        f64::NAN
    };
    Ok(CurveTable {
        a,
        curve,
        rows,
        tail_slope,
        slope_tol: SLOPE_TOL,
        stable: tail_slope.abs() <= SLOPE_TOL,
    })
}

/// Curve-restricted point sets for the directional moduli.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `{(t, t)}`.
    Diagonal,
    /// `{(0, t)}`.
    Vertical,
    /// `i·y(2^{-n}, θ₀, 0) + (0, 1)` with `θ₀` minimising `α`.
    Ray,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionalReport {
    pub family: Family,
    pub a: f64,
    pub theta0: Option<f64>,
    /// `‖y‖` bounds (line families) or step norms per level (ray), decreasing.
    pub radii: Vec<f64>,
    pub levels: Vec<u32>,
    pub primary_normalizer: String,
    pub alternative_normalizer: String,
    /// `[replica][radius]`.
    pub primary: Vec<Vec<f64>>,
    pub alternative: Vec<Vec<f64>>,
    pub primary_estimates: Vec<Estimate>,
    pub alternative_estimates: Vec<Estimate>,
    pub cv_gate: f64,
    pub concentrated: bool,
}

/// `(‖y‖ log(1/‖y‖))^{1/a} √log(1 + ‖y‖⁻¹)`.
type NormFn = fn(f64, f64) -> f64;

fn diagonal_norm(a: f64, rho: f64) -> f64 {
    (rho * log_e(1.0 / rho)).powf(1.0 / a) * log_e(1.0 + 1.0 / rho).sqrt()
}

/// `‖y‖^{1/a} √log(1 + ‖y‖⁻¹)`.
fn axis_norm(a: f64, rho: f64) -> f64 {
    rho.powf(1.0 / a) * log_e(1.0 + 1.0 / rho).sqrt()
}

fn estimates(rows: &[Vec<f64>], seed: u64) -> Vec<Estimate> {
    let m = rows.first().map(|r| r.len()).unwrap_or(0);
    (0..m)
        .map(|k| {
            let xs: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            Estimate::from_samples(&xs, 2000, 0.95, seed ^ k as u64)
        })
        .collect()
}

/// Sup statistics restricted to one of the curve families. For the line
/// families `levels` holds a single dyadic level and the radii are
/// `2^k` grid steps; for the ray each level `n` is sampled separately.
pub fn planar_cell_directional_modulus(
    model: &FieldModel,
    a: f64,
    family: Family,
    levels: &[u32],
    replica_count: usize,
    master_seed: u64,
) -> Result<DirectionalReport> {
    check_a(a)?;
    let e = model.exponent();
    if e.dim() != 2 || e.block_count() != 1 || (e.min_a() - a).abs() > 1e-12 || e.has_rotation() {
        return Err(FieldError::Domain(
            "model must use the planar Jordan-cell exponent with the given a".into(),
        ));
    }
    if levels.is_empty() || replica_count == 0 {
        return Err(FieldError::Domain("need at least one level and one replica".into()));
    }
    let (pn, an) = match family {
        Family::Diagonal => (
            "(|y| log(1/|y|))^(1/a) sqrt(log(1+1/|y|))",
            "|y|^(1/a) sqrt(log(1+1/|y|))",
        ),
        Family::Vertical => (
            "|y|^(1/a) sqrt(log(1+1/|y|))",
            "(|y| log(1/|y|))^(1/a) sqrt(log(1+1/|y|))",
        ),
        Family::Ray => (
            "|y|^(1/a) sqrt(log(1+1/|y|)) / log(1/|y|)^(1/a)",
            "r sqrt(log(1+1/r)), r = 2^-n",
        ),
    };
    let mut theta0 = None;
    let (radii, primary, alternative) = match family {
        Family::Diagonal | Family::Vertical => {
            let level = levels[0];
            if level == 0 || level > 11 {
                return Err(FieldError::Domain(format!(
                    "line level must lie in 1..=11, got {level}"
                )));
            }
            let m = 1usize << level;
            let dir = if family == Family::Diagonal {
                [1.0, 1.0]
            } else {
                [0.0, 1.0]
            };
            let points: Vec<Vec<f64>> = (0..=m)
                .map(|i| {
                    let t = i as f64 / m as f64;
                    vec![dir[0] * t, dir[1] * t]
                })
                .collect();
            let step = norm(&dir) / m as f64;
            let count = (level as usize).min(4);
            let radii: Vec<f64> = (0..count)
                .rev()
                .map(|k| step * 2f64.powi(k as i32) * 1.000001)
                .collect();
            let sampler = CholeskySampler::new(model, &points)?;
            let (p_fn, a_fn): (NormFn, NormFn) = if family == Family::Diagonal {
                (diagonal_norm, axis_norm)
            } else {
                (axis_norm, diagonal_norm)
            };
            let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..replica_count as u64)
                .into_par_iter()
                .map(|rep| {
                    let v = sampler.sample(master_seed, rep).values;
                    let mut best_p = vec![0.0f64; radii.len()];
                    let mut best_a = vec![0.0f64; radii.len()];
                    for lag in 1..=m {
                        let rho = step * lag as f64;
                        if rho > radii[0] {
                            break;
                        }
                        let mx = (0..=m - lag).map(|i| (v[i + lag] - v[i]).abs()).fold(0.0, f64::max);
                        for (k, &r) in radii.iter().enumerate() {
                            if rho <= r {
                                best_p[k] = best_p[k].max(mx / p_fn(a, rho));
                                best_a[k] = best_a[k].max(mx / a_fn(a, rho));
                            }
                        }
                    }
                    (best_p, best_a)
                })
                .collect();
            let (p, alt): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            (radii, p, alt)
        }
        Family::Ray => {
            let (t0, alpha0) = alpha_argmin(a)?;
            theta0 = Some(t0);
            let mut levels_sorted = levels.to_vec();
            levels_sorted.sort_unstable();
            let mut radii = Vec::new();
            let mut per_level: Vec<Vec<(f64, f64)>> = Vec::new();
            for &n in &levels_sorted {
                let r = 0.5f64.powi(n as i32);
                let y = curve_point(a, r, t0, 0)?;
                let rho = norm(&y);
                let kx = alpha0 * 2f64.powf(a * n as f64);
                let k_max = if y[1] < 0.0 { kx.min(-1.0 / y[1]) } else { 0.0 };
                let k_n = k_max.floor() as usize;
                if k_n < 2 {
                    return Err(FieldError::Domain(format!("ray at level {n} leaves the unit square")));
                }
                let points: Vec<Vec<f64>> = (0..=k_n)
                    .map(|i| vec![i as f64 * y[0], 1.0 + i as f64 * y[1]])
                    .collect();
                let sampler = CholeskySampler::new(model, &points)?;
                let p_den = axis_norm(a, rho) / log_e(1.0 / rho).powf(1.0 / a);
                let a_den = r * log_e(1.0 + 1.0 / r).sqrt();
                let col: Vec<(f64, f64)> = (0..replica_count as u64)
                    .into_par_iter()
                    .map(|rep| {
                        let v = sampler.sample(master_seed ^ n as u64, rep).values;
                        let mx = v.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
                        (mx / p_den, mx / a_den)
                    })
                    .collect();
                radii.push(rho);
                per_level.push(col);
            }
            let p: Vec<Vec<f64>> = (0..replica_count)
                .map(|r| per_level.iter().map(|c| c[r].0).collect())
                .collect();
            let alt: Vec<Vec<f64>> = (0..replica_count)
                .map(|r| per_level.iter().map(|c| c[r].1).collect())
                .collect();
            (radii, p, alt)
        }
    };
    let primary_estimates = estimates(&primary, master_seed);
    let alternative_estimates = estimates(&alternative, master_seed ^ 7);
    let tail = primary_estimates.len().saturating_sub(2);
    let concentrated = replica_count >= 2 && primary_estimates[tail..].iter().all(|e| e.cv < CV_GATE);
    let mut levels_out = levels.to_vec();
    if family == Family::Ray {
        levels_out.sort_unstable();
    }
    Ok(DirectionalReport {
        family,
        a,
        theta0,
        radii,
        levels: levels_out,
        primary_normalizer: pn.into(),
        alternative_normalizer: an.into(),
        primary,
        alternative,
        primary_estimates,
        alternative_estimates,
        cv_gate: CV_GATE,
        concentrated,
    })
}
