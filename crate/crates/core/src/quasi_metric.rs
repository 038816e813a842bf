//! The norm `‖x‖_E = ∫₀¹ ‖t^E x‖ dt/t` and the polar decomposition
//! `x = τ_E(x)^E l_E(x)` with `‖l_E(x)‖_E = 1`.
//!
//! With `t = e^{-w}` the norm becomes `F(0)` for `F(σ) = ∫_σ^∞ ‖e^{-wE}x‖ dw`,
//! and `‖e^{-σE}x‖_E = F(σ)`, so `ln τ_E(x)` is the root of `F(σ) = 1`.
//! `F` is strictly decreasing with `F' = -‖e^{-σE}x‖`; the root is found by a
//! bracketed Newton iteration on `ln F` where each update integrates only the
//! stretch between consecutive iterates.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::exponent::ExponentSpec;
use crate::quadrature::{integrate, integrate_to_infinity, Tolerance};

const MAX_ITER: usize = 200;

/// Result of [`ExponentSpec::polar_decompose`]. The origin has `tau = 0`
/// and no direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarCoordinates {
    pub tau: f64,
    pub direction: Option<Vec<f64>>,
}

/// One level of the dyadic profile along the diagonal ray.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DyadicLevel {
    pub n: u32,
    pub min_tau: f64,
    pub argmin: u64,
    pub tau_unit: f64,
    pub ratio: f64,
}

struct Orbit<'a> {
    spec: &'a ExponentSpec,
    y: Vec<f64>,
    z: Vec<f64>,
}

impl<'a> Orbit<'a> {
    fn new(spec: &'a ExponentSpec, x: &[f64]) -> Self {
        Self {
            spec,
            y: spec.to_canonical(x),
            z: vec![0.0; x.len()],
        }
    }

    /// `‖e^{-wE} x‖`.
    fn speed(&mut self, w: f64) -> f64 {
        self.spec.apply_canonical_power(-w, &self.y, &mut self.z);
        let p = self.spec.similarity();
        let n = self.z.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut r = 0.0;
            for j in 0..n {
                r += p[(i, j)] * self.z[j];
            }
            acc += r * r;
        }
        acc.sqrt()
    }

    fn tail(&mut self, from: f64) -> f64 {
        integrate_to_infinity(|w| self.speed(w), from, 1.0, tol()).value
    }

    fn between(&mut self, a: f64, b: f64) -> f64 {
        integrate(|w| self.speed(w), a, b, tol()).value
    }
}

fn tol() -> Tolerance {
    Tolerance::new(1e-300, 1e-13)
}

fn euclid(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl ExponentSpec {
    /// `‖x‖_E`.
    pub fn e_norm(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        Ok(Orbit::new(self, x).tail(0.0))
    }

    /// `ln τ_E(x)` for `x ≠ 0`.
    pub fn log_tau(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        let norm = euclid(x);
        if norm == 0.0 {
            return Err(FieldError::Domain("ln τ is undefined at the origin".into()));
        }
        let mut orbit = Orbit::new(self, x);
        let a_mid = 0.5 * (self.min_a() + self.max_a());
        let s0 = norm.ln() / a_mid;
        let f0 = orbit.tail(s0);

        // bracket [lo, hi] with F(lo) >= 1 >= F(hi)
        let (mut lo, mut f_lo, mut hi, mut f_hi) = (s0, f0, s0, f0);
        let mut step = 0.5;
        let mut guard = 0;
        while f_hi > 1.0 {
            let next = hi + step;
            f_hi -= orbit.between(hi, next);
            hi = next;
            step *= 2.0;
            guard += 1;
            if guard > 80 {
                return Err(FieldError::Numeric(format!("τ bracket failed at {x:?}")));
            }
        }
        while f_lo < 1.0 {
            let next = lo - step;
            f_lo += orbit.between(next, lo);
            lo = next;
            step *= 2.0;
            guard += 1;
            if guard > 80 {
                return Err(FieldError::Numeric(format!("τ bracket failed at {x:?}")));
            }
        }
        if f_lo == 1.0 {
            return Ok(lo);
        }
        if f_hi == 1.0 {
            return Ok(hi);
        }

        let (mut s, mut f) = if (f_lo - 1.0).abs() < (1.0 - f_hi).abs() {
            (lo, f_lo)
        } else {
            (hi, f_hi)
        };
        for _ in 0..MAX_ITER {
            let g = f.ln();
            if g.abs() < 1e-15 {
                return Ok(s);
            }
            let speed = orbit.speed(s);
            let mut next = s + f * g / speed;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let delta = if next > s {
                -orbit.between(s, next)
            } else {
                orbit.between(next, s)
            };
            let f_next = f + delta;
            if (next - s).abs() <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
                return Ok(next);
            }
            if f_next > 1.0 {
                lo = next;
            } else {
                hi = next;
            }
            s = next;
            f = f_next;
            if hi - lo <= 4.0 * f64::EPSILON * (1.0 + s.abs()) {
                return Ok(s);
            }
        }
        Err(FieldError::Numeric(format!(
            "τ root-finder did not converge after {MAX_ITER} iterations at {x:?}"
        )))
    }

    /// `τ_E(x)`, with `τ_E(0) = 0`.
    pub fn tau(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        Ok(self.log_tau(x)?.exp())
    }

    /// `(τ_E(x), l_E(x))`.
    pub fn polar_decompose(&self, x: &[f64]) -> Result<PolarCoordinates> {
        self.check_point(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(PolarCoordinates {
                tau: 0.0,
                direction: None,
            });
        }
        let lt = self.log_tau(x)?;
        Ok(PolarCoordinates {
            tau: lt.exp(),
            direction: Some(self.apply_power_log(-lt, x)),
        })
    }

    /// Whether `x` lies in the ball `B_E(r) = {τ_E ≤ r}`.
    pub fn in_ball(&self, x: &[f64], r: f64) -> Result<bool> {
        if r < 0.0 {
            return Err(FieldError::Domain(format!("ball radius must be >= 0, got {r}")));
        }
        Ok(self.tau(x)? <= r)
    }

    /// Largest sampled `τ_E(x+y) / (τ_E(x) + τ_E(y))`.
    pub fn estimate_quasi_triangle_constant<R: Rng + ?Sized>(&self, sample_count: usize, rng: &mut R) -> Result<f64> {
        if sample_count < 100 {
            return Err(FieldError::Domain(format!(
                "need at least 100 samples, got {sample_count}"
            )));
        }
        let n = self.dim();
        let mut best: f64 = 0.0;
        for k in 0..sample_count {
            let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut y: Vec<f64> = if k % 4 == 0 {
                // near-equal pairs probe the x = y regime
                x.iter()
                    .map(|v| v + 1e-3 * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            } else {
                (0..n).map(|_| rng.sample(StandardNormal)).collect()
            };
            let sx: f64 = rng.random_range(-3.0..3.0);
            let sy: f64 = rng.random_range(-3.0..3.0);
            x = self.apply_power_log(sx, &x);
            y = self.apply_power_log(sy, &y);
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let denom = self.tau(&x)? + self.tau(&y)?;
            if denom > 0.0 {
                best = best.max(self.tau(&sum)? / denom);
            }
        }
        Ok(best)
    }

    /// `τ_E(x̄_j) / τ_E(x)` for the component `x̄_j` in `W_j`.
    pub fn projection_ratio(&self, x: &[f64], j: usize) -> Result<f64> {
        let t = self.tau(x)?;
        if t == 0.0 {
            return Err(FieldError::Domain("projection ratio needs x ≠ 0".into()));
        }
        Ok(self.tau(&self.project_invariant(x, j)?)? / t)
    }

    /// Minima of `τ_E(⟨i 2⁻ⁿ⟩)` over `1 ≤ i ≤ 2ⁿ`, where `⟨c⟩ = (c, ..., c)`.
    pub fn dyadic_tau_profile(&self, n_max: u32) -> Result<Vec<DyadicLevel>> {
        if n_max > 22 {
            return Err(FieldError::Domain(format!("n_max must be <= 22, got {n_max}")));
        }
        let n_dim = self.dim();
        let diag = |c: f64| vec![c; n_dim];
        let mut out = Vec::new();
        for n in 1..=n_max {
            let count = 1u64 << n;
            let h = (n as f64).exp2().recip();
            let mut min_tau = f64::INFINITY;
            let mut argmin = 0;
            for i in 1..=count {
                let t = self.tau(&diag(i as f64 * h))?;
                if t < min_tau {
                    min_tau = t;
                    argmin = i;
                }
            }
            let tau_unit = self.tau(&diag(h))?;
            out.push(DyadicLevel {
                n,
                min_tau,
                argmin,
                tau_unit,
                ratio: min_tau / tau_unit,
            });
        }
        Ok(out)
    }

    /// Shape of the two-sided bound on `τ_E` inside one invariant subspace:
    /// `‖x‖^{1/a_j} |ln ‖x‖|^{∓(l_j-1)/a_j}`.
    pub fn holder_envelope(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_point(x)?;
        let norm = euclid(x);
        if !(norm > 0.0 && norm < 1.0) {
            return Err(FieldError::Domain(format!("envelope needs 0 < ‖x‖ < 1, got {norm}")));
        }
        let mut owner = None;
        for j in 0..self.block_count() {
            let part = self.project_invariant(x, j)?;
            let rest: f64 = x.iter().zip(&part).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if rest <= 1e-10 * norm {
                owner = Some(j);
                break;
            }
        }
        let j = owner.ok_or_else(|| FieldError::Domain("point does not lie in a single invariant subspace".into()))?;
        let blk = &self.blocks()[j];
        let base = norm.powf(1.0 / blk.a);
        let log_pow = (blk.size_l() as f64 - 1.0) / blk.a;
        let l = norm.ln().abs();
        Ok((base * l.powf(-log_pow), base * l.powf(log_pow)))
    }
}
