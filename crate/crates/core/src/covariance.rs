//! Variogram and covariance of the harmonizable field
//! `X(t) = ∫ (e^{i⟨t,ξ⟩} - 1) ψ(ξ)^{-(1+Q/2)} M(dξ)`.
//!
//! Frequencies are written `ξ = e^{sE'} ω` with `ω` on the ellipsoid
//! `{ωᵀBω = 1}`, where `EB + BE' = I`. Every orbit of `e^{sE'}` crosses the
//! ellipsoid once, and `dξ = e^{sQ} |det M| ½|ω|² ds dS(u)` for `ω = M u`,
//! `u` on the unit sphere and `B = M^{-T} M^{-1}`. Since
//! `ψ(e^{sE'}ω) = e^s ψ(ω)`,
//!
//! `γ(h) = 2 Σ_k A_k ∫ (1 - cos v_k(s)) e^{-2s} ds`, `v_k(s) = ⟨e^{sE}h, ω_k⟩`,
//!
//! with `A_k` collecting the angular weight, the Jacobian and `ψ(ω_k)`. Each
//! radial integral is shifted by `ln τ_E(h)`, which makes `γ(c^E h) = c²γ(h)`
//! hold to the accuracy of `τ_E`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::exponent::{mat_vec, BlockKind, ExponentSpec, Phase};
use crate::linalg::lyapunov;
use crate::psi::HomogeneousPsi;
use crate::quadrature::{gauss_legendre, integrate, Tolerance};

/// Angular and radial resolution of the variogram quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureProfile {
    /// Gauss–Legendre nodes per arc of the half circle (N = 2).
    pub nodes_per_arc: usize,
    /// Trapezoid nodes on the half circle when no arc breaks exist (N = 2).
    pub circle_nodes: usize,
    /// Gauss–Legendre nodes per polar angle (N ≥ 3).
    pub polar_nodes: usize,
    /// Trapezoid nodes in the azimuth (N ≥ 3).
    pub azimuth_nodes: usize,
    /// Phase magnitude beyond which the radial tail is handled asymptotically.
    pub phase_cutoff: f64,
    /// Relative tolerance of each adaptive radial panel.
    pub radial_rel_tol: f64,
}

impl Default for QuadratureProfile {
    fn default() -> Self {
        Self {
            nodes_per_arc: 48,
            circle_nodes: 96,
            polar_nodes: 16,
            azimuth_nodes: 32,
            phase_cutoff: 30.0,
            radial_rel_tol: 1e-10,
        }
    }
}

/// The frequency band `{ξ : τ_{E'}(ξ) ∈ (lo, hi]}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyBand {
    lo: f64,
    hi: f64,
}

impl FrequencyBand {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi) || lo.is_nan() || hi.is_nan() {
            return Err(FieldError::Domain(format!("band needs 0 <= lo < hi, got ({lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn full() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_full(&self) -> bool {
        self.lo == 0.0 && self.hi == f64::INFINITY
    }

    /// Log-radius window `(ln lo - ln τ', ln hi - ln τ']` for a node whose
    /// dual radius is `τ' = e^{log_tau_dual}`.
    pub(crate) fn log_window(&self, log_tau_dual: f64) -> (f64, f64) {
        (self.lo.ln() - log_tau_dual, self.hi.ln() - log_tau_dual)
    }
}

/// One direction of the angular rule.
#[derive(Clone, Debug)]
pub struct AngularNode {
    /// Point `ω` on the transversal ellipsoid.
    pub omega: Vec<f64>,
    /// `Pᵀω`, the phase coefficients against canonical coordinates.
    pub alpha: Vec<f64>,
    /// Angular weight times Jacobian times `ψ(ω)^{-(2+Q)}`; covers `±ω`.
    pub weight: f64,
    /// Cell measure factor without `ψ`: angular weight times Jacobian.
    pub measure: f64,
    pub psi: f64,
    pub log_tau_dual: f64,
}

/// Result of [`FieldModel::truncation_check`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// An operator-scaling field: exponent, density and quadrature.
#[derive(Clone, Debug)]
pub struct FieldModel {
    exponent: ExponentSpec,
    psi: HomogeneousPsi,
    profile: QuadratureProfile,
    q: f64,
    transversal: DMatrix<f64>,
    det_transversal: f64,
    nodes: Vec<AngularNode>,
    r0: OnceLock<f64>,
}

impl FieldModel {
    pub fn new(exponent: ExponentSpec, psi: HomogeneousPsi) -> Result<Self> {
        Self::with_profile(exponent, psi, QuadratureProfile::default())
    }

    pub fn with_profile(exponent: ExponentSpec, psi: HomogeneousPsi, profile: QuadratureProfile) -> Result<Self> {
        if !psi.is_certified() {
            return Err(FieldError::Config(
                "spectral density must be certified before building a model".into(),
            ));
        }
        let e = exponent.assemble_matrix();
        let mismatch = (psi.dual().assemble_matrix() - e.transpose()).norm();
        if mismatch > 1e-10 * e.norm() {
            return Err(FieldError::Config(
                "spectral density was built for a different exponent".into(),
            ));
        }
        if profile.nodes_per_arc < 2 || profile.circle_nodes < 4 {
            return Err(FieldError::Config("quadrature profile is too coarse".into()));
        }
        let n = exponent.dim();
        let b = lyapunov(&e, &DMatrix::identity(n, n))?;
        let chol = b
            .clone()
            .cholesky()
            .ok_or_else(|| FieldError::Numeric("Lyapunov solution is not positive definite".into()))?;
        let transversal = chol
            .l()
            .transpose()
            .try_inverse()
            .ok_or_else(|| FieldError::Numeric("transversal map is singular".into()))?;
        let det_transversal = transversal.determinant().abs();
        let q = exponent.trace();
        let mut model = Self {
            exponent,
            psi,
            profile,
            q,
            transversal,
            det_transversal,
            nodes: Vec::new(),
            r0: OnceLock::new(),
        };
        let rule = model.angular_rule(None)?;
        model.nodes = rule;
        Ok(model)
    }

    /// The 1-D, `ψ = τ_{E'}` model with `E = [a]`.
    pub fn tau_dual(exponent: ExponentSpec) -> Result<Self> {
        let psi = HomogeneousPsi::tau_dual(&exponent);
        Self::new(exponent, psi)
    }

    pub fn exponent(&self) -> &ExponentSpec {
        &self.exponent
    }

    pub fn psi(&self) -> &HomogeneousPsi {
        &self.psi
    }

    pub fn profile(&self) -> &QuadratureProfile {
        &self.profile
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.exponent.dim()
    }

    pub fn nodes(&self) -> &[AngularNode] {
        &self.nodes
    }

    fn make_node(&self, u: &[f64], angular_weight: f64) -> Result<AngularNode> {
        let omega = mat_vec(&self.transversal, u);
        let alpha = mat_vec(&self.exponent.similarity().transpose(), &omega);
        let norm2: f64 = omega.iter().map(|v| v * v).sum();
        let measure = angular_weight * self.det_transversal * 0.5 * norm2;
        let psi = self.psi.eval(&omega)?;
        let log_tau_dual = match self.psi.variant() {
            crate::psi::PsiVariant::TauDual => psi.ln(),
            _ => self.psi.dual().log_tau(&omega)?,
        };
        let weight = measure * psi.powf(-(2.0 + self.q));
        Ok(AngularNode {
            omega,
            alpha,
            weight,
            measure,
            psi,
            log_tau_dual,
        })
    }

    /// Angular rule over the half sphere (weights doubled) or, for N ≥ 3,
    /// over the full sphere. `count` overrides the profile resolution.
    pub(crate) fn angular_rule(&self, count: Option<usize>) -> Result<Vec<AngularNode>> {
        let n = self.dim();
        match n {
            1 => Ok(vec![self.make_node(&[1.0], 2.0)?]),
            2 => self.circle_rule(count),
            _ => self.sphere_rule(count),
        }
    }

    fn circle_rule(&self, count: Option<usize>) -> Result<Vec<AngularNode>> {
        // breaks where a Jordan-cell coordinate of α vanishes
        let pm = self.exponent.similarity().transpose() * &self.transversal;
        let mut breaks = Vec::new();
        for (blk, j) in self.exponent.blocks().iter().enumerate().map(|(j, b)| (b, j)) {
            if blk.kind != BlockKind::Cell {
                continue;
            }
            let o = self.exponent.block_offset(j);
            for i in o..o + blk.size {
                let (c, d) = (pm[(i, 0)], pm[(i, 1)]);
                let mut phi = (-c).atan2(d).rem_euclid(PI);
                if phi >= PI {
                    phi -= PI;
                }
                if !breaks
                    .iter()
                    .any(|&z: &f64| (z - phi).abs() < 1e-12 || (z - phi).abs() > PI - 1e-12)
                {
                    breaks.push(phi);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        let mut nodes = Vec::new();
        if breaks.is_empty() {
            let m = count.unwrap_or(self.profile.circle_nodes).max(4);
            let w = PI / m as f64;
            for i in 0..m {
                let phi = (i as f64 + 0.5) * w;
                nodes.push(self.make_node(&[phi.cos(), phi.sin()], 2.0 * w)?);
            }
            return Ok(nodes);
        }
        let arcs = breaks.len();
        let per_arc = match count {
            Some(c) => (c / arcs).max(2),
            None => self.profile.nodes_per_arc,
        };
        let (x, w) = gauss_legendre(per_arc);
        for k in 0..arcs {
            let p0 = breaks[k];
            let p1 = if k + 1 < arcs { breaks[k + 1] } else { breaks[0] + PI };
            let span = p1 - p0;
            for (xi, wi) in x.iter().zip(&w) {
                let t = 0.5 * (xi + 1.0);
                let phi = p0 + span * (t - (2.0 * PI * t).sin() / (2.0 * PI));
                let jac = span * (1.0 - (2.0 * PI * t).cos());
                let weight = 0.5 * wi * jac;
                nodes.push(self.make_node(&[phi.cos(), phi.sin()], 2.0 * weight)?);
            }
        }
        Ok(nodes)
    }

    fn sphere_rule(&self, count: Option<usize>) -> Result<Vec<AngularNode>> {
        let n = self.dim();
        let (polar, azimuth) = match count {
            Some(c) => {
                let per = (c as f64).powf(1.0 / (n - 1) as f64).round().max(2.0) as usize;
                (per, 2 * per)
            }
            None => (self.profile.polar_nodes, self.profile.azimuth_nodes),
        };
        let (x, w) = gauss_legendre(polar);
        let mut nodes = Vec::new();
        let levels = n - 2;
        let mut idx = vec![0usize; levels];
        loop {
            let mut weight = 1.0;
            let mut prefix = Vec::with_capacity(n);
            let mut carry = 1.0;
            for (lvl, &k) in idx.iter().enumerate() {
                let theta = 0.5 * PI * (x[k] + 1.0);
                let sw = 0.5 * PI * w[k];
                weight *= sw * theta.sin().powi((n - 2 - lvl) as i32);
                prefix.push(carry * theta.cos());
                carry *= theta.sin();
            }
            for a in 0..azimuth {
                let phi = 2.0 * PI * a as f64 / azimuth as f64;
                let mut u = prefix.clone();
                u.push(carry * phi.cos());
                u.push(carry * phi.sin());
                nodes.push(self.make_node(&u, weight * 2.0 * PI / azimuth as f64)?);
            }
            let mut lvl = 0;
            loop {
                if lvl == levels {
                    return Ok(nodes);
                }
                idx[lvl] += 1;
                if idx[lvl] < polar {
                    break;
                }
                idx[lvl] = 0;
                lvl += 1;
            }
        }
    }

    /// `d_X²(0, h) = E[X(h)²]`.
    pub fn variogram(&self, h: &[f64]) -> Result<f64> {
        self.variogram_band(h, &FrequencyBand::full())
    }

    /// Variogram of the band-limited component over `band`.
    pub fn variogram_band(&self, h: &[f64], band: &FrequencyBand) -> Result<f64> {
        self.exponent.check_point(h)?;
        if h.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let lt = self.exponent.log_tau(h)?;
        let dir = self.exponent.apply_power_log(-lt, h);
        let beta = self.exponent.to_canonical(&dir);
        let mut sum = 0.0;
        for node in &self.nodes {
            let (wl, wh) = band.log_window(node.log_tau_dual);
            let phase = self.exponent.phase(&node.alpha, &beta);
            let part = radial_cosine_integral(&phase, wl + lt, wh + lt, &self.profile)?;
            sum += node.weight * part;
        }
        Ok(2.0 * (2.0 * lt).exp() * sum)
    }

    /// `Cov(X(s), X(t)) = (γ(s) + γ(t) - γ(s - t)) / 2`.
    pub fn covariance(&self, s: &[f64], t: &[f64]) -> Result<f64> {
        self.exponent.check_point(s)?;
        self.exponent.check_point(t)?;
        let d: Vec<f64> = s.iter().zip(t).map(|(a, b)| a - b).collect();
        Ok(0.5 * (self.variogram(s)? + self.variogram(t)? - self.variogram(&d)?))
    }

    /// `d_X²(h) / τ_E(h)²`.
    pub fn comparability_ratio(&self, h: &[f64]) -> Result<f64> {
        let t = self.exponent.tau(h)?;
        if t == 0.0 {
            return Err(FieldError::Domain("comparability ratio needs h ≠ 0".into()));
        }
        Ok(self.variogram(h)? / (t * t))
    }

    /// Variogram at many lags in parallel, sharing work between `h` and `-h`
    /// and between repeated lags.
    pub fn variogram_many(&self, lags: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut unique: Vec<Vec<f64>> = Vec::new();
        let slots: Vec<usize> = lags
            .iter()
            .map(|h| {
                let key = lag_key(h);
                *index.entry(key).or_insert_with(|| {
                    unique.push(h.clone());
                    unique.len() - 1
                })
            })
            .collect();
        let values: Vec<Result<f64>> = unique.par_iter().map(|h| self.variogram(h)).collect();
        let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
        Ok(slots.into_iter().map(|k| values[k]).collect())
    }

    /// Covariance matrix of `X` at `points`.
    pub fn covariance_matrix(&self, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let n = points.len();
        for p in points {
            self.exponent.check_point(p)?;
        }
        let mut lags = Vec::with_capacity(n * (n + 1) / 2 + n);
        for p in points {
            lags.push(p.clone());
        }
        for i in 0..n {
            for j in 0..i {
                lags.push(points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect());
            }
        }
        let g = self.variogram_many(&lags)?;
        let mut c = DMatrix::zeros(n, n);
        let mut k = n;
        for i in 0..n {
            c[(i, i)] = g[i];
            for j in 0..i {
                let v = 0.5 * (g[i] + g[j] - g[k]);
                c[(i, j)] = v;
                c[(j, i)] = v;
                k += 1;
            }
        }
        Ok(c)
    }

    /// `∫_{τ_{E'}(ξ) < u} ⟨t, ξ⟩² ψ(ξ)^{-(2+Q)} dξ`.
    pub fn truncated_second_moment(&self, t: &[f64], u: f64) -> Result<f64> {
        self.exponent.check_point(t)?;
        if !(u > 0.0) {
            return Err(FieldError::Domain(format!(
                "truncation level must be positive, got {u}"
            )));
        }
        if t.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        let lt = self.exponent.log_tau(t)?;
        let dir = self.exponent.apply_power_log(-lt, t);
        let beta = self.exponent.to_canonical(&dir);
        let mut sum = 0.0;
        for node in &self.nodes {
            let top = u.ln() - node.log_tau_dual + lt;
            let phase = self.exponent.phase(&node.alpha, &beta);
            sum += node.weight * radial_square_integral(&phase, top);
        }
        Ok((2.0 * lt).exp() * sum)
    }

    /// Radius `r₀` below which the truncation inequality is claimed: the
    /// largest `r` with `M·K(r) ≤ 1`, `M = max_{S_E} ‖x‖` and
    /// `K(r) = max{‖ξ‖ : τ_{E'}(ξ) ≤ r}`, both estimated by sampling.
    pub fn truncation_radius(&self) -> Result<f64> {
        if let Some(r) = self.r0.get() {
            return Ok(*r);
        }
        let r = self.estimate_truncation_radius()?;
        Ok(*self.r0.get_or_init(|| r))
    }

    fn estimate_truncation_radius(&self) -> Result<f64> {
        let n = self.dim();
        let dual = self.psi.dual();
        let mut rng = ChaCha8Rng::seed_from_u64(0x7275_6e63);
        let samples = if n == 1 { 2 } else { 2000 };
        let mut big_m: f64 = 0.0;
        let mut dual_dirs = Vec::with_capacity(samples);
        for k in 0..samples {
            let raw: Vec<f64> = if n == 1 {
                vec![if k == 0 { 1.0 } else { -1.0 }]
            } else {
                (0..n).map(|_| rng.sample(StandardNormal)).collect()
            };
            if let Some(d) = self.exponent.polar_decompose(&raw)?.direction {
                big_m = big_m.max(d.iter().map(|v| v * v).sum::<f64>().sqrt());
            }
            if let Some(d) = dual.polar_decompose(&raw)?.direction {
                dual_dirs.push(d);
            }
        }
        let k_of = |r: f64| -> f64 {
            let mut best: f64 = 0.0;
            for d in &dual_dirs {
                for i in 0..48 {
                    let rho = r * (-(i as f64) * 0.25).exp();
                    let x = dual.apply_power_log(rho.ln(), d);
                    best = best.max(x.iter().map(|v| v * v).sum::<f64>().sqrt());
                }
            }
            best
        };
        let (mut lo, mut hi) = (1e-8f64, 1e8f64);
        if big_m * k_of(lo) > 1.0 {
            return Err(FieldError::Numeric("truncation radius below 1e-8".into()));
        }
        for _ in 0..80 {
            let mid = (lo * hi).sqrt();
            if big_m * k_of(mid) <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo < 1.0 + 1e-10 {
                break;
            }
        }
        Ok(lo)
    }

    /// Compares the truncated second moment with `(3/2) γ(t)`.
    pub fn truncation_check(&self, t: &[f64], u: f64) -> Result<TruncationCheck> {
        let r0 = self.truncation_radius()?;
        let tau = self.exponent.tau(t)?;
        if tau * u > r0 {
            return Err(FieldError::Domain(format!(
                "precondition τ(t)·u = {:.4e} exceeds r₀ = {r0:.4e}",
                tau * u
            )));
        }
        let lhs = self.truncated_second_moment(t, u)?;
        let rhs = 1.5 * self.variogram(t)?;
        Ok(TruncationCheck {
            lhs,
            rhs,
            ok: lhs <= rhs * (1.0 + 1e-3),
        })
    }
}

/// Sign-normalized bit pattern so that `h` and `-h` share a cache slot.
pub(crate) fn lag_key(h: &[f64]) -> Vec<u64> {
    let flip = h.iter().find(|v| **v != 0.0).is_some_and(|v| *v < 0.0);
    h.iter()
        .map(|&v| {
            let v = if flip { -v } else { v };
            (v + 0.0).to_bits()
        })
        .collect()
}

fn panel_tol(profile: &QuadratureProfile) -> Tolerance {
    Tolerance::new(1e-15, profile.radial_rel_tol)
}

/// `∫_lo^hi 2 sin²(v(s)/2) e^{-2s} ds` for an exponential-polynomial phase.
///
/// Below the point where the envelope of `v` drops under `SMALL_PHASE` the
/// integrand is replaced by `½v²e^{-2s}`, integrated in closed form. Once
/// `|v|` and `|v'|` exceed the cutoff the rest is `½e^{-2s}` minus the
/// oscillatory part, taken from three terms of the endpoint expansion plus
/// stationary-phase terms at zeros of `v'`.
pub(crate) fn radial_cosine_integral(v: &Phase, lo: f64, hi: f64, profile: &QuadratureProfile) -> Result<f64> {
    if !(lo < hi) || v.magnitude() == 0.0 {
        return Ok(0.0);
    }
    let dv = v.derivative();
    let ddv = dv.derivative();
    let tol = panel_tol(profile).with_max_intervals(4000);
    let f = |s: f64| {
        let sn = (0.5 * v.eval(s)).sin();
        if sn == 0.0 {
            0.0
        } else {
            2.0 * sn * sn * (-2.0 * s).exp()
        }
    };
    let mut total = 0.0;
    let mut cursor = lo;
    if lo == f64::NEG_INFINITY {
        let rate = v.min_rate();
        let mut a = hi.min(0.0).min(-(v.max_degree() as f64) / rate);
        while v.envelope(a) > SMALL_PHASE {
            a -= 0.5;
        }
        let q = v.square_integral(a, 2.0);
        total += 0.5 * q;
        cursor = a;
    }

    // locate the start of the asymptotic regime
    let cutoff = profile.phase_cutoff;
    let a_max = v.terms.iter().fold(1.0f64, |m, t| m.max(t.a));
    let mut step = (0.35 / a_max).min(0.25);
    if v.is_oscillating() {
        step = step.min(PI / (8.0 * v.max_frequency()));
    }
    let mut s_star = cursor;
    let mut asymptotic = false;
    while s_star < hi {
        if v.eval(s_star).abs() >= cutoff && dv.eval(s_star).abs() >= cutoff {
            asymptotic = true;
            break;
        }
        if s_star > 40.0 {
            break;
        }
        s_star += step;
    }
    let s_star = s_star.min(hi);
    if s_star > cursor {
        let piece = integrate(f, cursor, s_star, tol);
        total += piece.value;
    }
    if asymptotic {
        let d3v = ddv.derivative();
        total += oscillatory_tail(v, &dv, &ddv, &d3v, s_star, hi, total, cutoff);
    } else if s_star < hi {
        let g = (-2.0 * s_star).exp();
        let gh = if hi.is_finite() { (-2.0 * hi).exp() } else { 0.0 };
        total += 0.5 * (g - gh);
    }
    finite(total)
}

/// Envelope level below which `2 sin²(v/2)` is replaced by `v²/2`.
const SMALL_PHASE: f64 = 1e-3;

fn finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(FieldError::Numeric("radial variogram integral is not finite".into()))
    }
}

/// Asymptotic antiderivative of `e^{-2s} cos v(s)`:
/// `T₀ sin v + T₁ cos v - T₂ sin v` with `w = 1/v'`, `T₀ = gw`,
/// `T₁ = (gw)'w`, `T₂ = ((gw)'w)'w`.
fn endpoint_term(v: f64, d1: f64, d2: f64, d3: f64, s: f64) -> f64 {
    let g = (-2.0 * s).exp();
    let w = 1.0 / d1;
    let w1 = -d2 * w * w;
    let w2 = -d3 * w * w + 2.0 * d2 * d2 * w * w * w;
    let t0 = g * w;
    let t1 = g * (-2.0 * w + w1) * w;
    let t2 = g * (4.0 * w * w - 6.0 * w * w1 + w1 * w1 + w * w2) * w;
    let (sn, cs) = v.sin_cos();
    t0 * sn + t1 * cs - t2 * sn
}

#[allow(clippy::too_many_arguments)]
fn oscillatory_tail(
    v: &Phase,
    dv: &Phase,
    ddv: &Phase,
    d3v: &Phase,
    start: f64,
    hi: f64,
    running: f64,
    cutoff: f64,
) -> f64 {
    let gs = (-2.0 * start).exp();
    let negligible = 1e-15 * (running + gs);
    // beyond `end_neg` the weight e^{-2s} is negligible
    let end_neg = start + 0.5 * (gs / negligible).ln().max(0.0);
    let end = hi.min(end_neg);
    let gh = if hi.is_finite() { (-2.0 * hi).exp() } else { 0.0 };
    let mut tail = 0.5 * (gs - gh);
    let at = |s: f64| endpoint_term(v.eval(s), dv.eval(s), ddv.eval(s), d3v.eval(s), s);
    tail += at(start);
    if hi.is_finite() && hi <= end_neg && dv.eval(hi).abs() >= cutoff {
        tail -= at(hi);
    }
    let mut step = 0.25f64;
    if v.is_oscillating() {
        step = step.min(PI / (8.0 * v.max_frequency()));
    }
    let mut a = start;
    let mut da = dv.eval(a);
    while a < end {
        let b = (a + step).min(end);
        let db = dv.eval(b);
        if da.signum() != db.signum() && da != 0.0 {
            let (mut x0, mut x1, mut d0) = (a, b, da);
            for _ in 0..60 {
                let m = 0.5 * (x0 + x1);
                let dm = dv.eval(m);
                if dm.signum() == d0.signum() {
                    x0 = m;
                    d0 = dm;
                } else {
                    x1 = m;
                }
            }
            let sk = 0.5 * (x0 + x1);
            let curv = ddv.eval(sk);
            if curv != 0.0 {
                let g = (-2.0 * sk).exp();
                let ph = v.eval(sk) + curv.signum() * PI / 4.0;
                tail -= g * (2.0 * PI / curv.abs()).sqrt() * ph.cos();
            }
        }
        a = b;
        da = db;
    }
    tail
}

/// `∫_{-∞}^{top} v(s)² e^{-2s} ds`.
pub(crate) fn radial_square_integral(v: &Phase, top: f64) -> f64 {
    if v.magnitude() == 0.0 {
        return 0.0;
    }
    v.square_integral(top, 2.0)
}
