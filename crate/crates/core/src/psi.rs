//! `E'`-homogeneous spectral densities `ψ` and their certification.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};
use crate::exponent::ExponentSpec;
use crate::quadrature::nelder_mead;

/// User-supplied evaluator for a custom density.
pub type PsiEvaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Which density is used.
#[derive(Clone)]
pub enum PsiVariant {
    /// `ψ = τ_{E'}`.
    TauDual,
    Custom {
        name: String,
        eval: PsiEvaluator,
    },
}

impl fmt::Debug for PsiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsiVariant::TauDual => write!(f, "TauDual"),
            PsiVariant::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Config record for the density; custom evaluators are programmatic only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum PsiConfig {
    #[default]
    TauDual,
}

/// A symmetric, positive, `E'`-homogeneous density.
#[derive(Clone, Debug)]
pub struct HomogeneousPsi {
    variant: PsiVariant,
    dual: ExponentSpec,
    m_psi: f64,
    big_m_psi: f64,
    certified: bool,
}

/// Outcome of [`HomogeneousPsi::certify`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificationReport {
    pub samples: usize,
    pub homogeneity_max_rel_err: f64,
    pub homogeneity_tol: f64,
    pub symmetry_max_rel_err: f64,
    pub symmetry_tol: f64,
    pub m_psi: f64,
    pub big_m_psi: f64,
    pub sandwich_max_violation: f64,
}

pub const HOMOGENEITY_TOL: f64 = 1e-7;
pub const SYMMETRY_TOL: f64 = 1e-12;
const STARTS: usize = 64;

impl HomogeneousPsi {
    /// `ψ = τ_{E'}`; its extrema on `S_{E'}` are one by construction.
    pub fn tau_dual(spec: &ExponentSpec) -> Self {
        Self {
            variant: PsiVariant::TauDual,
            dual: spec.transpose(),
            m_psi: 1.0,
            big_m_psi: 1.0,
            certified: true,
        }
    }

    /// A custom density; it must pass [`certify`](Self::certify) before use.
    pub fn custom(spec: &ExponentSpec, name: &str, eval: PsiEvaluator) -> Self {
        Self {
            variant: PsiVariant::Custom {
                name: name.to_string(),
                eval,
            },
            dual: spec.transpose(),
            m_psi: f64::NAN,
            big_m_psi: f64::NAN,
            certified: false,
        }
    }

    pub fn from_config(cfg: &PsiConfig, spec: &ExponentSpec) -> Self {
        match cfg {
            PsiConfig::TauDual => Self::tau_dual(spec),
        }
    }

    pub fn variant(&self) -> &PsiVariant {
        &self.variant
    }

    pub fn name(&self) -> &str {
        match &self.variant {
            PsiVariant::TauDual => "tau_dual",
            PsiVariant::Custom { name, .. } => name,
        }
    }

    /// The exponent `E'` the density is homogeneous for.
    pub fn dual(&self) -> &ExponentSpec {
        &self.dual
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    pub fn m_psi(&self) -> f64 {
        self.m_psi
    }

    pub fn big_m_psi(&self) -> f64 {
        self.big_m_psi
    }

    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        match &self.variant {
            PsiVariant::TauDual => self.dual.tau(xi),
            PsiVariant::Custom { eval, .. } => {
                self.dual.check_point(xi)?;
                Ok(eval(xi))
            }
        }
    }

    /// Checks homogeneity, symmetry and positivity on `sample_count` random
    /// points and computes `m_ψ`, `M_ψ` by multi-start simplex searches
    /// over `S_{E'}`.
    pub fn certify(&mut self, sample_count: usize, seed: u64) -> Result<CertificationReport> {
        if sample_count < 1000 {
            return Err(FieldError::Domain(format!(
                "certification needs at least 1000 samples, got {sample_count}"
            )));
        }
        let n = self.dual.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hom_err: f64 = 0.0;
        let mut sym_err: f64 = 0.0;
        let mut lo_ratio = f64::INFINITY;
        let mut hi_ratio: f64 = 0.0;
        let mut ratios = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let raw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let spread: f64 = rng.random_range(-3.0..3.0);
            let xi = self.dual.apply_power_log(spread, &raw);
            let log_r: f64 = rng.random_range(0.05f64.ln()..20f64.ln());
            let p = self.eval(&xi)?;
            if !(p > 0.0 && p.is_finite()) {
                return Err(FieldError::Certification {
                    property: "positivity",
                    witness: xi,
                    detail: format!("ψ = {p}"),
                });
            }
            let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
            let s_err = (self.eval(&neg)? - p).abs() / p;
            if s_err > SYMMETRY_TOL {
                return Err(FieldError::Certification {
                    property: "symmetry",
                    witness: xi,
                    detail: format!("relative asymmetry {s_err:.3e}"),
                });
            }
            sym_err = sym_err.max(s_err);
            let scaled = self.dual.apply_power_log(log_r, &xi);
            let r = log_r.exp();
            let h_err = (self.eval(&scaled)? - r * p).abs() / (r * p);
            if h_err > HOMOGENEITY_TOL {
                return Err(FieldError::Certification {
                    property: "homogeneity",
                    witness: xi,
                    detail: format!("|ψ(r^E'ξ) - rψ(ξ)| / rψ(ξ) = {h_err:.3e} at r = {r:.4}"),
                });
            }
            hom_err = hom_err.max(h_err);
            let ratio = p / self.dual.tau(&xi)?;
            lo_ratio = lo_ratio.min(ratio);
            hi_ratio = hi_ratio.max(ratio);
            ratios.push(ratio);
        }

        let on_sphere = |u: &[f64]| -> Option<f64> {
            let p = self.dual.polar_decompose(u).ok()?;
            let d = p.direction?;
            self.eval(&d).ok()
        };
        let mut m = lo_ratio;
        let mut big_m = hi_ratio;
        for _ in 0..STARTS {
            let start: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let (_, fmin) = nelder_mead(|u| on_sphere(u).unwrap_or(f64::INFINITY), &start, 0.3, 80, 1e-10);
            let (_, fmax) = nelder_mead(
                |u| on_sphere(u).map(|v| -v).unwrap_or(f64::INFINITY),
                &start,
                0.3,
                80,
                1e-10,
            );
            if fmin.is_finite() {
                m = m.min(fmin);
            }
            if fmax.is_finite() {
                big_m = big_m.max(-fmax);
            }
        }
        if !(m > 0.0 && big_m.is_finite() && m <= big_m) {
            return Err(FieldError::Certification {
                property: "bounds",
                witness: vec![m, big_m],
                detail: "extrema on the dual unit sphere are degenerate".into(),
            });
        }
        let violation = ratios
            .iter()
            .map(|&r| (m - r).max(r - big_m).max(0.0))
            .fold(0.0f64, f64::max);
        self.m_psi = m;
        self.big_m_psi = big_m;
        self.certified = true;
        Ok(CertificationReport {
            samples: sample_count,
            homogeneity_max_rel_err: hom_err,
            homogeneity_tol: HOMOGENEITY_TOL,
            symmetry_max_rel_err: sym_err,
            symmetry_tol: SYMMETRY_TOL,
            m_psi: m,
            big_m_psi: big_m,
            sandwich_max_violation: violation,
        })
    }
}
