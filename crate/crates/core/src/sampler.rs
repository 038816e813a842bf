//! Exact (Cholesky) and spectral-sum realizations of the field.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance::{FieldModel, FrequencyBand};
use crate::error::{FieldError, Result};
use crate::linalg::jittered_cholesky;

/// Largest point set the Cholesky sampler accepts (origin excluded).
pub const CHOLESKY_LIMIT: usize = 4096;

/// Smallest frequency count accepted by the spectral sampler.
pub const MIN_FREQUENCIES: usize = 64;

/// How a realization was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Cholesky,
    Spectral {
        lo: f64,
        /// `None` means an unbounded band.
        hi: Option<f64>,
        freq_count: usize,
    },
}

impl Method {
    pub fn spectral(band: &FrequencyBand, freq_count: usize) -> Self {
        Method::Spectral {
            lo: band.lo(),
            hi: band.hi().is_finite().then_some(band.hi()),
            freq_count,
        }
    }
}

/// One sampled field on a finite point set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub seed: u64,
    /// Substream index of the generator.
    pub stream: u64,
    pub method: Method,
    pub fingerprint: String,
}

/// Hex SHA-256 of the model configuration.
pub fn model_fingerprint(model: &FieldModel) -> String {
    let cfg = serde_json::json!({
        "exponent": model.exponent().to_config(),
        "psi": model.psi().name(),
        "profile": model.profile(),
    });
    let digest = Sha256::digest(cfg.to_string().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Generator for replica `stream` of `seed`; stream 0 is the direct call.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn is_origin(p: &[f64]) -> bool {
    p.iter().all(|&v| v == 0.0)
}

/// A factored covariance, reusable across seeds.
#[derive(Clone, Debug)]
pub struct CholeskySampler {
    points: Vec<Vec<f64>>,
    active: Vec<usize>,
    factor: DMatrix<f64>,
    jitter: f64,
    fingerprint: String,
}

impl CholeskySampler {
    pub fn new(model: &FieldModel, points: &[Vec<f64>]) -> Result<Self> {
        let active: Vec<usize> = (0..points.len()).filter(|&i| !is_origin(&points[i])).collect();
        if active.len() > CHOLESKY_LIMIT {
            return Err(FieldError::Capacity {
                requested: active.len(),
                limit: CHOLESKY_LIMIT,
            });
        }
        let sub: Vec<Vec<f64>> = active.iter().map(|&i| points[i].clone()).collect();
        let cov = model.covariance_matrix(&sub)?;
        let (factor, jitter) = jittered_cholesky(&cov)?;
        Ok(Self {
            points: points.to_vec(),
            active,
            factor,
            jitter,
            fingerprint: model_fingerprint(model),
        })
    }

    /// Absolute diagonal jitter that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn sample(&self, seed: u64, stream: u64) -> Realization {
        let mut rng = replica_rng(seed, stream);
        let m = self.active.len();
        let z = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let y = &self.factor * z;
        let mut values = vec![0.0; self.points.len()];
        for (k, &i) in self.active.iter().enumerate() {
            values[i] = y[k];
        }
        Realization {
            points: self.points.clone(),
            values,
            seed,
            stream,
            method: Method::Cholesky,
            fingerprint: self.fingerprint.clone(),
        }
    }
}

/// Frequencies and weights of a spectral sum.
#[derive(Clone, Debug)]
pub struct SpectralGrid {
    /// Frequencies `ξ_k`; each stands for the pair `±ξ_k`.
    pub frequencies: Vec<Vec<f64>>,
    /// Cell measures under `dξ`, covering both members of the pair.
    pub weights: Vec<f64>,
    /// `ψ(ξ_k)`.
    pub psi: Vec<f64>,
    /// `√(w_k) ψ(ξ_k)^{-(1+Q/2)}`.
    pub coefficients: Vec<f64>,
    /// `ln τ_{E'}(ξ_k)`.
    pub log_radius: Vec<f64>,
    band: FrequencyBand,
    freq_count: usize,
}

impl SpectralGrid {
    /// Direction-by-radius grid with `freq_count` cells covering `band`,
    /// restricted to the radial window relevant for lags whose `τ_E` lies in
    /// `[tau_min, tau_max]`.
    pub fn build(
        model: &FieldModel,
        band: &FrequencyBand,
        freq_count: usize,
        tau_min: f64,
        tau_max: f64,
    ) -> Result<Self> {
        if freq_count < MIN_FREQUENCIES {
            return Err(FieldError::Domain(format!(
                "spectral sampler needs at least {MIN_FREQUENCIES} frequencies, got {freq_count}"
            )));
        }
        if !(tau_min > 0.0 && tau_min <= tau_max && tau_max.is_finite()) {
            return Err(FieldError::Domain(format!(
                "invalid lag scale range [{tau_min}, {tau_max}]"
            )));
        }
        let n = model.dim();
        let dirs = if n == 1 {
            1
        } else {
            ((freq_count as f64 / 4.0).sqrt().round() as usize).max(4)
        };
        let nodes = model.angular_rule(Some(dirs))?;
        let radial = (freq_count / nodes.len()).max(1);
        let a1 = model.exponent().min_a();
        // mass dropped at each end of the window shrinks like 1/radial
        let log_eps = (radial as f64).ln().max(1.0);
        let s_lo = -tau_max.ln() - log_eps / (2.0 * a1 - 2.0);
        let s_hi = -tau_min.ln() + log_eps / 2.0;
        let dual = model.psi().dual();
        let q = model.q();
        let mut grid = SpectralGrid {
            frequencies: Vec::with_capacity(nodes.len() * radial),
            weights: Vec::with_capacity(nodes.len() * radial),
            psi: Vec::with_capacity(nodes.len() * radial),
            coefficients: Vec::with_capacity(nodes.len() * radial),
            log_radius: Vec::with_capacity(nodes.len() * radial),
            band: *band,
            freq_count,
        };
        for node in &nodes {
            let (wl, wh) = band.log_window(node.log_tau_dual);
            let lo = wl.max(s_lo);
            let hi = wh.min(s_hi);
            if !(lo < hi) {
                continue;
            }
            let ds = (hi - lo) / radial as f64;
            for i in 0..radial {
                let s = lo + (i as f64 + 0.5) * ds;
                let xi = dual.apply_power_log(s, &node.omega);
                let w = node.measure * (s * q).exp() * ds;
                let p = node.psi * s.exp();
                let c = (node.weight * (-2.0 * s).exp() * ds).sqrt();
                grid.frequencies.push(xi);
                grid.weights.push(w);
                grid.psi.push(p);
                grid.coefficients.push(c);
                grid.log_radius.push(s + node.log_tau_dual);
            }
        }
        if grid.frequencies.is_empty() {
            return Err(FieldError::Domain(format!(
                "band ({}, {}] holds no frequencies in the window relevant for the points",
                band.lo(),
                band.hi()
            )));
        }
        Ok(grid)
    }

    /// Grid sized for `points`: the lag scales are taken from the points, their
    /// offsets from the first point and consecutive differences.
    pub fn for_points(
        model: &FieldModel,
        points: &[Vec<f64>],
        band: &FrequencyBand,
        freq_count: usize,
    ) -> Result<Self> {
        let (lo, hi) = lag_scale_range(model, points)?;
        Self::build(model, band, freq_count, lo, hi)
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn band(&self) -> &FrequencyBand {
        &self.band
    }

    /// `Var X̂(t) = Σ c_k² · 2(1 - cos⟨t, ξ_k⟩)`.
    pub fn variance(&self, t: &[f64]) -> f64 {
        self.frequencies
            .iter()
            .zip(&self.coefficients)
            .map(|(xi, c)| {
                let ph: f64 = xi.iter().zip(t).map(|(a, b)| a * b).sum();
                let sn = (0.5 * ph).sin();
                c * c * 4.0 * sn * sn
            })
            .sum()
    }

    /// Field values from the Gaussian pairs `(z_k, z'_k)`.
    fn evaluate(&self, points: &[Vec<f64>], z: &[(f64, f64)]) -> Vec<f64> {
        points
            .iter()
            .map(|t| {
                if is_origin(t) {
                    return 0.0;
                }
                let mut acc = 0.0;
                for ((xi, c), (z1, z2)) in self.frequencies.iter().zip(&self.coefficients).zip(z) {
                    let ph: f64 = xi.iter().zip(t).map(|(a, b)| a * b).sum();
                    let (sn, cs) = ph.sin_cos();
                    acc += c * ((cs - 1.0) * z1 + sn * z2);
                }
                acc
            })
            .collect()
    }

    pub fn sample(&self, model: &FieldModel, points: &[Vec<f64>], seed: u64, stream: u64) -> Realization {
        let z = self.draw(seed, stream);
        Realization {
            points: points.to_vec(),
            values: self.evaluate(points, &z),
            seed,
            stream,
            method: Method::spectral(&self.band, self.freq_count),
            fingerprint: model_fingerprint(model),
        }
    }

    /// Which frequencies have `τ_{E'}(ξ) ∈ band`.
    pub fn band_mask(&self, band: &FrequencyBand) -> Vec<bool> {
        let (lo, hi) = (band.lo().ln(), band.hi().ln());
        self.log_radius.iter().map(|&l| l > lo && l <= hi).collect()
    }

    /// Increments `X̂(t0 + s) - X̂(t0)` split into the frequencies selected by
    /// `mask` and the rest; the two parts add up to the full increment.
    /// Evaluated in product form so that tiny offsets keep full precision.
    pub fn increments_split(
        &self,
        t0: &[f64],
        offsets: &[Vec<f64>],
        mask: &[bool],
        z: &[(f64, f64)],
    ) -> (Vec<f64>, Vec<f64>) {
        let mut inside = vec![0.0; offsets.len()];
        let mut outside = vec![0.0; offsets.len()];
        for (k, xi) in self.frequencies.iter().enumerate() {
            let a: f64 = xi.iter().zip(t0).map(|(x, t)| x * t).sum();
            let c = self.coefficients[k];
            let (z1, z2) = z[k];
            for (m, s) in offsets.iter().enumerate() {
                let b: f64 = xi.iter().zip(s).map(|(x, t)| x * t).sum();
                let half = (0.5 * b).sin();
                let (sm, cm) = (a + 0.5 * b).sin_cos();
                let v = 2.0 * c * half * (cm * z2 - sm * z1);
                if mask[k] {
                    inside[m] += v;
                } else {
                    outside[m] += v;
                }
            }
        }
        (inside, outside)
    }

    /// Standard normal pairs for replica `stream` of `seed`.
    pub fn draw(&self, seed: u64, stream: u64) -> Vec<(f64, f64)> {
        let mut rng = replica_rng(seed, stream);
        (0..self.len())
            .map(|_| (rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect()
    }
}

/// Range of `τ_E` over the points, their offsets from the first point and
/// consecutive differences.
pub fn lag_scale_range(model: &FieldModel, points: &[Vec<f64>]) -> Result<(f64, f64)> {
    let e = model.exponent();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let mut push = |x: &[f64]| -> Result<()> {
        if !is_origin(x) {
            let t = e.tau(x)?;
            lo = lo.min(t);
            hi = hi.max(t);
        }
        Ok(())
    };
    for (i, p) in points.iter().enumerate() {
        push(p)?;
        if i > 0 {
            let d0: Vec<f64> = p.iter().zip(&points[0]).map(|(a, b)| a - b).collect();
            push(&d0)?;
            let d1: Vec<f64> = p.iter().zip(&points[i - 1]).map(|(a, b)| a - b).collect();
            push(&d1)?;
        }
    }
    if !lo.is_finite() {
        return Err(FieldError::Domain("all points coincide with the origin".into()));
    }
    Ok((lo, hi))
}

/// Exact Gaussian sample at `points` by Cholesky factorization.
pub fn sample_cholesky(model: &FieldModel, points: &[Vec<f64>], seed: u64) -> Result<Realization> {
    Ok(CholeskySampler::new(model, points)?.sample(seed, 0))
}

/// Spectral-sum sample restricted to `band`.
pub fn sample_spectral(
    model: &FieldModel,
    points: &[Vec<f64>],
    band: &FrequencyBand,
    freq_count: usize,
    seed: u64,
) -> Result<Realization> {
    if points.iter().all(|p| is_origin(p)) {
        return Ok(Realization {
            points: points.to_vec(),
            values: vec![0.0; points.len()],
            seed,
            stream: 0,
            method: Method::spectral(band, freq_count),
            fingerprint: model_fingerprint(model),
        });
    }
    let grid = SpectralGrid::for_points(model, points, band, freq_count)?;
    Ok(grid.sample(model, points, seed, 0))
}

/// `count` replicas on independent substreams of `master_seed`, in order.
/// Replica 0 equals the direct call with the same seed.
pub fn replicate(
    model: &FieldModel,
    points: &[Vec<f64>],
    method: &Method,
    count: usize,
    master_seed: u64,
) -> Result<Vec<Realization>> {
    if count == 0 {
        return Err(FieldError::Domain("replica count must be at least 1".into()));
    }
    match method {
        Method::Cholesky => {
            let sampler = CholeskySampler::new(model, points)?;
            Ok((0..count as u64)
                .into_par_iter()
                .map(|i| sampler.sample(master_seed, i))
                .collect())
        }
        Method::Spectral { lo, hi, freq_count } => {
            let band = FrequencyBand::new(*lo, hi.unwrap_or(f64::INFINITY))?;
            let grid = SpectralGrid::for_points(model, points, &band, *freq_count)?;
            Ok((0..count as u64)
                .into_par_iter()
                .map(|i| grid.sample(model, points, master_seed, i))
                .collect())
        }
    }
}
