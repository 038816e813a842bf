//! Sup statistics for the uniform and local moduli of continuity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use crate::covariance::{FieldModel, FrequencyBand};
use crate::error::{FieldError, Result};
use crate::sampler::{CholeskySampler, SpectralGrid};

/// Cross-replica coefficient of variation accepted as concentrated.
pub const CV_GATE: f64 = 0.35;

/// Fewest points allowed in the smallest ball of a local study.
pub const MIN_BALL_POINTS: usize = 50;

const BOOTSTRAP_RESAMPLES: usize = 2000;

/// `log x := ln(x ∨ e)`.
pub fn log_e(x: f64) -> f64 {
    x.max(std::f64::consts::E).ln()
}

/// Normalizing function of the increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    /// `τ √log(1 + τ⁻¹)`.
    Uniform,
    /// `τ √(log log(1 + τ⁻¹))`.
    Local,
}

impl Normalizer {
    pub fn eval(self, tau: f64) -> f64 {
        match self {
            Normalizer::Uniform => tau * log_e(1.0 + 1.0 / tau).sqrt(),
            Normalizer::Local => tau * log_e(log_e(1.0 + 1.0 / tau)).sqrt(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModulusReport {
    pub normalizer: Normalizer,
    /// Decreasing.
    pub radii: Vec<f64>,
    /// Admissible pairs (uniform) or points (local) per radius.
    pub counts: Vec<usize>,
    /// `statistics[replica][radius]`.
    pub statistics: Vec<Vec<f64>>,
    pub estimates: Vec<Estimate>,
    pub cv_gate: f64,
    /// Coefficient of variation at the two smallest radii is below the gate.
    pub concentrated: bool,
    pub band_split: Option<BandSplitReport>,
}

fn assemble(
    normalizer: Normalizer,
    radii: Vec<f64>,
    counts: Vec<usize>,
    statistics: Vec<Vec<f64>>,
    seed: u64,
) -> ModulusReport {
    let estimates: Vec<Estimate> = (0..radii.len())
        .map(|m| {
            let xs: Vec<f64> = statistics.iter().map(|row| row[m]).collect();
            Estimate::from_samples(&xs, BOOTSTRAP_RESAMPLES, 0.95, seed ^ m as u64)
        })
        .collect();
    let tail = estimates.len().saturating_sub(2);
    let concentrated = statistics.len() >= 2 && estimates[tail..].iter().all(|e| e.cv < CV_GATE);
    ModulusReport {
        normalizer,
        radii,
        counts,
        statistics,
        estimates,
        cv_gate: CV_GATE,
        concentrated,
        band_split: None,
    }
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(FieldError::Domain("need at least one radius".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) || radii.windows(2).any(|w| w[1] >= w[0]) {
        return Err(FieldError::Domain(format!(
            "radii must be positive and strictly decreasing, got {radii:?}"
        )));
    }
    Ok(())
}

/// The grid `{k / 2^level : 0 ≤ k_i < 2^level}` in lexicographic order with
/// the first coordinate most significant.
#[derive(Clone, Debug)]
pub struct DyadicGrid {
    dim: usize,
    side: usize,
}

impl DyadicGrid {
    pub fn new(dim: usize, level: u32) -> Result<Self> {
        if dim == 0 || level == 0 || level > 12 {
            return Err(FieldError::Domain(format!(
                "grid needs dim ≥ 1 and 1 ≤ level ≤ 12, got dim {dim}, level {level}"
            )));
        }
        let side = 1usize << level;
        Ok(Self { dim, side })
    }

    pub fn len(&self) -> usize {
        self.side.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn coords(&self, mut idx: usize) -> Vec<i64> {
        let mut c = vec![0i64; self.dim];
        for k in (0..self.dim).rev() {
            c[k] = (idx % self.side) as i64;
            idx /= self.side;
        }
        c
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let h = 1.0 / self.side as f64;
        (0..self.len())
            .map(|i| self.coords(i).iter().map(|&c| c as f64 * h).collect())
            .collect()
    }

    fn base(&self) -> usize {
        2 * self.side - 1
    }

    /// Index of an integer offset in `(-(side-1)..side)^N`.
    fn offset_code(&self, o: &[i64]) -> usize {
        let b = self.base() as i64;
        o.iter().fold(0i64, |acc, &v| acc * b + v + self.side as i64 - 1) as usize
    }

    fn offset_of(&self, mut code: usize) -> Vec<i64> {
        let b = self.base();
        let mut o = vec![0i64; self.dim];
        for k in (0..self.dim).rev() {
            o[k] = (code % b) as i64 - self.side as i64 + 1;
            code /= b;
        }
        o
    }
}

/// `τ_E` of every lattice offset; index by offset code. Offsets whose first
/// nonzero entry is negative are filled from their negatives.
fn offset_taus(model: &FieldModel, grid: &DyadicGrid) -> Result<Vec<f64>> {
    let size = grid.base().pow(grid.dim as u32);
    let h = 1.0 / grid.side as f64;
    let e = model.exponent();
    let taus: Vec<Result<f64>> = (0..size)
        .into_par_iter()
        .map(|code| {
            let o = grid.offset_of(code);
            match o.iter().find(|v| **v != 0) {
                None => Ok(0.0),
                Some(v) if *v < 0 => Ok(f64::NAN),
                Some(_) => {
                    let x: Vec<f64> = o.iter().map(|&v| v as f64 * h).collect();
                    e.tau(&x)
                }
            }
        })
        .collect();
    let mut taus: Vec<f64> = taus.into_iter().collect::<Result<_>>()?;
    for code in 0..size {
        if taus[code].is_nan() {
            let neg: Vec<i64> = grid.offset_of(code).iter().map(|v| -v).collect();
            taus[code] = taus[grid.offset_code(&neg)];
        }
    }
    Ok(taus)
}

/// Radii `r_min·2^k` (returned decreasing), with `r_min` the smallest radius
/// that admits a unit step along every axis.
pub fn default_umc_radii(model: &FieldModel, grid_level: u32, count: usize) -> Result<Vec<f64>> {
    let n = model.dim();
    let h = 0.5f64.powi(grid_level as i32);
    let mut r_min: f64 = 0.0;
    for i in 0..n {
        let mut x = vec![0.0; n];
        x[i] = h;
        r_min = r_min.max(model.exponent().tau(&x)?);
    }
    Ok((0..count)
        .rev()
        .map(|k| r_min * 1.000001 * 2f64.powi(k as i32))
        .collect())
}

/// Radii `r_min·2^k` (returned decreasing), with `r_min` the smallest radius
/// whose ball around the grid origin holds `smallest_ball` grid points.
pub fn default_lil_radii(model: &FieldModel, grid_level: u32, smallest_ball: usize, count: usize) -> Result<Vec<f64>> {
    let grid = DyadicGrid::new(model.dim(), grid_level)?;
    let e = model.exponent();
    let mut taus: Vec<f64> = grid
        .points()
        .par_iter()
        .skip(1)
        .map(|p| e.tau(p))
        .collect::<Result<_>>()?;
    taus.sort_by(f64::total_cmp);
    let k = smallest_ball.max(MIN_BALL_POINTS);
    if taus.len() < k {
        return Err(FieldError::Domain(format!(
            "grid has {} nonzero points, fewer than {k}",
            taus.len()
        )));
    }
    let r_min = taus[k - 1] * 1.000001;
    Ok((0..count).rev().map(|j| r_min * 2f64.powi(j as i32)).collect())
}

/// Uniform and local statistics from the same Cholesky replicas on the
/// dyadic grid of `[0, 1)^N`; the local study is centred at the origin.
pub fn estimate_grid_moduli(
    model: &FieldModel,
    grid_level: u32,
    umc_radii: &[f64],
    lil_radii: &[f64],
    replica_count: usize,
    master_seed: u64,
) -> Result<(ModulusReport, ModulusReport)> {
    check_radii(umc_radii)?;
    check_radii(lil_radii)?;
    if replica_count == 0 {
        return Err(FieldError::Domain("replica count must be at least 1".into()));
    }
    let grid = DyadicGrid::new(model.dim(), grid_level)?;
    let points = grid.points();
    let sampler = CholeskySampler::new(model, &points)?;
    let taus = offset_taus(model, &grid)?;
    let coords: Vec<Vec<i64>> = (0..grid.len()).map(|i| grid.coords(i)).collect();
    let pair_codes = taus.len();

    let mut umc_counts = vec![0usize; umc_radii.len()];
    {
        let mut per_code = vec![0usize; pair_codes];
        for i in 0..coords.len() {
            for j in i + 1..coords.len() {
                let o: Vec<i64> = coords[j].iter().zip(&coords[i]).map(|(a, b)| a - b).collect();
                per_code[grid.offset_code(&o)] += 1;
            }
        }
        for (code, &c) in per_code.iter().enumerate() {
            for (m, &r) in umc_radii.iter().enumerate() {
                if c > 0 && taus[code] <= r {
                    umc_counts[m] += c;
                }
            }
        }
    }
    let point_codes: Vec<usize> = coords.iter().map(|c| grid.offset_code(c)).collect();
    let lil_counts: Vec<usize> = lil_radii
        .iter()
        .map(|&r| point_codes.iter().skip(1).filter(|&&c| taus[c] <= r).count())
        .collect();
    if lil_counts.last().copied().unwrap_or(0) < MIN_BALL_POINTS {
        return Err(FieldError::Domain(format!(
            "smallest local ball holds {} grid points, need {MIN_BALL_POINTS}",
            lil_counts.last().copied().unwrap_or(0)
        )));
    }

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..replica_count as u64)
        .into_par_iter()
        .map(|rep| {
            let values = sampler.sample(master_seed, rep).values;
            let mut max_abs = vec![0.0f64; pair_codes];
            for i in 0..coords.len() {
                let ci = &coords[i];
                let vi = values[i];
                for j in i + 1..coords.len() {
                    let code = coords[j].iter().zip(ci).fold(0i64, |acc, (a, b)| {
                        acc * grid.base() as i64 + a - b + grid.side as i64 - 1
                    }) as usize;
                    let d = (values[j] - vi).abs();
                    if d > max_abs[code] {
                        max_abs[code] = d;
                    }
                }
            }
            let umc: Vec<f64> = umc_radii
                .iter()
                .map(|&r| {
                    (0..pair_codes)
                        .filter(|&c| taus[c] > 0.0 && taus[c] <= r)
                        .map(|c| max_abs[c] / Normalizer::Uniform.eval(taus[c]))
                        .fold(0.0, f64::max)
                })
                .collect();
            let lil: Vec<f64> = lil_radii
                .iter()
                .map(|&r| {
                    point_codes
                        .iter()
                        .enumerate()
                        .skip(1)
                        .filter(|(_, c)| taus[**c] <= r)
                        .map(|(i, c)| (values[i] - values[0]).abs() / Normalizer::Local.eval(taus[*c]))
                        .fold(0.0, f64::max)
                })
                .collect();
            (umc, lil)
        })
        .collect();
    let (umc_rows, lil_rows): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok((
        assemble(
            Normalizer::Uniform,
            umc_radii.to_vec(),
            umc_counts,
            umc_rows,
            master_seed,
        ),
        assemble(
            Normalizer::Local,
            lil_radii.to_vec(),
            lil_counts,
            lil_rows,
            master_seed ^ 1,
        ),
    ))
}

/// Uniform modulus statistic on the dyadic grid.
pub fn estimate_umc(
    model: &FieldModel,
    grid_level: u32,
    radii: &[f64],
    replica_count: usize,
    master_seed: u64,
) -> Result<ModulusReport> {
    check_radii(radii)?;
    let lil = default_lil_radii(model, grid_level, MIN_BALL_POINTS, 1)?;
    Ok(estimate_grid_moduli(model, grid_level, radii, &lil, replica_count, master_seed)?.0)
}

/// Parameters of the band decomposition `X = X_n + X̃_n` with bands
/// `(d_{n-1}, d_n]`, `d_n = exp(n^{1+μ} + n^μ)`, evaluated at
/// `s_n = e^{-a_p n^{1+μ}} P e_N`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandSplit {
    pub mu: f64,
    pub bands: Vec<u32>,
    pub freq_count: usize,
    pub replica_count: usize,
}

impl Default for BandSplit {
    fn default() -> Self {
        Self {
            mu: 0.5,
            bands: vec![1, 2, 3, 4, 5],
            freq_count: 1 << 14,
            replica_count: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BandSplitReport {
    pub mu: f64,
    pub bands: Vec<u32>,
    pub band_edges: Vec<(f64, f64)>,
    pub tau_s: Vec<f64>,
    /// `i1[band][replica]`.
    pub i1: Vec<Vec<f64>>,
    pub i2: Vec<Vec<f64>>,
    pub mean_i1: Vec<f64>,
    pub mean_i2: Vec<f64>,
    /// `E I₁`, `E I₂` from band-limited variograms.
    pub expected_i1: Vec<f64>,
    pub expected_i2: Vec<f64>,
    /// `mean_i2[k + 2] < mean_i2[k]` wherever both exist.
    pub i2_decreasing: bool,
}

fn band_edge(mu: f64, n: u32) -> f64 {
    let n = n as f64;
    (n.powf(1.0 + mu) + n.powf(mu)).exp()
}

/// `I₁(n)`, `I₂(n)` over spectral replicas sharing one frequency grid.
pub fn band_split_study(
    model: &FieldModel,
    t0: &[f64],
    split: &BandSplit,
    master_seed: u64,
) -> Result<BandSplitReport> {
    if !(split.mu > 0.0 && split.mu < 1.0) {
        return Err(FieldError::Domain(format!("μ must lie in (0, 1), got {}", split.mu)));
    }
    if split.bands.is_empty() || split.bands.contains(&0) {
        return Err(FieldError::Domain("band indices must be at least 1".into()));
    }
    if split.replica_count == 0 {
        return Err(FieldError::Domain("replica count must be at least 1".into()));
    }
    let e = model.exponent();
    e.check_point(t0)?;
    let n = e.dim();
    let a_p = e.max_a();
    let mut unit = vec![0.0; n];
    unit[n - 1] = 1.0;
    let dir = e.from_canonical(&unit);
    let offsets: Vec<Vec<f64>> = split
        .bands
        .iter()
        .map(|&k| {
            let scale = (-a_p * (k as f64).powf(1.0 + split.mu)).exp();
            dir.iter().map(|v| v * scale).collect()
        })
        .collect();
    let tau_s: Vec<f64> = offsets.iter().map(|s| e.tau(s)).collect::<Result<_>>()?;
    let bands: Vec<FrequencyBand> = split
        .bands
        .iter()
        .map(|&k| FrequencyBand::new(band_edge(split.mu, k - 1), band_edge(split.mu, k)))
        .collect::<Result<_>>()?;
    let lo = tau_s.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tau_s.iter().copied().fold(0.0, f64::max);
    let grid = SpectralGrid::build(model, &FrequencyBand::full(), split.freq_count, lo, hi)?;
    let masks: Vec<Vec<bool>> = bands.iter().map(|b| grid.band_mask(b)).collect();
    let norms: Vec<f64> = tau_s.iter().map(|&t| Normalizer::Local.eval(t)).collect();

    let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..split.replica_count as u64)
        .into_par_iter()
        .map(|rep| {
            let z = grid.draw(master_seed, rep);
            let mut r1 = Vec::with_capacity(bands.len());
            let mut r2 = Vec::with_capacity(bands.len());
            for (k, s) in offsets.iter().enumerate() {
                let (inside, outside) = grid.increments_split(t0, std::slice::from_ref(s), &masks[k], &z);
                r1.push(inside[0].abs() / norms[k]);
                r2.push(outside[0].abs() / norms[k]);
            }
            (r1, r2)
        })
        .collect();
    let nb = bands.len();
    let i1: Vec<Vec<f64>> = (0..nb).map(|k| rows.iter().map(|r| r.0[k]).collect()).collect();
    let i2: Vec<Vec<f64>> = (0..nb).map(|k| rows.iter().map(|r| r.1[k]).collect()).collect();
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    let mean_i1: Vec<f64> = i1.iter().map(mean).collect();
    let mean_i2: Vec<f64> = i2.iter().map(mean).collect();
    let half_normal = (2.0 / std::f64::consts::PI).sqrt();
    let mut expected_i1 = Vec::with_capacity(nb);
    let mut expected_i2 = Vec::with_capacity(nb);
    for (k, s) in offsets.iter().enumerate() {
        let full = model.variogram(s)?;
        let inner = model.variogram_band(s, &bands[k])?;
        expected_i1.push(half_normal * inner.sqrt() / norms[k]);
        expected_i2.push(half_normal * (full - inner).max(0.0).sqrt() / norms[k]);
    }
    let i2_decreasing = (0..nb.saturating_sub(2)).all(|k| mean_i2[k + 2] < mean_i2[k]);
    Ok(BandSplitReport {
        mu: split.mu,
        bands: split.bands.clone(),
        band_edges: bands.iter().map(|b| (b.lo(), b.hi())).collect(),
        tau_s,
        i1,
        i2,
        mean_i1,
        mean_i2,
        expected_i1,
        expected_i2,
        i2_decreasing,
    })
}

/// Half-widths of a box containing `B_E(r)`, from sampled unit directions.
fn ball_box(model: &FieldModel, r: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let e = model.exponent();
    let n = e.dim();
    let mut b = vec![0.0f64; n];
    for _ in 0..512 {
        let raw: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(d) = e.polar_decompose(&raw)?.direction {
            for (bi, v) in b.iter_mut().zip(e.apply_power_log(r.ln(), &d)) {
                *bi = bi.max(v.abs());
            }
        }
    }
    Ok(b.into_iter().map(|v| 1.1 * v).collect())
}

/// Local modulus statistic around `t0`: `points_per_ball` points are drawn
/// uniformly in each ball `B_E(r)` by rejection, and the statistic at `r` is
/// the sup over all drawn offsets with `τ_E(s) ≤ r`.
pub fn estimate_lil(
    model: &FieldModel,
    t0: &[f64],
    radii: &[f64],
    points_per_ball: usize,
    replica_count: usize,
    master_seed: u64,
    band_split: Option<&BandSplit>,
) -> Result<ModulusReport> {
    check_radii(radii)?;
    if points_per_ball < MIN_BALL_POINTS {
        return Err(FieldError::Domain(format!(
            "smallest ball needs at least {MIN_BALL_POINTS} points, got {points_per_ball}"
        )));
    }
    if replica_count == 0 {
        return Err(FieldError::Domain("replica count must be at least 1".into()));
    }
    let e = model.exponent();
    e.check_point(t0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed ^ 0x6c69_6c00);
    let mut offsets: Vec<Vec<f64>> = Vec::new();
    let mut taus: Vec<f64> = Vec::new();
    for &r in radii {
        let bx = ball_box(model, r, &mut rng)?;
        let mut got = 0;
        let mut tries = 0usize;
        while got < points_per_ball {
            tries += 1;
            if tries > 1000 * points_per_ball {
                return Err(FieldError::Numeric(format!("rejection sampling in B_E({r}) stalled")));
            }
            let s: Vec<f64> = bx.iter().map(|&b| rng.random_range(-b..b)).collect();
            let t = e.tau(&s)?;
            if t > 0.0 && t <= r {
                offsets.push(s);
                taus.push(t);
                got += 1;
            }
        }
    }
    let mut points = vec![t0.to_vec()];
    points.extend(offsets.iter().map(|s| s.iter().zip(t0).map(|(a, b)| a + b).collect()));
    let sampler = CholeskySampler::new(model, &points)?;
    let counts: Vec<usize> = radii
        .iter()
        .map(|&r| taus.iter().filter(|&&t| t <= r).count())
        .collect();
    let norms: Vec<f64> = taus.iter().map(|&t| Normalizer::Local.eval(t)).collect();
    let rows: Vec<Vec<f64>> = (0..replica_count as u64)
        .into_par_iter()
        .map(|rep| {
            let v = sampler.sample(master_seed, rep).values;
            radii
                .iter()
                .map(|&r| {
                    (0..offsets.len())
                        .filter(|&k| taus[k] <= r)
                        .map(|k| (v[k + 1] - v[0]).abs() / norms[k])
                        .fold(0.0, f64::max)
                })
                .collect()
        })
        .collect();
    let mut report = assemble(Normalizer::Local, radii.to_vec(), counts, rows, master_seed);
    if let Some(split) = band_split {
        report.band_split = Some(band_split_study(model, t0, split, master_seed)?);
    }
    Ok(report)
}
