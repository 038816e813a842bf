//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Each criterion's wall-clock budget is part of its pass condition.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{fixture_models, fixture_specs, rel};
use nalgebra::DMatrix;
use osfield::harness::checks::random_lags;
use osfield::harness::dims::boundary_jump;
use osfield::harness::modulus::{band_split_study, default_lil_radii, default_umc_radii};
use osfield::harness::planar_cell::planar_cell_exponent;
use osfield::harness::{
    alpha_theta, dimensions, estimate_grid_moduli, planar_cell_curves, scaling_check, slnd_random, slnd_scaling,
    truncation_study, BandSplit, Curve,
};
use osfield::sampler::{replicate, SpectralGrid};
use osfield::{ExponentSpec, FrequencyBand, HVector, JordanBlock, Method};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn two_dim() -> impl Iterator<Item = &'static (&'static str, osfield::FieldModel)> {
    fixture_models().iter().filter(|(_, m)| m.dim() == 2)
}

/// `exp(A)` by scaling and squaring with a truncated Taylor series.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm1 = (0..n).map(|j| a.column(j).abs().sum()).fold(0.0, f64::max);
    let s = if norm1 > 0.25 {
        (norm1 / 0.25).log2().ceil() as i32
    } else {
        0
    };
    let b = a / 2f64.powi(s);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn random_spec(rng: &mut ChaCha8Rng) -> ExponentSpec {
    let target = rng.random_range(1..=6usize);
    let mut blocks = Vec::new();
    let mut n = 0;
    while n < target {
        let room = target - n;
        let a = rng.random_range(1.05..4.0);
        let block = if room >= 2 && rng.random_bool(0.4) {
            let size = if room >= 4 && rng.random_bool(0.3) { 4 } else { 2 };
            JordanBlock::rotation(a, rng.random_range(0.1..3.0), size)
        } else {
            JordanBlock::cell(a, rng.random_range(1..=room.min(3)))
        };
        n += block.size;
        blocks.push(block);
    }
    let p = rng
        .random_bool(0.5)
        .then(|| DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rng.random_range(-0.3..0.3) }));
    ExponentSpec::new(blocks, p).unwrap()
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn exponent_algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_det): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let e = random_spec(&mut rng);
        let c: f64 = (rng.random_range(0.1f64.ln()..10f64.ln())).exp();
        let got = e.matrix_power(c).unwrap();
        let want = expm(&(e.assemble_matrix() * c.ln()));
        worst = worst.max(frob(&(&got - &want)) / frob(&want));
        worst_det = worst_det.max(rel(got.determinant(), c.powf(e.trace())));
    }
    outcome(
        worst <= 1e-10 && worst_det <= 1e-9,
        format!("max rel Frobenius {worst:.2e}, max det err {worst_det:.2e}"),
    )
}

fn tau_homogeneity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut worst_sym): (f64, f64) = (0.0, 0.0);
    for (_, e) in fixture_specs() {
        for _ in 0..1000 {
            let x: Vec<f64> = (0..e.dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let r: f64 = rng.random_range(0.05f64.ln()..20f64.ln()).exp();
            let tx = e.tau(&x).unwrap();
            worst = worst.max(rel(e.tau(&e.apply_power_log(r.ln(), &x)).unwrap(), r * tx));
            let m: Vec<f64> = x.iter().map(|v| -v).collect();
            worst_sym = worst_sym.max(rel(e.tau(&m).unwrap(), tx));
        }
    }
    outcome(
        worst <= 1e-7 && worst_sym <= 1e-12,
        format!("max homogeneity err {worst:.2e}, max symmetry err {worst_sym:.2e}"),
    )
}

fn planar_anchors() -> Outcome {
    let a = 2.0;
    let e = planar_cell_exponent(a).unwrap();
    let norm_err = [-10.0, -1.0, -0.1, 0.01, 1.0, 10.0]
        .iter()
        .map(|&s: &f64| rel(e.e_norm(&[0.0, s]).unwrap(), s.abs() / a))
        .fold(0.0, f64::max);
    let tau_err = [0.01, 0.1, 0.5, 1.0, 2.0]
        .iter()
        .map(|&s: &f64| rel(e.tau(&[0.0, a * s.powf(a)]).unwrap(), s))
        .fold(0.0, f64::max);
    let ratio = 50.0 / alpha_theta(a, 50.0).unwrap();
    let y_norms: Vec<f64> = (8..=40).map(|k| 10f64.powf(-k as f64 / 4.0)).collect();
    let slopes: Vec<f64> = [
        Curve::LogShift { c: 0.0 },
        Curve::Axis,
        Curve::FixedTheta { theta: 1.0 },
    ]
    .into_iter()
    .map(|c| planar_cell_curves(a, c, &y_norms).unwrap().tail_slope)
    .collect();
    let pass = norm_err <= 1e-9 && tau_err <= 1e-7 && rel(ratio, 2.0) <= 0.05 && slopes.iter().all(|s| s.abs() <= 0.05);
    outcome(
        pass,
        format!("norm err {norm_err:.1e}, tau err {tau_err:.1e}, |θ|/α {ratio:.4}, tail slopes {slopes:.4?}"),
    )
}

fn one_dimensional_oracle() -> Outcome {
    let (_, m) = fixture_models().iter().find(|(_, m)| m.dim() == 1).unwrap();
    let (mut worst, mut worst_ratio): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let h = 1e-3 * 1e4f64.powf(k as f64 / 19.0) * if k % 2 == 0 { 1.0 } else { -1.0 };
        worst = worst.max(rel(m.variogram(&[h]).unwrap(), 8.0 * PI * h.abs()));
        worst_ratio = worst_ratio.max(rel(m.comparability_ratio(&[h]).unwrap(), 16.0 * PI));
    }
    outcome(
        worst <= 1e-3 && worst_ratio <= 5e-3,
        format!("max variogram err {worst:.2e}, max ratio err {worst_ratio:.2e}"),
    )
}

fn variogram_scaling() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, (_, m)) in fixture_models().iter().enumerate() {
        let lags = random_lags(m.dim(), 20, 50 + k as u64);
        let r = scaling_check(m, &lags, &[0.25, 0.5, 2.0, 4.0]).unwrap();
        worst = worst.max(r.max_rel_err);
    }
    outcome(worst <= 5e-4, format!("max rel err {worst:.2e}"))
}

fn sampler_law() -> Outcome {
    const REPLICAS: usize = 10_000;
    let (mut inside, mut total) = (0usize, 0usize);
    let mut spectral: f64 = 0.0;
    for (k, (_, m)) in fixture_models().iter().enumerate() {
        let n = m.dim();
        let points: Vec<Vec<f64>> = [[0.1, 0.3], [0.5, -0.2], [-0.4, 0.6], [0.9, 0.8], [-0.7, -0.5]]
            .iter()
            .map(|p| p[..n].to_vec())
            .collect();
        let reps = replicate(m, &points, &Method::Cholesky, REPLICAS, 600 + k as u64).unwrap();
        let grid = SpectralGrid::for_points(m, &points, &FrequencyBand::full(), 1 << 14).unwrap();
        for i in 0..points.len() {
            let g = m.variogram(&points[i]).unwrap();
            spectral = spectral.max(rel(grid.variance(&points[i]), g));
            for j in i + 1..points.len() {
                let h: Vec<f64> = points[j].iter().zip(&points[i]).map(|(a, b)| a - b).collect();
                let want = m.variogram(&h).unwrap();
                let var = reps.iter().map(|r| (r.values[j] - r.values[i]).powi(2)).sum::<f64>() / REPLICAS as f64;
                let se = want * (2.0 / REPLICAS as f64).sqrt();
                total += 1;
                if (var - want).abs() <= 3.0 * se {
                    inside += 1;
                }
                spectral = spectral.max(rel(grid.variance(&h), want));
            }
        }
    }
    let frac = inside as f64 / total as f64;
    outcome(
        frac >= 0.95 && spectral < 0.05,
        format!("{inside}/{total} pairs within 3 SE, max spectral variance err {spectral:.2e}"),
    )
}

fn slnd() -> Outcome {
    let mut min_ratio = f64::INFINITY;
    let mut spread: f64 = 0.0;
    let base = [[0.3, 0.7], [0.8, 0.2], [0.55, 0.9], [0.1, 0.45]];
    let scales: Vec<f64> = (-3..=3).map(|k| 2f64.powi(k)).collect();
    for (k, (_, m)) in fixture_models().iter().enumerate() {
        let r = slnd_random(m, 200, 6, 70 + k as u64).unwrap();
        min_ratio = min_ratio.min(r.min_ratio);
        let pts: Vec<Vec<f64>> = base.iter().map(|p| p[..m.dim()].to_vec()).collect();
        let s = slnd_scaling(m, &pts, &scales).unwrap();
        spread = spread.max((s.max_ratio - s.min_ratio) / s.min_ratio);
    }
    outcome(
        min_ratio > 0.0 && spread <= 1e-3,
        format!("min ratio {min_ratio:.3e}, dyadic rescaling spread {spread:.2e}"),
    )
}

fn truncation() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, (_, m)) in fixture_models().iter().enumerate() {
        worst = worst.max(truncation_study(m, 100, 80 + k as u64).unwrap().max_ratio);
    }
    outcome(worst <= 1.001, format!("max lhs/rhs {worst:.4}"))
}

fn concentration() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for (k, (name, m)) in two_dim().enumerate() {
        let seed = 90 + k as u64;
        let umc = default_umc_radii(m, 6, 4).unwrap();
        let lil = default_lil_radii(m, 6, 200, 4).unwrap();
        let (u, l) = estimate_grid_moduli(m, 6, &umc, &lil, 20, seed).unwrap();
        let split = band_split_study(m, &[0.0, 0.0], &BandSplit::default(), seed ^ 0x5b11_7000).unwrap();
        let cv =
            |r: &osfield::harness::ModulusReport| r.estimates.iter().rev().take(2).map(|e| e.cv).fold(0.0, f64::max);
        pass &= u.concentrated && l.concentrated && split.i2_decreasing;
        parts.push(format!(
            "{name}: umc cv {:.3}, lil cv {:.3}, I2 decreasing {}",
            cv(&u),
            cv(&l),
            split.i2_decreasing
        ));
    }
    outcome(pass, parts.join("; "))
}

fn dimension_calculator() -> Outcome {
    let r = dimensions(&HVector::new(vec![1.0 / 3.0, 0.5]).unwrap(), 2);
    let exact = (r.range_dim - 2.0).abs() <= 1e-12
        && (r.graph_dim - 10.0 / 3.0).abs() <= 1e-12
        && r.level_set_dim.is_some_and(|l| (l - 4.0 / 3.0).abs() <= 1e-12);
    let jump = (1..=50)
        .map(|i| {
            let h1 = i as f64 / 51.0;
            let mut h = vec![h1, 0.5];
            h.sort_by(f64::total_cmp);
            boundary_jump(&h)
        })
        .fold(0.0, f64::max);
    outcome(
        exact && jump <= 1e-12,
        format!("reference exact {exact}, max boundary jump {jump:.1e}"),
    )
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("exponent algebra", Duration::from_secs(10), exponent_algebra),
        ("tau homogeneity and symmetry", Duration::from_secs(30), tau_homogeneity),
        ("planar Jordan anchors", Duration::from_secs(60), planar_anchors),
        (
            "one-dimensional oracle",
            Duration::from_secs(60),
            one_dimensional_oracle,
        ),
        (
            "variogram operator scaling",
            Duration::from_secs(120),
            variogram_scaling,
        ),
        ("sampler law", Duration::from_secs(300), sampler_law),
        ("local nondeterminism", Duration::from_secs(120), slnd),
        ("truncation inequality", Duration::from_secs(120), truncation),
        ("modulus concentration", Duration::from_secs(900), concentration),
        ("dimension calculator", Duration::from_secs(1), dimension_calculator),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name} [{:.2}s / {}s] {}",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            took.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
    }
    println!("acceptance: {}/10 passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
