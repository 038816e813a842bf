mod common;

use common::{fixture_models, norm, rel};
use nalgebra::DMatrix;
use osfield::harness::dims::{boundary_jump, graph_dim};
use osfield::harness::modulus::{default_lil_radii, default_umc_radii};
use osfield::harness::stats::ols_slope;
use osfield::harness::{alpha_theta, dimensions, estimate_grid_moduli, slnd_ratio, slnd_scaling};
use osfield::sampler::sample_cholesky;
use osfield::{ExponentSpec, HVector, JordanBlock};
use proptest::prelude::*;

fn block() -> impl Strategy<Value = JordanBlock> {
    prop_oneof![
        (1.1f64..3.5).prop_map(|a| JordanBlock::cell(a, 1)),
        (1.1f64..3.5).prop_map(|a| JordanBlock::cell(a, 2)),
        (1.1f64..3.5, 0.1f64..3.0).prop_map(|(a, b)| JordanBlock::rotation(a, b, 2)),
    ]
}

/// Up to two blocks, optionally conjugated by a unit upper-triangular shear.
fn spec() -> impl Strategy<Value = ExponentSpec> {
    (
        prop::collection::vec(block(), 1..=2),
        prop::collection::vec(-0.6f64..0.6, 6),
        any::<bool>(),
    )
        .prop_map(|(blocks, shear, use_shear)| {
            let n: usize = blocks.iter().map(|b| b.size).sum();
            let p = use_shear.then(|| {
                let mut p = DMatrix::identity(n, n);
                let mut k = 0;
                for i in 0..n {
                    for j in i + 1..n {
                        p[(i, j)] = shear[k % shear.len()];
                        k += 1;
                    }
                }
                p
            });
            ExponentSpec::new(blocks, p).unwrap()
        })
}

fn spec_and_point() -> impl Strategy<Value = (ExponentSpec, Vec<f64>)> {
    spec()
        .prop_flat_map(|e| {
            let n = e.dim();
            (Just(e), prop::collection::vec(-5.0f64..5.0, n))
        })
        .prop_filter("nonzero point", |(_, x)| norm(x) > 1e-3)
}

fn frob(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn powers_form_a_group(e in spec(), c in 0.1f64..10.0, d in 0.1f64..10.0) {
        let lhs = e.matrix_power(c).unwrap() * e.matrix_power(d).unwrap();
        let rhs = e.matrix_power(c * d).unwrap();
        prop_assert!(frob(&(&lhs - &rhs)) <= 1e-10 * frob(&rhs));
    }

    #[test]
    fn power_inverse(e in spec(), c in 0.1f64..10.0) {
        let a = e.matrix_power(c).unwrap();
        let b = e.matrix_power(1.0 / c).unwrap();
        let n = e.dim();
        let err = frob(&(&a * &b - DMatrix::identity(n, n)));
        prop_assert!(err <= 1e-10 * frob(&a) * frob(&b), "{err}");
    }

    #[test]
    fn power_determinant(e in spec(), c in 0.1f64..10.0) {
        let det = e.matrix_power(c).unwrap().determinant();
        prop_assert!(rel(det, c.powf(e.trace())) < 1e-9);
    }

    #[test]
    fn tau_is_homogeneous((e, x) in spec_and_point(), r in 0.05f64..20.0) {
        let y = e.apply_power_log(r.ln(), &x);
        let (ty, tx) = (e.tau(&y).unwrap(), e.tau(&x).unwrap());
        prop_assert!(rel(ty, r * tx) < 1e-7, "{ty} vs {}", r * tx);
    }

    #[test]
    fn tau_is_symmetric((e, x) in spec_and_point()) {
        let m: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!(rel(e.tau(&m).unwrap(), e.tau(&x).unwrap()) < 1e-12);
    }

    #[test]
    fn polar_reconstruction((e, x) in spec_and_point()) {
        let p = e.polar_decompose(&x).unwrap();
        let dir = p.direction.unwrap();
        let back = e.apply_power_log(p.tau.ln(), &dir);
        let err: Vec<f64> = back.iter().zip(&x).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&err) <= 1e-8 * norm(&x).max(1.0));
    }

    #[test]
    fn tau_vanishes_at_origin((e, x) in spec_and_point()) {
        prop_assert_eq!(e.tau(&vec![0.0; e.dim()]).unwrap(), 0.0);
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let y: Vec<f64> = x.iter().map(|v| v * 0.5f64.powi(k)).collect();
            let t = e.tau(&y).unwrap();
            prop_assert!(t <= prev * (1.0 + 1e-9));
            prev = t;
        }
        prop_assert!(prev < 1e-3 * e.tau(&x).unwrap());
    }

    #[test]
    fn graph_dimension_bounds(h in prop::collection::vec(0.05f64..1.0, 1..=4), d in 1u32..=6) {
        let mut h = h;
        h.sort_by(f64::total_cmp);
        let n = h.len() as f64;
        let r = dimensions(&HVector::new(h.clone()).unwrap(), d);
        let inv: f64 = h.iter().map(|v| 1.0 / v).sum();
        prop_assert!(r.graph_dim >= n - 1e-12 && r.graph_dim <= n + d as f64 + 1e-12);
        prop_assert!(r.range_dim <= (d as f64).min(inv) + 1e-12);
        if let Some(l) = r.level_set_dim {
            prop_assert!((-1e-12..n).contains(&l), "{l}");
        }
        prop_assert!(boundary_jump(&h) <= 1e-12 * n.max(inv));
    }

    #[test]
    fn graph_dimension_is_continuous_in_d(h in prop::collection::vec(0.05f64..1.0, 1..=4), d in 0.0f64..12.0) {
        let mut h = h;
        h.sort_by(f64::total_cmp);
        let eps = 1e-9;
        let (lo, _) = graph_dim(&h, d);
        let (hi, _) = graph_dim(&h, d + eps);
        prop_assert!((hi - lo).abs() <= 10.0 * eps);
    }

    #[test]
    fn alpha_is_lipschitz_and_linear_at_infinity(a in 1.1f64..4.0, theta in -1e3f64..1e3, delta in 1e-6f64..1.0) {
        let f0 = alpha_theta(a, theta).unwrap();
        let f1 = alpha_theta(a, theta + delta).unwrap();
        prop_assert!((f1 - f0).abs() <= delta / a * (1.0 + 1e-8) + 1e-12);
        prop_assert!(f0 > 0.0);
        prop_assert!(theta.abs() / f0 <= 2.0 * a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn variogram_scales(k in 0usize..5, lag in prop::collection::vec(-3.0f64..3.0, 2), c in 0.25f64..4.0) {
        let (name, m) = &fixture_models()[k];
        let h = &lag[..m.dim()];
        prop_assume!(norm(h) > 1e-3);
        let scaled = m.exponent().apply_power_log(c.ln(), h);
        let lhs = m.variogram(&scaled).unwrap();
        let rhs = c * c * m.variogram(h).unwrap();
        prop_assert!(rel(lhs, rhs) < 5e-4, "{name}: {lhs} vs {rhs}");
    }

    #[test]
    fn variogram_is_even(k in 0usize..5, lag in prop::collection::vec(-3.0f64..3.0, 2)) {
        let (name, m) = &fixture_models()[k];
        let h = &lag[..m.dim()];
        prop_assume!(norm(h) > 1e-3);
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        let (g, gn) = (m.variogram(h).unwrap(), m.variogram(&neg).unwrap());
        prop_assert!(rel(gn, g) < 1e-9, "{name}: {g} vs {gn}");
    }

    #[test]
    fn covariance_scales(k in 0usize..5, s in prop::collection::vec(-2.0f64..2.0, 2), t in prop::collection::vec(-2.0f64..2.0, 2), c in 0.25f64..4.0) {
        let (name, m) = &fixture_models()[k];
        let (s, t) = (&s[..m.dim()], &t[..m.dim()]);
        let e = m.exponent();
        let lhs = m.covariance(&e.apply_power_log(c.ln(), s), &e.apply_power_log(c.ln(), t)).unwrap();
        let rhs = c * c * m.covariance(s, t).unwrap();
        let scale = c * c * (m.variogram(s).unwrap() + m.variogram(t).unwrap());
        prop_assert!((lhs - rhs).abs() <= 5e-4 * scale, "{name}: {lhs} vs {rhs}");
    }

    #[test]
    fn slnd_ratio_is_positive(k in 0usize..5, pts in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 1..=6)) {
        let (name, m) = &fixture_models()[k];
        let pts: Vec<Vec<f64>> = pts.into_iter().map(|p| p[..m.dim()].to_vec()).collect();
        let r = slnd_ratio(m, &pts).unwrap();
        prop_assert!(r > 0.0, "{name}: {r}");
    }

    #[test]
    fn cholesky_sampling_is_deterministic(k in 0usize..5, seed in any::<u64>()) {
        let (_, m) = &fixture_models()[k];
        let pts: Vec<Vec<f64>> = (1..=4).map(|i| vec![0.2 * i as f64, 0.1 * i as f64][..m.dim()].to_vec()).collect();
        let a = sample_cholesky(m, &pts, seed).unwrap();
        let b = sample_cholesky(m, &pts, seed).unwrap();
        prop_assert_eq!(a.values, b.values);
    }
}

#[test]
fn covariance_matrices_are_positive_semidefinite() {
    for (name, m) in fixture_models() {
        let n = m.dim();
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|i| {
                (0..n)
                    .map(|j| ((i * (j + 3) * 37 + 11) % 97) as f64 / 97.0 * 2.0 - 1.0)
                    .collect()
            })
            .collect();
        let cov = m.covariance_matrix(&pts).unwrap();
        let eig = cov.symmetric_eigenvalues();
        let max = eig.max();
        assert!(eig.min() >= -1e-8 * max, "{name}: {} vs {max}", eig.min());
    }
}

#[test]
fn directional_holder_exponents() {
    let (_, m) = &fixture_models()[0];
    for (axis, a) in [(0usize, 1.5), (1, 2.5)] {
        let r: Vec<f64> = (0..=8).map(|k| 1e-3 * 10f64.powf(k as f64 / 4.0)).collect();
        let g: Vec<f64> = r
            .iter()
            .map(|&s| {
                let mut h = vec![0.0; 2];
                h[axis] = s;
                m.variogram(&h).unwrap().ln()
            })
            .collect();
        let lr: Vec<f64> = r.iter().map(|v| v.ln()).collect();
        let slope = ols_slope(&lr, &g);
        assert!((slope - 2.0 / a).abs() < 0.2, "axis {axis}: slope {slope}");
    }
}

#[test]
fn slnd_ratio_is_scale_invariant() {
    for (name, m) in fixture_models() {
        let base: Vec<Vec<f64>> = [[0.3, 0.7], [0.8, 0.2], [0.55, 0.9]]
            .iter()
            .map(|p| p[..m.dim()].to_vec())
            .collect();
        let r = slnd_scaling(m, &base, &[0.125, 0.5, 1.0, 2.0, 8.0]).unwrap();
        assert!(
            (r.max_ratio - r.min_ratio) / r.min_ratio <= 1e-3,
            "{name}: {:?}",
            r.ratios
        );
    }
}

#[test]
fn modulus_statistics_grow_with_radius() {
    let (_, m) = &fixture_models()[0];
    let umc = default_umc_radii(m, 4, 3).unwrap();
    let lil = default_lil_radii(m, 4, 40, 3).unwrap();
    let (u, l) = estimate_grid_moduli(m, 4, &umc, &lil, 8, 17).unwrap();
    for rep in u.statistics.iter().chain(&l.statistics) {
        assert!(rep.windows(2).all(|w| w[0] >= w[1]), "{rep:?}");
    }
}
