//! One-dimensional quadrature and scalar search used throughout the crate.
//!
//! The adaptive integrator is a globally adaptive Gauss–Kronrod (10/21)
//! scheme in the style of QUADPACK's `qag`: the interval with the largest
//! error estimate is bisected until the summed estimate meets the tolerance.

#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_059,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_525_452,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Tolerances and limits for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 2000,
        }
    }

    pub fn with_max_intervals(mut self, max_intervals: usize) -> Self {
        self.max_intervals = max_intervals;
        self
    }
}

/// Single 21-point Kronrod panel: (integral, error estimate).
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (result, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Integral {
    if a == b {
        return Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let (v, e) = gk21(&mut f, a, b);
    let mut evaluations = 21;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    while total_err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_intervals {
            return Integral {
                value: total,
                error: total_err,
                evaluations,
                converged: false,
            };
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval exhausted at machine precision
            heap.push(worst);
            return Integral {
                value: total,
                error: total_err,
                evaluations,
                converged: false,
            };
        }
        let (v1, e1) = gk21(&mut f, worst.a, mid);
        let (v2, e2) = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed accumulated cancellation in the running totals
    let (value, error) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    Integral {
        value,
        error,
        evaluations,
        converged: true,
    }
}

/// Integrate a function decaying at `+∞` over `[a, ∞)` on geometrically
/// growing panels `[a, a+w], [a+w, a+3w], ...` until a panel contributes
/// less than `rel` of the running total.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, first_width: f64, tol: Tolerance) -> Integral {
    let mut lo = a;
    let mut width = first_width;
    let mut out = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
        converged: true,
    };
    for _ in 0..64 {
        let hi = lo + width;
        let piece = integrate(&mut f, lo, hi, tol);
        out.value += piece.value;
        out.error += piece.error;
        out.evaluations += piece.evaluations;
        out.converged &= piece.converged;
        if piece.value.abs() <= tol.rel * 1e-3 * out.value.abs() || piece.value.abs() <= tol.abs * 1e-3 {
            return out;
        }
        lo = hi;
        width *= 2.0;
    }
    out.converged = false;
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Downhill simplex minimisation from `start` with initial step `scale`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    scale: f64,
    max_iter: usize,
    ftol: f64,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut p = start.to_vec();
        p[i] += scale;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if (values[n] - values[0]).abs() <= ftol * (values[0].abs() + ftol) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect() };
        let reflected = along(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { along(-0.5) } else { along(0.5) };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    for k in 0..n {
                        simplex[i][k] = best[k] + 0.5 * (simplex[i][k] - best[k]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap_or(0);
    (simplex[best].clone(), values[best])
}
