//! The scaling exponent `E = P D P⁻¹` held in real Jordan canonical form.
//!
//! Powers `c^E` are evaluated block by block in closed form. Jordan cells are
//! lower bidiagonal (`λ` on the diagonal, ones below it) and rotation blocks
//! carry `Λ = [[a, -b], [b, a]]` on the block diagonal with `I₂` below it.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{FieldError, Result};

/// Kind of a real Jordan block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockKind {
    Cell,
    Rotation,
}

/// One block of the canonical form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JordanBlock {
    pub kind: BlockKind,
    /// Real part of the eigenvalue(s); must exceed one.
    pub a: f64,
    /// Imaginary part, rotation blocks only.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub b: f64,
    /// Block dimension `l̃`.
    pub size: usize,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

impl JordanBlock {
    pub fn cell(a: f64, size: usize) -> Self {
        Self {
            kind: BlockKind::Cell,
            a,
            b: 0.0,
            size,
        }
    }

    pub fn rotation(a: f64, b: f64, size: usize) -> Self {
        Self {
            kind: BlockKind::Rotation,
            a,
            b,
            size,
        }
    }

    /// The nilpotency length `l`: `l̃` for cells, `l̃/2` for rotation blocks.
    pub fn size_l(&self) -> usize {
        match self.kind {
            BlockKind::Cell => self.size,
            BlockKind::Rotation => self.size / 2,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 1.0) {
            return Err(FieldError::Config(format!(
                "block eigenvalue real part must exceed 1, got {}",
                self.a
            )));
        }
        if self.size == 0 {
            return Err(FieldError::Config("block size must be positive".into()));
        }
        match self.kind {
            BlockKind::Cell if self.b != 0.0 => Err(FieldError::Config("Jordan cells carry no imaginary part".into())),
            BlockKind::Rotation if self.b == 0.0 || !self.b.is_finite() => {
                Err(FieldError::Config("rotation blocks need a finite nonzero b".into()))
            }
            BlockKind::Rotation if !self.size.is_multiple_of(2) => Err(FieldError::Config(format!(
                "rotation block size must be even, got {}",
                self.size
            ))),
            _ => Ok(()),
        }
    }
}

/// Serialized form: `{"blocks":[...], "P": [[...], ...]}` with `P` row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExponentConfig {
    pub blocks: Vec<JordanBlock>,
    #[serde(rename = "P", default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<Vec<f64>>>,
}

/// A validated scaling exponent.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ExponentConfig", into = "ExponentConfig")]
pub struct ExponentSpec {
    blocks: Vec<JordanBlock>,
    explicit_p: bool,
    p: DMatrix<f64>,
    p_inv: DMatrix<f64>,
    offsets: Vec<usize>,
    dim: usize,
    trace: f64,
}

impl TryFrom<ExponentConfig> for ExponentSpec {
    type Error = FieldError;

    fn try_from(cfg: ExponentConfig) -> Result<Self> {
        let p = match cfg.p {
            None => None,
            Some(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(FieldError::Config("P must be a square matrix".into()));
                }
                Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        };
        ExponentSpec::new(cfg.blocks, p)
    }
}

impl From<ExponentSpec> for ExponentConfig {
    fn from(spec: ExponentSpec) -> Self {
        let p = spec.explicit_p.then(|| {
            (0..spec.dim)
                .map(|i| (0..spec.dim).map(|j| spec.p[(i, j)]).collect())
                .collect()
        });
        ExponentConfig { blocks: spec.blocks, p }
    }
}

impl ExponentSpec {
    /// Builds a spec from blocks and an optional similarity `P`.
    ///
    /// Blocks are stably sorted into nondecreasing `a`; the column groups of
    /// `P` move with them.
    pub fn new(blocks: Vec<JordanBlock>, similarity: Option<DMatrix<f64>>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(FieldError::Config("at least one block is required".into()));
        }
        for b in &blocks {
            b.validate()?;
        }
        let dim: usize = blocks.iter().map(|b| b.size).sum();
        let explicit_p = similarity.is_some();
        let p_given = similarity.unwrap_or_else(|| DMatrix::identity(dim, dim));
        if p_given.nrows() != dim || p_given.ncols() != dim {
            return Err(FieldError::Config(format!(
                "P must be {dim}x{dim}, got {}x{}",
                p_given.nrows(),
                p_given.ncols()
            )));
        }
        if p_given.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::Config("P has non-finite entries".into()));
        }
        let sv = p_given.clone().svd(false, false).singular_values;
        let smax = sv.max();
        let smin = sv.min();
        if !(smax > 0.0) || smin / smax < 1e-10 {
            return Err(FieldError::Config(format!(
                "P is numerically singular (reciprocal condition {:.3e})",
                if smax > 0.0 { smin / smax } else { 0.0 }
            )));
        }

        let mut starts = Vec::with_capacity(blocks.len());
        let mut acc = 0;
        for b in &blocks {
            starts.push(acc);
            acc += b.size;
        }
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.sort_by(|&i, &j| blocks[i].a.total_cmp(&blocks[j].a));
        let mut p = DMatrix::zeros(dim, dim);
        let mut sorted = Vec::with_capacity(blocks.len());
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut col = 0;
        for &k in &order {
            offsets.push(col);
            for c in 0..blocks[k].size {
                p.set_column(col + c, &p_given.column(starts[k] + c));
            }
            col += blocks[k].size;
            sorted.push(blocks[k].clone());
        }
        let p_inv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| FieldError::Config("P is not invertible".into()))?;
        let trace = sorted.iter().map(|b| b.a * b.size as f64).sum();
        Ok(Self {
            blocks: sorted,
            explicit_p,
            p,
            p_inv,
            offsets,
            dim,
            trace,
        })
    }

    /// Single-block convenience constructor with `P = I`.
    pub fn diagonal(a: &[f64]) -> Result<Self> {
        Self::new(a.iter().map(|&a| JordanBlock::cell(a, 1)).collect(), None)
    }

    /// Builds a spec from a raw diagonalizable matrix.
    ///
    /// Eigenvalues within `1e-8` of each other are clustered; a cluster whose
    /// eigenspace is smaller than its multiplicity is rejected as defective.
    pub fn from_matrix(e: &DMatrix<f64>) -> Result<Self> {
        const CLUSTER: f64 = 1e-8;
        let n = e.nrows();
        if n == 0 || e.ncols() != n {
            return Err(FieldError::Config("exponent matrix must be square".into()));
        }
        let scale = e.norm().max(1.0);
        let eig = e.complex_eigenvalues();
        let mut clusters: Vec<(Complex<f64>, usize)> = Vec::new();
        for z in eig.iter() {
            let z = if z.im.abs() <= CLUSTER * scale {
                Complex::new(z.re, 0.0)
            } else {
                *z
            };
            if z.im < 0.0 {
                continue;
            }
            match clusters.iter_mut().find(|(c, _)| (c - z).norm() <= CLUSTER * scale) {
                Some((c, m)) => {
                    *c = (*c * *m as f64 + z) / (*m as f64 + 1.0);
                    *m += 1;
                }
                None => clusters.push((z, 1)),
            }
        }
        let mut blocks = Vec::new();
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for (lambda, mult) in clusters {
            let shifted = DMatrix::from_fn(n, n, |i, j| {
                Complex::new(e[(i, j)], 0.0) - if i == j { lambda } else { Complex::new(0.0, 0.0) }
            });
            let svd = shifted.svd(false, true);
            let vt = svd.v_t.expect("requested V^T");
            let null: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= 1e-7 * scale).collect();
            if null.len() < mult {
                return Err(FieldError::Config(format!(
                    "matrix is defective at eigenvalue {lambda}: multiplicity {mult}, eigenspace dimension {}",
                    null.len()
                )));
            }
            for &k in null.iter().take(mult) {
                let w: Vec<Complex<f64>> = (0..n).map(|i| vt[(k, i)].conj()).collect();
                if lambda.im == 0.0 {
                    // rotate the phase so the vector is real
                    let pivot = w
                        .iter()
                        .copied()
                        .max_by(|x, y| x.norm().total_cmp(&y.norm()))
                        .unwrap_or(Complex::new(1.0, 0.0));
                    let phase = pivot.conj() / pivot.norm();
                    columns.push(w.iter().map(|z| (z * phase).re).collect());
                    blocks.push(JordanBlock::cell(lambda.re, 1));
                } else {
                    columns.push(w.iter().map(|z| z.re).collect());
                    columns.push(w.iter().map(|z| -z.im).collect());
                    blocks.push(JordanBlock::rotation(lambda.re, lambda.im, 2));
                }
            }
        }
        if columns.len() != n {
            return Err(FieldError::Config("could not assemble a full eigenbasis".into()));
        }
        let p = DMatrix::from_fn(n, n, |i, j| columns[j][i]);
        let spec = Self::new(blocks, Some(p))?;
        let err = (spec.assemble_matrix() - e).norm() / scale;
        if err > 1e-6 {
            return Err(FieldError::Numeric(format!(
                "eigendecomposition reconstructs E only to {err:.2e}"
            )));
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `Q = trace(E) = Σ a_j l̃_j`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[JordanBlock] {
        &self.blocks
    }

    /// First canonical coordinate of block `j` (0-based).
    pub fn block_offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn similarity(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn similarity_inverse(&self) -> &DMatrix<f64> {
        &self.p_inv
    }

    pub fn min_a(&self) -> f64 {
        self.blocks[0].a
    }

    pub fn max_a(&self) -> f64 {
        self.blocks[self.blocks.len() - 1].a
    }

    pub fn has_rotation(&self) -> bool {
        self.blocks.iter().any(|b| b.kind == BlockKind::Rotation)
    }

    pub fn to_config(&self) -> ExponentConfig {
        self.clone().into()
    }

    /// The block-diagonal canonical form `D`.
    pub fn canonical_matrix(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (blk, &o) in self.blocks.iter().zip(&self.offsets) {
            match blk.kind {
                BlockKind::Cell => {
                    for i in 0..blk.size {
                        d[(o + i, o + i)] = blk.a;
                        if i > 0 {
                            d[(o + i, o + i - 1)] = 1.0;
                        }
                    }
                }
                BlockKind::Rotation => {
                    for k in 0..blk.size / 2 {
                        let r = o + 2 * k;
                        d[(r, r)] = blk.a;
                        d[(r, r + 1)] = -blk.b;
                        d[(r + 1, r)] = blk.b;
                        d[(r + 1, r + 1)] = blk.a;
                        if k > 0 {
                            d[(r, r - 2)] = 1.0;
                            d[(r + 1, r - 1)] = 1.0;
                        }
                    }
                }
            }
        }
        d
    }

    /// `E = P D P⁻¹`.
    pub fn assemble_matrix(&self) -> DMatrix<f64> {
        &self.p * self.canonical_matrix() * &self.p_inv
    }

    /// `e^{sD}` in closed form.
    pub fn canonical_power_log(&self, s: f64) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (blk, &o) in self.blocks.iter().zip(&self.offsets) {
            let scale = (blk.a * s).exp();
            let taylor = taylor_row(s, blk.size_l());
            match blk.kind {
                BlockKind::Cell => {
                    for i in 0..blk.size {
                        for j in 0..=i {
                            m[(o + i, o + j)] = scale * taylor[i - j];
                        }
                    }
                }
                BlockKind::Rotation => {
                    let (sn, cs) = (blk.b * s).sin_cos();
                    for i in 0..blk.size / 2 {
                        for j in 0..=i {
                            let f = scale * taylor[i - j];
                            let (r, c) = (o + 2 * i, o + 2 * j);
                            m[(r, c)] = f * cs;
                            m[(r, c + 1)] = -f * sn;
                            m[(r + 1, c)] = f * sn;
                            m[(r + 1, c + 1)] = f * cs;
                        }
                    }
                }
            }
        }
        m
    }

    /// `e^{sE}`, i.e. `c^E` with `s = ln c`.
    pub fn power_log(&self, s: f64) -> DMatrix<f64> {
        &self.p * self.canonical_power_log(s) * &self.p_inv
    }

    /// `c^E` for `c > 0`.
    pub fn matrix_power(&self, c: f64) -> Result<DMatrix<f64>> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(FieldError::Domain(format!(
                "matrix power needs a positive base, got {c}"
            )));
        }
        Ok(self.power_log(c.ln()))
    }

    /// `out = e^{sD} y` for canonical coordinates `y`.
    pub fn apply_canonical_power(&self, s: f64, y: &[f64], out: &mut [f64]) {
        let mut taylor = [0.0f64; 16];
        for (blk, &o) in self.blocks.iter().zip(&self.offsets) {
            let scale = (blk.a * s).exp();
            let l = blk.size_l();
            fill_taylor(s, &mut taylor[..l.min(16)]);
            match blk.kind {
                BlockKind::Cell => {
                    for i in 0..blk.size {
                        let mut acc = 0.0;
                        for j in 0..=i {
                            acc += taylor_at(&taylor, s, i - j) * y[o + j];
                        }
                        out[o + i] = scale * acc;
                    }
                }
                BlockKind::Rotation => {
                    let (sn, cs) = (blk.b * s).sin_cos();
                    for i in 0..l {
                        let (mut u, mut v) = (0.0, 0.0);
                        for j in 0..=i {
                            let t = taylor_at(&taylor, s, i - j);
                            u += t * y[o + 2 * j];
                            v += t * y[o + 2 * j + 1];
                        }
                        out[o + 2 * i] = scale * (cs * u - sn * v);
                        out[o + 2 * i + 1] = scale * (sn * u + cs * v);
                    }
                }
            }
        }
    }

    /// Canonical coordinates `P⁻¹ x`.
    pub fn to_canonical(&self, x: &[f64]) -> Vec<f64> {
        mat_vec(&self.p_inv, x)
    }

    /// Ambient coordinates `P y`.
    pub fn from_canonical(&self, y: &[f64]) -> Vec<f64> {
        mat_vec(&self.p, y)
    }

    /// `e^{sE} x`.
    pub fn apply_power_log(&self, s: f64, x: &[f64]) -> Vec<f64> {
        let y = self.to_canonical(x);
        let mut z = vec![0.0; self.dim];
        self.apply_canonical_power(s, &y, &mut z);
        self.from_canonical(&z)
    }

    /// Component of `x` in the invariant subspace `W_j` (0-based block index).
    pub fn project_invariant(&self, x: &[f64], j: usize) -> Result<Vec<f64>> {
        if j >= self.blocks.len() {
            return Err(FieldError::Domain(format!(
                "block index {j} out of range (p = {})",
                self.blocks.len()
            )));
        }
        self.check_point(x)?;
        let mut y = self.to_canonical(x);
        let (lo, hi) = (self.offsets[j], self.offsets[j] + self.blocks[j].size);
        for (i, v) in y.iter_mut().enumerate() {
            if i < lo || i >= hi {
                *v = 0.0;
            }
        }
        Ok(self.from_canonical(&y))
    }

    /// The vector `H` of reciprocal real parts, sorted nondecreasingly.
    ///
    /// The first `l̃_p` entries are `1/a_p`, the next `l̃_{p-1}` are
    /// `1/a_{p-1}`, and so on down to block 1.
    pub fn h_vector(&self) -> HVector {
        let h = self
            .blocks
            .iter()
            .rev()
            .flat_map(|b| std::iter::repeat_n(1.0 / b.a, b.size))
            .collect();
        HVector(h)
    }

    /// The exponent of the transposed matrix `E'`, expressed in the same
    /// canonical form `D` with similarity `P^{-T} R`, where `R` reverses
    /// each block (and flips the sign of the second coordinate of every
    /// rotation pair) so that `R D R = Dᵀ`.
    pub fn transpose(&self) -> ExponentSpec {
        let mut r = DMatrix::zeros(self.dim, self.dim);
        for (blk, &o) in self.blocks.iter().zip(&self.offsets) {
            match blk.kind {
                BlockKind::Cell => {
                    for i in 0..blk.size {
                        r[(o + i, o + blk.size - 1 - i)] = 1.0;
                    }
                }
                BlockKind::Rotation => {
                    let m = blk.size / 2;
                    for i in 0..m {
                        let (ri, ci) = (o + 2 * i, o + 2 * (m - 1 - i));
                        r[(ri, ci)] = 1.0;
                        r[(ri + 1, ci + 1)] = -1.0;
                    }
                }
            }
        }
        let p_dual = self.p_inv.transpose() * r;
        let p_dual_inv = p_dual
            .clone()
            .try_inverse()
            .expect("inverse-transpose of an invertible matrix");
        ExponentSpec {
            blocks: self.blocks.clone(),
            explicit_p: true,
            p: p_dual,
            p_inv: p_dual_inv,
            offsets: self.offsets.clone(),
            dim: self.dim,
            trace: self.trace,
        }
    }

    /// The scalar phase `s ↦ ⟨e^{sD} β, α⟩` for canonical vectors `α`, `β`.
    pub fn phase(&self, alpha: &[f64], beta: &[f64]) -> Phase {
        let mut terms = Vec::with_capacity(self.blocks.len());
        for (blk, &o) in self.blocks.iter().zip(&self.offsets) {
            let l = blk.size_l();
            let mut cos_poly = vec![0.0; l];
            let mut sin_poly = vec![0.0; l];
            match blk.kind {
                BlockKind::Cell => {
                    for i in 0..l {
                        for j in 0..=i {
                            cos_poly[i - j] += alpha[o + i] * beta[o + j];
                        }
                    }
                }
                BlockKind::Rotation => {
                    for i in 0..l {
                        for j in 0..=i {
                            let (a1, a2) = (alpha[o + 2 * i], alpha[o + 2 * i + 1]);
                            let (b1, b2) = (beta[o + 2 * j], beta[o + 2 * j + 1]);
                            cos_poly[i - j] += a1 * b1 + a2 * b2;
                            sin_poly[i - j] += a2 * b1 - a1 * b2;
                        }
                    }
                }
            }
            let mut fact = 1.0;
            for k in 0..l {
                if k > 0 {
                    fact *= k as f64;
                }
                cos_poly[k] /= fact;
                sin_poly[k] /= fact;
            }
            terms.push(PhaseTerm {
                a: blk.a,
                b: if blk.kind == BlockKind::Rotation { blk.b } else { 0.0 },
                cos_poly,
                sin_poly,
            });
        }
        Phase { terms }
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(FieldError::Domain(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::Domain("point has non-finite coordinates".into()));
        }
        Ok(())
    }
}

fn taylor_row(s: f64, l: usize) -> Vec<f64> {
    let mut t = vec![1.0; l.max(1)];
    for k in 1..l {
        t[k] = t[k - 1] * s / k as f64;
    }
    t
}

fn fill_taylor(s: f64, t: &mut [f64]) {
    if t.is_empty() {
        return;
    }
    t[0] = 1.0;
    for k in 1..t.len() {
        t[k] = t[k - 1] * s / k as f64;
    }
}

fn taylor_at(cache: &[f64; 16], s: f64, k: usize) -> f64 {
    if k < 16 {
        cache[k]
    } else {
        (1..=k).fold(1.0, |acc, i| acc * s / i as f64)
    }
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * x[j]).sum())
        .collect()
}

/// The sorted vector `(H_1, ..., H_N)` of reciprocal eigenvalue real parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HVector(pub Vec<f64>);

impl HVector {
    /// Validates `0 < H_1 ≤ ... ≤ H_N < 1`.
    pub fn new(h: Vec<f64>) -> Result<Self> {
        if h.is_empty() {
            return Err(FieldError::Config("H must be nonempty".into()));
        }
        if h.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
            return Err(FieldError::Config(format!("every H_i must lie in (0, 1), got {h:?}")));
        }
        if h.windows(2).any(|w| w[1] < w[0]) {
            return Err(FieldError::Config(format!("H must be nondecreasing, got {h:?}")));
        }
        Ok(Self(h))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// One exponential-polynomial-trigonometric term
/// `e^{a s} (C(s) cos(b s) + S(s) sin(b s))`.
#[derive(Clone, Debug)]
pub struct PhaseTerm {
    pub a: f64,
    pub b: f64,
    pub cos_poly: Vec<f64>,
    pub sin_poly: Vec<f64>,
}

/// A sum of [`PhaseTerm`]s; closed under differentiation.
#[derive(Clone, Debug)]
pub struct Phase {
    pub terms: Vec<PhaseTerm>,
}

fn horner(p: &[f64], s: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * s + c)
}

impl Phase {
    pub fn eval(&self, s: f64) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            let c = horner(&t.cos_poly, s);
            let e = (t.a * s).exp();
            if t.b == 0.0 {
                v += e * c;
            } else {
                let (sn, cs) = (t.b * s).sin_cos();
                v += e * (c * cs + horner(&t.sin_poly, s) * sn);
            }
        }
        v
    }

    pub fn derivative(&self) -> Phase {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let l = t.cos_poly.len();
                let dpoly = |p: &[f64]| -> Vec<f64> {
                    let mut d = vec![0.0; l];
                    for k in 1..l {
                        d[k - 1] = p[k] * k as f64;
                    }
                    d
                };
                let dc = dpoly(&t.cos_poly);
                let ds = dpoly(&t.sin_poly);
                let cos_poly = (0..l)
                    .map(|k| t.a * t.cos_poly[k] + dc[k] + t.b * t.sin_poly[k])
                    .collect();
                let sin_poly = (0..l)
                    .map(|k| t.a * t.sin_poly[k] + ds[k] - t.b * t.cos_poly[k])
                    .collect();
                PhaseTerm {
                    a: t.a,
                    b: t.b,
                    cos_poly,
                    sin_poly,
                }
            })
            .collect();
        Phase { terms }
    }

    /// Largest absolute polynomial coefficient; zero means `v ≡ 0`.
    pub fn magnitude(&self) -> f64 {
        self.terms
            .iter()
            .flat_map(|t| t.cos_poly.iter().chain(&t.sin_poly))
            .fold(0.0f64, |m, c| m.max(c.abs()))
    }

    pub fn is_oscillating(&self) -> bool {
        self.terms.iter().any(|t| t.b != 0.0)
    }

    pub fn max_frequency(&self) -> f64 {
        self.terms.iter().fold(0.0f64, |m, t| m.max(t.b.abs()))
    }

    /// Smallest growth rate among the terms that are not identically zero.
    pub fn min_rate(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.cos_poly.iter().chain(&t.sin_poly).any(|c| *c != 0.0))
            .fold(f64::INFINITY, |m, t| m.min(t.a))
    }

    /// Highest polynomial degree among the terms.
    pub fn max_degree(&self) -> usize {
        self.terms
            .iter()
            .map(|t| t.cos_poly.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }

    /// Upper bound `Σ e^{a s} Σ_k (|C_k| + |S_k|) |s|^k` on `|v(s)|`.
    pub fn envelope(&self, s: f64) -> f64 {
        let x = s.abs();
        self.terms
            .iter()
            .map(|t| {
                let p: f64 = t
                    .cos_poly
                    .iter()
                    .zip(&t.sin_poly)
                    .rev()
                    .fold(0.0, |acc, (c, d)| acc * x + c.abs() + d.abs());
                (t.a * s).exp() * p
            })
            .sum()
    }

    /// `∫_{-∞}^{top} v(s)² e^{-rate·s} ds` in closed form; needs
    /// `2·min_rate() > rate`.
    pub fn square_integral(&self, top: f64, rate: f64) -> f64 {
        let polys: Vec<(Complex<f64>, Vec<Complex<f64>>)> = self
            .terms
            .iter()
            .map(|t| {
                let p = t
                    .cos_poly
                    .iter()
                    .zip(&t.sin_poly)
                    .map(|(&c, &d)| Complex::new(c, -d))
                    .collect();
                (Complex::new(t.a, t.b), p)
            })
            .collect();
        let mut total = 0.0;
        for (zj, pj) in &polys {
            for (zk, pk) in &polys {
                let direct = exp_poly_integral(zj + zk - rate, &poly_mul(pj, pk), top);
                let pk_conj: Vec<Complex<f64>> = pk.iter().map(|c| c.conj()).collect();
                let mixed = exp_poly_integral(zj + zk.conj() - rate, &poly_mul(pj, &pk_conj), top);
                total += 0.5 * (direct.re + mixed.re);
            }
        }
        total
    }
}

fn poly_mul(p: &[Complex<f64>], q: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// `∫_{-∞}^{t} e^{wσ} p(σ) dσ` for `Re w > 0`.
fn exp_poly_integral(w: Complex<f64>, p: &[Complex<f64>], t: f64) -> Complex<f64> {
    let mut total = Complex::new(0.0, 0.0);
    for (m, c) in p.iter().enumerate() {
        if *c == Complex::new(0.0, 0.0) {
            continue;
        }
        // Σ_k (-1)^k m!/(m-k)! t^{m-k} / w^{k+1}
        let mut acc = Complex::new(0.0, 0.0);
        let mut falling = 1.0;
        let mut wpow = w;
        for k in 0..=m {
            if k > 0 {
                falling *= (m - k + 1) as f64;
                wpow *= w;
            }
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += Complex::new(sign * falling * t.powi((m - k) as i32), 0.0) / wpow;
        }
        total += c * acc;
    }
    (w * t).exp() * total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn assembles_diagonal_and_jordan_and_rotation() {
        let d = ExponentSpec::diagonal(&[2.0, 3.0]).unwrap();
        assert_eq!(
            d.assemble_matrix(),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])
        );
        let j = ExponentSpec::new(vec![JordanBlock::cell(1.7, 2)], None).unwrap();
        assert_eq!(
            j.assemble_matrix(),
            DMatrix::from_row_slice(2, 2, &[1.7, 0.0, 1.0, 1.7])
        );
        let r = ExponentSpec::new(vec![JordanBlock::rotation(1.5, 1.0, 2)], None).unwrap();
        assert_eq!(
            r.assemble_matrix(),
            DMatrix::from_row_slice(2, 2, &[1.5, -1.0, 1.0, 1.5])
        );
        assert_eq!(r.trace(), 3.0);
    }

    #[test]
    fn jordan_power_matches_closed_form() {
        let a = 2.3;
        let j = ExponentSpec::new(vec![JordanBlock::cell(a, 2)], None).unwrap();
        let t: f64 = 0.37;
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, t.ln(), 1.0]) * t.powf(a);
        assert!(close(&j.matrix_power(t).unwrap(), &expected, 1e-14));
    }

    #[test]
    fn rejects_invalid_blocks() {
        assert!(ExponentSpec::diagonal(&[1.0]).is_err());
        assert!(ExponentSpec::diagonal(&[0.5, 2.0]).is_err());
        assert!(ExponentSpec::new(vec![JordanBlock::rotation(2.0, 0.0, 2)], None).is_err());
        assert!(ExponentSpec::new(vec![JordanBlock::rotation(2.0, 1.0, 3)], None).is_err());
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(ExponentSpec::new(vec![JordanBlock::cell(2.0, 2)], Some(singular)).is_err());
        assert!(ExponentSpec::diagonal(&[2.0]).unwrap().matrix_power(0.0).is_err());
    }

    #[test]
    fn blocks_are_sorted_with_their_columns() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        let spec = ExponentSpec::new(
            vec![JordanBlock::cell(3.0, 1), JordanBlock::cell(2.0, 1)],
            Some(p.clone()),
        )
        .unwrap();
        assert_eq!(spec.blocks()[0].a, 2.0);
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 2.0]);
        let expected = &p * d * p.clone().try_inverse().unwrap();
        assert!(close(&spec.assemble_matrix(), &expected, 1e-14));
    }

    #[test]
    fn transpose_is_the_transposed_matrix() {
        let p = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.2, 0.0, 0.3, 0.0, 1.0, 0.4, 0.0, 0.1, 0.0, 1.0, 0.0, 0.0, 0.5, 0.0, 1.0,
            ],
        );
        let spec = ExponentSpec::new(
            vec![JordanBlock::rotation(1.4, 0.8, 2), JordanBlock::cell(2.5, 2)],
            Some(p),
        )
        .unwrap();
        let dual = spec.transpose();
        assert!(close(
            &dual.assemble_matrix(),
            &spec.assemble_matrix().transpose(),
            1e-12
        ));
        let s = 0.7;
        assert!(close(&dual.power_log(s), &spec.power_log(s).transpose(), 1e-12));
        let rot4 = ExponentSpec::new(vec![JordanBlock::rotation(1.4, 0.8, 4)], None).unwrap();
        assert!(close(
            &rot4.transpose().assemble_matrix(),
            &rot4.assemble_matrix().transpose(),
            1e-12
        ));
    }

    #[test]
    fn apply_matches_dense_power() {
        let spec = ExponentSpec::new(
            vec![JordanBlock::rotation(1.4, 0.8, 4), JordanBlock::cell(2.5, 3)],
            None,
        )
        .unwrap();
        let x = [0.3, -1.0, 2.0, 0.5, 0.1, -0.7, 1.1];
        let s = -0.9;
        let dense = mat_vec(&spec.power_log(s), &x);
        let fast = spec.apply_power_log(s, &x);
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn phase_matches_dense_inner_product() {
        let spec = ExponentSpec::new(
            vec![JordanBlock::rotation(1.4, 0.8, 4), JordanBlock::cell(2.5, 3)],
            None,
        )
        .unwrap();
        let alpha = [0.2, 0.1, -0.4, 0.9, 1.0, 0.3, -0.2];
        let beta = [1.0, -0.5, 0.25, 0.3, -0.6, 0.2, 0.8];
        let ph = spec.phase(&alpha, &beta);
        let dph = ph.derivative();
        for &s in &[-2.0, -0.3, 0.0, 0.8, 1.7] {
            let m = spec.canonical_power_log(s);
            let direct: f64 = (0..7)
                .map(|i| alpha[i] * (0..7).map(|j| m[(i, j)] * beta[j]).sum::<f64>())
                .sum();
            assert!((ph.eval(s) - direct).abs() < 1e-12 * direct.abs().max(1.0));
            let h = 1e-5;
            let fd = (ph.eval(s + h) - ph.eval(s - h)) / (2.0 * h);
            assert!((dph.eval(s) - fd).abs() < 1e-6 * fd.abs().max(1.0));
        }
    }

    #[test]
    fn square_integral_matches_quadrature() {
        let spec = ExponentSpec::new(
            vec![JordanBlock::rotation(1.4, 0.8, 4), JordanBlock::cell(2.5, 2)],
            None,
        )
        .unwrap();
        let ph = spec.phase(&[0.2, 0.1, -0.4, 0.9, 1.0, 0.3], &[1.0, -0.5, 0.25, 0.3, -0.6, 0.2]);
        let top = 0.4;
        let f = |s: f64| ph.eval(s).powi(2) * (-2.0 * s).exp();
        let num = crate::quadrature::integrate(f, -120.0, top, crate::quadrature::Tolerance::new(1e-16, 1e-13)).value;
        let closed = ph.square_integral(top, 2.0);
        assert!((num - closed).abs() < 1e-10 * num, "{num} vs {closed}");
        assert!(ph.envelope(top) >= ph.eval(top).abs());
    }

    #[test]
    fn h_vector_follows_reversed_block_order() {
        let spec = ExponentSpec::diagonal(&[2.0, 3.0]).unwrap();
        assert_eq!(spec.h_vector().0, vec![1.0 / 3.0, 0.5]);
        let spec = ExponentSpec::new(
            vec![
                JordanBlock::cell(1.5, 1),
                JordanBlock::cell(2.0, 2),
                JordanBlock::cell(4.0, 1),
            ],
            None,
        )
        .unwrap();
        assert_eq!(spec.h_vector().0, vec![0.25, 0.5, 0.5, 1.0 / 1.5]);
    }

    #[test]
    fn projections_sum_to_the_point() {
        let p = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, 0.0, -0.3, 1.0, 0.2, 0.0, 0.6, 1.0]);
        let spec = ExponentSpec::new(vec![JordanBlock::cell(1.5, 1), JordanBlock::cell(2.5, 2)], Some(p)).unwrap();
        let x = [0.7, -1.2, 0.4];
        let parts: Vec<Vec<f64>> = (0..2).map(|j| spec.project_invariant(&x, j).unwrap()).collect();
        for i in 0..3 {
            assert!((parts[0][i] + parts[1][i] - x[i]).abs() < 1e-14);
        }
        assert!(spec.project_invariant(&x, 2).is_err());
    }

    #[test]
    fn from_matrix_recovers_diagonalizable_exponents() {
        let e = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.1, 1.5, -0.8, 0.0, 0.9, 1.7]);
        let spec = ExponentSpec::from_matrix(&e).unwrap();
        assert!(close(&spec.assemble_matrix(), &e, 1e-9));
        let defective = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 1.0, 2.0]);
        assert!(ExponentSpec::from_matrix(&defective).is_err());
        let scalar = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0]);
        assert!(close(
            &ExponentSpec::from_matrix(&scalar).unwrap().assemble_matrix(),
            &scalar,
            1e-12
        ));
    }

    #[test]
    fn config_round_trip() {
        let json = r#"{"blocks":[{"kind":"cell","a":2.0,"size":2}],"P":[[1.0,0.0],[0.5,1.0]]}"#;
        let spec: ExponentSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.dim(), 2);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(back, json);
        let bad = r#"{"blocks":[{"kind":"cell","a":0.9,"size":1}]}"#;
        assert!(serde_json::from_str::<ExponentSpec>(bad).is_err());
    }
}
