//! Hausdorff/packing dimensions of the range, graph and level sets of the
//! `R^d`-valued field with i.i.d. components.

use serde::{Deserialize, Serialize};

use crate::exponent::HVector;

/// What is known about the level set dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelSetStatus {
    /// `Σ 1/H_j > d`: the formula applies.
    Dimension,
    /// `Σ 1/H_j < d`: level sets are a.s. empty.
    Empty,
    /// `Σ 1/H_j = d`: not covered by the formula.
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub h: Vec<f64>,
    pub d: u32,
    pub sum_inverse_h: f64,
    pub range_dim: f64,
    pub graph_dim: f64,
    /// Branch index `k` (1-based); `None` when `Σ 1/H_j ≤ d`.
    pub branch: Option<usize>,
    pub level_set_dim: Option<f64>,
    pub level_set_status: LevelSetStatus,
}

/// Relative tolerance for deciding `Σ 1/H_j = d`.
const BOUNDARY_TOL: f64 = 1e-12;

fn prefix_sums(h: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for v in h {
        acc += 1.0 / v;
        out.push(acc);
    }
    out
}

/// `k` with `Σ_{j<k} 1/H_j ≤ d < Σ_{j≤k} 1/H_j`, if any.
pub fn branch_index(h: &[f64], d: f64) -> Option<usize> {
    let s = prefix_sums(h);
    (1..=h.len()).find(|&k| s[k - 1] <= d && d < s[k])
}

/// `Σ_{j≤k} H_k/H_j + N - k + (1 - H_k) d`.
pub fn graph_branch(h: &[f64], d: f64, k: usize) -> f64 {
    let hk = h[k - 1];
    let sum: f64 = h[..k].iter().map(|hj| hk / hj).sum();
    sum + (h.len() - k) as f64 + (1.0 - hk) * d
}

/// `Σ_{j≤k} H_k/H_j + N - k - H_k d`.
pub fn level_branch(h: &[f64], d: f64, k: usize) -> f64 {
    graph_branch(h, d, k) - d
}

/// Graph dimension for real `d`; `(value, branch)`.
pub fn graph_dim(h: &[f64], d: f64) -> (f64, Option<usize>) {
    let total: f64 = h.iter().map(|v| 1.0 / v).sum();
    if total <= d {
        return (total, None);
    }
    let k = branch_index(h, d).expect("d < Σ 1/H_j selects a branch");
    (graph_branch(h, d, k), Some(k))
}

/// Dimension formulas for `H` (ascending) and codomain dimension `d`.
pub fn dimensions(h: &HVector, d: u32) -> DimensionReport {
    let hv = h.0.clone();
    let df = d as f64;
    let total: f64 = hv.iter().map(|v| 1.0 / v).sum();
    let range_dim = df.min(total);
    let (graph, branch) = graph_dim(&hv, df);
    let (status, level) = if (total - df).abs() <= BOUNDARY_TOL * total.max(df) {
        (LevelSetStatus::Indeterminate, None)
    } else if total < df {
        (LevelSetStatus::Empty, None)
    } else {
        let k = branch.expect("Σ 1/H_j > d selects a branch");
        (LevelSetStatus::Dimension, Some(level_branch(&hv, df, k)))
    };
    DimensionReport {
        h: hv,
        d,
        sum_inverse_h: total,
        range_dim,
        graph_dim: graph,
        branch,
        level_set_dim: level,
        level_set_status: status,
    }
}

/// Largest jump of the graph and level formulas across branch boundaries
/// `d = Σ_{j≤k} 1/H_j`, comparing branch `k` and branch `k+1` (or the
/// `Σ 1/H_j` branch) at the boundary.
pub fn boundary_jump(h: &[f64]) -> f64 {
    let s = prefix_sums(h);
    let n = h.len();
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        let d = s[k];
        let left = graph_branch(h, d, k);
        let right = if k < n { graph_branch(h, d, k + 1) } else { s[n] };
        worst = worst.max((left - right).abs());
        if k < n {
            let l = level_branch(h, d, k);
            let r = level_branch(h, d, k + 1);
            worst = worst.max((l - r).abs());
        }
    }
    worst
}
