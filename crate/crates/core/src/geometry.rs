//! Coherence, softmax margin, Radon partitions, rattlers and the batch
//! decomposition of zero-coherence codes.

use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{dot, SphericalConfig};
use crate::error::{check_regime, Error, Result};
use crate::hull::{hull_distance, HullDistanceResult};

/// Default tolerance for the rattler comparisons.
pub const RATTLER_TOL: f64 = 1e-7;
/// Default coherence / Gram tolerance for [`orthoplex_decompose`].
pub const DECOMPOSE_TOL: f64 = 1e-8;
/// Relative singular-value cutoff used for numerical rank.
pub const RANK_RTOL: f64 = 1e-8;
/// `|λ_i|` below this counts as zero in a Radon partition.
const LAMBDA_ZERO: f64 = 1e-12;

/// Largest off-diagonal Gram entry `α(X)`.
pub fn coherence(x: &SphericalConfig) -> Result<f64> {
    let n = x.n();
    if n < 2 {
        return Err(Error::Argument("coherence needs at least two points".into()));
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max(dot(x.row(i), x.row(j)));
        }
    }
    Ok(best)
}

/// `δ(X)` together with every per-point distance.
#[derive(Clone, Debug, Serialize)]
pub struct Margin {
    pub margin: f64,
    pub distances: Vec<f64>,
}

/// Distance from `x_j` to the hull of the remaining points.
pub fn point_hull_distance(x: &SphericalConfig, j: usize) -> Result<HullDistanceResult> {
    let others: Vec<&[f64]> = (0..x.n()).filter(|&i| i != j).map(|i| x.row(i)).collect();
    hull_distance(x.row(j), &others)
}

/// Softmax margin `δ(X) = min_j dist(x_j, conv{x_i : i ≠ j})`.
pub fn margin(x: &SphericalConfig) -> Result<Margin> {
    if x.n() < 2 {
        return Err(Error::Argument("margin needs at least two points".into()));
    }
    let distances = (0..x.n())
        .into_par_iter()
        .map(|j| point_hull_distance(x, j).map(|r| r.distance))
        .collect::<Result<Vec<f64>>>()?;
    let margin = distances.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Margin { margin, distances })
}

/// Two index sets whose convex hulls share `radon_point`.
#[derive(Clone, Debug, Serialize)]
pub struct RadonPartition {
    pub side_a: Vec<usize>,
    pub side_b: Vec<usize>,
    pub radon_point: Vec<f64>,
    /// Affine dependence `Σ λ_i x_i = 0`, `Σ λ_i = 0` the split came from.
    pub lambda: Vec<f64>,
}

/// Singular values and right singular vectors of the `n`-column matrix
/// `rows`, padded with zero rows to be square so the full null space shows.
fn right_singular(rows: usize, cols: usize, entries: impl Fn(usize, usize) -> f64) -> (Vec<f64>, DMatrix<f64>) {
    let size = rows.max(cols);
    let m = DMatrix::from_fn(size, cols, |r, c| if r < rows { entries(r, c) } else { 0.0 });
    let svd = m.svd(false, true);
    (svd.singular_values.as_slice().to_vec(), svd.v_t.expect("v_t requested"))
}

/// Numerical rank of a set of row vectors (cutoff `RANK_RTOL × σ_max`).
pub fn rank(vectors: &[&[f64]]) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let d = vectors[0].len();
    let m = DMatrix::from_fn(vectors.len(), d, |r, c| vectors[r][c]);
    let sv = m.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * top).count()
}

/// Radon partition from the smallest-singular-value null vector of the
/// lifted `(d+1) × n` system `[X^T; 1^T] λ = 0`.
pub fn radon_partition(x: &SphericalConfig) -> Result<RadonPartition> {
    let (d, n) = (x.d(), x.n());
    let (sv, v_t) = right_singular(d + 1, n, |r, c| if r < d { x.row(c)[r] } else { 1.0 });
    let (idx, smin) = sv
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if n < d + 2 && smin > RANK_RTOL * smax {
        return Err(Error::NoPartition);
    }
    let mut lambda: Vec<f64> = v_t.row(idx).iter().copied().collect();
    if let Some(first) = lambda.iter().copied().find(|v| v.abs() >= LAMBDA_ZERO) {
        if first < 0.0 {
            lambda.iter_mut().for_each(|v| *v = -*v);
        }
    } else {
        return Err(Error::NoPartition);
    }

    let (side_a, side_b): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| lambda[i] > -LAMBDA_ZERO);
    if side_b.is_empty() {
        return Err(Error::NoPartition);
    }
    let mass: f64 = side_a.iter().map(|&i| lambda[i].max(0.0)).sum();
    let radon_point = (0..d)
        .map(|c| side_a.iter().map(|&i| lambda[i].max(0.0) * x.row(i)[c]).sum::<f64>() / mass)
        .collect();
    Ok(RadonPartition { side_a, side_b, radon_point, lambda })
}

/// Index sets of softmax and Tammes rattlers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Rattlers {
    pub softmax: Vec<usize>,
    pub tammes: Vec<usize>,
}

pub fn find_rattlers(x: &SphericalConfig) -> Result<Rattlers> {
    find_rattlers_with_tol(x, RATTLER_TOL)
}

/// Softmax rattlers sit farther than `δ(X) + tol` from the others' hull;
/// Tammes rattlers have every inner product below `α(X) − tol`.
pub fn find_rattlers_with_tol(x: &SphericalConfig, tol: f64) -> Result<Rattlers> {
    let m = margin(x)?;
    let alpha = coherence(x)?;
    let softmax = (0..x.n()).filter(|&j| m.distances[j] > m.margin + tol).collect();
    let tammes = (0..x.n())
        .filter(|&j| {
            let best = (0..x.n())
                .filter(|&i| i != j)
                .map(|i| dot(x.row(i), x.row(j)))
                .fold(f64::NEG_INFINITY, f64::max);
            best < alpha - tol
        })
        .collect();
    Ok(Rattlers { softmax, tammes })
}

/// `S_0 ⊔ S_1 ⊔ … ⊔ S_l` with mutually orthogonal spans.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BatchDecomposition {
    pub s0: Vec<usize>,
    pub batches: Vec<Vec<usize>>,
    pub ranks: Vec<usize>,
}

impl BatchDecomposition {
    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }
}

/// Connected components of the graph with an edge wherever
/// `|gram[i][j]| > tol`, each sorted, ordered by smallest member.
pub fn gram_components(gram: &[Vec<f64>], tol: f64) -> Vec<Vec<usize>> {
    let n = gram.len();
    let mut uf = UnionFind::<usize>::new(n);
    for i in 0..n {
        for j in (i + 1)..n {
            if gram[i][j].abs() > tol {
                uf.union(i, j);
            }
        }
    }
    let labels = uf.into_labeling();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for (i, &root) in labels.iter().enumerate() {
        if slot[root] == usize::MAX {
            slot[root] = comps.len();
            comps.push(Vec::new());
        }
        comps[slot[root]].push(i);
    }
    comps
}

pub fn orthoplex_decompose(x: &SphericalConfig) -> Result<BatchDecomposition> {
    orthoplex_decompose_with_tol(x, DECOMPOSE_TOL)
}

/// Splits a zero-coherence code in the orthoplex regime into an
/// independent part `S_0` and simplex-like batches with `|S_j| = rank + 1`.
pub fn orthoplex_decompose_with_tol(x: &SphericalConfig, tol: f64) -> Result<BatchDecomposition> {
    let (d, n) = (x.d(), x.n());
    check_regime(d, n)?;
    let alpha = coherence(x)?;
    if alpha > tol {
        return Err(Error::NotSphericalCode { coherence: alpha, tol });
    }
    let mut s0 = Vec::new();
    let mut batches = Vec::new();
    let mut ranks = Vec::new();
    for comp in gram_components(&x.gram(), tol) {
        let rows: Vec<&[f64]> = comp.iter().map(|&i| x.row(i)).collect();
        let r = rank(&rows);
        if r == comp.len() {
            s0.extend(comp);
        } else if r + 1 == comp.len() {
            batches.push(comp);
            ranks.push(r);
        } else {
            return Err(Error::DecompositionFailure(format!(
                "component {comp:?} has rank {r}, size {}",
                comp.len()
            )));
        }
    }
    s0.sort_unstable();
    if batches.len() < n - d {
        return Err(Error::DecompositionFailure(format!(
            "found {} batches, need at least n - d = {}",
            batches.len(),
            n - d
        )));
    }
    Ok(BatchDecomposition { s0, batches, ranks })
}
