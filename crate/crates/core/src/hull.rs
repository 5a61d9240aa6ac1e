//! Euclidean distance from a point to the convex hull of finitely many
//! generators, posed as a min-norm-point problem over the translated
//! generators `p_i = g_i − q` and solved with Wolfe's active-set method.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::dot;
use crate::error::{Error, Result};

/// Stop once the Frank–Wolfe gap falls below this multiple of the largest
/// squared generator norm (after translating the query to the origin).
pub const GAP_TOL: f64 = 1e-12;
pub const MAX_ITERS: usize = 10_000;

/// Nearest point of a convex hull, with its certificate.
#[derive(Clone, Debug, Serialize)]
pub struct HullDistanceResult {
    pub distance: f64,
    /// Nearest point `v` of the hull.
    pub witness_point: Vec<f64>,
    /// Convex coefficients with `Σ a_i g_i = v`.
    pub weights: Vec<f64>,
    /// Frank–Wolfe duality gap of `½‖v − q‖²` at termination.
    pub gap: f64,
    pub iterations: usize,
}

/// Distance from `query` to `conv(generators)`.
pub fn hull_distance<G: AsRef<[f64]>>(query: &[f64], generators: &[G]) -> Result<HullDistanceResult> {
    if generators.is_empty() {
        return Err(Error::Argument("hull of an empty generator set".into()));
    }
    let d = query.len();
    if let Some(g) = generators.iter().find(|g| g.as_ref().len() != d) {
        return Err(Error::Dimension(format!(
            "generator has {} coordinates, query has {d}",
            g.as_ref().len()
        )));
    }

    let shifted: Vec<Vec<f64>> = generators
        .iter()
        .map(|g| g.as_ref().iter().zip(query).map(|(a, b)| a - b).collect())
        .collect();
    let (weights, gap, iterations) = min_norm_weights(&shifted);

    let witness_point: Vec<f64> = (0..d)
        .map(|c| generators.iter().zip(&weights).map(|(g, a)| a * g.as_ref()[c]).sum())
        .collect();
    let distance = witness_point
        .iter()
        .zip(query)
        .map(|(v, q)| (v - q) * (v - q))
        .sum::<f64>()
        .sqrt();
    Ok(HullDistanceResult { distance, witness_point, weights, gap, iterations })
}

fn combine(points: &[Vec<f64>], support: &[usize], weights: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for (&i, &a) in support.iter().zip(weights) {
        out.iter_mut().zip(&points[i]).for_each(|(x, y)| *x += a * y);
    }
}

/// Min-norm point of the affine hull of `points[support]`, as affine
/// coefficients. `None` when the support is affinely dependent.
fn affine_min_norm(points: &[Vec<f64>], support: &[usize]) -> Option<Vec<f64>> {
    let s = support.len();
    let mut m = DMatrix::<f64>::zeros(s + 1, s + 1);
    for (a, &i) in support.iter().enumerate() {
        for (b, &j) in support.iter().enumerate().skip(a) {
            let g = dot(&points[i], &points[j]);
            m[(a, b)] = g;
            m[(b, a)] = g;
        }
        m[(a, s)] = 1.0;
        m[(s, a)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(s + 1);
    rhs[s] = 1.0;
    let sol = m.full_piv_lu().solve(&rhs)?;
    let mu: Vec<f64> = sol.iter().take(s).copied().collect();
    mu.iter().all(|v| v.is_finite()).then_some(mu)
}

/// Minimizes `‖Σ a_i p_i‖` over the probability simplex with Wolfe's
/// active-set method.
///
/// Returns the weights, the final Frank–Wolfe gap `‖x‖² − min_i ⟨x, p_i⟩`
/// and the number of affine solves.
fn min_norm_weights(points: &[Vec<f64>]) -> (Vec<f64>, f64, usize) {
    const POS_TOL: f64 = 1e-12;
    let k = points.len();
    let sq: Vec<f64> = points.iter().map(|p| dot(p, p)).collect();
    let scale = sq.iter().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);

    let start = (0..k).min_by(|&i, &j| sq[i].total_cmp(&sq[j])).unwrap();
    let mut support = vec![start];
    let mut lam = vec![1.0];
    let mut x = points[start].clone();
    let mut gap;
    let mut iters = 0;

    'major: loop {
        let xx = dot(&x, &x);
        let (j, best) = (0..k)
            .map(|i| (i, dot(&x, &points[i])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        gap = (xx - best).max(0.0);
        if gap <= GAP_TOL * scale || support.contains(&j) || iters >= MAX_ITERS {
            break;
        }
        support.push(j);
        lam.push(0.0);
        loop {
            iters += 1;
            let Some(mu) = affine_min_norm(points, &support) else {
                support.pop();
                lam.pop();
                break 'major;
            };
            if mu.iter().all(|&m| m > POS_TOL) {
                lam = mu;
                break;
            }
            // step from lam toward mu until a coefficient hits zero
            let (mut theta, mut hit) = (1.0, 0);
            for (a, (&l, &m)) in lam.iter().zip(&mu).enumerate() {
                if m <= POS_TOL && l - m > 0.0 {
                    let t = l / (l - m);
                    if t < theta {
                        theta = t;
                        hit = a;
                    }
                }
            }
            let mut next: Vec<(usize, f64)> = Vec::with_capacity(support.len());
            for (a, (&l, &m)) in lam.iter().zip(&mu).enumerate() {
                let v = (1.0 - theta) * l + theta * m;
                if a != hit && v > POS_TOL {
                    next.push((support[a], v));
                }
            }
            if next.is_empty() {
                break 'major;
            }
            let total: f64 = next.iter().map(|p| p.1).sum();
            support = next.iter().map(|p| p.0).collect();
            lam = next.iter().map(|p| p.1 / total).collect();
            if iters >= MAX_ITERS {
                break;
            }
        }
        combine(points, &support, &lam, &mut x);
    }

    let mut weights = vec![0.0; k];
    for (&i, &l) in support.iter().zip(&lam) {
        weights[i] = l;
    }
    (weights, gap, iters)
}
