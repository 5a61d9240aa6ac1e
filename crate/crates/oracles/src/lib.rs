//! Brute-force reference computations for cross-checking the orthoplex
//! solvers.
//!
//! Nothing here depends on the main library: inputs are plain slices and
//! every formula is transcribed independently. These routines are slow on
//! purpose and only meant for test-sized instances.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("oracle handles at most {max} generators, got {got}")]
    TooManyGenerators { max: usize, got: usize },
    #[error("invalid oracle argument: {0}")]
    Argument(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

pub const MAX_GENERATORS: usize = 5;

/// One oracle-vs-solver comparison.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub instance: String,
    pub oracle: f64,
    pub solver: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
}

impl OracleReport {
    pub fn new(instance: impl Into<String>, oracle: f64, solver: f64) -> Self {
        let abs_dev = (oracle - solver).abs();
        let rel_dev = abs_dev / oracle.abs().max(f64::MIN_POSITIVE);
        OracleReport { instance: instance.into(), oracle, solver, abs_dev, rel_dev }
    }
}

fn distance_at(query: &[f64], gens: &[&[f64]], weights: &[f64]) -> f64 {
    let mut s = 0.0;
    for c in 0..query.len() {
        let p: f64 = gens.iter().zip(weights).map(|(g, w)| w * g[c]).sum();
        s += (p - query[c]).powi(2);
    }
    s.sqrt()
}

/// Calls `visit` with every barycentric point `c / depth`, `c` a
/// composition of `depth` into `k` nonnegative parts.
fn for_each_composition(k: usize, depth: usize, visit: &mut impl FnMut(&[f64])) {
    fn rec(slot: usize, left: usize, counts: &mut Vec<usize>, depth: usize, visit: &mut impl FnMut(&[f64])) {
        let k = counts.len();
        if slot == k - 1 {
            counts[slot] = left;
            let w: Vec<f64> = counts.iter().map(|&c| c as f64 / depth as f64).collect();
            visit(&w);
            return;
        }
        for c in 0..=left {
            counts[slot] = c;
            rec(slot + 1, left - c, counts, depth, visit);
        }
    }
    let mut counts = vec![0; k];
    rec(0, depth, &mut counts, depth, visit);
}

/// Distance from `query` to the hull of at most five generators.
///
/// Exhaustive barycentric grid with `grid_depth` subdivisions, then local
/// pattern search around the best grid point: a `7^k` neighbourhood lattice,
/// re-centred on improvement and halved otherwise, down to weight spacing
/// `1e-12`.
pub fn hull_distance_oracle<G: AsRef<[f64]>>(query: &[f64], generators: &[G], grid_depth: usize) -> Result<f64> {
    let k = generators.len();
    if k > MAX_GENERATORS {
        return Err(OracleError::TooManyGenerators { max: MAX_GENERATORS, got: k });
    }
    if k == 0 {
        return Err(OracleError::Argument("no generators".into()));
    }
    if grid_depth < 2 {
        return Err(OracleError::Argument("grid_depth must be at least 2".into()));
    }
    let gens: Vec<&[f64]> = generators.iter().map(AsRef::as_ref).collect();
    if gens.iter().any(|g| g.len() != query.len()) {
        return Err(OracleError::Argument("dimension mismatch".into()));
    }
    if k == 1 {
        return Ok(distance_at(query, &gens, &[1.0]));
    }

    let mut best_w = vec![0.0; k];
    let mut best = f64::INFINITY;
    for_each_composition(k, grid_depth, &mut |w| {
        let v = distance_at(query, &gens, w);
        if v < best {
            best = v;
            best_w.copy_from_slice(w);
        }
    });

    const RADIUS: i64 = 3;
    let mut h = 1.0 / grid_depth as f64;
    let mut offsets = vec![-RADIUS; k];
    while h > 1e-12 {
        let mut improved = false;
        let center = best_w.clone();
        offsets.iter_mut().for_each(|o| *o = -RADIUS);
        loop {
            let mut w: Vec<f64> = center
                .iter()
                .zip(&offsets)
                .map(|(c, &o)| (c + h * o as f64).max(0.0))
                .collect();
            let s: f64 = w.iter().sum();
            if s > 0.0 {
                w.iter_mut().for_each(|x| *x /= s);
                let v = distance_at(query, &gens, &w);
                if v < best {
                    best = v;
                    best_w = w;
                    improved = true;
                }
            }
            // odometer over {-R..R}^k
            let mut i = 0;
            while i < k {
                offsets[i] += 1;
                if offsets[i] <= RADIUS {
                    break;
                }
                offsets[i] = -RADIUS;
                i += 1;
            }
            if i == k {
                break;
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(best)
}

/// Central differences of `f` at `point`, one coordinate at a time.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, point: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(OracleError::Argument("step must be positive".into()));
    }
    let mut x = point.to_vec();
    let mut grad = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// Removes the radial part of each `d`-block of `grad` relative to the unit
/// vectors in `base`.
pub fn tangent_part(base: &[f64], grad: &[f64], d: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(grad.len());
    for (g, x) in grad.chunks(d).zip(base.chunks(d)) {
        let radial: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
        out.extend(g.iter().zip(x).map(|(a, b)| a - radial * b));
    }
    out
}

/// Self-dual block-code loss, transcribed literally:
/// `(1/n) Σ (d_i+1) log(n − (d_i+1) + e^{1/τ} + d_i e^{−1/(τ d_i)}) − 1/τ`.
pub fn block_loss_direct(parts: &[usize], n: usize, tau: f64) -> f64 {
    let nf = n as f64;
    let sum: f64 = parts
        .iter()
        .map(|&di| {
            let x = di as f64;
            (x + 1.0) * (nf - (x + 1.0) + (1.0 / tau).exp() + x * (-1.0 / (tau * x)).exp()).ln()
        })
        .sum();
    sum / nf - 1.0 / tau
}

/// Best block tuple by linear scan. Candidates come from every way of
/// cutting `d` unit intervals at `l − 1` of the `d − 1` inner positions
/// (a bitmask), keeping the non-increasing ones; ties go to the
/// lexicographically largest tuple.
pub fn tuple_argmin_oracle(d: usize, n: usize, tau: f64) -> Result<Vec<usize>> {
    if n < d + 2 || n > 2 * d {
        return Err(OracleError::Argument(format!("(d, n) = ({d}, {n}) outside the regime")));
    }
    if !(tau > 0.0) {
        return Err(OracleError::Argument("temperature must be positive".into()));
    }
    if d > 24 {
        return Err(OracleError::Argument("oracle enumeration limited to d <= 24".into()));
    }
    let l = n - d;
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for mask in 0u32..(1u32 << (d - 1)) {
        if mask.count_ones() as usize != l - 1 {
            continue;
        }
        let mut parts = Vec::with_capacity(l);
        let mut run = 1;
        for gap in 0..(d - 1) {
            if mask & (1 << gap) != 0 {
                parts.push(run);
                run = 1;
            } else {
                run += 1;
            }
        }
        parts.push(run);
        if parts.windows(2).all(|w| w[0] >= w[1]) {
            candidates.push(parts);
        }
    }
    candidates.sort_by(|a, b| b.cmp(a));
    let mut best = candidates[0].clone();
    let mut best_val = block_loss_direct(&best, n, tau);
    for c in &candidates[1..] {
        let v = block_loss_direct(c, n, tau);
        if v < best_val {
            best_val = v;
            best = c.clone();
        }
    }
    Ok(best)
}
