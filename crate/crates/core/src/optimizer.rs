//! Riemannian gradient descent for the cross-entropy on a product of unit
//! spheres, plus diagnostics comparing the result against ideal block codes.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{norm, DimensionTuple, FeatureSet, SphericalConfig};
use crate::error::{Error, Result};
use crate::geometry::gram_components;
use crate::loss::{ce_gradient, ce_loss};

pub const ARMIJO_C: f64 = 1e-4;
/// Backtracking gives up below this trial step.
pub const MIN_STEP: f64 = 1e-30;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StepRule {
    /// Backtracking line search with halving. Each iteration first tries
    /// twice the previously accepted step.
    Armijo { initial: f64 },
    Fixed { step: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Armijo { initial: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOptions {
    pub tau: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_rule: StepRule,
    pub record_history: bool,
}

impl OptimizeOptions {
    pub fn new(tau: f64) -> Self {
        OptimizeOptions {
            tau,
            max_iters: 10_000,
            grad_tol: 1e-10,
            step_rule: StepRule::default(),
            record_history: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradTol,
    MaxIters,
    /// No step passed the Armijo test above [`MIN_STEP`].
    LineSearch,
}

#[derive(Clone, Debug, Serialize)]
pub struct OptimizerState {
    pub iterate: FeatureSet,
    pub step: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub stop: StopReason,
    /// `(loss, grad_norm)` per iteration, starting with the initial point.
    pub history: Vec<(f64, f64)>,
}

impl OptimizerState {
    /// Trajectory CSV with columns `iter,loss,grad_norm`.
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("iter,loss,grad_norm\n");
        for (i, (l, g)) in self.history.iter().enumerate() {
            out.push_str(&format!("{i},{l},{g}\n"));
        }
        out
    }
}

/// `x ← normalize(x − s·g)` row by row.
fn retract(base: &[f64], dir: &[f64], step: f64, d: usize) -> Vec<f64> {
    if step == 0.0 {
        return base.to_vec();
    }
    let mut out: Vec<f64> = base.iter().zip(dir).map(|(x, g)| x - step * g).collect();
    for row in out.chunks_mut(d) {
        let s = norm(row);
        row.iter_mut().for_each(|v| *v /= s);
    }
    out
}

fn moved(fs: &FeatureSet, rw: &[f64], rh: &[f64], step: f64) -> FeatureSet {
    let d = fs.d();
    let w = retract(fs.weights().as_flat(), rw, step, d);
    let h = retract(fs.features_flat(), rh, step, d);
    let weights = SphericalConfig::from_flat(d, fs.n(), w, 1e-12).expect("retraction yields unit rows");
    FeatureSet::from_parts_unchecked(weights, fs.m(), h)
}

/// Minimizes `L_CE^{(τ)}(W, H)` subject to unit norms.
pub fn optimize(init: FeatureSet, opts: &OptimizeOptions) -> Result<OptimizerState> {
    if !(opts.tau > 0.0) {
        return Err(Error::Argument(format!("temperature must be positive, got {}", opts.tau)));
    }
    if opts.max_iters == 0 {
        return Err(Error::Argument("max_iters must be at least 1".into()));
    }
    if !(opts.grad_tol > 0.0) {
        return Err(Error::Argument("grad_tol must be positive".into()));
    }

    let mut x = init;
    let mut loss = ce_loss(&x, opts.tau)?;
    if !loss.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut grad = ce_gradient(&x, opts.tau)?;
    let mut grad_norm = grad.riemannian_norm();
    let mut history = Vec::new();
    if opts.record_history {
        history.push((loss, grad_norm));
    }
    let mut last_step = match opts.step_rule {
        StepRule::Armijo { initial } => initial / 2.0,
        StepRule::Fixed { step } => step,
    };

    let mut stop = StopReason::MaxIters;
    let mut iter = 0;
    while iter < opts.max_iters {
        if grad_norm < opts.grad_tol {
            stop = StopReason::GradTol;
            break;
        }
        let (rw, rh) = (&grad.riemannian_weights, &grad.riemannian_features);
        let (next, next_loss) = match opts.step_rule {
            StepRule::Fixed { step } => {
                let cand = moved(&x, rw, rh, step);
                let l = ce_loss(&cand, opts.tau)?;
                (cand, l)
            }
            StepRule::Armijo { .. } => {
                let mut trial = 2.0 * last_step;
                let g2 = grad_norm * grad_norm;
                let accepted = loop {
                    if trial < MIN_STEP {
                        break None;
                    }
                    let cand = moved(&x, rw, rh, trial);
                    let l = ce_loss(&cand, opts.tau)?;
                    if !l.is_finite() {
                        return Err(Error::Divergence { iteration: iter + 1 });
                    }
                    if l <= loss - ARMIJO_C * trial * g2 {
                        break Some((cand, l));
                    }
                    trial *= 0.5;
                };
                match accepted {
                    Some(pair) => {
                        last_step = trial;
                        pair
                    }
                    None => {
                        stop = StopReason::LineSearch;
                        break;
                    }
                }
            }
        };
        if !next_loss.is_finite() {
            return Err(Error::Divergence { iteration: iter + 1 });
        }
        x = next;
        loss = next_loss;
        grad = ce_gradient(&x, opts.tau)?;
        grad_norm = grad.riemannian_norm();
        iter += 1;
        if opts.record_history {
            history.push((loss, grad_norm));
        }
    }
    if iter == opts.max_iters && grad_norm < opts.grad_tol {
        stop = StopReason::GradTol;
    }
    Ok(OptimizerState { iterate: x, step: iter, loss, grad_norm, stop, history })
}

/// One run per seed from [`FeatureSet::random`], executed in parallel and
/// returned in seed order.
pub fn optimize_seeds(
    d: usize,
    n: usize,
    m: usize,
    seeds: &[u64],
    opts: &OptimizeOptions,
) -> Result<Vec<OptimizerState>> {
    seeds
        .par_iter()
        .map(|&s| optimize(FeatureSet::random(d, n, m, s)?, opts))
        .collect()
}

/// Index of the lowest-loss run.
pub fn best_run(states: &[OptimizerState]) -> Option<usize> {
    (0..states.len()).min_by(|&a, &b| states[a].loss.total_cmp(&states[b].loss))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CollapseMetrics {
    /// `max_{k,i} ‖h_{k,i} − w_k‖`
    pub duality_gap: f64,
    /// Mean over classes of `(1/m) Σ_i ‖h_{k,i} − mean_i h_{k,i}‖²`.
    pub within_class_var: f64,
    pub gram_error_low: f64,
    pub gram_error_high: f64,
    pub gram_error_reference: f64,
}

/// Reported when the Gram matrix does not split into the tuple's blocks.
pub const GRAM_ERROR_INFEASIBLE: f64 = 2.0;

pub fn collapse_metrics(state: &OptimizerState, reference: &DimensionTuple) -> Result<CollapseMetrics> {
    feature_collapse_metrics(&state.iterate, reference)
}

pub fn feature_collapse_metrics(fs: &FeatureSet, reference: &DimensionTuple) -> Result<CollapseMetrics> {
    let (d, n, m) = (fs.d(), fs.n(), fs.m());
    if reference.dim() != d || reference.points() != n {
        return Err(Error::Argument(format!(
            "reference tuple {reference} does not fit d = {d}, n = {n}"
        )));
    }
    let mut duality_gap: f64 = 0.0;
    let mut var_total = 0.0;
    for k in 0..n {
        let w = fs.weights().row(k);
        let mut mean = vec![0.0; d];
        for i in 0..m {
            let h = fs.feature(k, i);
            let gap = h.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            duality_gap = duality_gap.max(gap);
            mean.iter_mut().zip(h).for_each(|(a, b)| *a += b / m as f64);
        }
        var_total += (0..m)
            .map(|i| fs.feature(k, i).iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum::<f64>()
            / m as f64;
    }
    let gram = fs.weights().gram();
    let in_regime = n >= d + 2 && n <= 2 * d;
    let (low, high) = if in_regime {
        (
            gram_error(&gram, &DimensionTuple::low_entropy(d, n)?),
            gram_error(&gram, &DimensionTuple::high_entropy(d, n)?),
        )
    } else {
        (GRAM_ERROR_INFEASIBLE, GRAM_ERROR_INFEASIBLE)
    };
    Ok(CollapseMetrics {
        duality_gap,
        within_class_var: var_total / n as f64,
        gram_error_low: low,
        gram_error_high: high,
        gram_error_reference: gram_error(&gram, reference),
    })
}

/// Largest `n` for which [`gram_error`] searches all block assignments.
pub const GRAM_EXACT_MAX_N: usize = 10;

/// Max entrywise deviation of `gram` from the ideal Gram of `tuple`
/// (1 on the diagonal, `−1/d_i` inside block `i`, 0 across blocks),
/// minimized over assignments of indices to blocks.
///
/// Up to [`GRAM_EXACT_MAX_N`] points the minimum is exact (branch and bound
/// over assignments). Beyond that, indices are grouped by thresholding
/// `|G_ij|` at half the smallest ideal within-block magnitude and the groups
/// are matched to blocks of equal size; [`GRAM_ERROR_INFEASIBLE`] is returned
/// when the group sizes do not fit the tuple.
pub fn gram_error(gram: &[Vec<f64>], tuple: &DimensionTuple) -> f64 {
    let n = gram.len();
    if tuple.points() != n {
        return GRAM_ERROR_INFEASIBLE;
    }
    if n <= GRAM_EXACT_MAX_N {
        return gram_error_exact(gram, tuple);
    }
    let largest = tuple.parts()[0] as f64;
    let comps = gram_components(gram, 0.5 / largest);
    let mut comp_sizes: Vec<usize> = comps.iter().map(Vec::len).collect();
    let mut block_sizes: Vec<usize> = tuple.parts().iter().map(|p| p + 1).collect();
    comp_sizes.sort_unstable();
    block_sizes.sort_unstable();
    if comp_sizes != block_sizes {
        return GRAM_ERROR_INFEASIBLE;
    }
    // equal-size blocks share an ideal Gram, so matching by size suffices
    let mut by_size: HashMap<usize, Vec<usize>> = HashMap::new();
    for (b, p) in tuple.parts().iter().enumerate() {
        by_size.entry(p + 1).or_default().push(b);
    }
    let mut label = vec![0usize; n];
    for c in &comps {
        let b = by_size.get_mut(&c.len()).and_then(Vec::pop).expect("sizes matched");
        c.iter().for_each(|&i| label[i] = b);
    }
    labelled_error(gram, tuple, &label)
}

fn ideal_entry(tuple: &DimensionTuple, label: &[usize], i: usize, j: usize) -> f64 {
    if i == j {
        1.0
    } else if label[i] == label[j] {
        -1.0 / tuple.parts()[label[i]] as f64
    } else {
        0.0
    }
}

fn labelled_error(gram: &[Vec<f64>], tuple: &DimensionTuple, label: &[usize]) -> f64 {
    let n = gram.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((gram[i][j] - ideal_entry(tuple, label, i, j)).abs());
        }
    }
    worst
}

fn gram_error_exact(gram: &[Vec<f64>], tuple: &DimensionTuple) -> f64 {
    struct Search<'a> {
        gram: &'a [Vec<f64>],
        tuple: &'a DimensionTuple,
        room: Vec<usize>,
        label: Vec<usize>,
        best: f64,
    }
    impl Search<'_> {
        fn go(&mut self, i: usize, worst: f64) {
            if worst >= self.best {
                return;
            }
            if i == self.gram.len() {
                self.best = worst;
                return;
            }
            let parts = self.tuple.parts();
            for b in 0..parts.len() {
                if self.room[b] == 0 {
                    continue;
                }
                // an empty block is interchangeable with earlier empty blocks of the same size
                let full = parts[b] + 1;
                if self.room[b] == full && (0..b).any(|a| parts[a] == parts[b] && self.room[a] == full) {
                    continue;
                }
                self.label[i] = b;
                self.room[b] -= 1;
                let mut w = worst.max((self.gram[i][i] - 1.0).abs());
                for j in 0..i {
                    w = w.max((self.gram[i][j] - ideal_entry(self.tuple, &self.label, i, j)).abs());
                }
                self.go(i + 1, w);
                self.room[b] += 1;
            }
        }
    }
    let mut s = Search {
        gram,
        tuple,
        room: tuple.parts().iter().map(|p| p + 1).collect(),
        label: vec![0; gram.len()],
        best: f64::INFINITY,
    };
    s.go(0, 0.0);
    s.best
}
