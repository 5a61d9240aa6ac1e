//! Which block code wins at a given temperature.
//!
//! Among zero-coherence codes built from `l = n − d` orthogonal simplices,
//! the self-dual cross-entropy depends only on the tuple of block
//! dimensions. This module enumerates those tuples, finds the best one at a
//! temperature, locates the temperatures where the winner changes, and
//! brackets the regimes where `f_{n,τ}` is concave or convex.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::DimensionTuple;
use crate::error::{check_regime, Error, Result};
use crate::loss::{ce_selfdual_closed, f_parts};

pub const DEFAULT_TOL: f64 = 1e-5;
pub const COARSE_GRID: usize = 512;
pub const X_GRID: usize = 2048;
/// Temperature bracket searched by the threshold routines.
pub const TAU_SEARCH: (f64, f64) = (1e-3, 1e3);

/// Partitions of `d` into exactly `l` positive parts, non-increasing, in
/// reverse-lexicographic order.
pub fn enumerate_tuples(d: usize, l: usize) -> Result<Vec<DimensionTuple>> {
    if l == 0 || l > d {
        return Err(Error::Argument(format!("need 1 <= l <= d, got d = {d}, l = {l}")));
    }
    fn rec(rest: usize, slots: usize, cap: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slots == 0 {
            if rest == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        // leave at least one unit for each remaining slot
        let hi = cap.min(rest + 1 - slots);
        let lo = rest.div_ceil(slots);
        for p in (lo..=hi).rev() {
            prefix.push(p);
            rec(rest - p, slots - 1, p, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, l, d, &mut Vec::with_capacity(l), &mut out);
    out.into_iter().map(DimensionTuple::new).collect()
}

fn tuples_for(d: usize, n: usize) -> Result<Vec<DimensionTuple>> {
    check_regime(d, n)?;
    enumerate_tuples(d, n - d)
}

/// First index of the minimum; ties go to the earlier entry.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn losses_at(tuples: &[DimensionTuple], n: usize, tau: f64) -> Result<Vec<f64>> {
    tuples.iter().map(|t| ce_selfdual_closed(t, n, tau)).collect()
}

/// Minimizer of the self-dual loss over block tuples, with its value.
pub fn optimal_tuple(d: usize, n: usize, tau: f64) -> Result<(DimensionTuple, f64)> {
    let tuples = tuples_for(d, n)?;
    let losses = losses_at(&tuples, n, tau)?;
    let i = argmin(&losses);
    Ok((tuples[i].clone(), losses[i]))
}

#[derive(Clone, Debug, Serialize)]
pub struct TauRecord {
    pub tau: f64,
    /// One entry per tuple of [`SweepReport::tuples`].
    pub losses: Vec<f64>,
    pub argmin: DimensionTuple,
}

#[derive(Clone, Debug, Serialize)]
pub struct Crossover {
    pub tau: f64,
    /// Winner just below `tau`.
    pub below: DimensionTuple,
    /// Winner just above `tau`.
    pub above: DimensionTuple,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub n: usize,
    pub d: usize,
    pub tuples: Vec<DimensionTuple>,
    pub tau_grid: Vec<f64>,
    pub per_tau: Vec<TauRecord>,
    pub crossovers: Vec<Crossover>,
    pub concavity_threshold: f64,
    pub convexity_threshold: f64,
}

impl SweepReport {
    /// CSV with columns `tau`, one loss column per tuple, then `argmin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau");
        for t in &self.tuples {
            out.push(',');
            out.push_str(&t.to_string());
        }
        out.push_str(",argmin\n");
        for rec in &self.per_tau {
            out.push_str(&rec.tau.to_string());
            for l in &rec.losses {
                out.push(',');
                out.push_str(&l.to_string());
            }
            out.push(',');
            out.push_str(&rec.argmin.to_string());
            out.push('\n');
        }
        out
    }

    /// `{"n", "concavity", "convexity", "crossovers": [{"tau", "from", "to"}]}`
    pub fn threshold_json(&self) -> serde_json::Value {
        threshold_report(self.n, self.concavity_threshold, self.convexity_threshold, &self.crossovers)
    }
}

pub fn threshold_report(n: usize, concavity: f64, convexity: f64, crossovers: &[Crossover]) -> serde_json::Value {
    serde_json::json!({
        "n": n,
        "concavity": concavity,
        "convexity": convexity,
        "crossovers": crossovers
            .iter()
            .map(|c| serde_json::json!({
                "tau": c.tau,
                "from": c.below.to_string(),
                "to": c.above.to_string(),
            }))
            .collect::<Vec<_>>(),
    })
}

pub fn crossover_scan(d: usize, n: usize, tau_lo: f64, tau_hi: f64, tol: f64) -> Result<SweepReport> {
    crossover_scan_with_grid(d, n, tau_lo, tau_hi, tol, COARSE_GRID)
}

/// Coarse uniform grid of `grid` temperatures, then bisection of the loss
/// difference between the two winners on each side of a change.
pub fn crossover_scan_with_grid(
    d: usize,
    n: usize,
    tau_lo: f64,
    tau_hi: f64,
    tol: f64,
    grid: usize,
) -> Result<SweepReport> {
    if !(tau_lo > 0.0 && tau_lo < tau_hi && tau_hi.is_finite()) {
        return Err(Error::Argument(format!("need 0 < tau_lo < tau_hi, got [{tau_lo}, {tau_hi}]")));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    if grid < 2 {
        return Err(Error::Argument("grid needs at least two points".into()));
    }
    let tuples = tuples_for(d, n)?;
    let tau_grid: Vec<f64> = (0..grid)
        .map(|i| tau_lo + (tau_hi - tau_lo) * i as f64 / (grid - 1) as f64)
        .collect();
    let per_tau = tau_grid
        .par_iter()
        .map(|&tau| {
            let losses = losses_at(&tuples, n, tau)?;
            let argmin = tuples[argmin(&losses)].clone();
            Ok(TauRecord { tau, losses, argmin })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut crossovers = Vec::new();
    for w in per_tau.windows(2) {
        let (left, right) = (&w[0], &w[1]);
        if left.argmin == right.argmin {
            continue;
        }
        let diff = |tau: f64| -> Result<f64> {
            Ok(ce_selfdual_closed(&left.argmin, n, tau)? - ce_selfdual_closed(&right.argmin, n, tau)?)
        };
        // diff < 0 where the left winner is better
        let (mut lo, mut hi) = (left.tau, right.tau);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if diff(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossovers.push(Crossover {
            tau: 0.5 * (lo + hi),
            below: left.argmin.clone(),
            above: right.argmin.clone(),
        });
    }

    Ok(SweepReport {
        n,
        d,
        tuples,
        tau_grid,
        per_tau,
        crossovers,
        concavity_threshold: concavity_threshold(n, tol)?,
        convexity_threshold: convexity_threshold(n, tol)?,
    })
}

/// Sign of `f''_{n,τ}` (through `Q`) on a uniform grid of `[1, n−1]`:
/// `Some(-1)` if negative everywhere, `Some(1)` if positive, else `None`.
pub fn curvature_sign(n: usize, tau: f64, x_grid: usize) -> Result<Option<i8>> {
    let (mut neg, mut pos) = (true, true);
    let span = n as f64 - 2.0;
    for i in 0..x_grid {
        let x = if x_grid == 1 { 1.0 } else { 1.0 + span * i as f64 / (x_grid - 1) as f64 };
        let q = f_parts(n, tau, x)?.q;
        neg &= q < 0.0;
        pos &= q > 0.0;
        if !neg && !pos {
            return Ok(None);
        }
    }
    Ok(if neg { Some(-1) } else { Some(1) })
}

fn threshold(n: usize, tol: f64, x_grid: usize, want: i8) -> Result<f64> {
    if n < 3 {
        return Err(Error::Argument(format!("thresholds need n >= 3, got {n}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    let holds = |tau: f64| -> Result<bool> { Ok(curvature_sign(n, tau, x_grid)? == Some(want)) };
    let (lo_bound, hi_bound) = TAU_SEARCH;
    // concave side sits at small τ, convex side at large τ
    let (mut inside, mut outside) = if want < 0 { (lo_bound, hi_bound) } else { (hi_bound, lo_bound) };
    if !holds(inside)? || holds(outside)? {
        return Err(Error::Search(format!(
            "f_(n={n}) curvature is not sign-definite as expected at tau = {lo_bound} and {hi_bound}"
        )));
    }
    while (inside - outside).abs() > tol {
        let mid = 0.5 * (inside + outside);
        if holds(mid)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(0.5 * (inside + outside))
}

/// Largest `τ` for which `f_{n,τ}'' < 0` on the whole grid.
pub fn concavity_threshold(n: usize, tol: f64) -> Result<f64> {
    threshold(n, tol, X_GRID, -1)
}

/// Smallest `τ` for which `f_{n,τ}'' > 0` on the whole grid.
pub fn convexity_threshold(n: usize, tol: f64) -> Result<f64> {
    threshold(n, tol, X_GRID, 1)
}

/// Threshold search on a custom `x` grid (cross-checks of grid density).
pub fn threshold_with_grid(n: usize, tol: f64, x_grid: usize, concave: bool) -> Result<f64> {
    threshold(n, tol, x_grid, if concave { -1 } else { 1 })
}
