//! Cross-entropy and hardmax losses on unit-norm weights and features, the
//! batch loss `L_{τ,c}`, the closed form of the self-dual loss over
//! orthogonal simplex blocks, and `f_{n,τ}` with analytic derivatives.
//!
//! Quantities that contain `e^{1/τ}` are evaluated in scaled form so that
//! small temperatures do not overflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{dot, DimensionTuple, FeatureSet, SphericalConfig};
use crate::error::{Error, Result};

/// Smallest temperature accepted by [`ce_loss`] and [`ce_gradient`].
pub const MIN_CE_TAU: f64 = 1e-3;

/// Temperature `τ` and additive constant `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LossParams {
    pub tau: f64,
    pub c: f64,
}

impl LossParams {
    pub fn new(tau: f64, c: f64) -> Result<Self> {
        check_tau(tau)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Argument(format!("c must be positive, got {c}")));
        }
        Ok(LossParams { tau, c })
    }

    /// Inverse temperature `β = 1/τ`.
    pub fn beta(&self) -> f64 {
        1.0 / self.tau
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Argument(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

fn check_ce_tau(tau: f64) -> Result<()> {
    check_tau(tau)?;
    if tau < MIN_CE_TAU {
        return Err(Error::Argument(format!(
            "temperature {tau} below {MIN_CE_TAU}; use the closed forms instead"
        )));
    }
    Ok(())
}

/// `−log softmax(z)_k`, accurate also when the result is tiny.
fn neg_log_softmax(z: &[f64], k: usize) -> f64 {
    let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lead = top - z[k];
    if lead < 700.0 {
        // Σ_{j≠k} e^{z_j − z_k}, each factor bounded by e^{lead}
        let scale = lead.exp();
        let rest: f64 = z
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .map(|(_, &zj)| (zj - top).exp() * scale)
            .sum();
        rest.ln_1p()
    } else {
        let s: f64 = z.iter().map(|&zj| (zj - top).exp()).sum();
        lead + s.ln()
    }
}

fn logits(fs: &FeatureSet, h: &[f64], tau: f64, out: &mut [f64]) {
    for (zj, w) in out.iter_mut().zip(fs.weights().rows()) {
        *zj = dot(w, h) / tau;
    }
}

/// Mean cross-entropy `L_CE^{(τ)}(W, H)` over all `n·m` samples.
pub fn ce_loss(fs: &FeatureSet, tau: f64) -> Result<f64> {
    check_ce_tau(tau)?;
    let (n, m) = (fs.n(), fs.m());
    let mut z = vec![0.0; n];
    let mut total = 0.0;
    for k in 0..n {
        for i in 0..m {
            logits(fs, fs.feature(k, i), tau, &mut z);
            total += neg_log_softmax(&z, k);
        }
    }
    Ok(total / (n * m) as f64)
}

/// Self-dual loss of the block code with the given tuple.
///
/// Evaluates `(1/n) Σ (d_i+1) log(n − d_i − 1 + e^{1/τ} + d_i e^{−1/(τ d_i)}) − 1/τ`
/// as `(1/n) Σ (d_i+1) log1p((n − d_i − 1 + d_i e^{−β/d_i}) e^{−β})`, which is
/// the same number since `Σ (d_i + 1) = n`.
pub fn ce_selfdual_closed(tuple: &DimensionTuple, n: usize, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if tuple.points() != n {
        return Err(Error::Argument(format!(
            "tuple {tuple} describes {} points, not n = {n}",
            tuple.points()
        )));
    }
    let beta = 1.0 / tau;
    let nf = n as f64;
    let total: f64 = tuple
        .parts()
        .iter()
        .map(|&di| {
            let x = di as f64;
            let inner = (nf - x - 1.0 + x * (-beta / x).exp()) * (-beta).exp();
            (x + 1.0) * inner.ln_1p()
        })
        .sum();
    Ok(total / nf)
}

/// Sign convention of the hardmax maximand.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HardmaxConvention {
    /// `⟨w_k − w_{k'}, h_{k,i}⟩`
    Printed,
    /// `⟨w_{k'} − w_k, h_{k,i}⟩`
    #[default]
    Negated,
}

impl fmt::Display for HardmaxConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HardmaxConvention::Printed => "printed",
            HardmaxConvention::Negated => "negated",
        })
    }
}

impl FromStr for HardmaxConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "printed" => Ok(HardmaxConvention::Printed),
            "negated" => Ok(HardmaxConvention::Negated),
            _ => Err(Error::Argument(format!("unknown hardmax convention {s:?}"))),
        }
    }
}

/// `max_{k,i,k'≠k}` of the convention's maximand.
pub fn hardmax_loss(fs: &FeatureSet, convention: HardmaxConvention) -> Result<f64> {
    let n = fs.n();
    if n < 2 {
        return Err(Error::Argument("hardmax loss needs at least two classes".into()));
    }
    let sign = match convention {
        HardmaxConvention::Printed => 1.0,
        HardmaxConvention::Negated => -1.0,
    };
    let mut best = f64::NEG_INFINITY;
    for k in 0..n {
        let wk = fs.weights().row(k);
        for i in 0..fs.m() {
            let h = fs.feature(k, i);
            let own = dot(wk, h);
            for kp in (0..n).filter(|&kp| kp != k) {
                let other = dot(fs.weights().row(kp), h);
                best = best.max(sign * (own - other));
            }
        }
    }
    Ok(best)
}

/// `L_{τ,c}(X) = Σ_k log(c + Σ_{j≠k} exp(⟨x_j, x_k⟩/τ))`.
pub fn l_tau_c(x: &SphericalConfig, tau: f64, c: f64) -> Result<f64> {
    let params = LossParams::new(tau, c)?;
    let n = x.n();
    if n < 2 {
        return Err(Error::Argument("L_{tau,c} needs at least two points".into()));
    }
    let log_c = params.c.ln();
    let mut total = 0.0;
    let mut z = Vec::with_capacity(n);
    for k in 0..n {
        z.clear();
        z.extend((0..n).filter(|&j| j != k).map(|j| dot(x.row(j), x.row(k)) / params.tau));
        let top = z.iter().copied().fold(log_c, f64::max);
        let s: f64 = (log_c - top).exp() + z.iter().map(|&v| (v - top).exp()).sum::<f64>();
        total += top + s.ln();
    }
    Ok(total)
}

/// The pieces of `f_{n,τ}` at `x`, with `g(x) = n − x − 1 + e^β + x e^{−β/x}`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FParts {
    pub beta: f64,
    /// `u = β / x`
    pub u: f64,
    /// `log g(x)`; `g` itself overflows for small `τ`.
    pub log_g: f64,
    /// `g'(x) = −1 + (1 + u) e^{−u}`
    pub g1: f64,
    /// `g''(x) = u² e^{−u} / x`
    pub g2: f64,
    /// `Q = (x+1) g'' + 2 g' − (x+1) g'² / g`, so that `f'' = Q / g`.
    pub q: f64,
    /// `1 / g(x)`
    pub inv_g: f64,
}

fn check_f_args(n: usize, tau: f64, x: f64) -> Result<()> {
    check_tau(tau)?;
    if n < 3 {
        return Err(Error::Argument(format!("f_(n,tau) needs n >= 3, got {n}")));
    }
    if !(1.0..=(n as f64 - 1.0)).contains(&x) {
        return Err(Error::Domain(format!("x = {x} outside [1, {}]", n - 1)));
    }
    Ok(())
}

pub fn f_parts(n: usize, tau: f64, x: f64) -> Result<FParts> {
    check_f_args(n, tau, x)?;
    let nf = n as f64;
    let beta = 1.0 / tau;
    let u = beta / x;
    let eu = (-u).exp();
    // g = e^β (1 + r), r = (n − x − 1 + x e^{−u}) e^{−β}
    let r = (nf - x - 1.0 + x * eu) * (-beta).exp();
    let log_g = beta + r.ln_1p();
    let inv_g = (-beta).exp() / (1.0 + r);
    let g1 = (-u).exp_m1() + u * eu;
    let g2 = u * u * eu / x;
    let q = (x + 1.0) * g2 + 2.0 * g1 - (x + 1.0) * g1 * g1 * inv_g;
    Ok(FParts { beta, u, log_g, g1, g2, q, inv_g })
}

/// `f_{n,τ}(x) = (x+1) log(n − x − 1 + e^{1/τ} + x e^{−1/(τx)})`.
pub fn f_eval(n: usize, tau: f64, x: f64) -> Result<f64> {
    let p = f_parts(n, tau, x)?;
    Ok((x + 1.0) * p.log_g)
}

/// `f'(x) = log g + (x+1) g'/g`.
pub fn f_d1(n: usize, tau: f64, x: f64) -> Result<f64> {
    let p = f_parts(n, tau, x)?;
    Ok(p.log_g + (x + 1.0) * p.g1 * p.inv_g)
}

/// `f''(x) = ((x+1) g'' + 2 g' − (x+1) g'²/g) / g`.
pub fn f_d2(n: usize, tau: f64, x: f64) -> Result<f64> {
    let p = f_parts(n, tau, x)?;
    Ok(p.q * p.inv_g)
}

/// Euclidean and sphere-tangent gradients of [`ce_loss`].
#[derive(Clone, Debug, Serialize)]
pub struct GradientPair {
    /// `n × d`, row-major.
    pub d_weights: Vec<f64>,
    /// `n × m × d`, row-major.
    pub d_features: Vec<f64>,
    pub riemannian_weights: Vec<f64>,
    pub riemannian_features: Vec<f64>,
}

impl GradientPair {
    /// Norm of the full Riemannian gradient.
    pub fn riemannian_norm(&self) -> f64 {
        self.riemannian_weights
            .iter()
            .chain(&self.riemannian_features)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Removes from each `d`-block of `grad` its component along the matching
/// unit vector in `base`.
pub fn project_tangent(base: &[f64], grad: &[f64], d: usize) -> Vec<f64> {
    let mut out = grad.to_vec();
    for (g, x) in out.chunks_mut(d).zip(base.chunks(d)) {
        let c = dot(g, x);
        g.iter_mut().zip(x).for_each(|(gi, xi)| *gi -= c * xi);
    }
    out
}

pub fn ce_gradient(fs: &FeatureSet, tau: f64) -> Result<GradientPair> {
    check_ce_tau(tau)?;
    let (n, m, d) = (fs.n(), fs.m(), fs.d());
    let scale = 1.0 / (tau * (n * m) as f64);
    let mut d_weights = vec![0.0; n * d];
    let mut d_features = vec![0.0; n * m * d];
    let mut z = vec![0.0; n];
    let mut coef = vec![0.0; n];

    for k in 0..n {
        for i in 0..m {
            let h = fs.feature(k, i);
            logits(fs, h, tau, &mut z);
            let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = z.iter().map(|&v| (v - top).exp()).sum();
            for j in 0..n {
                coef[j] = (z[j] - top).exp() / total;
            }
            // p_k − 1 = −Σ_{j≠k} p_j, avoids cancellation when p_k ≈ 1
            coef[k] = -(0..n).filter(|&j| j != k).map(|j| coef[j]).sum::<f64>();

            let base = (k * m + i) * d;
            for (j, w) in fs.weights().rows().enumerate() {
                let cj = coef[j] * scale;
                for c in 0..d {
                    d_weights[j * d + c] += cj * h[c];
                    d_features[base + c] += cj * w[c];
                }
            }
        }
    }
    let riemannian_weights = project_tangent(fs.weights().as_flat(), &d_weights, d);
    let riemannian_features = project_tangent(fs.features_flat(), &d_features, d);
    Ok(GradientPair { d_weights, d_features, riemannian_weights, riemannian_features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{build_entropy_code, build_orthoplex_subset, build_simplex, EntropyKind};
    use std::f64::consts::E;

    fn self_dual(x: SphericalConfig) -> FeatureSet {
        FeatureSet::self_dual(x, 1).unwrap()
    }

    #[test]
    fn square_cross_entropy() {
        let want = (2.0 + E + 1.0 / E).ln() - 1.0;
        let sq = self_dual(build_orthoplex_subset(2, 4).unwrap());
        assert!((ce_loss(&sq, 1.0).unwrap() - want).abs() < 1e-12);
        let t = DimensionTuple::new(vec![1, 1]).unwrap();
        assert!((ce_selfdual_closed(&t, 4, 1.0).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn single_class_has_zero_loss() {
        let x = SphericalConfig::new(2, vec![vec![0.6, 0.8]]).unwrap();
        let fs = FeatureSet::self_dual(x, 3).unwrap();
        assert_eq!(ce_loss(&fs, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn cooler_square_has_lower_loss() {
        let sq = self_dual(build_orthoplex_subset(2, 4).unwrap());
        assert!(ce_loss(&sq, 0.25).unwrap() < ce_loss(&sq, 0.5).unwrap());
    }

    #[test]
    fn temperature_validation() {
        let sq = self_dual(build_orthoplex_subset(2, 4).unwrap());
        assert!(matches!(ce_loss(&sq, 0.0), Err(Error::Argument(_))));
        assert!(matches!(ce_loss(&sq, -1.0), Err(Error::Argument(_))));
        assert!(matches!(ce_loss(&sq, 1e-4), Err(Error::Argument(_))));
        assert!(ce_loss(&sq, 1e-3).unwrap().is_finite());
        assert!(LossParams::new(1.0, 0.0).is_err());
        assert_eq!(LossParams::new(0.25, 1.0).unwrap().beta(), 4.0);
    }

    #[test]
    fn closed_form_matches_direct_on_low_code() {
        let (x, t) = build_entropy_code(4, 6, EntropyKind::Low).unwrap();
        let direct = ce_loss(&self_dual(x), 0.1).unwrap();
        let closed = ce_selfdual_closed(&t, 6, 0.1).unwrap();
        assert!((direct - closed).abs() < 1e-10);
        assert!(ce_selfdual_closed(&t, 7, 0.1).is_err());
    }

    #[test]
    fn closed_form_single_simplex() {
        for tau in [0.2, 1.0, 5.0] {
            let t = DimensionTuple::new(vec![5]).unwrap();
            let want = f_eval(6, tau, 5.0).unwrap() / 6.0 - 1.0 / tau;
            assert!((ce_selfdual_closed(&t, 6, tau).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hardmax_conventions() {
        let sq = self_dual(build_orthoplex_subset(2, 4).unwrap());
        assert_eq!(hardmax_loss(&sq, HardmaxConvention::Negated).unwrap(), -1.0);
        assert_eq!(hardmax_loss(&sq, HardmaxConvention::Printed).unwrap(), 2.0);
        let pair = self_dual(build_simplex(2, 1).unwrap());
        assert_eq!(hardmax_loss(&pair, HardmaxConvention::default()).unwrap(), -2.0);
    }

    #[test]
    fn l_tau_c_closed_values() {
        let pair = build_simplex(2, 1).unwrap();
        let want = 2.0 * (1.0 + (-1.0f64).exp()).ln();
        assert!((l_tau_c(&pair, 1.0, 1.0).unwrap() - want).abs() < 1e-14);
        for (q, tau, c) in [(3, 0.5, 2.0), (5, 0.1, 1.0), (4, 3.0, 0.1)] {
            let x = build_simplex(q, q + 1).unwrap();
            let qf = q as f64;
            let want = qf * (c + (qf - 1.0) * (-1.0 / (tau * (qf - 1.0))).exp()).ln();
            assert!((l_tau_c(&x, tau, c).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn f_eval_value() {
        let want = 2.0 * (8.0 + E * E + (-2.0f64).exp()).ln();
        assert!((f_eval(10, 0.5, 1.0).unwrap() - want).abs() < 1e-12);
        assert!((want - 5.48482).abs() < 1e-5);
    }

    #[test]
    fn f_domain_checks() {
        assert!(matches!(f_eval(10, 0.5, 0.5), Err(Error::Domain(_))));
        assert!(matches!(f_d1(10, 0.5, 9.5), Err(Error::Domain(_))));
        assert!(matches!(f_d2(2, 0.5, 1.0), Err(Error::Argument(_))));
        assert!(matches!(f_d2(10, -0.5, 1.0), Err(Error::Argument(_))));
    }

    #[test]
    fn f_is_concave_at_low_temperature() {
        for i in 0..2048 {
            let x = 1.0 + 8.0 * i as f64 / 2047.0;
            assert!(f_d2(10, 0.3, x).unwrap() < 0.0, "x = {x}");
        }
    }

    #[test]
    fn f_parts_survive_tiny_temperature() {
        let p = f_parts(10, 1e-3, 2.0).unwrap();
        assert!(p.log_g.is_finite() && p.q.is_finite());
        assert!(p.q < 0.0);
        assert!((f_eval(10, 1e-3, 2.0).unwrap() - 3000.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_rows_are_tangent() {
        let fs = FeatureSet::random(3, 5, 2, 9).unwrap();
        let g = ce_gradient(&fs, 0.7).unwrap();
        for (r, w) in g.riemannian_weights.chunks(3).zip(fs.weights().rows()) {
            assert!(dot(r, w).abs() < 1e-12);
        }
        for (r, h) in g.riemannian_features.chunks(3).zip(fs.features_flat().chunks(3)) {
            assert!(dot(r, h).abs() < 1e-12);
        }
    }
}
