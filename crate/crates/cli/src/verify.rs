//! Built-in property suite behind `orthoplex verify`.

use std::time::Instant;

use orthoplex::loss::project_tangent;
use orthoplex::temperature::enumerate_tuples;
use orthoplex::{
    build_block_code, build_entropy_code, build_orthoplex_subset, build_simplex, ce_gradient,
    ce_loss, ce_selfdual_closed, coherence, concavity_threshold, convexity_threshold,
    crossover_scan, f_d1, f_d2, f_eval, find_rattlers, hull_distance, l_tau_c, margin,
    optimal_tuple, radon_partition, random_config, DimensionTuple, EntropyKind, FeatureSet,
    SphericalConfig,
};
use orthoplex_oracles::{fd_gradient, hull_distance_oracle, tuple_argmin_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Check = fn(bool) -> Result<(bool, String), String>;

const CHECKS: &[(&str, Check)] = &[
    ("zero_coherence_margin", zero_coherence_margin),
    ("random_margin_below_one", random_margin_below_one),
    ("closed_form_equivalence", closed_form_equivalence),
    ("simplex_minimality", simplex_minimality),
    ("hull_vs_oracle", hull_vs_oracle),
    ("tuple_vs_oracle", tuple_vs_oracle),
    ("gradient_fd", gradient_fd),
    ("rattler_free", rattler_free),
    ("tammes_planar", tammes_planar),
    ("radon_certificates", radon_certificates),
    ("ten_class_thresholds", ten_class_thresholds),
];

/// Runs every check, passing one JSON line per check (then a summary) to
/// `sink`. Returns whether all passed.
pub fn run_suite(quick: bool, sink: &mut dyn FnMut(Value)) -> bool {
    let mut passed = 0;
    for (name, check) in CHECKS {
        let t0 = Instant::now();
        let (pass, detail) = match check(quick) {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        passed += pass as usize;
        sink(json!({
            "check": name,
            "pass": pass,
            "detail": detail,
            "seconds": t0.elapsed().as_secs_f64(),
        }));
    }
    sink(json!({ "passed": passed, "total": CHECKS.len() }));
    passed == CHECKS.len()
}

fn e(err: orthoplex::Error) -> String {
    err.to_string()
}

fn regime_pairs(ds: std::ops::RangeInclusive<usize>) -> Vec<(usize, usize)> {
    ds.flat_map(|d| (d + 2..=2 * d).map(move |n| (d, n))).collect()
}

/// Every zero-coherence construction for `(d, n)`.
fn zero_coherence_codes(d: usize, n: usize) -> Result<Vec<(String, SphericalConfig)>, String> {
    let mut out = vec![(format!("orthoplex({d},{n})"), build_orthoplex_subset(d, n).map_err(e)?)];
    for t in enumerate_tuples(d, n - d).map_err(e)? {
        out.push((format!("block({t})"), build_block_code(&t).map_err(e)?));
    }
    Ok(out)
}

fn zero_coherence_margin(quick: bool) -> Result<(bool, String), String> {
    let hi = if quick { 5 } else { 8 };
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (d, n) in regime_pairs(2..=hi) {
        for (_, x) in zero_coherence_codes(d, n)? {
            worst = worst.max((margin(&x).map_err(e)?.margin - 1.0).abs());
            count += 1;
        }
    }
    Ok((worst <= 1e-8, format!("{count} codes, max |margin - 1| = {worst:.3e}")))
}

fn random_margin_below_one(quick: bool) -> Result<(bool, String), String> {
    let total = if quick { 100 } else { 1000 };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut tested, mut max_margin) = (0, f64::NEG_INFINITY);
    for seed in 0..total as u64 {
        let d = rng.random_range(2..=6);
        let n = rng.random_range(d + 2..=2 * d);
        let x = random_config(d, n, seed).map_err(e)?;
        if coherence(&x).map_err(e)? < 1e-3 {
            continue;
        }
        max_margin = max_margin.max(margin(&x).map_err(e)?.margin);
        tested += 1;
    }
    Ok((max_margin < 1.0, format!("{tested} configs, max margin = {max_margin:.6}")))
}

fn closed_form_equivalence(quick: bool) -> Result<(bool, String), String> {
    let hi = if quick { 5 } else { 8 };
    let mut worst: f64 = 0.0;
    for (d, n) in regime_pairs(2..=hi) {
        let mut tuples = enumerate_tuples(d, n - d).map_err(e)?;
        tuples.push(DimensionTuple::low_entropy(d, n).map_err(e)?);
        for t in tuples {
            let fs = FeatureSet::self_dual(build_block_code(&t).map_err(e)?, 1).map_err(e)?;
            for tau in [0.1, 0.3, 1.0, 3.0] {
                let a = ce_loss(&fs, tau).map_err(e)?;
                let b = ce_selfdual_closed(&t, n, tau).map_err(e)?;
                worst = worst.max((a - b).abs());
            }
        }
    }
    Ok((worst <= 1e-10, format!("max |ce - closed| = {worst:.3e}")))
}

fn simplex_minimality(quick: bool) -> Result<(bool, String), String> {
    let trials = if quick { 30 } else { 200 };
    let mut worst_formula: f64 = 0.0;
    let mut worst_beat = f64::NEG_INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for q in [3usize, 4, 5] {
        let d = q - 1;
        for (tau, c) in [(0.5, 1.0), (1.0, 0.5), (2.0, 2.0)] {
            let simplex = build_simplex(q, d).map_err(e)?;
            let value = l_tau_c(&simplex, tau, c).map_err(e)?;
            let qf = q as f64;
            let expected = qf * (c + (qf - 1.0) * (-1.0 / (tau * (qf - 1.0))).exp()).ln();
            worst_formula = worst_formula.max((value - expected).abs());
            for _ in 0..trials {
                let eps = 10f64.powf(rng.random_range(-3.0..0.0));
                let rows = simplex
                    .rows()
                    .map(|r| r.iter().map(|v| v + eps * rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let y = SphericalConfig::normalized(d, rows).map_err(e)?;
                worst_beat = worst_beat.max(value - l_tau_c(&y, tau, c).map_err(e)?);
            }
        }
    }
    Ok((
        worst_formula <= 1e-12 && worst_beat <= 1e-12,
        format!("formula dev {worst_formula:.3e}, max improvement {worst_beat:.3e}"),
    ))
}

fn hull_vs_oracle(quick: bool) -> Result<(bool, String), String> {
    let count = if quick { 10 } else { 40 };
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let dim = rng.random_range(2..=4);
        let k = rng.random_range(1..=4);
        let mut point = || -> Vec<f64> { (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let query = point();
        let gens: Vec<Vec<f64>> = (0..k).map(|_| point()).collect();
        let solver = hull_distance(&query, &gens).map_err(e)?.distance;
        let depth = if k <= 3 { 120 } else { 60 };
        let oracle = hull_distance_oracle(&query, &gens, depth).map_err(|x| x.to_string())?;
        worst = worst.max((solver - oracle).abs());
    }
    Ok((worst <= 1e-6, format!("{count} instances, max deviation {worst:.3e}")))
}

fn tuple_vs_oracle(quick: bool) -> Result<(bool, String), String> {
    let (hi, taus) = if quick { (7, 16) } else { (12, 64) };
    let mut mismatches = Vec::new();
    let mut count = 0;
    for (d, n) in regime_pairs(2..=hi) {
        for i in 0..taus {
            let tau = 10f64.powf(-1.5 + 2.5 * i as f64 / (taus - 1) as f64);
            let (t, _) = optimal_tuple(d, n, tau).map_err(e)?;
            let o = tuple_argmin_oracle(d, n, tau).map_err(|x| x.to_string())?;
            count += 1;
            if t.parts() != o.as_slice() {
                mismatches.push(format!("({d},{n},{tau:.4})"));
            }
        }
    }
    Ok((mismatches.is_empty(), format!("{count} cases, mismatches: {mismatches:?}")))
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

fn gradient_fd(_quick: bool) -> Result<(bool, String), String> {
    let (d, n, m, tau) = (4, 6, 2, 0.7);
    let fs = FeatureSet::random(d, n, m, 5).map_err(e)?;
    let g = ce_gradient(&fs, tau).map_err(e)?;
    let w0 = fs.weights().as_flat().to_vec();
    let h0 = fs.features_flat().to_vec();
    // loss is evaluated off the sphere here; the tangent parts must agree
    let loss_w = |w: &[f64]| {
        let weights = SphericalConfig::from_flat(d, n, w.to_vec(), f64::INFINITY).unwrap();
        ce_loss(&FeatureSet::with_tolerance(weights, m, h0.clone(), f64::INFINITY).unwrap(), tau).unwrap()
    };
    let loss_h = |h: &[f64]| {
        ce_loss(&FeatureSet::with_tolerance(fs.weights().clone(), m, h.to_vec(), f64::INFINITY).unwrap(), tau)
            .unwrap()
    };
    let fw = fd_gradient(loss_w, &w0, 1e-6).map_err(|x| x.to_string())?;
    let fh = fd_gradient(loss_h, &h0, 1e-6).map_err(|x| x.to_string())?;
    let ew = rel_err(&g.riemannian_weights, &project_tangent(&w0, &fw, d));
    let eh = rel_err(&g.riemannian_features, &project_tangent(&h0, &fh, d));

    let mut ef: f64 = 0.0;
    for x in [1.5, 3.0, 7.2] {
        let h = 1e-5;
        let fd1 = (f_eval(10, 0.45, x + h).map_err(e)? - f_eval(10, 0.45, x - h).map_err(e)?) / (2.0 * h);
        let fd2 = (f_d1(10, 0.45, x + h).map_err(e)? - f_d1(10, 0.45, x - h).map_err(e)?) / (2.0 * h);
        let d1 = f_d1(10, 0.45, x).map_err(e)?;
        let d2 = f_d2(10, 0.45, x).map_err(e)?;
        ef = ef.max(((fd1 - d1) / d1).abs()).max(((fd2 - d2) / d2).abs());
    }
    let worst = ew.max(eh).max(ef);
    Ok((worst <= 1e-5, format!("rel err W {ew:.2e}, H {eh:.2e}, f {ef:.2e}")))
}

fn rattler_free(quick: bool) -> Result<(bool, String), String> {
    let hi = if quick { 5 } else { 8 };
    let mut offenders = Vec::new();
    let mut count = 0;
    for (d, n) in regime_pairs(2..=hi) {
        let mut codes = zero_coherence_codes(d, n)?;
        for kind in [EntropyKind::Low, EntropyKind::High] {
            codes.push((format!("{kind:?}({d},{n})"), build_entropy_code(d, n, kind).map_err(e)?.0));
        }
        for (name, x) in codes {
            let r = find_rattlers(&x).map_err(e)?;
            count += 1;
            if !r.softmax.is_empty() || !r.tammes.is_empty() {
                offenders.push(name);
            }
        }
    }
    Ok((offenders.is_empty(), format!("{count} codes, with rattlers: {offenders:?}")))
}

fn tammes_planar(_quick: bool) -> Result<(bool, String), String> {
    let rows = [0.0f64, 90.0, 180.0, 300.0]
        .iter()
        .map(|a| vec![a.to_radians().cos(), a.to_radians().sin()])
        .collect();
    let x = SphericalConfig::with_tolerance(2, rows, 1e-12).map_err(e)?;
    let r = find_rattlers(&x).map_err(e)?;
    Ok((r.tammes == vec![1, 2], format!("tammes {:?}, softmax {:?}", r.tammes, r.softmax)))
}

fn radon_certificates(quick: bool) -> Result<(bool, String), String> {
    let total = if quick { 100 } else { 500 };
    let pairs = regime_pairs(2..=6);
    let mut worst: f64 = 0.0;
    for seed in 0..total {
        let (d, n) = pairs[seed % pairs.len()];
        let x = random_config(d, n, seed as u64).map_err(e)?;
        let p = radon_partition(&x).map_err(e)?;
        for side in [&p.side_a, &p.side_b] {
            let gens: Vec<&[f64]> = side.iter().map(|&i| x.row(i)).collect();
            worst = worst.max(hull_distance(&p.radon_point, &gens).map_err(e)?.distance);
        }
    }
    Ok((worst <= 1e-8, format!("{total} configs, max hull distance {worst:.3e}")))
}

fn ten_class_thresholds(_quick: bool) -> Result<(bool, String), String> {
    let conc = concavity_threshold(10, 1e-6).map_err(e)?;
    let conv = convexity_threshold(10, 1e-6).map_err(e)?;
    let d6 = crossover_scan(6, 10, 0.36, 0.61, 1e-6).map_err(e)?;
    let taus: Vec<f64> = d6.crossovers.iter().map(|c| c.tau).collect();
    let ok = (conc - 0.3916).abs() <= 5e-4
        && (conv - 0.5847).abs() <= 5e-4
        && taus.len() == 1
        && (taus[0] - 0.4968).abs() <= 5e-4;
    Ok((ok, format!("concavity {conc:.5}, convexity {conv:.5}, d=6 crossovers {taus:?}")))
}
