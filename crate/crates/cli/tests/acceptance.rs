//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::process::Command;
use std::time::Instant;

use orthoplex::optimizer::{best_run, optimize_seeds};
use orthoplex::temperature::enumerate_tuples;
use orthoplex::{
    build_block_code, build_entropy_code, build_orthoplex_subset, build_simplex, ce_gradient,
    ce_loss, ce_selfdual_closed, coherence, collapse_metrics, f_d1, f_d2, f_eval, find_rattlers,
    hull_distance, l_tau_c, margin, optimal_tuple, radon_partition, random_config, DimensionTuple,
    EntropyKind, FeatureSet, OptimizeOptions, SphericalConfig,
};
use orthoplex_oracles::{fd_gradient, hull_distance_oracle, tangent_part, tuple_argmin_oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn regime_pairs(lo: usize, hi: usize) -> Vec<(usize, usize)> {
    (lo..=hi).flat_map(|d| (d + 2..=2 * d).map(move |n| (d, n))).collect()
}

fn cli(args: &[&str]) -> Value {
    let out = Command::new(env!("CARGO_BIN_EXE_orthoplex")).args(args).output().expect("binary runs");
    assert!(out.status.success(), "orthoplex {args:?} failed: {}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

fn ten_class_reproduction() -> Outcome {
    let t0 = Instant::now();
    let th = cli(&["thresholds", "--n", "10"]);
    let conc = th["concavity"].as_f64().unwrap();
    let conv = th["convexity"].as_f64().unwrap();
    let mut ok = (conc - 0.3916).abs() <= 5e-4 && (conv - 0.5847).abs() <= 5e-4;
    let expected: [(usize, Vec<(f64, &str, &str)>); 3] = [
        (6, vec![(0.4968, "3+1+1+1", "2+2+1+1")]),
        (7, vec![(0.4713, "5+1+1", "3+3+1"), (0.4968, "3+3+1", "3+2+2")]),
        (8, vec![(0.4588, "7+1", "4+4")]),
    ];
    let mut found = Vec::new();
    for (d, want) in &expected {
        let ds = d.to_string();
        let r = cli(&["sweep", "--d", &ds, "--n", "10", "--tau-lo", "0.36", "--tau-hi", "0.61"]);
        let got = r["crossovers"].as_array().unwrap();
        ok &= got.len() == want.len();
        for (c, (tau, from, to)) in got.iter().zip(want) {
            let t = c["tau"].as_f64().unwrap();
            ok &= (t - tau).abs() <= 5e-4 && c["from"] == *from && c["to"] == *to;
            found.push(format!("d={d} {t:.4} {}->{}", c["from"].as_str().unwrap(), c["to"].as_str().unwrap()));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    outcome(ok, format!("concavity {conc:.4}, convexity {conv:.4}, {}; {secs:.2}s", found.join(", ")))
}

fn zero_coherence_codes(d: usize, n: usize) -> Vec<SphericalConfig> {
    let mut v = vec![
        build_orthoplex_subset(d, n).unwrap(),
        build_entropy_code(d, n, EntropyKind::Low).unwrap().0,
        build_entropy_code(d, n, EntropyKind::High).unwrap().0,
    ];
    v.extend(enumerate_tuples(d, n - d).unwrap().iter().map(|t| build_block_code(t).unwrap()));
    v
}

fn margin_dichotomy() -> Outcome {
    let mut worst_code: f64 = 0.0;
    let mut codes = 0;
    for (d, n) in regime_pairs(2, 8) {
        for x in zero_coherence_codes(d, n) {
            worst_code = worst_code.max((margin(&x).unwrap().margin - 1.0).abs());
            codes += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut accepted, mut seed, mut max_random) = (0, 0u64, f64::NEG_INFINITY);
    while accepted < 1000 {
        let d = rng.random_range(2..=8);
        let n = rng.random_range(d + 2..=2 * d);
        let x = random_config(d, n, seed).unwrap();
        seed += 1;
        if coherence(&x).unwrap() < 1e-3 {
            continue;
        }
        max_random = max_random.max(margin(&x).unwrap().margin);
        accepted += 1;
    }
    let ok = worst_code <= 1e-8 && max_random < 1.0 && max_random <= 1.0 + 1e-9;
    outcome(
        ok,
        format!("{codes} codes max |margin-1| {worst_code:.2e}; 1000 random max margin {max_random:.6}"),
    )
}

fn closed_form_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (d, n) in regime_pairs(2, 8) {
        let mut coded: Vec<(SphericalConfig, DimensionTuple)> = vec![
            build_entropy_code(d, n, EntropyKind::Low).unwrap(),
            build_entropy_code(d, n, EntropyKind::High).unwrap(),
        ];
        // the orthoplex selection is a block code only when it is the full cross-polytope
        if n == 2 * d {
            coded.push((build_orthoplex_subset(d, n).unwrap(), DimensionTuple::new(vec![1; d]).unwrap()));
        }
        for t in enumerate_tuples(d, n - d).unwrap() {
            coded.push((build_block_code(&t).unwrap(), t));
        }
        for (x, t) in coded {
            let fs = FeatureSet::self_dual(x, 1).unwrap();
            for tau in [0.1, 0.3, 1.0, 3.0] {
                let a = ce_loss(&fs, tau).unwrap();
                let b = ce_selfdual_closed(&t, n, tau).unwrap();
                worst = worst.max((a - b).abs());
                cases += 1;
            }
        }
    }
    outcome(worst <= 1e-10, format!("{cases} cases, max deviation {worst:.2e}"))
}

fn simplex_minimality() -> Outcome {
    let mut worst_formula: f64 = 0.0;
    let mut best_gain = f64::NEG_INFINITY;
    let mut cases = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for q in [3usize, 4, 5, 6] {
        let d = q - 1;
        let simplex = build_simplex(q, d).unwrap();
        for tau in [0.2, 0.5, 1.0, 2.0] {
            for c in [0.5, 1.0, 2.0] {
                cases += 1;
                let value = l_tau_c(&simplex, tau, c).unwrap();
                let qf = q as f64;
                let closed = qf * (c + (qf - 1.0) * (-1.0 / (tau * (qf - 1.0))).exp()).ln();
                worst_formula = worst_formula.max((value - closed).abs());
                for trial in 0..200 {
                    let y = if trial % 10 == 9 {
                        random_config(d, q, rng.random()).unwrap()
                    } else {
                        let eps = 10f64.powf(rng.random_range(-4.0..0.0));
                        let rows = simplex
                            .rows()
                            .map(|r| r.iter().map(|v| v + eps * rng.random_range(-1.0..1.0)).collect())
                            .collect();
                        SphericalConfig::normalized(d, rows).unwrap()
                    };
                    best_gain = best_gain.max(value - l_tau_c(&y, tau, c).unwrap());
                }
            }
        }
    }
    outcome(
        worst_formula <= 1e-12 && best_gain <= 1e-12,
        format!("{cases} cases x 200 perturbations; formula dev {worst_formula:.2e}, best improvement {best_gain:.2e}"),
    )
}

fn oracle_depth(k: usize) -> usize {
    match k {
        0..=3 => 200,
        4 => 100,
        _ => 40,
    }
}

fn solver_vs_oracle() -> Outcome {
    let mut instances: Vec<(Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
    let s = 3f64.sqrt() / 2.0;
    instances.push((vec![1.0, 0.0], vec![vec![-0.5, s], vec![-0.5, -s]]));
    instances.push((vec![1.0, 0.0], vec![vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]));
    instances.push((vec![0.6, 0.8], vec![vec![1.0, 0.0]]));
    let mut point_instances = |x: &SphericalConfig| {
        for j in 0..x.n() {
            let gens = (0..x.n()).filter(|&i| i != j).map(|i| x.row(i).to_vec()).collect();
            instances.push((x.row(j).to_vec(), gens));
        }
    };
    point_instances(&build_orthoplex_subset(2, 4).unwrap());
    point_instances(&build_orthoplex_subset(3, 5).unwrap());
    point_instances(&build_entropy_code(4, 6, EntropyKind::High).unwrap().0);
    for seed in 0..8 {
        point_instances(&random_config(2 + seed as usize % 3, 4 + seed as usize % 3, seed).unwrap());
    }
    let mut worst: f64 = 0.0;
    for (q, gens) in &instances {
        let a = hull_distance(q, gens).unwrap().distance;
        let b = hull_distance_oracle(q, gens, oracle_depth(gens.len())).unwrap();
        worst = worst.max((a - b).abs());
    }

    let mut mismatches = 0;
    let mut tuple_cases = 0;
    for (d, n) in regime_pairs(2, 12) {
        for i in 0..64 {
            let tau = 10f64.powf(-1.3 + 2.3 * i as f64 / 63.0);
            let (t, _) = optimal_tuple(d, n, tau).unwrap();
            tuple_cases += 1;
            if t.parts() != tuple_argmin_oracle(d, n, tau).unwrap().as_slice() {
                mismatches += 1;
            }
        }
    }
    outcome(
        worst <= 1e-6 && mismatches == 0,
        format!(
            "{} hull instances max dev {worst:.2e}; {tuple_cases} tuple cases, {mismatches} mismatches",
            instances.len()
        ),
    )
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

fn gradient_correctness() -> Outcome {
    let mut worst: f64 = 0.0;
    for (d, n, m, tau, seed) in [(2, 4, 1, 0.5, 1u64), (3, 5, 2, 1.0, 2), (4, 6, 2, 0.3, 3), (6, 10, 1, 0.45, 4)] {
        let fs = FeatureSet::random(d, n, m, seed).unwrap();
        let g = ce_gradient(&fs, tau).unwrap();
        let w0 = fs.weights().as_flat().to_vec();
        let h0 = fs.features_flat().to_vec();
        let loss_w = |w: &[f64]| {
            let weights = SphericalConfig::from_flat(d, n, w.to_vec(), f64::INFINITY).unwrap();
            ce_loss(&FeatureSet::with_tolerance(weights, m, h0.clone(), f64::INFINITY).unwrap(), tau).unwrap()
        };
        let loss_h = |h: &[f64]| {
            let fs2 = FeatureSet::with_tolerance(fs.weights().clone(), m, h.to_vec(), f64::INFINITY).unwrap();
            ce_loss(&fs2, tau).unwrap()
        };
        let fw = fd_gradient(loss_w, &w0, 1e-6).unwrap();
        let fh = fd_gradient(loss_h, &h0, 1e-6).unwrap();
        worst = worst
            .max(rel(&g.d_weights, &fw))
            .max(rel(&g.d_features, &fh))
            .max(rel(&g.riemannian_weights, &tangent_part(&w0, &fw, d)))
            .max(rel(&g.riemannian_features, &tangent_part(&h0, &fh, d)));
    }
    let mut worst_f: f64 = 0.0;
    for n in [5, 10, 16] {
        for tau in [0.2, 0.39, 0.5, 0.8, 2.0] {
            for i in 0..9 {
                let x = 1.2 + (n as f64 - 2.4) * i as f64 / 8.0;
                let d1 = fd_gradient(|v| f_eval(n, tau, v[0]).unwrap(), &[x], 1e-5).unwrap()[0];
                let d2 = fd_gradient(|v| f_d1(n, tau, v[0]).unwrap(), &[x], 1e-5).unwrap()[0];
                let a1 = f_d1(n, tau, x).unwrap();
                let a2 = f_d2(n, tau, x).unwrap();
                worst_f = worst_f.max((a1 - d1).abs() / a1.abs()).max((a2 - d2).abs() / a2.abs());
            }
        }
    }
    outcome(
        worst <= 1e-5 && worst_f <= 1e-5,
        format!("ce_gradient rel err {worst:.2e}; f', f'' rel err {worst_f:.2e}"),
    )
}

fn rattler_freeness() -> Outcome {
    let mut codes = 0;
    let mut dirty = 0;
    for (d, n) in regime_pairs(2, 8) {
        for x in zero_coherence_codes(d, n) {
            let r = find_rattlers(&x).unwrap();
            codes += 1;
            dirty += usize::from(!r.softmax.is_empty() || !r.tammes.is_empty());
        }
    }
    let rows = [0.0f64, 90.0, 180.0, 300.0]
        .iter()
        .map(|a| vec![a.to_radians().cos(), a.to_radians().sin()])
        .collect();
    let planar = find_rattlers(&SphericalConfig::new(2, rows).unwrap()).unwrap();
    outcome(
        dirty == 0 && planar.tammes == vec![1, 2],
        format!("{codes} codes, {dirty} with rattlers; planar Tammes rattlers {:?}", planar.tammes),
    )
}

fn radon_certificates() -> Outcome {
    let pairs = regime_pairs(2, 6);
    let mut worst: f64 = 0.0;
    for seed in 0..500u64 {
        let (d, n) = pairs[seed as usize % pairs.len()];
        let x = random_config(d, n, seed).unwrap();
        let p = radon_partition(&x).unwrap();
        for side in [&p.side_a, &p.side_b] {
            let gens: Vec<&[f64]> = side.iter().map(|&i| x.row(i)).collect();
            worst = worst.max(hull_distance(&p.radon_point, &gens).unwrap().distance);
        }
    }
    outcome(worst <= 1e-8, format!("500 configs, max hull distance {worst:.2e}"))
}

fn self_duality_and_entropy() -> Outcome {
    let t0 = Instant::now();
    let (d, n, m) = (4, 6, 2);
    let seeds: Vec<u64> = (0..20).collect();
    let run = |tau: f64| {
        let mut opts = OptimizeOptions::new(tau);
        opts.max_iters = 10_000;
        opts.grad_tol = 1e-14;
        let states = optimize_seeds(d, n, m, &seeds, &opts).unwrap();
        let best = best_run(&states).unwrap();
        let low = DimensionTuple::low_entropy(d, n).unwrap();
        (states[best].loss, collapse_metrics(&states[best], &low).unwrap())
    };
    let (cold_loss, cold) = run(0.05);
    let (_, hot) = run(2.0);

    let a = FeatureSet::self_dual(build_block_code(&DimensionTuple::new(vec![3, 1, 1, 1]).unwrap()).unwrap(), 1)
        .unwrap();
    let b = FeatureSet::self_dual(build_block_code(&DimensionTuple::new(vec![2, 2, 1, 1]).unwrap()).unwrap(), 1)
        .unwrap();
    let diff = |tau: f64| ce_loss(&a, tau).unwrap() - ce_loss(&b, tau).unwrap();
    let flips = diff(0.4968 - 5e-4) < 0.0 && diff(0.4968 + 5e-4) > 0.0;
    let low_loss = ce_selfdual_closed(&DimensionTuple::low_entropy(d, n).unwrap(), n, 0.05).unwrap();

    let secs = t0.elapsed().as_secs_f64();
    let ok = cold.duality_gap < 0.05
        && cold.gram_error_low < 0.05
        && hot.gram_error_high < 0.05
        && flips
        && secs < 120.0;
    outcome(
        ok,
        format!(
            "tau=0.05: duality_gap {:.2e}, gram_error_low {:.3} (best loss {cold_loss:.4e} vs low code {low_loss:.4e}); \
             tau=2: gram_error_high {:.2e}; sign flip {flips}; {secs:.1}s",
            cold.duality_gap, cold.gram_error_low, hot.gram_error_high
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("ten-class thresholds and crossovers", ten_class_reproduction),
        ("margin dichotomy", margin_dichotomy),
        ("closed-form equivalence", closed_form_equivalence),
        ("simplex minimality", simplex_minimality),
        ("solver vs oracle", solver_vs_oracle),
        ("gradient correctness", gradient_correctness),
        ("rattler-freeness", rattler_freeness),
        ("radon certificates", radon_certificates),
        ("self-duality and entropy selection", self_duality_and_entropy),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
