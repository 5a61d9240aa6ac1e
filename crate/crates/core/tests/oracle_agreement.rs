use orthoplex::loss::project_tangent;
use orthoplex::temperature::enumerate_tuples;
use orthoplex::{
    build_simplex, ce_gradient, ce_loss, ce_selfdual_closed, f_d1, f_d2, f_eval, hull_distance,
    optimal_tuple, random_config, FeatureSet, SphericalConfig,
};
use orthoplex_oracles::{
    block_loss_direct, fd_gradient, hull_distance_oracle, tangent_part, tuple_argmin_oracle, OracleReport,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn depth_for(k: usize) -> usize {
    match k {
        0..=3 => 200,
        4 => 100,
        _ => 40,
    }
}

fn check_hull(instance: &str, query: &[f64], gens: &[Vec<f64>]) -> OracleReport {
    let solver = hull_distance(query, gens).unwrap().distance;
    let oracle = hull_distance_oracle(query, gens, depth_for(gens.len())).unwrap();
    let r = OracleReport::new(instance, oracle, solver);
    assert!(r.abs_dev <= 1e-6, "{}", serde_json::to_string(&r).unwrap());
    r
}

#[test]
fn hull_examples_match_oracle() {
    let s = 3f64.sqrt() / 2.0;
    check_hull("triangle", &[1.0, 0.0], &[vec![-0.5, s], vec![-0.5, -s]]);
    check_hull("square", &[1.0, 0.0], &[vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
    check_hull("inside", &[0.1, 0.2], &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]]);
    let x = build_simplex(5, 4).unwrap();
    let gens: Vec<Vec<f64>> = (1..5).map(|i| x.row(i).to_vec()).collect();
    check_hull("simplex5", x.row(0), &gens);
}

#[test]
fn random_hulls_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for i in 0..40 {
        let dim = rng.random_range(2..=5);
        let k = if i < 4 { 5 } else { rng.random_range(1..=4) };
        let pts: Vec<Vec<f64>> =
            (0..=k).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        check_hull(&format!("random{i}"), &pts[0], &pts[1..]);
    }
}

#[test]
fn config_point_distances_match_oracle() {
    for seed in 0..6 {
        let x = random_config(3, 5, seed).unwrap();
        for j in 0..5 {
            let gens: Vec<Vec<f64>> = (0..5).filter(|&i| i != j).map(|i| x.row(i).to_vec()).collect();
            check_hull(&format!("config{seed}/{j}"), x.row(j), &gens);
        }
    }
}

#[test]
fn optimal_tuple_matches_oracle() {
    for d in 2..=12 {
        for n in d + 2..=2 * d {
            for i in 0..64 {
                let tau = 10f64.powf(-1.3 + 2.3 * i as f64 / 63.0);
                let (t, _) = optimal_tuple(d, n, tau).unwrap();
                let o = tuple_argmin_oracle(d, n, tau).unwrap();
                assert_eq!(t.parts(), o.as_slice(), "({d},{n}) at {tau}");
            }
        }
    }
}

#[test]
fn closed_form_matches_literal_formula() {
    for d in 2..=10 {
        for n in d + 2..=2 * d {
            for t in enumerate_tuples(d, n - d).unwrap() {
                for tau in [0.2, 0.5, 1.0, 4.0] {
                    let a = ce_selfdual_closed(&t, n, tau).unwrap();
                    let b = block_loss_direct(t.parts(), n, tau);
                    assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{t} at {tau}");
                }
            }
        }
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    diff / b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300)
}

#[test]
fn ce_gradient_matches_finite_differences() {
    for (d, n, m, tau, seed) in [(2, 4, 1, 0.5, 1), (3, 5, 2, 1.0, 2), (4, 6, 2, 0.3, 3), (5, 9, 3, 2.0, 4)] {
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
        assert!(rel(&g.d_weights, &fw) <= 1e-5);
        assert!(rel(&g.d_features, &fh) <= 1e-5);
        assert!(rel(&g.riemannian_weights, &tangent_part(&w0, &fw, d)) <= 1e-5);
        assert!(rel(&g.riemannian_features, &tangent_part(&h0, &fh, d)) <= 1e-5);
        assert_eq!(project_tangent(&w0, &g.d_weights, d), g.riemannian_weights);
    }
}

#[test]
fn f_derivatives_match_finite_differences() {
    for n in [5, 10, 16] {
        for tau in [0.2, 0.39, 0.5, 0.8, 2.0] {
            for i in 0..9 {
                let x = 1.2 + (n as f64 - 2.4) * i as f64 / 8.0;
                let d1 = fd_gradient(|v| f_eval(n, tau, v[0]).unwrap(), &[x], 1e-5).unwrap()[0];
                let d2 = fd_gradient(|v| f_d1(n, tau, v[0]).unwrap(), &[x], 1e-5).unwrap()[0];
                let a1 = f_d1(n, tau, x).unwrap();
                let a2 = f_d2(n, tau, x).unwrap();
                assert!((a1 - d1).abs() <= 1e-5 * a1.abs().max(1e-3), "f' n={n} tau={tau} x={x}");
                assert!((a2 - d2).abs() <= 1e-5 * a2.abs().max(1e-3), "f'' n={n} tau={tau} x={x}");
            }
        }
    }
}
