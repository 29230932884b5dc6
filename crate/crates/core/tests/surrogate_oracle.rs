#![allow(clippy::needless_range_loop)]

use chilli_core::perturbation::{Method, PerturbationSet};
use chilli_core::proximity::ProximityConfig;
use chilli_core::surrogate::{fit_weighted_linear, select_best, weighted_rmse};
use chilli_core::{FeatureSchema, Instance};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_schema(d: usize) -> Vec<FeatureSchema> {
    (0..d)
        .map(|i| FeatureSchema::continuous(format!("f{i}"), 0.0, 1.0).unwrap())
        .collect()
}

fn make_set(xs: Vec<Vec<f64>>, ys: Vec<f64>, ws: Vec<f64>) -> PerturbationSet {
    PerturbationSet {
        origin: Instance::new(xs[0].clone()),
        perturbations: xs.into_iter().map(Instance::new).collect(),
        predictions: ys,
        weights: ws,
        method: Method::Chilli,
        seed: 0,
        proximity: ProximityConfig::contextual(0.1).unwrap(),
    }
}

fn random_problem(seed: u64) -> (PerturbationSet, usize) {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let d = r.random_range(1..=3);
    let n = r.random_range(d + 2..=50);
    let beta: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
    let xs: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random::<f64>()).collect())
        .collect();
    let ys = xs
        .iter()
        .map(|x| {
            0.7 + x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + r.random_range(-0.2..0.2)
        })
        .collect();
    let ws = (0..n).map(|_| r.random_range(0.05..1.0)).collect();
    (make_set(xs, ys, ws), d)
}

/// Uncentred augmented normal equations `(XᵀWX + Λ) θ = XᵀWy`, intercept first,
/// solved by Gaussian elimination with partial pivoting.
fn oracle(set: &PerturbationSet, lambda: f64) -> Vec<f64> {
    let d = set.perturbations[0].values.len();
    let m = d + 1;
    let mut a = vec![vec![0.0; m + 1]; m];
    for ((z, y), w) in set
        .perturbations
        .iter()
        .zip(&set.predictions)
        .zip(&set.weights)
    {
        let row: Vec<f64> = std::iter::once(1.0)
            .chain(z.values.iter().copied())
            .collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += w * row[i] * row[j];
            }
            a[i][m] += w * row[i] * y;
        }
    }
    for (i, r) in a.iter_mut().enumerate().skip(1) {
        r[i] += lambda;
    }
    for col in 0..m {
        let p = (col..m)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, p);
        for i in col + 1..m {
            let f = a[i][col] / a[col][col];
            for j in col..=m {
                a[i][j] -= f * a[col][j];
            }
        }
    }
    let mut theta = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|j| a[i][j] * theta[j]).sum();
        theta[i] = (a[i][m] - s) / a[i][i];
    }
    theta
}

/// Nesterov-accelerated gradient descent on the same weighted objective,
/// with the quadratic's Hessian and linear term accumulated once.
fn gradient_descent(set: &PerturbationSet, lambda: f64) -> Vec<f64> {
    let m = set.perturbations[0].values.len() + 1;
    let mut h = vec![vec![0.0; m]; m];
    let mut b = vec![0.0; m];
    for ((z, y), w) in set
        .perturbations
        .iter()
        .zip(&set.predictions)
        .zip(&set.weights)
    {
        let row: Vec<f64> = std::iter::once(1.0)
            .chain(z.values.iter().copied())
            .collect();
        for i in 0..m {
            for j in 0..m {
                h[i][j] += w * row[i] * row[j];
            }
            b[i] += w * row[i] * y;
        }
    }
    for (i, r) in h.iter_mut().enumerate().skip(1) {
        r[i] += lambda;
    }
    let lipschitz: f64 = (0..m).map(|i| h[i][i]).sum();
    let step = 1.0 / lipschitz;
    let (mut theta, mut prev) = (vec![0.0; m], vec![0.0; m]);
    for k in 0..5_000_000usize {
        let mom = k as f64 / (k as f64 + 3.0);
        let look: Vec<f64> = (0..m)
            .map(|i| theta[i] + mom * (theta[i] - prev[i]))
            .collect();
        let grad: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| h[i][j] * look[j]).sum::<f64>() - b[i])
            .collect();
        prev = theta;
        theta = (0..m).map(|i| look[i] - step * grad[i]).collect();
        if grad.iter().all(|g| g.abs() < 1e-13 * lipschitz) {
            break;
        }
    }
    theta
}

#[test]
fn matches_gradient_descent_oracle() {
    for trial in 0..20 {
        let (set, d) = random_problem(500 + trial);
        for lambda in [0.0, 1e-2] {
            let g = fit_weighted_linear(&set, lambda, &unit_schema(d)).unwrap();
            let theta = gradient_descent(&set, lambda);
            assert!((g.intercept - theta[0]).abs() < 1e-4, "trial {trial}");
            for (c, t) in g.coefficients.iter().zip(&theta[1..]) {
                assert!((c - t).abs() < 1e-4, "trial {trial} λ {lambda}: {c} vs {t}");
            }
        }
    }
}

#[test]
fn recovers_exact_line() {
    let xs: Vec<Vec<f64>> = (0..11).map(|i| vec![i as f64 / 10.0]).collect();
    let ys = xs.iter().map(|x| 2.0 * x[0] + 3.0).collect();
    let set = make_set(xs, ys, vec![1.0; 11]);
    let g = fit_weighted_linear(&set, 0.0, &unit_schema(1)).unwrap();
    assert!((g.coefficients[0] - 2.0).abs() < 1e-6);
    assert!((g.intercept - 3.0).abs() < 1e-6);
}

#[test]
fn matches_normal_equation_oracle() {
    for trial in 0..20 {
        let (set, d) = random_problem(trial);
        for lambda in [0.0, 1e-3, 0.5] {
            let g = fit_weighted_linear(&set, lambda, &unit_schema(d)).unwrap();
            let theta = oracle(&set, lambda);
            assert!((g.intercept - theta[0]).abs() < 1e-8, "trial {trial}");
            for (c, t) in g.coefficients.iter().zip(&theta[1..]) {
                assert!((c - t).abs() < 1e-8, "trial {trial} λ {lambda}: {c} vs {t}");
            }
        }
    }
}

#[test]
fn ols_residuals_are_weight_orthogonal() {
    for trial in 0..20 {
        let (set, d) = random_problem(100 + trial);
        let schema = unit_schema(d);
        let g = fit_weighted_linear(&set, 0.0, &schema).unwrap();
        let mut grad = vec![0.0; d + 1];
        for ((z, y), w) in set
            .perturbations
            .iter()
            .zip(&set.predictions)
            .zip(&set.weights)
        {
            let r = y - g.predict(z, &schema);
            grad[0] += w * r;
            for (k, v) in z.values.iter().enumerate() {
                grad[k + 1] += w * r * v;
            }
        }
        assert!(
            grad.iter().all(|v| v.abs() < 1e-6),
            "trial {trial}: {grad:?}"
        );
    }
}

#[test]
fn ridge_shrinks_monotonically() {
    let (set, d) = random_problem(7);
    let schema = unit_schema(d);
    let norms: Vec<f64> = [0.0, 1e-3, 1e-2, 1e-1, 1.0, 10.0]
        .iter()
        .map(|l| {
            let g = fit_weighted_linear(&set, *l, &schema).unwrap();
            g.coefficients.iter().map(|c| c * c).sum::<f64>()
        })
        .collect();
    assert!(norms.windows(2).all(|w| w[1] <= w[0]), "{norms:?}");
}

#[test]
fn weight_scaling_with_lambda_is_invariant() {
    let (set, d) = random_problem(3);
    let schema = unit_schema(d);
    let g = fit_weighted_linear(&set, 0.01, &schema).unwrap();
    let mut scaled = set.clone();
    for w in &mut scaled.weights {
        *w *= 1e-6;
    }
    let h = fit_weighted_linear(&scaled, 0.01 * 1e-6, &schema).unwrap();
    for (a, b) in g.coefficients.iter().zip(&h.coefficients) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn duplicate_grid_entries_are_harmless() {
    let (set, d) = random_problem(11);
    let schema = unit_schema(d);
    let a = select_best(&set, &[0.0, 1e-2, 1e-2, 0.0], &schema).unwrap();
    let b = select_best(&set, &[1e-2, 0.0], &schema).unwrap();
    assert_eq!(a, b);
    assert!(
        weighted_rmse(&a, &set, &schema)
            <= weighted_rmse(
                &fit_weighted_linear(&set, 1e-2, &schema).unwrap(),
                &set,
                &schema
            )
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_ignores_row_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        let (set, d) = random_problem(seed);
        let schema = unit_schema(d);
        let mut order: Vec<usize> = (0..set.len()).collect();
        let mut r = ChaCha8Rng::seed_from_u64(shuffle);
        for i in (1..order.len()).rev() {
            order.swap(i, r.random_range(0..=i));
        }
        let mut permuted = set.clone();
        permuted.perturbations = order.iter().map(|&i| set.perturbations[i].clone()).collect();
        permuted.predictions = order.iter().map(|&i| set.predictions[i]).collect();
        permuted.weights = order.iter().map(|&i| set.weights[i]).collect();
        let a = fit_weighted_linear(&set, 1e-3, &schema).unwrap();
        let b = fit_weighted_linear(&permuted, 1e-3, &schema).unwrap();
        prop_assert_eq!(a.intercept.to_bits(), b.intercept.to_bits());
        prop_assert!(a.coefficients.iter().zip(&b.coefficients).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
