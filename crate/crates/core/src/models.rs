//! Black-box regressors to explain.
//!
//! Explainers only see the [`Predictor`] trait. The built-in models here are
//! small stand-ins; anything else plugs in through the trait (the `chilli`
//! crate adds a subprocess adapter).

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::linalg::{dot, SquareMatrix};
use crate::proximity::aggregate_distance;
use crate::schema::{Dataset, FeatureKind, FeatureSchema, Instance};

/// Batch prediction. Output order matches input order.
pub trait Predictor {
    fn predict_batch(&self, instances: &[Instance]) -> Result<Vec<f64>>;
}

impl<P: Predictor + ?Sized> Predictor for &P {
    fn predict_batch(&self, instances: &[Instance]) -> Result<Vec<f64>> {
        (**self).predict_batch(instances)
    }
}

fn check_width(instances: &[Instance], d: usize) -> Result<()> {
    match instances.iter().position(|x| x.len() != d) {
        Some(i) => Err(Error::InvalidData(format!(
            "instance {i} has {} values, model expects {d}",
            instances[i].len()
        ))),
        None => Ok(()),
    }
}

/// Mean target of the `k` nearest training instances under the contextual distance.
#[derive(Debug, Clone)]
pub struct KnnRegressor {
    schema: Vec<FeatureSchema>,
    instances: Vec<Instance>,
    targets: Vec<f64>,
    k: usize,
}

impl KnnRegressor {
    pub fn train(dataset: &Dataset, k: usize) -> Result<Self> {
        if k == 0 || k > dataset.len() {
            return Err(Error::InvalidParameter(format!(
                "k must be in 1..={}, got {k}",
                dataset.len()
            )));
        }
        Ok(KnnRegressor {
            schema: dataset.schema().to_vec(),
            instances: dataset.instances().to_vec(),
            targets: dataset.targets().to_vec(),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn predict_one(&self, q: &Instance, scratch: &mut Vec<(f64, usize)>) -> f64 {
        scratch.clear();
        scratch.extend(
            self.instances
                .iter()
                .enumerate()
                .map(|(i, x)| (aggregate_distance(q, x, &self.schema), i)),
        );
        let by_distance =
            |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < scratch.len() {
            scratch.select_nth_unstable_by(self.k - 1, by_distance);
        }
        scratch[..self.k]
            .iter()
            .map(|(_, i)| self.targets[*i])
            .sum::<f64>()
            / self.k as f64
    }
}

impl Predictor for KnnRegressor {
    fn predict_batch(&self, instances: &[Instance]) -> Result<Vec<f64>> {
        check_width(instances, self.schema.len())?;
        let mut scratch = Vec::with_capacity(self.instances.len());
        Ok(instances
            .iter()
            .map(|q| self.predict_one(q, &mut scratch))
            .collect())
    }
}

/// Kernel ridge regression with `k(u, v) = exp(-γ‖u - v‖²)`.
///
/// Inputs are embedded per feature: continuous values min-max normalized,
/// cyclic values on a circle of unit circumference, categoricals one-hot
/// scaled so two different categories are at unit distance.
#[derive(Debug, Clone)]
pub struct RbfRidgeRegressor {
    schema: Vec<FeatureSchema>,
    nodes: Vec<Vec<f64>>,
    dual: Vec<f64>,
    gamma: f64,
    alpha: f64,
}

impl RbfRidgeRegressor {
    pub fn train(dataset: &Dataset, gamma: f64, alpha: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be > 0, got {gamma}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be >= 0, got {alpha}"
            )));
        }
        let schema = dataset.schema().to_vec();
        let nodes: Vec<Vec<f64>> = dataset
            .instances()
            .iter()
            .map(|x| embed(x, &schema))
            .collect();
        let n = nodes.len();
        let mut gram = SquareMatrix::from_symmetric_fn(n, |i, j| {
            libm::exp(-gamma * squared_euclidean(&nodes[i], &nodes[j]))
        });
        for i in 0..n {
            gram.add(i, i, alpha);
        }
        let dual = gram.solve_spd(dataset.targets(), 1e-13).ok_or_else(|| {
            Error::Singular(if alpha == 0.0 {
                "kernel matrix is singular; use alpha > 0".to_string()
            } else {
                "regularized kernel matrix is numerically singular".to_string()
            })
        })?;
        Ok(RbfRidgeRegressor {
            schema,
            nodes,
            dual,
            gamma,
            alpha,
        })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dual_coefficients(&self) -> &[f64] {
        &self.dual
    }
}

impl Predictor for RbfRidgeRegressor {
    fn predict_batch(&self, instances: &[Instance]) -> Result<Vec<f64>> {
        check_width(instances, self.schema.len())?;
        let mut kernel_row = alloc::vec![0.0; self.nodes.len()];
        Ok(instances
            .iter()
            .map(|q| {
                let u = embed(q, &self.schema);
                for (k, node) in kernel_row.iter_mut().zip(&self.nodes) {
                    *k = libm::exp(-self.gamma * squared_euclidean(&u, node));
                }
                dot(&kernel_row, &self.dual)
            })
            .collect())
    }
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Feature embedding used by [`RbfRidgeRegressor`].
pub fn embed(x: &Instance, schema: &[FeatureSchema]) -> Vec<f64> {
    let mut out = Vec::with_capacity(schema.len() + 1);
    for (f, &v) in schema.iter().zip(&x.values) {
        match &f.kind {
            FeatureKind::Continuous { .. } => out.push(f.normalize(v)),
            FeatureKind::Cyclic { .. } => {
                let angle = 2.0 * PI * f.normalize(v);
                out.push(libm::cos(angle) / (2.0 * PI));
                out.push(libm::sin(angle) / (2.0 * PI));
            }
            FeatureKind::Categorical { categories } => {
                out.extend((0..categories.len()).map(|c| {
                    if c as f64 == v {
                        1.0 / SQRT_2
                    } else {
                        0.0
                    }
                }));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn points(xs: &[f64], ys: &[f64]) -> Dataset {
        let schema = vec![FeatureSchema::continuous("v", 0.0, 1.0).unwrap()];
        let instances = xs.iter().map(|v| Instance::new(vec![*v])).collect();
        Dataset::new(schema, instances, ys.to_vec()).unwrap()
    }

    #[test]
    fn knn_examples() {
        let ds = points(&[0.0, 0.5, 1.0], &[0.0, 1.0, 4.0]);
        let k1 = KnnRegressor::train(&ds, 1).unwrap();
        assert_eq!(
            k1.predict_batch(ds.instances()).unwrap(),
            vec![0.0, 1.0, 4.0]
        );
        let k2 = KnnRegressor::train(&ds, 2).unwrap();
        assert_eq!(
            k2.predict_batch(&[Instance::new(vec![0.1])]).unwrap(),
            vec![0.5]
        );
        let k3 = KnnRegressor::train(&ds, 3).unwrap();
        assert_eq!(
            k3.predict_batch(&[Instance::new(vec![0.9])]).unwrap(),
            vec![5.0 / 3.0]
        );
        assert!(KnnRegressor::train(&ds, 0).is_err());
        assert!(KnnRegressor::train(&ds, 4).is_err());
        assert!(k1.predict_batch(&[]).unwrap().is_empty());
    }

    #[test]
    fn rbf_interpolates_nodes_without_ridge() {
        let ds = points(&[0.0, 0.3, 0.7, 1.0], &[1.0, -2.0, 0.5, 3.0]);
        let m = RbfRidgeRegressor::train(&ds, 5.0, 0.0).unwrap();
        for (p, t) in m
            .predict_batch(ds.instances())
            .unwrap()
            .iter()
            .zip(ds.targets())
        {
            assert!((p - t).abs() < 1e-6);
        }
    }

    #[test]
    fn rbf_two_point_oracle() {
        let ds = points(&[0.0, 1.0], &[0.0, 2.0]);
        let m = RbfRidgeRegressor::train(&ds, 1.0, 0.1).unwrap();
        // Cramer's rule on [[1.1, k], [k, 1.1]] b = [0, 2] with k = e^-1.
        let k = libm::exp(-1.0);
        let det = 1.1 * 1.1 - k * k;
        let b0 = (0.0 * 1.1 - k * 2.0) / det;
        let b1 = (1.1 * 2.0 - k * 0.0) / det;
        let expected = b0 + k * b1;
        let got = m.predict_batch(&[Instance::new(vec![0.0])]).unwrap()[0];
        assert!((got - expected).abs() < 1e-8);
    }

    #[test]
    fn rbf_tiny_gamma_is_nearly_constant() {
        let ds = points(&[0.0, 0.3, 0.7, 1.0], &[1.0, -2.0, 0.5, 3.0]);
        let m = RbfRidgeRegressor::train(&ds, 1e-8, 1.0).unwrap();
        let p = m
            .predict_batch(&[
                Instance::new(vec![-3.0]),
                Instance::new(vec![0.5]),
                Instance::new(vec![4.0]),
            ])
            .unwrap();
        assert!((p[0] - p[1]).abs() < 1e-6 && (p[1] - p[2]).abs() < 1e-6);
    }

    #[test]
    fn rbf_singular_without_ridge() {
        let ds = points(&[0.5, 0.5], &[1.0, 2.0]);
        assert!(matches!(
            RbfRidgeRegressor::train(&ds, 1.0, 0.0),
            Err(Error::Singular(_))
        ));
        assert!(RbfRidgeRegressor::train(&ds, 0.0, 1.0).is_err());
    }

    #[test]
    fn cyclic_embedding_wraps() {
        let schema = vec![FeatureSchema::cyclic("h", 24.0).unwrap()];
        let a = embed(&Instance::new(vec![23.9]), &schema);
        let b = embed(&Instance::new(vec![0.1]), &schema);
        assert!(squared_euclidean(&a, &b) < 1e-4);
    }
}
