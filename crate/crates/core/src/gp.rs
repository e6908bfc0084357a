//! Exact Gaussian-process regression with a zero prior mean.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{arg_err, Error, Result};
use crate::kernels::{kernel_matrix, kernel_vector, KernelSpec};

/// Jitter levels tried after the plain factorization fails, relative to the
/// mean diagonal of `K + noise * I`.
const JITTER_LEVELS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Smallest accepted squared pivot relative to the largest diagonal entry.
const PIVOT_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `(mean - beta * std, mean + beta * std)`.
    pub fn bounds(&self, beta: f64) -> (f64, f64) {
        let half = beta * self.std();
        (self.mean - half, self.mean + half)
    }
}

/// A fitted GP surrogate. Immutable after [`GpModel::fit`].
#[derive(Debug, Clone)]
pub struct GpModel {
    train_x: Vec<Vec<f64>>,
    train_y: DVector<f64>,
    spec: KernelSpec,
    noise_variance: f64,
    jitter: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

impl GpModel {
    /// Factorizes `K + noise_variance * I`, escalating diagonal jitter if the
    /// matrix is numerically singular.
    pub fn fit(data: &Dataset, spec: &KernelSpec, noise_variance: f64) -> Result<GpModel> {
        if data.is_empty() {
            return arg_err("cannot fit a GP to an empty dataset");
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return arg_err("noise variance must be nonnegative");
        }
        if data.dim() != spec.dim() {
            return arg_err(format!(
                "dataset dimension {} does not match kernel dimension {}",
                data.dim(),
                spec.dim()
            ));
        }
        let n = data.len();
        let mut k = kernel_matrix(data.xs(), spec);
        for i in 0..n {
            k[(i, i)] += noise_variance;
        }
        let scale = k.diagonal().mean().max(f64::MIN_POSITIVE);

        let mut jitter = 0.0;
        let mut chol = try_cholesky(k.clone());
        let mut tried = Vec::new();
        for level in JITTER_LEVELS {
            if chol.is_some() {
                break;
            }
            jitter = level * scale;
            tried.push(jitter);
            let mut kj = k.clone();
            for i in 0..n {
                kj[(i, i)] += jitter;
            }
            chol = try_cholesky(kj);
        }
        let chol = chol.ok_or_else(|| {
            Error::Numerical(format!(
                "covariance matrix not positive definite after jitter {tried:?}"
            ))
        })?;

        let train_y = DVector::from_column_slice(data.ys());
        let alpha = chol.solve(&train_y);
        Ok(GpModel {
            train_x: data.xs().to_vec(),
            train_y,
            spec: spec.clone(),
            noise_variance,
            jitter,
            chol,
            alpha,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let kx = kernel_vector(&self.train_x, x, &self.spec);
        let mean = kx.dot(&self.alpha);
        let v = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&kx)
            .expect("cholesky factor has a nonzero diagonal");
        let prior = self.spec.eval(x, x);
        Prediction {
            mean,
            variance: (prior - v.norm_squared()).max(0.0),
        }
    }

    /// Predictions for many points; parallel over points, order preserved.
    pub fn predict_many(&self, xs: &[Vec<f64>]) -> Vec<Prediction> {
        xs.par_iter().map(|x| self.predict(x)).collect()
    }

    pub fn confidence_bounds(&self, x: &[f64], beta: f64) -> (f64, f64) {
        self.predict(x).bounds(beta)
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Diagonal jitter that was needed for the factorization (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.train_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_x.is_empty()
    }

    pub fn train_y(&self) -> &DVector<f64> {
        &self.train_y
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower-triangular factor `L` with `L L^T = K + (noise + jitter) I`.
    pub fn chol_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}

fn try_cholesky(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let max_diag = m.diagonal().max();
    let chol = Cholesky::new(m)?;
    let l = chol.l_dirty();
    let min_pivot = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
    (min_pivot > PIVOT_FLOOR * max_diag).then_some(chol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::BaseKernelParams;
    use crate::sampling::RngStream;
    use rand::Rng;

    fn spec(dim: usize) -> KernelSpec {
        KernelSpec::full(BaseKernelParams::uniform(dim, 0.3, 1.0).unwrap(), vec![1, 2]).unwrap()
    }

    fn random_data(n: usize, dim: usize, seed: u64) -> Dataset {
        let mut rng = RngStream::new(seed, 77).rng();
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random()).collect()).collect();
        let ys = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        Dataset::from_rows(xs, ys).unwrap()
    }

    /// Mean and variance through an explicit dense inverse.
    fn dense_oracle(data: &Dataset, spec: &KernelSpec, noise: f64, x: &[f64]) -> (f64, f64) {
        let n = data.len();
        let mut k = DMatrix::from_fn(n, n, |i, j| spec.eval(&data.xs()[i], &data.xs()[j]));
        k += DMatrix::identity(n, n) * noise;
        let kinv = k.try_inverse().unwrap();
        let kx = DVector::from_fn(n, |i, _| spec.eval(&data.xs()[i], x));
        let y = DVector::from_column_slice(data.ys());
        let mean = (kx.transpose() * &kinv * y)[(0, 0)];
        let var = spec.eval(x, x) - (kx.transpose() * &kinv * &kx)[(0, 0)];
        (mean, var)
    }

    #[test]
    fn single_observation_alpha() {
        let s = spec(2);
        let x0 = vec![0.3, 0.6];
        let data = Dataset::from_rows(vec![x0.clone()], vec![2.5]).unwrap();
        let m = GpModel::fit(&data, &s, 0.0).unwrap();
        let want = 2.5 / s.eval(&x0, &x0);
        assert!((m.alpha()[0] - want).abs() < 1e-15);
    }

    #[test]
    fn factor_reconstructs_covariance() {
        let s = spec(3);
        let data = random_data(20, 3, 1);
        let m = GpModel::fit(&data, &s, 1e-4).unwrap();
        let l = m.chol_factor();
        let mut k = kernel_matrix(data.xs(), &s);
        for i in 0..20 {
            k[(i, i)] += 1e-4 + m.jitter();
        }
        let err = (&l * l.transpose() - &k).norm() / k.norm();
        assert!(err <= 1e-8, "relative reconstruction error {err}");
    }

    #[test]
    fn duplicate_points_need_jitter() {
        let s = spec(2);
        let data = Dataset::from_rows(vec![vec![0.4, 0.4], vec![0.4, 0.4], vec![0.9, 0.1]], vec![1.0, 1.0, 0.0]).unwrap();
        let m = GpModel::fit(&data, &s, 0.0).unwrap();
        assert!(m.jitter() > 0.0);
        assert!((m.predict(&[0.4, 0.4]).mean - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = spec(2);
        assert!(GpModel::fit(&Dataset::new(2), &s, 0.0).is_err());
        assert!(GpModel::fit(&random_data(3, 2, 0), &s, -1.0).is_err());
        assert!(GpModel::fit(&random_data(3, 3, 0), &s, 0.0).is_err());
    }

    #[test]
    fn interpolates_without_noise() {
        let s = spec(2);
        let data = random_data(8, 2, 4);
        let m = GpModel::fit(&data, &s, 0.0).unwrap();
        for (x, y) in data.iter() {
            let p = m.predict(x);
            assert!((p.mean - y).abs() <= 1e-8);
            assert!(p.variance <= 1e-8);
        }
    }

    #[test]
    fn recovers_prior_far_away() {
        let base = BaseKernelParams::uniform(2, 0.01, 1.0).unwrap();
        let s = KernelSpec::full(base, vec![1, 2]).unwrap();
        let data = Dataset::from_rows(vec![vec![0.0, 0.0], vec![0.05, 0.02]], vec![3.0, -1.0]).unwrap();
        let m = GpModel::fit(&data, &s, 1e-4).unwrap();
        let far = [1.0, 1.0];
        let p = m.predict(&far);
        assert!(p.mean.abs() < 1e-12);
        assert!((p.variance - s.eval(&far, &far)).abs() < 1e-12);
    }

    #[test]
    fn matches_dense_inverse() {
        let s = spec(3);
        let data = random_data(3, 3, 9);
        let m = GpModel::fit(&data, &s, 1e-3).unwrap();
        let x = [0.2, 0.5, 0.7];
        let p = m.predict(&x);
        let (mean, var) = dense_oracle(&data, &s, 1e-3, &x);
        assert!((p.mean - mean).abs() <= 1e-10 * mean.abs().max(1.0));
        assert!((p.variance - var).abs() <= 1e-10 * var.abs().max(1.0));
    }

    #[test]
    fn confidence_bound_arithmetic() {
        let p = Prediction { mean: 1.5, variance: 0.25 };
        assert_eq!(p.bounds(0.0), (1.5, 1.5));
        assert_eq!(p.bounds(2.0), (0.5, 2.5));
    }

    #[test]
    fn wider_beta_contains_narrower() {
        let s = spec(2);
        let data = random_data(6, 2, 2);
        let m = GpModel::fit(&data, &s, 1e-4).unwrap();
        let mut rng = RngStream::new(3, 3).rng();
        for _ in 0..50 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let (l2, u2) = m.confidence_bounds(&x, 2.0);
            let (l3, u3) = m.confidence_bounds(&x, 3.0);
            assert!(l2 <= u2);
            if m.predict(&x).variance > 0.0 {
                assert!(l3 < l2 && u3 > u2);
            }
        }
    }

    #[test]
    fn variance_bounded_and_monotone_in_data() {
        let s = spec(3);
        let mut rng = RngStream::new(8, 1).rng();
        let tests: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random()).collect()).collect();
        let full = random_data(15, 3, 5);
        let mut prev: Option<Vec<f64>> = None;
        for n in 1..=15 {
            let idx: Vec<usize> = (0..n).collect();
            let m = GpModel::fit(&full.select(&idx), &s, 1e-4).unwrap();
            let vars: Vec<f64> = tests.iter().map(|x| m.predict(x).variance).collect();
            for (x, v) in tests.iter().zip(&vars) {
                assert!(*v <= s.eval(x, x) + 1e-9);
            }
            if let Some(p) = &prev {
                for (a, b) in vars.iter().zip(p) {
                    assert!(*a <= b + 1e-8);
                }
            }
            prev = Some(vars);
        }
    }
}
