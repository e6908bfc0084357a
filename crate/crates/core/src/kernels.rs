//! Base and additive kernels.
//!
//! An additive kernel of order `n` over active dimensions `S` is the sum, over
//! every size-`n` subset of `S`, of the product of the one-dimensional base
//! kernels on that subset. That sum is the `n`-th elementary symmetric
//! polynomial of the base-kernel values, so a kernel with several orders costs
//! `O(|S| * n_max)` per evaluation instead of enumerating subsets.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// Rows above which [`kernel_matrix`] fills rows in parallel.
const PARALLEL_ROWS: usize = 64;

/// Squared-exponential parameters for every input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseKernelParams {
    pub lengthscale: Vec<f64>,
    pub signal_variance: Vec<f64>,
}

impl BaseKernelParams {
    pub fn uniform(dim: usize, lengthscale: f64, signal_variance: f64) -> Result<Self> {
        let params = BaseKernelParams {
            lengthscale: vec![lengthscale; dim],
            signal_variance: vec![signal_variance; dim],
        };
        params.validate()?;
        Ok(params)
    }

    pub fn dim(&self) -> usize {
        self.lengthscale.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscale.is_empty() {
            return arg_err("base kernel needs at least one dimension");
        }
        if self.lengthscale.len() != self.signal_variance.len() {
            return arg_err("lengthscale and signal_variance lengths differ");
        }
        if let Some(d) = self.lengthscale.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
            return arg_err(format!("lengthscale of dim {d} must be positive"));
        }
        if let Some(d) = self.signal_variance.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return arg_err(format!("signal_variance of dim {d} must be positive"));
        }
        Ok(())
    }

    /// Parameters restricted to the listed dimensions, in that order.
    pub fn subset(&self, dims: &[usize]) -> BaseKernelParams {
        BaseKernelParams {
            lengthscale: dims.iter().map(|&d| self.lengthscale[d]).collect(),
            signal_variance: dims.iter().map(|&d| self.signal_variance[d]).collect(),
        }
    }
}

/// One-dimensional squared-exponential kernel on coordinate `dim`.
#[inline]
pub fn base_kernel_eval(x: f64, y: f64, params: &BaseKernelParams, dim: usize) -> f64 {
    let l = params.lengthscale[dim];
    let r = x - y;
    params.signal_variance[dim] * (-(r * r) / (2.0 * l * l)).exp()
}

/// Elementary symmetric polynomials `e_1..=e_{n_max}` of `z`.
///
/// Uses the product expansion of `prod_i (1 + z_i t)`, adding one factor at a
/// time. Every update is a sum of same-signed terms for nonnegative `z`.
pub fn elementary_symmetric(z: &[f64], n_max: usize) -> Result<Vec<f64>> {
    if z.is_empty() {
        return arg_err("elementary_symmetric needs at least one value");
    }
    if n_max == 0 || n_max > z.len() {
        return arg_err(format!("order {n_max} outside 1..={}", z.len()));
    }
    let mut e = vec![0.0; n_max + 1];
    elementary_symmetric_into(z, &mut e);
    e.remove(0);
    Ok(e)
}

/// Fills `e[0..]` with `e_0 = 1, e_1, ..., e_{e.len()-1}`.
#[inline]
fn elementary_symmetric_into(z: &[f64], e: &mut [f64]) {
    let n_max = e.len() - 1;
    e.fill(0.0);
    e[0] = 1.0;
    for (i, &zi) in z.iter().enumerate() {
        let top = n_max.min(i + 1);
        for n in (1..=top).rev() {
            e[n] += zi * e[n - 1];
        }
    }
}

/// Binomial coefficient as a float; exact for the sizes used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// A weighted sum of additive kernels of several orders over one set of
/// active dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditiveTerm {
    pub dims: Vec<usize>,
    pub orders: Vec<usize>,
    pub order_weights: Vec<f64>,
}

impl AdditiveTerm {
    /// Orders weighted by `1 / C(|dims|, n)`, so every order has unit prior
    /// variance when all base variances are 1.
    pub fn new(dims: Vec<usize>, orders: Vec<usize>) -> Self {
        let mut orders = orders;
        orders.sort_unstable();
        orders.dedup();
        let order_weights = orders.iter().map(|&n| 1.0 / binomial(dims.len(), n)).collect();
        AdditiveTerm {
            dims,
            orders,
            order_weights,
        }
    }

    fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(0)
    }
}

/// A composite kernel: a sum of [`AdditiveTerm`]s sharing one set of base kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: BaseKernelParams,
    pub terms: Vec<AdditiveTerm>,
}

impl KernelSpec {
    /// A single-term kernel with default order weights.
    pub fn new(base: BaseKernelParams, dims: Vec<usize>, orders: Vec<usize>) -> Result<Self> {
        let spec = KernelSpec {
            base,
            terms: vec![AdditiveTerm::new(dims, orders)],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// All dimensions active, the given orders.
    pub fn full(base: BaseKernelParams, orders: Vec<usize>) -> Result<Self> {
        let dims = (0..base.dim()).collect();
        Self::new(base, dims, orders)
    }

    pub fn with_term(mut self, term: AdditiveTerm) -> Result<Self> {
        self.terms.push(term);
        self.validate()?;
        Ok(self)
    }

    /// Multiplies every order weight by `amplitude`.
    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return arg_err("kernel amplitude must be positive");
        }
        for t in &mut self.terms {
            for w in &mut t.order_weights {
                *w *= amplitude;
            }
        }
        Ok(self)
    }

    /// Rescales all order weights so that the prior variance `k(x, x)` equals
    /// `variance`. The base kernels are stationary, so one point suffices.
    pub fn with_prior_variance(self, variance: f64) -> Result<Self> {
        let origin = vec![0.0; self.dim()];
        let current = self.eval(&origin, &origin);
        self.with_amplitude(variance / current)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Sorted union of the orders used by every term.
    pub fn orders(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.terms.iter().flat_map(|t| t.orders.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Sorted union of active dimensions.
    pub fn active_dims(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.terms.iter().flat_map(|t| t.dims.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.terms.is_empty() {
            return arg_err("kernel has no terms");
        }
        let dim = self.dim();
        for (ti, t) in self.terms.iter().enumerate() {
            if t.dims.is_empty() {
                return arg_err(format!("term {ti} has no active dimensions"));
            }
            let mut seen = vec![false; dim];
            for &d in &t.dims {
                if d >= dim {
                    return arg_err(format!("term {ti}: dimension {d} out of range 0..{dim}"));
                }
                if seen[d] {
                    return arg_err(format!("term {ti}: dimension {d} listed twice"));
                }
                seen[d] = true;
            }
            if t.orders.is_empty() {
                return arg_err(format!("term {ti} has no orders"));
            }
            if t.orders.len() != t.order_weights.len() {
                return arg_err(format!("term {ti}: orders and weights lengths differ"));
            }
            for (&n, &w) in t.orders.iter().zip(&t.order_weights) {
                if n == 0 || n > t.dims.len() {
                    return arg_err(format!(
                        "term {ti}: order {n} outside 1..={}",
                        t.dims.len()
                    ));
                }
                if !(w > 0.0 && w.is_finite()) {
                    return arg_err(format!("term {ti}: weight of order {n} must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Kernel value without dimension checks; `a` and `b` must have `dim()` entries.
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        const STACK: usize = 32;
        let mut total = 0.0;
        for t in &self.terms {
            let n_max = t.max_order();
            if t.dims.len() <= STACK {
                let mut z = [0.0; STACK];
                let mut e = [0.0; STACK + 1];
                total += term_value(t, a, b, &self.base, &mut z[..t.dims.len()], &mut e[..=n_max]);
            } else {
                let mut z = vec![0.0; t.dims.len()];
                let mut e = vec![0.0; n_max + 1];
                total += term_value(t, a, b, &self.base, &mut z, &mut e);
            }
        }
        total
    }
}

#[inline]
fn term_value(
    t: &AdditiveTerm,
    a: &[f64],
    b: &[f64],
    base: &BaseKernelParams,
    z: &mut [f64],
    e: &mut [f64],
) -> f64 {
    for (zi, &d) in z.iter_mut().zip(&t.dims) {
        *zi = base_kernel_eval(a[d], b[d], base, d);
    }
    elementary_symmetric_into(z, e);
    t.orders
        .iter()
        .zip(&t.order_weights)
        .map(|(&n, &w)| w * e[n])
        .sum()
}

/// Additive kernel between two points of the full input space.
pub fn additive_kernel_eval(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<f64> {
    let dim = spec.dim();
    if a.len() != dim || b.len() != dim {
        return arg_err(format!(
            "points have {} and {} coordinates, kernel expects {dim}",
            a.len(),
            b.len()
        ));
    }
    Ok(spec.eval(a, b))
}

/// Symmetric Gram matrix of `points` under `spec`.
pub fn kernel_matrix(points: &[Vec<f64>], spec: &KernelSpec) -> DMatrix<f64> {
    let n = points.len();
    let row = |i: usize| -> Vec<f64> { (0..=i).map(|j| spec.eval(&points[i], &points[j])).collect() };
    let rows: Vec<Vec<f64>> = if n >= PARALLEL_ROWS {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    let mut k = DMatrix::zeros(n, n);
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-covariances between `x` and every row of `points`.
pub fn kernel_vector(points: &[Vec<f64>], x: &[f64], spec: &KernelSpec) -> DVector<f64> {
    DVector::from_iterator(points.len(), points.iter().map(|p| spec.eval(p, x)))
}
