use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{arg_err, Error, Result};
use crate::kernels::KernelSpec;
use crate::sampling::RngStream;

/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const SPECTRAL_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NystromConfig {
    /// Number of sampled columns.
    pub c: usize,
    /// Spectral components kept from the sampled block.
    pub k: usize,
    /// Regularization strength.
    pub mu: f64,
    pub trials: usize,
}

impl NystromConfig {
    /// `c = ceil(0.6 l)`, `k = ceil(c / 2)`, `mu = 1e-3`, 1000 trials.
    pub fn for_size(l: usize) -> Self {
        let c = ((0.6 * l as f64).ceil() as usize).clamp(1, l.max(1));
        NystromConfig {
            c,
            k: c.div_ceil(2),
            mu: 1e-3,
            trials: 1000,
        }
    }

    pub fn validate(&self, l: usize) -> Result<()> {
        if self.c > l {
            return arg_err(format!("c = {} exceeds dataset size {l}", self.c));
        }
        if self.k == 0 || self.k > self.c {
            return arg_err(format!("k = {} must lie in 1..={}", self.k, self.c));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return arg_err("mu must be positive");
        }
        if self.trials == 0 {
            return arg_err("trials must be at least 1");
        }
        Ok(())
    }
}

/// Regularized empirical error of the Nyström-approximated kernel on `data`.
///
/// Samples `c` rows without replacement, builds the column block `C` and the
/// sampled block `W`, and forms the rank-`k` factor `V = C U_k Σ_k^{+1/2}` so
/// that `V V^T` approximates the full Gram matrix. Returns `mu * y^T u` with
/// `u = (y - V t) / (mu l)` and `(mu I + V^T V) t = V^T y`.
pub fn nystrom_cree(data: &Dataset, spec: &KernelSpec, cfg: &NystromConfig, stream: RngStream) -> Result<f64> {
    let l = data.len();
    cfg.validate(l)?;
    let mut rng = stream.rng();
    let sampled = index::sample(&mut rng, l, cfg.c).into_vec();
    cree_with_indices(data, spec, cfg, &sampled)
}

pub(crate) fn cree_with_indices(data: &Dataset, spec: &KernelSpec, cfg: &NystromConfig, sampled: &[usize]) -> Result<f64> {
    let l = data.len();
    let xs = data.xs();
    let y = DVector::from_column_slice(data.ys());

    let cols = DMatrix::from_fn(l, sampled.len(), |i, j| spec.eval(&xs[i], &xs[sampled[j]]));
    let w = DMatrix::from_fn(sampled.len(), sampled.len(), |i, j| cols[(sampled[i], j)]);

    let eig = SymmetricEigen::new(w);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_max = eig.eigenvalues[order[0]];
    if !(lambda_max > 0.0) {
        return Err(Error::Numerical("sampled kernel block has no positive eigenvalue".into()));
    }
    let cutoff = SPECTRAL_CUTOFF * lambda_max;

    // scaled eigenvectors U_k Σ_k^{+1/2}; components under the cutoff vanish
    let mut scaled = DMatrix::zeros(sampled.len(), cfg.k);
    for (col, &src) in order.iter().take(cfg.k).enumerate() {
        let lambda = eig.eigenvalues[src];
        if lambda > cutoff {
            scaled.set_column(col, &(eig.eigenvectors.column(src) / lambda.sqrt()));
        }
    }
    let v = &cols * scaled;

    let mut system = v.transpose() * &v;
    for i in 0..cfg.k {
        system[(i, i)] += cfg.mu;
    }
    let rhs = v.transpose() * &y;
    let t = system
        .cholesky()
        .ok_or_else(|| Error::Numerical("regularized Nyström system is not positive definite".into()))?
        .solve(&rhs);
    let u = (&y - &v * t) / (cfg.mu * l as f64);
    Ok(cfg.mu * y.dot(&u))
}
