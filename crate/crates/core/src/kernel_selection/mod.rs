//! Selection of the additive orders and input dimensions that make up the
//! reduced kernel used during optimization.

mod forest;
mod nystrom;

pub use forest::{fit_forest, Forest, Node, Tree};
pub use nystrom::{nystrom_cree, NystromConfig, SPECTRAL_CUTOFF};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{arg_err, Result};
use crate::kernels::{AdditiveTerm, BaseKernelParams, KernelSpec};
use crate::sampling::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderScore {
    pub order: usize,
    pub average_cree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRanking {
    /// One entry per order `1..=D`, in order.
    pub scores: Vec<OrderScore>,
    pub trials: usize,
    /// Orders by ascending average C_ree; lower order first on ties.
    pub ranked: Vec<usize>,
    /// The first `top_m` entries of `ranked`.
    pub selected: Vec<usize>,
}

/// Averages [`nystrom_cree`] over `cfg.trials` index draws for every
/// single-order additive kernel `1..=dim` and ranks the orders.
///
/// Trial `t` of order `n` uses the sub-stream `stream.child(n * trials + t)`,
/// so every (order, trial) pair draws its own column sample.
pub fn rank_additive_kernels(
    data: &Dataset,
    dim: usize,
    base: &BaseKernelParams,
    cfg: &NystromConfig,
    top_m: usize,
    stream: RngStream,
) -> Result<KernelRanking> {
    if data.is_empty() {
        return arg_err("kernel ranking needs a nonempty dataset");
    }
    if dim == 0 || data.dim() != dim || base.dim() != dim {
        return arg_err(format!(
            "dimension mismatch: dim = {dim}, data = {}, base = {}",
            data.dim(),
            base.dim()
        ));
    }
    if top_m == 0 || top_m > dim {
        return arg_err(format!("top_m = {top_m} must lie in 1..={dim}"));
    }
    cfg.validate(data.len())?;

    let mut scores = Vec::with_capacity(dim);
    for order in 1..=dim {
        let spec = KernelSpec::full(base.clone(), vec![order])?;
        let values: Vec<f64> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| nystrom_cree(data, &spec, cfg, stream.child((order * cfg.trials + t) as u64)))
            .collect::<Result<_>>()?;
        scores.push(OrderScore {
            order,
            average_cree: compensated_sum(&values) / cfg.trials as f64,
        });
    }

    let mut ranked: Vec<usize> = (1..=dim).collect();
    ranked.sort_by(|&a, &b| {
        scores[a - 1]
            .average_cree
            .total_cmp(&scores[b - 1].average_cree)
            .then(a.cmp(&b))
    });
    let selected = ranked[..top_m].to_vec();
    Ok(KernelRanking {
        scores,
        trials: cfg.trials,
        ranked,
        selected,
    })
}

/// Neumaier summation; independent of how the values were produced.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Reduced kernel: the selected orders (capped at `dim_keep`) over the
/// `dim_keep` most important dimensions, plus a first-order term over all
/// dimensions. With `dim_keep == dim` both collapse into one term.
pub fn build_reduced_kernel(
    ranking: &KernelRanking,
    forest: &Forest,
    dim: usize,
    base: &BaseKernelParams,
    dim_keep: usize,
) -> Result<KernelSpec> {
    if dim_keep == 0 || dim_keep > dim {
        return arg_err(format!("dim_keep = {dim_keep} must lie in 1..={dim}"));
    }
    if forest.importance.len() != dim || base.dim() != dim {
        return arg_err("forest importance and base kernel must cover every dimension");
    }
    let mut orders: Vec<usize> = ranking.selected.iter().map(|&n| n.min(dim_keep)).collect();
    orders.sort_unstable();
    orders.dedup();

    let all: Vec<usize> = (0..dim).collect();
    if dim_keep == dim {
        orders.push(1);
        return KernelSpec::new(base.clone(), all, orders);
    }
    let mut kept = forest.ranked_dims()[..dim_keep].to_vec();
    kept.sort_unstable();
    KernelSpec::new(base.clone(), kept, orders)?.with_term(AdditiveTerm::new(all, vec![1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn forest_with(importance: Vec<f64>) -> Forest {
        Forest {
            trees: Vec::new(),
            n_trees: 0,
            importance,
        }
    }

    fn ranking(selected: Vec<usize>) -> KernelRanking {
        KernelRanking {
            scores: Vec::new(),
            trials: 1,
            ranked: selected.clone(),
            selected,
        }
    }

    #[test]
    fn keep_all_dims_merges_first_order() {
        let base = BaseKernelParams::uniform(9, 0.2, 1.0).unwrap();
        let spec = build_reduced_kernel(&ranking(vec![2, 3, 4]), &forest_with(vec![1.0 / 9.0; 9]), 9, &base, 9).unwrap();
        assert_eq!(spec.terms.len(), 1);
        assert_eq!(spec.active_dims(), (0..9).collect::<Vec<_>>());
        assert_eq!(spec.orders(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn keeps_most_important_dims() {
        let base = BaseKernelParams::uniform(9, 0.2, 1.0).unwrap();
        let imp = vec![0.05, 0.2, 0.02, 0.15, 0.1, 0.03, 0.25, 0.12, 0.08];
        let spec = build_reduced_kernel(&ranking(vec![3, 2, 4]), &forest_with(imp), 9, &base, 6).unwrap();
        assert_eq!(spec.terms[0].dims, vec![1, 3, 4, 6, 7, 8]);
        assert_eq!(spec.terms[0].orders, vec![2, 3, 4]);
        assert_eq!(spec.terms[1].dims, (0..9).collect::<Vec<_>>());
        assert_eq!(spec.terms[1].orders, vec![1]);
        assert_eq!(spec.orders(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn orders_capped_at_kept_dims() {
        let base = BaseKernelParams::uniform(9, 0.2, 1.0).unwrap();
        let spec = build_reduced_kernel(&ranking(vec![9]), &forest_with(vec![1.0 / 9.0; 9]), 9, &base, 6).unwrap();
        assert_eq!(spec.terms[0].orders, vec![6]);
        assert!(build_reduced_kernel(&ranking(vec![1]), &forest_with(vec![0.5; 2]), 2, &base, 3).is_err());
    }

    #[test]
    fn one_dimensional_ranking() {
        let data = Dataset::from_rows(vec![vec![0.1], vec![0.5], vec![0.9]], vec![1.0, 2.0, 0.5]).unwrap();
        let base = BaseKernelParams::uniform(1, 0.2, 1.0).unwrap();
        let cfg = NystromConfig { c: 2, k: 1, mu: 1e-3, trials: 5 };
        let r = rank_additive_kernels(&data, 1, &base, &cfg, 1, RngStream::new(0, 0)).unwrap();
        assert_eq!(r.ranked, vec![1]);
        assert_eq!(r.selected, vec![1]);
        assert_eq!(r.scores.len(), 1);
    }

    #[test]
    fn ranking_is_deterministic() {
        let data = Dataset::from_rows(
            (0..12).map(|i| vec![i as f64 / 12.0, ((i * 5) % 12) as f64 / 12.0, ((i * 7) % 12) as f64 / 12.0]).collect(),
            (0..12).map(|i| (i as f64).sin()).collect(),
        )
        .unwrap();
        let base = BaseKernelParams::uniform(3, 0.2, 1.0).unwrap();
        let cfg = NystromConfig { trials: 20, ..NystromConfig::for_size(12) };
        let a = rank_additive_kernels(&data, 3, &base, &cfg, 2, RngStream::new(1, 2)).unwrap();
        let b = rank_additive_kernels(&data, 3, &base, &cfg, 2, RngStream::new(1, 2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.selected.len(), 2);
        assert!(rank_additive_kernels(&data, 3, &base, &cfg, 4, RngStream::new(1, 2)).is_err());
    }

    #[test]
    fn compensated_sum_is_order_robust() {
        let vals: Vec<f64> = (0..1000).map(|i| 1e8 + (i as f64) * 1e-3).collect();
        let mut rev = vals.clone();
        rev.reverse();
        let a = compensated_sum(&vals);
        let b = compensated_sum(&rev);
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }
}
