use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use tuner_core::kernel_selection::{build_reduced_kernel, fit_forest, rank_additive_kernels, NystromConfig};
use tuner_core::kernels::kernel_matrix;
use tuner_core::sampling::{latin_hypercube, RngStream};
use tuner_core::{BaseKernelParams, Dataset, KernelSpec};

/// `l` points with targets drawn from the zero-mean GP prior of `spec`.
fn sample_prior(spec: &KernelSpec, l: usize, stream: RngStream) -> Dataset {
    let dim = spec.dim();
    let xs = latin_hypercube(l, dim, stream.child(0)).unwrap();
    let mut k = kernel_matrix(&xs, spec);
    for i in 0..l {
        k[(i, i)] += 1e-8;
    }
    let chol = k.cholesky().expect("kernel matrix is positive definite");
    let mut rng = stream.child(1).rng();
    let z = DVector::from_fn(l, |_, _| StandardNormal.sample(&mut rng));
    let y = chol.l() * z;
    Dataset::from_rows(xs, y.iter().copied().collect()).unwrap()
}

#[test]
fn first_order_data_ranks_order_one_first() {
    let base = BaseKernelParams::uniform(5, 0.2, 1.0).unwrap();
    let truth = KernelSpec::full(base.clone(), vec![1]).unwrap();
    let mut hits = 0u64;
    let reps = 5;
    for rep in 0..reps {
        let data = sample_prior(&truth, 40, RngStream::new(100 + rep, 0));
        let cfg = NystromConfig {
            trials: 200,
            ..NystromConfig::for_size(40)
        };
        let ranking = rank_additive_kernels(&data, 5, &base, &cfg, 3, RngStream::new(rep, 9)).unwrap();
        hits += u64::from(ranking.ranked[0] == 1);
    }
    assert_eq!(hits, reps, "order 1 ranked first in {hits} of {reps}");
}

#[test]
fn selection_pipeline_on_sparse_target() {
    // only dims 0 and 3 matter, jointly
    let xs = latin_hypercube(60, 6, RngStream::new(5, 0)).unwrap();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0] * x[3] + x[0]).collect();
    let data = Dataset::from_rows(xs, ys).unwrap();
    let base = BaseKernelParams::uniform(6, 0.2, 1.0).unwrap();
    let ranking = rank_additive_kernels(&data, 6, &base, &NystromConfig::for_size(60), 3, RngStream::new(1, 1)).unwrap();
    let forest = fit_forest(&data, 50, 2, RngStream::new(1, 2)).unwrap();
    let top: Vec<usize> = forest.ranked_dims()[..2].to_vec();
    assert!(top.contains(&0) && top.contains(&3), "{:?}", forest.importance);
    let spec = build_reduced_kernel(&ranking, &forest, 6, &base, 2).unwrap();
    assert_eq!(spec.terms[0].dims, vec![0, 3]);
    assert!(spec.terms[0].orders.iter().all(|&n| n <= 2));
    assert_eq!(spec.terms[1].dims, (0..6).collect::<Vec<_>>());
    assert_eq!(spec.terms[1].orders, vec![1]);
}
