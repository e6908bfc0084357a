//! Latin hypercube designs and candidate generation, driven by reproducible
//! random streams.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};

/// A reproducible random stream: equal `(seed, stream_id)` pairs yield equal
/// sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RngStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// An independent sub-stream, e.g. one per trial or per iteration.
    pub fn child(&self, index: u64) -> RngStream {
        RngStream {
            seed: splitmix64(self.seed ^ splitmix64(self.stream_id.wrapping_add(0x9E37_79B9_7F4A_7C15))),
            stream_id: index,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// `n` points in `[0, 1)^dim` with exactly one point per stratum `[j/n, (j+1)/n)`
/// in every dimension.
pub fn latin_hypercube(n: usize, dim: usize, stream: RngStream) -> Result<Vec<Vec<f64>>> {
    if n == 0 || dim == 0 {
        return arg_err("latin_hypercube needs n >= 1 and dim >= 1");
    }
    let mut rng = stream.rng();
    let mut points = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    let width = 1.0 / n as f64;
    for d in 0..dim {
        perm.shuffle(&mut rng);
        for (p, &stratum) in points.iter_mut().zip(&perm) {
            let lo = stratum as f64 * width;
            let mut x = lo + rng.random::<f64>() * width;
            // keep rounding from pushing a sample into the next stratum
            if x >= lo + width || (x * n as f64).floor() as usize != stratum {
                x = lo;
            }
            p[d] = x;
        }
    }
    Ok(points)
}

/// `n_uniform` points uniform in the unit box followed by `n_local` points
/// perturbed around `center` with Gaussian noise of std `local_sigma`,
/// clipped to the box.
pub fn candidate_batch(
    center: &[f64],
    n_uniform: usize,
    n_local: usize,
    local_sigma: f64,
    stream: RngStream,
) -> Result<Vec<Vec<f64>>> {
    if !(local_sigma > 0.0 && local_sigma.is_finite()) {
        return arg_err("local_sigma must be positive");
    }
    if center.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return arg_err("candidate center must lie in the unit box");
    }
    let dim = center.len();
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(n_uniform + n_local);
    for _ in 0..n_uniform {
        out.push((0..dim).map(|_| rng.random::<f64>()).collect());
    }
    let normal = Normal::new(0.0, local_sigma).expect("validated sigma");
    for _ in 0..n_local {
        out.push(
            center
                .iter()
                .map(|&c| (c + normal.sample(&mut rng)).clamp(0.0, 1.0))
                .collect(),
        );
    }
    Ok(out)
}

/// Stratum index of each coordinate, for checking stratification.
pub fn strata(points: &[Vec<f64>], dim: usize) -> Vec<usize> {
    let n = points.len();
    points
        .iter()
        .map(|p| ((p[dim] * n as f64).floor() as usize).min(n - 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_permutation(mut s: Vec<usize>) -> bool {
        s.sort_unstable();
        s.iter().enumerate().all(|(i, &v)| i == v)
    }

    #[test]
    fn single_point_lhs() {
        let pts = latin_hypercube(1, 5, RngStream::new(3, 0)).unwrap();
        assert_eq!(pts.len(), 1);
        assert!(pts[0].iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn small_lhs_is_stratified() {
        let pts = latin_hypercube(4, 2, RngStream::new(11, 2)).unwrap();
        for d in 0..2 {
            assert!(is_permutation(strata(&pts, d)));
        }
    }

    #[test]
    fn prior_sized_lhs_is_stratified() {
        for seed in 0..10 {
            let pts = latin_hypercube(36, 9, RngStream::new(seed, 0)).unwrap();
            for d in 0..9 {
                assert!(is_permutation(strata(&pts, d)), "seed {seed} dim {d}");
            }
        }
    }

    #[test]
    fn lhs_rejects_empty() {
        assert!(latin_hypercube(0, 2, RngStream::new(0, 0)).is_err());
        assert!(latin_hypercube(2, 0, RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = latin_hypercube(8, 3, RngStream::new(5, 1)).unwrap();
        let b = latin_hypercube(8, 3, RngStream::new(5, 1)).unwrap();
        let c = latin_hypercube(8, 3, RngStream::new(5, 2)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let s = RngStream::new(5, 1);
        assert_eq!(s.child(3), s.child(3));
        assert_ne!(s.child(3), s.child(4));
        assert_ne!(s.child(3).seed, RngStream::new(5, 2).child(3).seed);
    }

    #[test]
    fn tiny_sigma_returns_center() {
        let c = [0.25, 0.5, 1.0];
        let pts = candidate_batch(&c, 0, 1, 1e-300, RngStream::new(1, 1)).unwrap();
        assert_eq!(pts.len(), 1);
        for (x, y) in pts[0].iter().zip(c) {
            assert!((x - y).abs() < 1e-200);
        }
    }

    #[test]
    fn uniform_candidates_are_centered() {
        let pts = candidate_batch(&[0.5; 4], 1000, 0, 0.05, RngStream::new(7, 0)).unwrap();
        for d in 0..4 {
            let m = pts.iter().map(|p| p[d]).sum::<f64>() / 1000.0;
            assert!((0.45..=0.55).contains(&m), "dim {d} mean {m}");
        }
    }

    #[test]
    fn candidates_stay_in_box() {
        let pts = candidate_batch(&[0.0, 1.0, 0.99], 200, 500, 0.5, RngStream::new(9, 9)).unwrap();
        assert_eq!(pts.len(), 700);
        assert!(pts.iter().flatten().all(|x| (0.0..=1.0).contains(x)));
        assert!(candidate_batch(&[1.5], 1, 1, 0.1, RngStream::new(0, 0)).is_err());
        assert!(candidate_batch(&[0.5], 1, 1, 0.0, RngStream::new(0, 0)).is_err());
    }
}
