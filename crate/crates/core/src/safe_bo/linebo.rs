//! Line-search baseline: safe optimization restricted to random lines through
//! the incumbent, with a one-dimensional GP per line.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{argmax_acquisition, safe_indices, BoConfig, BoTrace, Campaign};
use crate::dataset::Dataset;
use crate::error::{arg_err, Result};
use crate::gp::GpModel;
use crate::kernels::KernelSpec;
use crate::sampling::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineBoConfig {
    /// Grid points along each line.
    pub line_points: usize,
    /// Evaluations spent on a line before re-centering.
    pub evals_per_line: usize,
}

impl Default for LineBoConfig {
    fn default() -> Self {
        LineBoConfig {
            line_points: 200,
            evals_per_line: 5,
        }
    }
}

impl LineBoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.line_points < 2 || self.evals_per_line == 0 {
            return arg_err("linebo needs line_points >= 2 and evals_per_line >= 1");
        }
        Ok(())
    }
}

/// Parameter range `[lo, hi]` of `center + t * dir` inside the unit box.
fn chord(center: &[f64], dir: &[f64]) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (&c, &d) in center.iter().zip(dir) {
        if d.abs() < 1e-15 {
            continue;
        }
        let (a, b) = ((0.0 - c) / d, (1.0 - c) / d);
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (lo.min(0.0), hi.max(0.0))
}

fn random_direction(dim: usize, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Runs `cfg.iterations` evaluations. Each line epoch draws a direction
/// uniformly on the sphere, discretizes the chord of the unit box through the
/// incumbent, and spends up to `evals_per_line` safe evaluations on it using a
/// GP over the signed distance along the line.
///
/// `line_kernel` must be one-dimensional.
pub fn run_linebo<F>(mut objective: F, prior: &Dataset, line_kernel: &KernelSpec, cfg: &BoConfig, stream: RngStream) -> Result<BoTrace>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    cfg.validate()?;
    if line_kernel.dim() != 1 {
        return arg_err("linebo needs a one-dimensional kernel");
    }
    let mut campaign = Campaign::new(prior, cfg.p_min)?;
    let dim = prior.dim();
    let mut epoch = 0u64;

    while campaign.evaluations() < cfg.iterations {
        let center = campaign.incumbent().to_vec();
        let dir = random_direction(dim, stream.child(epoch));
        epoch += 1;
        let (lo, hi) = chord(&center, &dir);
        let n = cfg.linebo.line_points;
        let grid: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
            .collect();
        let to_point = |t: f64| -> Vec<f64> {
            center
                .iter()
                .zip(&dir)
                .map(|(c, d)| (c + t * d).clamp(0.0, 1.0))
                .collect()
        };

        let mut line_data = Dataset::new(1);
        line_data.push(vec![0.0], campaign.trace.best_performance)?;

        for _ in 0..cfg.linebo.evals_per_line {
            if campaign.evaluations() >= cfg.iterations {
                break;
            }
            let it = campaign.evaluations();
            let model = GpModel::fit(&line_data, line_kernel, cfg.noise_variance)?;
            let preds = model.predict_many(&grid);
            let beta = cfg.beta_at(it, grid.len());
            let pool = safe_indices(&preds, beta, cfg.p_min);
            let best = campaign.trace.best_performance;
            match argmax_acquisition(&preds, &pool, cfg.acquisition, beta, best) {
                Some(i) => {
                    let t = grid[i][0];
                    let lb = preds[i].bounds(beta).0;
                    campaign.evaluate(&mut objective, to_point(t), lb, false, pool.len())?;
                    let y = campaign.trace.records.last().expect("just evaluated").performance;
                    line_data.push(vec![t], y)?;
                }
                None => {
                    let lb = model.confidence_bounds(&[0.0], beta).0;
                    campaign.evaluate(&mut objective, center.clone(), lb, true, 0)?;
                }
            }
        }
    }
    Ok(campaign.trace)
}
