//! Safe Bayesian optimization over the unit box and its baselines.
//!
//! Every iteration refits the GP on all observations, scores a fresh batch of
//! candidates around the incumbent, keeps those whose lower confidence bound
//! clears `p_min`, and evaluates the acquisition maximizer among them. When no
//! candidate is provably safe the incumbent is re-evaluated instead (a stall).

mod linebo;

pub use linebo::{run_linebo, LineBoConfig};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dataset::Dataset;
use crate::error::{arg_err, Result};
use crate::gp::{GpModel, Prediction};
use crate::kernels::KernelSpec;
use crate::sampling::{candidate_batch, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Acquisition {
    SafeUcb,
    SafeEi,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BetaSchedule {
    Constant,
    /// `beta_n = sqrt(2 ln(|candidates| n^2 pi^2 / (6 delta)))`.
    Logarithmic { delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateConfig {
    pub n_uniform: usize,
    pub n_local: usize,
    pub local_sigma: f64,
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            n_uniform: 5000,
            n_local: 2000,
            // crash boundaries of the quadrotor benchmark are a few
            // thousandths wide in normalized coordinates
            local_sigma: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    pub beta: f64,
    pub beta_schedule: BetaSchedule,
    pub p_min: f64,
    pub iterations: usize,
    pub candidates: CandidateConfig,
    pub noise_variance: f64,
    pub acquisition: Acquisition,
    pub linebo: LineBoConfig,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            beta: 2.0,
            beta_schedule: BetaSchedule::Constant,
            p_min: 0.0,
            iterations: 150,
            candidates: CandidateConfig::default(),
            noise_variance: 1e-4,
            acquisition: Acquisition::SafeUcb,
            linebo: LineBoConfig::default(),
        }
    }
}

impl BoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return arg_err("beta must be nonnegative");
        }
        if let BetaSchedule::Logarithmic { delta } = self.beta_schedule {
            if !(delta > 0.0 && delta < 1.0) {
                return arg_err("beta_schedule.delta must lie in (0, 1)");
            }
        }
        if self.iterations == 0 {
            return arg_err("iterations must be at least 1");
        }
        if self.candidates.n_uniform + self.candidates.n_local == 0 {
            return arg_err("candidate batch is empty");
        }
        if !(self.candidates.local_sigma > 0.0) {
            return arg_err("candidates.local_sigma must be positive");
        }
        if !(self.noise_variance >= 0.0) {
            return arg_err("noise_variance must be nonnegative");
        }
        self.linebo.validate()
    }

    /// Confidence scale at 0-based iteration `iteration` for `n_candidates`.
    pub fn beta_at(&self, iteration: usize, n_candidates: usize) -> f64 {
        match self.beta_schedule {
            BetaSchedule::Constant => self.beta,
            BetaSchedule::Logarithmic { delta } => {
                let n = (iteration + 1) as f64;
                let pi2 = std::f64::consts::PI * std::f64::consts::PI;
                (2.0 * (n_candidates.max(1) as f64 * n * n * pi2 / (6.0 * delta)).ln())
                    .max(0.0)
                    .sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoRecord {
    /// 0-based post-prior iteration.
    pub iteration: usize,
    pub params: Vec<f64>,
    pub performance: f64,
    /// `performance >= p_min`.
    pub safe: bool,
    /// GP lower bound of `params` when it was chosen.
    pub lower_bound: f64,
    pub best_so_far: f64,
    pub stalled: bool,
    pub safe_set_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoTrace {
    pub prior_len: usize,
    pub p_min: f64,
    pub records: Vec<BoRecord>,
    pub best_params: Vec<f64>,
    pub best_performance: f64,
}

impl BoTrace {
    pub fn unsafe_count(&self) -> usize {
        self.records.iter().filter(|r| !r.safe).count()
    }

    pub fn stall_count(&self) -> usize {
        self.records.iter().filter(|r| r.stalled).count()
    }
}

/// Indices of the candidates whose lower confidence bound is at least `p_min`.
pub fn safe_set(model: &GpModel, candidates: &[Vec<f64>], beta: f64, p_min: f64) -> Vec<usize> {
    safe_indices(&model.predict_many(candidates), beta, p_min)
}

fn safe_indices(preds: &[Prediction], beta: f64, p_min: f64) -> Vec<usize> {
    preds
        .iter()
        .enumerate()
        .filter(|(_, p)| p.bounds(beta).0 >= p_min)
        .map(|(i, _)| i)
        .collect()
}

/// Acquisition maximizer among `subset` (indices into `candidates`); first
/// index wins ties. `best_observed` is the incumbent value used by EI.
pub fn acquire_next(
    model: &GpModel,
    candidates: &[Vec<f64>],
    subset: &[usize],
    mode: Acquisition,
    beta: f64,
    best_observed: f64,
) -> Option<usize> {
    let preds: Vec<Prediction> = model.predict_many(candidates);
    argmax_acquisition(&preds, subset, mode, beta, best_observed)
}

pub fn acquisition_value(p: &Prediction, mode: Acquisition, beta: f64, best_observed: f64) -> f64 {
    match mode {
        Acquisition::SafeUcb => p.bounds(beta).1,
        Acquisition::SafeEi => expected_improvement(p, best_observed),
    }
}

fn expected_improvement(p: &Prediction, best: f64) -> f64 {
    let sd = p.std();
    let gap = p.mean - best;
    if sd <= 0.0 {
        return gap.max(0.0);
    }
    let z = gap / sd;
    let n = Normal::standard();
    gap * n.cdf(z) + sd * n.pdf(z)
}

fn argmax_acquisition(
    preds: &[Prediction],
    subset: &[usize],
    mode: Acquisition,
    beta: f64,
    best_observed: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &i in subset {
        let v = acquisition_value(&preds[i], mode, beta, best_observed);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Shared bookkeeping of the optimization loops.
pub(crate) struct Campaign {
    pub data: Dataset,
    pub trace: BoTrace,
    best_index: usize,
}

impl Campaign {
    pub fn new(prior: &Dataset, p_min: f64) -> Result<Self> {
        if prior.is_empty() {
            return arg_err("the prior dataset is empty");
        }
        let best_index = prior.argmax().expect("nonempty");
        if !(prior.ys()[best_index] >= p_min) {
            return arg_err(format!("the prior contains no observation with performance >= {p_min}"));
        }
        Ok(Campaign {
            data: prior.clone(),
            trace: BoTrace {
                prior_len: prior.len(),
                p_min,
                records: Vec::new(),
                best_params: prior.xs()[best_index].clone(),
                best_performance: prior.ys()[best_index],
            },
            best_index,
        })
    }

    pub fn incumbent(&self) -> &[f64] {
        &self.data.xs()[self.best_index]
    }

    pub fn evaluations(&self) -> usize {
        self.trace.records.len()
    }

    /// Evaluates `x`, appends the observation and the trace record.
    pub fn evaluate<F>(&mut self, objective: &mut F, x: Vec<f64>, lower_bound: f64, stalled: bool, safe_set_size: usize) -> Result<()>
    where
        F: FnMut(&[f64]) -> std::result::Result<f64, String>,
    {
        let p_min = self.trace.p_min;
        // a failed evaluation counts as an observed unsafe outcome
        let y = objective(&x).unwrap_or(p_min - 1.0);
        self.data.push(x.clone(), y)?;
        if y > self.trace.best_performance {
            self.best_index = self.data.len() - 1;
            self.trace.best_performance = y;
            self.trace.best_params = x.clone();
        }
        self.trace.records.push(BoRecord {
            iteration: self.trace.records.len(),
            params: x,
            performance: y,
            safe: y >= p_min,
            lower_bound,
            best_so_far: self.trace.best_performance,
            stalled,
            safe_set_size,
        });
        Ok(())
    }
}

/// Safe optimization: acquisition restricted to the safe set.
pub fn run_safe_bo<F>(objective: F, prior: &Dataset, spec: &KernelSpec, cfg: &BoConfig, stream: RngStream) -> Result<BoTrace>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    run_loop(objective, prior, spec, cfg, stream, true)
}

/// Same loop with the safety filter removed: the acquisition ranges over every
/// candidate.
pub fn run_unconstrained_bo<F>(objective: F, prior: &Dataset, spec: &KernelSpec, cfg: &BoConfig, stream: RngStream) -> Result<BoTrace>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    run_loop(objective, prior, spec, cfg, stream, false)
}

fn run_loop<F>(mut objective: F, prior: &Dataset, spec: &KernelSpec, cfg: &BoConfig, stream: RngStream, filter: bool) -> Result<BoTrace>
where
    F: FnMut(&[f64]) -> std::result::Result<f64, String>,
{
    cfg.validate()?;
    if prior.dim() != spec.dim() {
        return arg_err(format!("prior dimension {} differs from kernel dimension {}", prior.dim(), spec.dim()));
    }
    let mut campaign = Campaign::new(prior, cfg.p_min)?;

    for it in 0..cfg.iterations {
        let model = GpModel::fit(&campaign.data, spec, cfg.noise_variance)?;
        let cands = candidate_batch(
            campaign.incumbent(),
            cfg.candidates.n_uniform,
            cfg.candidates.n_local,
            cfg.candidates.local_sigma,
            stream.child(it as u64),
        )?;
        let preds = model.predict_many(&cands);
        let beta = cfg.beta_at(it, cands.len());
        let pool: Vec<usize> = if filter {
            safe_indices(&preds, beta, cfg.p_min)
        } else {
            (0..cands.len()).collect()
        };
        let best = campaign.trace.best_performance;
        match argmax_acquisition(&preds, &pool, cfg.acquisition, beta, best) {
            Some(i) => {
                let lb = preds[i].bounds(beta).0;
                let x = cands[i].clone();
                campaign.evaluate(&mut objective, x, lb, false, pool.len())?;
            }
            None => {
                let x = campaign.incumbent().to_vec();
                let lb = model.confidence_bounds(&x, beta).0;
                campaign.evaluate(&mut objective, x, lb, true, 0)?;
            }
        }
    }
    Ok(campaign.trace)
}

/// Orders `{1, D}` over all dimensions: the conventional first-plus-highest
/// order combination.
pub fn standard_kernel_baseline(dim: usize, base: &crate::kernels::BaseKernelParams) -> Result<KernelSpec> {
    if dim == 0 || base.dim() != dim {
        return arg_err("standard kernel needs dim >= 1 matching the base kernel");
    }
    KernelSpec::full(base.clone(), vec![1, dim])
}
