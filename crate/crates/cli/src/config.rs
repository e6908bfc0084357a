//! Experiment configuration: one JSON document, every section optional,
//! unknown keys rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use tuner_core::kernel_selection::NystromConfig;
use tuner_core::quad_env::{EpisodeConfig, GainBounds, PidGains, QuadBenchmark, QuadParams, DEFAULT_CONTROLLER, N_GAINS};
use tuner_core::safe_bo::BoConfig;
use tuner_core::BaseKernelParams;

use crate::error::{config_err, CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub quad: QuadParams,
    pub episode: EpisodeConfig,
    pub gains_bounds: GainBounds,
    pub kernel: KernelSection,
    pub nystrom: NystromSection,
    pub bo: BoConfig,
    pub cli: CliSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            quad: QuadParams::default(),
            episode: EpisodeConfig::default(),
            gains_bounds: GainBounds::default(),
            kernel: KernelSection::default(),
            nystrom: NystromSection::default(),
            bo: BoConfig::default(),
            cli: CliSection::default(),
        }
    }
}

/// Base kernel, GP prior variance, and the kernel-selection settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Lengthscale of every base kernel, in normalized coordinates.
    pub lengthscale: f64,
    pub signal_variance: f64,
    /// Prior variance `k(x, x)` of every optimization kernel, shared by all
    /// methods. Far above the spread of the performance values so that the
    /// lower confidence bound falls off steeply away from observed points.
    pub prior_variance: f64,
    /// Orders kept by the ranking.
    pub top_m: usize,
    /// Dimensions kept by the reduced kernel.
    pub dim_keep: usize,
    pub forest_trees: usize,
    pub forest_min_leaf: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        KernelSection {
            lengthscale: 0.05,
            signal_variance: 1.0,
            prior_variance: 1e6,
            top_m: 3,
            dim_keep: N_GAINS,
            forest_trees: 100,
            forest_min_leaf: 2,
        }
    }
}

impl KernelSection {
    pub fn base(&self, dim: usize) -> Result<BaseKernelParams> {
        Ok(BaseKernelParams::uniform(dim, self.lengthscale, self.signal_variance)?)
    }
}

/// Nystrom settings; `c` and `k` default to `ceil(0.6 l)` and `ceil(c / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NystromSection {
    pub c: Option<usize>,
    pub k: Option<usize>,
    pub mu: f64,
    pub trials: usize,
}

impl Default for NystromSection {
    fn default() -> Self {
        let d = NystromConfig::for_size(1);
        NystromSection {
            c: None,
            k: None,
            mu: d.mu,
            trials: d.trials,
        }
    }
}

impl NystromSection {
    pub fn resolve(&self, l: usize) -> NystromConfig {
        let d = NystromConfig::for_size(l);
        let c = self.c.unwrap_or(d.c);
        NystromConfig {
            c,
            k: self.k.unwrap_or_else(|| c.div_ceil(2)),
            mu: self.mu,
            trials: self.trials,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Safe BO with the selected reduced kernel.
    Ours,
    /// Safe BO with orders {1, D}.
    Standard,
    /// Safe line search on random one-dimensional subspaces.
    Linebo,
    /// The `ours` kernel without the safety filter.
    Unconstrained,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Standard => "standard",
            Method::Linebo => "linebo",
            Method::Unconstrained => "unconstrained",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliSection {
    /// Master seed; `--seed` overrides it.
    pub seed: u64,
    /// Worker threads, 0 = all cores; `--threads` overrides it.
    pub threads: usize,
    pub n_prior: usize,
    /// Seeds the initial velocity of every episode. Fixed per benchmark so
    /// priors, campaigns and simulations see the same episode.
    pub episode_seed: u64,
    /// Physical gains of the default controller, the campaign's safe seed.
    pub default_gains: [f64; N_GAINS],
    /// Appends the default controller and its performance to the prior
    /// before tuning.
    pub include_default_seed: bool,
    pub method: Method,
    /// Explicit kernel orders over all dimensions instead of a selection file.
    pub kernel_orders: Option<Vec<usize>>,
}

impl Default for CliSection {
    fn default() -> Self {
        CliSection {
            seed: 0,
            threads: 0,
            n_prior: 36,
            episode_seed: 0,
            default_gains: DEFAULT_CONTROLLER,
            include_default_seed: true,
            method: Method::Ours,
            kernel_orders: None,
        }
    }
}

impl Config {
    /// Parses a JSON document; errors carry the path of the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("at `{path}`: {}", e.inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let section = |name: &str, r: std::result::Result<(), String>| r.map_err(|m| CliError::Config(format!("{name}: {m}")));
        section("quad", self.quad.validate())?;
        section("episode", self.episode.validate())?;
        section("gains_bounds", self.gains_bounds.validate())?;
        self.bo.validate().map_err(|e| CliError::Config(format!("bo: {e}")))?;
        let k = &self.kernel;
        if !(k.prior_variance > 0.0 && k.prior_variance.is_finite()) {
            return config_err("kernel.prior_variance must be positive");
        }
        k.base(N_GAINS).map_err(|e| CliError::Config(format!("kernel: {e}")))?;
        if k.top_m == 0 || k.top_m > N_GAINS {
            return config_err(format!("kernel.top_m must lie in 1..={N_GAINS}"));
        }
        if k.dim_keep == 0 || k.dim_keep > N_GAINS {
            return config_err(format!("kernel.dim_keep must lie in 1..={N_GAINS}"));
        }
        if k.forest_trees == 0 || k.forest_min_leaf == 0 {
            return config_err("kernel.forest_trees and kernel.forest_min_leaf must be at least 1");
        }
        if !(self.nystrom.mu > 0.0) || self.nystrom.trials == 0 {
            return config_err("nystrom.mu must be positive and nystrom.trials at least 1");
        }
        if self.cli.n_prior == 0 {
            return config_err("cli.n_prior must be at least 1");
        }
        self.gains_bounds
            .normalize(&PidGains::from_array(self.cli.default_gains))
            .map_err(|m| CliError::Config(format!("cli.default_gains: {m}")))?;
        if let Some(orders) = &self.cli.kernel_orders {
            check_orders(orders)?;
        }
        Ok(())
    }

    pub fn benchmark(&self) -> QuadBenchmark {
        QuadBenchmark {
            quad: self.quad,
            episode: self.episode.clone(),
            bounds: self.gains_bounds.clone(),
            episode_seed: self.cli.episode_seed,
        }
    }

    /// The default controller in normalized coordinates.
    pub fn default_point(&self) -> Vec<f64> {
        self.gains_bounds
            .normalize(&PidGains::from_array(self.cli.default_gains))
            .expect("validated")
    }
}

pub fn check_orders(orders: &[usize]) -> Result<()> {
    if orders.is_empty() || orders.iter().any(|&n| n == 0 || n > N_GAINS) {
        return config_err(format!("kernel orders must be a nonempty list within 1..={N_GAINS}"));
    }
    Ok(())
}

/// Parses `"1,2,3"`.
pub fn parse_orders(list: &str) -> Result<Vec<usize>> {
    let orders = list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("invalid kernel order `{}`", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    check_orders(&orders)?;
    Ok(orders)
}
