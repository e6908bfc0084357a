//! Planar quadrotor benchmark: dynamics, cascaded PID, figure-eight tracking
//! episodes and the safety-penalized performance measure.

mod controller;
mod dynamics;
mod episode;

pub use controller::{
    pid_controller, ControlOutput, DEFAULT_CONTROLLER, ControllerConfig, ControllerState, GainBounds, LoopGains, PidGains, GAIN_NAMES,
    N_GAINS,
};
pub use dynamics::{dynamics_step, rk4_step, QuadParams, QuadState};
pub use episode::{
    figure8_reference, performance, run_episode, scaled_reward, EpisodeConfig, EpisodeResult, Figure8, SafetyBox,
    StepRecord, Termination,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::RngStream;

/// Everything needed to evaluate a normalized gain vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadBenchmark {
    pub quad: QuadParams,
    pub episode: EpisodeConfig,
    pub bounds: GainBounds,
    /// Seeds the random initial velocity; fixed for a whole campaign.
    pub episode_seed: u64,
}

impl QuadBenchmark {
    pub fn validate(&self) -> Result<(), String> {
        self.quad.validate()?;
        self.episode.validate()?;
        self.bounds.validate()
    }

    /// Hover at the start of the reference with a small seeded velocity.
    pub fn initial_state(&self) -> QuadState {
        let mut rng = RngStream::new(self.episode_seed, 0x51A7).rng();
        let speed = self.episode.initial_speed_max * rng.random::<f64>();
        let heading = std::f64::consts::TAU * rng.random::<f64>();
        let (x, z) = figure8_reference(0.0, &self.episode.trajectory);
        QuadState {
            x_dot: speed * heading.cos(),
            z_dot: speed * heading.sin(),
            ..QuadState::hover_at(x, z)
        }
    }

    pub fn run(&self, gains: &PidGains) -> EpisodeResult {
        run_episode(gains, &self.quad, &self.episode, self.initial_state())
    }

    pub fn performance(&self, result: &EpisodeResult) -> f64 {
        performance(result, &self.episode)
    }

    /// Performance of the controller at the normalized point `unit`.
    pub fn objective(&self, unit: &[f64]) -> Result<f64, String> {
        let gains = self.bounds.denormalize(unit)?;
        Ok(self.performance(&self.run(&gains)))
    }
}
