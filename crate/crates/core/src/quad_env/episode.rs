use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::controller::{pid_controller, ControllerConfig, ControllerState, PidGains};
use super::dynamics::{dynamics_step, QuadParams, QuadState};

/// Figure-eight reference `x = A sin(wt)`, `z = z_c + B sin(2wt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure8 {
    pub amplitude_x: f64,
    pub amplitude_z: f64,
    pub z_center: f64,
    pub period: f64,
}

impl Default for Figure8 {
    fn default() -> Self {
        Figure8 {
            amplitude_x: 0.75,
            amplitude_z: 0.35,
            z_center: 1.0,
            period: 6.0,
        }
    }
}

/// Episode ends early when the vehicle leaves this box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyBox {
    pub x_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub theta_max: f64,
}

impl Default for SafetyBox {
    fn default() -> Self {
        SafetyBox {
            x_max: 2.0,
            z_min: 0.0,
            z_max: 2.5,
            theta_max: 1.2,
        }
    }
}

impl SafetyBox {
    pub fn contains(&self, s: &QuadState) -> bool {
        s.x.abs() <= self.x_max && s.z >= self.z_min && s.z <= self.z_max && s.theta.abs() <= self.theta_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// State-cost weights over `(x, z, theta)`.
    pub q: [[f64; 3]; 3],
    /// Input-cost weights over `(T1, T2)`.
    pub r: [[f64; 2]; 2],
    pub l_expected: usize,
    /// Steps at the start of the episode excluded from the cost.
    pub warmup_steps: usize,
    pub lambda: f64,
    pub penalty_weight: f64,
    pub reward_scale: f64,
    pub reward_offset: f64,
    pub safety_box: SafetyBox,
    pub trajectory: Figure8,
    pub controller: ControllerConfig,
    /// Bound on the random initial speed, m/s.
    pub initial_speed_max: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            q: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.1]],
            r: [[10.0, 0.0], [0.0, 10.0]],
            l_expected: 600,
            warmup_steps: 300,
            lambda: 1.0,
            penalty_weight: 200.0,
            reward_scale: 1.6,
            reward_offset: 97.0,
            safety_box: SafetyBox::default(),
            trajectory: Figure8::default(),
            controller: ControllerConfig::default(),
            initial_speed_max: 0.05,
        }
    }
}

impl EpisodeConfig {
    pub fn q_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.q[i][j])
    }

    pub fn r_matrix(&self) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| self.r[i][j])
    }

    pub fn validate(&self) -> Result<(), String> {
        let q = self.q_matrix();
        if q != q.transpose() || q.symmetric_eigenvalues().min() < 0.0 {
            return Err("q must be symmetric positive semidefinite".into());
        }
        let r = self.r_matrix();
        if r != r.transpose() || r.symmetric_eigenvalues().min() < 0.0 {
            return Err("r must be symmetric positive semidefinite".into());
        }
        if self.l_expected == 0 {
            return Err("l_expected must be at least 1".into());
        }
        if self.warmup_steps >= self.l_expected {
            return Err("warmup_steps must be smaller than l_expected".into());
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err("lambda must lie in (0, 1]".into());
        }
        if !(self.penalty_weight >= 0.0 && self.reward_scale > 0.0 && self.reward_offset.is_finite()) {
            return Err("penalty_weight >= 0 and reward_scale > 0 required".into());
        }
        if !(self.trajectory.period > 0.0) {
            return Err("trajectory.period must be positive".into());
        }
        self.controller.validate()?;
        if !(self.initial_speed_max >= 0.0) {
            return Err("initial_speed_max must be nonnegative".into());
        }
        Ok(())
    }
}

pub fn figure8_reference(t: f64, traj: &Figure8) -> (f64, f64) {
    let w = 2.0 * std::f64::consts::PI / traj.period;
    (
        traj.amplitude_x * (w * t).sin(),
        traj.z_center + traj.amplitude_z * (2.0 * w * t).sin(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Boundary,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub state: QuadState,
    pub x_ref: f64,
    pub z_ref: f64,
    pub theta_ref: f64,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    /// Accumulated quadratic tracking cost.
    pub j_q: f64,
    /// Completed control steps.
    pub steps: usize,
    pub termination: Termination,
    pub trace: Vec<StepRecord>,
}

impl EpisodeResult {
    pub fn terminated_early(&self) -> bool {
        self.termination != Termination::Completed
    }

    /// Root-mean-square `(x, z)` tracking errors over the costed steps.
    pub fn tracking_rmse(&self, warmup: usize) -> (f64, f64) {
        let rows = self.trace.iter().skip(warmup);
        let n = rows.clone().count().max(1) as f64;
        let (sx, sz) = rows.fold((0.0, 0.0), |(sx, sz), r| {
            (sx + (r.state.x - r.x_ref).powi(2), sz + (r.state.z - r.z_ref).powi(2))
        });
        ((sx / n).sqrt(), (sz / n).sqrt())
    }
}

/// Simulates up to `l_expected` control steps. Leaving the safety box or a
/// non-finite state ends the episode; cost covers completed steps only.
pub fn run_episode(gains: &PidGains, params: &QuadParams, config: &EpisodeConfig, initial: QuadState) -> EpisodeResult {
    let q = config.q_matrix();
    let r = config.r_matrix();
    let hover = params.hover_thrust();
    let u_ref = Vector2::new(hover, hover);

    let mut state = initial;
    let mut ctl = ControllerState::default();
    let mut j_q = 0.0;
    let mut trace = Vec::with_capacity(config.l_expected);
    let mut termination = Termination::Completed;
    let mut steps = 0;

    for step in 0..config.l_expected {
        let t = step as f64 * params.dt;
        let (x_ref, z_ref) = figure8_reference(t, &config.trajectory);
        let out = pid_controller(gains, &state, (x_ref, z_ref), &ctl, params, &config.controller);
        trace.push(StepRecord {
            t,
            state,
            x_ref,
            z_ref,
            theta_ref: out.theta_ref,
            t1: out.t1,
            t2: out.t2,
        });
        if step >= config.warmup_steps {
            let e = Vector3::new(state.x - x_ref, state.z - z_ref, state.theta - out.theta_ref);
            let du = Vector2::new(out.t1, out.t2) - u_ref;
            j_q += 0.5 * e.dot(&(q * e)) + 0.5 * du.dot(&(r * du));
        }
        ctl = out.state;
        state = dynamics_step(&state, out.t1, out.t2, params);
        if !state.is_finite() {
            termination = Termination::NonFinite;
            break;
        }
        if !config.safety_box.contains(&state) {
            termination = Termination::Boundary;
            break;
        }
        steps = step + 1;
    }

    EpisodeResult {
        j_q,
        steps,
        termination,
        trace,
    }
}

/// Scaled reward `reward_scale * (-J^Q) + reward_offset`.
pub fn scaled_reward(result: &EpisodeResult, config: &EpisodeConfig) -> f64 {
    config.reward_scale * -result.j_q + config.reward_offset
}

/// Scaled reward minus the incompletion penalty
/// `penalty_weight * (1 - lambda * (L / L_expected)^2)`.
pub fn performance(result: &EpisodeResult, config: &EpisodeConfig) -> f64 {
    let ratio = result.steps as f64 / config.l_expected as f64;
    scaled_reward(result, config) - config.penalty_weight * (1.0 - config.lambda * ratio * ratio)
}
