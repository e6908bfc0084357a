//! Cascaded PID position controller.
//!
//! The z loop commands total thrust, the x loop commands a pitch reference and
//! the pitch loop commands differential thrust. Each loop computes an
//! acceleration command from its PID terms, which is then mapped through the
//! matching plant gain (mass, gravity, or inertia over moment arm), so gains of
//! every loop share the units `1/s^2`, `1/s^3` and `1/s`. The pitch loop's
//! output is additionally multiplied by a fixed bandwidth factor.

use serde::{Deserialize, Serialize};

use super::dynamics::{QuadParams, QuadState};

pub const N_GAINS: usize = 9;

pub const GAIN_NAMES: [&str; N_GAINS] = ["x_p", "x_i", "x_d", "z_p", "z_i", "z_d", "theta_p", "theta_i", "theta_d"];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LoopGains {
    pub p: f64,
    pub i: f64,
    pub d: f64,
}

/// Physical gains of the three loops.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PidGains {
    pub x: LoopGains,
    pub z: LoopGains,
    pub theta: LoopGains,
}

impl PidGains {
    /// Order: x (P, I, D), z (P, I, D), theta (P, I, D).
    pub fn from_array(a: [f64; N_GAINS]) -> Self {
        let l = |k: usize| LoopGains {
            p: a[k],
            i: a[k + 1],
            d: a[k + 2],
        };
        PidGains {
            x: l(0),
            z: l(3),
            theta: l(6),
        }
    }

    pub fn to_array(&self) -> [f64; N_GAINS] {
        [
            self.x.p,
            self.x.i,
            self.x.d,
            self.z.p,
            self.z.i,
            self.z.d,
            self.theta.p,
            self.theta.i,
            self.theta.d,
        ]
    }
}

/// A conservative hand-tuned controller in the order of [`GAIN_NAMES`]: it
/// completes the default episode but tracks the reference loosely.
pub const DEFAULT_CONTROLLER: [f64; N_GAINS] = [2.0, 0.0, 2.0, 4.0, 0.2, 3.0, 10.0, 0.0, 5.0];

/// Box mapping physical gains to `[0, 1]^9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GainBounds {
    pub lower: [f64; N_GAINS],
    pub upper: [f64; N_GAINS],
}

impl Default for GainBounds {
    fn default() -> Self {
        let loop_upper = [20.0, 2.0, 10.0];
        GainBounds {
            lower: [0.0; N_GAINS],
            upper: std::array::from_fn(|k| loop_upper[k % 3]),
        }
    }
}

impl GainBounds {
    pub fn validate(&self) -> Result<(), String> {
        for k in 0..N_GAINS {
            if !(self.lower[k].is_finite() && self.upper[k].is_finite() && self.lower[k] < self.upper[k]) {
                return Err(format!("bounds of {} must satisfy lower < upper", GAIN_NAMES[k]));
            }
        }
        Ok(())
    }

    pub fn denormalize(&self, unit: &[f64]) -> Result<PidGains, String> {
        if unit.len() != N_GAINS {
            return Err(format!("expected {N_GAINS} normalized gains, got {}", unit.len()));
        }
        if let Some(k) = unit.iter().position(|u| !(0.0..=1.0).contains(u)) {
            return Err(format!("normalized gain {} = {} outside [0, 1]", GAIN_NAMES[k], unit[k]));
        }
        Ok(PidGains::from_array(std::array::from_fn(|k| {
            self.lower[k] + unit[k] * (self.upper[k] - self.lower[k])
        })))
    }

    pub fn normalize(&self, gains: &PidGains) -> Result<Vec<f64>, String> {
        let a = gains.to_array();
        for k in 0..N_GAINS {
            if !(self.lower[k]..=self.upper[k]).contains(&a[k]) {
                return Err(format!(
                    "gain {} = {} outside [{}, {}]",
                    GAIN_NAMES[k], a[k], self.lower[k], self.upper[k]
                ));
            }
        }
        Ok((0..N_GAINS)
            .map(|k| (a[k] - self.lower[k]) / (self.upper[k] - self.lower[k]))
            .collect())
    }
}

/// Fixed structure of the cascade: the pitch-loop bandwidth multiplier and the
/// saturations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// Multiplies the pitch-loop PID output before it is read as an angular
    /// acceleration, so the inner loop runs faster than the position loops
    /// over the same gain box.
    pub attitude_gain_scale: f64,
    /// Largest commanded pitch, rad.
    pub theta_ref_max: f64,
    /// Largest differential thrust `T2 - T1`, N.
    pub delta_thrust_max: f64,
    /// Anti-windup clamp on the position integrators, m*s.
    pub position_integral_max: f64,
    /// Anti-windup clamp on the pitch integrator, rad*s.
    pub theta_integral_max: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            attitude_gain_scale: 10.0,
            theta_ref_max: 0.6,
            delta_thrust_max: 0.1,
            position_integral_max: 1.0,
            theta_integral_max: 0.5,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("attitude_gain_scale", self.attitude_gain_scale),
            ("theta_ref_max", self.theta_ref_max),
            ("delta_thrust_max", self.delta_thrust_max),
            ("position_integral_max", self.position_integral_max),
            ("theta_integral_max", self.theta_integral_max),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("controller.{name} must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Integrator state carried between control steps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControllerState {
    pub int_x: f64,
    pub int_z: f64,
    pub int_theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlOutput {
    pub t1: f64,
    pub t2: f64,
    /// Pitch commanded by the x loop.
    pub theta_ref: f64,
    pub state: ControllerState,
}

/// One control step. Derivative terms act on measured rates; integrators
/// advance by `error * dt` and are clamped.
pub fn pid_controller(
    gains: &PidGains,
    state: &QuadState,
    reference: (f64, f64),
    ctl: &ControllerState,
    params: &QuadParams,
    controller: &ControllerConfig,
) -> ControlOutput {
    let dt = params.dt;
    let (x_ref, z_ref) = reference;

    let e_z = z_ref - state.z;
    let int_z = (ctl.int_z + e_z * dt).clamp(-controller.position_integral_max, controller.position_integral_max);
    let az = gains.z.p * e_z + gains.z.i * int_z - gains.z.d * state.z_dot;
    let total = (params.mass * (params.gravity + az)).clamp(0.0, 2.0 * params.thrust_max);

    let e_x = x_ref - state.x;
    let int_x = (ctl.int_x + e_x * dt).clamp(-controller.position_integral_max, controller.position_integral_max);
    let ax = gains.x.p * e_x + gains.x.i * int_x - gains.x.d * state.x_dot;
    let theta_ref = (ax / params.gravity).clamp(-controller.theta_ref_max, controller.theta_ref_max);

    let e_theta = theta_ref - state.theta;
    let int_theta = (ctl.int_theta + e_theta * dt).clamp(-controller.theta_integral_max, controller.theta_integral_max);
    let alpha = controller.attitude_gain_scale
        * (gains.theta.p * e_theta + gains.theta.i * int_theta - gains.theta.d * state.theta_dot);
    let delta = (alpha * params.inertia_yy / params.moment_arm()).clamp(-controller.delta_thrust_max, controller.delta_thrust_max);

    ControlOutput {
        t1: (0.5 * (total - delta)).clamp(0.0, params.thrust_max),
        t2: (0.5 * (total + delta)).clamp(0.0, params.thrust_max),
        theta_ref,
        state: ControllerState { int_x, int_z, int_theta },
    }
}
