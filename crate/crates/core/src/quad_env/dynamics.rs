use serde::{Deserialize, Serialize};

/// Physical parameters of the planar quadrotor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadParams {
    pub mass: f64,
    pub gravity: f64,
    pub arm_length: f64,
    pub inertia_yy: f64,
    /// Maximum thrust of one motor pair, N.
    pub thrust_max: f64,
    /// Control and integration step, s.
    pub dt: f64,
}

impl Default for QuadParams {
    fn default() -> Self {
        QuadParams {
            mass: 0.027,
            gravity: 9.81,
            arm_length: 0.0397,
            inertia_yy: 1.4e-5,
            thrust_max: 0.25,
            dt: 0.02,
        }
    }
}

impl QuadParams {
    /// Effective moment arm `l / sqrt(2)`.
    pub fn moment_arm(&self) -> f64 {
        self.arm_length / std::f64::consts::SQRT_2
    }

    pub fn hover_thrust(&self) -> f64 {
        0.5 * self.mass * self.gravity
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("arm_length", self.arm_length),
            ("inertia_yy", self.inertia_yy),
            ("thrust_max", self.thrust_max),
            ("dt", self.dt),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive"));
            }
        }
        if 2.0 * self.thrust_max <= self.mass * self.gravity {
            return Err("thrust_max cannot lift the vehicle".into());
        }
        Ok(())
    }
}

/// `[x, x_dot, z, z_dot, theta, theta_dot]` in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadState {
    pub x: f64,
    pub x_dot: f64,
    pub z: f64,
    pub z_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl QuadState {
    pub fn hover_at(x: f64, z: f64) -> Self {
        QuadState {
            x,
            z,
            ..Default::default()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.x_dot, self.z, self.z_dot, self.theta, self.theta_dot]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        QuadState {
            x: a[0],
            x_dot: a[1],
            z: a[2],
            z_dot: a[3],
            theta: a[4],
            theta_dot: a[5],
        }
    }
}

fn derivative(s: &[f64; 6], t1: f64, t2: f64, p: &QuadParams) -> [f64; 6] {
    let thrust = (t1 + t2) / p.mass;
    [
        s[1],
        s[4].sin() * thrust,
        s[3],
        s[4].cos() * thrust - p.gravity,
        s[5],
        (t2 - t1) * p.moment_arm() / p.inertia_yy,
    ]
}

fn axpy(s: &[f64; 6], h: f64, k: &[f64; 6]) -> [f64; 6] {
    std::array::from_fn(|i| s[i] + h * k[i])
}

/// One classical RK4 step of length `dt` with thrusts held constant.
pub fn dynamics_step(state: &QuadState, t1: f64, t2: f64, params: &QuadParams) -> QuadState {
    rk4_step(state, t1, t2, params, params.dt)
}

pub fn rk4_step(state: &QuadState, t1: f64, t2: f64, params: &QuadParams, dt: f64) -> QuadState {
    let s = state.to_array();
    let k1 = derivative(&s, t1, t2, params);
    let k2 = derivative(&axpy(&s, 0.5 * dt, &k1), t1, t2, params);
    let k3 = derivative(&axpy(&s, 0.5 * dt, &k2), t1, t2, params);
    let k4 = derivative(&axpy(&s, dt, &k3), t1, t2, params);
    QuadState::from_array(std::array::from_fn(|i| {
        s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hover_is_fixed_point() {
        let p = QuadParams::default();
        let h = p.hover_thrust();
        let mut s = QuadState::hover_at(0.3, 1.0);
        for _ in 0..1000 {
            let next = dynamics_step(&s, h, h, &p);
            for (a, b) in next.to_array().iter().zip(s.to_array()) {
                assert!((a - b).abs() <= 1e-12);
            }
            s = next;
        }
    }

    #[test]
    fn differential_thrust_spins_up() {
        let p = QuadParams::default();
        let h = p.hover_thrust();
        let delta = 1e-4;
        let s = dynamics_step(&QuadState::hover_at(0.0, 1.0), h - delta / 2.0, h + delta / 2.0, &p);
        let want = delta * p.moment_arm() / p.inertia_yy * p.dt;
        assert!((s.theta_dot - want).abs() <= want * p.dt);
    }

    #[test]
    fn free_fall_is_ballistic() {
        let p = QuadParams::default();
        let mut s = QuadState::hover_at(0.0, 10.0);
        for step in 1..=50 {
            s = dynamics_step(&s, 0.0, 0.0, &p);
            let t = step as f64 * p.dt;
            assert!((s.z - (10.0 - 0.5 * p.gravity * t * t)).abs() <= 1e-8);
            assert!((s.z_dot + p.gravity * t).abs() <= 1e-8);
        }
    }

    #[test]
    fn validation() {
        assert!(QuadParams::default().validate().is_ok());
        let weak = QuadParams {
            thrust_max: 0.1,
            ..Default::default()
        };
        assert!(weak.validate().is_err());
        assert!(QuadParams { dt: 0.0, ..Default::default() }.validate().is_err());
    }
}
