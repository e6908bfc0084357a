use rand::Rng;
use tuner_core::quad_env::*;
use tuner_core::sampling::RngStream;

fn bench(seed: u64) -> QuadBenchmark {
    QuadBenchmark {
        quad: QuadParams::default(),
        episode: EpisodeConfig::default(),
        bounds: GainBounds::default(),
        episode_seed: seed,
    }
}

fn max_abs_diff(a: &QuadState, b: &QuadState) -> f64 {
    a.to_array()
        .iter()
        .zip(b.to_array())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Integrates piecewise-constant thrusts, one pair per control period, with
/// `substeps` RK4 steps per period.
fn integrate(start: QuadState, thrusts: &[(f64, f64)], params: &QuadParams, substeps: usize) -> QuadState {
    let h = params.dt / substeps as f64;
    let mut s = start;
    for &(t1, t2) in thrusts {
        for _ in 0..substeps {
            s = rk4_step(&s, t1, t2, params, h);
        }
    }
    s
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    let p = QuadParams::default();
    let mut rng = RngStream::new(11, 0).rng();
    let hover = p.hover_thrust();
    let thrusts: Vec<(f64, f64)> = (0..25)
        .map(|_| {
            let common = hover * (1.0 + 0.3 * (rng.random::<f64>() - 0.5));
            let diff = 2e-4 * (rng.random::<f64>() - 0.5);
            (common - diff, common + diff)
        })
        .collect();
    let start = QuadState {
        x_dot: 0.3,
        z_dot: -0.2,
        theta: 0.2,
        theta_dot: 1.0,
        ..QuadState::hover_at(0.0, 1.0)
    };
    let reference = integrate(start, &thrusts, &p, 100);
    let coarse = max_abs_diff(&integrate(start, &thrusts, &p, 1), &reference);
    let fine = max_abs_diff(&integrate(start, &thrusts, &p, 2), &reference);
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "error ratio {ratio} (coarse {coarse:e}, fine {fine:e})");
}

#[test]
fn hover_drift_over_thousand_steps() {
    let p = QuadParams::default();
    let mut s = QuadState::hover_at(0.3, 1.2);
    let h = p.hover_thrust();
    for _ in 0..1000 {
        let next = dynamics_step(&s, h, h, &p);
        assert!(max_abs_diff(&next, &s) <= 1e-12);
        s = next;
    }
}

#[test]
fn frozen_reference_tracks_tightly() {
    let b = bench(0);
    let mut frozen = b.clone();
    frozen.episode.trajectory.amplitude_x = 0.0;
    frozen.episode.trajectory.amplitude_z = 0.0;
    let stable = PidGains::from_array(DEFAULT_CONTROLLER);
    let still = frozen.run(&stable);
    assert!(!still.terminated_early());
    assert_eq!(still.steps, frozen.episode.l_expected);
    let idle = b.run(&PidGains::default());
    assert!(still.j_q < 1.0, "{}", still.j_q);
    assert!(still.j_q < idle.j_q);
}

#[test]
fn zero_gains_hover_through_the_episode() {
    let b = bench(0);
    let r = b.run(&PidGains::default());
    assert!(!r.terminated_early());
    let (ex, _) = r.tracking_rmse(b.episode.warmup_steps);
    assert!(ex > 0.3, "{ex}");
    assert!(r.trace.iter().all(|s| s.t1 == s.t2 && (s.t1 - b.quad.hover_thrust()).abs() < 1e-15));
}

#[test]
fn negative_damping_crashes() {
    let b = bench(0);
    let wild = PidGains::from_array([5.0, 0.0, -50.0, 5.0, 0.0, -50.0, 10.0, 0.0, -20.0]);
    let r = b.run(&wild);
    assert!(r.terminated_early());
    assert_eq!(r.termination, Termination::Boundary);
    assert!(r.steps < b.episode.l_expected);
    assert!(b.performance(&r) < 0.0);
}

#[test]
fn default_controller_is_a_safe_seed() {
    let b = bench(0);
    let unit = b.bounds.normalize(&PidGains::from_array(DEFAULT_CONTROLLER)).unwrap();
    let p = b.objective(&unit).unwrap();
    assert!(p > 0.0 && p < 20.0, "{p}");
}

#[test]
fn random_sweep_sign_contract_and_cost() {
    let b = bench(0);
    let mut rng = RngStream::new(2024, 7).rng();
    let (mut crashed, mut completed) = (0, 0);
    for _ in 0..200 {
        let unit: Vec<f64> = (0..N_GAINS).map(|_| rng.random()).collect();
        let r = b.run(&b.bounds.denormalize(&unit).unwrap());
        let p = b.performance(&r);
        assert!(r.j_q >= 0.0);
        assert_eq!(r.terminated_early(), r.steps < b.episode.l_expected);
        if r.terminated_early() {
            crashed += 1;
            assert!(p < 0.0, "crash at step {} scored {p}", r.steps);
        } else {
            completed += 1;
            if scaled_reward(&r, &b.episode) > 0.0 {
                assert!(p > 0.0);
            }
        }
    }
    assert!(crashed > 0 && completed > 0);
}

#[test]
fn episodes_are_bit_identical() {
    let b = bench(3);
    let g = PidGains::from_array(DEFAULT_CONTROLLER);
    assert_eq!(b.run(&g), b.run(&g));
}
