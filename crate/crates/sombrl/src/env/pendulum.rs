//! Torque-limited pendulum swing-up.
//!
//! State (θ, θ̇) with θ = 0 upright, integrated by semi-implicit Euler:
//! θ̈ = (g/l)·sin θ + u/(m l²) − c·θ̇. The angle is always reported in
//! [−π, π), and residual targets unwrap the angle difference so the learned
//! dynamics never see the ±π seam.

use nalgebra::DVector;
use rand::Rng;
use rand::RngCore;

use super::Env;

const GRAVITY: f64 = 9.81;
const LENGTH: f64 = 1.0;
const MASS: f64 = 1.0;
const MAX_TORQUE: f64 = 2.0;
/// Raw reward (1 + cos θ)/2 − 0.001 u² has range [−0.004, 1]; this affine
/// map sends it exactly onto [0, 1].
const REWARD_SHIFT: f64 = 0.004;
const REWARD_SCALE: f64 = 1.004;

pub struct Pendulum {
    pub dt: f64,
    pub damping: f64,
    pub reset_jitter: f64,
    noise_std: DVector<f64>,
    horizon: usize,
}

impl Pendulum {
    pub fn new(dt: f64, noise_std: f64, horizon: usize, reset_jitter: f64) -> Self {
        Self {
            dt,
            damping: 0.05,
            reset_jitter,
            noise_std: DVector::from_element(2, noise_std),
            horizon,
        }
    }
}

/// Maps an angle into [−π, π); values already in range pass through
/// unchanged so the map is bit-exact idempotent.
pub fn wrap_angle(theta: f64) -> f64 {
    use std::f64::consts::PI;
    if (-PI..PI).contains(&theta) {
        theta
    } else {
        (theta + PI).rem_euclid(2.0 * PI) - PI
    }
}

impl Env for Pendulum {
    fn name(&self) -> &str {
        "pendulum"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_low(&self) -> DVector<f64> {
        DVector::from_element(1, -MAX_TORQUE)
    }

    fn action_high(&self) -> DVector<f64> {
        DVector::from_element(1, MAX_TORQUE)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn noise_std(&self) -> &DVector<f64> {
        &self.noise_std
    }

    fn r_max(&self) -> f64 {
        1.0
    }

    fn reset(&self, rng: &mut dyn RngCore) -> DVector<f64> {
        let j = self.reset_jitter;
        let (theta, omega) = if j > 0.0 {
            (
                std::f64::consts::PI + rng.random_range(-j..=j),
                rng.random_range(-j..=j),
            )
        } else {
            (std::f64::consts::PI, 0.0)
        };
        DVector::from_vec(vec![wrap_angle(theta), omega])
    }

    fn true_dynamics(&self, state: &DVector<f64>, action: &DVector<f64>) -> DVector<f64> {
        let theta = state[0];
        let omega = state[1];
        let u = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let accel = (GRAVITY / LENGTH) * theta.sin() + u / (MASS * LENGTH * LENGTH)
            - self.damping * omega;
        let omega_next = omega + self.dt * accel;
        let theta_next = theta + self.dt * omega_next;
        DVector::from_vec(vec![wrap_angle(theta_next), omega_next])
    }

    fn reward(&self, state: &DVector<f64>, action: &DVector<f64>) -> f64 {
        let u = action[0].clamp(-MAX_TORQUE, MAX_TORQUE);
        let raw = 0.5 * (1.0 + state[0].cos()) - 0.001 * u * u;
        ((raw + REWARD_SHIFT) / REWARD_SCALE).clamp(0.0, 1.0)
    }

    fn wrap(&self, mut state: DVector<f64>) -> DVector<f64> {
        state[0] = wrap_angle(state[0]);
        state
    }

    fn residual(&self, state: &DVector<f64>, next: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![wrap_angle(next[0] - state[0]), next[1] - state[1]])
    }

    fn apply_residual(&self, state: &DVector<f64>, residual: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![wrap_angle(state[0] + residual[0]), state[1] + residual[1]])
    }
}
