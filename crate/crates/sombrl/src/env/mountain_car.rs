//! Continuous mountain car with a sparse goal reward.
//!
//! Position and velocity are clipped to their boxes (no wall bounce: hitting
//! a bound just saturates the coordinate). The reward is 1 at positions past
//! the goal and 0 elsewhere; episodes run to the fixed horizon regardless.

use nalgebra::DVector;
use rand::Rng;
use rand::RngCore;

use super::Env;

const POS_MIN: f64 = -1.2;
const POS_MAX: f64 = 0.6;
const VEL_MAX: f64 = 0.07;
const POWER: f64 = 0.0015;
const GRAVITY: f64 = 0.0025;
const GOAL_POS: f64 = 0.45;
const START_POS: f64 = -0.5;

pub struct MountainCar {
    pub reset_jitter: f64,
    noise_std: DVector<f64>,
    horizon: usize,
}

impl MountainCar {
    pub fn new(noise_std: f64, horizon: usize, reset_jitter: f64) -> Self {
        Self {
            reset_jitter,
            noise_std: DVector::from_element(2, noise_std),
            horizon,
        }
    }
}

impl Env for MountainCar {
    fn name(&self) -> &str {
        "mountain_car"
    }

    fn state_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn action_low(&self) -> DVector<f64> {
        DVector::from_element(1, -1.0)
    }

    fn action_high(&self) -> DVector<f64> {
        DVector::from_element(1, 1.0)
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
        let pos = if j > 0.0 {
            START_POS + rng.random_range(-j..=j)
        } else {
            START_POS
        };
        DVector::from_vec(vec![pos.clamp(POS_MIN, POS_MAX), 0.0])
    }

    fn true_dynamics(&self, state: &DVector<f64>, action: &DVector<f64>) -> DVector<f64> {
        let pos = state[0];
        let vel = state[1];
        let u = action[0].clamp(-1.0, 1.0);
        let vel_next = (vel + POWER * u - GRAVITY * (3.0 * pos).cos()).clamp(-VEL_MAX, VEL_MAX);
        let pos_next = (pos + vel_next).clamp(POS_MIN, POS_MAX);
        DVector::from_vec(vec![pos_next, vel_next])
    }

    fn reward(&self, state: &DVector<f64>, _action: &DVector<f64>) -> f64 {
        if state[0] >= GOAL_POS {
            1.0
        } else {
            0.0
        }
    }

    fn wrap(&self, mut state: DVector<f64>) -> DVector<f64> {
        state[0] = state[0].clamp(POS_MIN, POS_MAX);
        state[1] = state[1].clamp(-VEL_MAX, VEL_MAX);
        state
    }
}
