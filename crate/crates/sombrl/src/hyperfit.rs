//! Marginal-likelihood hyperparameter fitting.
//!
//! Multi-start coordinate search in log-space over the lengthscales and the
//! signal variance: each coordinate is scanned on a coarse grid and the best
//! cell is refined by golden section, which keeps the line search reliable
//! when the likelihood slice is multimodal. The noise variance is held fixed
//! at the dataset's configured σ²: the process noise is treated as known.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::gp::{log_marginal_likelihood, Dataset};
use crate::kernel::KernelSpec;

/// Search box in the original (not log) parameter space; one range shared by
/// all lengthscales plus one for the signal variance. A collapsed range pins
/// that coordinate.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            lengthscale: (1e-2, 1e2),
            signal_variance: (1e-10, 1e2),
        }
    }
}

impl HyperBounds {
    pub fn validate(&self) -> Result<(), String> {
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale),
            ("signal_variance", self.signal_variance),
        ] {
            if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi < lo {
                return Err(format!("hyperparameter bounds for {name} must satisfy 0 < lo <= hi"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HyperFitOptions {
    pub restarts: usize,
    /// Full passes over the coordinate list per restart.
    pub sweeps: usize,
    /// Coarse scan points per coordinate before refinement.
    pub grid_points: usize,
    /// Golden-section refinement steps per coordinate.
    pub golden_iterations: usize,
}

impl Default for HyperFitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            sweeps: 2,
            grid_points: 17,
            golden_iterations: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HyperFitOutcome {
    pub spec: KernelSpec,
    /// Log marginal likelihood of `spec`, when it could be evaluated.
    pub lml: Option<f64>,
    /// True when every restart failed and `spec` is the unchanged init.
    pub warning: bool,
}

/// Minimum number of points before fitting does anything.
pub const MIN_FIT_POINTS: usize = 5;

/// Maximizes the log marginal likelihood over lengthscales and signal
/// variance inside `bounds`, starting from `init`.
///
/// Below [`MIN_FIT_POINTS`] data points the init is returned unchanged. The
/// returned spec never has a lower LML than the init (up to 1e-9): a
/// coordinate move is kept only when it improves the objective.
pub fn fit_hyperparameters(
    data: &Dataset,
    init: &KernelSpec,
    bounds: &HyperBounds,
    opts: &HyperFitOptions,
) -> HyperFitOutcome {
    if data.len() < MIN_FIT_POINTS {
        return HyperFitOutcome {
            spec: init.clone(),
            lml: log_marginal_likelihood(data, init).ok(),
            warning: false,
        };
    }

    let dim = init.input_dim;
    // Coordinates: log lengthscale per input dim, then log signal variance.
    let lo: Vec<f64> = (0..dim)
        .map(|_| bounds.lengthscale.0.ln())
        .chain([bounds.signal_variance.0.ln()])
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|_| bounds.lengthscale.1.ln())
        .chain([bounds.signal_variance.1.ln()])
        .collect();

    let eval = |theta: &[f64]| -> f64 {
        let spec = spec_from_log(init, theta);
        match log_marginal_likelihood(data, &spec) {
            Ok(v) if v.is_finite() => v,
            _ => f64::NEG_INFINITY,
        }
    };

    let init_theta: Vec<f64> = init
        .lengthscale
        .iter()
        .map(|l| l.ln())
        .chain([init.signal_variance.ln()])
        .enumerate()
        .map(|(c, v)| v.clamp(lo[c], hi[c]))
        .collect();

    let mut rng = ChaCha12Rng::seed_from_u64(0x9b97_f441);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let init_value = eval(&init_theta);
    if init_value.is_finite() {
        best = Some((init_theta.clone(), init_value));
    }

    for restart in 0..opts.restarts.max(1) {
        let mut theta: Vec<f64> = if restart == 0 {
            init_theta.clone()
        } else {
            (0..=dim).map(|c| rng.random_range(lo[c]..=hi[c])).collect()
        };
        let mut value = eval(&theta);
        if !value.is_finite() && restart > 0 {
            continue;
        }
        for _ in 0..opts.sweeps {
            for c in 0..theta.len() {
                if hi[c] - lo[c] < 1e-12 {
                    theta[c] = lo[c];
                    continue;
                }
                let (x, v) = line_maximum(
                    |x| {
                        let mut t = theta.clone();
                        t[c] = x;
                        eval(&t)
                    },
                    lo[c],
                    hi[c],
                    opts.grid_points,
                    opts.golden_iterations,
                );
                if v > value {
                    theta[c] = x;
                    value = v;
                }
            }
        }
        if value.is_finite() && best.as_ref().map_or(true, |(_, bv)| value > *bv) {
            best = Some((theta, value));
        }
    }

    match best {
        Some((theta, value)) => HyperFitOutcome {
            spec: spec_from_log(init, &theta),
            lml: Some(value),
            warning: false,
        },
        None => HyperFitOutcome {
            spec: init.clone(),
            lml: None,
            warning: true,
        },
    }
}

fn spec_from_log(init: &KernelSpec, theta: &[f64]) -> KernelSpec {
    let dim = init.input_dim;
    KernelSpec {
        family: init.family,
        lengthscale: theta[..dim].iter().map(|v| v.exp()).collect(),
        signal_variance: theta[dim].exp(),
        input_dim: dim,
    }
}

/// Coarse grid scan over `[lo, hi]` followed by golden-section refinement of
/// the best cell and its neighbors.
fn line_maximum(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    grid_points: usize,
    iterations: usize,
) -> (f64, f64) {
    let grid = grid_points.max(2);
    let step = (hi - lo) / (grid - 1) as f64;
    let mut best_i = 0;
    let mut best_x = lo;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..grid {
        let x = lo + step * i as f64;
        let v = f(x);
        if v > best_v {
            best_i = i;
            best_x = x;
            best_v = v;
        }
    }
    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = (lo + step * (best_i + 1) as f64).min(hi);
    let (x, v) = golden_section(&f, a, b, iterations);
    if v >= best_v {
        (x, v)
    } else {
        (best_x, best_v)
    }
}

/// Golden-section maximization of a unimodal-ish objective on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iterations: usize) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iterations {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}
