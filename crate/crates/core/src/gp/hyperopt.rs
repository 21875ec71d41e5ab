use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernel::KernelHyperparams;
use super::posterior::log_marginal_likelihood;
use super::samples::SampleSet;
use crate::error::{Error, Result};

/// Settings for the multistart coordinate search over log-hyperparameters.
#[derive(Debug, Clone)]
pub struct HyperoptOptions {
    /// Coordinate sweeps allowed per start.
    pub budget: usize,
    /// Number of starts, the first of which is always the initial guess.
    pub starts: usize,
    pub seed: u64,
    /// Also search over amplitude and noise variance.
    pub optimize_amplitude_noise: bool,
    /// Spread (in natural-log units) of the random restarts around the initial guess.
    pub spread: f64,
}

impl Default for HyperoptOptions {
    fn default() -> Self {
        HyperoptOptions {
            budget: 60,
            starts: 8,
            seed: 0,
            optimize_amplitude_noise: false,
            spread: 1.5,
        }
    }
}

struct Search<'a> {
    samples: &'a SampleSet,
    init: &'a KernelHyperparams,
    free_amplitude_noise: bool,
}

impl Search<'_> {
    fn to_hyper(&self, theta: &[f64]) -> Option<KernelHyperparams> {
        let d = self.init.dim();
        let scales = theta[..d].iter().map(|t| t.exp()).collect();
        let (amp, noise) = if self.free_amplitude_noise {
            (theta[d].exp(), theta[d + 1].exp())
        } else {
            (self.init.amplitude(), self.init.noise_variance())
        };
        KernelHyperparams::new(amp, scales, noise).ok()
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        self.to_hyper(theta)
            .and_then(|h| log_marginal_likelihood(self.samples, &h).ok())
            .filter(|v| v.is_finite())
            .unwrap_or(f64::NEG_INFINITY)
    }

    fn initial_theta(&self) -> Vec<f64> {
        let mut theta: Vec<f64> = self.init.length_scales().iter().map(|l| l.ln()).collect();
        if self.free_amplitude_noise {
            theta.push(self.init.amplitude().ln());
            theta.push(self.init.noise_variance().ln());
        }
        theta
    }

    fn coordinate_search(&self, mut theta: Vec<f64>, sweeps: usize) -> (Vec<f64>, f64) {
        let mut best = self.objective(&theta);
        let mut step = 1.0;
        for _ in 0..sweeps {
            let mut improved = false;
            for i in 0..theta.len() {
                for dir in [1.0, -1.0] {
                    let mut trial = theta.clone();
                    trial[i] += dir * step;
                    let value = self.objective(&trial);
                    if value > best {
                        best = value;
                        theta = trial;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                step *= 0.5;
                if step < 1e-3 {
                    break;
                }
            }
        }
        (theta, best)
    }
}

/// Maximizes the log marginal likelihood over the length scales (and, when
/// enabled, amplitude and noise) with a seeded multistart coordinate search.
///
/// The result never has a lower likelihood than `init`. Degenerate data (every
/// input identical) returns `init` unchanged.
pub fn optimize_hyperparams(
    samples: &SampleSet,
    init: &KernelHyperparams,
    options: &HyperoptOptions,
) -> Result<KernelHyperparams> {
    if samples.len() < 2 {
        return Err(Error::Argument(format!(
            "hyperparameter search needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    init.check_dim(samples.input_dim())?;
    let first = samples.get(0).map(|(x, _)| x.clone()).expect("nonempty");
    if samples.inputs().all(|x| *x == first) {
        log::warn!("all training inputs are identical; keeping initial hyperparameters");
        return Ok(init.clone());
    }

    let search = Search {
        samples,
        init,
        free_amplitude_noise: options.optimize_amplitude_noise,
    };
    let origin = search.initial_theta();
    let mut best_theta = origin.clone();
    let mut best_value = search.objective(&origin);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for start in 0..options.starts.max(1) {
        let theta0: Vec<f64> = if start == 0 {
            origin.clone()
        } else {
            origin
                .iter()
                .map(|t| t + rng.random_range(-options.spread..=options.spread))
                .collect()
        };
        let (theta, value) = search.coordinate_search(theta0, options.budget);
        if value > best_value {
            best_value = value;
            best_theta = theta;
        }
    }
    Ok(search.to_hyper(&best_theta).unwrap_or_else(|| init.clone()))
}
