//! Certified GP error bounds and the regulation-error diagnostics built on them.
//!
//! All functions are pure. The kernel profile `k(r)` used for ball-based bounds
//! is the squared exponential along the shortest length scale, which lower-bounds
//! the kernel for every pair of points at Euclidean distance `r`.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gp::{kernel_gradient, GpPosteriorModel, KernelHyperparams, SampleSet};

/// Axis-aligned box in input space.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
}

impl BoxDomain {
    /// Bounding box of the given points.
    pub fn hull<'a>(points: impl IntoIterator<Item = &'a DVector<f64>>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let (mut lo, mut hi) = (first.clone(), first.clone());
        for p in iter {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Some(BoxDomain { lo, hi })
    }

    /// Moves every face outward by `fraction` of the width (at least `fraction * 1e-6`),
    /// so `inflate(0.05)` grows each side length by 10%.
    pub fn inflate(&self, fraction: f64) -> Self {
        let pad = (&self.hi - &self.lo).map(|w| (w * fraction).max(fraction * 1e-6));
        BoxDomain {
            lo: &self.lo - &pad,
            hi: &self.hi + &pad,
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.hi - &self.lo
    }
}

/// How the covering number entering `beta` is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoveringMode {
    /// Use the number of stored samples.
    DatasetSize,
    /// Count grid cells of the domain needed for a `rho`-cover.
    DomainGrid,
}

/// Whether the uniform bound scales the posterior variance or its square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpreadTerm {
    Variance,
    /// Standard deviation; not the printed form, offered for comparison.
    StdDev,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub rho: f64,
    pub delta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub l_mean: f64,
    pub l_var: f64,
    pub l_f: f64,
    pub covering_count: u64,
    pub noise_floor: f64,
}

/// `k(0) - k(rho)^2 / (k(0) + noise / |B_rho(x)|)`, or `k(0)` with no data in the ball.
pub fn local_variance_bound(model: &GpPosteriorModel, x: &DVector<f64>, rho: f64) -> f64 {
    let hyper = model.hyper();
    let k0 = hyper.amplitude();
    let inside = model
        .samples()
        .inputs()
        .filter(|xi| (*xi - x).norm() <= rho)
        .count();
    if inside == 0 {
        return k0;
    }
    let kr = hyper.profile(rho);
    k0 - kr * kr / (k0 + hyper.noise_variance() / inside as f64)
}

/// Grid estimate of the kernel Lipschitz constant: the largest gradient norm
/// over differences spanning the domain.
pub fn kernel_lipschitz_grid(hyper: &KernelHyperparams, domain: &BoxDomain, per_axis: usize) -> f64 {
    let widths = domain.widths();
    let origin = DVector::zeros(domain.dim());
    let mut best: f64 = 0.0;
    // the gradient norm of a separable profile peaks on a coordinate axis
    for axis in 0..domain.dim() {
        for i in 0..=per_axis {
            let mut d = DVector::zeros(domain.dim());
            d[axis] = widths[axis] * i as f64 / per_axis as f64;
            let g = kernel_gradient(&d, &origin, hyper).expect("dimensions match");
            best = best.max(g.norm());
        }
    }
    best
}

/// Lipschitz constants of the posterior mean and variance.
pub fn posterior_lipschitz_constants(
    model: &GpPosteriorModel,
    rho: f64,
    _domain: &BoxDomain,
) -> Result<(f64, f64)> {
    if model.is_empty() {
        return Err(Error::Argument("Lipschitz constants need a fitted, nonempty model".into()));
    }
    let hyper = model.hyper();
    let l_k = hyper.lipschitz_constant();
    let n = model.len() as f64;
    let l_mean = l_k * n.sqrt() * model.weights_norm();
    let max_k = hyper.amplitude();
    let l_var = 2.0 * rho * l_k * (1.0 + n * model.inverse_spectral_norm() * max_k);
    Ok((l_mean, l_var))
}

pub fn confidence_parameters(
    rho: f64,
    delta: f64,
    covering_count: u64,
    l_f: f64,
    l_mean: f64,
    l_var: f64,
) -> Result<(f64, f64)> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if covering_count == 0 {
        return Err(Error::Argument("covering count must be positive".into()));
    }
    if rho < 0.0 || l_f < 0.0 || l_mean < 0.0 || l_var < 0.0 {
        return Err(Error::Argument("rho and Lipschitz constants must be nonnegative".into()));
    }
    let beta = 2.0 * (covering_count as f64 / delta).ln();
    let alpha = (l_f + l_mean) * rho + (beta * l_var * rho).max(0.0).sqrt();
    Ok((beta, alpha))
}

/// Number of axis-aligned cells of diagonal `2 rho` covering the domain.
pub fn grid_covering_count(domain: &BoxDomain, rho: f64) -> u64 {
    let side = 2.0 * rho / (domain.dim() as f64).sqrt();
    domain
        .widths()
        .iter()
        .map(|w| ((w / side).ceil() as u64).max(1))
        .fold(1u64, |acc, c| acc.saturating_mul(c))
}

/// Assembles the report for ball radius `rho`.
pub fn build_bound_report(
    model: &GpPosteriorModel,
    rho: f64,
    delta: f64,
    l_f: f64,
    domain: &BoxDomain,
    covering: CoveringMode,
) -> Result<BoundReport> {
    let (l_mean, l_var) = posterior_lipschitz_constants(model, rho, domain)?;
    let covering_count = match covering {
        CoveringMode::DatasetSize => model.len() as u64,
        CoveringMode::DomainGrid => grid_covering_count(domain, rho.max(f64::MIN_POSITIVE)),
    };
    let (beta, alpha) = confidence_parameters(rho, delta, covering_count, l_f, l_mean, l_var)?;
    let hyper = model.hyper();
    let noise_floor = noise_floor(hyper, beta);
    Ok(BoundReport {
        rho,
        delta,
        beta,
        alpha,
        l_mean,
        l_var,
        l_f,
        covering_count,
        noise_floor,
    })
}

pub fn uniform_error_bound(model: &GpPosteriorModel, x: &DVector<f64>, report: &BoundReport) -> f64 {
    uniform_error_bound_with(model, x, report, SpreadTerm::Variance)
}

pub fn uniform_error_bound_with(
    model: &GpPosteriorModel,
    x: &DVector<f64>,
    report: &BoundReport,
    spread: SpreadTerm,
) -> f64 {
    let var = model.variance(x).expect("query has the model dimension");
    let s = match spread {
        SpreadTerm::Variance => var,
        SpreadTerm::StdDev => var.sqrt(),
    };
    report.beta.sqrt() * s + report.alpha
}

/// Largest distance from a reference point to its nearest stored input
/// (max-min convention). Infinite when the dataset is empty.
pub fn covering_radius(dataset: &SampleSet, reference_points: &[DVector<f64>]) -> f64 {
    if dataset.is_empty() {
        log::warn!("covering radius of an empty dataset is infinite");
        return f64::INFINITY;
    }
    reference_points
        .iter()
        .map(|p| {
            dataset
                .inputs()
                .map(|x| (x - p).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// `sqrt(beta) noise / (k(0) + noise)`.
pub fn noise_floor(hyper: &KernelHyperparams, beta: f64) -> f64 {
    let sn2 = hyper.noise_variance();
    beta.sqrt() * sn2 / (hyper.amplitude() + sn2)
}

/// Regulation-error bound at coverage radius `rho_star` and the noise floor it
/// approaches, both without the unknown closed-loop gain.
///
/// The variance Lipschitz term is linear in the radius, so it is rescaled from
/// `report.rho` to `rho_star`.
pub fn regulation_error_bound(
    hyper: &KernelHyperparams,
    rho_star: f64,
    report: &BoundReport,
) -> (f64, f64) {
    let k0 = hyper.amplitude();
    let sn2 = hyper.noise_variance();
    let kr = hyper.profile(rho_star);
    let l_var = if report.rho > 0.0 {
        report.l_var / report.rho * rho_star
    } else {
        0.0
    };
    let alpha = (report.l_f + report.l_mean) * rho_star + (report.beta * l_var * rho_star).sqrt();
    let bound = report.beta.sqrt() * (k0 - kr * kr / (k0 + sn2)) + alpha;
    (bound, noise_floor(hyper, report.beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::fit;
    use approx::assert_relative_eq;

    fn hyper() -> KernelHyperparams {
        KernelHyperparams::new(1.0, vec![1.0, 2.0], 0.01).unwrap()
    }

    #[test]
    fn variance_bound_single_point_limit() {
        let x = DVector::from_vec(vec![0.2, 0.1]);
        let model = fit(&SampleSet::from_scalar(vec![x.clone()], &[1.0]).unwrap(), &hyper()).unwrap();
        assert_relative_eq!(local_variance_bound(&model, &x, 1e-9), 0.01 / 1.01, epsilon = 1e-12);
        assert_relative_eq!(local_variance_bound(&model, &x, 1e-9), 0.009901, epsilon = 1e-6);
        let far = DVector::from_vec(vec![10.0, 0.0]);
        assert_eq!(local_variance_bound(&model, &far, 1.0), 1.0);
    }

    #[test]
    fn confidence_parameter_values() {
        let (beta, alpha) = confidence_parameters(0.0, 0.01, 200, 1.0, 2.0, 3.0).unwrap();
        assert_relative_eq!(beta, 2.0 * 20000f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(beta, 19.8070, epsilon = 1e-4);
        assert_eq!(alpha, 0.0);
        let (beta1, _) = confidence_parameters(0.1, 1.0 - 1e-12, 1, 0.0, 0.0, 0.0).unwrap();
        assert!(beta1.abs() < 1e-10);
        assert!(confidence_parameters(0.1, 1.0, 10, 0.0, 0.0, 0.0).is_err());
        assert!(confidence_parameters(0.1, 0.0, 10, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn covering_radius_cases() {
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        let data = SampleSet::from_scalar(vec![DVector::zeros(2)], &[0.0]).unwrap();
        assert_eq!(covering_radius(&data, &[e1.clone(), &e1 * 2.0]), 2.0);
        assert_eq!(covering_radius(&data, &[DVector::zeros(2)]), 0.0);
        let empty = SampleSet::new(2, 1, 3).unwrap();
        assert_eq!(covering_radius(&empty, &[e1]), f64::INFINITY);
    }

    #[test]
    fn noise_floor_reference_value() {
        let h = KernelHyperparams::new(1.0, vec![1.0], 0.01).unwrap();
        let (beta, _) = confidence_parameters(0.0, 0.01, 200, 0.0, 0.0, 0.0).unwrap();
        let report = BoundReport {
            rho: 0.0,
            delta: 0.01,
            beta,
            alpha: 0.0,
            l_mean: 0.0,
            l_var: 0.0,
            l_f: 0.0,
            covering_count: 200,
            noise_floor: noise_floor(&h, beta),
        };
        let (bound, floor) = regulation_error_bound(&h, 0.0, &report);
        assert_relative_eq!(floor, 0.04406, epsilon = 1e-5);
        assert_relative_eq!(bound, floor, epsilon = 1e-15);
    }

    #[test]
    fn noise_floor_differs_from_limit_when_amplitude_not_one() {
        let h = KernelHyperparams::new(2.0, vec![1.0], 0.01).unwrap();
        let report = BoundReport {
            rho: 0.5,
            delta: 0.05,
            beta: 4.0,
            alpha: 0.0,
            l_mean: 0.0,
            l_var: 0.0,
            l_f: 0.0,
            covering_count: 10,
            noise_floor: noise_floor(&h, 4.0),
        };
        let (bound, floor) = regulation_error_bound(&h, 0.0, &report);
        assert_relative_eq!(bound, 2.0 * 2.0 * 0.01 / 2.01, epsilon = 1e-14);
        assert_relative_eq!(floor, 2.0 * 0.01 / 2.01, epsilon = 1e-14);
    }

    #[test]
    fn zero_beta_alpha_gives_zero_bound() {
        let model = fit(&SampleSet::new(2, 1, 2).unwrap(), &hyper()).unwrap();
        let report = BoundReport {
            rho: 0.1,
            delta: 0.5,
            beta: 0.0,
            alpha: 0.0,
            l_mean: 0.0,
            l_var: 0.0,
            l_f: 0.0,
            covering_count: 1,
            noise_floor: 0.0,
        };
        let x = DVector::from_vec(vec![100.0, 0.0]);
        assert_eq!(uniform_error_bound(&model, &x, &report), 0.0);
        let report = BoundReport { beta: 9.0, alpha: 0.5, ..report };
        assert_relative_eq!(uniform_error_bound(&model, &x, &report), 3.0 + 0.5, epsilon = 1e-14);
    }

    #[test]
    fn grid_lipschitz_agrees_with_closed_form() {
        let h = KernelHyperparams::new(1.3, vec![0.4, 2.0, 1.0], 0.01).unwrap();
        let domain = BoxDomain {
            lo: DVector::from_element(3, -3.0),
            hi: DVector::from_element(3, 3.0),
        };
        let grid = kernel_lipschitz_grid(&h, &domain, 6000);
        assert!(grid <= h.lipschitz_constant() * (1.0 + 1e-12));
        assert_relative_eq!(grid, h.lipschitz_constant(), max_relative = 1e-5);
    }

    #[test]
    fn zero_outputs_have_zero_mean_lipschitz() {
        let xs = vec![DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![1.0, -1.0])];
        let model = fit(&SampleSet::from_scalar(xs.clone(), &[0.0, 0.0]).unwrap(), &hyper()).unwrap();
        let domain = BoxDomain::hull(&xs).unwrap().inflate(0.1);
        let (l_mean, l_var) = posterior_lipschitz_constants(&model, 0.3, &domain).unwrap();
        assert_eq!(l_mean, 0.0);
        let (_, l_var2) = posterior_lipschitz_constants(&model, 0.6, &domain).unwrap();
        assert_relative_eq!(l_var2, 2.0 * l_var, epsilon = 1e-15);
        let empty = fit(&SampleSet::new(2, 1, 2).unwrap(), &hyper()).unwrap();
        assert!(posterior_lipschitz_constants(&empty, 0.3, &domain).is_err());
    }
}
