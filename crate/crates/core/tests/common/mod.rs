//! Dense brute-force references for the GP, written independently of the
//! library's Cholesky path.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gpreg::gp::{KernelHyperparams, SampleSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn se(x: &DVector<f64>, y: &DVector<f64>, amp: f64, ls: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = (x[i] - y[i]) / ls[i];
        s += d * d;
    }
    amp * (-0.5 * s).exp()
}

pub struct Dense {
    pub inputs: Vec<DVector<f64>>,
    pub outputs: DMatrix<f64>,
    pub amp: f64,
    pub ls: Vec<f64>,
    pub noise: f64,
    pub a_inv: DMatrix<f64>,
}

impl Dense {
    pub fn new(inputs: Vec<DVector<f64>>, outputs: DMatrix<f64>, amp: f64, ls: Vec<f64>, noise: f64) -> Self {
        let n = inputs.len();
        let a = DMatrix::from_fn(n, n, |i, j| {
            se(&inputs[i], &inputs[j], amp, &ls) + if i == j { noise } else { 0.0 }
        });
        let a_inv = a.clone().lu().try_inverse().expect("regularized Gram matrix is invertible");
        Dense {
            inputs,
            outputs,
            amp,
            ls,
            noise,
            a_inv,
        }
    }

    fn kvec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| se(x, xi, self.amp, &self.ls)))
    }

    pub fn mean(&self, x: &DVector<f64>) -> DVector<f64> {
        let k = self.kvec(x);
        (k.transpose() * &self.a_inv * &self.outputs).transpose()
    }

    pub fn variance(&self, x: &DVector<f64>) -> f64 {
        let k = self.kvec(x);
        self.amp - (k.transpose() * &self.a_inv * &k)[(0, 0)]
    }

    pub fn log_likelihood(&self) -> f64 {
        let n = self.inputs.len() as f64;
        let ny = self.outputs.ncols() as f64;
        let a = self.a_inv.clone().lu().try_inverse().unwrap();
        let logdet = a.lu().determinant().ln();
        let quad = (self.outputs.transpose() * &self.a_inv * &self.outputs).trace();
        -0.5 * quad - 0.5 * ny * logdet - 0.5 * ny * n * (2.0 * std::f64::consts::PI).ln()
    }
}

pub struct RandomProblem {
    pub samples: SampleSet,
    pub hyper: KernelHyperparams,
    pub dense: Dense,
}

/// Random dataset with `n` points in `[-2, 2]^d`, `n_y` outputs and random hyperparameters.
pub fn random_problem(rng: &mut ChaCha8Rng, n: usize, d: usize, n_y: usize) -> RandomProblem {
    let amp = rng.random_range(0.3..3.0);
    let ls: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..2.5)).collect();
    let noise = rng.random_range(0.01..0.3);
    let inputs: Vec<DVector<f64>> = (0..n)
        .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0)))
        .collect();
    let outputs = DMatrix::from_fn(n, n_y, |_, _| rng.random_range(-3.0..3.0));
    let mut samples = SampleSet::new(d, n_y, n).unwrap();
    for (i, x) in inputs.iter().enumerate() {
        samples
            .push(x.clone(), outputs.row(i).transpose().into_owned())
            .unwrap();
    }
    let hyper = KernelHyperparams::new(amp, ls.clone(), noise).unwrap();
    RandomProblem {
        samples,
        hyper,
        dense: Dense::new(inputs, outputs, amp, ls, noise),
    }
}

pub fn random_point(rng: &mut ChaCha8Rng, d: usize, half_width: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| rng.random_range(-half_width..half_width))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Outcome of one Monte-Carlo trial of the uniform error bound.
pub struct UniformTrial {
    pub violated: bool,
    pub rho: f64,
    pub worst_ratio: f64,
}

/// Draws a function from the GP prior on `[0, width]`, observes it with noise
/// at `n` random inputs and checks the uniform bound on a grid of `grid` points.
pub fn uniform_bound_trial(seed: u64, n: usize, grid: usize, delta: f64) -> UniformTrial {
    use gpreg::bounds::{build_bound_report, covering_radius, uniform_error_bound, BoxDomain, CoveringMode};
    use rand_distr::{Distribution, StandardNormal};

    let (amp, ls, noise, width): (f64, f64, f64, f64) = (1.0, 0.5, 0.01, 4.0);
    let mut r = rng(seed);
    let grid_pts: Vec<f64> = (0..grid).map(|i| width * i as f64 / (grid - 1) as f64).collect();
    let train_pts: Vec<f64> = (0..n).map(|_| r.random_range(0.0..width)).collect();
    let all: Vec<f64> = grid_pts.iter().chain(&train_pts).copied().collect();
    let m = all.len();
    let k = DMatrix::from_fn(m, m, |i, j| {
        let d = (all[i] - all[j]) / ls;
        amp * (-0.5 * d * d).exp() + if i == j { 1e-9 } else { 0.0 }
    });
    let chol = k.cholesky().expect("prior covariance is positive definite");
    let z = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut r));
    let f = chol.l() * z;

    let inputs: Vec<DVector<f64>> = train_pts.iter().map(|x| DVector::from_element(1, *x)).collect();
    let outputs: Vec<f64> = (0..n)
        .map(|i| {
            let e: f64 = StandardNormal.sample(&mut r);
            f[grid + i] + noise.sqrt() * e
        })
        .collect();
    let samples = SampleSet::from_scalar(inputs, &outputs).unwrap();
    let hyper = KernelHyperparams::new(amp, vec![ls], noise).unwrap();
    let model = gpreg::gp::fit(&samples, &hyper).unwrap();

    let reference: Vec<DVector<f64>> = grid_pts.iter().map(|x| DVector::from_element(1, *x)).collect();
    let rho = covering_radius(&samples, &reference);
    let spacing = width / (grid - 1) as f64;
    let l_f = (1..grid).map(|i| (f[i] - f[i - 1]).abs() / spacing).fold(0.0, f64::max);
    let domain = BoxDomain::hull(reference.iter()).unwrap();
    let report = build_bound_report(&model, rho, delta, l_f, &domain, CoveringMode::DatasetSize).unwrap();
    let mut worst: f64 = 0.0;
    for (i, x) in reference.iter().enumerate() {
        let err = (f[i] - model.mean(x).unwrap()[0]).abs();
        worst = worst.max(err / uniform_error_bound(&model, x, &report));
    }
    UniformTrial {
        violated: worst > 1.0,
        rho,
        worst_ratio: worst,
    }
}
