use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::kernel::{scaled_sq_dist, KernelHyperparams};
use super::samples::SampleSet;
use crate::error::{Error, Result};

const JITTER_BASE: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

/// Fitted GP posterior over a snapshot of a [`SampleSet`].
///
/// Holds the Cholesky factor of `K + noise * I` and the representer weights
/// (one column per output channel). An empty sample set gives the prior.
#[derive(Debug, Clone)]
pub struct GpPosteriorModel {
    hyper: KernelHyperparams,
    samples: SampleSet,
    inv_scales: Vec<f64>,
    // row-major copy of the inputs, `len * dim`
    flat_inputs: Vec<f64>,
    gram: DMatrix<f64>,
    factor: Option<Cholesky<f64, Dyn>>,
    lower: DMatrix<f64>,
    weights: DMatrix<f64>,
    jitter: f64,
}

pub(crate) fn gram_matrix(samples: &SampleSet, hyper: &KernelHyperparams) -> DMatrix<f64> {
    let inv = hyper.inverse_scales();
    let xs: Vec<&DVector<f64>> = samples.inputs().collect();
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.amplitude();
        for j in 0..i {
            let v = hyper.amplitude()
                * (-scaled_sq_dist(xs[i].as_slice(), xs[j].as_slice(), &inv)).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Factorizes `gram + noise * I`, escalating diagonal jitter on failure.
pub(crate) fn factorize(
    gram: &DMatrix<f64>,
    hyper: &KernelHyperparams,
) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = gram.nrows();
    let mut jitter = 0.0;
    for attempt in 0..=JITTER_RETRIES {
        let mut a = gram.clone();
        for i in 0..n {
            a[(i, i)] += hyper.noise_variance() + jitter;
        }
        if let Some(chol) = Cholesky::new(a) {
            return Ok((chol, jitter));
        }
        jitter = if attempt == 0 {
            JITTER_BASE * hyper.amplitude()
        } else {
            jitter * 10.0
        };
    }
    let diag = gram.diagonal();
    Err(Error::Factorization {
        message: format!("Cholesky of K + noise*I failed after {JITTER_RETRIES} jitter retries"),
        size: n,
        min_diag: diag.min(),
        max_diag: diag.max(),
    })
}

fn output_matrix(samples: &SampleSet) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(samples.len(), samples.output_dim());
    for (i, u) in samples.outputs().enumerate() {
        y.row_mut(i).copy_from(&u.transpose());
    }
    y
}

/// Fits the posterior to `samples`.
pub fn fit(samples: &SampleSet, hyper: &KernelHyperparams) -> Result<GpPosteriorModel> {
    hyper.check_dim(samples.input_dim())?;
    let n = samples.len();
    let flat_inputs: Vec<f64> = samples.inputs().flat_map(|x| x.iter().copied()).collect();
    let gram = gram_matrix(samples, hyper);
    let (factor, lower, weights, jitter) = if n == 0 {
        (None, DMatrix::zeros(0, 0), DMatrix::zeros(0, samples.output_dim()), 0.0)
    } else {
        let (chol, jitter) = factorize(&gram, hyper)?;
        let weights = chol.solve(&output_matrix(samples));
        let lower = chol.l();
        (Some(chol), lower, weights, jitter)
    };
    Ok(GpPosteriorModel {
        inv_scales: hyper.inverse_scales(),
        hyper: hyper.clone(),
        samples: samples.clone(),
        flat_inputs,
        gram,
        factor,
        lower,
        weights,
        jitter,
    })
}

/// Log evidence of the outputs under the GP prior, summed over channels.
pub fn log_marginal_likelihood(samples: &SampleSet, hyper: &KernelHyperparams) -> Result<f64> {
    hyper.check_dim(samples.input_dim())?;
    let n = samples.len();
    if n == 0 {
        return Err(Error::Argument("log marginal likelihood needs at least one sample".into()));
    }
    let gram = gram_matrix(samples, hyper);
    let (chol, _) = factorize(&gram, hyper)?;
    let y = output_matrix(samples);
    let alpha = chol.solve(&y);
    let fit_term: f64 = y.iter().zip(alpha.iter()).map(|(a, b)| a * b).sum();
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let channels = samples.output_dim() as f64;
    Ok(-0.5 * fit_term
        - 0.5 * channels * log_det
        - 0.5 * channels * n as f64 * (2.0 * std::f64::consts::PI).ln())
}

impl GpPosteriorModel {
    pub fn hyper(&self) -> &KernelHyperparams {
        &self.hyper
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.samples.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.samples.output_dim()
    }

    /// Representer weights, `len x output_dim`.
    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Gram matrix `K` without the noise term.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Diagonal jitter added on top of the noise variance (0 when none was needed).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn kernel_vector_unchecked(&self, x: &[f64]) -> DVector<f64> {
        let d = self.input_dim();
        DVector::from_iterator(
            self.len(),
            self.flat_inputs
                .chunks_exact(d)
                .map(|xi| self.hyper.amplitude() * (-scaled_sq_dist(x, xi, &self.inv_scales)).exp()),
        )
    }

    /// Kernel values between `x` and every training input.
    pub fn kernel_vector(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.hyper.check_dim(x.len())?;
        Ok(self.kernel_vector_unchecked(x.as_slice()))
    }

    /// Posterior mean (one entry per output channel) and variance at `x`.
    pub fn posterior_predict(&self, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        self.hyper.check_dim(x.len())?;
        if self.is_empty() {
            return Ok((DVector::zeros(self.output_dim()), self.hyper.amplitude()));
        }
        let k = self.kernel_vector_unchecked(x.as_slice());
        let mean = self.weights.tr_mul(&k);
        Ok((mean, self.variance_from_kernel_vector(k)))
    }

    pub fn mean(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.hyper.check_dim(x.len())?;
        if self.is_empty() {
            return Ok(DVector::zeros(self.output_dim()));
        }
        Ok(self.weights.tr_mul(&self.kernel_vector_unchecked(x.as_slice())))
    }

    pub fn variance(&self, x: &DVector<f64>) -> Result<f64> {
        self.hyper.check_dim(x.len())?;
        if self.is_empty() {
            return Ok(self.hyper.amplitude());
        }
        Ok(self.variance_from_kernel_vector(self.kernel_vector_unchecked(x.as_slice())))
    }

    fn variance_from_kernel_vector(&self, k: DVector<f64>) -> f64 {
        let prior = self.hyper.amplitude();
        let v = self
            .lower
            .solve_lower_triangular(&k)
            .expect("Cholesky factor has a positive diagonal");
        (prior - v.norm_squared()).clamp(0.0, prior)
    }

    /// Jacobian of the posterior mean, `output_dim x input_dim`.
    pub fn mean_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.hyper.check_dim(x.len())?;
        let d = self.input_dim();
        let mut jac = DMatrix::zeros(self.output_dim(), d);
        for (k, xi) in self.flat_inputs.chunks_exact(d).enumerate() {
            let kv = self.hyper.amplitude()
                * (-scaled_sq_dist(x.as_slice(), xi, &self.inv_scales)).exp();
            for i in 0..d {
                let dk = -2.0 * self.inv_scales[i] * (x[i] - xi[i]) * kv;
                for c in 0..self.output_dim() {
                    jac[(c, i)] += self.weights[(k, c)] * dk;
                }
            }
        }
        Ok(jac)
    }

    /// Gradient of the first output channel's posterior mean.
    pub fn posterior_mean_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.mean_jacobian(x)?.row(0).transpose())
    }

    /// Squared RKHS norm of the posterior mean, summed over channels.
    pub fn rkhs_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let kw = &self.gram * &self.weights;
        self.weights
            .iter()
            .zip(kw.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            .max(0.0)
    }

    /// Spectral norm of `(K + noise * I)^{-1}`.
    pub fn inverse_spectral_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let mut a = self.gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += self.hyper.noise_variance() + self.jitter;
        }
        let eig = SymmetricEigen::new(a);
        1.0 / eig.eigenvalues.min()
    }

    /// Per-channel norms of the representer weights, combined as an l2 norm.
    pub fn weights_norm(&self) -> f64 {
        self.weights.norm()
    }

    /// Solves `(K + noise * I) z = rhs` with the stored factor.
    pub fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        self.factor.as_ref().map(|c| c.solve(rhs))
    }
}
