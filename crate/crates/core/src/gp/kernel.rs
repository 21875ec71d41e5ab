use nalgebra::DVector;

use crate::error::{Error, Result};

/// Hyperparameters of the squared-exponential kernel
/// `k(x, x') = amplitude * exp(-sum_i (x_i - x'_i)^2 / (2 l_i^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelHyperparams {
    amplitude: f64,
    length_scales: Vec<f64>,
    noise_variance: f64,
}

impl KernelHyperparams {
    pub fn new(amplitude: f64, length_scales: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Argument(format!("amplitude must be > 0, got {amplitude}")));
        }
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::Argument(format!(
                "noise variance must be > 0, got {noise_variance}"
            )));
        }
        if length_scales.is_empty() {
            return Err(Error::Argument("at least one length scale is required".into()));
        }
        if let Some(bad) = length_scales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Argument(format!("length scales must be > 0, got {bad}")));
        }
        Ok(KernelHyperparams {
            amplitude,
            length_scales,
            noise_variance,
        })
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Input dimension.
    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    /// Diagonal of the inverse of `diag(2 l_i^2)`.
    pub(crate) fn inverse_scales(&self) -> Vec<f64> {
        self.length_scales.iter().map(|l| 0.5 / (l * l)).collect()
    }

    /// Value of the isotropic profile at distance `r`, measured in units of the
    /// smallest length scale (the worst case over directions).
    pub fn profile(&self, r: f64) -> f64 {
        let l = self.min_length_scale();
        self.amplitude * (-(r * r) / (2.0 * l * l)).exp()
    }

    pub fn min_length_scale(&self) -> f64 {
        self.length_scales.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_length_scale(&self) -> f64 {
        self.length_scales.iter().copied().fold(0.0, f64::max)
    }

    /// Lipschitz constant of the kernel: the largest gradient magnitude of the
    /// profile, attained at distance equal to the shortest length scale.
    pub fn lipschitz_constant(&self) -> f64 {
        self.amplitude * (2.0 / std::f64::consts::E).sqrt()
            / (std::f64::consts::SQRT_2 * self.min_length_scale())
    }

    pub(crate) fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::Argument(format!(
                "input has dimension {n}, kernel expects {}",
                self.dim()
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn scaled_sq_dist(x: &[f64], y: &[f64], inv_scales: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .zip(inv_scales)
        .map(|((a, b), s)| {
            let d = a - b;
            d * d * s
        })
        .sum()
}

pub fn kernel_eval(x: &DVector<f64>, y: &DVector<f64>, hyper: &KernelHyperparams) -> Result<f64> {
    hyper.check_dim(x.len())?;
    hyper.check_dim(y.len())?;
    let d2 = scaled_sq_dist(x.as_slice(), y.as_slice(), &hyper.inverse_scales());
    Ok(hyper.amplitude * (-d2).exp())
}

/// Gradient of the kernel with respect to its first argument.
pub fn kernel_gradient(
    x: &DVector<f64>,
    y: &DVector<f64>,
    hyper: &KernelHyperparams,
) -> Result<DVector<f64>> {
    let k = kernel_eval(x, y, hyper)?;
    let inv = hyper.inverse_scales();
    Ok(DVector::from_iterator(
        x.len(),
        (0..x.len()).map(|i| -2.0 * inv[i] * (x[i] - y[i]) * k),
    ))
}
