use nalgebra::{Complex, DMatrix};

use super::chain::{kalman_rank, ChainMatrices};
use crate::error::{Error, Result};
use crate::gp::KernelHyperparams;

const HURWITZ_MARGIN: f64 = 1e-9;

/// Internal model `eta' = F eta + G u`.
#[derive(Debug, Clone, PartialEq)]
pub struct InternalModelConfig {
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

/// Internal-model dimension for `n_w` exosystem and `n_z` zero-dynamics states.
pub fn internal_model_dim(n_w: usize, n_z: usize) -> usize {
    2 * (n_w + n_z + 1)
}

impl InternalModelConfig {
    pub fn new(f: DMatrix<f64>, g: DMatrix<f64>) -> Result<Self> {
        if !f.is_square() || f.nrows() == 0 || g.nrows() != f.nrows() || g.ncols() == 0 {
            return Err(Error::Config(format!(
                "internal model shapes F {}x{}, G {}x{} are inconsistent",
                f.nrows(),
                f.ncols(),
                g.nrows(),
                g.ncols()
            )));
        }
        let worst = max_real_part(&f);
        if worst >= -HURWITZ_MARGIN {
            return Err(Error::Config(format!(
                "internal model F is not Hurwitz (max eigenvalue real part {worst:.3e})"
            )));
        }
        if kalman_rank(&f, &g) != f.nrows() {
            return Err(Error::Config("internal model pair (F, G) is not controllable".into()));
        }
        Ok(InternalModelConfig { f, g })
    }

    /// Bidiagonal `F` with `pole` on the diagonal and ones above it; `G` feeds
    /// every output channel into the last state.
    pub fn jordan_chain(n_eta: usize, n_y: usize, pole: f64) -> Result<Self> {
        let mut f = DMatrix::zeros(n_eta, n_eta);
        for i in 0..n_eta {
            f[(i, i)] = pole;
            if i + 1 < n_eta {
                f[(i, i + 1)] = 1.0;
            }
        }
        let mut g = DMatrix::zeros(n_eta, n_y);
        g.row_mut(n_eta - 1).fill(1.0);
        InternalModelConfig::new(f, g)
    }

    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<Complex<f64>> {
        self.f.complex_eigenvalues().iter().copied().collect()
    }
}

fn max_real_part(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Roots of the monic polynomial `s^n + c[0] s^{n-1} + ... + c[n-1]`.
pub fn monic_polynomial_roots(coeffs: &[f64]) -> Vec<Complex<f64>> {
    let n = coeffs.len();
    if n == 0 {
        return Vec::new();
    }
    let mut companion = DMatrix::zeros(n, n);
    for (j, c) in coeffs.iter().enumerate() {
        companion[(0, j)] = -c;
    }
    for i in 1..n {
        companion[(i, i - 1)] = 1.0;
    }
    companion.complex_eigenvalues().iter().copied().collect()
}

pub fn is_hurwitz_polynomial(coeffs: &[f64]) -> bool {
    monic_polynomial_roots(coeffs)
        .iter()
        .all(|z| z.re < -HURWITZ_MARGIN)
}

/// Extended high-gain observer settings and the input gain estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverConfig {
    pub gain: f64,
    /// `h_1 .. h_{r+1}`, shared by every output channel.
    pub h: Vec<f64>,
    pub b_bar: DMatrix<f64>,
    pub sat_level: f64,
}

impl ObserverConfig {
    pub fn new(gain: f64, h: Vec<f64>, b_bar: DMatrix<f64>, sat_level: f64) -> Result<Self> {
        if !(gain > 0.0) {
            return Err(Error::Config(format!("observer gain g must be > 0, got {gain}")));
        }
        if h.len() < 2 || h.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("observer coefficients h must be positive, length r+1".into()));
        }
        if !is_hurwitz_polynomial(&h) {
            return Err(Error::Config(format!("observer polynomial with h = {h:?} is not Hurwitz")));
        }
        if !(sat_level > 0.0) {
            return Err(Error::Config(format!("saturation level must be > 0, got {sat_level}")));
        }
        if !b_bar.is_square() {
            return Err(Error::Config("b_bar must be square".into()));
        }
        let sv = b_bar.singular_values();
        let cond = sv.max() / sv.min();
        if !(cond.is_finite() && cond < 1e6) {
            return Err(Error::Config(format!(
                "b_bar is singular or badly conditioned (condition number {cond:.3e})"
            )));
        }
        Ok(ObserverConfig {
            gain,
            h,
            b_bar,
            sat_level,
        })
    }

    pub fn relative_degree(&self) -> usize {
        self.h.len() - 1
    }
}

/// Sampling clock bounds and the variance threshold gating data collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimerConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub sigma_thr2: f64,
}

impl TimerConfig {
    pub fn new(t_min: f64, t_max: f64, sigma_thr2: f64) -> Result<Self> {
        if !(t_min > 0.0) {
            return Err(Error::Config(format!("t_min must be > 0, got {t_min}")));
        }
        if !(t_min <= t_max) {
            return Err(Error::Config(format!(
                "t_min <= t_max violated (t_min = {t_min}, t_max = {t_max})"
            )));
        }
        if !(sigma_thr2 > 0.0) {
            return Err(Error::Config(format!("sigma_thr2 must be > 0, got {sigma_thr2}")));
        }
        Ok(TimerConfig {
            t_min,
            t_max,
            sigma_thr2,
        })
    }

    /// Checks `sp2 sn2 / (sp2 + sn2) < sigma_thr2 <= sp2`.
    pub fn validate_against(&self, hyper: &KernelHyperparams) -> Result<()> {
        let sp2 = hyper.amplitude();
        let sn2 = hyper.noise_variance();
        let floor = sp2 * sn2 / (sp2 + sn2);
        if !(floor < self.sigma_thr2 && self.sigma_thr2 <= sp2) {
            return Err(Error::Config(format!(
                "sigma_thr2 = {} violates sigma_p2*sigma_n2/(sigma_p2+sigma_n2) = {floor:.6} < sigma_thr2 <= sigma_p2 = {sp2}",
                self.sigma_thr2
            )));
        }
        Ok(())
    }
}

/// Gains derived from the observer settings and the stabilizer poles.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorGains {
    /// `g^i h_i` for the chain blocks `i = 1..r`.
    pub innovation: Vec<f64>,
    /// `g^{r+1} h_{r+1}`.
    pub sigma_gain: f64,
    /// State feedback `K` with `spec(A - B K)` equal to the requested poles.
    pub k: DMatrix<f64>,
}

/// Coefficients `c_0 .. c_{r-1}` of `prod (s - p_i) = s^r + c_{r-1} s^{r-1} + ... + c_0`.
pub fn characteristic_coefficients(poles: &[f64]) -> Vec<f64> {
    // highest degree first, monic
    let mut poly = vec![1.0];
    for p in poles {
        let mut next = vec![0.0; poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= p * c;
        }
        poly = next;
    }
    poly[1..].iter().rev().copied().collect()
}

pub fn build_regulator_gains(
    observer: &ObserverConfig,
    stabilizer_poles: &[f64],
    chain: &ChainMatrices,
) -> Result<RegulatorGains> {
    let r = chain.r;
    if observer.h.len() != r + 1 {
        return Err(Error::Config(format!(
            "observer needs r+1 = {} coefficients, got {}",
            r + 1,
            observer.h.len()
        )));
    }
    if stabilizer_poles.len() != r {
        return Err(Error::Config(format!(
            "stabilizer needs {r} poles, got {}",
            stabilizer_poles.len()
        )));
    }
    if let Some(p) = stabilizer_poles.iter().find(|p| !(**p < 0.0)) {
        return Err(Error::Config(format!("stabilizer pole {p} is not strictly negative")));
    }
    if observer.b_bar.nrows() != chain.n_y {
        return Err(Error::Config("b_bar size differs from the output dimension".into()));
    }
    let g = observer.gain;
    let innovation = (1..=r).map(|i| g.powi(i as i32) * observer.h[i - 1]).collect();
    let sigma_gain = g.powi(r as i32 + 1) * observer.h[r];
    let coeffs = characteristic_coefficients(stabilizer_poles);
    let n_y = chain.n_y;
    let mut k = DMatrix::zeros(n_y, r * n_y);
    for (i, c) in coeffs.iter().enumerate() {
        for ch in 0..n_y {
            k[(ch, i * n_y + ch)] = *c;
        }
    }
    Ok(RegulatorGains {
        innovation,
        sigma_gain,
        k,
    })
}
