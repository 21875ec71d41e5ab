use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{fit, GpPosteriorModel, KernelHyperparams, SampleSet};

/// Ridge weight used by the least-squares identifier.
pub const LS_RIDGE: f64 = 1e-8;

/// Which identifier backs the internal-model output map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentifierKind {
    Gp,
    Ls,
}

impl IdentifierKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            IdentifierKind::Gp => "gp",
            IdentifierKind::Ls => "ls",
        }
    }
}

impl std::str::FromStr for IdentifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gp" => Ok(IdentifierKind::Gp),
            "ls" => Ok(IdentifierKind::Ls),
            other => Err(Error::Config(format!("identifier must be gp or ls, got {other:?}"))),
        }
    }
}

/// Linear model `u = W^T eta` fitted by ridge-regularized least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct LsModel {
    /// `n_eta x n_y`.
    pub weights: DMatrix<f64>,
}

impl LsModel {
    pub fn zero(n_eta: usize, n_y: usize) -> Self {
        LsModel {
            weights: DMatrix::zeros(n_eta, n_y),
        }
    }

    pub fn predict(&self, eta: &DVector<f64>) -> DVector<f64> {
        self.weights.tr_mul(eta)
    }
}

/// Minimizes `sum_i |u_i - W^T eta_i|^2 + LS_RIDGE |W|^2`.
pub fn ls_identifier(buffer: &SampleSet) -> Result<LsModel> {
    let n = buffer.input_dim();
    let m = buffer.output_dim();
    if buffer.is_empty() {
        return Err(Error::Argument("least-squares identifier needs a nonempty buffer".into()));
    }
    // ridge solution through the SVD of the data matrix: W = V diag(s / (s^2 + eps)) U^T Y
    let rows = buffer.len();
    let mut x = DMatrix::zeros(rows, n);
    let mut y = DMatrix::zeros(rows, m);
    for (i, (eta, u)) in buffer.inputs().zip(buffer.outputs()).enumerate() {
        x.row_mut(i).copy_from(&eta.transpose());
        y.row_mut(i).copy_from(&u.transpose());
    }
    let svd = x.svd(true, true);
    let (u_mat, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v)) => (u, v),
        _ => {
            return Err(Error::Factorization {
                message: "SVD of the least-squares data matrix failed".into(),
                size: rows,
                min_diag: 0.0,
                max_diag: 0.0,
            })
        }
    };
    let shrink = svd.singular_values.map(|s| s / (s * s + LS_RIDGE));
    let projected = u_mat.tr_mul(&y);
    let mut scaled = projected;
    for (i, f) in shrink.iter().enumerate() {
        scaled.row_mut(i).scale_mut(*f);
    }
    let weights = v_t.tr_mul(&scaled);
    Ok(LsModel { weights })
}

/// Identifier state derived from the sample buffer.
///
/// Both variants answer the same three queries; the least-squares one reports
/// an infinite variance so every timer expiry collects a sample.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum Identifier {
    Gp(GpPosteriorModel),
    Ls(LsModel),
}

impl Identifier {
    pub fn empty(kind: IdentifierKind, hyper: &KernelHyperparams, buffer: &SampleSet) -> Result<Self> {
        Ok(match kind {
            IdentifierKind::Gp => Identifier::Gp(fit(buffer, hyper)?),
            IdentifierKind::Ls => Identifier::Ls(LsModel::zero(buffer.input_dim(), buffer.output_dim())),
        })
    }

    pub fn kind(&self) -> IdentifierKind {
        match self {
            Identifier::Gp(_) => IdentifierKind::Gp,
            Identifier::Ls(_) => IdentifierKind::Ls,
        }
    }

    pub fn refit(&mut self, buffer: &SampleSet) -> Result<()> {
        *self = match self {
            Identifier::Gp(model) => Identifier::Gp(fit(buffer, model.hyper())?),
            Identifier::Ls(_) if buffer.is_empty() => {
                Identifier::Ls(LsModel::zero(buffer.input_dim(), buffer.output_dim()))
            }
            Identifier::Ls(_) => Identifier::Ls(ls_identifier(buffer)?),
        };
        Ok(())
    }

    pub fn mean(&self, eta: &DVector<f64>) -> DVector<f64> {
        match self {
            Identifier::Gp(m) => m.mean(eta).expect("eta has the model dimension"),
            Identifier::Ls(m) => m.predict(eta),
        }
    }

    /// `n_y x n_eta` Jacobian of the predicted map.
    pub fn mean_jacobian(&self, eta: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Identifier::Gp(m) => m.mean_jacobian(eta).expect("eta has the model dimension"),
            Identifier::Ls(m) => m.weights.transpose(),
        }
    }

    pub fn variance(&self, eta: &DVector<f64>) -> f64 {
        match self {
            Identifier::Gp(m) => m.variance(eta).expect("eta has the model dimension"),
            Identifier::Ls(_) => f64::INFINITY,
        }
    }

    pub fn gp(&self) -> Option<&GpPosteriorModel> {
        match self {
            Identifier::Gp(m) => Some(m),
            Identifier::Ls(_) => None,
        }
    }
}
