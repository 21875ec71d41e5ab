//! Hybrid adaptive regulator: internal model, extended high-gain observer,
//! saturated stabilizer, variance-gated sample buffer and identifier.
//!
//! Between jumps the continuous state `(clock, eta, xi, sigma_hat)` flows; at a
//! jump the clock resets and, for a collect jump, the pair `(eta, u)` enters the
//! FIFO buffer and the identifier is refitted on the new buffer contents.

mod chain;
mod gains;
mod identifier;

use nalgebra::{DMatrix, DVector};

pub use chain::{build_chain_matrices, controllability_matrix, kalman_rank, ChainMatrices};
pub use gains::{
    build_regulator_gains, characteristic_coefficients, internal_model_dim, is_hurwitz_polynomial,
    monic_polynomial_roots, InternalModelConfig, ObserverConfig, RegulatorGains, TimerConfig,
};
pub use identifier::{ls_identifier, Identifier, IdentifierKind, LsModel, LS_RIDGE};

use crate::error::{Error, Result};
use crate::gp::{KernelHyperparams, SampleSet};

/// Slack on clock comparisons so that accumulated round-off on `k * dt` does
/// not postpone a jump by a full step.
const CLOCK_EPS: f64 = 1e-9;

/// Flowing part of the regulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorState {
    pub clock: f64,
    pub eta: DVector<f64>,
    pub xi: DVector<f64>,
    pub sigma_hat: DVector<f64>,
}

impl RegulatorState {
    pub fn zeros(n_eta: usize, n_xi: usize, n_y: usize) -> Self {
        RegulatorState {
            clock: 0.0,
            eta: DVector::zeros(n_eta),
            xi: DVector::zeros(n_xi),
            sigma_hat: DVector::zeros(n_y),
        }
    }

    pub fn len(&self) -> usize {
        1 + self.eta.len() + self.xi.len() + self.sigma_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn write_to(&self, out: &mut [f64]) {
        out[0] = self.clock;
        let mut at = 1;
        for v in [&self.eta, &self.xi, &self.sigma_hat] {
            out[at..at + v.len()].copy_from_slice(v.as_slice());
            at += v.len();
        }
    }

    pub fn read_from(&mut self, src: &[f64]) {
        self.clock = src[0];
        let mut at = 1;
        for v in [&mut self.eta, &mut self.xi, &mut self.sigma_hat] {
            let n = v.len();
            v.as_mut_slice().copy_from_slice(&src[at..at + n]);
            at += n;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.clock.is_finite()
            && self.eta.iter().chain(self.xi.iter()).chain(self.sigma_hat.iter()).all(|v| v.is_finite())
    }
}

/// Outcome of evaluating the flow and jump sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpDecision {
    Flow,
    /// Reset the clock and store `(eta, u)`.
    CollectJump,
    /// Reset the clock at `t_max` without storing anything.
    IdleReset,
}

impl JumpDecision {
    pub fn as_str(&self) -> &'static str {
        match self {
            JumpDecision::Flow => "flow",
            JumpDecision::CollectJump => "collect",
            JumpDecision::IdleReset => "idle",
        }
    }
}

impl std::str::FromStr for JumpDecision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(JumpDecision::Flow),
            "collect" => Ok(JumpDecision::CollectJump),
            "idle" => Ok(JumpDecision::IdleReset),
            other => Err(Error::Argument(format!("unknown jump kind {other:?}"))),
        }
    }
}

/// Static configuration of a regulator instance.
#[derive(Debug, Clone)]
pub struct RegulatorParams {
    pub chain: ChainMatrices,
    pub internal_model: InternalModelConfig,
    pub observer: ObserverConfig,
    pub gains: RegulatorGains,
    pub timer: TimerConfig,
    pub hyper: KernelHyperparams,
    pub capacity: usize,
    pub identifier: IdentifierKind,
}

impl RegulatorParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        chain: ChainMatrices,
        internal_model: InternalModelConfig,
        observer: ObserverConfig,
        stabilizer_poles: &[f64],
        timer: TimerConfig,
        hyper: KernelHyperparams,
        capacity: usize,
        identifier: IdentifierKind,
    ) -> Result<Self> {
        let gains = build_regulator_gains(&observer, stabilizer_poles, &chain)?;
        if internal_model.g.ncols() != chain.n_y {
            return Err(Error::Config(format!(
                "internal model G has {} columns, plant has {} outputs",
                internal_model.g.ncols(),
                chain.n_y
            )));
        }
        if hyper.dim() != internal_model.dim() {
            return Err(Error::Config(format!(
                "{} length scales given for an internal model of dimension {}",
                hyper.dim(),
                internal_model.dim()
            )));
        }
        timer.validate_against(&hyper)?;
        if capacity == 0 {
            return Err(Error::Config("buffer capacity N must be positive".into()));
        }
        Ok(RegulatorParams {
            chain,
            internal_model,
            observer,
            gains,
            timer,
            hyper,
            capacity,
            identifier,
        })
    }

    pub fn n_y(&self) -> usize {
        self.chain.n_y
    }

    pub fn n_eta(&self) -> usize {
        self.internal_model.dim()
    }

    pub fn n_xi(&self) -> usize {
        self.chain.dim()
    }
}

/// Regulator with its sample buffer and the identifier fitted on it.
///
/// The identifier is only ever replaced together with the buffer, so it is
/// always the fit of the current buffer.
#[derive(Debug, Clone)]
pub struct Regulator {
    params: RegulatorParams,
    b_bar_inv: DMatrix<f64>,
    buffer: SampleSet,
    identifier: Identifier,
}

impl Regulator {
    pub fn new(params: RegulatorParams) -> Result<Self> {
        let buffer = SampleSet::new(params.n_eta(), params.n_y(), params.capacity)?;
        let identifier = Identifier::empty(params.identifier, &params.hyper, &buffer)?;
        let b_bar_inv = params
            .observer
            .b_bar
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Config("b_bar is singular".into()))?;
        Ok(Regulator {
            params,
            b_bar_inv,
            buffer,
            identifier,
        })
    }

    pub fn params(&self) -> &RegulatorParams {
        &self.params
    }

    pub fn buffer(&self) -> &SampleSet {
        &self.buffer
    }

    pub fn identifier(&self) -> &Identifier {
        &self.identifier
    }

    pub fn initial_state(&self) -> RegulatorState {
        RegulatorState::zeros(self.params.n_eta(), self.params.n_xi(), self.params.n_y())
    }

    /// Stabilizer term `-K xi`; with `K` from pole placement this makes
    /// `A - B K` Hurwitz.
    pub fn stabilizer(&self, xi: &DVector<f64>) -> DVector<f64> {
        -(&self.params.gains.k * xi)
    }

    /// `u = b_bar^{-1} sat(-sigma_hat - K xi)`, saturation per component.
    pub fn control_output(&self, state: &RegulatorState) -> DVector<f64> {
        let raw = -&state.sigma_hat + self.stabilizer(&state.xi);
        self.saturated_input(&raw)
    }

    /// `b_bar^{-1} sat(v)`.
    pub fn saturated_input(&self, v: &DVector<f64>) -> DVector<f64> {
        let level = self.params.observer.sat_level;
        &self.b_bar_inv * v.map(|x| x.clamp(-level, level))
    }

    /// Time derivative of the flowing state for measured output `y`.
    pub fn regulator_flow(&self, state: &RegulatorState, y: &DVector<f64>) -> RegulatorState {
        let p = &self.params;
        let n_y = p.n_y();
        let u = self.control_output(state);
        let eta_dot = &p.internal_model.f * &state.eta + &p.internal_model.g * &u;

        let innovation: DVector<f64> = y - state.xi.rows(0, n_y);
        let b_bar = &p.observer.b_bar;
        let mut xi_dot = &p.chain.a * &state.xi + &p.chain.b * (&state.sigma_hat + b_bar * &u);
        for (i, gain) in p.gains.innovation.iter().enumerate() {
            let mut block = xi_dot.rows_mut(i * n_y, n_y);
            block += &innovation * *gain;
        }

        let mu_dot = self.identifier.mean_jacobian(&state.eta) * &eta_dot;
        let sigma_hat_dot = -(b_bar * mu_dot) + &innovation * p.gains.sigma_gain;

        RegulatorState {
            clock: 1.0,
            eta: eta_dot,
            xi: xi_dot,
            sigma_hat: sigma_hat_dot,
        }
    }

    /// Posterior variance of the identifier at the current internal-model state.
    pub fn variance_at(&self, state: &RegulatorState) -> f64 {
        self.identifier.variance(&state.eta)
    }

    pub fn in_jump_set(&self, state: &RegulatorState) -> JumpDecision {
        self.decide(state.clock, self.variance_at(state))
    }

    /// Jump decision from the clock value and a precomputed variance.
    pub fn decide(&self, clock: f64, variance: f64) -> JumpDecision {
        let timer = &self.params.timer;
        if clock < timer.t_min - CLOCK_EPS {
            JumpDecision::Flow
        } else if variance >= timer.sigma_thr2 {
            JumpDecision::CollectJump
        } else if clock >= timer.t_max - CLOCK_EPS {
            JumpDecision::IdleReset
        } else {
            JumpDecision::Flow
        }
    }

    /// Applies a jump of the given kind. Only the clock and, for a collect jump,
    /// the buffer and identifier change.
    pub fn regulator_jump(
        &mut self,
        state: &mut RegulatorState,
        u: &DVector<f64>,
        kind: JumpDecision,
    ) -> Result<()> {
        match kind {
            JumpDecision::Flow => {
                return Err(Error::Argument("regulator_jump called with a flow decision".into()))
            }
            JumpDecision::IdleReset => {}
            JumpDecision::CollectJump => {
                self.buffer.push(state.eta.clone(), u.clone())?;
                self.identifier.refit(&self.buffer)?;
            }
        }
        state.clock = 0.0;
        Ok(())
    }
}
