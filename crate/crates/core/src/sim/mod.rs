//! Fixed-step simulation of the closed loop over hybrid time.

mod closed_loop;
mod metrics;
mod rk4;

use nalgebra::DVector;

pub use closed_loop::{simulate_closed_loop, SimAbort, SimConfig, SimRun, DIVERGENCE_LIMIT};
pub use metrics::{steady_state_metrics, SteadyStateMetrics};
pub use rk4::rk4_step;

use crate::regulator::JumpDecision;

/// Exosystem and plant driven by the regulator.
///
/// The measured output is the first `output_dim` entries of the error
/// coordinates.
pub trait Plant {
    fn exo_dim(&self) -> usize;
    fn plant_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn exo_flow(&self, w: &[f64], out: &mut [f64]);
    fn plant_flow(&self, x: &[f64], w: &[f64], u: &[f64], out: &mut [f64]);
    /// Error coordinates of the plant state relative to the reference.
    fn error(&self, x: &[f64], w: &[f64]) -> DVector<f64>;
    /// Ideal steady-state input, used for diagnostics only.
    fn friend(&self, w: &[f64]) -> DVector<f64>;
}

/// One logged sample of the hybrid solution.
///
/// For jump records `mu`, `var` and `u` are the pre-jump values that triggered
/// the jump, so a collect record carries the stored `(eta, u)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub j: u64,
    pub jump_kind: JumpDecision,
    pub w: DVector<f64>,
    pub x: DVector<f64>,
    pub e: DVector<f64>,
    pub y: DVector<f64>,
    pub u: DVector<f64>,
    pub u_star: DVector<f64>,
    pub mu: DVector<f64>,
    pub var: f64,
    pub sigma_hat: DVector<f64>,
    pub xi: DVector<f64>,
    pub eta: DVector<f64>,
}

impl TrajectoryRecord {
    pub fn is_jump(&self) -> bool {
        self.jump_kind != JumpDecision::Flow
    }

    pub fn is_finite(&self) -> bool {
        let vecs = [
            &self.w, &self.x, &self.e, &self.y, &self.u, &self.u_star, &self.mu, &self.sigma_hat,
            &self.xi, &self.eta,
        ];
        self.t.is_finite()
            && vecs.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && !self.var.is_nan()
    }
}

/// Time-ordered log over hybrid time `(t, j)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HybridTrajectory {
    pub records: Vec<TrajectoryRecord>,
}

impl HybridTrajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn jumps(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter(|r| r.is_jump())
    }

    pub fn final_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.t)
    }

    /// Records with `t >= final_time - window`.
    pub fn window(&self, window: f64) -> impl Iterator<Item = &TrajectoryRecord> {
        let start = self.final_time() - window;
        self.records.iter().filter(move |r| r.t >= start - 1e-12)
    }
}
