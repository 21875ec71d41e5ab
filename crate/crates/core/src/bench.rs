//! Van der Pol benchmark wiring: builds the regulator from a [`RunConfig`],
//! runs the closed loop and evaluates the steady-state and bound figures.

use nalgebra::DVector;

use crate::bounds::{
    build_bound_report, covering_radius, regulation_error_bound, BoundReport, BoxDomain,
    CoveringMode,
};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gp::GpPosteriorModel;
use crate::regulator::{IdentifierKind, JumpDecision, Regulator};
use crate::sim::{
    simulate_closed_loop, steady_state_metrics, HybridTrajectory, SimRun, SteadyStateMetrics,
};
use crate::vdp::VdpPlant;

/// Saturation share above which a warning is logged.
pub const SATURATION_WARN_FRACTION: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub identifier: IdentifierKind,
    pub capacity: usize,
    pub run: SimRun,
    pub metrics: SteadyStateMetrics,
    /// Share of steady-state flow records with a saturated input.
    pub saturation_fraction: f64,
    pub collect_jumps: usize,
    pub idle_resets: usize,
}

impl BenchOutcome {
    pub fn label(&self) -> String {
        match self.identifier {
            IdentifierKind::Ls => "ls".to_string(),
            IdentifierKind::Gp => format!("gp-{}", self.capacity),
        }
    }

    pub fn trajectory(&self) -> &HybridTrajectory {
        &self.run.trajectory
    }

    pub fn gp(&self) -> Option<&GpPosteriorModel> {
        self.run.regulator.identifier().gp()
    }
}

pub fn plant(cfg: &RunConfig) -> VdpPlant {
    VdpPlant {
        a: cfg.a,
        rho: cfg.rho,
    }
}

pub fn build_regulator(cfg: &RunConfig, identifier: IdentifierKind, capacity: usize) -> Result<Regulator> {
    Regulator::new(cfg.regulator_params(identifier, capacity)?)
}

/// Runs one closed-loop simulation of the benchmark.
pub fn run_benchmark(cfg: &RunConfig, identifier: IdentifierKind, capacity: usize) -> Result<BenchOutcome> {
    let regulator = build_regulator(cfg, identifier, capacity)?;
    let run = simulate_closed_loop(&plant(cfg), regulator, &cfg.w0, &cfg.chi0, &cfg.sim)
        .map_err(|abort| {
            log::error!(
                "{} run aborted after {} records",
                identifier.as_str(),
                abort.partial.len()
            );
            abort.error
        })?;
    let metrics = steady_state_metrics(&run.trajectory, cfg.sim.ss_window)?;
    let saturation_fraction = saturation_fraction(&run.trajectory, cfg.sim.ss_window, cfg.sat_level, cfg.b_bar);
    if saturation_fraction > SATURATION_WARN_FRACTION {
        log::warn!(
            "input saturated on {:.1}% of the steady-state window",
            100.0 * saturation_fraction
        );
    }
    let count = |kind| run.trajectory.jumps().filter(|r| r.jump_kind == kind).count();
    let collect_jumps = count(JumpDecision::CollectJump);
    let idle_resets = count(JumpDecision::IdleReset);
    log::info!(
        "{} N={capacity}: max|y|={:.4e} collects={collect_jumps} idles={idle_resets}",
        identifier.as_str(),
        metrics.max_abs_y
    );
    Ok(BenchOutcome {
        identifier,
        capacity,
        run,
        metrics,
        saturation_fraction,
        collect_jumps,
        idle_resets,
    })
}

fn saturation_fraction(traj: &HybridTrajectory, window: f64, level: f64, b_bar: f64) -> f64 {
    let limit = level / b_bar.abs() * (1.0 - 1e-12);
    let (mut hit, mut total) = (0usize, 0usize);
    for r in traj.window(window).filter(|r| !r.is_jump()) {
        total += 1;
        if r.u.iter().any(|u| u.abs() >= limit) {
            hit += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

/// Internal-model states visited by the flow records of the final window.
pub fn steady_state_eta(traj: &HybridTrajectory, window: f64) -> Vec<DVector<f64>> {
    traj.window(window)
        .filter(|r| !r.is_jump())
        .map(|r| r.eta.clone())
        .collect()
}

/// Finite-difference estimate of the friend's Lipschitz constant over the
/// steady-state internal-model trajectory.
///
/// Consecutive records straddling a corner of the reference (a sign change of
/// `w_2`) are skipped, since the friend jumps there.
pub fn estimate_friend_lipschitz(traj: &HybridTrajectory, window: f64) -> f64 {
    let records: Vec<_> = traj.window(window).filter(|r| !r.is_jump()).collect();
    let mut best: f64 = 0.0;
    for pair in records.windows(2) {
        let (p, q) = (pair[0], pair[1]);
        if p.w[1].signum() != q.w[1].signum() || p.w[1] == 0.0 || q.w[1] == 0.0 {
            continue;
        }
        let d = (&q.eta - &p.eta).norm();
        if d <= 1e-12 {
            continue;
        }
        best = best.max((&q.u_star - &p.u_star).norm() / d);
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundAnalysis {
    /// Coverage radius of the reference points by the dataset.
    pub rho_star: f64,
    pub report: BoundReport,
    pub claim_bound: f64,
    pub noise_floor: f64,
}

/// Bound figures for a fitted GP against a set of reference inputs.
pub fn analyze_bounds(
    model: &GpPosteriorModel,
    reference: &[DVector<f64>],
    delta: f64,
    l_f: f64,
) -> Result<BoundAnalysis> {
    if model.is_empty() {
        return Err(Error::Argument("bounds need a nonempty dataset".into()));
    }
    let rho_star = covering_radius(model.samples(), reference);
    let domain = BoxDomain::hull(reference.iter())
        .ok_or_else(|| Error::Argument("no points to span a domain".into()))?
        .inflate(0.05);
    let report = build_bound_report(model, rho_star, delta, l_f, &domain, CoveringMode::DatasetSize)?;
    let (claim_bound, noise_floor) = regulation_error_bound(model.hyper(), rho_star, &report);
    Ok(BoundAnalysis {
        rho_star,
        report,
        claim_bound,
        noise_floor,
    })
}
