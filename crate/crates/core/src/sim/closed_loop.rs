use nalgebra::DVector;

use super::rk4::rk4_step;
use super::{HybridTrajectory, Plant, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::regulator::{JumpDecision, Regulator, RegulatorState};

/// A state norm above this aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    pub ss_window: f64,
    pub log_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 1e-3,
            horizon: 150.0,
            ss_window: 30.0,
            log_stride: 10,
        }
    }
}

impl SimConfig {
    /// Checks the step against the minimum dwell time and the window against the horizon.
    pub fn validate(&self, t_min: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.horizon > 0.0 && self.ss_window > 0.0) {
            return Err(Error::Config("dt, horizon and ss_window must be positive".into()));
        }
        if self.dt > t_min / 10.0 + 1e-15 {
            return Err(Error::Config(format!(
                "dt = {} exceeds t_min / 10 = {}",
                self.dt,
                t_min / 10.0
            )));
        }
        if !(self.ss_window < self.horizon) {
            return Err(Error::Config(format!(
                "ss_window = {} must be shorter than horizon = {}",
                self.ss_window, self.horizon
            )));
        }
        if self.log_stride == 0 {
            return Err(Error::Config("log_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

/// Completed simulation: the log plus the regulator with its final buffer.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub trajectory: HybridTrajectory,
    pub regulator: Regulator,
}

/// Aborted simulation with everything logged up to the failure.
#[derive(Debug)]
pub struct SimAbort {
    pub error: Error,
    pub partial: HybridTrajectory,
}

struct Layout {
    nw: usize,
    nx: usize,
    ny: usize,
}

impl Layout {
    fn split<'a>(&self, z: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (w, rest) = z.split_at(self.nw);
        let (x, reg) = rest.split_at(self.nx);
        (w, x, reg)
    }
}

#[allow(clippy::too_many_arguments)]
fn make_record<P: Plant>(
    plant: &P,
    regulator: &Regulator,
    layout: &Layout,
    z: &[f64],
    scratch: &mut RegulatorState,
    t: f64,
    j: u64,
    kind: JumpDecision,
    precomputed_var: Option<f64>,
) -> TrajectoryRecord {
    let (w, x, reg) = layout.split(z);
    scratch.read_from(reg);
    let e = plant.error(x, w);
    let y = e.rows(0, layout.ny).into_owned();
    let u = regulator.control_output(scratch);
    let mu = regulator.identifier().mean(&scratch.eta);
    let var = precomputed_var.unwrap_or_else(|| regulator.variance_at(scratch));
    TrajectoryRecord {
        t,
        j,
        jump_kind: kind,
        w: DVector::from_column_slice(w),
        x: DVector::from_column_slice(x),
        e,
        y,
        u,
        u_star: plant.friend(w),
        mu,
        var,
        sigma_hat: scratch.sigma_hat.clone(),
        xi: scratch.xi.clone(),
        eta: scratch.eta.clone(),
    }
}

/// Integrates exosystem, plant and regulator with RK4, checking the jump
/// condition at every step boundary.
///
/// Flow records are logged every `log_stride` steps; every jump is logged at
/// `(t, j + 1)` with the pre-jump variance and input.
pub fn simulate_closed_loop<P: Plant>(
    plant: &P,
    mut regulator: Regulator,
    w0: &[f64],
    x0: &[f64],
    sim: &SimConfig,
) -> std::result::Result<SimRun, SimAbort> {
    let layout = Layout {
        nw: plant.exo_dim(),
        nx: plant.plant_dim(),
        ny: plant.output_dim(),
    };
    let mut traj = HybridTrajectory::default();
    if w0.len() != layout.nw || x0.len() != layout.nx || regulator.params().n_y() != layout.ny {
        return Err(SimAbort {
            error: Error::Argument("plant, exosystem and regulator dimensions disagree".into()),
            partial: traj,
        });
    }

    let mut reg_state = regulator.initial_state();
    let nz = layout.nw + layout.nx + reg_state.len();
    let mut z = vec![0.0; nz];
    z[..layout.nw].copy_from_slice(w0);
    z[layout.nw..layout.nw + layout.nx].copy_from_slice(x0);
    reg_state.write_to(&mut z[layout.nw + layout.nx..]);

    let mut scratch = reg_state.clone();
    let mut j: u64 = 0;
    traj.records.push(make_record(
        plant, &regulator, &layout, &z, &mut scratch, 0.0, j, JumpDecision::Flow, None,
    ));

    let t_min = regulator.params().timer.t_min;
    let steps = sim.steps();
    for k in 0..steps {
        let t = k as f64 * sim.dt;
        let next = {
            let reg = &regulator;
            let mut stage_state = reg_state.clone();
            let field = |_t: f64, zs: &[f64], dz: &mut [f64]| {
                let (w, x, rs) = layout.split(zs);
                stage_state.read_from(rs);
                let e = plant.error(x, w);
                let y = e.rows(0, layout.ny).into_owned();
                let u = reg.control_output(&stage_state);
                let (dw, rest) = dz.split_at_mut(layout.nw);
                let (dx, dr) = rest.split_at_mut(layout.nx);
                plant.exo_flow(w, dw);
                plant.plant_flow(x, w, u.as_slice(), dx);
                reg.regulator_flow(&stage_state, &y).write_to(dr);
            };
            rk4_step(field, &z, t, sim.dt)
        };
        z = match next {
            Ok(z) => z,
            Err(error) => return Err(SimAbort { error, partial: traj }),
        };
        let t_next = (k + 1) as f64 * sim.dt;
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm <= DIVERGENCE_LIMIT) {
            return Err(SimAbort {
                error: Error::Divergence {
                    t: t_next,
                    message: format!("state norm {norm:e} out of range; state = {z:?}"),
                },
                partial: traj,
            });
        }

        reg_state.read_from(&z[layout.nw + layout.nx..]);
        let (decision, variance) = if reg_state.clock >= t_min - 1e-9 {
            let v = regulator.variance_at(&reg_state);
            (regulator.decide(reg_state.clock, v), Some(v))
        } else {
            (JumpDecision::Flow, None)
        };

        if (k + 1) % sim.log_stride == 0 || k + 1 == steps {
            traj.records.push(make_record(
                plant, &regulator, &layout, &z, &mut scratch, t_next, j, JumpDecision::Flow,
                variance,
            ));
        }

        if decision != JumpDecision::Flow {
            let record = make_record(
                plant, &regulator, &layout, &z, &mut scratch, t_next, j + 1, decision, variance,
            );
            let u = record.u.clone();
            if let Err(error) = regulator.regulator_jump(&mut reg_state, &u, decision) {
                return Err(SimAbort { error, partial: traj });
            }
            j += 1;
            traj.records.push(record);
            reg_state.write_to(&mut z[layout.nw + layout.nx..]);
        }
    }

    Ok(SimRun {
        trajectory: traj,
        regulator,
    })
}
