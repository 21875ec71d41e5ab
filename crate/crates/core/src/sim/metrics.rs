use super::HybridTrajectory;
use crate::error::{Error, Result};

/// Steady-state figures of merit over the final window of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateMetrics {
    pub max_abs_y: f64,
    pub rms_y: f64,
    /// `max |u*(w) - mu(eta)|` over the window.
    pub max_abs_friend_err: f64,
    pub samples: usize,
}

/// Metrics over flow records with `t >= t_final - window`.
pub fn steady_state_metrics(traj: &HybridTrajectory, window: f64) -> Result<SteadyStateMetrics> {
    let first = traj
        .records
        .first()
        .ok_or_else(|| Error::Argument("empty trajectory".into()))?;
    let span = traj.final_time() - first.t;
    if !(window > 0.0) || window > span + 1e-9 {
        return Err(Error::Argument(format!(
            "window {window} is not within the trajectory span {span}"
        )));
    }
    let mut max_abs_y: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    let mut max_err: f64 = 0.0;
    for r in traj.window(window).filter(|r| !r.is_jump()) {
        for y in r.y.iter() {
            max_abs_y = max_abs_y.max(y.abs());
            sum_sq += y * y;
        }
        for (a, b) in r.u_star.iter().zip(r.mu.iter()) {
            max_err = max_err.max((a - b).abs());
        }
        count += 1;
    }
    let n_y = first.y.len().max(1);
    Ok(SteadyStateMetrics {
        max_abs_y,
        rms_y: if count == 0 {
            0.0
        } else {
            (sum_sq / (count * n_y) as f64).sqrt()
        },
        max_abs_friend_err: max_err,
        samples: count,
    })
}
