//! Forced Van der Pol oscillator tracking a triangular wave generated by a
//! harmonic exosystem.
//!
//! The reference is `y*(w) = (2|w| / pi) asin(w_1 / |w|)`. Its Lie derivatives
//! along `w' = (w_2, -rho w_1)` are computed in closed form; the first one jumps
//! where `w_2` changes sign (the corners of the wave), and there the value on
//! the forward-time side is returned together with a corner flag.

use std::f64::consts::{FRAC_2_PI, PI};

use nalgebra::{DVector, Vector2};

/// Relative tolerance for flagging a corner: `1 - |w_1| / |w| <= CORNER_TOL`.
pub const CORNER_TOL: f64 = 1e-9;

pub fn vdp_flow(chi: &Vector2<f64>, u: f64, a: f64) -> Vector2<f64> {
    Vector2::new(chi[1], -chi[0] + a * (1.0 - chi[0] * chi[0]) * chi[1] + u)
}

pub fn exo_flow(w: &Vector2<f64>, rho: f64) -> Vector2<f64> {
    Vector2::new(w[1], -rho * w[0])
}

/// Conserved quantity of the exosystem, `rho w_1^2 + w_2^2`.
pub fn exo_first_integral(w: &Vector2<f64>, rho: f64) -> f64 {
    rho * w[0] * w[0] + w[1] * w[1]
}

pub fn triangular_output(w: &Vector2<f64>) -> f64 {
    let r = w.norm();
    if r == 0.0 {
        log::debug!("triangular output evaluated at the origin of the exosystem");
        return 0.0;
    }
    FRAC_2_PI * r * (w[0] / r).clamp(-1.0, 1.0).asin()
}

/// Reference `y*` and its first two Lie derivatives along the exosystem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceJet {
    pub y: f64,
    pub dy: f64,
    pub ddy: f64,
    /// True at a corner of the wave, where `dy` is the forward-time one-sided value.
    pub corner: bool,
}

pub fn reference_jet(w: &Vector2<f64>, rho: f64) -> ReferenceJet {
    let (w1, w2) = (w[0], w[1]);
    let r = w.norm();
    if r == 0.0 {
        return ReferenceJet {
            y: 0.0,
            dy: 0.0,
            ddy: 0.0,
            corner: true,
        };
    }
    let angle = (w1 / r).clamp(-1.0, 1.0).asin();
    let corner = 1.0 - w1.abs() / r <= CORNER_TOL;
    // w_2' = -rho w_1, so at w_2 = 0 the wave leaves the corner with sign -sign(w_1)
    let side = if w2 != 0.0 {
        w2.signum()
    } else {
        -w1.signum()
    };
    let energy = w2 * w2 + rho * w1 * w1;
    let r3 = r * r * r;
    let y = FRAC_2_PI * r * angle;
    let dy = FRAC_2_PI * ((1.0 - rho) * w1 * w2 * angle / r + side * energy / r);
    let ddy = FRAC_2_PI
        * (1.0 - rho)
        * angle
        * ((w2 * w2 - rho * w1 * w1) / r - (1.0 - rho) * w1 * w1 * w2 * w2 / r3);
    ReferenceJet { y, dy, ddy, corner }
}

/// Ideal steady-state input keeping the tracking error at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Friend {
    pub u_star: f64,
    pub ydot_star: f64,
    pub yddot_star: f64,
    pub corner: bool,
}

pub fn ideal_friend(w: &Vector2<f64>, a: f64, rho: f64) -> Friend {
    let jet = reference_jet(w, rho);
    Friend {
        u_star: jet.y + jet.ddy - a * (1.0 - jet.y * jet.y) * jet.dy,
        ydot_star: jet.dy,
        yddot_star: jet.ddy,
        corner: jet.corner,
    }
}

/// `(chi_1 - y*, chi_2 - L y*)`.
pub fn error_coords(chi: &Vector2<f64>, w: &Vector2<f64>, rho: f64) -> Vector2<f64> {
    let jet = reference_jet(w, rho);
    Vector2::new(chi[0] - jet.y, chi[1] - jet.dy)
}

pub fn plant_from_error(e: &Vector2<f64>, w: &Vector2<f64>, rho: f64) -> Vector2<f64> {
    let jet = reference_jet(w, rho);
    Vector2::new(e[0] + jet.y, e[1] + jet.dy)
}

/// Exosystem period `2 pi / sqrt(rho)`.
pub fn exo_period(rho: f64) -> f64 {
    2.0 * PI / rho.sqrt()
}

/// Van der Pol plant and triangular-wave exosystem as a closed-loop plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdpPlant {
    pub a: f64,
    pub rho: f64,
}

impl crate::sim::Plant for VdpPlant {
    fn exo_dim(&self) -> usize {
        2
    }

    fn plant_dim(&self) -> usize {
        2
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn exo_flow(&self, w: &[f64], out: &mut [f64]) {
        let d = exo_flow(&Vector2::new(w[0], w[1]), self.rho);
        out.copy_from_slice(d.as_slice());
    }

    fn plant_flow(&self, x: &[f64], _w: &[f64], u: &[f64], out: &mut [f64]) {
        let d = vdp_flow(&Vector2::new(x[0], x[1]), u[0], self.a);
        out.copy_from_slice(d.as_slice());
    }

    fn error(&self, x: &[f64], w: &[f64]) -> DVector<f64> {
        let e = error_coords(&Vector2::new(x[0], x[1]), &Vector2::new(w[0], w[1]), self.rho);
        DVector::from_column_slice(e.as_slice())
    }

    fn friend(&self, w: &[f64]) -> DVector<f64> {
        DVector::from_element(1, ideal_friend(&Vector2::new(w[0], w[1]), self.a, self.rho).u_star)
    }
}
