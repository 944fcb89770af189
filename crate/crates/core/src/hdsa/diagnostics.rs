use alloc::vec::Vec;

use super::sensitivity::SensitivityOperator;
use crate::linalg::{axpy, sub};
use crate::optimizer::{solve_adjoint, solve_forward, solve_optimization, InitialIterate, OptimalPoint, OptimizerConfig};
use crate::problems::{Eval, Problem};
use crate::{Error, Result};

/// True change of the optimal solution against its linear prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Perturbation {
    pub delta: f64,
    /// `‖z_opt(θ₀ + δφ̂) − z_opt(θ₀)‖_Z`
    pub lhs: f64,
    /// `|δ| ‖D φ̂‖_Z`
    pub prediction: f64,
    /// `lhs / prediction`; NaN when both vanish.
    pub ratio: f64,
}

/// Re-solves the optimization at `θ₀ + δ φ̂`, with `φ̂ = φ / ‖φ‖_Θ`,
/// warm-started from the base optimum, and compares the change in `z`
/// with the first-order prediction.
pub fn perturbation_check(
    d: &SensitivityOperator,
    phi: &[f64],
    delta: f64,
    cfg: &OptimizerConfig,
) -> Result<Perturbation> {
    let problem = d.kkt().problem();
    let base = d.kkt().optimal_point();
    let spaces = problem.spaces();
    let norm = spaces.m_theta.norm(phi);
    if !(norm > 0.0) {
        return Err(Error::ZeroDirection);
    }
    let prediction = delta.abs() * d.directional(phi)?;
    let lhs = if delta == 0.0 {
        0.0
    } else {
        let mut theta = base.theta0.clone();
        axpy(delta / norm, phi, &mut theta);
        let init = InitialIterate {
            u_init: base.u0.clone(),
            z_init: base.z0.clone(),
            provenance: Default::default(),
        };
        let moved = solve_optimization(problem, &theta, &init, cfg)?;
        spaces.m_z.norm(&sub(&moved.z0, &base.z0))
    };
    let ratio = if prediction > 0.0 {
        lhs / prediction
    } else if lhs == 0.0 {
        f64::NAN
    } else {
        f64::INFINITY
    };
    Ok(Perturbation {
        delta,
        lhs,
        prediction,
        ratio,
    })
}

/// `|∂g/∂θᵢ|` for the fixed-control reduced objective
/// `g(θ) = J(u(z₀, θ), z₀, θ)`, by one forward and one adjoint solve.
pub fn traditional_comparison(
    problem: &dyn Problem,
    point: &OptimalPoint,
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let (z, theta) = (&point.z0, &point.theta0);
    let u = solve_forward(problem, z, theta, &point.u0, cfg)?;
    let lambda = solve_adjoint(problem, &u, z, theta)?;
    let x = Eval { u: &u, z, theta };
    let mut g = problem.j_theta(x);
    axpy(1.0, &problem.c_theta_t(x, &lambda), &mut g);
    Ok(g.into_iter().map(f64::abs).collect())
}
