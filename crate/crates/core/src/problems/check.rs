use alloc::string::String;
use alloc::vec::Vec;

use super::{Point, Problem};
use crate::linalg::{dot, norm2, scale, sub};
use crate::rng::{Domain, Stream};
use crate::{Error, Result};

/// Outcome for one derivative block.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlockCheck {
    pub block: String,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivativeReport {
    pub h: f64,
    pub blocks: Vec<BlockCheck>,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.blocks.iter().all(|b| b.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BlockCheck> {
        self.blocks.iter().filter(|b| !b.passed)
    }
}

/// Tolerance for transpose pairings and solve round trips.
const PAIRING_TOL: f64 = 1e-10;

fn relative(analytic: &[f64], fd: &[f64]) -> f64 {
    let diff = norm2(&sub(analytic, fd));
    let denom = norm2(analytic).max(norm2(fd));
    if denom <= 1e-10 {
        diff
    } else {
        diff / denom
    }
}

fn pairing_error(lhs: f64, rhs: f64, scale: f64) -> f64 {
    let d = (lhs - rhs).abs();
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

fn direction(seed: u64, slot: u64, n: usize) -> Vec<f64> {
    let mut v = Stream::new(seed, Domain::Test, slot, 0).normal_vec(n);
    let nv = norm2(&v);
    if nv > 0.0 {
        scale(1.0 / nv, &mut v);
    }
    v
}

/// Compares every derivative block of `p` against central finite
/// differences with step `h`, checks transpose pairings with random
/// vectors, and round-trips the state Jacobian solves.
///
/// Finite-difference blocks pass when their relative error is at most
/// `max(50 h², 1e-6)`.
pub fn check_derivatives(p: &dyn Problem, point: Point, h: f64) -> Result<DerivativeReport> {
    if !(1e-7..=1e-2).contains(&h) {
        return Err(Error::InvalidParameter(alloc::format!(
            "finite-difference step {h} outside [1e-7, 1e-2]"
        )));
    }
    let d = p.dims();
    crate::linalg::check_len("point u", d.n_u, point.u.len())?;
    crate::linalg::check_len("point z", d.n_z, point.z.len())?;
    crate::linalg::check_len("point lambda", d.n_lambda, point.lambda.len())?;
    crate::linalg::check_len("point theta", d.n_theta, point.theta.len())?;

    let fd_tol = (50.0 * h * h).max(1e-6);
    let seed = 0x5eed;
    let du = direction(seed, 0, d.n_u);
    let dz = direction(seed, 1, d.n_z);
    let dt = direction(seed, 2, d.n_theta);
    let wl = direction(seed, 3, d.n_lambda);
    let wu = direction(seed, 4, d.n_u);
    let wz = direction(seed, 5, d.n_z);

    let shift = |base: &[f64], dir: &[f64], t: f64| -> Vec<f64> {
        let mut v = base.to_vec();
        crate::linalg::axpy(t, dir, &mut v);
        v
    };
    // Point displaced along one of u (0), z (1), θ (2).
    let moved = |which: usize, t: f64| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match which {
            0 => (shift(point.u, &du, t), point.z.to_vec(), point.theta.to_vec()),
            1 => (point.u.to_vec(), shift(point.z, &dz, t), point.theta.to_vec()),
            _ => (point.u.to_vec(), point.z.to_vec(), shift(point.theta, &dt, t)),
        }
    };
    let central = |which: usize, f: &dyn Fn(Point) -> Vec<f64>| -> Vec<f64> {
        let (u1, z1, t1) = moved(which, h);
        let (u0, z0, t0) = moved(which, -h);
        let plus = f(Point {
            u: &u1,
            z: &z1,
            lambda: point.lambda,
            theta: &t1,
        });
        let minus = f(Point {
            u: &u0,
            z: &z0,
            lambda: point.lambda,
            theta: &t0,
        });
        let mut g = sub(&plus, &minus);
        scale(0.5 / h, &mut g);
        g
    };

    let x = point.eval();
    let mut blocks = Vec::new();
    let mut push = |name: &str, error: f64, tolerance: f64| {
        blocks.push(BlockCheck {
            block: name.into(),
            error,
            tolerance,
            passed: error.is_finite() && error <= tolerance,
        });
    };

    let objective = |q: Point| alloc::vec![p.objective(q.eval())];
    push("J_u", relative(&[dot(&p.j_u(x), &du)], &central(0, &objective)), fd_tol);
    push("J_z", relative(&[dot(&p.j_z(x), &dz)], &central(1, &objective)), fd_tol);
    push("J_theta", relative(&[dot(&p.j_theta(x), &dt)], &central(2, &objective)), fd_tol);

    let residual = |q: Point| p.residual(q.eval());
    push("c_u", relative(&p.c_u(x, &du), &central(0, &residual)), fd_tol);
    push("c_z", relative(&p.c_z(x, &dz), &central(1, &residual)), fd_tol);
    push("c_theta", relative(&p.c_theta(x, &dt), &central(2, &residual)), fd_tol);

    let grad_u = |q: Point| p.lagrangian_grad_u(q);
    let grad_z = |q: Point| p.lagrangian_grad_z(q);
    push("L_uu", relative(&p.l_uu(point, &du), &central(0, &grad_u)), fd_tol);
    push("L_uz", relative(&p.l_uz(point, &dz), &central(1, &grad_u)), fd_tol);
    push("L_zu", relative(&p.l_zu(point, &du), &central(0, &grad_z)), fd_tol);
    push("L_zz", relative(&p.l_zz(point, &dz), &central(1, &grad_z)), fd_tol);
    push("L_utheta", relative(&p.l_utheta(point, &dt), &central(2, &grad_u)), fd_tol);
    push("L_ztheta", relative(&p.l_ztheta(point, &dt), &central(2, &grad_z)), fd_tol);

    // ⟨A v, w⟩ = ⟨v, Aᵀ w⟩, scaled by ‖A v‖‖w‖ + ‖v‖‖Aᵀ w‖.
    let pair = |av: &[f64], w: &[f64], v: &[f64], atw: &[f64]| {
        let s = norm2(av) * norm2(w) + norm2(v) * norm2(atw);
        pairing_error(dot(av, w), dot(v, atw), s)
    };
    push("c_u^T", pair(&p.c_u(x, &du), &wl, &du, &p.c_u_t(x, &wl)), PAIRING_TOL);
    push("c_z^T", pair(&p.c_z(x, &dz), &wl, &dz, &p.c_z_t(x, &wl)), PAIRING_TOL);
    push("c_theta^T", pair(&p.c_theta(x, &dt), &wl, &dt, &p.c_theta_t(x, &wl)), PAIRING_TOL);
    push("L_uu^T", pair(&p.l_uu(point, &du), &wu, &du, &p.l_uu(point, &wu)), PAIRING_TOL);
    push("L_zz^T", pair(&p.l_zz(point, &dz), &wz, &dz, &p.l_zz(point, &wz)), PAIRING_TOL);
    push("L_zu^T", pair(&p.l_uz(point, &dz), &wu, &dz, &p.l_zu(point, &wu)), PAIRING_TOL);
    push(
        "L_thetau^T",
        pair(&p.l_utheta(point, &dt), &wu, &dt, &p.l_thetau(point, &wu)),
        PAIRING_TOL,
    );
    push(
        "L_thetaz^T",
        pair(&p.l_ztheta(point, &dt), &wz, &dt, &p.l_thetaz(point, &wz)),
        PAIRING_TOL,
    );

    let round_trip = |solved: Result<Vec<f64>>, apply: &dyn Fn(&[f64]) -> Vec<f64>, rhs: &[f64]| {
        match solved {
            Ok(s) => relative(&apply(&s), rhs),
            Err(_) => f64::INFINITY,
        }
    };
    push(
        "state_solve",
        round_trip(p.state_jacobian_solve(x, &wl), &|s| p.c_u(x, s), &wl),
        PAIRING_TOL,
    );
    push(
        "adjoint_solve",
        round_trip(p.state_jacobian_adjoint_solve(x, &wu), &|s| p.c_u_t(x, s), &wu),
        PAIRING_TOL,
    );

    Ok(DerivativeReport { h, blocks })
}
