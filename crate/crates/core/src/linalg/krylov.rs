//! Krylov solvers: conjugate gradients for SPD systems and MINRES for
//! symmetric indefinite ones.

use alloc::vec;
use alloc::vec::Vec;

use super::{axpy, check_len, dot, norm2, LinearMap, SolverStats};
use crate::{math, Result};

fn true_relative_residual(op: &dyn LinearMap, x: &[f64], rhs: &[f64], rhs_norm: f64) -> (Vec<f64>, f64) {
    let mut r = op.apply(x);
    for (ri, bi) in r.iter_mut().zip(rhs) {
        *ri = bi - *ri;
    }
    let rel = norm2(&r) / rhs_norm;
    (r, rel)
}

/// Conjugate gradients for `op x = rhs` with `op` symmetric positive definite.
///
/// Convergence is judged on the recomputed residual `‖rhs − op x‖ / ‖rhs‖`;
/// when the recurrence claims convergence but the true residual disagrees,
/// the iteration restarts from the true residual. A non-positive curvature
/// direction stops the iteration with `breakdown = true` and the best iterate.
pub fn cg_solve(op: &dyn LinearMap, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolverStats)> {
    check_len("cg_solve operator", op.nrows(), op.ncols())?;
    check_len("cg_solve rhs", op.nrows(), rhs.len())?;
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let rhs_norm = norm2(rhs);
    if rhs_norm == 0.0 {
        return Ok((
            x,
            SolverStats {
                iterations: 0,
                final_relative_residual: 0.0,
                converged: true,
                breakdown: false,
            },
        ));
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    let mut it = 0;
    let mut breakdown = false;
    while it < max_iter {
        it += 1;
        op.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            breakdown = true;
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if math::sqrt(rr_new) <= tol * rhs_norm {
            let (r_true, rel) = true_relative_residual(op, &x, rhs, rhs_norm);
            if rel <= tol {
                return Ok((
                    x,
                    SolverStats {
                        iterations: it,
                        final_relative_residual: rel,
                        converged: true,
                        breakdown: false,
                    },
                ));
            }
            r = r_true;
            p.copy_from_slice(&r);
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    let (_, rel) = true_relative_residual(op, &x, rhs, rhs_norm);
    Ok((
        x,
        SolverStats {
            iterations: it,
            final_relative_residual: rel,
            converged: rel <= tol && !breakdown,
            breakdown,
        },
    ))
}

/// MINRES for symmetric (possibly indefinite) `op x = rhs`.
///
/// Restarts from the true residual if the short-recurrence estimate and the
/// recomputed residual disagree at the tolerance.
pub fn minres_solve(op: &dyn LinearMap, rhs: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolverStats)> {
    check_len("minres_solve operator", op.nrows(), op.ncols())?;
    check_len("minres_solve rhs", op.nrows(), rhs.len())?;
    let n = rhs.len();
    let rhs_norm = norm2(rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok((
            x,
            SolverStats {
                iterations: 0,
                final_relative_residual: 0.0,
                converged: true,
                breakdown: false,
            },
        ));
    }
    let mut total = 0;
    let mut residual = rhs.to_vec();
    let mut breakdown = false;
    loop {
        let budget = max_iter.saturating_sub(total);
        if budget == 0 {
            break;
        }
        // Relative target for this cycle, measured against the original rhs.
        let cycle_norm = norm2(&residual);
        let cycle_tol = tol * rhs_norm / cycle_norm;
        let (dx, its, lucky) = minres_cycle(op, &residual, cycle_tol, budget);
        total += its;
        axpy(1.0, &dx, &mut x);
        let (r_true, rel) = true_relative_residual(op, &x, rhs, rhs_norm);
        if rel <= tol {
            return Ok((
                x,
                SolverStats {
                    iterations: total,
                    final_relative_residual: rel,
                    converged: true,
                    breakdown: false,
                },
            ));
        }
        if its == 0 || (lucky && norm2(&r_true) >= cycle_norm) {
            breakdown = lucky;
            break;
        }
        residual = r_true;
    }
    let (_, rel) = true_relative_residual(op, &x, rhs, rhs_norm);
    Ok((
        x,
        SolverStats {
            iterations: total,
            final_relative_residual: rel,
            converged: rel <= tol,
            breakdown,
        },
    ))
}

/// One unpreconditioned MINRES run from a zero initial guess. Returns the
/// update, iterations used, and whether the Lanczos process terminated.
fn minres_cycle(op: &dyn LinearMap, b: &[f64], tol: f64, max_iter: usize) -> (Vec<f64>, usize, bool) {
    let n = b.len();
    let mut x = vec![0.0; n];
    let beta1 = norm2(b);
    let mut r1 = b.to_vec();
    let mut r2 = b.to_vec();
    let mut y = b.to_vec();
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut it = 0;
    while it < max_iter {
        it += 1;
        let s = 1.0 / beta;
        for (vi, yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        op.apply_into(&v, &mut y);
        if it >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        core::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        oldb = beta;
        beta = norm2(&r2);

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = math::hypot(gbar, beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        core::mem::swap(&mut w1, &mut w2);
        core::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
        }
        axpy(phi, &w, &mut x);

        if phibar <= tol * beta1 {
            return (x, it, false);
        }
        if beta <= f64::EPSILON * beta1 {
            return (x, it, true);
        }
    }
    (x, it, false)
}
