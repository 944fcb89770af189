//! Reduced-space Newton solver for the inner optimization problem, with
//! adjoint recovery and a second-order sufficiency check.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{axpy, dense_sym_eig, dot, norm2, scale, scaled, check_len, Matrix, SpdOperator};
use crate::problems::{Eval, Point, Problem};
use crate::{math, Error, Result};

mod sampling;

pub use sampling::{sample_inputs, IterateMode, SamplingPlan, ThetaDistribution};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct OptimizerConfig {
    pub forward_tol: f64,
    pub forward_max_iter: usize,
    /// Absolute tolerance on `‖g‖_{M_Z⁻¹}`.
    pub stationarity_tol: f64,
    /// Tolerance relative to the initial reduced gradient; 0 disables it.
    pub relative_tol: f64,
    pub max_iter: usize,
    /// Relative residual tolerance of the Newton-system CG.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub check_sosc: bool,
    /// Largest `n_z` for which the reduced Hessian is formed densely.
    pub dense_threshold: usize,
    pub lanczos_tol: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            forward_tol: 1e-12,
            forward_max_iter: 50,
            stationarity_tol: 1e-9,
            relative_tol: 0.0,
            max_iter: 100,
            cg_tol: 1e-10,
            cg_max_iter: 1000,
            check_sosc: true,
            dense_threshold: crate::DENSE_THRESHOLD,
            lanczos_tol: 1e-6,
        }
    }
}

/// Initial guess for `(u, z)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InitialIterate {
    pub u_init: Vec<f64>,
    pub z_init: Vec<f64>,
    pub provenance: IterateMode,
}

impl InitialIterate {
    pub fn zero(p: &dyn Problem) -> Self {
        let d = p.dims();
        Self {
            u_init: vec![0.0; d.n_u],
            z_init: vec![0.0; d.n_z],
            provenance: IterateMode::Zero,
        }
    }
}

/// A verified stationary triple `(u₀, z₀, λ₀)` at `θ₀`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimalPoint {
    pub u0: Vec<f64>,
    pub z0: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub theta0: Vec<f64>,
    /// `‖J_z + c_zᵀ λ₀‖_{M_Z⁻¹}`
    pub grad_norm: f64,
    /// Smallest reduced-Hessian eigenvalue; NaN when the check is disabled.
    pub sosc_min_eig: f64,
    pub iterations: usize,
}

impl OptimalPoint {
    pub fn point(&self) -> Point<'_> {
        Point {
            u: &self.u0,
            z: &self.z0,
            lambda: &self.lambda0,
            theta: &self.theta0,
        }
    }
}

/// Solves `c(u, z, θ) = 0` for `u` by Newton's method with backtracking on
/// `‖c‖`, starting from `u_guess`.
pub fn solve_forward(
    p: &dyn Problem,
    z: &[f64],
    theta: &[f64],
    u_guess: &[f64],
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let d = p.dims();
    check_len("forward z", d.n_z, z.len())?;
    check_len("forward u guess", d.n_u, u_guess.len())?;
    p.validate_theta(theta)?;
    let mut u = u_guess.to_vec();
    let res = |u: &[f64]| p.residual(Eval { u, z, theta });
    let mut r = res(&u);
    let r0 = norm2(&r);
    let done = |rn: f64| rn <= cfg.forward_tol || rn <= cfg.forward_tol * r0;
    let mut rn = r0;
    for _ in 0..cfg.forward_max_iter {
        if done(rn) {
            return Ok(u);
        }
        let x = Eval { u: &u, z, theta };
        let step = p.state_jacobian_solve(x, &r)?;
        let mut t = 1.0;
        loop {
            let mut trial = u.clone();
            axpy(-t, &step, &mut trial);
            let tr = res(&trial);
            let tn = norm2(&tr);
            if tn.is_finite() && (tn < rn || done(tn)) {
                u = trial;
                r = tr;
                rn = tn;
                break;
            }
            t *= 0.5;
            if t < 1e-14 {
                return Err(Error::NonConvergence {
                    what: "forward solve",
                    iterations: cfg.forward_max_iter,
                    residual: rn,
                });
            }
        }
    }
    if done(rn) {
        Ok(u)
    } else {
        Err(Error::NonConvergence {
            what: "forward solve",
            iterations: cfg.forward_max_iter,
            residual: rn,
        })
    }
}

/// Solves `c_uᵀ λ = −J_u`.
pub fn solve_adjoint(p: &dyn Problem, u: &[f64], z: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
    let x = Eval { u, z, theta };
    let mut rhs = p.j_u(x);
    scale(-1.0, &mut rhs);
    let lambda = p.state_jacobian_adjoint_solve(x, &rhs)?;
    crate::linalg::ensure_finite(&lambda, "adjoint")?;
    Ok(lambda)
}

/// `g = J_z + c_zᵀ λ`, the reduced gradient in coordinates.
pub fn reduced_gradient(p: &dyn Problem, pt: Point) -> Vec<f64> {
    p.lagrangian_grad_z(pt)
}

/// Reduced Hessian action `H w = ℒ_zz w + ℒ_zu δu + c_zᵀ δλ` with
/// `δu = −c_u⁻¹ c_z w` and `δλ = −c_u⁻ᵀ (ℒ_uu δu + ℒ_uz w)`.
pub fn reduced_hessian_apply(p: &dyn Problem, pt: Point, w: &[f64]) -> Result<Vec<f64>> {
    let x = pt.eval();
    let mut du = p.state_jacobian_solve(x, &p.c_z(x, w))?;
    scale(-1.0, &mut du);
    let mut rhs = p.l_uu(pt, &du);
    axpy(1.0, &p.l_uz(pt, w), &mut rhs);
    let mut dl = p.state_jacobian_adjoint_solve(x, &rhs)?;
    scale(-1.0, &mut dl);
    let mut hw = p.l_zz(pt, w);
    axpy(1.0, &p.l_zu(pt, &du), &mut hw);
    axpy(1.0, &p.c_z_t(x, &dl), &mut hw);
    Ok(hw)
}

// ‖g‖_{M⁻¹} together with M⁻¹g.
fn dual_norm(m: &dyn SpdOperator, g: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mg = m.solve(g)?;
    Ok((math::sqrt(dot(g, &mg).max(0.0)), mg))
}

// M⁻¹-preconditioned CG on H s = −g with a negative-curvature exit.
fn newton_direction(
    p: &dyn Problem,
    pt: Point,
    g: &[f64],
    cfg: &OptimizerConfig,
) -> Result<Vec<f64>> {
    let m = p.spaces().m_z.as_ref();
    let n = g.len();
    let mut s = vec![0.0; n];
    let mut r = scaled(-1.0, g);
    let mut y = m.solve(&r)?;
    let mut ry = dot(&r, &y);
    let target = cfg.cg_tol * math::sqrt(ry.max(0.0));
    let mut d = y.clone();
    for it in 0..cfg.cg_max_iter {
        if math::sqrt(ry.max(0.0)) <= target {
            break;
        }
        let hd = reduced_hessian_apply(p, pt, &d)?;
        let curv = dot(&d, &hd);
        if !(curv > 0.0) {
            if it == 0 {
                return Ok(scaled(-1.0, &m.solve(g)?));
            }
            break;
        }
        let a = ry / curv;
        axpy(a, &d, &mut s);
        axpy(-a, &hd, &mut r);
        y = m.solve(&r)?;
        let ry_new = dot(&r, &y);
        let beta = ry_new / ry;
        ry = ry_new;
        for (di, yi) in d.iter_mut().zip(&y) {
            *di = yi + beta * *di;
        }
    }
    Ok(s)
}

/// Reduced-space Newton–CG with Armijo backtracking. Returns the final
/// iterate with its recomputed adjoint, after verifying second-order
/// sufficiency when enabled.
pub fn solve_optimization(
    p: &dyn Problem,
    theta0: &[f64],
    init: &InitialIterate,
    cfg: &OptimizerConfig,
) -> Result<OptimalPoint> {
    let d = p.dims();
    check_len("theta0", d.n_theta, theta0.len())?;
    check_len("initial u", d.n_u, init.u_init.len())?;
    check_len("initial z", d.n_z, init.z_init.len())?;
    p.validate_theta(theta0)?;
    let m = p.spaces().m_z.as_ref();
    let theta = theta0;

    let mut z = init.z_init.clone();
    let mut u = solve_forward(p, &z, theta, &init.u_init, cfg)?;
    let mut f = p.objective(Eval { u: &u, z: &z, theta });
    let mut tol = cfg.stationarity_tol;
    let mut iterations = 0;
    loop {
        let lambda = solve_adjoint(p, &u, &z, theta)?;
        let pt = Point {
            u: &u,
            z: &z,
            lambda: &lambda,
            theta,
        };
        let g = reduced_gradient(p, pt);
        let (gn, mg) = dual_norm(m, &g)?;
        if iterations == 0 {
            tol = tol.max(cfg.relative_tol * gn);
        }
        if gn <= tol {
            let sosc_min_eig = if cfg.check_sosc {
                let e = check_sosc(p, pt, cfg)?;
                if !(e > 0.0) {
                    return Err(Error::NotMinimizer { min_eig: e });
                }
                e
            } else {
                f64::NAN
            };
            return Ok(OptimalPoint {
                u0: u,
                z0: z,
                lambda0: lambda,
                theta0: theta.to_vec(),
                grad_norm: gn,
                sosc_min_eig,
                iterations,
            });
        }
        if iterations == cfg.max_iter {
            return Err(Error::NonConvergence {
                what: "reduced Newton",
                iterations,
                residual: gn,
            });
        }

        let mut s = newton_direction(p, pt, &g, cfg)?;
        let mut slope = dot(&g, &s);
        if !(slope < 0.0) {
            s = scaled(-1.0, &mg);
            slope = -gn * gn;
        }
        let mut t = 1.0;
        loop {
            let mut zt = z.clone();
            axpy(t, &s, &mut zt);
            let trial = solve_forward(p, &zt, theta, &u, cfg);
            if let Ok(ut) = trial {
                let ft = p.objective(Eval { u: &ut, z: &zt, theta });
                if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                    z = zt;
                    u = ut;
                    f = ft;
                    break;
                }
            }
            t *= 0.5;
            if t < 1e-14 {
                return Err(Error::LineSearch {
                    iteration: iterations,
                    step: t,
                    grad_norm: gn,
                });
            }
        }
        iterations += 1;
    }
}

/// Smallest eigenvalue of the reduced Hessian at a stationary point.
///
/// The Hessian is formed column by column when `n_z` is at most
/// `cfg.dense_threshold`, otherwise estimated by Lanczos iteration.
pub fn check_sosc(p: &dyn Problem, pt: Point, cfg: &OptimizerConfig) -> Result<f64> {
    let n = p.dims().n_z;
    if n <= cfg.dense_threshold {
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            cols.push(reduced_hessian_apply(p, pt, &crate::linalg::unit(n, j))?);
        }
        let h = Matrix::from_columns(n, &cols).symmetrized();
        let eig = dense_sym_eig(&h)?;
        Ok(*eig.values.last().unwrap_or(&f64::NAN))
    } else {
        lanczos_min_eig(|v| reduced_hessian_apply(p, pt, v), n, cfg.lanczos_tol)
    }
}

// Lanczos with full reorthogonalization, stopping when the smallest Ritz
// value settles to `tol` relative.
fn lanczos_min_eig(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    n: usize,
    tol: f64,
) -> Result<f64> {
    let mut q = crate::rng::normal_vector(0x1a2c, crate::rng::Domain::Test, 0, 0, n);
    let qn = norm2(&q);
    scale(1.0 / qn, &mut q);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut prev = f64::INFINITY;
    for k in 0..n {
        let mut w = apply(&basis[k])?;
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let t = Matrix::from_fn(k + 1, k + 1, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let ritz = *dense_sym_eig(&t)?.values.last().unwrap();
        let bn = norm2(&w);
        if (ritz - prev).abs() <= tol * ritz.abs() || bn <= 1e-14 * a.abs().max(1.0) {
            return Ok(ritz);
        }
        prev = ritz;
        beta.push(bn);
        scale(1.0 / bn, &mut w);
        basis.push(w);
    }
    Ok(prev)
}
