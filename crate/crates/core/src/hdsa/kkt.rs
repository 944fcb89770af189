use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use crate::linalg::{
    axpy, cg_solve, check_len, lu, minres_solve, norm2, scale, sub, to_dense, FnMap, LinearMap, Lu, Matrix,
    SolverStats,
};
use crate::optimizer::{reduced_hessian_apply, OptimalPoint};
use crate::problems::{Point, Problem, ProblemDims};
use crate::{Error, Result};

/// How systems with the KKT operator are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum KktStrategy {
    /// Dense LU up to the dense threshold, reduced-space elimination above.
    #[default]
    Auto,
    Dense,
    Minres,
    /// Eliminates `u` and `λ` with state-Jacobian solves and runs CG on the
    /// reduced Hessian.
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct KktConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub strategy: KktStrategy,
    /// Retry with dense LU when an iterative solve fails and the system is
    /// small enough.
    pub dense_fallback: bool,
    pub dense_threshold: usize,
}

impl Default for KktConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 5000,
            strategy: KktStrategy::Auto,
            dense_fallback: true,
            dense_threshold: crate::DENSE_THRESHOLD,
        }
    }
}

/// Counters accumulated over all solves of one operator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KktStats {
    pub solves: usize,
    pub iterations: usize,
    pub max_relative_residual: f64,
    pub dense_fallbacks: usize,
}

/// The KKT operator
///
/// ```text
/// [ ℒ_uu  ℒ_uz  c_uᵀ ]
/// [ ℒ_zu  ℒ_zz  c_zᵀ ]
/// [ c_u   c_z   0    ]
/// ```
///
/// at an optimal point, acting on stacked `(u, z, λ)` vectors.
pub struct KktOperator<'a> {
    problem: &'a dyn Problem,
    point: &'a OptimalPoint,
    cfg: KktConfig,
    dims: ProblemDims,
    strategy: KktStrategy,
    dense: Option<Lu>,
    // Factored reduced Hessian for the reduced strategy with small n_z.
    reduced: Option<Lu>,
    solves: AtomicUsize,
    iterations: AtomicUsize,
    max_residual: AtomicU64,
    fallbacks: AtomicUsize,
}

impl<'a> KktOperator<'a> {
    pub fn new(problem: &'a dyn Problem, point: &'a OptimalPoint, cfg: KktConfig) -> Result<Self> {
        let dims = problem.dims();
        check_len("optimal u", dims.n_u, point.u0.len())?;
        check_len("optimal z", dims.n_z, point.z0.len())?;
        check_len("optimal lambda", dims.n_lambda, point.lambda0.len())?;
        check_len("optimal theta", dims.n_theta, point.theta0.len())?;
        let n = dims.kkt();
        let strategy = match cfg.strategy {
            KktStrategy::Auto if n <= cfg.dense_threshold => KktStrategy::Dense,
            KktStrategy::Auto => KktStrategy::Reduced,
            s => s,
        };
        if strategy == KktStrategy::Reduced && dims.n_lambda != dims.n_u {
            return Err(Error::InvalidConfig(
                "reduced KKT solves need a square state Jacobian".into(),
            ));
        }
        let mut op = Self {
            problem,
            point,
            cfg,
            dims,
            strategy,
            dense: None,
            reduced: None,
            solves: AtomicUsize::new(0),
            iterations: AtomicUsize::new(0),
            max_residual: AtomicU64::new(0),
            fallbacks: AtomicUsize::new(0),
        };
        match strategy {
            KktStrategy::Dense => op.dense = Some(op.factor()?),
            KktStrategy::Reduced if dims.n_z <= op.cfg.dense_threshold => {
                let pt = point.point();
                let cols = (0..dims.n_z)
                    .map(|j| reduced_hessian_apply(problem, pt, &crate::linalg::unit(dims.n_z, j)))
                    .collect::<Result<Vec<_>>>()?;
                op.reduced = Some(lu(&Matrix::from_columns(dims.n_z, &cols).symmetrized())?);
            }
            _ => {}
        }
        Ok(op)
    }

    fn factor(&self) -> Result<Lu> {
        let n = self.dims.kkt();
        if n > self.cfg.dense_threshold {
            return Err(Error::DenseThresholdExceeded {
                dim: n,
                threshold: self.cfg.dense_threshold,
            });
        }
        lu(&to_dense(self))
    }

    pub fn problem(&self) -> &'a dyn Problem {
        self.problem
    }

    pub fn optimal_point(&self) -> &'a OptimalPoint {
        self.point
    }

    pub fn point(&self) -> Point<'a> {
        self.point.point()
    }

    pub fn dims(&self) -> ProblemDims {
        self.dims
    }

    /// The strategy in effect after resolving [`KktStrategy::Auto`].
    pub fn strategy(&self) -> KktStrategy {
        self.strategy
    }

    pub fn stats(&self) -> KktStats {
        KktStats {
            solves: self.solves.load(Ordering::Relaxed),
            iterations: self.iterations.load(Ordering::Relaxed),
            max_relative_residual: f64::from_bits(self.max_residual.load(Ordering::Relaxed)),
            dense_fallbacks: self.fallbacks.load(Ordering::Relaxed),
        }
    }

    fn split<'v>(&self, v: &'v [f64]) -> (&'v [f64], &'v [f64], &'v [f64]) {
        let (u, rest) = v.split_at(self.dims.n_u);
        let (z, l) = rest.split_at(self.dims.n_z);
        (u, z, l)
    }

    fn record(&self, stats: &SolverStats) {
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.iterations.fetch_add(stats.iterations, Ordering::Relaxed);
        // Non-negative floats order like their bit patterns.
        self.max_residual
            .fetch_max(stats.final_relative_residual.max(0.0).to_bits(), Ordering::Relaxed);
    }

    fn relative_residual(&self, rhs: &[f64], x: &[f64]) -> f64 {
        let r = sub(rhs, &self.apply(x));
        let b = norm2(rhs);
        if b > 0.0 {
            norm2(&r) / b
        } else {
            norm2(&r)
        }
    }

    /// Solves `𝒦 x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
        check_len("kkt rhs", self.dims.kkt(), rhs.len())?;
        if norm2(rhs) == 0.0 {
            let stats = SolverStats {
                converged: true,
                ..Default::default()
            };
            self.record(&stats);
            return Ok((vec![0.0; rhs.len()], stats));
        }
        let attempt = match self.strategy {
            KktStrategy::Dense => self.solve_dense(rhs),
            KktStrategy::Minres => self.solve_minres(rhs),
            _ => self.solve_reduced(rhs),
        };
        let out = match attempt {
            Ok((x, s)) if s.converged => Ok((x, s)),
            other if self.cfg.dense_fallback
                && self.strategy != KktStrategy::Dense
                && self.dims.kkt() <= self.cfg.dense_threshold =>
            {
                let _ = other;
                self.fallbacks.fetch_add(1, Ordering::Relaxed);
                let lu = self.factor()?;
                let x = lu.solve(rhs);
                let res = self.relative_residual(rhs, &x);
                Ok((
                    x,
                    SolverStats {
                        iterations: 0,
                        final_relative_residual: res,
                        converged: true,
                        breakdown: false,
                    },
                ))
            }
            Ok((_, s)) => Err(Error::NonConvergence {
                what: "KKT solve",
                iterations: s.iterations,
                residual: s.final_relative_residual,
            }),
            Err(e) => Err(e),
        }?;
        crate::linalg::ensure_finite(&out.0, "KKT solution")?;
        self.record(&out.1);
        Ok(out)
    }

    fn solve_dense(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
        let lu = self.dense.as_ref().expect("dense strategy keeps a factorization");
        let x = lu.solve(rhs);
        let res = self.relative_residual(rhs, &x);
        Ok((
            x,
            SolverStats {
                iterations: 0,
                final_relative_residual: res,
                converged: true,
                breakdown: false,
            },
        ))
    }

    fn solve_minres(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
        minres_solve(self, rhs, self.cfg.tol, self.cfg.max_iter)
    }

    // Block elimination of u and λ, CG on the reduced Hessian for z, then
    // refinement on the full residual.
    fn solve_reduced(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
        let mut x = vec![0.0; rhs.len()];
        let mut r = rhs.to_vec();
        let bnorm = norm2(rhs);
        let mut total = SolverStats::default();
        for _ in 0..4 {
            let (dx, stats) = self.reduced_pass(&r)?;
            total.iterations += stats.iterations;
            total.breakdown |= stats.breakdown;
            axpy(1.0, &dx, &mut x);
            r = sub(rhs, &self.apply(&x));
            total.final_relative_residual = norm2(&r) / bnorm;
            if total.final_relative_residual <= self.cfg.tol {
                total.converged = true;
                break;
            }
        }
        Ok((x, total))
    }

    fn reduced_pass(&self, rhs: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
        let p = self.problem;
        let pt = self.point();
        let x = pt.eval();
        let (r_u, r_z, r_l) = self.split(rhs);

        // u = a0 − c_u⁻¹ c_z x_z
        let a0 = p.state_jacobian_solve(x, r_l)?;
        let mut t = sub(r_u, &p.l_uu(pt, &a0));
        let t_adj = p.state_jacobian_adjoint_solve(x, &t)?;
        let mut rhs_z = sub(r_z, &p.l_zu(pt, &a0));
        axpy(-1.0, &p.c_z_t(x, &t_adj), &mut rhs_z);

        let (xz, stats) = match &self.reduced {
            Some(h) => (h.solve(&rhs_z), SolverStats::default()),
            None => self.reduced_cg(&rhs_z)?,
        };

        let mut cz = p.c_z(x, &xz);
        scale(-1.0, &mut cz);
        let mut xu = p.state_jacobian_solve(x, &cz)?;
        axpy(1.0, &a0, &mut xu);
        t = sub(r_u, &p.l_uu(pt, &xu));
        axpy(-1.0, &p.l_uz(pt, &xz), &mut t);
        let xl = p.state_jacobian_adjoint_solve(x, &t)?;

        let mut out = xu;
        out.extend_from_slice(&xz);
        out.extend_from_slice(&xl);
        Ok((out, stats))
    }
}

impl KktOperator<'_> {
    fn reduced_cg(&self, rhs_z: &[f64]) -> Result<(Vec<f64>, SolverStats)> {
        let (p, pt) = (self.problem, self.point());
        let failed = core::sync::atomic::AtomicBool::new(false);
        let h = FnMap::new(self.dims.n_z, self.dims.n_z, |w: &[f64], y: &mut [f64]| {
            match reduced_hessian_apply(p, pt, w) {
                Ok(v) => y.copy_from_slice(&v),
                Err(_) => {
                    y.iter_mut().for_each(|v| *v = f64::NAN);
                    failed.store(true, Ordering::Relaxed);
                }
            }
        });
        let out = cg_solve(&h, rhs_z, 0.1 * self.cfg.tol, self.cfg.max_iter)?;
        if failed.load(Ordering::Relaxed) {
            return Err(Error::NonFinite("reduced Hessian application"));
        }
        Ok(out)
    }
}

impl LinearMap for KktOperator<'_> {
    fn nrows(&self) -> usize {
        self.dims.kkt()
    }

    fn ncols(&self) -> usize {
        self.dims.kkt()
    }

    fn apply_into(&self, v: &[f64], y: &mut [f64]) {
        let p = self.problem;
        let pt = self.point();
        let x = pt.eval();
        let (u, z, l) = self.split(v);
        let mut ru = p.l_uu(pt, u);
        axpy(1.0, &p.l_uz(pt, z), &mut ru);
        axpy(1.0, &p.c_u_t(x, l), &mut ru);
        let mut rz = p.l_zu(pt, u);
        axpy(1.0, &p.l_zz(pt, z), &mut rz);
        axpy(1.0, &p.c_z_t(x, l), &mut rz);
        let mut rl = p.c_u(x, u);
        axpy(1.0, &p.c_z(x, z), &mut rl);
        let (nu, nz) = (self.dims.n_u, self.dims.n_z);
        y[..nu].copy_from_slice(&ru);
        y[nu..nu + nz].copy_from_slice(&rz);
        y[nu + nz..].copy_from_slice(&rl);
    }
}
