use alloc::boxed::Box;
use alloc::vec::Vec;

use super::{Eval, Point, Problem, ProblemDims, WeightedSpaces};
use crate::Result;

/// Wraps a problem and scales its `c_θ` application by `1 + eps` while
/// leaving every other block, including `c_θᵀ`, untouched. Derivative
/// checks must reject it.
pub struct CorruptedThetaJacobian<P: ?Sized> {
    inner: Box<P>,
    eps: f64,
}

impl<P: Problem + ?Sized> CorruptedThetaJacobian<P> {
    pub fn new(inner: Box<P>, eps: f64) -> Self {
        Self { inner, eps }
    }
}

impl<P: Problem + ?Sized> Problem for CorruptedThetaJacobian<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn dims(&self) -> ProblemDims {
        self.inner.dims()
    }
    fn spaces(&self) -> &WeightedSpaces {
        self.inner.spaces()
    }
    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        self.inner.validate_theta(theta)
    }
    fn state_is_linear(&self) -> bool {
        self.inner.state_is_linear()
    }
    fn objective(&self, x: Eval) -> f64 {
        self.inner.objective(x)
    }
    fn residual(&self, x: Eval) -> Vec<f64> {
        self.inner.residual(x)
    }
    fn j_u(&self, x: Eval) -> Vec<f64> {
        self.inner.j_u(x)
    }
    fn j_z(&self, x: Eval) -> Vec<f64> {
        self.inner.j_z(x)
    }
    fn j_theta(&self, x: Eval) -> Vec<f64> {
        self.inner.j_theta(x)
    }
    fn c_u(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        self.inner.c_u(x, v)
    }
    fn c_u_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.inner.c_u_t(x, w)
    }
    fn c_z(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        self.inner.c_z(x, v)
    }
    fn c_z_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.inner.c_z_t(x, w)
    }
    fn c_theta(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        let mut y = self.inner.c_theta(x, v);
        crate::linalg::scale(1.0 + self.eps, &mut y);
        y
    }
    fn c_theta_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.inner.c_theta_t(x, w)
    }
    fn l_uu(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_uu(p, v)
    }
    fn l_uz(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_uz(p, v)
    }
    fn l_zu(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_zu(p, v)
    }
    fn l_zz(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_zz(p, v)
    }
    fn l_utheta(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_utheta(p, v)
    }
    fn l_thetau(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_thetau(p, v)
    }
    fn l_ztheta(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_ztheta(p, v)
    }
    fn l_thetaz(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.inner.l_thetaz(p, v)
    }
    fn state_jacobian_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        self.inner.state_jacobian_solve(x, rhs)
    }
    fn state_jacobian_adjoint_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        self.inner.state_jacobian_adjoint_solve(x, rhs)
    }
}
