use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::{Eval, Point, Problem, ProblemDims, SetPartition, WeightedSpaces};
use crate::linalg::{check_len, Identity};
use crate::{math, Result};

/// `min (u − 2)² + 0.0005 z²  s.t.  u = 1/(1 + e^{−θ₁ z}) + θ₂`, written as
/// `c(u, z, θ) = u − s(θ₁ z) − θ₂ = 0` with identity weighting.
pub struct LogisticToy {
    spaces: WeightedSpaces,
}

impl Default for LogisticToy {
    fn default() -> Self {
        Self::new()
    }
}

impl LogisticToy {
    pub fn new() -> Self {
        Self {
            spaces: WeightedSpaces {
                m_theta: Box::new(Identity(2)),
                m_z: Box::new(Identity(1)),
                partition: Some(SetPartition::new(
                    vec![
                        super::ParamSet {
                            name: "theta1".into(),
                            range: 0..1,
                        },
                        super::ParamSet {
                            name: "theta2".into(),
                            range: 1..2,
                        },
                    ],
                    2,
                )
                .expect("static partition")),
            },
        }
    }
}

fn logistic(t: f64) -> f64 {
    1.0 / (1.0 + math::exp(-t))
}

// s, s', s''
fn logistic_derivs(t: f64) -> (f64, f64, f64) {
    let s = logistic(t);
    let d1 = s * (1.0 - s);
    (s, d1, d1 * (1.0 - 2.0 * s))
}

impl Problem for LogisticToy {
    fn name(&self) -> &str {
        "logistic_toy"
    }

    fn dims(&self) -> ProblemDims {
        ProblemDims {
            n_u: 1,
            n_z: 1,
            n_theta: 2,
            n_lambda: 1,
        }
    }

    fn spaces(&self) -> &WeightedSpaces {
        &self.spaces
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        check_len("logistic theta", 2, theta.len())
    }

    fn state_is_linear(&self) -> bool {
        true
    }

    fn objective(&self, x: Eval) -> f64 {
        (x.u[0] - 2.0) * (x.u[0] - 2.0) + 0.0005 * x.z[0] * x.z[0]
    }

    fn residual(&self, x: Eval) -> Vec<f64> {
        vec![x.u[0] - logistic(x.theta[0] * x.z[0]) - x.theta[1]]
    }

    fn j_u(&self, x: Eval) -> Vec<f64> {
        vec![2.0 * (x.u[0] - 2.0)]
    }

    fn j_z(&self, x: Eval) -> Vec<f64> {
        vec![0.001 * x.z[0]]
    }

    fn j_theta(&self, _x: Eval) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn c_u(&self, _x: Eval, v: &[f64]) -> Vec<f64> {
        vec![v[0]]
    }

    fn c_u_t(&self, _x: Eval, w: &[f64]) -> Vec<f64> {
        vec![w[0]]
    }

    fn c_z(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        let (_, d1, _) = logistic_derivs(x.theta[0] * x.z[0]);
        vec![-x.theta[0] * d1 * v[0]]
    }

    fn c_z_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.c_z(x, w)
    }

    fn c_theta(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        let (_, d1, _) = logistic_derivs(x.theta[0] * x.z[0]);
        vec![-x.z[0] * d1 * v[0] - v[1]]
    }

    fn c_theta_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        let (_, d1, _) = logistic_derivs(x.theta[0] * x.z[0]);
        vec![-x.z[0] * d1 * w[0], -w[0]]
    }

    fn l_uu(&self, _p: Point, v: &[f64]) -> Vec<f64> {
        vec![2.0 * v[0]]
    }

    fn l_uz(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0]
    }

    fn l_zu(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0]
    }

    fn l_zz(&self, p: Point, v: &[f64]) -> Vec<f64> {
        let t1 = p.theta[0];
        let (_, _, d2) = logistic_derivs(t1 * p.z[0]);
        vec![(0.001 - p.lambda[0] * t1 * t1 * d2) * v[0]]
    }

    fn l_utheta(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0]
    }

    fn l_thetau(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn l_ztheta(&self, p: Point, v: &[f64]) -> Vec<f64> {
        vec![self.mixed_z_theta1(p) * v[0]]
    }

    fn l_thetaz(&self, p: Point, v: &[f64]) -> Vec<f64> {
        vec![self.mixed_z_theta1(p) * v[0], 0.0]
    }

    fn state_jacobian_solve(&self, _x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("logistic state solve", 1, rhs.len())?;
        Ok(rhs.to_vec())
    }

    fn state_jacobian_adjoint_solve(&self, _x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("logistic adjoint solve", 1, rhs.len())?;
        Ok(rhs.to_vec())
    }
}

impl LogisticToy {
    // ∂²ℒ/∂z∂θ₁ = −λ (s'(θ₁z) + θ₁ z s''(θ₁z))
    fn mixed_z_theta1(&self, p: Point) -> f64 {
        let (t1, z) = (p.theta[0], p.z[0]);
        let (_, d1, d2) = logistic_derivs(t1 * z);
        -p.lambda[0] * (d1 + t1 * z * d2)
    }
}
