//! The problem abstraction (objective, constraint, and every first and
//! second derivative block of the Lagrangian) and the built-in instances.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use crate::linalg::{LinearMap, SpdOperator};
use crate::{Error, Result};

mod advdiff;
mod check;
mod corrupt;
mod diffusion;
pub mod fem1d;
mod logistic;
mod presets;

pub use advdiff::{AdvDiffConfig, AdvDiffInversion1d};
pub use check::{check_derivatives, BlockCheck, DerivativeReport};
pub use corrupt::CorruptedThetaJacobian;
pub use diffusion::{DiffusionConfig, DiffusionControl1d};
pub use logistic::LogisticToy;
pub use presets::Preset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemDims {
    pub n_u: usize,
    pub n_z: usize,
    pub n_theta: usize,
    pub n_lambda: usize,
}

impl ProblemDims {
    /// Dimension of the stacked `(u, z, λ)` space.
    pub fn kkt(&self) -> usize {
        self.n_u + self.n_z + self.n_lambda
    }
}

/// Arguments of `J` and `c`.
#[derive(Debug, Clone, Copy)]
pub struct Eval<'a> {
    pub u: &'a [f64],
    pub z: &'a [f64],
    pub theta: &'a [f64],
}

/// Arguments of the Lagrangian `ℒ(u, z, λ, θ) = J + ⟨λ, c⟩`.
#[derive(Debug, Clone, Copy)]
pub struct Point<'a> {
    pub u: &'a [f64],
    pub z: &'a [f64],
    pub lambda: &'a [f64],
    pub theta: &'a [f64],
}

impl<'a> Point<'a> {
    pub fn eval(&self) -> Eval<'a> {
        Eval {
            u: self.u,
            z: self.z,
            theta: self.theta,
        }
    }
}

/// A named, contiguous block of parameter coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParamSet {
    pub name: String,
    pub range: Range<usize>,
}

/// `Θ = Ξ₁ × … × Ξ_T` as disjoint coordinate ranges covering every
/// parameter.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SetPartition {
    pub sets: Vec<ParamSet>,
}

impl SetPartition {
    pub fn new(sets: Vec<ParamSet>, n_theta: usize) -> Result<Self> {
        let mut covered = alloc::vec![false; n_theta];
        for s in &sets {
            if s.range.start >= s.range.end || s.range.end > n_theta {
                return Err(Error::InvalidConfig(alloc::format!(
                    "parameter set '{}' has invalid range {}..{} for {} parameters",
                    s.name,
                    s.range.start,
                    s.range.end,
                    n_theta
                )));
            }
            for i in s.range.clone() {
                if covered[i] {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "parameter {} belongs to more than one set",
                        i
                    )));
                }
                covered[i] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidConfig(alloc::format!(
                "parameter {} is not covered by any set",
                i
            )));
        }
        Ok(Self { sets })
    }

    pub fn single(name: &str, n_theta: usize) -> Self {
        Self {
            sets: alloc::vec![ParamSet {
                name: name.into(),
                range: 0..n_theta,
            }],
        }
    }

    /// Largest `|M[i, j]|` between coordinates of different sets, relative
    /// to the largest entry of `M`.
    pub fn coupling(&self, m_theta: &dyn LinearMap) -> f64 {
        let m = crate::linalg::to_dense(m_theta);
        let mut owner = alloc::vec![0usize; m.rows()];
        for (k, s) in self.sets.iter().enumerate() {
            for i in s.range.clone() {
                owner[i] = k;
            }
        }
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if owner[i] != owner[j] {
                    worst = worst.max(m[(i, j)].abs());
                }
            }
        }
        worst / scale
    }
}

/// Inner products on the parameter and optimization-variable spaces.
pub struct WeightedSpaces {
    pub m_theta: Box<dyn SpdOperator>,
    pub m_z: Box<dyn SpdOperator>,
    pub partition: Option<SetPartition>,
}

/// Evaluation surface of `min J(u, z, θ) s.t. c(u, z, θ) = 0`.
///
/// Vectors are coordinate representations; transposes are Euclidean
/// transposes of the coordinate matrices. Every Lagrangian block is
/// evaluated at a [`Point`] and applied to a direction.
pub trait Problem: Sync + Send {
    fn name(&self) -> &str;
    fn dims(&self) -> ProblemDims;
    fn spaces(&self) -> &WeightedSpaces;

    /// Rejects parameters outside the domain of definition.
    fn validate_theta(&self, _theta: &[f64]) -> Result<()> {
        Ok(())
    }

    /// `c` is affine in `u` for fixed `(z, θ)`.
    fn state_is_linear(&self) -> bool {
        false
    }

    fn objective(&self, x: Eval) -> f64;
    fn residual(&self, x: Eval) -> Vec<f64>;

    fn j_u(&self, x: Eval) -> Vec<f64>;
    fn j_z(&self, x: Eval) -> Vec<f64>;
    fn j_theta(&self, x: Eval) -> Vec<f64>;

    fn c_u(&self, x: Eval, v: &[f64]) -> Vec<f64>;
    fn c_u_t(&self, x: Eval, w: &[f64]) -> Vec<f64>;
    fn c_z(&self, x: Eval, v: &[f64]) -> Vec<f64>;
    fn c_z_t(&self, x: Eval, w: &[f64]) -> Vec<f64>;
    fn c_theta(&self, x: Eval, v: &[f64]) -> Vec<f64>;
    fn c_theta_t(&self, x: Eval, w: &[f64]) -> Vec<f64>;

    fn l_uu(&self, p: Point, v: &[f64]) -> Vec<f64>;
    /// `ℒ_uz v` for a `z`-direction `v`, returned in `u`-space.
    fn l_uz(&self, p: Point, v: &[f64]) -> Vec<f64>;
    /// `ℒ_zu v = ℒ_uzᵀ v` for a `u`-direction `v`.
    fn l_zu(&self, p: Point, v: &[f64]) -> Vec<f64>;
    fn l_zz(&self, p: Point, v: &[f64]) -> Vec<f64>;
    /// `ℒ_uθ v` for a `θ`-direction `v`, returned in `u`-space.
    fn l_utheta(&self, p: Point, v: &[f64]) -> Vec<f64>;
    /// `ℒ_θu v = ℒ_uθᵀ v`.
    fn l_thetau(&self, p: Point, v: &[f64]) -> Vec<f64>;
    fn l_ztheta(&self, p: Point, v: &[f64]) -> Vec<f64>;
    fn l_thetaz(&self, p: Point, v: &[f64]) -> Vec<f64>;

    /// Solves `c_u x = rhs`.
    fn state_jacobian_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>>;
    /// Solves `c_uᵀ x = rhs`.
    fn state_jacobian_adjoint_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>>;

    /// `∇_u ℒ = J_u + c_uᵀ λ`
    fn lagrangian_grad_u(&self, p: Point) -> Vec<f64> {
        let x = p.eval();
        let mut g = self.j_u(x);
        crate::linalg::axpy(1.0, &self.c_u_t(x, p.lambda), &mut g);
        g
    }

    /// `∇_z ℒ = J_z + c_zᵀ λ`
    fn lagrangian_grad_z(&self, p: Point) -> Vec<f64> {
        let x = p.eval();
        let mut g = self.j_z(x);
        crate::linalg::axpy(1.0, &self.c_z_t(x, p.lambda), &mut g);
        g
    }
}
