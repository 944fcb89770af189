use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::fem1d::{mass_matrix, HatBasis};
use super::{Eval, Point, Preset, Problem, ProblemDims, SetPartition, WeightedSpaces};
use crate::linalg::{check_len, LinearMap, SpdOperator, SymTridiagonal};
use crate::{Error, Result};

/// Settings of the 1D elliptic control problem.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DiffusionConfig {
    /// Interior grid nodes.
    pub n_u: usize,
    /// Number of hat functions in the coefficient expansion.
    pub n_theta: usize,
    pub gamma: f64,
    pub kappa_bar: f64,
    /// Relative amplitude `a` of the coefficient perturbation.
    pub amplitude: f64,
    pub target: Preset,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            n_u: 64,
            n_theta: 16,
            gamma: 0.01,
            kappa_bar: 1e-4,
            amplitude: 0.2,
            target: Preset::GaussianBump {
                center: 0.45,
                width: 0.03,
                amplitude: 1.0,
            },
        }
    }
}

/// `min ½‖u − d‖²_M + (γ/2)‖z‖²_M  s.t.  −(κ(x;θ) u′)′ = z` on `(0, 1)` with
/// homogeneous Dirichlet conditions, P1 elements, and
/// `κ = κ̄ (1 + a Σ θₖ φₖ)` over coarse hat functions.
pub struct DiffusionControl1d {
    cfg: DiffusionConfig,
    h: f64,
    mass: SymTridiagonal,
    target: Vec<f64>,
    // φₖ at element midpoints, as (k, value) pairs per element.
    midpoint_hats: Vec<[(usize, f64); 2]>,
    spaces: WeightedSpaces,
}

impl DiffusionControl1d {
    pub fn new(cfg: DiffusionConfig) -> Result<Self> {
        if cfg.n_u < 2 {
            return Err(Error::InvalidConfig("diffusion control needs n_u >= 2".into()));
        }
        if cfg.n_theta < 1 {
            return Err(Error::InvalidConfig("diffusion control needs n_theta >= 1".into()));
        }
        if !(cfg.gamma >= 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "gamma must be non-negative, got {}",
                cfg.gamma
            )));
        }
        if !(cfg.kappa_bar > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "kappa_bar must be positive, got {}",
                cfg.kappa_bar
            )));
        }
        cfg.target.validate()?;
        let n = cfg.n_u;
        let h = 1.0 / (n + 1) as f64;
        let mass = mass_matrix(n, h, false)?;
        let target = (0..n).map(|i| cfg.target.eval((i + 1) as f64 * h)).collect();
        let hats = HatBasis::new(cfg.n_theta);
        let midpoint_hats = (0..=n).map(|e| hats.eval((e as f64 + 0.5) * h)).collect();
        let spaces = WeightedSpaces {
            m_theta: Box::new(hats.mass_matrix()?),
            m_z: Box::new(mass.clone()),
            partition: Some(SetPartition::single("kappa", cfg.n_theta)),
        };
        Ok(Self {
            cfg,
            h,
            mass,
            target,
            midpoint_hats,
            spaces,
        })
    }

    pub fn config(&self) -> &DiffusionConfig {
        &self.cfg
    }

    pub fn mass(&self) -> &SymTridiagonal {
        &self.mass
    }

    /// Target values at the interior nodes.
    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cfg.n_u).map(|i| (i + 1) as f64 * self.h).collect()
    }

    fn perturbation(&self, e: usize, theta: &[f64]) -> f64 {
        self.midpoint_hats[e].iter().map(|&(k, v)| theta[k] * v).sum()
    }

    /// `κ` on each of the `n_u + 1` elements.
    pub fn element_kappa(&self, theta: &[f64]) -> Vec<f64> {
        (0..=self.cfg.n_u)
            .map(|e| self.cfg.kappa_bar * (1.0 + self.cfg.amplitude * self.perturbation(e, theta)))
            .collect()
    }

    fn kappa_checked(&self, theta: &[f64]) -> Result<Vec<f64>> {
        check_len("diffusion theta", self.cfg.n_theta, theta.len())?;
        let kappa = self.element_kappa(theta);
        if let Some(e) = kappa.iter().position(|k| !(*k > 0.0)) {
            return Err(Error::InvalidParameter(alloc::format!(
                "diffusion coefficient {} on element {} is not positive",
                kappa[e],
                e
            )));
        }
        Ok(kappa)
    }

    /// Stiffness matrix `A(θ)` for given element coefficients.
    pub fn stiffness(&self, kappa: &[f64]) -> Result<SymTridiagonal> {
        let n = self.cfg.n_u;
        let diag = (0..n).map(|i| (kappa[i] + kappa[i + 1]) / self.h).collect();
        let off = (0..n - 1).map(|i| -kappa[i + 1] / self.h).collect();
        SymTridiagonal::new(diag, off)
    }

    // Σ_e w_e (a_r − a_l)(b_r − b_l)/h with zero boundary values.
    fn element_products(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_u;
        let at = |v: &[f64], i: isize| if i < 0 || i as usize >= n { 0.0 } else { v[i as usize] };
        (0..=n)
            .map(|e| {
                let (l, r) = (e as isize - 1, e as isize);
                (at(a, r) - at(a, l)) * (at(b, r) - at(b, l)) / self.h
            })
            .collect()
    }

    fn apply_stiffness(&self, kappa: &[f64], v: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_u;
        let mut y = vec![0.0; n];
        for e in 0..=n {
            let vl = if e >= 1 { v[e - 1] } else { 0.0 };
            let vr = if e < n { v[e] } else { 0.0 };
            let flux = kappa[e] * (vr - vl) / self.h;
            if e >= 1 {
                y[e - 1] -= flux;
            }
            if e < n {
                y[e] += flux;
            }
        }
        y
    }

    // dκ_e for a θ-direction.
    fn kappa_direction(&self, v: &[f64]) -> Vec<f64> {
        (0..=self.cfg.n_u)
            .map(|e| self.cfg.kappa_bar * self.cfg.amplitude * self.perturbation(e, v))
            .collect()
    }

    // Transpose of `kappa_direction` applied to element weights.
    fn kappa_direction_t(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cfg.n_theta];
        let s = self.cfg.kappa_bar * self.cfg.amplitude;
        for (e, hats) in self.midpoint_hats.iter().enumerate() {
            for &(k, v) in hats {
                out[k] += s * v * w[e];
            }
        }
        out
    }
}

impl Problem for DiffusionControl1d {
    fn name(&self) -> &str {
        "diffusion_control_1d"
    }

    fn dims(&self) -> ProblemDims {
        ProblemDims {
            n_u: self.cfg.n_u,
            n_z: self.cfg.n_u,
            n_theta: self.cfg.n_theta,
            n_lambda: self.cfg.n_u,
        }
    }

    fn spaces(&self) -> &WeightedSpaces {
        &self.spaces
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        self.kappa_checked(theta).map(|_| ())
    }

    fn state_is_linear(&self) -> bool {
        true
    }

    fn objective(&self, x: Eval) -> f64 {
        let r = crate::linalg::sub(x.u, &self.target);
        0.5 * self.mass.inner(&r, &r) + 0.5 * self.cfg.gamma * self.mass.inner(x.z, x.z)
    }

    fn residual(&self, x: Eval) -> Vec<f64> {
        let mut r = self.apply_stiffness(&self.element_kappa(x.theta), x.u);
        crate::linalg::axpy(-1.0, &self.mass.apply(x.z), &mut r);
        r
    }

    fn j_u(&self, x: Eval) -> Vec<f64> {
        self.mass.apply(&crate::linalg::sub(x.u, &self.target))
    }

    fn j_z(&self, x: Eval) -> Vec<f64> {
        crate::linalg::scaled(self.cfg.gamma, &self.mass.apply(x.z))
    }

    fn j_theta(&self, _x: Eval) -> Vec<f64> {
        vec![0.0; self.cfg.n_theta]
    }

    fn c_u(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        self.apply_stiffness(&self.element_kappa(x.theta), v)
    }

    fn c_u_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.c_u(x, w)
    }

    fn c_z(&self, _x: Eval, v: &[f64]) -> Vec<f64> {
        crate::linalg::scaled(-1.0, &self.mass.apply(v))
    }

    fn c_z_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.c_z(x, w)
    }

    fn c_theta(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        self.apply_stiffness(&self.kappa_direction(v), x.u)
    }

    fn c_theta_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.kappa_direction_t(&self.element_products(w, x.u))
    }

    fn l_uu(&self, _p: Point, v: &[f64]) -> Vec<f64> {
        self.mass.apply(v)
    }

    fn l_uz(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0; self.cfg.n_u]
    }

    fn l_zu(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0; self.cfg.n_u]
    }

    fn l_zz(&self, _p: Point, v: &[f64]) -> Vec<f64> {
        crate::linalg::scaled(self.cfg.gamma, &self.mass.apply(v))
    }

    fn l_utheta(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.apply_stiffness(&self.kappa_direction(v), p.lambda)
    }

    fn l_thetau(&self, p: Point, v: &[f64]) -> Vec<f64> {
        self.kappa_direction_t(&self.element_products(p.lambda, v))
    }

    fn l_ztheta(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0; self.cfg.n_u]
    }

    fn l_thetaz(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0; self.cfg.n_theta]
    }

    fn state_jacobian_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("diffusion state solve", self.cfg.n_u, rhs.len())?;
        self.stiffness(&self.kappa_checked(x.theta)?)?.solve(rhs)
    }

    fn state_jacobian_adjoint_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        self.state_jacobian_solve(x, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::norm2;

    fn manufactured_error(n: usize) -> f64 {
        let p = DiffusionControl1d::new(DiffusionConfig {
            n_u: n,
            kappa_bar: 1.0,
            ..Default::default()
        })
        .unwrap();
        let pi = core::f64::consts::PI;
        let x = p.nodes();
        let z: Vec<f64> = x.iter().map(|&xi| crate::math::sin(pi * xi)).collect();
        let theta = vec![0.0; 16];
        let e = Eval {
            u: &vec![0.0; n],
            z: &z,
            theta: &theta,
        };
        let u = p.state_jacobian_solve(e, &p.mass.apply(&z)).unwrap();
        x.iter()
            .zip(&u)
            .map(|(&xi, ui)| (ui - crate::math::sin(pi * xi) / (pi * pi)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn manufactured_solution_second_order() {
        let e1 = manufactured_error(31);
        let e2 = manufactured_error(63);
        let order = crate::math::ln(e1 / e2) / core::f64::consts::LN_2;
        assert!(order > 1.8, "order {order}, errors {e1} {e2}");
    }

    #[test]
    fn zero_forcing_zero_state() {
        let p = DiffusionControl1d::new(DiffusionConfig::default()).unwrap();
        let theta = vec![0.0; 16];
        let z = vec![0.0; 64];
        let e = Eval {
            u: &z,
            z: &z,
            theta: &theta,
        };
        assert_eq!(norm2(&p.residual(e)), 0.0);
        let u = p.state_jacobian_solve(e, &p.mass.apply(&z)).unwrap();
        assert_eq!(norm2(&u), 0.0);
    }

    #[test]
    fn l_zz_is_scaled_mass() {
        let p = DiffusionControl1d::new(DiffusionConfig::default()).unwrap();
        let v: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        let zeros = vec![0.0; 64];
        let theta = vec![0.0; 16];
        let pt = Point {
            u: &zeros,
            z: &zeros,
            lambda: &zeros,
            theta: &theta,
        };
        let expect: Vec<f64> = p.mass.apply(&v).iter().map(|x| 0.01 * x).collect();
        assert_eq!(p.l_zz(pt, &v), expect);
    }

    #[test]
    fn rejects_nonpositive_kappa() {
        let p = DiffusionControl1d::new(DiffusionConfig::default()).unwrap();
        let mut theta = vec![0.0; 16];
        theta[3] = -6.0;
        assert!(matches!(p.validate_theta(&theta), Err(Error::InvalidParameter(_))));
    }
}
