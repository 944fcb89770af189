use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use super::kkt::KktOperator;
use crate::linalg::{axpy, check_len, scale, Matrix};
use crate::problems::WeightedSpaces;
use crate::{Error, Result};

/// A linear map `D: Θ → Z` in coordinates, with its Euclidean transpose.
pub trait SensitivityMap: Sync {
    fn n_theta(&self) -> usize;
    fn n_z(&self) -> usize;
    fn apply(&self, phi: &[f64]) -> Result<Vec<f64>>;
    /// `Dᵀ w`; the `(M_Z, M_Θ)`-adjoint is `M_Θ⁻¹ Dᵀ M_Z`.
    fn apply_t(&self, w: &[f64]) -> Result<Vec<f64>>;
}

/// `D = 𝒫 𝒦⁻¹ ℬ` at an optimal point.
pub struct SensitivityOperator<'a> {
    kkt: KktOperator<'a>,
}

impl<'a> SensitivityOperator<'a> {
    pub fn new(kkt: KktOperator<'a>) -> Self {
        Self { kkt }
    }

    pub fn kkt(&self) -> &KktOperator<'a> {
        &self.kkt
    }

    pub fn spaces(&self) -> &'a WeightedSpaces {
        self.kkt.problem().spaces()
    }

    /// `ℬ φ = −(ℒ_uθ φ, ℒ_zθ φ, c_θ φ)`
    pub fn apply_b(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let d = self.kkt.dims();
        check_len("parameter direction", d.n_theta, phi.len())?;
        let p = self.kkt.problem();
        let pt = self.kkt.point();
        let mut out = p.l_utheta(pt, phi);
        out.extend_from_slice(&p.l_ztheta(pt, phi));
        out.extend_from_slice(&p.c_theta(pt.eval(), phi));
        scale(-1.0, &mut out);
        Ok(out)
    }

    /// `ℬᵀ y = −(ℒ_θu y_u + ℒ_θz y_z + c_θᵀ y_λ)`
    pub fn apply_b_t(&self, y: &[f64]) -> Result<Vec<f64>> {
        let d = self.kkt.dims();
        check_len("stacked vector", d.kkt(), y.len())?;
        let p = self.kkt.problem();
        let pt = self.kkt.point();
        let (yu, rest) = y.split_at(d.n_u);
        let (yz, yl) = rest.split_at(d.n_z);
        let mut out = p.l_thetau(pt, yu);
        axpy(1.0, &p.l_thetaz(pt, yz), &mut out);
        axpy(1.0, &p.c_theta_t(pt.eval(), yl), &mut out);
        scale(-1.0, &mut out);
        Ok(out)
    }

    /// `‖D φ̂‖_Z` with `φ̂ = φ / ‖φ‖_Θ`.
    pub fn directional(&self, phi: &[f64]) -> Result<f64> {
        let spaces = self.spaces();
        let norm = spaces.m_theta.norm(phi);
        if !(norm > 0.0) {
            return Err(Error::ZeroDirection);
        }
        let dphi = self.apply(phi)?;
        Ok(spaces.m_z.norm(&dphi) / norm)
    }
}

impl SensitivityMap for SensitivityOperator<'_> {
    fn n_theta(&self) -> usize {
        self.kkt.dims().n_theta
    }

    fn n_z(&self) -> usize {
        self.kkt.dims().n_z
    }

    fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let b = self.apply_b(phi)?;
        let (x, _) = self.kkt.solve(&b)?;
        let d = self.kkt.dims();
        Ok(x[d.n_u..d.n_u + d.n_z].to_vec())
    }

    // 𝒦 is symmetric, so Dᵀ w = ℬᵀ 𝒦⁻¹ 𝒫ᵀ w.
    fn apply_t(&self, w: &[f64]) -> Result<Vec<f64>> {
        let d = self.kkt.dims();
        check_len("optimization-variable vector", d.n_z, w.len())?;
        let mut rhs = vec![0.0; d.kkt()];
        rhs[d.n_u..d.n_u + d.n_z].copy_from_slice(w);
        let (y, _) = self.kkt.solve(&rhs)?;
        self.apply_b_t(&y)
    }
}

/// `D Π`, where `Π` keeps the coordinates in `range` and zeroes the rest.
pub struct Projected<'s, S: ?Sized> {
    inner: &'s S,
    range: Range<usize>,
}

impl<'s, S: SensitivityMap + ?Sized> Projected<'s, S> {
    pub fn new(inner: &'s S, range: Range<usize>) -> Self {
        Self { inner, range }
    }

    fn mask(&self, v: &mut [f64]) {
        for (i, x) in v.iter_mut().enumerate() {
            if !self.range.contains(&i) {
                *x = 0.0;
            }
        }
    }
}

impl<S: SensitivityMap + ?Sized> SensitivityMap for Projected<'_, S> {
    fn n_theta(&self) -> usize {
        self.inner.n_theta()
    }

    fn n_z(&self) -> usize {
        self.inner.n_z()
    }

    fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut v = phi.to_vec();
        self.mask(&mut v);
        self.inner.apply(&v)
    }

    fn apply_t(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut v = self.inner.apply_t(w)?;
        self.mask(&mut v);
        Ok(v)
    }
}

/// An explicitly assembled `D`.
#[derive(Debug, Clone)]
pub struct DenseSensitivity(pub Matrix);

impl SensitivityMap for DenseSensitivity {
    fn n_theta(&self) -> usize {
        self.0.cols()
    }

    fn n_z(&self) -> usize {
        self.0.rows()
    }

    fn apply(&self, phi: &[f64]) -> Result<Vec<f64>> {
        check_len("parameter direction", self.0.cols(), phi.len())?;
        Ok(self.0.matvec(phi))
    }

    fn apply_t(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("optimization-variable vector", self.0.rows(), w.len())?;
        Ok(self.0.transpose().matvec(w))
    }
}
