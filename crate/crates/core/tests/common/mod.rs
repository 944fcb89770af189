#![allow(dead_code)]

use hdsa_core::linalg::{dot, norm2, to_dense, LinearMap, Matrix, SpdOperator};
use hdsa_core::optimizer::{solve_optimization, InitialIterate, OptimalPoint};
use hdsa_core::problems::{DiffusionConfig, DiffusionControl1d, Problem};
use hdsa_core::rng::{normal_vector, Domain};

pub fn optimum(p: &dyn Problem, theta: &[f64]) -> OptimalPoint {
    solve_optimization(p, theta, &InitialIterate::zero(p), &Default::default()).unwrap()
}

pub fn diffusion(gamma: f64) -> DiffusionControl1d {
    DiffusionControl1d::new(DiffusionConfig {
        gamma,
        ..Default::default()
    })
    .unwrap()
}

pub fn random(i: u64, n: usize) -> Vec<f64> {
    normal_vector(77, Domain::Test, 0, i, n)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn m_inner(m: &dyn SpdOperator, a: &[f64], b: &[f64]) -> f64 {
    dot(a, &m.apply(b))
}

/// `‖a − s b‖_M` minimized over the sign `s = ±1`.
pub fn aligned_m_distance(m: &dyn SpdOperator, a: &[f64], b: &[f64]) -> f64 {
    let plus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let minus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    m.norm(&plus).min(m.norm(&minus))
}

pub fn dense(op: &dyn LinearMap) -> Matrix {
    to_dense(op)
}

pub fn norm(v: &[f64]) -> f64 {
    norm2(v)
}
