mod common;

use common::*;
use hdsa_core::hdsa::*;
use hdsa_core::linalg::{dense_svd, dot, norm2, sub, unit, LinearMap, Matrix};
use hdsa_core::optimizer::{OptimizerConfig, SamplingPlan, ThetaDistribution};
use hdsa_core::problems::{
    AdvDiffConfig, AdvDiffInversion1d, DiffusionConfig, DiffusionControl1d, LogisticToy, ParamSet,
    Problem, SetPartition,
};
use hdsa_core::{Error, Sequential};

fn kkt_for<'a>(p: &'a dyn Problem, opt: &'a hdsa_core::optimizer::OptimalPoint, s: KktStrategy) -> KktOperator<'a> {
    KktOperator::new(
        p,
        opt,
        KktConfig {
            strategy: s,
            ..Default::default()
        },
    )
    .unwrap()
}

fn small_advdiff() -> AdvDiffInversion1d {
    AdvDiffInversion1d::new(AdvDiffConfig {
        n_x: 33,
        n_t: 20,
        ..Default::default()
    })
    .unwrap()
}

// ---------- logistic toy ----------

#[test]
fn logistic_sensitivities() {
    let p = LogisticToy::new();
    let opt = optimum(&p, &[0.5, 0.5]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let d1 = d.apply(&[1.0, 0.0]).unwrap()[0];
    let d2 = d.apply(&[0.0, 1.0]).unwrap()[0];
    assert!((d1.abs() - 9.99).abs() <= 0.02, "{d1}");
    assert!((d2.abs() - 3.12).abs() <= 0.02, "{d2}");
    assert!((d.directional(&[1.0, 0.0]).unwrap() - 9.99).abs() <= 0.02);
    assert_eq!(d.apply(&[0.0, 0.0]).unwrap(), vec![0.0]);
    assert!(matches!(d.directional(&[0.0, 0.0]), Err(Error::ZeroDirection)));
}

// Implicit differentiation of the scalar optimality system by hand.
#[test]
fn logistic_sensitivity_matches_scalar_elimination() {
    let p = LogisticToy::new();
    let opt = optimum(&p, &[0.5, 0.5]);
    let (t1, z) = (0.5, opt.z0[0]);
    let s = 1.0 / (1.0 + (-t1 * z).exp());
    // u = s(θ₁z) + θ₂ and g(z, θ) = 2(u − 2) s' θ₁ + 0.001 z = 0.
    let ds = s * (1.0 - s);
    let dds = ds * (1.0 - 2.0 * s);
    let u = s + 0.5;
    let g_z = 2.0 * (ds * t1).powi(2) + 2.0 * (u - 2.0) * dds * t1 * t1 + 0.001;
    let g_t1 = 2.0 * (ds * z) * ds * t1 + 2.0 * (u - 2.0) * (dds * z * t1 + ds);
    let g_t2 = 2.0 * ds * t1;
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    assert!((d.apply(&[1.0, 0.0]).unwrap()[0] + g_t1 / g_z).abs() < 1e-10);
    assert!((d.apply(&[0.0, 1.0]).unwrap()[0] + g_t2 / g_z).abs() < 1e-10);
}

#[test]
fn logistic_kkt_matches_closed_form_inverse() {
    let p = LogisticToy::new();
    let opt = optimum(&p, &[0.5, 0.5]);
    let k = kkt_for(&p, &opt, KktStrategy::Dense);
    let m = dense(&k);
    // Adjugate inverse of the 3×3 matrix.
    let a = |i: usize, j: usize| m[(i, j)];
    let cof = |i: usize, j: usize| {
        let r: Vec<usize> = (0..3).filter(|&x| x != i).collect();
        let c: Vec<usize> = (0..3).filter(|&x| x != j).collect();
        let minor = a(r[0], c[0]) * a(r[1], c[1]) - a(r[0], c[1]) * a(r[1], c[0]);
        if (i + j) % 2 == 0 { minor } else { -minor }
    };
    let det: f64 = (0..3).map(|j| a(0, j) * cof(0, j)).sum();
    let rhs = [0.3, -1.2, 2.0];
    let expect: Vec<f64> = (0..3)
        .map(|i| (0..3).map(|j| cof(j, i) * rhs[j]).sum::<f64>() / det)
        .collect();
    let (x, stats) = k.solve(&rhs).unwrap();
    assert!(stats.converged);
    for (xi, ei) in x.iter().zip(&expect) {
        assert!((xi - ei).abs() <= 1e-12 * ei.abs().max(1.0), "{xi} vs {ei}");
    }
}

#[test]
fn logistic_traditional_comparison() {
    let p = LogisticToy::new();
    let opt = optimum(&p, &[0.5, 0.5]);
    let t = traditional_comparison(&p, &opt, &Default::default()).unwrap();
    assert!((t[0] - 0.135).abs() <= 0.005, "{t:?}");
    assert!((t[1] - 1.03).abs() <= 0.005, "{t:?}");
}

#[test]
fn logistic_local_indices_full_rank() {
    let p = LogisticToy::new();
    let opt = optimum(&p, &[0.5, 0.5]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let cfg = RandEigConfig {
        k_pairs: 2,
        ..Default::default()
    };
    let sp = p.spaces();
    let g = randomized_geneig(&d, sp.m_theta.as_ref(), sp.m_z.as_ref(), &cfg, 0, &Sequential).unwrap();
    // D is 1 × 2, so only one triple exists.
    assert_eq!(g.triples.len(), 1);
    assert!(g.rank_deficient);
    assert_eq!(g.probes, 3);
    let s = local_indices(&g.triples, sp.m_theta.as_ref());
    assert!((s[0] - 9.99).abs() <= 0.02 && (s[1] - 3.12).abs() <= 0.02, "{s:?}");
    let parseval: f64 = s.iter().map(|x| x * x).sum();
    let sig2: f64 = g.triples.iter().map(|t| t.sigma * t.sigma).sum();
    assert!(rel(parseval, sig2) < 1e-8);
}

// ---------- KKT operator ----------

#[test]
fn kkt_matches_hand_assembly_linear_quadratic() {
    let p = diffusion(0.01);
    let theta: Vec<f64> = (0..16).map(|k| 0.1 * k as f64 - 0.7).collect();
    let opt = optimum(&p, &theta);
    let k = dense(&kkt_for(&p, &opt, KktStrategy::Dense));
    let n = 64;
    let m = dense(p.mass());
    let a = dense(&p.stiffness(&p.element_kappa(&theta)).unwrap());
    let hand = Matrix::from_fn(3 * n, 3 * n, |i, j| {
        let (bi, bj, ii, jj) = (i / n, j / n, i % n, j % n);
        match (bi, bj) {
            (0, 0) => m[(ii, jj)],
            (1, 1) => 0.01 * m[(ii, jj)],
            (0, 2) | (2, 0) => a[(ii, jj)],
            (1, 2) | (2, 1) => -m[(ii, jj)],
            _ => 0.0,
        }
    });
    assert!(k.sub(&hand).max_abs() <= 1e-12 * hand.max_abs());
}

fn check_kkt_self_adjoint(p: &dyn Problem, opt: &hdsa_core::optimizer::OptimalPoint) {
    let k = kkt_for(p, opt, KktStrategy::Auto);
    let n = p.dims().kkt();
    assert_eq!(k.apply(&vec![0.0; n]), vec![0.0; n]);
    for i in 0..20 {
        let v = random(2 * i, n);
        let w = random(2 * i + 1, n);
        let kv = k.apply(&v);
        let kw = k.apply(&w);
        let scale = norm2(&kv) * norm2(&w) + norm2(&v) * norm2(&kw);
        assert!((dot(&kv, &w) - dot(&v, &kw)).abs() <= 1e-10 * scale);
    }
}

#[test]
fn kkt_self_adjoint_all_problems() {
    let p = LogisticToy::new();
    check_kkt_self_adjoint(&p, &optimum(&p, &[0.5, 0.5]));
    let p = diffusion(0.01);
    check_kkt_self_adjoint(&p, &optimum(&p, &[0.2; 16]));
    let p = small_advdiff();
    check_kkt_self_adjoint(&p, &optimum(&p, &vec![0.1; p.dims().n_theta]));
}

#[test]
fn kkt_round_trip_every_strategy() {
    let p = diffusion(0.01);
    let opt = optimum(&p, &[0.0; 16]);
    let n = p.dims().kkt();
    let w = random(5, n);
    let reference = kkt_for(&p, &opt, KktStrategy::Dense).solve(&kkt_for(&p, &opt, KktStrategy::Dense).apply(&w)).unwrap().0;
    for s in [KktStrategy::Dense, KktStrategy::Minres, KktStrategy::Reduced] {
        let k = kkt_for(&p, &opt, s);
        let (x, stats) = k.solve(&k.apply(&w)).unwrap();
        assert!(stats.converged, "{s:?}");
        assert!(norm2(&sub(&x, &w)) <= 1e-8 * norm2(&w), "{s:?}");
        assert!(norm2(&sub(&x, &reference)) <= 1e-8 * norm2(&w), "{s:?} vs dense");
        let (zero, _) = k.solve(&vec![0.0; n]).unwrap();
        assert!(zero.iter().all(|x| *x == 0.0));
    }
}

#[test]
fn reduced_kkt_on_transient_problem() {
    let p = small_advdiff();
    let opt = optimum(&p, &vec![0.0; p.dims().n_theta]);
    let k = kkt_for(&p, &opt, KktStrategy::Reduced);
    let w = random(9, p.dims().kkt());
    let (x, stats) = k.solve(&k.apply(&w)).unwrap();
    assert!(stats.converged && stats.final_relative_residual <= 1e-10);
    assert!(norm2(&sub(&x, &w)) <= 1e-8 * norm2(&w));
}

#[test]
fn auto_strategy_uses_threshold() {
    let p = diffusion(0.01);
    let opt = optimum(&p, &[0.0; 16]);
    assert_eq!(kkt_for(&p, &opt, KktStrategy::Auto).strategy(), KktStrategy::Dense);
    let k = KktOperator::new(&p, &opt, KktConfig {
        dense_threshold: 100,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(k.strategy(), KktStrategy::Reduced);
}

// ---------- sensitivity operator and pencil ----------

fn check_sensitivity_adjoint(p: &dyn Problem, opt: &hdsa_core::optimizer::OptimalPoint) {
    let d = SensitivityOperator::new(kkt_for(p, opt, KktStrategy::Auto));
    let dims = p.dims();
    for i in 0..5 {
        let phi = random(100 + i, dims.n_theta);
        let w = random(200 + i, dims.n_z);
        let dphi = d.apply(&phi).unwrap();
        let dtw = d.apply_t(&w).unwrap();
        let scale = norm2(&dphi) * norm2(&w) + norm2(&phi) * norm2(&dtw);
        assert!((dot(&dphi, &w) - dot(&phi, &dtw)).abs() <= 1e-8 * scale);
        let b = d.apply_b(&phi).unwrap();
        let y = random(300 + i, dims.kkt());
        let bty = d.apply_b_t(&y).unwrap();
        let scale = norm2(&b) * norm2(&y) + norm2(&phi) * norm2(&bty);
        assert!((dot(&b, &y) - dot(&phi, &bty)).abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE));
    }
}

#[test]
fn sensitivity_adjoint_all_problems() {
    let p = LogisticToy::new();
    check_sensitivity_adjoint(&p, &optimum(&p, &[0.5, 0.5]));
    let p = diffusion(0.01);
    check_sensitivity_adjoint(&p, &optimum(&p, &[0.3; 16]));
    let p = small_advdiff();
    check_sensitivity_adjoint(&p, &optimum(&p, &vec![-0.2; p.dims().n_theta]));
}

fn dense_d(d: &dyn SensitivityMap) -> Matrix {
    let n = d.n_theta();
    let cols: Vec<Vec<f64>> = (0..n).map(|j| d.apply(&unit(n, j)).unwrap()).collect();
    Matrix::from_columns(d.n_z(), &cols)
}

#[test]
fn pencil_matches_dense_assembly() {
    let p = diffusion(0.01);
    let opt = optimum(&p, &[0.0; 16]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let dm = dense_d(&d);
    let mz = dense(p.mass());
    let mzd = mz.matmul(&dm);
    let (m, n) = (64, 16);
    let expect = Matrix::from_fn(m + n, m + n, |i, j| match (i < m, j < m) {
        (true, false) => mzd[(i, j - m)],
        (false, true) => mzd[(j, i - m)],
        _ => 0.0,
    });
    let cols: Vec<Vec<f64>> = (0..m + n)
        .map(|j| apply_pencil_a(&d, p.mass(), &unit(m + n, j)).unwrap())
        .collect();
    let got = Matrix::from_columns(m + n, &cols);
    assert!(got.sub(&expect).max_abs() <= 1e-8 * expect.max_abs());
    assert!(apply_pencil_a(&d, p.mass(), &vec![0.0; m + n]).unwrap().iter().all(|x| *x == 0.0));
    for i in 0..5 {
        let v = random(400 + i, m + n);
        let w = random(500 + i, m + n);
        let av = apply_pencil_a(&d, p.mass(), &v).unwrap();
        let aw = apply_pencil_a(&d, p.mass(), &w).unwrap();
        assert!((dot(&av, &w) - dot(&v, &aw)).abs() <= 1e-8 * norm2(&av) * norm2(&w));
    }
}

// ---------- randomized solver against the dense oracle ----------

#[test]
fn randomized_matches_oracle_diffusion() {
    let p = diffusion(0.01);
    let opt = optimum(&p, &[0.0; 16]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let sp = p.spaces();
    let (mt, mz) = (sp.m_theta.as_ref(), sp.m_z.as_ref());
    let oracle = dense_oracle(&d, mt, mz, 2000, &Sequential).unwrap();
    assert!(oracle[3].sigma / oracle[4].sigma >= 10.0);
    let cfg = RandEigConfig::default();
    let g = randomized_geneig(&d, mt, mz, &cfg, 0, &Sequential).unwrap();
    assert_eq!(g.probes, 16);
    assert_eq!(g.triples.len(), 4);
    for (t, o) in g.triples.iter().zip(&oracle) {
        assert!(rel(t.sigma, o.sigma) <= 1e-6);
        assert!(aligned_m_distance(mt, &t.theta_vec, &o.theta_vec) <= 1e-5);
        assert!(aligned_m_distance(mz, &t.z_vec, &o.z_vec) <= 1e-5);
        let resid = sub(&d.apply(&t.theta_vec).unwrap(), &t.z_vec.iter().map(|x| x * t.sigma).collect::<Vec<_>>());
        assert!(mz.norm(&resid) <= 1e-6 * g.triples[0].sigma);
    }
    for a in 0..4 {
        for b in 0..4 {
            let delta = if a == b { 1.0 } else { 0.0 };
            let tt = m_inner(mt, &g.triples[a].theta_vec, &g.triples[b].theta_vec);
            let zz = m_inner(mz, &g.triples[a].z_vec, &g.triples[b].z_vec);
            assert!((tt - delta).abs() <= 1e-8 && (zz - delta).abs() <= 1e-8);
        }
    }
    // ± pairs in the Ritz spectrum.
    for t in &g.triples {
        let partner = g.ritz_values.iter().map(|r| (r + t.sigma).abs()).fold(f64::INFINITY, f64::min);
        assert!(partner <= 1e-8 * g.triples[0].sigma, "{partner}");
    }
}

#[test]
fn oracle_with_identity_weighting_is_plain_svd() {
    let dm = Matrix::from_fn(5, 3, |i, j| ((i * 3 + j) as f64).sin());
    let d = DenseSensitivity(dm.clone());
    let oracle = dense_oracle(
        &d,
        &hdsa_core::linalg::Identity(3),
        &hdsa_core::linalg::Identity(5),
        2000,
        &Sequential,
    )
    .unwrap();
    let svd = dense_svd(&dm).unwrap();
    for (t, s) in oracle.iter().zip(&svd.s) {
        assert!((t.sigma - s).abs() <= 1e-14 * svd.s[0]);
    }
}

#[test]
fn oracle_refuses_above_threshold() {
    let d = DenseSensitivity(Matrix::zeros(30, 5));
    let r = dense_oracle(&d, &hdsa_core::linalg::Identity(5), &hdsa_core::linalg::Identity(30), 20, &Sequential);
    assert!(matches!(r, Err(Error::DenseThresholdExceeded { .. })));
}

#[test]
fn parameter_independent_problem_has_zero_spectrum() {
    let p = DiffusionControl1d::new(DiffusionConfig {
        amplitude: 0.0,
        ..Default::default()
    })
    .unwrap();
    let opt = optimum(&p, &[0.4; 16]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let sp = p.spaces();
    let g = randomized_geneig(&d, sp.m_theta.as_ref(), sp.m_z.as_ref(), &Default::default(), 0, &Sequential).unwrap();
    assert!(g.triples.iter().all(|t| t.sigma <= 1e-12));
    let t = traditional_comparison(&p, &opt, &Default::default()).unwrap();
    assert!(t.iter().all(|x| *x == 0.0));
}

#[test]
fn probe_count_capped_by_pencil_dimension() {
    assert_eq!(RandEigConfig::default().probes(80), 16);
    assert_eq!(RandEigConfig { k_pairs: 2, ..Default::default() }.probes(3), 3);
    assert!(RandEigConfig { k_pairs: 0, ..Default::default() }.validate().is_err());
}

// ---------- alternative formulation ----------

#[test]
fn alternative_formulation_squares_singular_values() {
    let p = diffusion(0.01);
    let opt = optimum(&p, &[0.0; 16]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let sp = p.spaces();
    let (mt, mz) = (sp.m_theta.as_ref(), sp.m_z.as_ref());
    let cfg = RandEigConfig::default();
    let primary = randomized_geneig(&d, mt, mz, &cfg, 0, &Sequential).unwrap();
    let alt = alternative_formulation(&d, mt, mz, &cfg, 0, &Sequential).unwrap();
    let oracle = dense_oracle(&d, mt, mz, 2000, &Sequential).unwrap();
    for k in 0..4 {
        let s = primary.triples[k].sigma;
        assert!(rel(alt.alphas[k], s * s) <= 1e-6);
        assert!(rel(alt.triples[k].sigma, oracle[k].sigma) <= 1e-8);
        assert!(aligned_m_distance(mt, &alt.triples[k].theta_vec, &primary.triples[k].theta_vec) <= 1e-6);
        assert!(aligned_m_distance(mz, &alt.triples[k].z_vec, &primary.triples[k].z_vec) <= 1e-6);
    }
}

#[test]
fn alternative_formulation_rank_one() {
    let u = [1.0, -2.0, 0.5, 3.0];
    let v = [0.5, 0.25, -1.0];
    let d = DenseSensitivity(Matrix::from_fn(4, 3, |i, j| u[i] * v[j]));
    let alt = alternative_formulation(
        &d,
        &hdsa_core::linalg::Identity(3),
        &hdsa_core::linalg::Identity(4),
        &RandEigConfig::default(),
        0,
        &Sequential,
    )
    .unwrap();
    let expect = dot(&u, &u) * dot(&v, &v);
    assert_eq!(alt.alphas.len(), 1);
    assert!(rel(alt.alphas[0], expect) < 1e-12);
}

// ---------- indices ----------

#[test]
fn rank_one_local_index() {
    let t = SingularTriple {
        sigma: 2.0,
        theta_vec: unit(5, 2),
        z_vec: vec![1.0],
    };
    let s = local_indices(&[t], &hdsa_core::linalg::Identity(5));
    assert_eq!(s, vec![0.0, 0.0, 2.0, 0.0, 0.0]);
}

#[test]
fn set_index_closed_forms() {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let t = SingularTriple {
        sigma: 3.0,
        theta_vec: vec![h, h],
        z_vec: vec![1.0],
    };
    let id = hdsa_core::linalg::Identity(2);
    let whole = SetPartition::single("all", 2);
    assert!((set_indices(&[t.clone()], &id, &whole).unwrap()[0] - 3.0).abs() < 1e-14);
    let halves = SetPartition::new(
        vec![
            ParamSet { name: "a".into(), range: 0..1 },
            ParamSet { name: "b".into(), range: 1..2 },
        ],
        2,
    )
    .unwrap();
    let s = set_indices(&[t], &id, &halves).unwrap();
    assert!((s[0] - 3.0 * 0.5f64.sqrt()).abs() < 1e-14);
}

#[test]
fn set_index_refuses_coupled_partition() {
    let p = diffusion(0.01);
    let halves = SetPartition::new(
        vec![
            ParamSet { name: "left".into(), range: 0..8 },
            ParamSet { name: "right".into(), range: 8..16 },
        ],
        16,
    )
    .unwrap();
    let t = SingularTriple {
        sigma: 1.0,
        theta_vec: vec![1.0; 16],
        z_vec: vec![0.0; 64],
    };
    let r = set_indices(&[t], p.spaces().m_theta.as_ref(), &halves);
    assert!(matches!(r, Err(Error::NonOrthogonalPartition { .. })));
}

#[test]
fn full_rank_index_identity_and_parseval() {
    // Identity weighting: Ŝᵢ equals the directional sensitivity along eᵢ.
    let p = small_advdiff();
    let opt = optimum(&p, &vec![0.0; p.dims().n_theta]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let sp = p.spaces();
    let (mt, mz) = (sp.m_theta.as_ref(), sp.m_z.as_ref());
    let n = p.dims().n_theta;
    let oracle = dense_oracle(&d, mt, mz, 2000, &Sequential).unwrap();
    let s = local_indices(&oracle, mt);
    let mut frob = 0.0;
    for i in 0..n {
        let e = unit(n, i);
        let de = d.apply(&e).unwrap();
        let direct = mz.norm(&de);
        frob += direct * direct;
        assert!((s[i] - direct).abs() <= 1e-8 * s.iter().cloned().fold(0.0, f64::max), "{i}");
    }
    let total: f64 = s.iter().map(|x| x * x).sum();
    assert!(rel(total, frob) <= 1e-8);
    let window = p.parameter_layout()[3].clone();
    for i in window {
        let dir = d.directional(&unit(n, i)).unwrap();
        assert!(rel(s[i], dir) <= 1e-8);
    }
}

#[test]
fn direct_set_indices_agree_for_dominant_sets() {
    let p = small_advdiff();
    let opt = optimum(&p, &vec![0.0; p.dims().n_theta]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let sp = p.spaces();
    let (mt, mz) = (sp.m_theta.as_ref(), sp.m_z.as_ref());
    let part = sp.partition.as_ref().unwrap();
    let cfg = RandEigConfig { k_pairs: 12, ..Default::default() };
    let g = randomized_geneig(&d, mt, mz, &cfg, 0, &Sequential).unwrap();
    let truncated = set_indices(&g.triples, mt, part).unwrap();
    let direct = set_indices_direct(&d, mt, mz, part, &cfg, 0, &Sequential).unwrap();
    // Scalar sets are rank one, so the direct solve is exact there.
    for k in 1..4 {
        assert!(rel(truncated[k], direct[k]) <= 1e-6, "{k}: {truncated:?} {direct:?}");
    }
    for (t, s) in truncated.iter().zip(&direct) {
        assert!(*t <= g.triples[0].sigma * (1.0 + 1e-8));
        assert!(*s <= g.triples[0].sigma * (1.0 + 1e-8));
    }
}

// ---------- global analysis and diagnostics ----------

fn quick_cfg(k: usize) -> HdsaConfig {
    HdsaConfig {
        eig: RandEigConfig {
            k_pairs: k,
            ..Default::default()
        },
        ..Default::default()
    }
}

#[test]
fn single_sample_has_zero_spread() {
    let p = diffusion(0.01);
    let r = global_analysis(&p, &SamplingPlan::default(), &quick_cfg(4), &Sequential).unwrap();
    assert_eq!(r.samples.len(), 1);
    assert!(r.local.std.iter().chain(&r.sigma.std).chain(&r.sets.std).all(|s| *s == 0.0));
    assert_eq!(r.local.mean, r.samples[0].local_indices);
}

#[test]
fn linear_problem_has_sample_independent_spectrum() {
    let p = diffusion(0.0);
    let plan = SamplingPlan {
        theta: vec![ThetaDistribution::Uniform { low: -1.0, high: 1.0 }],
        seed: 3,
        ..Default::default()
    };
    let mut cfg = quick_cfg(4);
    cfg.eig.n_samples = 5;
    let r = global_analysis(&p, &plan, &cfg, &Sequential).unwrap();
    assert!(r.failures.is_empty(), "{:?}", r.failures);
    let first = r.samples[0].sigmas();
    for s in &r.samples[1..] {
        for (a, b) in s.sigmas().iter().zip(&first) {
            assert!(rel(*a, *b) <= 1e-6);
        }
        for (a, b) in s.local_indices.iter().zip(&r.samples[0].local_indices) {
            assert!((a - b).abs() <= 1e-6 * first[0], "{a} {b}");
        }
    }
}

#[test]
fn twenty_samples_scatter_shape() {
    let p = diffusion(0.01);
    let plan = SamplingPlan {
        theta: vec![ThetaDistribution::Uniform { low: -1.0, high: 1.0 }],
        ..Default::default()
    };
    let mut cfg = quick_cfg(4);
    cfg.eig.n_samples = 20;
    let r = global_analysis(&p, &plan, &cfg, &Sequential).unwrap();
    assert_eq!(r.samples.len() + r.failures.len(), 20);
    assert_eq!(r.samples.len(), 20);
    assert!(r.samples.iter().all(|s| s.triples.len() == 4 && s.local_indices.len() == 16));
}

#[test]
fn failing_samples_are_recorded() {
    let p = diffusion(0.01);
    // κ turns negative for large draws.
    let plan = SamplingPlan {
        theta: vec![ThetaDistribution::Uniform { low: -20.0, high: 20.0 }],
        ..Default::default()
    };
    let mut cfg = quick_cfg(2);
    cfg.eig.n_samples = 4;
    let r = global_analysis(&p, &plan, &cfg, &Sequential).unwrap();
    assert_eq!(r.failures.len() + r.samples.len(), 4);
    assert!(!r.failures.is_empty());
    assert!(r.failures[0].error.contains("not positive"));
}

#[test]
fn perturbation_linear_problem_is_exact() {
    let p = diffusion(0.0);
    let opt = optimum(&p, &[0.1; 16]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let phi: Vec<f64> = (0..16).map(|i| ((i as f64) * 1.3).cos()).collect();
    for delta in [0.5, 0.05, 0.005] {
        let r = perturbation_check(&d, &phi, delta, &OptimizerConfig::default()).unwrap();
        assert!((r.ratio - 1.0).abs() <= 1e-6, "{r:?}");
    }
    let zero = perturbation_check(&d, &phi, 0.0, &OptimizerConfig::default()).unwrap();
    assert_eq!((zero.lhs, zero.prediction), (0.0, 0.0));
}

#[test]
fn perturbation_logistic_converges() {
    let p = LogisticToy::new();
    let opt = optimum(&p, &[0.5, 0.5]);
    let d = SensitivityOperator::new(kkt_for(&p, &opt, KktStrategy::Auto));
    let exact = d.directional(&[1.0, 0.0]).unwrap();
    let errs: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&delta| {
            let r = perturbation_check(&d, &[1.0, 0.0], delta, &OptimizerConfig::default()).unwrap();
            (r.lhs / delta - exact).abs()
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[2] < errs[1], "{errs:?}");
    let order = (errs[1] / errs[2]).log10();
    assert!(order > 0.9, "{order}");
}

#[test]
fn traditional_comparison_matches_finite_differences() {
    let p = diffusion(0.01);
    let theta: Vec<f64> = (0..16).map(|i| 0.05 * i as f64).collect();
    let opt = optimum(&p, &theta);
    let t = traditional_comparison(&p, &opt, &Default::default()).unwrap();
    let g = |th: &[f64]| {
        let u = hdsa_core::optimizer::solve_forward(&p, &opt.z0, th, &opt.u0, &Default::default()).unwrap();
        p.objective(hdsa_core::problems::Eval { u: &u, z: &opt.z0, theta: th })
    };
    let h = 1e-5;
    let scale = t.iter().cloned().fold(0.0, f64::max);
    for i in 0..16 {
        let mut a = theta.clone();
        let mut b = theta.clone();
        a[i] += h;
        b[i] -= h;
        let fd = ((g(&a) - g(&b)) / (2.0 * h)).abs();
        assert!((fd - t[i]).abs() <= 1e-6 * scale, "{i}: {fd} vs {}", t[i]);
    }
}
