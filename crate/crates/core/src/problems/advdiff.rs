use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::fem1d::{interpolation_weights, mass_matrix, HatBasis};
use super::{Eval, ParamSet, Point, Preset, Problem, ProblemDims, SetPartition, WeightedSpaces};
use crate::linalg::{check_len, BlockDiagonal, Identity, LinearMap, SpdOperator, SymTridiagonal};
use crate::rng::{Domain, Stream};
use crate::{Error, Result};

/// Settings of the transient source-inversion problem.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdvDiffConfig {
    /// Grid nodes on `[0, 1]`, boundaries included.
    pub n_x: usize,
    pub n_t: usize,
    pub t_final: f64,
    pub velocity: f64,
    pub diffusion: f64,
    /// Relative amplitude `a` of every parameter perturbation.
    pub amplitude: f64,
    /// Hat functions in the spatial velocity perturbation; 0 disables it.
    pub velocity_field_nodes: usize,
    /// First and last time step (1-based, inclusive) of the source window.
    pub source_window: [usize; 2],
    pub sensors: Vec<f64>,
    /// Observe every this many time steps, ending at the final step.
    pub observe_every: usize,
    pub alpha: f64,
    pub noise_level: f64,
    pub noise_seed: u64,
    /// Spatial refinement factor of the grid generating synthetic data.
    pub data_refinement: usize,
    pub true_source: Preset,
}

impl Default for AdvDiffConfig {
    fn default() -> Self {
        Self {
            n_x: 64,
            n_t: 40,
            t_final: 0.5,
            velocity: 1.0,
            diffusion: 0.02,
            amplitude: 0.2,
            velocity_field_nodes: 8,
            source_window: [1, 4],
            sensors: (0..11).map(|i| 0.05 + 0.09 * i as f64).collect(),
            observe_every: 1,
            alpha: 0.0005,
            noise_level: 0.03,
            noise_seed: 1234,
            data_refinement: 2,
            true_source: Preset::GaussianBump {
                center: 0.3,
                width: 0.05,
                amplitude: 1.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    n_field: usize,
    vel: usize,
    diff: usize,
    window: usize,
    n_window: usize,
}

impl Layout {
    fn n_theta(&self) -> usize {
        self.window + self.n_window
    }
}

/// Backward-Euler P1 discretization of `c_t + (v c)_x − ε c_xx = w(t) z(x)`
/// on `(0, 1)` with zero-flux boundaries and zero initial condition.
///
/// The state stacks the concentrations of all time steps. The stationary
/// source `z` acts on a fixed window of steps. Uncertain parameters scale
/// the velocity (a spatial field and a scalar), the diffusivity, and the
/// per-step source strength inside the window.
pub struct AdvDiffInversion1d {
    cfg: AdvDiffConfig,
    h: f64,
    dt: f64,
    layout: Layout,
    mass: SymTridiagonal,
    field: HatBasis,
    // Sensor interpolation weights.
    sensors: Vec<[(usize, f64); 2]>,
    // Observed step indices (0-based).
    observed: Vec<usize>,
    // data[o][s]
    data: Vec<Vec<f64>>,
    spaces: WeightedSpaces,
}

impl AdvDiffInversion1d {
    pub fn new(cfg: AdvDiffConfig) -> Result<Self> {
        let mut p = Self::without_data(cfg)?;
        p.data = p.synthesize_data()?;
        Ok(p)
    }

    /// Builds the problem with externally supplied observations, indexed by
    /// observation time then sensor.
    pub fn with_data(cfg: AdvDiffConfig, data: Vec<Vec<f64>>) -> Result<Self> {
        let mut p = Self::without_data(cfg)?;
        check_len("observation times", p.observed.len(), data.len())?;
        for row in &data {
            check_len("observations per time", p.sensors.len(), row.len())?;
        }
        p.data = data;
        Ok(p)
    }

    fn without_data(cfg: AdvDiffConfig) -> Result<Self> {
        let bad = |m: alloc::string::String| Err(Error::InvalidConfig(m));
        if cfg.n_x < 3 {
            return bad("advdiff needs n_x >= 3".into());
        }
        if cfg.n_t < 1 || !(cfg.t_final > 0.0) {
            return bad("advdiff needs n_t >= 1 and t_final > 0".into());
        }
        if !(cfg.diffusion > 0.0) {
            return bad(alloc::format!("diffusion must be positive, got {}", cfg.diffusion));
        }
        let [w0, w1] = cfg.source_window;
        if w0 < 1 || w1 < w0 || w1 > cfg.n_t {
            return bad(alloc::format!(
                "source window {w0}..={w1} must lie within steps 1..={}",
                cfg.n_t
            ));
        }
        if cfg.sensors.is_empty() {
            return bad("advdiff needs at least one sensor".into());
        }
        if let Some(s) = cfg.sensors.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return bad(alloc::format!("sensor location {s} lies outside [0, 1]"));
        }
        if cfg.observe_every < 1 || cfg.data_refinement < 1 {
            return bad("observe_every and data_refinement must be >= 1".into());
        }
        if !(cfg.alpha >= 0.0) || !(cfg.noise_level >= 0.0) {
            return bad("alpha and noise_level must be non-negative".into());
        }
        cfg.true_source.validate()?;

        let h = 1.0 / (cfg.n_x - 1) as f64;
        let dt = cfg.t_final / cfg.n_t as f64;
        let n_window = w1 - w0 + 1;
        let layout = Layout {
            n_field: cfg.velocity_field_nodes,
            vel: cfg.velocity_field_nodes,
            diff: cfg.velocity_field_nodes + 1,
            window: cfg.velocity_field_nodes + 2,
            n_window,
        };
        let mass = mass_matrix(cfg.n_x, h, true)?;
        let field = HatBasis::new(cfg.velocity_field_nodes);
        let sensors = cfg
            .sensors
            .iter()
            .map(|&s| interpolation_weights(cfg.n_x, h, s))
            .collect();
        let observed: Vec<usize> = (0..cfg.n_t)
            .rev()
            .step_by(cfg.observe_every)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();

        let mut blocks: Vec<Box<dyn SpdOperator>> = Vec::new();
        let mut sets = Vec::new();
        if layout.n_field > 0 {
            blocks.push(Box::new(field.mass_matrix()?));
            sets.push(ParamSet {
                name: "velocity_field".into(),
                range: 0..layout.n_field,
            });
        }
        blocks.push(Box::new(Identity(1)));
        sets.push(ParamSet {
            name: "velocity".into(),
            range: layout.vel..layout.vel + 1,
        });
        blocks.push(Box::new(Identity(1)));
        sets.push(ParamSet {
            name: "diffusion".into(),
            range: layout.diff..layout.diff + 1,
        });
        blocks.push(Box::new(Identity(n_window)));
        sets.push(ParamSet {
            name: "source_window".into(),
            range: layout.window..layout.window + n_window,
        });
        let spaces = WeightedSpaces {
            m_theta: Box::new(BlockDiagonal::new(blocks)),
            m_z: Box::new(mass.clone()),
            partition: Some(SetPartition::new(sets, layout.n_theta())?),
        };
        Ok(Self {
            cfg,
            h,
            dt,
            layout,
            mass,
            field,
            sensors,
            observed,
            data: Vec::new(),
            spaces,
        })
    }

    fn synthesize_data(&self) -> Result<Vec<Vec<f64>>> {
        let r = self.cfg.data_refinement;
        let fine = Self::without_data(AdvDiffConfig {
            n_x: (self.cfg.n_x - 1) * r + 1,
            ..self.cfg.clone()
        })?;
        let z = fine.source_at_nodes(&self.cfg.true_source);
        let theta = vec![0.0; fine.layout.n_theta()];
        let u = fine.forward(&z, &theta)?;
        let mut obs = fine.observe(&u);
        if self.cfg.noise_level > 0.0 {
            let mut noise = Stream::new(self.cfg.noise_seed, Domain::Noise, 0, 0);
            for row in obs.iter_mut() {
                for d in row.iter_mut() {
                    *d += noise.normal() * self.cfg.noise_level * d.abs();
                }
            }
        }
        Ok(obs)
    }

    pub fn config(&self) -> &AdvDiffConfig {
        &self.cfg
    }

    pub fn mass(&self) -> &SymTridiagonal {
        &self.mass
    }

    pub fn time_step(&self) -> f64 {
        self.dt
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cfg.n_x).map(|i| i as f64 * self.h).collect()
    }

    pub fn source_at_nodes(&self, f: &Preset) -> Vec<f64> {
        self.nodes().iter().map(|&x| f.eval(x)).collect()
    }

    /// Parameter index ranges: velocity field, velocity scalar, diffusion
    /// scalar, source window.
    pub fn parameter_layout(&self) -> [core::ops::Range<usize>; 4] {
        let l = &self.layout;
        [
            0..l.n_field,
            l.vel..l.vel + 1,
            l.diff..l.diff + 1,
            l.window..l.window + l.n_window,
        ]
    }

    /// Solves the forward problem directly by time stepping.
    pub fn forward(&self, z: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        let x = Eval {
            u: &[],
            z,
            theta,
        };
        let mut rhs = self.residual_offset(x);
        crate::linalg::scale(-1.0, &mut rhs);
        self.state_jacobian_solve(x, &rhs)
    }

    /// Observations `𝒫c` indexed by observation time then sensor.
    pub fn observe(&self, u: &[f64]) -> Vec<Vec<f64>> {
        let n = self.cfg.n_x;
        self.observed
            .iter()
            .map(|&k| {
                let c = &u[k * n..(k + 1) * n];
                self.sensors
                    .iter()
                    .map(|w| w.iter().map(|&(i, v)| v * c[i]).sum())
                    .collect()
            })
            .collect()
    }

    fn observe_t(&self, resid: &[Vec<f64>]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let mut out = vec![0.0; n * self.cfg.n_t];
        for (o, &k) in self.observed.iter().enumerate() {
            for (s, w) in self.sensors.iter().enumerate() {
                for &(i, v) in w {
                    out[k * n + i] += v * resid[o][s];
                }
            }
        }
        out
    }

    fn velocity_scalar(&self, theta: &[f64]) -> f64 {
        self.cfg.velocity * (1.0 + self.cfg.amplitude * theta[self.layout.vel])
    }

    fn field_factor(&self, theta: &[f64], e: usize) -> f64 {
        if self.layout.n_field == 0 {
            return 1.0;
        }
        let x = (e as f64 + 0.5) * self.h;
        1.0 + self.cfg.amplitude * self.field.combine(&theta[..self.layout.n_field], x)
    }

    fn element_velocity(&self, theta: &[f64]) -> Vec<f64> {
        let v = self.velocity_scalar(theta);
        (0..self.cfg.n_x - 1).map(|e| v * self.field_factor(theta, e)).collect()
    }

    fn diffusivity(&self, theta: &[f64]) -> f64 {
        self.cfg.diffusion * (1.0 + self.cfg.amplitude * theta[self.layout.diff])
    }

    fn source_weight(&self, theta: &[f64], k: usize) -> f64 {
        let [w0, _] = self.cfg.source_window;
        match self.window_slot(k) {
            Some(_) => 1.0 + self.cfg.amplitude * theta[self.layout.window + (k + 1 - w0)],
            None => 0.0,
        }
    }

    // Slot of 0-based step k inside the window.
    fn window_slot(&self, k: usize) -> Option<usize> {
        let [w0, w1] = self.cfg.source_window;
        (k + 1 >= w0 && k < w1).then(|| k + 1 - w0)
    }

    // y += s K(v_e, ε) c, where K = ε S + G(v).
    fn add_transport(&self, vel: &[f64], eps: f64, c: &[f64], s: f64, y: &mut [f64]) {
        for e in 0..self.cfg.n_x - 1 {
            let (l, r) = (e, e + 1);
            let diff = eps * (c[r] - c[l]) / self.h;
            let adv = vel[e] * 0.5 * (c[l] + c[r]);
            y[l] += s * (adv - diff);
            y[r] += s * (diff - adv);
        }
    }

    // y += s K(v_e, ε)ᵀ w
    fn add_transport_t(&self, vel: &[f64], eps: f64, w: &[f64], s: f64, y: &mut [f64]) {
        for e in 0..self.cfg.n_x - 1 {
            let (l, r) = (e, e + 1);
            let diff = eps * (w[r] - w[l]) / self.h;
            let adv = vel[e] * 0.5 * (w[l] - w[r]);
            y[l] += s * (adv - diff);
            y[r] += s * (adv + diff);
        }
    }

    // Per-element bilinear forms wᵀ G_e c (unit velocity) and wᵀ S c.
    fn transport_forms(&self, w: &[f64], c: &[f64]) -> (Vec<f64>, f64) {
        let mut adv = Vec::with_capacity(self.cfg.n_x - 1);
        let mut diff = 0.0;
        for e in 0..self.cfg.n_x - 1 {
            let (l, r) = (e, e + 1);
            adv.push(0.5 * (w[l] - w[r]) * (c[l] + c[r]));
            diff += (w[r] - w[l]) * (c[r] - c[l]) / self.h;
        }
        (adv, diff)
    }

    // dv_e for a θ-direction.
    fn velocity_direction(&self, theta: &[f64], d: &[f64]) -> Vec<f64> {
        let a = self.cfg.amplitude;
        let vs = self.velocity_scalar(theta);
        (0..self.cfg.n_x - 1)
            .map(|e| {
                let mut dv = self.cfg.velocity * a * d[self.layout.vel] * self.field_factor(theta, e);
                if self.layout.n_field > 0 {
                    let x = (e as f64 + 0.5) * self.h;
                    dv += vs * a * self.field.combine(&d[..self.layout.n_field], x);
                }
                dv
            })
            .collect()
    }

    // θ-gradient of Σ_e g_e v_e(θ) + s ε(θ), the transpose of
    // `velocity_direction` plus the diffusivity term.
    fn transport_gradient(&self, theta: &[f64], g: &[f64], s: f64, out: &mut [f64]) {
        let a = self.cfg.amplitude;
        let vs = self.velocity_scalar(theta);
        for (e, ge) in g.iter().enumerate() {
            out[self.layout.vel] += self.cfg.velocity * a * self.field_factor(theta, e) * ge;
            if self.layout.n_field > 0 {
                let x = (e as f64 + 0.5) * self.h;
                for (k, phi) in self.field.eval(x) {
                    out[k] += vs * a * phi * ge;
                }
            }
        }
        out[self.layout.diff] += self.cfg.diffusion * a * s;
    }

    // (M + dt K) as three diagonals: sub, main, super.
    fn step_matrix(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.cfg.n_x;
        let vel = self.element_velocity(theta);
        let eps = self.diffusivity(theta);
        let mut main = self.mass.diag().to_vec();
        let mut sup = self.mass.off().to_vec();
        let mut sub = self.mass.off().to_vec();
        for e in 0..n - 1 {
            let kd = eps / self.h;
            let va = 0.5 * vel[e];
            main[e] += self.dt * (kd + va);
            main[e + 1] += self.dt * (kd - va);
            sup[e] += self.dt * (-kd + va);
            sub[e] += self.dt * (-kd - va);
        }
        (sub, main, sup)
    }

    fn step_matrix_checked(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.validate_theta(theta)?;
        Ok(self.step_matrix(theta))
    }

    // Residual at u = 0: −dt w_k M z per step.
    fn residual_offset(&self, x: Eval) -> Vec<f64> {
        let n = self.cfg.n_x;
        let mz = self.mass.apply(x.z);
        let mut r = vec![0.0; n * self.cfg.n_t];
        for k in 0..self.cfg.n_t {
            let w = self.source_weight(x.theta, k);
            if w != 0.0 {
                for i in 0..n {
                    r[k * n + i] = -self.dt * w * mz[i];
                }
            }
        }
        r
    }
}

fn tridiag_solve(sub: &[f64], main: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = main.len();
    let mut c = vec![0.0; n];
    let mut x = rhs.to_vec();
    for i in 0..n {
        let mut piv = main[i];
        if i > 0 {
            piv -= sub[i - 1] * c[i - 1];
            x[i] -= sub[i - 1] * x[i - 1];
        }
        if !(piv.abs() > f64::MIN_POSITIVE) {
            return Err(Error::Singular { pivot: i });
        }
        if i + 1 < n {
            c[i] = sup[i] / piv;
        }
        x[i] /= piv;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

impl Problem for AdvDiffInversion1d {
    fn name(&self) -> &str {
        "advdiff_inversion_1d"
    }

    fn dims(&self) -> ProblemDims {
        let n_u = self.cfg.n_x * self.cfg.n_t;
        ProblemDims {
            n_u,
            n_z: self.cfg.n_x,
            n_theta: self.layout.n_theta(),
            n_lambda: n_u,
        }
    }

    fn spaces(&self) -> &WeightedSpaces {
        &self.spaces
    }

    fn validate_theta(&self, theta: &[f64]) -> Result<()> {
        check_len("advdiff theta", self.layout.n_theta(), theta.len())?;
        let eps = self.diffusivity(theta);
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(alloc::format!(
                "diffusivity {eps} is not positive"
            )));
        }
        Ok(())
    }

    fn state_is_linear(&self) -> bool {
        true
    }

    fn objective(&self, x: Eval) -> f64 {
        let obs = self.observe(x.u);
        let misfit: f64 = obs
            .iter()
            .zip(&self.data)
            .flat_map(|(o, d)| o.iter().zip(d).map(|(a, b)| (a - b) * (a - b)))
            .sum();
        0.5 * misfit + 0.5 * self.cfg.alpha * self.mass.inner(x.z, x.z)
    }

    fn residual(&self, x: Eval) -> Vec<f64> {
        let mut r = self.c_u(x, x.u);
        crate::linalg::axpy(1.0, &self.residual_offset(x), &mut r);
        r
    }

    fn j_u(&self, x: Eval) -> Vec<f64> {
        let mut obs = self.observe(x.u);
        for (o, d) in obs.iter_mut().zip(&self.data) {
            for (a, b) in o.iter_mut().zip(d) {
                *a -= b;
            }
        }
        self.observe_t(&obs)
    }

    fn j_z(&self, x: Eval) -> Vec<f64> {
        crate::linalg::scaled(self.cfg.alpha, &self.mass.apply(x.z))
    }

    fn j_theta(&self, _x: Eval) -> Vec<f64> {
        vec![0.0; self.layout.n_theta()]
    }

    fn c_u(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let vel = self.element_velocity(x.theta);
        let eps = self.diffusivity(x.theta);
        let mut y = vec![0.0; n * self.cfg.n_t];
        for k in 0..self.cfg.n_t {
            let vk = &v[k * n..(k + 1) * n];
            let yk = &mut y[k * n..(k + 1) * n];
            self.mass.apply_into(vk, yk);
            self.add_transport(&vel, eps, vk, self.dt, yk);
            if k > 0 {
                let prev = self.mass.apply(&v[(k - 1) * n..k * n]);
                for (a, b) in yk.iter_mut().zip(prev) {
                    *a -= b;
                }
            }
        }
        y
    }

    fn c_u_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let vel = self.element_velocity(x.theta);
        let eps = self.diffusivity(x.theta);
        let mut y = vec![0.0; n * self.cfg.n_t];
        for k in 0..self.cfg.n_t {
            let wk = &w[k * n..(k + 1) * n];
            let yk = &mut y[k * n..(k + 1) * n];
            self.mass.apply_into(wk, yk);
            self.add_transport_t(&vel, eps, wk, self.dt, yk);
            if k + 1 < self.cfg.n_t {
                let next = self.mass.apply(&w[(k + 1) * n..(k + 2) * n]);
                for (a, b) in yk.iter_mut().zip(next) {
                    *a -= b;
                }
            }
        }
        y
    }

    fn c_z(&self, x: Eval, v: &[f64]) -> Vec<f64> {
        self.residual_offset(Eval { z: v, ..x })
    }

    fn c_z_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let mut acc = vec![0.0; n];
        for k in 0..self.cfg.n_t {
            let s = self.source_weight(x.theta, k);
            if s != 0.0 {
                crate::linalg::axpy(-self.dt * s, &w[k * n..(k + 1) * n], &mut acc);
            }
        }
        self.mass.apply(&acc)
    }

    fn c_theta(&self, x: Eval, d: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let dvel = self.velocity_direction(x.theta, d);
        let deps = self.cfg.diffusion * self.cfg.amplitude * d[self.layout.diff];
        let mz = self.mass.apply(x.z);
        let mut y = vec![0.0; n * self.cfg.n_t];
        for k in 0..self.cfg.n_t {
            let yk = &mut y[k * n..(k + 1) * n];
            self.add_transport(&dvel, deps, &x.u[k * n..(k + 1) * n], self.dt, yk);
            if let Some(slot) = self.window_slot(k) {
                let dw = self.cfg.amplitude * d[self.layout.window + slot];
                crate::linalg::axpy(-self.dt * dw, &mz, yk);
            }
        }
        y
    }

    fn c_theta_t(&self, x: Eval, w: &[f64]) -> Vec<f64> {
        self.theta_pairing(x.theta, w, x.u, x.z)
    }

    fn l_uu(&self, _p: Point, v: &[f64]) -> Vec<f64> {
        self.observe_t(&self.observe(v))
    }

    fn l_uz(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0; self.cfg.n_x * self.cfg.n_t]
    }

    fn l_zu(&self, _p: Point, _v: &[f64]) -> Vec<f64> {
        vec![0.0; self.cfg.n_x]
    }

    fn l_zz(&self, _p: Point, v: &[f64]) -> Vec<f64> {
        crate::linalg::scaled(self.cfg.alpha, &self.mass.apply(v))
    }

    fn l_utheta(&self, p: Point, d: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let dvel = self.velocity_direction(p.theta, d);
        let deps = self.cfg.diffusion * self.cfg.amplitude * d[self.layout.diff];
        let mut y = vec![0.0; n * self.cfg.n_t];
        for k in 0..self.cfg.n_t {
            let yk = &mut y[k * n..(k + 1) * n];
            self.add_transport_t(&dvel, deps, &p.lambda[k * n..(k + 1) * n], self.dt, yk);
        }
        y
    }

    fn l_thetau(&self, p: Point, v: &[f64]) -> Vec<f64> {
        let zero = vec![0.0; self.cfg.n_x];
        self.theta_pairing(p.theta, p.lambda, v, &zero)
    }

    fn l_ztheta(&self, p: Point, d: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let mut acc = vec![0.0; n];
        for k in 0..self.cfg.n_t {
            if let Some(slot) = self.window_slot(k) {
                let dw = self.cfg.amplitude * d[self.layout.window + slot];
                crate::linalg::axpy(-self.dt * dw, &p.lambda[k * n..(k + 1) * n], &mut acc);
            }
        }
        self.mass.apply(&acc)
    }

    fn l_thetaz(&self, p: Point, v: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let mv = self.mass.apply(v);
        let mut out = vec![0.0; self.layout.n_theta()];
        for k in 0..self.cfg.n_t {
            if let Some(slot) = self.window_slot(k) {
                let lk = &p.lambda[k * n..(k + 1) * n];
                out[self.layout.window + slot] -=
                    self.dt * self.cfg.amplitude * crate::linalg::dot(lk, &mv);
            }
        }
        out
    }

    fn state_jacobian_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.cfg.n_x;
        check_len("advdiff state solve", n * self.cfg.n_t, rhs.len())?;
        let (sub, main, sup) = self.step_matrix_checked(x.theta)?;
        let mut u = vec![0.0; rhs.len()];
        for k in 0..self.cfg.n_t {
            let mut b = rhs[k * n..(k + 1) * n].to_vec();
            if k > 0 {
                crate::linalg::axpy(1.0, &self.mass.apply(&u[(k - 1) * n..k * n]), &mut b);
            }
            let ck = tridiag_solve(&sub, &main, &sup, &b)?;
            u[k * n..(k + 1) * n].copy_from_slice(&ck);
        }
        Ok(u)
    }

    fn state_jacobian_adjoint_solve(&self, x: Eval, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.cfg.n_x;
        check_len("advdiff adjoint solve", n * self.cfg.n_t, rhs.len())?;
        let (sub, main, sup) = self.step_matrix_checked(x.theta)?;
        let mut lam = vec![0.0; rhs.len()];
        for k in (0..self.cfg.n_t).rev() {
            let mut b = rhs[k * n..(k + 1) * n].to_vec();
            if k + 1 < self.cfg.n_t {
                crate::linalg::axpy(1.0, &self.mass.apply(&lam[(k + 1) * n..(k + 2) * n]), &mut b);
            }
            let lk = tridiag_solve(&sup, &main, &sub, &b)?;
            lam[k * n..(k + 1) * n].copy_from_slice(&lk);
        }
        Ok(lam)
    }
}

impl AdvDiffInversion1d {
    // ∂/∂θ of Σ_k w_kᵀ r_k(c, z, θ) for fixed w, c, z.
    fn theta_pairing(&self, theta: &[f64], w: &[f64], c: &[f64], z: &[f64]) -> Vec<f64> {
        let n = self.cfg.n_x;
        let mz = self.mass.apply(z);
        let mut out = vec![0.0; self.layout.n_theta()];
        let mut g = vec![0.0; n - 1];
        let mut s = 0.0;
        for k in 0..self.cfg.n_t {
            let wk = &w[k * n..(k + 1) * n];
            let (adv, diff) = self.transport_forms(wk, &c[k * n..(k + 1) * n]);
            for (a, b) in g.iter_mut().zip(adv) {
                *a += self.dt * b;
            }
            s += self.dt * diff;
            if let Some(slot) = self.window_slot(k) {
                out[self.layout.window + slot] -=
                    self.dt * self.cfg.amplitude * crate::linalg::dot(wk, &mz);
            }
        }
        self.transport_gradient(theta, &g, s, &mut out);
        out
    }
}
