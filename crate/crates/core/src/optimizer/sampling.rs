use alloc::vec::Vec;

use super::InitialIterate;
use crate::problems::ProblemDims;
use crate::rng::{Domain, Stream};
use crate::{Error, Result};

/// Marginal distribution of one parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields))]
pub enum ThetaDistribution {
    Uniform { low: f64, high: f64 },
    Normal { mean: f64, std: f64 },
}

impl ThetaDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            ThetaDistribution::Uniform { low, high } => 0.5 * (low + high),
            ThetaDistribution::Normal { mean, .. } => mean,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ThetaDistribution::Uniform { low, high } if !(low <= high) => Err(Error::InvalidConfig(
                alloc::format!("uniform bounds [{low}, {high}] are reversed"),
            )),
            ThetaDistribution::Normal { std, .. } if !(std >= 0.0) => Err(Error::InvalidConfig(
                alloc::format!("normal std {std} must be non-negative"),
            )),
            _ => Ok(()),
        }
    }
}

/// How initial iterates are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum IterateMode {
    #[default]
    Zero,
    SeededRandom,
}

/// Joint distribution of `(θ, I)` for global analysis.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SamplingPlan {
    /// One entry per coordinate, or a single entry applied to all.
    pub theta: Vec<ThetaDistribution>,
    pub iterate: IterateMode,
    /// Standard deviation of seeded-random initial iterates.
    pub iterate_scale: f64,
    pub seed: u64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            theta: alloc::vec![ThetaDistribution::Uniform {
                low: 0.0,
                high: 0.0
            }],
            iterate: IterateMode::Zero,
            iterate_scale: 1.0,
            seed: 0,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self, n_theta: usize) -> Result<()> {
        if self.theta.len() != 1 && self.theta.len() != n_theta {
            return Err(Error::InvalidConfig(alloc::format!(
                "sampling lists {} distributions for {} parameters",
                self.theta.len(),
                n_theta
            )));
        }
        self.theta.iter().try_for_each(|d| d.validate())
    }

    fn distribution(&self, i: usize) -> ThetaDistribution {
        if self.theta.len() == 1 {
            self.theta[0]
        } else {
            self.theta[i]
        }
    }
}

/// Draws sample `j`; a pure function of `(plan.seed, j)`.
pub fn sample_inputs(plan: &SamplingPlan, dims: ProblemDims, j: usize) -> Result<(Vec<f64>, InitialIterate)> {
    plan.validate(dims.n_theta)?;
    let mut s = Stream::new(plan.seed, Domain::Theta, j as u64, 0);
    let theta = (0..dims.n_theta)
        .map(|i| match plan.distribution(i) {
            ThetaDistribution::Uniform { low, high } => low + (high - low) * s.uniform(),
            ThetaDistribution::Normal { mean, std } => mean + std * s.normal(),
        })
        .collect();
    let init = match plan.iterate {
        IterateMode::Zero => InitialIterate {
            u_init: alloc::vec![0.0; dims.n_u],
            z_init: alloc::vec![0.0; dims.n_z],
            provenance: IterateMode::Zero,
        },
        IterateMode::SeededRandom => {
            let draw = |slot: u64, n: usize| {
                let mut v = Stream::new(plan.seed, Domain::Iterate, j as u64, slot).normal_vec(n);
                crate::linalg::scale(plan.iterate_scale, &mut v);
                v
            };
            InitialIterate {
                u_init: draw(0, dims.n_u),
                z_init: draw(1, dims.n_z),
                provenance: IterateMode::SeededRandom,
            }
        }
    };
    Ok((theta, init))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(n_theta: usize) -> ProblemDims {
        ProblemDims {
            n_u: 3,
            n_z: 2,
            n_theta,
            n_lambda: 3,
        }
    }

    #[test]
    fn uniform_box_samples_distinct_and_bounded() {
        let plan = SamplingPlan {
            theta: alloc::vec![ThetaDistribution::Uniform { low: -1.0, high: 1.0 }],
            ..Default::default()
        };
        let (a, _) = sample_inputs(&plan, dims(16), 0).unwrap();
        let (b, _) = sample_inputs(&plan, dims(16), 1).unwrap();
        assert_ne!(a, b);
        assert!(a.iter().chain(&b).all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn degenerate_plan_is_zero() {
        let plan = SamplingPlan::default();
        for j in 0..5 {
            let (t, init) = sample_inputs(&plan, dims(4), j).unwrap();
            assert!(t.iter().all(|x| *x == 0.0));
            assert!(init.z_init.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn empirical_means() {
        let plan = SamplingPlan {
            theta: alloc::vec![
                ThetaDistribution::Uniform { low: -1.0, high: 3.0 },
                ThetaDistribution::Normal { mean: 2.0, std: 0.5 },
            ],
            ..Default::default()
        };
        let n = 10_000;
        let mut sums = [0.0; 2];
        for j in 0..n {
            let (t, _) = sample_inputs(&plan, dims(2), j).unwrap();
            sums[0] += t[0];
            sums[1] += t[1];
        }
        let sd = [4.0 / crate::math::sqrt(12.0), 0.5];
        for k in 0..2 {
            let mean = sums[k] / n as f64;
            let expect = plan.theta[k].mean();
            // 3σ/√N with N = 10⁴
            assert!((mean - expect).abs() <= 3.0 * sd[k] / 100.0, "{k}: {mean}");
        }
    }

    #[test]
    fn seeded_iterates_reproducible() {
        let plan = SamplingPlan {
            iterate: IterateMode::SeededRandom,
            seed: 9,
            ..Default::default()
        };
        let a = sample_inputs(&plan, dims(1), 3).unwrap();
        let b = sample_inputs(&plan, dims(1), 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.1.z_init, sample_inputs(&plan, dims(1), 4).unwrap().1.z_init);
    }
}
