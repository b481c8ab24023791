//! Synthetic bags with known instance labels, plus brute-force oracles for
//! the objective and its gradient.
//!
//! The oracles recompute everything from raw features with explicit loops
//! in `f64` and share no arithmetic with [`crate::objective`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Coverage, Dataset, Group, Instance};
use crate::error::{Error, Result};
use crate::objective::{gradient, lambda_from_alpha, Batch, Theta};
use crate::scalar::Scalar;

pub const ORACLE_MAX_INSTANCES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupSize {
    Fixed(usize),
    /// Uniform over `min..=max`.
    Range(usize, usize),
}

/// How many positives each bag holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Composition {
    /// `round(fraction * size)` positives in every bag.
    Fixed(f64),
    /// Positive count uniform over `0..=size`.
    Uniform,
    /// Each instance positive independently with this probability.
    BernoulliBag(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Exact positive fraction.
    Proportion,
    /// 1 iff the positive fraction is at least one half.
    BinaryMajority,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub n_groups: usize,
    pub group_size: GroupSize,
    pub positive_mean: Vec<f64>,
    pub negative_mean: Vec<f64>,
    pub noise_std: f64,
    pub composition: Composition,
    pub score_mode: ScoreMode,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Two well separated Gaussian classes in the plane, 200 bags of 10.
    fn default() -> Self {
        Self {
            dim: 2,
            n_groups: 200,
            group_size: GroupSize::Fixed(10),
            positive_mean: vec![2.0, 0.0],
            negative_mean: vec![-2.0, 0.0],
            noise_std: 0.5,
            composition: Composition::Uniform,
            score_mode: ScoreMode::Proportion,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dim == 0 || self.n_groups == 0 {
            return bad("dim and n_groups must be positive");
        }
        if self.positive_mean.len() != self.dim || self.negative_mean.len() != self.dim {
            return bad("class means must have `dim` components");
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be positive");
        }
        match self.group_size {
            GroupSize::Fixed(0) => return bad("group size must be positive"),
            GroupSize::Range(lo, hi) if lo == 0 || lo > hi => {
                return bad("group size range must satisfy 1 <= min <= max")
            }
            _ => {}
        }
        match self.composition {
            Composition::Fixed(p) | Composition::BernoulliBag(p) if !(0.0..=1.0).contains(&p) => {
                bad("composition fraction must lie in [0, 1]")
            }
            _ => Ok(()),
        }
    }
}

/// Draws a dataset. Instances carry their true labels; ids are
/// `i000000`, ... and `g00000`, ... so lexicographic order follows creation.
pub fn generate<T: Scalar>(config: &SynthConfig) -> Result<Dataset<T>> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut instances = Vec::new();
    let mut groups = Vec::with_capacity(config.n_groups);
    for g in 0..config.n_groups {
        let size = match config.group_size {
            GroupSize::Fixed(n) => n,
            GroupSize::Range(lo, hi) => rng.random_range(lo..=hi),
        };
        let mut labels: Vec<bool> = match config.composition {
            Composition::Fixed(p) => {
                let k = (p * size as f64).round() as usize;
                (0..size).map(|i| i < k).collect()
            }
            Composition::Uniform => {
                let k = rng.random_range(0..=size);
                (0..size).map(|i| i < k).collect()
            }
            Composition::BernoulliBag(p) => (0..size).map(|_| rng.random_bool(p)).collect(),
        };
        // Fisher-Yates from the same stream so positives are not always first.
        for i in (1..labels.len()).rev() {
            let j = rng.random_range(0..=i);
            labels.swap(i, j);
        }
        let positives = labels.iter().filter(|l| **l).count();
        let mut members = Vec::with_capacity(size);
        for positive in labels {
            let mean = if positive {
                &config.positive_mean
            } else {
                &config.negative_mean
            };
            let features = mean
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    T::of(m + config.noise_std * z)
                })
                .collect();
            let id = format!("i{:06}", instances.len());
            members.push(id.clone());
            instances.push(Instance::new(id, features).with_label(positive));
        }
        let score = match config.score_mode {
            ScoreMode::Proportion => positives as f64 / size as f64,
            ScoreMode::BinaryMajority => f64::from(u8::from(2 * positives >= size)),
        };
        groups.push(Group::new(format!("g{g:05}"), score, members));
    }
    Ok(Dataset::validate(instances, groups, Coverage::Strict)?.dataset)
}

type OracleGroups = Vec<(Vec<usize>, f64)>;

fn oracle_inputs<T: Scalar>(dataset: &Dataset<T>) -> Result<(Vec<Vec<f64>>, OracleGroups)> {
    let n = dataset.instances().len();
    if n > ORACLE_MAX_INSTANCES {
        return Err(Error::OracleTooLarge(n));
    }
    let xs = dataset
        .instances()
        .iter()
        .map(|i| i.features().iter().map(|v| v.as_f64()).collect())
        .collect();
    let groups = (0..dataset.groups().len())
        .map(|g| (dataset.members(g).to_vec(), dataset.groups()[g].score))
        .collect();
    Ok((xs, groups))
}

#[allow(clippy::needless_range_loop)]
fn oracle_value(
    params: &[f64],
    bias: bool,
    xs: &[Vec<f64>],
    groups: &[(Vec<usize>, f64)],
    gamma: f64,
    lambda: f64,
) -> f64 {
    let d = xs[0].len();
    let mut y = Vec::with_capacity(xs.len());
    for x in xs {
        let mut z = if bias { params[d] } else { 0.0 };
        for k in 0..d {
            z += params[k] * x[k];
        }
        y.push(1.0 / (1.0 + (-z).exp()));
    }
    let mut pairs = 0.0;
    for i in 0..xs.len() {
        for j in 0..xs.len() {
            let mut dist2 = 0.0;
            for k in 0..d {
                dist2 += (xs[i][k] - xs[j][k]).powi(2);
            }
            pairs += (-gamma * dist2).exp() * (y[i] - y[j]).powi(2);
        }
    }
    let mut fidelity = 0.0;
    for (members, score) in groups {
        let mut total = 0.0;
        for &m in members {
            total += y[m];
        }
        fidelity += (total / members.len() as f64 - score).powi(2);
    }
    pairs + lambda * fidelity
}

/// Direct double-loop evaluation of the objective over every ordered pair
/// of dataset instances and every group. At most
/// [`ORACLE_MAX_INSTANCES`] instances.
pub fn oracle_objective<T: Scalar>(
    theta: &Theta<T>,
    dataset: &Dataset<T>,
    gamma: f64,
    lambda: f64,
) -> Result<f64> {
    let (xs, groups) = oracle_inputs(dataset)?;
    let params: Vec<f64> = theta.to_flat().into_iter().map(Scalar::as_f64).collect();
    Ok(oracle_value(
        &params,
        theta.bias.is_some(),
        &xs,
        &groups,
        gamma,
        lambda,
    ))
}

/// Central finite differences of [`oracle_objective`], laid out like
/// [`Theta::to_flat`].
pub fn oracle_gradient<T: Scalar>(
    theta: &Theta<T>,
    dataset: &Dataset<T>,
    gamma: f64,
    lambda: f64,
    step: f64,
) -> Result<Vec<f64>> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidConfig(
            "finite-difference step must be positive".into(),
        ));
    }
    let (xs, groups) = oracle_inputs(dataset)?;
    let bias = theta.bias.is_some();
    let mut params: Vec<f64> = theta.to_flat().into_iter().map(Scalar::as_f64).collect();
    let mut out = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let orig = params[k];
        params[k] = orig + step;
        let up = oracle_value(&params, bias, &xs, &groups, gamma, lambda);
        params[k] = orig - step;
        let down = oracle_value(&params, bias, &xs, &groups, gamma, lambda);
        params[k] = orig;
        out.push((up - down) / (2.0 * step));
    }
    Ok(out)
}

/// A small random problem for oracle comparisons.
#[derive(Debug, Clone)]
pub struct CheckProblem {
    pub dataset: Dataset<f64>,
    pub theta: Theta<f64>,
    pub gamma: f64,
    pub lambda: f64,
}

impl CheckProblem {
    /// Batch over every group with a dense graph: the objective module's
    /// view of the same problem.
    pub fn batch(&self) -> Result<Batch<f64>> {
        let all: Vec<usize> = (0..self.dataset.groups().len()).collect();
        Batch::dense(&self.dataset, &all, self.gamma, self.lambda)
    }
}

/// Random problem with `d <= max_dim`, `2 <= |I| <= max_instances`,
/// `|G| <= max_groups`, every instance covered, random theta (bias on a coin
/// flip), gamma in [0.2, 2] and lambda from a random alpha in [0, 1].
pub fn random_problem<R: Rng + ?Sized>(
    rng: &mut R,
    max_dim: usize,
    max_instances: usize,
    max_groups: usize,
) -> Result<CheckProblem> {
    let d = rng.random_range(1..=max_dim.max(1));
    let n = rng.random_range(2..=max_instances.max(2));
    let g = rng.random_range(1..=max_groups.max(1).min(n));
    let instances: Vec<Instance<f64>> = (0..n)
        .map(|i| {
            Instance::new(
                format!("i{i:03}"),
                (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    let mut members: Vec<Vec<String>> = vec![Vec::new(); g];
    for (i, inst) in instances.iter().enumerate() {
        let target = if i < g { i } else { rng.random_range(0..g) };
        members[target].push(inst.id().to_string());
    }
    for m in members.iter_mut() {
        for _ in 0..rng.random_range(0..3) {
            m.push(format!("i{:03}", rng.random_range(0..n)));
        }
    }
    let groups = members
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            let score = if rng.random_bool(0.3) {
                f64::from(u8::from(rng.random_bool(0.5)))
            } else {
                rng.random_range(0.0..=1.0)
            };
            Group::new(format!("g{k}"), score, m)
        })
        .collect();
    let dataset = Dataset::validate(instances, groups, Coverage::Strict)?.dataset;
    let bias = rng.random_bool(0.5);
    let theta = Theta {
        weights: (0..d).map(|_| rng.random_range(-1.5..1.5)).collect(),
        bias: bias.then(|| rng.random_range(-1.0..1.0)),
    };
    let gamma = rng.random_range(0.2..=2.0);
    let alpha: f64 = rng.random_range(0.0..=1.0);
    let lambda = lambda_from_alpha(alpha, n, g);
    Ok(CheckProblem {
        dataset,
        theta,
        gamma,
        lambda,
    })
}

/// Outcome of comparing analytic gradients with finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub trials: usize,
    /// Worst `|analytic - numeric| / max(1, |numeric|)` over all components.
    pub max_relative_error: f64,
}

pub fn gradient_check(seed: u64, trials: usize, step: f64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let p = random_problem(&mut rng, 8, 12, 4)?;
        let analytic = gradient(&p.theta, &p.batch()?);
        let numeric = oracle_gradient(&p.theta, &p.dataset, p.gamma, p.lambda, step)?;
        for (a, f) in analytic.iter().zip(&numeric) {
            worst = worst.max((a - f).abs() / f.abs().max(1.0));
        }
    }
    Ok(GradCheck {
        trials,
        max_relative_error: worst,
    })
}
