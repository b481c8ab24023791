//! Mini-batch SGD over the joint objective.
//!
//! Each epoch shuffles the groups with a seeded ChaCha8 stream and cuts them
//! into consecutive chunks of `batch_groups` (the last chunk may be short).
//! Every chunk becomes a [`Batch`] with its own similarity graph and lambda,
//! and receives `inner_iters` plain gradient steps. Training stops as soon as
//! `max_total_iters` steps have been taken.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::objective::{
    lambda_from_alpha, objective, objective_and_gradient, predict_score, Batch, Theta,
};
use crate::scalar::Scalar;
use crate::similarity::{build_graph, Scope, SimilarityConfig, SimilarityGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LambdaScope {
    /// lambda from the batch's own instance and group counts.
    #[default]
    Batch,
    /// lambda from the whole dataset's counts.
    Global,
}

/// Where each batch's similarity graph comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase", tag = "mode")]
pub enum GraphMode {
    /// Dense RBF graph over the batch's instances.
    #[default]
    Batch,
    /// Global kNN graph, restricted to each batch.
    Knn { k: usize },
    /// No edges: the manifold term is switched off.
    Edgeless,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub alpha_tradeoff: f64,
    pub learning_rate: f64,
    pub batch_groups: usize,
    pub inner_iters: usize,
    pub epochs: usize,
    pub max_total_iters: Option<usize>,
    pub gamma: f64,
    pub use_bias: bool,
    pub lambda_scope: LambdaScope,
    pub graph: GraphMode,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha_tradeoff: 0.04,
            learning_rate: 1e-4,
            batch_groups: 50,
            inner_iters: 7,
            epochs: 3,
            max_total_iters: Some(1050),
            gamma: 1.0,
            use_bias: false,
            lambda_scope: LambdaScope::Batch,
            graph: GraphMode::Batch,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.alpha_tradeoff >= 0.0 && self.alpha_tradeoff.is_finite()) {
            return bad(format!(
                "alpha must be finite and non-negative, got {}",
                self.alpha_tradeoff
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.batch_groups == 0
            || self.inner_iters == 0
            || self.epochs == 0
            || self.max_total_iters == Some(0)
        {
            return bad(
                "batch size, inner iterations, epochs and the iteration cap must be positive"
                    .into(),
            );
        }
        if self.graph == (GraphMode::Knn { k: 0 }) {
            return bad("knn must be at least 1".into());
        }
        Ok(())
    }

    /// Number of SGD steps a dataset with `n_groups` groups will receive.
    pub fn total_iterations(&self, n_groups: usize) -> usize {
        let scheduled = self.epochs * n_groups.div_ceil(self.batch_groups) * self.inner_iters;
        self.max_total_iters
            .map_or(scheduled, |cap| scheduled.min(cap))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    /// Objective of the last batch after its last step.
    pub final_objective: f64,
    pub iterations: usize,
    /// Instances that no group references; they never enter a batch.
    #[serde(default)]
    pub uncovered_instances: usize,
    /// Not persisted, so model files stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub theta: Theta<T>,
    pub dim: usize,
    pub hyperparams: Hyperparams,
    pub summary: TrainSummary,
}

impl<T: Scalar> Model<T> {
    pub fn score(&self, x: &[T]) -> Result<T> {
        predict_score(&self.theta, x)
    }
}

/// What happened to one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRecord {
    pub epoch: usize,
    pub batch: usize,
    pub groups: Vec<usize>,
    pub n_instances: usize,
    pub n_groups: usize,
    pub lambda: f64,
    pub steps: usize,
    pub objective_before: f64,
    pub objective_after: f64,
}

/// One epoch's mini-batches: a seeded shuffle of `0..n_groups` cut into
/// chunks of `batch_groups`, keeping the short tail.
pub fn epoch_batches<R: Rng + ?Sized>(
    n_groups: usize,
    batch_groups: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n_groups).collect();
    order.shuffle(rng);
    order
        .chunks(batch_groups.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

pub fn train<T: Scalar>(dataset: &Dataset<T>, hp: &Hyperparams) -> Result<Model<T>> {
    train_observed(dataset, hp, None, |_| {})
}

/// [`train`] with an optional precomputed global graph (used by
/// [`GraphMode::Knn`]) and a callback invoked after every mini-batch.
pub fn train_observed<T: Scalar>(
    dataset: &Dataset<T>,
    hp: &Hyperparams,
    global_graph: Option<&SimilarityGraph<T>>,
    mut observer: impl FnMut(&BatchRecord),
) -> Result<Model<T>> {
    hp.check()?;
    let started = Instant::now();
    let n_instances = dataset.instances().len();
    let n_groups = dataset.groups().len();
    if n_instances == 0 || n_groups == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut covered = vec![false; n_instances];
    for g in 0..n_groups {
        for &i in dataset.members(g) {
            covered[i] = true;
        }
    }
    let uncovered_instances = covered.iter().filter(|c| !**c).count();

    let built;
    let global = match (hp.graph, global_graph) {
        (GraphMode::Knn { .. }, Some(g)) => Some(g),
        (GraphMode::Knn { k }, None) => {
            let cfg = SimilarityConfig {
                gamma: hp.gamma,
                knn: Some(k),
            };
            built = build_graph(dataset, &cfg, Scope::Full)?;
            Some(&built)
        }
        _ => None,
    };

    let alpha = T::of(hp.alpha_tradeoff);
    let rate = T::of(hp.learning_rate);
    let global_lambda = lambda_from_alpha(alpha, n_instances, n_groups);
    let budget = hp.total_iterations(n_groups);
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut theta = Theta::zeros(dataset.dim(), hp.use_bias);
    let mut iterations = 0usize;
    let mut final_objective = T::zero();

    'epochs: for epoch in 0..hp.epochs {
        for (b, groups) in epoch_batches(n_groups, hp.batch_groups, &mut rng)
            .into_iter()
            .enumerate()
        {
            if iterations >= budget {
                break 'epochs;
            }
            let nodes = Batch::scope(dataset, &groups);
            let lambda = match hp.lambda_scope {
                LambdaScope::Batch => lambda_from_alpha(alpha, nodes.len(), groups.len()),
                LambdaScope::Global => global_lambda,
            };
            let graph = match (hp.graph, global) {
                (GraphMode::Edgeless, _) => SimilarityGraph::edgeless(nodes),
                (_, Some(g)) => g.restrict(&nodes),
                _ => {
                    let cfg = SimilarityConfig {
                        gamma: hp.gamma,
                        knn: None,
                    };
                    build_graph(dataset, &cfg, Scope::Instances(&nodes))?
                }
            };
            let batch = Batch::new(dataset, &groups, graph, lambda)?;
            let non_finite = |what, iteration| Error::NonFinite {
                what,
                iteration,
                epoch,
                batch: b,
            };

            let mut before = None;
            let mut steps = 0;
            while steps < hp.inner_iters && iterations < budget {
                let (value, grad) = objective_and_gradient(&theta, &batch);
                if !value.is_finite() {
                    return Err(non_finite("objective", iterations));
                }
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(non_finite("gradient", iterations));
                }
                before.get_or_insert(value);
                theta.descend(&grad, rate);
                if !theta.is_finite() {
                    return Err(non_finite("parameter", iterations));
                }
                steps += 1;
                iterations += 1;
            }
            final_objective = objective(&theta, &batch);
            if !final_objective.is_finite() {
                return Err(non_finite("objective", iterations));
            }
            observer(&BatchRecord {
                epoch,
                batch: b,
                n_instances: batch.num_instances(),
                n_groups: batch.num_groups(),
                groups,
                lambda: lambda.as_f64(),
                steps,
                objective_before: before.unwrap_or(final_objective).as_f64(),
                objective_after: final_objective.as_f64(),
            });
        }
    }

    Ok(Model {
        theta,
        dim: dataset.dim(),
        hyperparams: hp.clone(),
        summary: TrainSummary {
            final_objective: final_objective.as_f64(),
            iterations,
            uncovered_instances,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    dim: usize,
    bias: bool,
    theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias_value: Option<f64>,
    hyperparams: Hyperparams,
    summary: TrainSummary,
}

/// Serializes a model as JSON. Floats use the shortest representation that
/// parses back to the same bits.
pub fn write_model<T: Scalar, W: Write>(model: &Model<T>, out: W) -> Result<()> {
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        dim: model.dim,
        bias: model.theta.bias.is_some(),
        theta: model.theta.weights.iter().map(|w| w.as_f64()).collect(),
        bias_value: model.theta.bias.map(Scalar::as_f64),
        hyperparams: model.hyperparams.clone(),
        summary: model.summary.clone(),
    };
    serde_json::to_writer_pretty(out, &file)?;
    Ok(())
}

pub fn read_model<T: Scalar, R: std::io::Read>(input: R) -> Result<Model<T>> {
    let value: serde_json::Value = serde_json::from_reader(input)?;
    let version = value.get("version").and_then(serde_json::Value::as_u64);
    match version {
        Some(v) if v == u64::from(MODEL_FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::UnsupportedVersion(
                u32::try_from(v).unwrap_or(u32::MAX),
            ))
        }
        None => return Err(Error::CorruptModel("missing version".into())),
    }
    let file: ModelFile = serde_json::from_value(value)?;
    if file.theta.len() != file.dim || file.dim == 0 {
        return Err(Error::CorruptModel(format!(
            "dim is {} but theta has {} entries",
            file.dim,
            file.theta.len()
        )));
    }
    if file.bias != file.bias_value.is_some() {
        return Err(Error::CorruptModel(
            "bias flag and bias_value disagree".into(),
        ));
    }
    let theta = Theta {
        weights: file.theta.iter().map(|&v| T::of(v)).collect(),
        bias: file.bias_value.map(T::of),
    };
    if !theta.is_finite() {
        return Err(Error::CorruptModel("non-finite parameter".into()));
    }
    Ok(Model {
        theta,
        dim: file.dim,
        hyperparams: file.hyperparams,
        summary: file.summary,
    })
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(model, &mut w)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: impl AsRef<Path>) -> Result<Model<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_model(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Coverage, Group, Instance};

    fn toy(scores: &[f64]) -> Dataset<f64> {
        let mut insts = Vec::new();
        let mut groups = Vec::new();
        for (g, &s) in scores.iter().enumerate() {
            let ids: Vec<String> = (0..3).map(|k| format!("g{g}i{k}")).collect();
            for (k, id) in ids.iter().enumerate() {
                insts.push(Instance::new(
                    id.clone(),
                    vec![g as f64 * 0.3 - 1.0, k as f64 * 0.5],
                ));
            }
            groups.push(Group::new(format!("g{g}"), s, ids));
        }
        Dataset::validate(insts, groups, Coverage::Strict)
            .unwrap()
            .dataset
    }

    #[test]
    fn partition_semantics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batches = epoch_batches(100, 50, &mut rng);
        assert_eq!(batches.len(), 2);
        let mut all: Vec<usize> = batches.concat();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());

        let batches = epoch_batches(10, 50, &mut rng);
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].len(), 10);

        let batches = epoch_batches(7, 3, &mut rng);
        assert_eq!(batches.iter().map(Vec::len).collect::<Vec<_>>(), [3, 3, 1]);

        let a = epoch_batches(30, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let b = epoch_batches(30, 4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn half_scores_are_stationary() {
        let d = toy(&[0.5, 0.5, 0.5, 0.5]);
        let m = train(
            &d,
            &Hyperparams {
                use_bias: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.theta.weights.iter().all(|&w| w == 0.0));
        assert_eq!(m.theta.bias, Some(0.0));
    }

    #[test]
    fn iteration_accounting() {
        let d = toy(&[1.0, 0.0, 1.0, 0.0, 1.0]);
        let hp = Hyperparams {
            batch_groups: 2,
            inner_iters: 3,
            epochs: 4,
            max_total_iters: None,
            ..Default::default()
        };
        assert_eq!(train(&d, &hp).unwrap().summary.iterations, 4 * 3 * 3);
        let capped = Hyperparams {
            max_total_iters: Some(10),
            ..hp.clone()
        };
        let mut steps = 0;
        let m = train_observed(&d, &capped, None, |r| steps += r.steps).unwrap();
        assert_eq!(m.summary.iterations, 10);
        assert_eq!(steps, 10);
        assert_eq!(capped.total_iterations(5), 10);
    }

    #[test]
    fn deterministic_under_seed() {
        let d = toy(&[1.0, 0.0, 0.7, 0.2, 0.9, 0.1]);
        let hp = Hyperparams {
            batch_groups: 2,
            learning_rate: 0.05,
            seed: 42,
            ..Default::default()
        };
        let a = train(&d, &hp).unwrap();
        let b = train(&d, &hp).unwrap();
        assert_eq!(a.theta, b.theta);
        let c = train(&d, &Hyperparams { seed: 43, ..hp }).unwrap();
        assert_ne!(a.theta, c.theta);
    }

    #[test]
    fn graph_modes_run() {
        let d = toy(&[1.0, 0.0, 0.7, 0.2]);
        for graph in [
            GraphMode::Batch,
            GraphMode::Knn { k: 2 },
            GraphMode::Edgeless,
        ] {
            let m = train(
                &d,
                &Hyperparams {
                    graph,
                    learning_rate: 0.01,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(m.theta.is_finite());
        }
        let bad = Hyperparams {
            graph: GraphMode::Knn { k: 50 },
            ..Default::default()
        };
        assert!(matches!(train(&d, &bad), Err(Error::KnnTooLarge { .. })));
    }

    #[test]
    fn global_lambda_scope() {
        let d = toy(&[1.0, 0.0, 0.7, 0.2, 0.4]);
        let hp = Hyperparams {
            batch_groups: 2,
            lambda_scope: LambdaScope::Global,
            ..Default::default()
        };
        let mut lambdas = Vec::new();
        train_observed(&d, &hp, None, |r| lambdas.push(r.lambda)).unwrap();
        let expected = lambda_from_alpha(0.04, 15, 5);
        assert!(lambdas.iter().all(|&l| l == expected));
    }

    #[test]
    fn rejects_bad_hyperparams() {
        let d = toy(&[1.0]);
        for hp in [
            Hyperparams {
                learning_rate: 0.0,
                ..Default::default()
            },
            Hyperparams {
                gamma: -1.0,
                ..Default::default()
            },
            Hyperparams {
                epochs: 0,
                ..Default::default()
            },
            Hyperparams {
                alpha_tradeoff: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(matches!(train(&d, &hp), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn divergence_is_reported() {
        let d = toy(&[1.0, 0.0]);
        let hp = Hyperparams {
            learning_rate: 1e308,
            alpha_tradeoff: 1e300,
            ..Default::default()
        };
        let err = train(&d, &hp).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }

    #[test]
    fn model_round_trip() {
        let d = toy(&[1.0, 0.0, 0.6]);
        let m = train(
            &d,
            &Hyperparams {
                use_bias: true,
                learning_rate: 0.03,
                seed: 5,
                ..Default::default()
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back: Model<f64> = read_model(buf.as_slice()).unwrap();
        assert_eq!(back.theta, m.theta);
        assert_eq!(back.dim, m.dim);
        assert_eq!(back.hyperparams, m.hyperparams);
        assert_eq!(back.summary.iterations, m.summary.iterations);
        assert_eq!(
            back.summary.final_objective.to_bits(),
            m.summary.final_objective.to_bits()
        );
    }

    #[test]
    fn model_load_errors() {
        let d = toy(&[1.0, 0.0]);
        let m = train(&d, &Hyperparams::default()).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&buf).unwrap();

        let mut wrong_dim = v.clone();
        wrong_dim["dim"] = 3.into();
        let err = read_model::<f64, _>(wrong_dim.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, Error::CorruptModel(_)));

        v["version"] = 2.into();
        let err = read_model::<f64, _>(v.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVersion(2)));
    }
}
