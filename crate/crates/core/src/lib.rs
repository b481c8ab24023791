//! Group-to-instance label transfer.
//!
//! Given instances (feature vectors) grouped into scored multisets, trains a
//! logistic instance classifier whose predictions are smooth over an RBF
//! similarity graph and whose per-group means match the observed group
//! scores. The trained model scores the training instances, unseen
//! instances, and arbitrary query vectors.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, with `*32` variants for `f32`.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod inference;
pub mod objective;
pub mod scalar;
pub mod similarity;
pub mod synth;
pub mod trainer;

pub use dataset::{Coverage, DatasetStats, Group, GroupSelector, Issue, ValidationReport};
pub use error::{Error, Result};
pub use inference::{
    Attribution, Confusion, GroupMetrics, InstancePrediction, Label, MetricsReport, NeutralBand,
    NeutralPolicy,
};
pub use scalar::Scalar;
pub use similarity::SimilarityConfig;
pub use synth::{Composition, GroupSize, ScoreMode, SynthConfig};
pub use trainer::{BatchRecord, GraphMode, Hyperparams, LambdaScope, TrainSummary};

pub type Instance = dataset::Instance<f64>;
pub type Dataset = dataset::Dataset<f64>;
pub type Theta = objective::Theta<f64>;
pub type Batch = objective::Batch<f64>;
pub type SimilarityGraph = similarity::SimilarityGraph<f64>;
pub type Model = trainer::Model<f64>;

pub type Instance32 = dataset::Instance<f32>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Theta32 = objective::Theta<f32>;
pub type Batch32 = objective::Batch<f32>;
pub type SimilarityGraph32 = similarity::SimilarityGraph<f32>;
pub type Model32 = trainer::Model<f32>;
