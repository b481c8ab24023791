//! The joint training objective and its gradient.
//!
//! For a batch with instances `I`, groups `G`, similarity weights `w` and
//! trade-off `lambda`:
//!
//! ```text
//! J(theta) = sum_{i != j} w(i,j) (y_i - y_j)^2
//!          + lambda * sum_g ( mean_{i in g} y_i - s_g )^2
//! ```
//!
//! where `y_i = sigmoid(theta . x_i [+ bias])`. The first sum runs over
//! ordered pairs, so every stored (unordered) edge is counted twice.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::similarity::{build_graph, Edge, Scope, SimilarityConfig, SimilarityGraph};

/// Logistic-regression parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta<T> {
    pub weights: Vec<T>,
    pub bias: Option<T>,
}

impl<T: Scalar> Theta<T> {
    pub fn zeros(dim: usize, with_bias: bool) -> Self {
        Self {
            weights: vec![T::zero(); dim],
            bias: with_bias.then(T::zero),
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    /// Number of free parameters: `dim`, plus one with a bias.
    pub fn len(&self) -> usize {
        self.weights.len() + usize::from(self.bias.is_some())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameters as one vector, bias last.
    pub fn to_flat(&self) -> Vec<T> {
        let mut v = self.weights.clone();
        v.extend(self.bias);
        v
    }

    pub fn from_flat(mut flat: Vec<T>, with_bias: bool) -> Self {
        let bias = if with_bias { flat.pop() } else { None };
        Self {
            weights: flat,
            bias,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.bias.iter())
            .all(|v| v.is_finite())
    }

    /// `theta <- theta - rate * grad`, with `grad` laid out as [`to_flat`](Self::to_flat).
    pub fn descend(&mut self, grad: &[T], rate: T) {
        assert_eq!(grad.len(), self.len(), "gradient length");
        for (w, &g) in self.weights.iter_mut().zip(grad) {
            *w -= rate * g;
        }
        if let Some(b) = self.bias.as_mut() {
            *b -= rate * grad[grad.len() - 1];
        }
    }

    fn logit_unchecked(&self, x: &[T]) -> T {
        let z: T = self.weights.iter().zip(x).map(|(&w, &v)| w * v).sum();
        z + self.bias.unwrap_or_else(T::zero)
    }
}

/// Logistic function, branching on sign so neither branch overflows.
/// Exact 0 or 1 from underflow is nudged back inside (0, 1).
pub fn sigmoid<T: Scalar>(z: T) -> T {
    let y = if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    };
    if y >= T::one() {
        T::one() - T::epsilon()
    } else if y <= T::zero() {
        T::min_positive_value()
    } else {
        y
    }
}

/// `sigmoid(theta . x + bias)`.
pub fn predict_score<T: Scalar>(theta: &Theta<T>, x: &[T]) -> Result<T> {
    if x.len() != theta.dim() {
        return Err(Error::Dimension {
            expected: theta.dim(),
            found: x.len(),
        });
    }
    Ok(sigmoid(theta.logit_unchecked(x)))
}

/// `lambda = alpha * |I|^2 / |G|`: both objective terms are bounded by
/// `|I|^2` and `|G|` respectively, so `alpha` weighs them on equal footing.
pub fn lambda_from_alpha<T: Scalar>(alpha: T, n_instances: usize, n_groups: usize) -> T {
    assert!(n_groups >= 1, "lambda needs at least one group");
    let n = T::from_usize(n_instances).unwrap_or_else(T::infinity);
    alpha * (n * n) / T::from_usize(n_groups).unwrap_or_else(T::infinity)
}

/// Mean of member scores in listed order. Shared by the group term and
/// group scoring so the two agree bit for bit.
pub(crate) fn mean_of<T: Scalar>(scores: impl Iterator<Item = T>) -> T {
    let (sum, count) = scores.fold((T::zero(), 0usize), |(s, n), y| (s + y, n + 1));
    sum / T::from_usize(count).unwrap_or_else(T::one)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchGroup<T> {
    /// Local instance positions, duplicates kept.
    pub members: Vec<usize>,
    pub score: T,
}

/// A set of groups, the union of their instances, the similarity graph over
/// that union and the trade-off weight.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    dim: usize,
    features: Vec<T>,
    groups: Vec<BatchGroup<T>>,
    graph: SimilarityGraph<T>,
    lambda: T,
}

impl<T: Scalar> Batch<T> {
    /// Distinct dataset instances referenced by `groups`, in order of first
    /// appearance.
    pub fn scope(dataset: &Dataset<T>, groups: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; dataset.instances().len()];
        let mut nodes = Vec::new();
        for &g in groups {
            for &i in dataset.members(g) {
                if !std::mem::replace(&mut seen[i], true) {
                    nodes.push(i);
                }
            }
        }
        nodes
    }

    /// Batch over dataset `groups` using `graph`, whose nodes must equal
    /// [`Batch::scope`] for the same groups.
    pub fn new(
        dataset: &Dataset<T>,
        groups: &[usize],
        graph: SimilarityGraph<T>,
        lambda: T,
    ) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::InvalidConfig(
                "batch needs at least one group".into(),
            ));
        }
        if !(lambda >= T::zero() && lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        let nodes = Self::scope(dataset, groups);
        if graph.nodes() != nodes.as_slice() {
            return Err(Error::InvalidConfig(
                "graph scope differs from batch instances".into(),
            ));
        }
        let mut local = vec![usize::MAX; dataset.instances().len()];
        for (k, &i) in nodes.iter().enumerate() {
            local[i] = k;
        }
        let features = nodes
            .iter()
            .flat_map(|&i| dataset.features(i).iter().copied())
            .collect();
        let groups = groups
            .iter()
            .map(|&g| BatchGroup {
                members: dataset.members(g).iter().map(|&i| local[i]).collect(),
                score: T::of(dataset.groups()[g].score),
            })
            .collect();
        Ok(Self {
            dim: dataset.dim(),
            features,
            groups,
            graph,
            lambda,
        })
    }

    /// Batch with a dense RBF graph over its instances.
    pub fn dense(dataset: &Dataset<T>, groups: &[usize], gamma: f64, lambda: T) -> Result<Self> {
        let nodes = Self::scope(dataset, groups);
        let cfg = SimilarityConfig { gamma, knn: None };
        let graph = build_graph(dataset, &cfg, Scope::Instances(&nodes))?;
        Self::new(dataset, groups, graph, lambda)
    }

    /// Batch from raw parts: `features[k]` is local instance `k`, edges use
    /// local positions.
    pub fn from_parts(
        features: Vec<Vec<T>>,
        groups: Vec<BatchGroup<T>>,
        edges: Vec<Edge<T>>,
        lambda: T,
    ) -> Result<Self> {
        let dim = features.first().map_or(0, Vec::len);
        let n = features.len();
        if features.iter().any(|f| f.len() != dim) {
            return Err(Error::InvalidConfig("ragged batch features".into()));
        }
        if groups.is_empty()
            || groups
                .iter()
                .any(|g| g.members.is_empty() || g.members.iter().any(|&m| m >= n))
        {
            return Err(Error::InvalidConfig("invalid batch groups".into()));
        }
        if edges.iter().any(|e| e.a >= n || e.b >= n || e.a == e.b) {
            return Err(Error::InvalidConfig("invalid batch edges".into()));
        }
        let mut edges: Vec<Edge<T>> = edges
            .into_iter()
            .map(|e| {
                if e.a < e.b {
                    e
                } else {
                    Edge {
                        a: e.b,
                        b: e.a,
                        weight: e.weight,
                    }
                }
            })
            .collect();
        edges.sort_by_key(|e| (e.a, e.b));
        edges.dedup_by(|x, y| (x.a, x.b) == (y.a, y.b));
        let graph = SimilarityGraph::from_sorted_edges((0..n).collect(), edges);
        Ok(Self {
            dim,
            features: features.into_iter().flatten().collect(),
            groups,
            graph,
            lambda,
        })
    }

    pub fn num_instances(&self) -> usize {
        self.graph.num_instances()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn graph(&self) -> &SimilarityGraph<T> {
        &self.graph
    }

    pub fn groups(&self) -> &[BatchGroup<T>] {
        &self.groups
    }

    pub fn features(&self, k: usize) -> &[T] {
        &self.features[k * self.dim..(k + 1) * self.dim]
    }

    fn scores(&self, theta: &Theta<T>) -> Vec<T> {
        assert_eq!(theta.dim(), self.dim, "theta dimension");
        (0..self.num_instances())
            .map(|k| sigmoid(theta.logit_unchecked(self.features(k))))
            .collect()
    }
}

fn manifold_from_scores<T: Scalar>(batch: &Batch<T>, y: &[T]) -> T {
    let unordered: T = batch
        .graph
        .edges()
        .iter()
        .map(|e| {
            let d = y[e.a] - y[e.b];
            e.weight * d * d
        })
        .sum();
    T::two() * unordered
}

fn group_from_scores<T: Scalar>(batch: &Batch<T>, y: &[T]) -> T {
    batch
        .groups
        .iter()
        .map(|g| {
            let r = mean_of(g.members.iter().map(|&m| y[m])) - g.score;
            r * r
        })
        .sum()
}

/// Weighted squared disagreement over ordered pairs of connected instances.
pub fn manifold_term<T: Scalar>(theta: &Theta<T>, batch: &Batch<T>) -> T {
    manifold_from_scores(batch, &batch.scores(theta))
}

/// Squared gap between each group's mean prediction and its score.
pub fn group_term<T: Scalar>(theta: &Theta<T>, batch: &Batch<T>) -> T {
    group_from_scores(batch, &batch.scores(theta))
}

pub fn objective<T: Scalar>(theta: &Theta<T>, batch: &Batch<T>) -> T {
    let y = batch.scores(theta);
    manifold_from_scores(batch, &y) + batch.lambda * group_from_scores(batch, &y)
}

/// Objective value and gradient in one pass over the batch.
pub fn objective_and_gradient<T: Scalar>(theta: &Theta<T>, batch: &Batch<T>) -> (T, Vec<T>) {
    let y = batch.scores(theta);
    let slope: Vec<T> = y.iter().map(|&v| v * (T::one() - v)).collect();
    // dJ/dtheta = sum_k coef[k] * x~_k
    let mut coef = vec![T::zero(); y.len()];
    let four = T::two() * T::two();
    for e in batch.graph.edges() {
        let d = four * e.weight * (y[e.a] - y[e.b]);
        coef[e.a] += d * slope[e.a];
        coef[e.b] -= d * slope[e.b];
    }
    let two_lambda = T::two() * batch.lambda;
    for g in &batch.groups {
        let n = T::from_usize(g.members.len()).unwrap_or_else(T::one);
        let r = mean_of(g.members.iter().map(|&m| y[m])) - g.score;
        let c = two_lambda * r / n;
        for &m in &g.members {
            coef[m] += c * slope[m];
        }
    }
    let mut grad = vec![T::zero(); theta.len()];
    for (k, &c) in coef.iter().enumerate() {
        if c == T::zero() {
            continue;
        }
        for (gd, &x) in grad.iter_mut().zip(batch.features(k)) {
            *gd += c * x;
        }
        if theta.bias.is_some() {
            grad[theta.dim()] += c;
        }
    }
    let value = manifold_from_scores(batch, &y) + batch.lambda * group_from_scores(batch, &y);
    (value, grad)
}

/// Analytic gradient of [`objective`], laid out as [`Theta::to_flat`].
pub fn gradient<T: Scalar>(theta: &Theta<T>, batch: &Batch<T>) -> Vec<T> {
    objective_and_gradient(theta, batch).1
}
