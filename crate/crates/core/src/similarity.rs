//! RBF similarity between instances and the graphs built from it.
//!
//! `w(i, j) = exp(-gamma * |x_i - x_j|^2)`, with `gamma = 1` reproducing the
//! unscaled kernel. Graphs store each unordered pair once and never store
//! self-pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub gamma: f64,
    pub knn: Option<usize>,
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            knn: None,
        }
    }
}

impl SimilarityConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.knn == Some(0) {
            return Err(Error::InvalidConfig("knn must be at least 1".into()));
        }
        Ok(())
    }
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// `exp(-gamma * |xi - xj|^2)`.
pub fn similarity<T: Scalar>(xi: &[T], xj: &[T], gamma: T) -> Result<T> {
    if xi.len() != xj.len() {
        return Err(Error::Dimension {
            expected: xi.len(),
            found: xj.len(),
        });
    }
    Ok((-gamma * squared_distance(xi, xj)).exp())
}

/// Stored edge between two local node positions, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T> {
    pub a: usize,
    pub b: usize,
    pub weight: T,
}

/// Which instances a graph covers.
#[derive(Debug, Clone, Copy)]
pub enum Scope<'a> {
    Full,
    Instances(&'a [usize]),
}

/// Symmetric similarity graph over a scope of dataset instances.
///
/// Node `k` of the graph is dataset instance `nodes[k]`. Edges are sorted
/// by `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph<T> {
    nodes: Vec<usize>,
    edges: Vec<Edge<T>>,
}

impl<T: Scalar> SimilarityGraph<T> {
    /// Graph with nodes but no edges; the manifold term vanishes on it.
    pub fn edgeless(nodes: Vec<usize>) -> Self {
        Self {
            nodes,
            edges: Vec::new(),
        }
    }

    /// `edges` must be sorted by `(a, b)` with `a < b` and unique.
    pub(crate) fn from_sorted_edges(nodes: Vec<usize>, edges: Vec<Edge<T>>) -> Self {
        Self { nodes, edges }
    }

    pub fn num_instances(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    /// Weight between local nodes `a` and `b`, in either order.
    pub fn weight(&self, a: usize, b: usize) -> Option<T> {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.edges
            .binary_search_by(|e| (e.a, e.b).cmp(&(a, b)))
            .ok()
            .map(|k| self.edges[k].weight)
    }

    /// Induced subgraph over `nodes` (dataset indices, order defines the new
    /// local positions). Nodes missing from `self` are kept without edges.
    pub fn restrict(&self, nodes: &[usize]) -> Self {
        let mut local = std::collections::HashMap::with_capacity(nodes.len());
        for (k, &n) in nodes.iter().enumerate() {
            local.insert(n, k);
        }
        let mut edges: Vec<Edge<T>> = self
            .edges
            .iter()
            .filter_map(|e| {
                let a = *local.get(&self.nodes[e.a])?;
                let b = *local.get(&self.nodes[e.b])?;
                let (a, b) = if a < b { (a, b) } else { (b, a) };
                Some(Edge {
                    a,
                    b,
                    weight: e.weight,
                })
            })
            .collect();
        edges.sort_by_key(|e| (e.a, e.b));
        Self {
            nodes: nodes.to_vec(),
            edges,
        }
    }

    /// Writes the line-oriented cache: one JSON header line, then
    /// `id_i<TAB>id_j<TAB>weight` per edge. Only full-scope graphs are cached.
    pub fn save_cache(
        &self,
        path: impl AsRef<Path>,
        dataset: &Dataset<T>,
        config: &SimilarityConfig,
    ) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = CacheHeader {
            format: CACHE_FORMAT.into(),
            version: 1,
            gamma: config.gamma,
            knn: config.knn,
            dataset_hash: dataset.content_hash(),
            num_instances: self.nodes.len(),
        };
        let io = |e| Error::io(path, e);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(io)?;
        for e in &self.edges {
            let ia = dataset.instances()[self.nodes[e.a]].id();
            let ib = dataset.instances()[self.nodes[e.b]].id();
            writeln!(w, "{ia}\t{ib}\t{:?}", e.weight.as_f64()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Loads a cache written by [`save_cache`](Self::save_cache), rejecting it
    /// when the dataset content or the kernel configuration changed.
    pub fn load_cache(
        path: impl AsRef<Path>,
        dataset: &Dataset<T>,
        config: &SimilarityConfig,
    ) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let bad = |line: usize, message: String| Error::MalformedLine { line, message };
        let first = lines
            .next()
            .ok_or_else(|| bad(1, "missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let header: CacheHeader =
            serde_json::from_str(&first).map_err(|e| bad(1, e.to_string()))?;
        if header.format != CACHE_FORMAT || header.version != 1 {
            return Err(bad(
                1,
                format!("unsupported cache {} v{}", header.format, header.version),
            ));
        }
        let expected = dataset.content_hash();
        if header.dataset_hash != expected || header.num_instances != dataset.instances().len() {
            return Err(Error::StaleGraphCache {
                expected,
                found: header.dataset_hash,
            });
        }
        if header.gamma != config.gamma || header.knn != config.knn {
            return Err(Error::InvalidConfig(format!(
                "graph cache was built with gamma={} knn={:?}",
                header.gamma, header.knn
            )));
        }
        let mut edges = Vec::new();
        for (n, line) in lines.enumerate() {
            let line_no = n + 2;
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split('\t');
            let (Some(ia), Some(ib), Some(w), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(bad(line_no, "expected three tab-separated fields".into()));
            };
            let resolve = |id: &str| {
                dataset
                    .instance_index(id)
                    .ok_or_else(|| Error::UnknownInstance(id.into()))
            };
            let (a, b) = (resolve(ia)?, resolve(ib)?);
            let weight: f64 = w
                .parse()
                .map_err(|_| bad(line_no, format!("bad weight '{w}'")))?;
            if a == b || !(weight > 0.0 && weight <= 1.0) {
                return Err(bad(line_no, "invalid edge".into()));
            }
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            edges.push(Edge {
                a,
                b,
                weight: T::of(weight),
            });
        }
        edges.sort_by_key(|e| (e.a, e.b));
        Ok(Self {
            nodes: (0..dataset.instances().len()).collect(),
            edges,
        })
    }
}

const CACHE_FORMAT: &str = "bagprop-graph";

#[derive(Serialize, Deserialize)]
struct CacheHeader {
    format: String,
    version: u32,
    gamma: f64,
    knn: Option<usize>,
    dataset_hash: String,
    num_instances: usize,
}

/// Builds a dense graph over `scope`, or a kNN graph symmetrized by union
/// when `config.knn` is set. Neighbour ties are broken by instance id.
pub fn build_graph<T: Scalar>(
    dataset: &Dataset<T>,
    config: &SimilarityConfig,
    scope: Scope<'_>,
) -> Result<SimilarityGraph<T>> {
    config.check()?;
    let nodes: Vec<usize> = match scope {
        Scope::Full => (0..dataset.instances().len()).collect(),
        Scope::Instances(ids) => {
            let mut seen = std::collections::HashSet::new();
            ids.iter().copied().filter(|i| seen.insert(*i)).collect()
        }
    };
    if nodes.is_empty() {
        return Err(Error::InvalidConfig("graph scope is empty".into()));
    }
    let gamma = T::of(config.gamma);
    let feats: Vec<&[T]> = nodes.iter().map(|&i| dataset.features(i)).collect();
    let n = nodes.len();

    let mut edges: Vec<Edge<T>> = match config.knn {
        None => (0..n)
            .into_par_iter()
            .flat_map_iter(|a| {
                let feats = &feats;
                (a + 1..n).filter_map(move |b| {
                    let weight = (-gamma * squared_distance(feats[a], feats[b])).exp();
                    (weight > T::zero()).then_some(Edge { a, b, weight })
                })
            })
            .collect(),
        Some(k) => {
            if k >= n {
                return Err(Error::KnnTooLarge { k, scope: n });
            }
            let ids: Vec<&str> = nodes.iter().map(|&i| dataset.instances()[i].id()).collect();
            let mut pairs: Vec<(usize, usize)> = (0..n)
                .into_par_iter()
                .flat_map_iter(|a| {
                    let mut cand: Vec<(T, usize)> = (0..n)
                        .filter(|&b| b != a)
                        .map(|b| (squared_distance(feats[a], feats[b]), b))
                        .collect();
                    cand.sort_by(|x, y| {
                        x.0.partial_cmp(&y.0)
                            .unwrap_or(std::cmp::Ordering::Equal)
                            .then_with(|| ids[x.1].cmp(ids[y.1]))
                    });
                    cand.truncate(k);
                    cand.into_iter()
                        .map(move |(_, b)| if a < b { (a, b) } else { (b, a) })
                })
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            pairs
                .into_iter()
                .filter_map(|(a, b)| {
                    let weight = (-gamma * squared_distance(feats[a], feats[b])).exp();
                    (weight > T::zero()).then_some(Edge { a, b, weight })
                })
                .collect()
        }
    };
    edges.sort_by_key(|e| (e.a, e.b));
    Ok(SimilarityGraph { nodes, edges })
}
