//! Random forest of CART trees on the encoded feature layout. Split search is
//! histogram-based: each encoded dimension is bucketed into at most 64
//! quantile bins once per training run, so finding a split is a counting pass
//! instead of a sort. Probability is the mean of leaf class-1 fractions.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::derive_stream;
use crate::tabular::{encode, encode_into, encoded_len, Dataset, Instance, Schema};

use super::{ModelError, Scorer};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Node {
    Split {
        dim: u32,
        /// Encoded-space threshold; `value <= threshold` goes left.
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        p: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, enc: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { p } => return *p,
                Node::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => {
                    at = if enc[*dim as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestModel {
    pub(crate) schema: Arc<Schema>,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Probability from a pre-encoded vector; the hot path for engines that
    /// score many candidates.
    pub fn predict_encoded(&self, enc: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(enc)).sum();
        sum / self.trees.len() as f64
    }
}

impl Scorer for ForestModel {
    fn predict_proba(&self, x: &Instance) -> f64 {
        self.predict_encoded(&encode(x, &self.schema))
    }
}

const MAX_BINS: usize = 64;
const FOREST_TAG: u64 = 0x666f72657374;

/// Per-dimension quantile bin edges. `bin(v) = #edges < v`; the split
/// "bin <= b" is exactly "v <= edges[b]".
struct Binning {
    edges: Vec<Vec<f64>>,
}

impl Binning {
    fn fit(columns: &[Vec<f64>]) -> Binning {
        let edges = columns
            .iter()
            .map(|col| {
                let mut sorted = col.clone();
                sorted.sort_by(f64::total_cmp);
                let mut e: Vec<f64> = (1..MAX_BINS)
                    .map(|j| sorted[(j * (sorted.len() - 1)) / (MAX_BINS - 1)])
                    .collect();
                e.dedup();
                // The top quantile equals the maximum; everything above the
                // last edge lands in the overflow bin.
                e
            })
            .collect();
        Binning { edges }
    }

    fn bin(&self, dim: usize, v: f64) -> u8 {
        self.edges[dim].partition_point(|&e| e < v) as u8
    }
}

struct TreeBuilder<'a> {
    binned: &'a [Vec<u8>],
    labels: &'a [bool],
    edges: &'a [Vec<f64>],
    max_depth: usize,
    min_leaf: usize,
    n_try: usize,
    nodes: Vec<Node>,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

impl<'a> TreeBuilder<'a> {
    /// Returns the node id for the subtree over `rows`.
    fn build(&mut self, rows: &[u32], depth: usize, rng: &mut ChaCha8Rng) -> u32 {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.labels[r as usize]).count();
        let leaf_p = pos as f64 / n as f64;
        let make_leaf = depth >= self.max_depth || pos == 0 || pos == n || n < 2 * self.min_leaf;
        if !make_leaf {
            if let Some((dim, boundary)) = self.best_split(rows, rng) {
                let threshold = self.edges[dim][boundary];
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
                    .iter()
                    .partition(|&&r| self.binned[dim][r as usize] as usize <= boundary);
                let id = self.nodes.len() as u32;
                self.nodes.push(Node::Leaf { p: leaf_p }); // placeholder
                let left = self.build(&left_rows, depth + 1, rng);
                let right = self.build(&right_rows, depth + 1, rng);
                self.nodes[id as usize] = Node::Split {
                    dim: dim as u32,
                    threshold,
                    left,
                    right,
                };
                return id;
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf { p: leaf_p });
        id
    }

    /// Best (dimension, bin boundary) by Gini impurity over a random subset of
    /// dimensions. Ties break toward the lower dimension, then lower boundary.
    fn best_split(&self, rows: &[u32], rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
        let dims = self.binned.len();
        let mut candidates: Vec<usize> = (0..dims).collect();
        // Partial Fisher-Yates: the first n_try entries are the sample.
        for i in 0..self.n_try.min(dims) {
            let j = rng.gen_range(i..dims);
            candidates.swap(i, j);
        }
        candidates.truncate(self.n_try.min(dims));
        candidates.sort_unstable();

        let n = rows.len() as f64;
        let pos_total = rows.iter().filter(|&&r| self.labels[r as usize]).count() as f64;
        let parent = gini(pos_total, n);

        let mut best: Option<(f64, usize, usize)> = None;
        let mut count = [0u32; MAX_BINS + 1];
        let mut pos = [0u32; MAX_BINS + 1];
        for &dim in &candidates {
            let n_bins = self.edges[dim].len() + 1;
            if n_bins < 2 {
                continue;
            }
            count[..n_bins].iter_mut().for_each(|c| *c = 0);
            pos[..n_bins].iter_mut().for_each(|c| *c = 0);
            let col = &self.binned[dim];
            for &r in rows {
                let b = col[r as usize] as usize;
                count[b] += 1;
                pos[b] += self.labels[r as usize] as u32;
            }
            let mut nl = 0.0;
            let mut pl = 0.0;
            for boundary in 0..n_bins - 1 {
                nl += count[boundary] as f64;
                pl += pos[boundary] as f64;
                let nr = n - nl;
                if (nl as usize) < self.min_leaf || (nr as usize) < self.min_leaf {
                    continue;
                }
                let score = (nl * gini(pl, nl) + nr * gini(pos_total - pl, nr)) / n;
                if score + 1e-12 < best.map_or(parent, |(s, _, _)| s) {
                    best = Some((score, dim, boundary));
                }
            }
        }
        best.map(|(_, dim, boundary)| (dim, boundary))
    }
}

/// Trains a forest. Bootstrap sampling indexes the canonical row order (rows
/// sorted by their ingestion index), so the model is invariant to row
/// permutations of the training partition.
pub fn train_forest(train: &Dataset, hyper: &ForestHyper) -> Result<ForestModel, ModelError> {
    if train.is_empty() {
        return Err(ModelError::EmptyTrain);
    }
    let schema = Arc::clone(&train.schema);
    let dims = encoded_len(&schema);
    let n = train.len();

    let mut canonical: Vec<usize> = (0..n).collect();
    canonical.sort_by_key(|&i| (train.rows[i].index.unwrap_or(usize::MAX), i));

    // Column-major encoded matrix in canonical order.
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(n); dims];
    let mut labels: Vec<bool> = Vec::with_capacity(n);
    let mut buf = Vec::with_capacity(dims);
    for &i in &canonical {
        encode_into(&train.rows[i], &schema, &mut buf);
        for (d, &v) in buf.iter().enumerate() {
            columns[d].push(v);
        }
        labels.push(train.labels[i]);
    }

    let binning = Binning::fit(&columns);
    let binned: Vec<Vec<u8>> = columns
        .iter()
        .enumerate()
        .map(|(d, col)| col.iter().map(|&v| binning.bin(d, v)).collect())
        .collect();

    let n_try = (dims as f64).sqrt().ceil() as usize;
    let mut trees = Vec::with_capacity(hyper.n_trees);
    for t in 0..hyper.n_trees {
        let mut rng = derive_stream(hyper.seed, &[FOREST_TAG, t as u64]);
        let sample: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n) as u32).collect();
        let mut builder = TreeBuilder {
            binned: &binned,
            labels: &labels,
            edges: &binning.edges,
            max_depth: hyper.max_depth,
            min_leaf: hyper.min_leaf,
            n_try,
            nodes: Vec::new(),
        };
        let root = builder.build(&sample, 0, &mut rng);
        debug_assert_eq!(root, 0);
        trees.push(Tree {
            nodes: builder.nodes,
        });
    }
    Ok(ForestModel { schema, trees })
}
