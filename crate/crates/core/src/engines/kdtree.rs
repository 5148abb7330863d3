//! A kd-tree over dense f64 points, used to accelerate nearest-candidate
//! scans. Distances tie-break on the lowest point index, and subtrees are
//! pruned only when strictly worse than the current frontier, so accelerated
//! queries agree exactly with a linear scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
}

impl Metric {
    /// Monotone stand-in for the true distance: sum of absolute deviations
    /// for l1, sum of squares for l2.
    fn reduced(self, a: &[f64], b: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (x, y) in a.iter().zip(b) {
            let d = x - y;
            acc += match self {
                Metric::L1 => d.abs(),
                Metric::L2 => d * d,
            };
        }
        acc
    }

    fn reduced_axis(self, d: f64) -> f64 {
        match self {
            Metric::L1 => d.abs(),
            Metric::L2 => d * d,
        }
    }

    fn actual(self, reduced: f64) -> f64 {
        match self {
            Metric::L1 => reduced,
            Metric::L2 => reduced.sqrt(),
        }
    }
}

struct Node {
    point: u32,
    dim: u32,
    left: i32,
    right: i32,
}

/// Frontier entry ordered by (reduced distance, point index); the heap keeps
/// the worst entry on top.
struct Item {
    reduced: f64,
    index: u32,
}

impl PartialEq for Item {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        self.reduced
            .total_cmp(&other.reduced)
            .then(self.index.cmp(&other.index))
    }
}

pub struct KdTree {
    points: Vec<Vec<f64>>,
    nodes: Vec<Node>,
    root: i32,
    metric: Metric,
}

impl KdTree {
    /// Builds a tree over `points`. Every point must share the same nonzero
    /// dimension and contain only finite coordinates.
    pub fn build(points: Vec<Vec<f64>>, metric: Metric) -> Self {
        assert!(!points.is_empty(), "kd-tree needs at least one point");
        let dims = points[0].len();
        assert!(dims > 0, "kd-tree points need at least one coordinate");
        for p in &points {
            assert_eq!(p.len(), dims, "kd-tree points must share a dimension");
            assert!(p.iter().all(|v| v.is_finite()), "kd-tree coordinates must be finite");
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = build_rec(&points, &mut order, &mut nodes);
        KdTree {
            points,
            nodes,
            root,
            metric,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    /// The nearest point to `query` as (index, distance); ties resolve to the
    /// lowest index.
    pub fn nearest(&self, query: &[f64]) -> (usize, f64) {
        self.knn(query, 1)[0]
    }

    /// The `k` nearest points, sorted by (distance, index). Returns all
    /// points when `k` exceeds the tree size.
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<(usize, f64)> {
        assert_eq!(query.len(), self.points[0].len(), "query dimension mismatch");
        let k = k.min(self.points.len()).max(1);
        let mut heap: BinaryHeap<Item> = BinaryHeap::with_capacity(k + 1);
        self.search(self.root, query, k, &mut heap);
        heap.into_sorted_vec()
            .into_iter()
            .map(|item| (item.index as usize, self.metric.actual(item.reduced)))
            .collect()
    }

    fn search(&self, node: i32, query: &[f64], k: usize, heap: &mut BinaryHeap<Item>) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        heap.push(Item {
            reduced: self.metric.reduced(query, p),
            index: n.point,
        });
        if heap.len() > k {
            heap.pop();
        }
        let delta = query[n.dim as usize] - p[n.dim as usize];
        let (near, far) = if delta < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.search(near, query, k, heap);
        // Visit the far side unless every point there is strictly worse than
        // the current frontier; equality must recurse so index ties can still
        // displace the worst entry.
        let bound = self.metric.reduced_axis(delta);
        let must_visit = heap.len() < k || bound <= heap.peek().map_or(f64::INFINITY, |w| w.reduced);
        if must_visit {
            self.search(far, query, k, heap);
        }
    }
}

fn build_rec(points: &[Vec<f64>], order: &mut [u32], nodes: &mut Vec<Node>) -> i32 {
    if order.is_empty() {
        return -1;
    }
    // Split on the widest-spread coordinate for balance.
    let dims = points[0].len();
    let mut dim = 0;
    let mut widest = f64::NEG_INFINITY;
    for d in 0..dims {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in order.iter() {
            let v = points[i as usize][d];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > widest {
            widest = hi - lo;
            dim = d;
        }
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][dim]
            .total_cmp(&points[b as usize][dim])
            .then(a.cmp(&b))
    });
    let point = order[mid];
    let slot = nodes.len();
    nodes.push(Node {
        point,
        dim: dim as u32,
        left: -1,
        right: -1,
    });
    let (lo, rest) = order.split_at_mut(mid);
    let hi = &mut rest[1..];
    let left = build_rec(points, lo, nodes);
    let right = build_rec(points, hi, nodes);
    nodes[slot].left = left;
    nodes[slot].right = right;
    slot as i32
}
