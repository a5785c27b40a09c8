//! Point storage, pairwise distances, and neighborhood-graph construction.
//!
//! The clustering pipeline works on a set of points in R^D (for spike data,
//! events of dimension 4x45 = 180) and an undirected binary graph over them,
//! either a k-nearest-neighbor graph or a Rips graph. Neighbor search is
//! brute force; at the scales this crate targets (n up to ~10^4) that is
//! both fast enough and trivially identical to the test oracles.

use crate::error::{Error, Result};

/// A set of `n` points in `R^dim`, stored row-major.
///
/// Rows are events (points), columns are coordinates. All entries must be
/// finite. `n = 0` is allowed so that empty detection results can be
/// represented; the clustering operations reject empty inputs themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct EventMatrix {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EventMatrix {
    /// Builds a matrix from a flat row-major buffer of length `n * dim`.
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        if data.len() != n * dim {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: n * dim,
            });
        }
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: idx / dim,
                    col: idx % dim,
                });
            }
        }
        Ok(EventMatrix { n, dim, data })
    }

    /// Builds a matrix from one `Vec` per point; all rows must share a length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map_or(1, Vec::len);
        let mut data = Vec::with_capacity(n * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        EventMatrix::new(n, dim, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// One point as a coordinate slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Euclidean distance between two points of equal dimension.
pub fn pairwise_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(squared_distance(a, b).sqrt())
}

/// Squared Euclidean distance; the inner loop of every neighbor search.
#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum()
}

/// An undirected binary graph over point indices.
///
/// Adjacency lists are sorted, contain no self-loops or duplicates, and are
/// symmetric: `j in adj(i)` iff `i in adj(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
}

impl NeighborhoodGraph {
    /// Builds a graph from an edge list, symmetrizing and deduplicating.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for {n} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {a}")));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(NeighborhoodGraph { n, adjacency })
    }

    fn from_neighbor_lists(mut adjacency: Vec<Vec<usize>>) -> Self {
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        NeighborhoodGraph {
            n: adjacency.len(),
            adjacency,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Sorted neighbor indices of vertex `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Number of connected components, by breadth-first traversal.
    pub fn component_count(&self) -> usize {
        let mut seen = vec![false; self.n];
        let mut count = 0;
        let mut queue = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push(start);
            while let Some(v) = queue.pop() {
                for &w in &self.adjacency[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
        }
        count
    }
}

/// For each point, the indices of its `k` nearest neighbors (self excluded),
/// ties broken by lower index. This is the directed selection before the
/// symmetrization performed by [`knn_graph`]; exposed so the selection can
/// be checked on its own.
pub fn knn_neighbor_lists(points: &EventMatrix, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = points.n();
    if n == 0 {
        return Err(Error::EmptyInput("knn_graph needs at least one point"));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut lists = Vec::with_capacity(n);
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scratch.clear();
        let pi = points.row(i);
        for j in 0..n {
            if j != i {
                scratch.push((squared_distance(pi, points.row(j)), j));
            }
        }
        // Ties broken by lower index: (distance, index) sorts exactly that way.
        scratch
            .select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
        let mut chosen: Vec<usize> = scratch[..k].iter().map(|&(_, j)| j).collect();
        chosen.sort_unstable();
        lists.push(chosen);
    }
    Ok(lists)
}

/// k-nearest-neighbor graph, symmetrized by edge union: an edge (i, j) is
/// present when either endpoint selects the other, so degrees can exceed `k`.
pub fn knn_graph(points: &EventMatrix, k: usize) -> Result<NeighborhoodGraph> {
    let lists = knn_neighbor_lists(points, k)?;
    let mut adjacency = vec![Vec::new(); lists.len()];
    for (i, list) in lists.iter().enumerate() {
        for &j in list {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
    }
    Ok(NeighborhoodGraph::from_neighbor_lists(adjacency))
}

/// Rips graph: an edge (i, j) is present iff the distance is strictly less
/// than `radius`.
pub fn rips_graph(points: &EventMatrix, radius: f64) -> Result<NeighborhoodGraph> {
    if points.n() == 0 {
        return Err(Error::EmptyInput("rips_graph needs at least one point"));
    }
    if !(radius > 0.0) {
        return Err(Error::NonPositiveRadius(radius));
    }
    let n = points.n();
    let r2 = radius * radius;
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        let pi = points.row(i);
        for j in (i + 1)..n {
            if squared_distance(pi, points.row(j)) < r2 {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    Ok(NeighborhoodGraph::from_neighbor_lists(adjacency))
}
