//! Clustering evaluation against ground truth: row-normalized confusion
//! matrices with optimal cluster-to-neuron matching, per-cluster medians,
//! and identified-neuron counting.

use crate::error::{Error, Result};
use crate::geometry::EventMatrix;
use crate::tomato::ClusterLabeling;

/// Row-normalized confusion matrix. Rows are true neurons; columns are
/// clusters reordered so that column `i` is the cluster matched to neuron
/// `i` (zero-padded when there are fewer clusters than neurons). Clusters
/// matched to no neuron appear as extra columns after the diagonal block.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    rows: Vec<Vec<f64>>,
    true_ids: Vec<usize>,
    /// Original cluster id displayed in each column; `None` marks padding.
    col_clusters: Vec<Option<usize>>,
}

impl ConfusionMatrix {
    pub fn n_true(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_clusters.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    /// True neuron ids, one per row.
    pub fn true_ids(&self) -> &[usize] {
        &self.true_ids
    }

    /// Original cluster id per displayed column (`None` for padding).
    pub fn col_clusters(&self) -> &[Option<usize>] {
        &self.col_clusters
    }

    /// The cluster matched to neuron row `i`, if any.
    pub fn matched(&self, i: usize) -> Option<usize> {
        self.col_clusters[i]
    }

    /// Neuron rows that no cluster was matched to.
    pub fn unmatched_neurons(&self) -> Vec<usize> {
        (0..self.n_true()).filter(|&i| self.matched(i).is_none()).collect()
    }

    /// Mean diagonal entry over matched neurons; 0 when nothing matched.
    pub fn diagonal_weight(&self) -> f64 {
        let matched: Vec<usize> = (0..self.n_true()).filter(|&i| self.matched(i).is_some()).collect();
        self.diagonal_weight_over(&matched)
    }

    /// Mean diagonal entry over the given neuron rows; 0 for an empty set.
    pub fn diagonal_weight_over(&self, neurons: &[usize]) -> f64 {
        if neurons.is_empty() {
            return 0.0;
        }
        neurons.iter().map(|&i| self.rows[i][i]).sum::<f64>() / neurons.len() as f64
    }

    /// Matched neurons whose diagonal entry reaches `min_diag`.
    pub fn identified(&self, min_diag: f64) -> Vec<usize> {
        (0..self.n_true())
            .filter(|&i| self.matched(i).is_some() && self.rows[i][i] >= min_diag)
            .collect()
    }
}

/// Optimal assignment (Kuhn-Munkres) minimizing total cost on a square
/// matrix; returns the column picked for each row.
fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned_row = vec![0usize; n + 1]; // per column, 1-based; 0 = free
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        if assigned_row[j] > 0 {
            out[assigned_row[j] - 1] = j - 1;
        }
    }
    out
}

/// Greedy assignment for oversized instances: repeatedly take the largest
/// remaining count.
fn greedy_max(counts: &[Vec<f64>]) -> Vec<usize> {
    let n = counts.len();
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    let mut out = vec![usize::MAX; n];
    for _ in 0..n {
        let mut best = (f64::NEG_INFINITY, usize::MAX, usize::MAX);
        for i in 0..n {
            if row_done[i] {
                continue;
            }
            for j in 0..n {
                if !col_done[j] && counts[i][j] > best.0 {
                    best = (counts[i][j], i, j);
                }
            }
        }
        let (_, i, j) = best;
        out[i] = j;
        row_done[i] = true;
        col_done[j] = true;
    }
    out
}

/// Instances larger than this use the greedy assignment instead of the
/// exact Kuhn-Munkres matching.
pub const EXACT_ASSIGNMENT_LIMIT: usize = 64;

fn sorted_distinct(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Builds the row-normalized confusion matrix of true neuron ids against
/// predicted cluster ids, columns reordered by an assignment maximizing the
/// diagonal count.
pub fn confusion(labels_true: &[usize], labels_pred: &[usize]) -> Result<ConfusionMatrix> {
    if labels_true.is_empty() {
        return Err(Error::EmptyInput("confusion needs at least one event"));
    }
    if labels_true.len() != labels_pred.len() {
        return Err(Error::LengthMismatch {
            left: labels_true.len(),
            right: labels_pred.len(),
        });
    }
    let true_ids = sorted_distinct(labels_true);
    let pred_ids = sorted_distinct(labels_pred);
    let n_true = true_ids.len();
    let n_pred = pred_ids.len();
    let true_index: std::collections::HashMap<usize, usize> =
        true_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let pred_index: std::collections::HashMap<usize, usize> =
        pred_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let mut counts = vec![vec![0.0f64; n_pred]; n_true];
    let mut row_totals = vec![0.0f64; n_true];
    for (&t, &p) in labels_true.iter().zip(labels_pred) {
        counts[true_index[&t]][pred_index[&p]] += 1.0;
        row_totals[true_index[&t]] += 1.0;
    }

    // Canonical column order: sort clusters by their count vectors before
    // matching. Relabeling cluster ids then feeds the assignment an
    // identical matrix, so tied optima resolve identically and the output
    // never depends on the id permutation.
    let mut col_order: Vec<usize> = (0..n_pred).collect();
    col_order.sort_by(|&a, &b| {
        for i in 0..n_true {
            match counts[i][a].partial_cmp(&counts[i][b]).expect("finite counts") {
                std::cmp::Ordering::Equal => continue,
                other => return other.reverse(),
            }
        }
        pred_ids[a].cmp(&pred_ids[b])
    });

    // Square count matrix padded with zeros, then maximize the diagonal.
    let side = n_true.max(n_pred);
    let mut square = vec![vec![0.0f64; side]; side];
    let mut max_count = 0.0f64;
    for i in 0..n_true {
        for (jj, &j) in col_order.iter().enumerate() {
            square[i][jj] = counts[i][j];
            max_count = max_count.max(counts[i][j]);
        }
    }
    let assignment = if side > EXACT_ASSIGNMENT_LIMIT {
        greedy_max(&square)
    } else {
        let cost: Vec<Vec<f64>> = square
            .iter()
            .map(|row| row.iter().map(|&c| max_count - c).collect())
            .collect();
        hungarian_min(&cost)
    };

    // Column layout: the matched cluster (or padding) for each neuron,
    // then every cluster not matched to a real neuron, in id order.
    let mut col_clusters: Vec<Option<usize>> = Vec::with_capacity(side);
    let mut used_pred = vec![false; n_pred];
    for i in 0..n_true {
        let jj = assignment[i];
        if jj < n_pred {
            col_clusters.push(Some(pred_ids[col_order[jj]]));
            used_pred[col_order[jj]] = true;
        } else {
            col_clusters.push(None);
        }
    }
    let mut leftovers: Vec<usize> = (0..n_pred).filter(|&j| !used_pred[j]).collect();
    leftovers.sort_by_key(|&j| pred_ids[j]);
    for j in leftovers {
        col_clusters.push(Some(pred_ids[j]));
    }

    let mut rows = Vec::with_capacity(n_true);
    for i in 0..n_true {
        let mut row = Vec::with_capacity(col_clusters.len());
        for col in &col_clusters {
            let value = match col {
                Some(cluster) => counts[i][pred_index[cluster]] / row_totals[i],
                None => 0.0,
            };
            row.push(value);
        }
        rows.push(row);
    }

    Ok(ConfusionMatrix {
        rows,
        true_ids,
        col_clusters,
    })
}

/// Coordinatewise median waveform of each cluster.
pub fn cluster_medians(events: &EventMatrix, labels: &ClusterLabeling) -> Result<Vec<Vec<f64>>> {
    if events.n() != labels.labels().len() {
        return Err(Error::LengthMismatch {
            left: events.n(),
            right: labels.labels().len(),
        });
    }
    let k = labels.k();
    let dim = events.dim();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.labels().iter().enumerate() {
        members[l].push(i);
    }
    let mut medians = Vec::with_capacity(k);
    for (c, rows) in members.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::EmptyCluster(c));
        }
        let mut median = Vec::with_capacity(dim);
        let mut column = Vec::with_capacity(rows.len());
        for d in 0..dim {
            column.clear();
            column.extend(rows.iter().map(|&i| events.row(i)[d]));
            column.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
            let m = column.len();
            median.push(if m % 2 == 1 {
                column[m / 2]
            } else {
                0.5 * (column[m / 2 - 1] + column[m / 2])
            });
        }
        medians.push(median);
    }
    Ok(medians)
}
