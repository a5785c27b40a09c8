//! Graph-based mode-seeking with prominence-thresholded merging.
//!
//! Vertices are processed in decreasing density order. A vertex whose upper
//! star is empty founds a new tree (a peak); any other vertex attaches to the
//! tree of its highest upper-star neighbor. When a vertex sees several trees,
//! trees whose root sits less than `tau` above the current density merge into
//! the higher-rooted tree; each merge kills the lower root and records a
//! diagram point (density of the dying root, current density). With
//! `tau = +inf` this is exactly the 0-dimensional persistence of the
//! superlevel-set filtration of the graph; with `tau = 0` nothing merges and
//! the output is one cluster per peak.
//!
//! Ties between equal density values are broken by vertex index (lower index
//! counts as higher), which makes every run deterministic and lets the
//! brute-force sweep oracle in the tests agree exactly.

use crate::density::DensityEstimate;
use crate::error::{Error, Result};
use crate::geometry::NeighborhoodGraph;

/// One point of a persistence diagram. `death = -inf` marks a component that
/// never merges (one per connected component of the graph).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
}

impl DiagramPoint {
    pub fn is_essential(&self) -> bool {
        self.death == f64::NEG_INFINITY
    }

    /// Birth minus death, with infinite deaths replaced by `min_density`.
    pub fn lifetime(&self, min_density: f64) -> f64 {
        if self.is_essential() {
            self.birth - min_density
        } else {
            self.birth - self.death
        }
    }
}

/// Multiset of (birth, death) pairs for the connected components of the
/// superlevel filtration. Births are always at least the deaths.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PersistenceDiagram {
    points: Vec<DiagramPoint>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<DiagramPoint>) -> Self {
        PersistenceDiagram { points }
    }

    pub fn points(&self) -> &[DiagramPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points with death at negative infinity.
    pub fn essential_count(&self) -> usize {
        self.points.iter().filter(|p| p.is_essential()).count()
    }

    /// Lifetimes (birth - death) with infinite deaths replaced by
    /// `min_density`, sorted descending.
    pub fn prominences(&self, min_density: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .points
            .iter()
            .map(|p| p.lifetime(min_density))
            .collect();
        out.sort_by(|a, b| b.partial_cmp(a).expect("finite lifetimes"));
        out
    }

    /// Canonical ordering for multiset comparison in tests and output.
    pub fn sorted_points(&self) -> Vec<DiagramPoint> {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| {
            (b.birth, b.death)
                .partial_cmp(&(a.birth, a.death))
                .expect("no NaN in diagrams")
        });
        pts
    }
}

/// Per-point cluster assignment plus the peak vertex of each cluster.
/// Cluster ids run from 0 in decreasing order of root density.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabeling {
    labels: Vec<usize>,
    roots: Vec<usize>,
}

impl ClusterLabeling {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Peak vertex of each cluster, indexed by cluster id.
    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn k(&self) -> usize {
        self.roots.len()
    }

    pub fn label_of(&self, vertex: usize) -> usize {
        self.labels[vertex]
    }

    /// Root vertex of the cluster containing `vertex`.
    pub fn root_of(&self, vertex: usize) -> usize {
        self.roots[self.labels[vertex]]
    }
}

/// Merge control: either an explicit prominence threshold or a target
/// cluster count resolved from the persistence diagram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TomatoParams {
    /// Merge trees whose root prominence at the meeting saddle is below this
    /// threshold. `f64::INFINITY` merges everything (full persistence).
    Tau(f64),
    /// Run at infinite tau first, place tau between the k-th and (k+1)-th
    /// largest prominences, and rerun.
    NClusters(usize),
}

impl TomatoParams {
    pub fn full_persistence() -> Self {
        TomatoParams::Tau(f64::INFINITY)
    }
}

/// Result of a clustering run. The diagram always comes from the
/// full-persistence pass when a cluster count was requested, so it can be
/// inspected and re-thresholded without recomputation.
#[derive(Debug, Clone)]
pub struct TomatoOutput {
    pub labeling: ClusterLabeling,
    pub diagram: PersistenceDiagram,
    /// The merge threshold actually applied for the final labeling.
    pub tau: f64,
    /// Set when a requested cluster count was below the number of graph
    /// components; holds the component count that was returned instead.
    pub clamped_to_components: Option<usize>,
}

/// True when vertex `a` ranks above vertex `b` in the sweep order:
/// higher density first, ties broken toward the lower index.
#[inline]
fn ranks_above(density: &[f64], a: usize, b: usize) -> bool {
    density[a] > density[b] || (density[a] == density[b] && a < b)
}

/// Upper star of vertex `i`: its neighbors with strictly higher density
/// (ties broken by index), in ascending index order.
pub fn upper_star(graph: &NeighborhoodGraph, density: &DensityEstimate, i: usize) -> Vec<usize> {
    let f = density.values();
    graph
        .neighbors(i)
        .iter()
        .copied()
        .filter(|&j| ranks_above(f, j, i))
        .collect()
}

/// Union-find keyed by vertex, each class remembering its root: the member
/// that ranks highest. Classes are linked by root rank, not by size, so the
/// surviving root after a union is always the higher one.
struct TreeForest<'a> {
    parent: Vec<usize>,
    root_vertex: Vec<usize>,
    density: &'a [f64],
}

impl<'a> TreeForest<'a> {
    fn new(n: usize, density: &'a [f64]) -> Self {
        TreeForest {
            parent: (0..n).collect(),
            root_vertex: (0..n).collect(),
            density,
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn root_of_class(&self, class: usize) -> usize {
        self.root_vertex[class]
    }

    /// Joins two classes; the class whose root ranks higher survives.
    /// Returns the root vertex that died.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.root_vertex[a], self.root_vertex[b]);
        if ranks_above(self.density, ra, rb) {
            self.parent[b] = a;
            rb
        } else {
            self.parent[a] = b;
            ra
        }
    }

    /// Attaches vertex `v` (not yet a root of anything meaningful) to the
    /// class `c` without touching `c`'s root.
    fn attach(&mut self, v: usize, c: usize) {
        self.parent[v] = c;
    }
}

/// One sweep of the merge algorithm at a fixed threshold. `merge_seed`
/// optionally shuffles the merge-candidate iteration order; the outcome must
/// not depend on it for distinct densities, which the tests assert.
pub(crate) fn sweep(
    graph: &NeighborhoodGraph,
    density: &DensityEstimate,
    tau: f64,
    merge_seed: Option<u64>,
) -> (ClusterLabeling, PersistenceDiagram) {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let n = graph.n();
    let f = density.values();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        if ranks_above(f, a, b) {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    });

    let mut rng = merge_seed.map(rand_chacha::ChaCha8Rng::seed_from_u64);
    let mut forest = TreeForest::new(n, f);
    let mut is_peak = vec![false; n];
    let mut points: Vec<DiagramPoint> = Vec::new();

    for &i in &order {
        let mut star = upper_star(graph, density, i);
        if star.is_empty() {
            is_peak[i] = true;
            continue;
        }
        if let Some(rng) = rng.as_mut() {
            star.shuffle(rng);
        }

        // Attach i to the tree of its highest upper-star neighbor.
        let gravity = *star
            .iter()
            .reduce(|a, b| if ranks_above(f, *a, *b) { a } else { b })
            .expect("star not empty");
        let home = forest.find(gravity);
        forest.attach(i, home);

        // First pass: any other tree meeting the star merges into the
        // current one when its root is within tau of the saddle.
        for &j in &star {
            let cj = forest.find(j);
            let ci = forest.find(i);
            if ci == cj {
                continue;
            }
            let rj = forest.root_of_class(cj);
            if f[rj] - f[i] < tau {
                let dead = forest.union(ci, cj);
                points.push(DiagramPoint {
                    birth: f[dead],
                    death: f[i],
                });
            }
        }

        // Second pass: the current tree itself may merge into the
        // highest-rooted tree still meeting the star.
        let ci = forest.find(i);
        let ri = forest.root_of_class(ci);
        let mut best: Option<usize> = None;
        for &j in &star {
            let cj = forest.find(j);
            if cj == ci {
                continue;
            }
            let rj = forest.root_of_class(cj);
            if ranks_above(f, rj, ri) {
                best = match best {
                    Some(current) if ranks_above(f, forest.root_of_class(current), rj) => best,
                    _ => Some(cj),
                };
            }
        }
        if let Some(cmax) = best {
            if f[ri] - f[i] < tau {
                let dead = forest.union(ci, cmax);
                points.push(DiagramPoint {
                    birth: f[dead],
                    death: f[i],
                });
            }
        }
    }

    // Surviving roots become essential diagram points and cluster ids,
    // numbered in decreasing root density.
    let mut cluster_of_class: Vec<Option<usize>> = vec![None; n];
    let mut roots = Vec::new();
    for &v in &order {
        if is_peak[v] {
            let class = forest.find(v);
            if cluster_of_class[class].is_none() {
                cluster_of_class[class] = Some(roots.len());
                roots.push(forest.root_of_class(class));
                points.push(DiagramPoint {
                    birth: f[forest.root_of_class(class)],
                    death: f64::NEG_INFINITY,
                });
            }
        }
    }
    let labels: Vec<usize> = (0..n)
        .map(|v| {
            let class = forest.find(v);
            cluster_of_class[class].expect("every vertex reaches a surviving root")
        })
        .collect();

    (ClusterLabeling { labels, roots }, PersistenceDiagram::new(points))
}

/// Midpoint threshold between the k-th and (k+1)-th largest prominences.
/// With k or fewer diagram points, zero (nothing needs merging).
fn tau_for_cluster_count(diagram: &PersistenceDiagram, k: usize, min_density: f64) -> f64 {
    let prom = diagram.prominences(min_density);
    if prom.len() > k {
        0.5 * (prom[k - 1] + prom[k])
    } else {
        0.0
    }
}

/// Runs the clustering. See [`TomatoParams`] for the two merge modes.
///
/// When a cluster count below the graph's component count is requested, the
/// component partition is returned instead and
/// [`TomatoOutput::clamped_to_components`] carries the component count.
pub fn tomato_cluster(
    graph: &NeighborhoodGraph,
    density: &DensityEstimate,
    params: &TomatoParams,
) -> Result<TomatoOutput> {
    if graph.n() == 0 {
        return Err(Error::EmptyInput("tomato_cluster needs at least one point"));
    }
    if graph.n() != density.len() {
        return Err(Error::LengthMismatch {
            left: graph.n(),
            right: density.len(),
        });
    }
    match *params {
        TomatoParams::Tau(tau) => {
            if tau.is_nan() || tau < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "tau must be nonnegative or +inf, got {tau}"
                )));
            }
            let (labeling, diagram) = sweep(graph, density, tau, None);
            Ok(TomatoOutput {
                labeling,
                diagram,
                tau,
                clamped_to_components: None,
            })
        }
        TomatoParams::NClusters(k) => {
            if k == 0 {
                return Err(Error::InvalidParameter(
                    "n_clusters must be at least 1".into(),
                ));
            }
            let (full_labeling, diagram) = sweep(graph, density, f64::INFINITY, None);
            let components = diagram.essential_count();
            if k < components {
                // Impossible to merge across components; report the
                // component partition and flag it.
                return Ok(TomatoOutput {
                    labeling: full_labeling,
                    diagram,
                    tau: f64::INFINITY,
                    clamped_to_components: Some(components),
                });
            }
            let tau = tau_for_cluster_count(&diagram, k, density.min_value());
            let (labeling, _) = sweep(graph, density, tau, None);
            Ok(TomatoOutput {
                labeling,
                diagram,
                tau,
                clamped_to_components: None,
            })
        }
    }
}
