//! Persistence-diagram analysis: automatic cluster-count detection and the
//! epsilon-matching decision used by the stability tests.
//!
//! Detection draws the line parallel to the diagonal at the mean lifetime
//! and keeps the points strictly beyond it. If those candidates split into
//! two birth-time groups, only the rightmost group is counted: diagrams from
//! heavily perturbed data grow a second, lower-birth group of spurious modes
//! that must not inflate the cluster count.

use crate::error::{Error, Result};
use crate::tomato::{DiagramPoint, PersistenceDiagram};
use serde::Serialize;

/// Whether the candidate points formed one birth-time group or two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    SingleGroup,
    TwoGroups,
}

/// Outcome of [`detect_n_clusters`].
#[derive(Debug, Clone, Serialize)]
pub struct DetectionResult {
    /// Number of clusters to use on the second clustering pass.
    pub k_detected: usize,
    /// The mean lifetime; the line `y = x - tau_line` separates candidates
    /// from the near-diagonal cloud.
    pub tau_line: f64,
    pub group_mode: GroupMode,
    /// Diagram indices of the points counted as clusters.
    pub selected_points: Vec<usize>,
    /// Diagram indices of all points beyond the mean-lifetime line.
    pub candidates: Vec<usize>,
    /// Birth gap between the two groups minus the separation scale it had
    /// to beat; positive values mean a confident two-group split.
    pub gap_statistic: f64,
}

/// Deterministic 1-D 2-means: seeds at min and max, Lloyd iterations until
/// assignments stabilize. Values equidistant from both centers go left.
/// Returns the values' group memberships (false = left, true = right).
fn two_means(values: &[f64]) -> Vec<bool> {
    let mut c_left = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut c_right = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut assign = vec![false; values.len()];
    loop {
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let right = (v - c_right).abs() < (v - c_left).abs();
            if right != assign[i] {
                assign[i] = right;
                changed = true;
            }
        }
        let (mut sum_l, mut n_l, mut sum_r, mut n_r) = (0.0, 0usize, 0.0, 0usize);
        for (i, &v) in values.iter().enumerate() {
            if assign[i] {
                sum_r += v;
                n_r += 1;
            } else {
                sum_l += v;
                n_l += 1;
            }
        }
        if n_l > 0 {
            c_left = sum_l / n_l as f64;
        }
        if n_r > 0 {
            c_right = sum_r / n_r as f64;
        }
        if !changed {
            return assign;
        }
    }
}

/// Detects the number of clusters from a persistence diagram.
///
/// Lifetimes use `min_density` in place of infinite deaths. The mean
/// lifetime draws the first cut: points strictly above it are candidates
/// (when every lifetime ties the mean, the maximal-lifetime points stand in
/// so the result is never empty). The cut is then slid to the largest
/// lifetime gap at or below the line: diagrams from well-separated data can
/// be so clean that the near-diagonal cloud barely weighs on the mean, which
/// then lands inside the real group; the dominant gap marks the actual noise
/// boundary and never excludes a mean-line candidate. Candidates are finally
/// split by 2-means on birth times; the split counts as real only when the
/// empty gap between the groups exceeds both the widest group and the mean
/// lifetime itself, otherwise all candidates count as one group.
pub fn detect_n_clusters(d: &PersistenceDiagram, min_density: f64) -> Result<DetectionResult> {
    if d.is_empty() {
        return Err(Error::EmptyInput("detect_n_clusters needs a diagram point"));
    }
    let lifetimes: Vec<f64> = d.points().iter().map(|p| p.lifetime(min_density)).collect();
    let tau_line = lifetimes.iter().sum::<f64>() / lifetimes.len() as f64;

    // Diagram indices in decreasing lifetime order.
    let mut by_lifetime: Vec<usize> = (0..d.len()).collect();
    by_lifetime.sort_by(|&a, &b| {
        lifetimes[b]
            .partial_cmp(&lifetimes[a])
            .expect("finite lifetimes")
            .then(a.cmp(&b))
    });
    let mut cut = by_lifetime
        .iter()
        .take_while(|&&i| lifetimes[i] > tau_line)
        .count();
    if cut == 0 {
        // Degenerate diagram (all lifetimes equal): keep the maxima.
        let max = lifetimes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        cut = by_lifetime
            .iter()
            .take_while(|&&i| lifetimes[i] == max)
            .count();
    }
    // Slide the cut to the widest gap at or below the mean line; the
    // diagonal (lifetime zero) bounds the final gap.
    let gap_at = |c: usize| {
        let below = if c < d.len() {
            lifetimes[by_lifetime[c]]
        } else {
            0.0
        };
        lifetimes[by_lifetime[c - 1]] - below
    };
    let mut best = cut;
    for c in cut..=d.len() {
        if gap_at(c) > gap_at(best) {
            best = c;
        }
    }
    let mut candidates: Vec<usize> = by_lifetime[..best].to_vec();
    candidates.sort_unstable();

    let births: Vec<f64> = candidates.iter().map(|&i| d.points()[i].birth).collect();
    let single = |candidates: Vec<usize>, gap: f64| DetectionResult {
        k_detected: candidates.len(),
        tau_line,
        group_mode: GroupMode::SingleGroup,
        selected_points: candidates.clone(),
        candidates,
        gap_statistic: gap,
    };

    if candidates.len() <= 2 {
        return Ok(single(candidates, 0.0));
    }
    let min_birth = births.iter().copied().fold(f64::INFINITY, f64::min);
    let max_birth = births.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min_birth == max_birth {
        return Ok(single(candidates, 0.0));
    }

    let assign = two_means(&births);
    let left: Vec<f64> = births
        .iter()
        .zip(&assign)
        .filter(|&(_, &r)| !r)
        .map(|(&b, _)| b)
        .collect();
    let right: Vec<f64> = births
        .iter()
        .zip(&assign)
        .filter(|&(_, &r)| r)
        .map(|(&b, _)| b)
        .collect();
    if left.is_empty() || right.is_empty() {
        return Ok(single(candidates, 0.0));
    }
    let spread = |g: &[f64]| {
        g.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - g.iter().copied().fold(f64::INFINITY, f64::min)
    };
    // Empty birth interval between the groups (1-D 2-means keeps groups
    // contiguous, so this is nonnegative).
    let inter_gap = right.iter().copied().fold(f64::INFINITY, f64::min)
        - left.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = spread(&left).max(spread(&right)).max(tau_line);
    let gap_statistic = inter_gap - scale;

    if inter_gap > scale {
        let selected: Vec<usize> = candidates
            .iter()
            .zip(&assign)
            .filter(|&(_, &r)| r)
            .map(|(&i, _)| i)
            .collect();
        Ok(DetectionResult {
            k_detected: selected.len(),
            tau_line,
            group_mode: GroupMode::TwoGroups,
            selected_points: selected,
            candidates,
            gap_statistic,
        })
    } else {
        Ok(single(candidates, gap_statistic))
    }
}

/// Sup-norm distance between diagram points; infinite deaths only match
/// each other.
fn sup_dist(a: &DiagramPoint, b: &DiagramPoint) -> f64 {
    match (a.is_essential(), b.is_essential()) {
        (true, true) => (a.birth - b.birth).abs(),
        (false, false) => (a.birth - b.birth).abs().max((a.death - b.death).abs()),
        _ => f64::INFINITY,
    }
}

fn finite_lifetime(p: &DiagramPoint) -> f64 {
    if p.is_essential() {
        f64::INFINITY
    } else {
        p.birth - p.death
    }
}

/// Decides whether two diagrams match within `eps`: every point is either
/// paired with a point of the other diagram within `eps` in sup-norm or lies
/// within `eps` of the diagonal (lifetime at most `2 * eps`).
///
/// The decision is exact (augmenting-path bipartite matching over the
/// diagrams extended with diagonal slots) whenever the combined size is at
/// most [`EXACT_MATCH_LIMIT`]; beyond that a greedy pairing is used, which
/// can only under-report matches.
pub fn match_diagrams(a: &PersistenceDiagram, b: &PersistenceDiagram, eps: f64) -> bool {
    let eps = eps.max(0.0);
    let pa = a.points();
    let pb = b.points();
    if pa.len() + pb.len() <= EXACT_MATCH_LIMIT {
        exact_match(pa, pb, eps)
    } else {
        greedy_match(pa, pb, eps)
    }
}

/// Size cutoff for the exact matching; diagrams beyond this fall back to
/// the greedy approximation.
pub const EXACT_MATCH_LIMIT: usize = 2000;

/// Perfect-matching formulation: left side is `a`-points plus one diagonal
/// slot per `b`-point, right side is `b`-points plus one diagonal slot per
/// `a`-point. A point connects to its diagonal slot only when its lifetime
/// is within `2 * eps`; diagonal slots connect freely to each other.
fn exact_match(pa: &[DiagramPoint], pb: &[DiagramPoint], eps: f64) -> bool {
    let na = pa.len();
    let nb = pb.len();
    let total = na + nb;
    if total == 0 {
        return true;
    }
    // Left vertex l: l < na is pa[l], else diagonal slot of pb[l - na].
    // Right vertex r: r < nb is pb[r], else diagonal slot of pa[r - nb].
    let edge = |l: usize, r: usize| -> bool {
        match (l < na, r < nb) {
            (true, true) => sup_dist(&pa[l], &pb[r]) <= eps,
            (true, false) => r - nb == l && finite_lifetime(&pa[l]) <= 2.0 * eps,
            (false, true) => l - na == r && finite_lifetime(&pb[r]) <= 2.0 * eps,
            (false, false) => true,
        }
    };
    let mut match_right: Vec<Option<usize>> = vec![None; total];
    let mut matched = 0;
    for l in 0..total {
        let mut visited = vec![false; total];
        if augment(l, &edge, &mut match_right, &mut visited, total) {
            matched += 1;
        }
    }
    matched == total
}

fn augment(
    l: usize,
    edge: &dyn Fn(usize, usize) -> bool,
    match_right: &mut Vec<Option<usize>>,
    visited: &mut Vec<bool>,
    total: usize,
) -> bool {
    for r in 0..total {
        if visited[r] || !edge(l, r) {
            continue;
        }
        visited[r] = true;
        let free = match match_right[r] {
            None => true,
            Some(prev) => augment(prev, edge, match_right, visited, total),
        };
        if free {
            match_right[r] = Some(l);
            return true;
        }
    }
    false
}

/// Greedy fallback for very large diagrams: points that must match (lifetime
/// beyond `2 * eps`) take the nearest still-free partner. May reject
/// matchable pairs, never accepts unmatchable ones.
fn greedy_match(pa: &[DiagramPoint], pb: &[DiagramPoint], eps: f64) -> bool {
    let mut must_a: Vec<usize> = (0..pa.len())
        .filter(|&i| finite_lifetime(&pa[i]) > 2.0 * eps)
        .collect();
    must_a.sort_by(|&x, &y| {
        finite_lifetime(&pa[y])
            .partial_cmp(&finite_lifetime(&pa[x]))
            .unwrap()
    });
    let mut taken = vec![false; pb.len()];
    for i in must_a {
        let mut best: Option<(f64, usize)> = None;
        for (j, p) in pb.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let d = sup_dist(&pa[i], p);
            if d <= eps && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        match best {
            Some((_, j)) => taken[j] = true,
            None => return false,
        }
    }
    // Remaining b-points must be deletable or matchable to some free a-point.
    let mut free_a: Vec<bool> = vec![true; pa.len()];
    for (j, p) in pb.iter().enumerate() {
        if taken[j] || finite_lifetime(p) <= 2.0 * eps {
            continue;
        }
        let mut found = false;
        for (i, q) in pa.iter().enumerate() {
            if free_a[i] && sup_dist(q, p) <= eps {
                free_a[i] = false;
                found = true;
                break;
            }
        }
        if !found {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand::Rng as _;
    use rand::seq::SliceRandom as _;
    use rand_chacha::ChaCha8Rng;

    fn pt(birth: f64, death: f64) -> DiagramPoint {
        DiagramPoint { birth, death }
    }

    fn diagram(points: Vec<DiagramPoint>) -> PersistenceDiagram {
        PersistenceDiagram::new(points)
    }

    /// Archetype of a clean run: well-separated points plus a dense
    /// near-diagonal cloud.
    fn clean_archetype(rng: &mut ChaCha8Rng, n_real: usize) -> PersistenceDiagram {
        let mut points = Vec::new();
        for _ in 0..n_real {
            let birth = -5.9 + rng.gen_range(-0.05..0.05);
            points.push(pt(birth, birth - 3.0 + rng.gen_range(-0.2..0.2)));
        }
        for _ in 0..150 {
            let birth = rng.gen_range(-8.0..-6.0);
            points.push(pt(birth, birth - rng.gen_range(0.0..0.05)));
        }
        points.shuffle(rng);
        diagram(points)
    }

    /// Archetype of a heavily perturbed run: a second candidate group at
    /// clearly lower birth times.
    fn perturbed_archetype(rng: &mut ChaCha8Rng, n_real: usize, n_junk: usize) -> PersistenceDiagram {
        let mut points = Vec::new();
        for _ in 0..n_real {
            let birth = -5.9 + rng.gen_range(-0.05..0.05);
            points.push(pt(birth, birth - 3.0 + rng.gen_range(-0.2..0.2)));
        }
        for _ in 0..n_junk {
            let birth = -7.6 + rng.gen_range(-0.2..0.2);
            points.push(pt(birth, birth - rng.gen_range(1.0..1.6)));
        }
        for _ in 0..200 {
            let birth = rng.gen_range(-8.0..-6.0);
            points.push(pt(birth, birth - rng.gen_range(0.0..0.05)));
        }
        points.shuffle(rng);
        diagram(points)
    }

    #[test]
    fn clean_diagram_detects_fifteen() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d = clean_archetype(&mut rng, 15);
        let r = detect_n_clusters(&d, -9.0).unwrap();
        assert_eq!(r.k_detected, 15);
        assert_eq!(r.group_mode, GroupMode::SingleGroup);
    }

    #[test]
    fn perturbed_diagram_counts_only_rightmost_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = perturbed_archetype(&mut rng, 15, 40);
        let r = detect_n_clusters(&d, -9.0).unwrap();
        assert_eq!(r.group_mode, GroupMode::TwoGroups);
        assert_eq!(r.k_detected, 15);
        assert!(r.candidates.len() > 15);
    }

    #[test]
    fn single_point_diagram_detects_one() {
        let d = diagram(vec![pt(10.0, f64::NEG_INFINITY)]);
        let r = detect_n_clusters(&d, 0.0).unwrap();
        assert_eq!(r.k_detected, 1);
        assert_eq!(r.group_mode, GroupMode::SingleGroup);
        assert_eq!(r.selected_points, vec![0]);
    }

    #[test]
    fn empty_diagram_is_an_error() {
        let d = diagram(vec![]);
        assert!(detect_n_clusters(&d, 0.0).is_err());
    }

    #[test]
    fn equal_candidate_births_stay_single_group() {
        let d = diagram(vec![
            pt(5.0, 0.0),
            pt(5.0, 0.1),
            pt(5.0, 0.2),
            pt(5.0, 4.9),
            pt(5.0, 4.9),
            pt(5.0, 4.9),
        ]);
        let r = detect_n_clusters(&d, 0.0).unwrap();
        assert_eq!(r.group_mode, GroupMode::SingleGroup);
        assert_eq!(r.k_detected, 3);
    }

    #[test]
    fn zero_lifetime_points_do_not_increase_detection() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &n_real in &[3usize, 8, 15] {
            let base = clean_archetype(&mut rng, n_real);
            let r0 = detect_n_clusters(&base, -9.0).unwrap();
            let mut padded = base.points().to_vec();
            for _ in 0..50 {
                let b = rng.gen_range(-8.0..-6.0);
                padded.push(pt(b, b));
            }
            let r1 = detect_n_clusters(&diagram(padded), -9.0).unwrap();
            assert!(
                r1.k_detected <= r0.k_detected,
                "padding grew detection from {} to {}",
                r0.k_detected,
                r1.k_detected
            );
        }
    }

    proptest! {
        #[test]
        fn detection_is_permutation_invariant(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = perturbed_archetype(&mut rng, 10, 20);
            let r = detect_n_clusters(&d, -9.0).unwrap();
            let mut shuffled = d.points().to_vec();
            shuffled.shuffle(&mut rng);
            let r2 = detect_n_clusters(&diagram(shuffled), -9.0).unwrap();
            prop_assert_eq!(r.k_detected, r2.k_detected);
            prop_assert_eq!(r.group_mode, r2.group_mode);
            prop_assert!((r.tau_line - r2.tau_line).abs() <= 1e-9 * r.tau_line.abs().max(1.0));
        }
    }

    #[test]
    fn identical_diagrams_match_at_eps_zero() {
        let d = diagram(vec![pt(5.0, 2.0), pt(3.0, f64::NEG_INFINITY)]);
        assert!(match_diagrams(&d, &d, 0.0));
    }

    #[test]
    fn lone_point_needs_eps_half_lifetime() {
        let a = diagram(vec![pt(5.0, 2.0)]);
        let b = diagram(vec![]);
        assert!(!match_diagrams(&a, &b, 1.0));
        assert!(match_diagrams(&a, &b, 1.5));
        assert!(!match_diagrams(&b, &a, 1.0));
        assert!(match_diagrams(&b, &a, 1.5));
    }

    #[test]
    fn essential_points_only_match_essential_points() {
        let a = diagram(vec![pt(5.0, f64::NEG_INFINITY)]);
        let b = diagram(vec![pt(5.0, 4.9)]);
        assert!(!match_diagrams(&a, &b, 10.0));
        let c = diagram(vec![pt(5.5, f64::NEG_INFINITY)]);
        assert!(match_diagrams(&a, &c, 0.5));
        assert!(!match_diagrams(&a, &c, 0.4));
    }

    #[test]
    fn matching_needs_injective_pairing() {
        // Two far-from-diagonal points cannot share one partner.
        let a = diagram(vec![pt(10.0, 0.0), pt(10.1, 0.1)]);
        let b = diagram(vec![pt(10.05, 0.05)]);
        assert!(!match_diagrams(&a, &b, 0.2));
    }

    #[test]
    fn crossing_pairs_require_the_exact_matcher() {
        // Greedy by lifetime could pair the big point with the near partner
        // and strand the other; the exact matcher must find the crossing.
        let a = diagram(vec![pt(10.0, 0.0), pt(10.4, 0.4)]);
        let b = diagram(vec![pt(10.4, 0.0), pt(10.0, 0.35)]);
        assert!(match_diagrams(&a, &b, 0.5));
    }

    proptest! {
        #[test]
        fn perturbed_diagram_matches_within_eps(seed in 0u64..200, eps in 0.01f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..30);
            let mut pts = Vec::new();
            for _ in 0..n {
                let birth = rng.gen_range(-5.0..5.0);
                let death = birth - rng.gen_range(0.0..4.0);
                pts.push(pt(birth, death));
            }
            let moved: Vec<DiagramPoint> = pts
                .iter()
                .map(|p| {
                    let db = rng.gen_range(-eps..eps);
                    let dd = rng.gen_range(-eps..eps);
                    // Keep birth >= death after perturbation.
                    let birth = p.birth + db;
                    let death = (p.death + dd).min(birth);
                    pt(birth, death)
                })
                .collect();
            prop_assert!(match_diagrams(&diagram(pts), &diagram(moved), eps));
        }
    }
}
