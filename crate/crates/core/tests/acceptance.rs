//! Acceptance suite: every criterion runs in sequence and prints one
//! pass/fail line. Run with `cargo test -p tomatosort-core --test acceptance
//! -- --nocapture` to watch the lines as they appear.

use std::time::{Duration, Instant};

use rand::prelude::*;
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;
use tomatosort_core::density::{
    dtm_density, log_transform, DensityEstimate, DensityScale, DtmParams, EstimatorKind,
};
use tomatosort_core::diagram::{detect_n_clusters, match_diagrams};
use tomatosort_core::evalsort::{confusion, ConfusionMatrix};
use tomatosort_core::geometry::{knn_graph, NeighborhoodGraph};
use tomatosort_core::pipeline::{build_raster, detect_events, mad_normalize, CutWindow};
use tomatosort_core::spikesim::{simulate, SimConfig};
use tomatosort_core::tomato::{
    tomato_cluster, upper_star, ClusterLabeling, DiagramPoint, PersistenceDiagram, TomatoParams,
};

// ------------------------------------------------------------------------
// Independent oracles. These rebuild everything from first principles and
// never touch the union-find sweep under test.

fn ranks_above(f: &[f64], a: usize, b: usize) -> bool {
    f[a] > f[b] || (f[a] == f[b] && a < b)
}

/// Connected components of the subgraph induced on active vertices, by
/// breadth-first search, each listed with its highest vertex first.
fn components_of(graph: &NeighborhoodGraph, active: &[bool], f: &[f64]) -> Vec<Vec<usize>> {
    let n = graph.n();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for s in 0..n {
        if !active[s] || seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut queue = vec![s];
        while let Some(v) = queue.pop() {
            for &w in graph.neighbors(v) {
                if active[w] && !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    queue.push(w);
                }
            }
        }
        let best = *comp
            .iter()
            .reduce(|a, b| if ranks_above(f, *a, *b) { a } else { b })
            .unwrap();
        let mut ordered = vec![best];
        ordered.extend(comp.into_iter().filter(|&x| x != best));
        out.push(ordered);
    }
    out
}

/// Superlevel-set persistence computed by sweeping the density levels in
/// decreasing order and recomputing components from scratch at every step.
/// Births at component creation, deaths at merges, elder rule by the
/// component's highest vertex.
fn oracle_diagram(graph: &NeighborhoodGraph, density: &DensityEstimate) -> Vec<(f64, f64)> {
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
    let mut points = Vec::new();
    let mut active = vec![false; n];
    let mut prev: Vec<Vec<usize>> = Vec::new();
    for &v in &order {
        active[v] = true;
        let components = components_of(graph, &active, f);
        for comp in &components {
            let olds: Vec<&Vec<usize>> = prev.iter().filter(|old| comp.contains(&old[0])).collect();
            if olds.len() > 1 {
                let mut roots: Vec<usize> = olds.iter().map(|old| old[0]).collect();
                roots.sort_by(|&a, &b| {
                    if ranks_above(f, a, b) {
                        std::cmp::Ordering::Less
                    } else {
                        std::cmp::Ordering::Greater
                    }
                });
                for &dead in &roots[1..] {
                    points.push((f[dead], f[v]));
                }
            }
        }
        prev = components;
    }
    for comp in &prev {
        points.push((f[comp[0]], f64::NEG_INFINITY));
    }
    points
}

/// Ascending-tree partition: walk every vertex to its highest upper-star
/// neighbor until a peak is reached.
fn oracle_ascending_roots(graph: &NeighborhoodGraph, density: &DensityEstimate) -> Vec<usize> {
    let n = graph.n();
    let f = density.values();
    let mut root = vec![usize::MAX; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut v = start;
        let r = loop {
            if root[v] != usize::MAX {
                break root[v];
            }
            path.push(v);
            match upper_star(graph, density, v)
                .into_iter()
                .reduce(|a, b| if ranks_above(f, a, b) { a } else { b })
            {
                None => break v,
                Some(parent) => v = parent,
            }
        };
        for p in path {
            root[p] = r;
        }
    }
    root
}

fn canonical(points: &[DiagramPoint]) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = points.iter().map(|p| (p.birth, p.death)).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn canonical_pairs(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn roots_per_vertex(labeling: &ClusterLabeling) -> Vec<usize> {
    labeling
        .labels()
        .iter()
        .map(|&l| labeling.roots()[l])
        .collect()
}

fn random_graph_and_density(
    rng: &mut ChaCha8Rng,
    n: usize,
    edge_prob: f64,
) -> (NeighborhoodGraph, DensityEstimate) {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(edge_prob) {
                edges.push((i, j));
            }
        }
    }
    let graph = NeighborhoodGraph::from_edges(n, &edges).unwrap();
    let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
    let density =
        DensityEstimate::from_values(values, DensityScale::Linear, EstimatorKind::External)
            .unwrap();
    (graph, density)
}

// ------------------------------------------------------------------------
// Shared spike-run helper for criteria 3-5: simulate, build the k-NN graph
// (k = 10), estimate log-DTM density (k = 10, q = 2, dim = 2), detect the
// cluster count on the full-persistence diagram, recluster, evaluate.

struct SpikeRun {
    detected: usize,
    confusion_all: ConfusionMatrix,
    confusion_clean: ConfusionMatrix,
}

fn spike_run(n_neurons: usize, events_per_neuron: usize, sf: f64, amp: f64, seed: u64) -> SpikeRun {
    let mut cfg = SimConfig::new(n_neurons, events_per_neuron, amp, seed);
    cfg.superposition_freq = sf;
    let (events, truth) = simulate(&cfg).unwrap();
    let graph = knn_graph(&events, 10).unwrap();
    let mut params = DtmParams::defaults_for(events.dim());
    params.dim = 2.0;
    let density = log_transform(&dtm_density(&events, &params).unwrap()).unwrap();
    let full = tomato_cluster(&graph, &density, &TomatoParams::full_persistence()).unwrap();
    let det = detect_n_clusters(&full.diagram, density.min_value()).unwrap();
    let out = tomato_cluster(&graph, &density, &TomatoParams::NClusters(det.k_detected)).unwrap();

    let confusion_all = confusion(&truth.labels, out.labeling.labels()).unwrap();
    let clean: Vec<usize> = (0..events.n())
        .filter(|&i| !truth.is_superposition[i])
        .collect();
    let clean_true: Vec<usize> = clean.iter().map(|&i| truth.labels[i]).collect();
    let clean_pred: Vec<usize> = clean.iter().map(|&i| out.labeling.labels()[i]).collect();
    let confusion_clean = confusion(&clean_true, &clean_pred).unwrap();
    SpikeRun {
        detected: det.k_detected,
        confusion_all,
        confusion_clean,
    }
}

// ------------------------------------------------------------------------
// The criteria.

struct Outcome {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn report(outcomes: &mut Vec<Outcome>, index: usize, name: &'static str, passed: bool, detail: String) {
    println!(
        "acceptance {index}: {name}: {} ({detail})",
        if passed { "PASS" } else { "FAIL" }
    );
    outcomes.push(Outcome {
        name,
        passed,
        detail,
    });
}

fn criterion_1_oracle_equivalence(outcomes: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_001);
    let mut checked = 0;
    let mut failures = Vec::new();
    for trial in 0..100 {
        let n = rng.gen_range(2..=200);
        let p = rng.gen_range(0.005..0.12);
        let (graph, density) = random_graph_and_density(&mut rng, n, p);

        let full = tomato_cluster(&graph, &density, &TomatoParams::full_persistence()).unwrap();
        if canonical(full.diagram.points()) != canonical_pairs(oracle_diagram(&graph, &density)) {
            failures.push(format!("diagram mismatch on trial {trial} (n = {n})"));
        }
        let zero = tomato_cluster(&graph, &density, &TomatoParams::Tau(0.0)).unwrap();
        if roots_per_vertex(&zero.labeling) != oracle_ascending_roots(&graph, &density) {
            failures.push(format!("tau = 0 partition mismatch on trial {trial}"));
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(10) {
        failures.push(format!("runtime {elapsed:?} exceeded 10 s"));
    }
    report(
        outcomes,
        1,
        "oracle equivalence",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{checked} instances, exact diagram and partition match, {elapsed:?}")
        } else {
            failures.join("; ")
        },
    );
}

fn criterion_2_worked_example(outcomes: &mut Vec<Outcome>) {
    // Edges recovered from the upper-star sets of the 20-vertex example;
    // densities decrease with vertex index: f[i] = 20 - i.
    let edges = [
        (1, 0),
        (2, 0),
        (4, 0),
        (5, 0),
        (6, 3),
        (6, 5),
        (7, 3),
        (8, 3),
        (10, 9),
        (12, 9),
        (12, 11),
        (13, 11),
        (14, 11),
        (15, 9),
        (16, 0),
        (17, 9),
        (18, 0),
        (18, 9),
        (19, 0),
    ];
    let graph = NeighborhoodGraph::from_edges(20, &edges).unwrap();
    let density = DensityEstimate::from_values(
        (0..20).map(|i| 20.0 - i as f64).collect(),
        DensityScale::Linear,
        EstimatorKind::External,
    )
    .unwrap();

    let mut failures = Vec::new();
    let full = tomato_cluster(&graph, &density, &TomatoParams::full_persistence()).unwrap();
    let expected_diagram = vec![
        (9.0, 8.0),
        (11.0, 2.0),
        (17.0, 14.0),
        (20.0, f64::NEG_INFINITY),
    ];
    if canonical(full.diagram.points()) != expected_diagram {
        failures.push(format!("diagram {:?}", canonical(full.diagram.points())));
    }
    // Peaks are exactly the empty-upper-star vertices 0, 3, 9, 11.
    let zero = tomato_cluster(&graph, &density, &TomatoParams::Tau(0.0)).unwrap();
    let mut peaks = zero.labeling.roots().to_vec();
    peaks.sort_unstable();
    if peaks != vec![0, 3, 9, 11] {
        failures.push(format!("peaks {peaks:?}"));
    }
    let two = tomato_cluster(&graph, &density, &TomatoParams::NClusters(2)).unwrap();
    let labels = two.labeling.labels();
    let cluster_a: Vec<usize> = (0..20).filter(|&v| labels[v] == labels[0]).collect();
    let cluster_b: Vec<usize> = (0..20).filter(|&v| labels[v] == labels[9]).collect();
    if cluster_a != vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 16, 18, 19]
        || cluster_b != vec![9, 10, 11, 12, 13, 14, 15, 17]
    {
        failures.push(format!("partition {cluster_a:?} / {cluster_b:?}"));
    }
    report(
        outcomes,
        2,
        "worked example",
        failures.is_empty(),
        if failures.is_empty() {
            "peaks, diagram and 2-cluster partition exact".into()
        } else {
            failures.join("; ")
        },
    );
}

fn criterion_3_locust_recovery(outcomes: &mut Vec<Outcome>) {
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for &n_neurons in &[5usize, 10, 15] {
        let start = Instant::now();
        let mut hits = 0;
        let mut min_dw = f64::INFINITY;
        for seed in 0..10u64 {
            let run = spike_run(n_neurons, 100, 0.03, 20.0, seed);
            if run.detected == n_neurons {
                hits += 1;
                min_dw = min_dw.min(run.confusion_all.diagonal_weight());
            }
        }
        let elapsed = start.elapsed();
        if hits < 8 {
            failures.push(format!("{n_neurons} neurons: {hits}/10 correct detections"));
        }
        if hits > 0 && min_dw < 0.90 {
            failures.push(format!(
                "{n_neurons} neurons: diagonal weight {min_dw:.3} below 0.90"
            ));
        }
        if elapsed > Duration::from_secs(120) {
            failures.push(format!("{n_neurons} neurons: runtime {elapsed:?} over 2 min"));
        }
        details.push(format!(
            "{n_neurons}n: {hits}/10 hits, min dw {min_dw:.3}, {elapsed:.1?}"
        ));
    }
    report(
        outcomes,
        3,
        "locust-style recovery",
        failures.is_empty(),
        if failures.is_empty() {
            details.join("; ")
        } else {
            failures.join("; ")
        },
    );
}

fn criterion_4_superposition_robustness(outcomes: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for &sf in &[0.01f64, 0.1, 0.3, 0.5, 0.9] {
        let mut worst_clean = f64::INFINITY;
        let mut full_sum = 0.0;
        for seed in 0..5u64 {
            let run = spike_run(10, 100, sf, 20.0, seed);
            // The robustness claim is about the unambiguously labeled
            // events: superpositions mirror (first, second) almost exactly,
            // so they carry no recoverable first-neuron information.
            let identified = run.confusion_clean.identified(0.5);
            let dw = if identified.is_empty() {
                0.0
            } else {
                run.confusion_clean.diagonal_weight_over(&identified)
            };
            worst_clean = worst_clean.min(dw);
            full_sum += run.confusion_all.diagonal_weight();
        }
        if worst_clean < 0.85 {
            failures.push(format!(
                "frequency {sf}: clean-event diagonal weight {worst_clean:.3} below 0.85"
            ));
        }
        details.push(format!(
            "f={sf}: clean dw {worst_clean:.3} (all-events dw {:.2})",
            full_sum / 5.0
        ));
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(300) {
        failures.push(format!("runtime {elapsed:?} over 5 min"));
    }
    report(
        outcomes,
        4,
        "superposition robustness",
        failures.is_empty(),
        if failures.is_empty() {
            format!("{}; {elapsed:.1?}", details.join("; "))
        } else {
            failures.join("; ")
        },
    );
}

fn criterion_5_low_amplitude_degradation(outcomes: &mut Vec<Outcome>) {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for seed in 0..3u64 {
        let run = spike_run(30, 100, 0.3, 10.0, seed);
        let identified = run.confusion_clean.identified(0.5);
        let dw = run.confusion_clean.diagonal_weight_over(&identified);
        if identified.len() < 12 {
            failures.push(format!(
                "seed {seed}: only {} identified neurons",
                identified.len()
            ));
        }
        if dw < 0.85 {
            failures.push(format!(
                "seed {seed}: identified diagonal weight {dw:.3} below 0.85"
            ));
        }
        details.push(format!("seed {seed}: {} identified, dw {dw:.3}", identified.len()));
    }
    report(
        outcomes,
        5,
        "low-amplitude degradation",
        failures.is_empty(),
        format!(
            "{}; {:.1?}",
            if failures.is_empty() {
                details.join("; ")
            } else {
                failures.join("; ")
            },
            start.elapsed()
        ),
    );
}

fn criterion_6_equivariance(outcomes: &mut Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_006);
    let mut failures = Vec::new();
    for trial in 0..50 {
        let n = rng.gen_range(4..80);
        let p = rng.gen_range(0.02..0.25);
        let (graph, density) = random_graph_and_density(&mut rng, n, p);
        let full = tomato_cluster(&graph, &density, &TomatoParams::full_persistence()).unwrap();

        // A merge threshold safely away from any decision boundary: the
        // midpoint of a random prominence gap.
        let prom = full.diagram.prominences(density.min_value());
        let tau = if prom.len() >= 2 {
            let i = rng.gen_range(0..prom.len() - 1);
            0.5 * (prom[i] + prom[i + 1])
        } else {
            1.0
        };
        let base = tomato_cluster(&graph, &density, &TomatoParams::Tau(tau)).unwrap();

        // Shift: identical labels, every coordinate moved by exactly c.
        let c = rng.gen_range(-5.0..5.0);
        let shifted = DensityEstimate::from_values(
            density.values().iter().map(|&v| v + c).collect(),
            DensityScale::Log,
            EstimatorKind::External,
        )
        .unwrap();
        let out = tomato_cluster(&graph, &shifted, &TomatoParams::Tau(tau)).unwrap();
        if out.labeling.labels() != base.labeling.labels() {
            failures.push(format!("trial {trial}: shift changed labels"));
        }
        let expected: Vec<(f64, f64)> = canonical(base.diagram.points())
            .into_iter()
            .map(|(b, d)| {
                (
                    b + c,
                    if d == f64::NEG_INFINITY { d } else { d + c },
                )
            })
            .collect();
        if canonical(out.diagram.points()) != canonical_pairs(expected) {
            failures.push(format!("trial {trial}: shift did not translate the diagram"));
        }

        // Scale: labels identical when tau scales along.
        let s = rng.gen_range(0.1..10.0);
        let scaled = DensityEstimate::from_values(
            density.values().iter().map(|&v| v * s).collect(),
            DensityScale::Linear,
            EstimatorKind::External,
        )
        .unwrap();
        let out = tomato_cluster(&graph, &scaled, &TomatoParams::Tau(tau * s)).unwrap();
        if out.labeling.labels() != base.labeling.labels() {
            failures.push(format!("trial {trial}: scale changed labels"));
        }

        // Permutation: identically permuted partition.
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut edges = Vec::new();
        for i in 0..n {
            for &j in graph.neighbors(i) {
                if i < j {
                    edges.push((perm[i], perm[j]));
                }
            }
        }
        let pgraph = NeighborhoodGraph::from_edges(n, &edges).unwrap();
        let mut pvalues = vec![0.0; n];
        for i in 0..n {
            pvalues[perm[i]] = density.values()[i];
        }
        let pdensity =
            DensityEstimate::from_values(pvalues, DensityScale::Linear, EstimatorKind::External)
                .unwrap();
        let pout = tomato_cluster(&pgraph, &pdensity, &TomatoParams::Tau(tau)).unwrap();
        let base_roots = roots_per_vertex(&base.labeling);
        let perm_roots = roots_per_vertex(&pout.labeling);
        for v in 0..n {
            if perm[base_roots[v]] != perm_roots[perm[v]] {
                failures.push(format!("trial {trial}: permutation broke the partition"));
                break;
            }
        }
    }
    report(
        outcomes,
        6,
        "equivariance suite",
        failures.is_empty(),
        if failures.is_empty() {
            "shift, scale and permutation exact on 50 instances".into()
        } else {
            failures.join("; ")
        },
    );
}

fn criterion_7_stability(outcomes: &mut Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_007);
    let mut failures = Vec::new();
    for trial in 0..50 {
        let n = rng.gen_range(2..=100);
        let p = rng.gen_range(0.02..0.3);
        let (graph, density) = random_graph_and_density(&mut rng, n, p);
        let eps = rng.gen_range(0.02..0.5);
        // Log scale: the perturbation may push values below zero, which the
        // clusterer is indifferent to but a linear-scale estimate rejects.
        let perturbed = DensityEstimate::from_values(
            density
                .values()
                .iter()
                .map(|&v| v + rng.gen_range(-eps..=eps))
                .collect(),
            DensityScale::Log,
            EstimatorKind::External,
        )
        .unwrap();
        let a = tomato_cluster(&graph, &density, &TomatoParams::full_persistence()).unwrap();
        let b = tomato_cluster(&graph, &perturbed, &TomatoParams::full_persistence()).unwrap();
        if !match_diagrams(&a.diagram, &b.diagram, eps) {
            failures.push(format!("trial {trial}: diagrams differ beyond eps = {eps:.3}"));
        }
    }
    report(
        outcomes,
        7,
        "stability suite",
        failures.is_empty(),
        if failures.is_empty() {
            "50 sup-norm perturbations matched within eps".into()
        } else {
            failures.join("; ")
        },
    );
}

/// Looks for a real tetrode recording (binary recording format) under
/// `LOCUST_DATA` or `data/locust.bin`; absent data skips the criterion.
fn criterion_8_real_data(outcomes: &mut Vec<Outcome>) {
    let candidate = std::env::var("LOCUST_DATA").unwrap_or_else(|_| {
        format!(
            "{}/../../data/locust.bin",
            env!("CARGO_MANIFEST_DIR")
        )
    });
    let path = std::path::Path::new(&candidate);
    if !path.exists() {
        println!("acceptance 8: real-data path: SKIP (no dataset at {candidate})");
        outcomes.push(Outcome {
            name: "real-data path",
            passed: true,
            detail: "skipped, dataset absent".into(),
        });
        return;
    }
    let run = || -> tomatosort_core::Result<(usize, usize)> {
        let rec = tomatosort_core::io::read_recording_bin(path)?;
        let (normalized, _) = mad_normalize(&rec)?;
        let set = detect_events(&normalized, 4.0, CutWindow::default())?;
        let graph = knn_graph(&set.events, 10)?;
        let mut params = DtmParams::defaults_for(set.events.dim());
        params.dim = 2.0;
        let density = log_transform(&dtm_density(&set.events, &params)?)?;
        let full = tomato_cluster(&graph, &density, &TomatoParams::full_persistence())?;
        let det = detect_n_clusters(&full.diagram, density.min_value())?;
        let out = tomato_cluster(&graph, &density, &TomatoParams::NClusters(det.k_detected))?;
        let raster = build_raster(&set, &out.labeling, rec.sampling_rate_hz())?;
        Ok((det.k_detected, raster.n_clusters()))
    };
    match run() {
        Ok((detected, rows)) => {
            let passed = detected == 6 && rows == 6;
            report(
                outcomes,
                8,
                "real-data path",
                passed,
                format!("detected {detected} clusters, raster rows {rows}"),
            );
        }
        Err(e) => report(outcomes, 8, "real-data path", false, format!("error: {e}")),
    }
}

#[test]
fn acceptance() {
    let mut outcomes = Vec::new();
    criterion_1_oracle_equivalence(&mut outcomes);
    criterion_2_worked_example(&mut outcomes);
    criterion_3_locust_recovery(&mut outcomes);
    criterion_4_superposition_robustness(&mut outcomes);
    criterion_5_low_amplitude_degradation(&mut outcomes);
    criterion_6_equivariance(&mut outcomes);
    criterion_7_stability(&mut outcomes);
    criterion_8_real_data(&mut outcomes);

    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.passed).collect();
    assert!(
        failed.is_empty(),
        "failed criteria: {}",
        failed
            .iter()
            .map(|o| format!("{} ({})", o.name, o.detail))
            .collect::<Vec<_>>()
            .join("; ")
    );
}
