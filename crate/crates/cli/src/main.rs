//! Command-line front end binding the clustering library into complete
//! workflows. Five subcommands:
//!
//! - `simulate`: synthetic tetrode events plus ground truth;
//! - `diagram`: first clustering pass, persistence diagram and automatic
//!   cluster-count detection;
//! - `cluster`: second pass at a chosen cluster count or merge threshold;
//! - `sort`: raw recording to raster, end to end;
//! - `evaluate`: confusion matrix and summary against ground truth.
//!
//! Every run echoes its fully resolved configuration as JSON (stdout and a
//! file in the output directory), so a run is reproducible from the echo
//! alone. Values come from CLI flags first, then the `--config` JSON file,
//! then built-in defaults. Errors print as `error[CODE]: message` on stderr
//! with exit code 1.

mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::*;
use std::path::{Path, PathBuf};
use tomatosort_core::density::{
    dtm_density, kde_density, log_transform, DensityEstimate, DensityScale, DtmParams,
    EstimatorKind,
};
use tomatosort_core::diagram::detect_n_clusters;
use tomatosort_core::error::{Error, Result};
use tomatosort_core::evalsort::{cluster_medians, confusion};
use tomatosort_core::geometry::{knn_graph, rips_graph, EventMatrix, NeighborhoodGraph};
use tomatosort_core::io;
use tomatosort_core::pipeline::{build_raster, detect_events, mad_normalize, CutWindow, Recording};
use tomatosort_core::spikesim::{simulate, SimConfig};
use tomatosort_core::tomato::{tomato_cluster, TomatoOutput, TomatoParams};

#[derive(Parser)]
#[command(
    name = "tomatosort",
    about = "Persistence-based mode-seeking clustering for spike sorting",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic tetrode events with ground truth.
    Simulate(SimulateArgs),
    /// First pass: persistence diagram and detected cluster count.
    Diagram(DiagramArgs),
    /// Second pass: cluster labels at a given count or threshold.
    Cluster(ClusterArgs),
    /// Full pipeline: recording in, raster out.
    Sort(SortArgs),
    /// Confusion matrix and summary against ground truth.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityChoice {
    Kde,
    LogKde,
    Dtm,
    LogDtm,
    External,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphChoice {
    Knn,
    Rips,
}

/// Flags shared by every subcommand that clusters events.
#[derive(Args, Debug)]
struct PipelineFlags {
    /// Density estimator.
    #[arg(long, value_enum)]
    density: Option<DensityChoice>,
    /// Neighbor count for the DTM estimator.
    #[arg(long)]
    k_dtm: Option<usize>,
    /// Distance exponent for the DTM estimator.
    #[arg(long)]
    q: Option<f64>,
    /// Intrinsic-dimension exponent for the DTM estimator
    /// (defaults to the ambient dimension; use 2 for spike events).
    #[arg(long)]
    dim: Option<f64>,
    /// KDE bandwidth (defaults to a Scott-style rule).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Externally computed density, one value per event (single-column CSV);
    /// requires --density external.
    #[arg(long)]
    density_file: Option<PathBuf>,
    /// Neighborhood graph type.
    #[arg(long, value_enum)]
    graph: Option<GraphChoice>,
    /// Neighbor count for the k-NN graph.
    #[arg(long)]
    k: Option<usize>,
    /// Radius for the Rips graph.
    #[arg(long)]
    radius: Option<f64>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n_neurons: Option<usize>,
    #[arg(long)]
    events_per_neuron: Option<usize>,
    /// Site amplitudes are drawn uniformly from [0, amp-max].
    #[arg(long)]
    amp_max: Option<f64>,
    /// Fraction of events that superpose two neurons.
    #[arg(long)]
    superposition_freq: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_sites: Option<usize>,
    #[arg(long)]
    samples_per_site: Option<usize>,
    /// Write events in the raw binary format instead of CSV.
    #[arg(long)]
    binary: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct DiagramArgs {
    /// Event file (CSV one row per event, or the raw binary format for a
    /// .bin extension).
    input: PathBuf,
    /// Skip a header row when reading event CSV.
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    input: PathBuf,
    #[arg(long)]
    header: bool,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Target cluster count (mutually exclusive with --tau).
    #[arg(long)]
    n_clusters: Option<usize>,
    /// Merge threshold; "inf" merges everything (mutually exclusive with
    /// --n-clusters).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct SortArgs {
    /// Recording file: .bin for the raw binary format, anything else is
    /// read as multi-column CSV (one column per site).
    input: PathBuf,
    /// Sampling rate in Hz for CSV recordings (binary recordings carry it).
    #[arg(long)]
    rate: Option<f64>,
    /// Detection threshold in MAD-normalized units.
    #[arg(long)]
    threshold: Option<f64>,
    /// Samples kept before a detected extremum.
    #[arg(long)]
    pre: Option<usize>,
    /// Samples kept from a detected extremum onward.
    #[arg(long)]
    post: Option<usize>,
    #[command(flatten)]
    pipeline: PipelineFlags,
    /// Cluster count override; detected from the diagram when absent.
    #[arg(long)]
    n_clusters: Option<usize>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Predicted labels (single-column CSV).
    labels: PathBuf,
    /// Ground-truth CSV (event_index,true_label,is_superposition).
    ground_truth: PathBuf,
    /// Diagonal floor for counting a neuron as identified.
    #[arg(long)]
    min_diag: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Diagram(args) => run_diagram(args),
        Command::Cluster(args) => run_cluster(args),
        Command::Sort(args) => run_sort(args),
        Command::Evaluate(args) => run_evaluate(args),
    };
    if let Err(e) = result {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(1);
    }
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn echo_config<T: serde::Serialize>(out_dir: &Path, name: &str, cfg: &T) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(cfg)?;
    std::fs::write(out_dir.join(name), &text)?;
    // A closed stdout (e.g. piped through head) must not fail the run.
    let _ = writeln!(std::io::stdout(), "{text}");
    Ok(())
}

fn read_events(path: &Path, header: bool) -> Result<EventMatrix> {
    if path.extension().is_some_and(|e| e == "bin") {
        io::read_events_bin(path)
    } else {
        io::read_events_csv(path, header)
    }
}

/// Builds the density estimate and the neighborhood graph that every
/// clustering subcommand shares.
fn density_and_graph(
    events: &EventMatrix,
    cfg: &PipelineConfig,
) -> Result<(DensityEstimate, NeighborhoodGraph)> {
    let density = match cfg.density {
        DensityChoice::Kde => kde_density(events, cfg.bandwidth)?,
        DensityChoice::LogKde => log_transform(&kde_density(events, cfg.bandwidth)?)?,
        DensityChoice::Dtm | DensityChoice::LogDtm => {
            let params = DtmParams {
                k: cfg.k_dtm,
                q: cfg.q,
                dim: cfg.dim,
            };
            let linear = dtm_density(events, &params)?;
            if cfg.density == DensityChoice::LogDtm {
                log_transform(&linear)?
            } else {
                linear
            }
        }
        DensityChoice::External => {
            let path = cfg.density_file.as_ref().ok_or_else(|| {
                Error::InvalidParameter(
                    "--density external requires --density-file".into(),
                )
            })?;
            let values = io::read_density_csv(path)?;
            if values.len() != events.n() {
                return Err(Error::LengthMismatch {
                    left: values.len(),
                    right: events.n(),
                });
            }
            // External densities may already be log scale; accept any
            // finite values.
            DensityEstimate::from_values(values, DensityScale::Log, EstimatorKind::External)?
        }
    };
    let graph = match cfg.graph {
        GraphChoice::Knn => knn_graph(events, cfg.k)?,
        GraphChoice::Rips => {
            let radius = cfg.radius.ok_or_else(|| {
                Error::InvalidParameter("--graph rips requires --radius".into())
            })?;
            rips_graph(events, radius)?
        }
    };
    Ok((density, graph))
}

fn run_simulate(args: SimulateArgs) -> Result<()> {
    let file: SimulateFileConfig = load_config(args.config.as_deref())?;
    let cfg = SimConfig {
        n_neurons: args.n_neurons.or(file.n_neurons).unwrap_or(3),
        events_per_neuron: args.events_per_neuron.or(file.events_per_neuron).unwrap_or(100),
        amp_max: args.amp_max.or(file.amp_max).unwrap_or(20.0),
        superposition_freq: args
            .superposition_freq
            .or(file.superposition_freq)
            .unwrap_or(0.0),
        noise_sd: args.noise_sd.or(file.noise_sd).unwrap_or(1.0),
        rng_seed: args.seed.or(file.seed).unwrap_or(0),
        n_sites: args.n_sites.or(file.n_sites).unwrap_or(4),
        samples_per_site: args.samples_per_site.or(file.samples_per_site).unwrap_or(45),
    };
    let binary = args.binary || file.binary.unwrap_or(false);
    ensure_out_dir(&args.out_dir)?;

    let (events, truth) = simulate(&cfg)?;
    let events_path = if binary {
        let p = args.out_dir.join("events.bin");
        io::write_events_bin(&p, &events)?;
        p
    } else {
        let p = args.out_dir.join("events.csv");
        io::write_events_csv(&p, &events)?;
        p
    };
    io::write_ground_truth_csv(&args.out_dir.join("ground_truth.csv"), &truth)?;

    let echo = SimulateEcho {
        command: "simulate",
        config: &cfg,
        events_file: events_path.display().to_string(),
        amplitudes: &truth.amplitudes,
    };
    echo_config(&args.out_dir, "simulate_config.json", &echo)?;
    Ok(())
}

fn run_diagram(args: DiagramArgs) -> Result<()> {
    let file: PipelineFileConfig = load_config(args.config.as_deref())?;
    let events = read_events(&args.input, args.header)?;
    let cfg = PipelineConfig::resolve(&args.pipeline, &file, &events);
    ensure_out_dir(&args.out_dir)?;

    let (density, graph) = density_and_graph(&events, &cfg)?;
    let out = tomato_cluster(&graph, &density, &TomatoParams::full_persistence())?;
    let detection = detect_n_clusters(&out.diagram, density.min_value())?;

    io::write_diagram_json(&args.out_dir.join("diagram.json"), &out.diagram)?;
    io::write_json(&args.out_dir.join("detection.json"), &detection)?;

    let echo = DiagramEcho {
        command: "diagram",
        input: args.input.display().to_string(),
        header: args.header,
        pipeline: &cfg,
        n_events: events.n(),
        n_diagram_points: out.diagram.len(),
        k_detected: detection.k_detected,
    };
    echo_config(&args.out_dir, "diagram_config.json", &echo)?;
    Ok(())
}

fn run_cluster(args: ClusterArgs) -> Result<()> {
    let file: ClusterFileConfig = load_config(args.config.as_deref())?;
    let n_clusters = args.n_clusters.or(file.n_clusters);
    let tau = args.tau.or(file.tau);
    let params = match (n_clusters, tau) {
        (Some(k), None) => TomatoParams::NClusters(k),
        (None, Some(t)) => TomatoParams::Tau(t),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidParameter(
                "--n-clusters and --tau are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "one of --n-clusters or --tau is required".into(),
            ))
        }
    };
    let events = read_events(&args.input, args.header)?;
    let cfg = PipelineConfig::resolve(&args.pipeline, &file.pipeline, &events);
    ensure_out_dir(&args.out_dir)?;

    let (density, graph) = density_and_graph(&events, &cfg)?;
    let out = tomato_cluster(&graph, &density, &params)?;
    if let Some(components) = out.clamped_to_components {
        eprintln!(
            "warning: requested cluster count is below the {components} graph \
             components; returning {components} clusters"
        );
    }

    io::write_labels_csv(&args.out_dir.join("labels.csv"), out.labeling.labels())?;
    io::write_diagram_json(&args.out_dir.join("diagram.json"), &out.diagram)?;
    let medians = cluster_medians(&events, &out.labeling)?;
    io::write_events_csv(
        &args.out_dir.join("medians.csv"),
        &EventMatrix::from_rows(medians)?,
    )?;

    let echo = ClusterEcho {
        command: "cluster",
        input: args.input.display().to_string(),
        header: args.header,
        pipeline: &cfg,
        n_clusters,
        tau_requested: tau,
        tau_used: out.tau,
        achieved_clusters: out.labeling.k(),
        clamped_to_components: out.clamped_to_components,
        roots: out.labeling.roots().to_vec(),
    };
    echo_config(&args.out_dir, "cluster_config.json", &echo)?;
    Ok(())
}

fn run_sort(args: SortArgs) -> Result<()> {
    let file: SortFileConfig = load_config(args.config.as_deref())?;
    let rate = args.rate.or(file.rate).unwrap_or(15_000.0);
    let threshold = args.threshold.or(file.threshold).unwrap_or(4.0);
    let window = CutWindow {
        pre: args.pre.or(file.pre).unwrap_or(15),
        post: args.post.or(file.post).unwrap_or(30),
    };
    let n_clusters_override = args.n_clusters.or(file.n_clusters);

    let recording: Recording = if args.input.extension().is_some_and(|e| e == "bin") {
        io::read_recording_bin(&args.input)?
    } else {
        io::read_recording_csv(&args.input, rate)?
    };
    ensure_out_dir(&args.out_dir)?;

    let (normalized, scales) = mad_normalize(&recording)?;
    let set = detect_events(&normalized, threshold, window)?;
    if set.events.n() == 0 {
        // Nothing detected: still a success, with empty outputs.
        io::write_labels_csv(&args.out_dir.join("labels.csv"), &[])?;
        std::fs::write(args.out_dir.join("raster.csv"), "")?;
        let echo = SortEcho {
            command: "sort",
            input: args.input.display().to_string(),
            rate_hz: recording.sampling_rate_hz(),
            threshold,
            pre: window.pre,
            post: window.post,
            mad_scales: scales,
            pipeline: None,
            n_events: 0,
            k_detected: None,
            n_clusters: 0,
        };
        echo_config(&args.out_dir, "sort_config.json", &echo)?;
        return Ok(());
    }

    let cfg = PipelineConfig::resolve(&args.pipeline, &file.pipeline, &set.events);
    let (density, graph) = density_and_graph(&set.events, &cfg)?;
    let full = tomato_cluster(&graph, &density, &TomatoParams::full_persistence())?;
    let detection = detect_n_clusters(&full.diagram, density.min_value())?;
    let k = n_clusters_override.unwrap_or(detection.k_detected);
    let out: TomatoOutput = tomato_cluster(&graph, &density, &TomatoParams::NClusters(k))?;
    if let Some(components) = out.clamped_to_components {
        eprintln!(
            "warning: cluster count {k} is below the {components} graph components; \
             returning {components} clusters"
        );
    }
    let raster = build_raster(&set, &out.labeling, recording.sampling_rate_hz())?;

    io::write_events_csv(&args.out_dir.join("events.csv"), &set.events)?;
    io::write_diagram_json(&args.out_dir.join("diagram.json"), &full.diagram)?;
    io::write_json(&args.out_dir.join("detection.json"), &detection)?;
    io::write_labels_csv(&args.out_dir.join("labels.csv"), out.labeling.labels())?;
    io::write_raster_csv(&args.out_dir.join("raster.csv"), &raster)?;

    let echo = SortEcho {
        command: "sort",
        input: args.input.display().to_string(),
        rate_hz: recording.sampling_rate_hz(),
        threshold,
        pre: window.pre,
        post: window.post,
        mad_scales: scales,
        pipeline: Some(&cfg),
        n_events: set.events.n(),
        k_detected: Some(detection.k_detected),
        n_clusters: out.labeling.k(),
    };
    echo_config(&args.out_dir, "sort_config.json", &echo)?;
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let file: EvaluateFileConfig = load_config(args.config.as_deref())?;
    let min_diag = args.min_diag.or(file.min_diag).unwrap_or(0.5);
    let labels = io::read_labels_csv(&args.labels)?;
    let (truth, _superpositions) = io::read_ground_truth_csv(&args.ground_truth)?;
    ensure_out_dir(&args.out_dir)?;

    let matrix = confusion(&truth, &labels)?;
    io::write_confusion_csv(&args.out_dir.join("confusion.csv"), &matrix)?;
    let summary = io::EvalSummary::from_confusion(&matrix, min_diag);
    io::write_json(&args.out_dir.join("summary.json"), &summary)?;

    let echo = EvaluateEcho {
        command: "evaluate",
        labels: args.labels.display().to_string(),
        ground_truth: args.ground_truth.display().to_string(),
        min_diag,
        summary: &summary,
    };
    echo_config(&args.out_dir, "evaluate_config.json", &echo)?;
    Ok(())
}
