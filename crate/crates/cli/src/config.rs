//! Config-file structures and flag resolution. Every field in a config file
//! is optional; CLI flags win over file values, and built-in defaults fill
//! the rest. The resolved configuration is what gets echoed.

use crate::{DensityChoice, GraphChoice, PipelineFlags};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tomatosort_core::density::scott_bandwidth;
use tomatosort_core::error::Result;
use tomatosort_core::geometry::EventMatrix;
use tomatosort_core::io::EvalSummary;
use tomatosort_core::spikesim::SimConfig;

pub fn load_config<T: Default + for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Ok(serde_json::from_str(&text)?)
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFileConfig {
    pub n_neurons: Option<usize>,
    pub events_per_neuron: Option<usize>,
    pub amp_max: Option<f64>,
    pub superposition_freq: Option<f64>,
    pub noise_sd: Option<f64>,
    pub seed: Option<u64>,
    pub n_sites: Option<usize>,
    pub samples_per_site: Option<usize>,
    pub binary: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFileConfig {
    pub density: Option<DensityChoice>,
    pub k_dtm: Option<usize>,
    pub q: Option<f64>,
    pub dim: Option<f64>,
    pub bandwidth: Option<f64>,
    pub density_file: Option<PathBuf>,
    pub graph: Option<GraphChoice>,
    pub k: Option<usize>,
    pub radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterFileConfig {
    #[serde(flatten)]
    pub pipeline: PipelineFileConfig,
    pub n_clusters: Option<usize>,
    pub tau: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SortFileConfig {
    #[serde(flatten)]
    pub pipeline: PipelineFileConfig,
    pub rate: Option<f64>,
    pub threshold: Option<f64>,
    pub pre: Option<usize>,
    pub post: Option<usize>,
    pub n_clusters: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateFileConfig {
    pub min_diag: Option<f64>,
}

/// Fully resolved density and graph settings.
#[derive(Debug, Serialize)]
pub struct PipelineConfig {
    pub density: DensityChoice,
    pub k_dtm: usize,
    pub q: f64,
    pub dim: f64,
    pub bandwidth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_file: Option<PathBuf>,
    pub graph: GraphChoice,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl PipelineConfig {
    /// Flags over file values over defaults: log-DTM density with
    /// k_dtm = 10, q = 2, dim = ambient dimension; k-NN graph with k = 10;
    /// Scott-rule bandwidth.
    pub fn resolve(
        flags: &PipelineFlags,
        file: &PipelineFileConfig,
        events: &EventMatrix,
    ) -> Self {
        PipelineConfig {
            density: flags
                .density
                .or(file.density)
                .unwrap_or(DensityChoice::LogDtm),
            k_dtm: flags.k_dtm.or(file.k_dtm).unwrap_or(10),
            q: flags.q.or(file.q).unwrap_or(2.0),
            dim: flags.dim.or(file.dim).unwrap_or(events.dim() as f64),
            bandwidth: flags
                .bandwidth
                .or(file.bandwidth)
                .unwrap_or_else(|| scott_bandwidth(events)),
            density_file: flags
                .density_file
                .clone()
                .or_else(|| file.density_file.clone()),
            graph: flags.graph.or(file.graph).unwrap_or(GraphChoice::Knn),
            k: flags.k.or(file.k).unwrap_or(10),
            radius: flags.radius.or(file.radius),
        }
    }
}

// Echo structures: the resolved configuration plus the run's key outputs.

#[derive(Serialize)]
pub struct SimulateEcho<'a> {
    pub command: &'static str,
    #[serde(flatten)]
    pub config: &'a SimConfig,
    pub events_file: String,
    pub amplitudes: &'a Vec<Vec<f64>>,
}

#[derive(Serialize)]
pub struct DiagramEcho<'a> {
    pub command: &'static str,
    pub input: String,
    pub header: bool,
    #[serde(flatten)]
    pub pipeline: &'a PipelineConfig,
    pub n_events: usize,
    pub n_diagram_points: usize,
    pub k_detected: usize,
}

#[derive(Serialize)]
pub struct ClusterEcho<'a> {
    pub command: &'static str,
    pub input: String,
    pub header: bool,
    #[serde(flatten)]
    pub pipeline: &'a PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_requested: Option<f64>,
    pub tau_used: f64,
    pub achieved_clusters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamped_to_components: Option<usize>,
    pub roots: Vec<usize>,
}

#[derive(Serialize)]
pub struct SortEcho<'a> {
    pub command: &'static str,
    pub input: String,
    pub rate_hz: f64,
    pub threshold: f64,
    pub pre: usize,
    pub post: usize,
    pub mad_scales: Vec<f64>,
    #[serde(flatten)]
    pub pipeline: Option<&'a PipelineConfig>,
    pub n_events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_detected: Option<usize>,
    pub n_clusters: usize,
}

#[derive(Serialize)]
pub struct EvaluateEcho<'a> {
    pub command: &'static str,
    pub labels: String,
    pub ground_truth: String,
    pub min_diag: f64,
    pub summary: &'a EvalSummary,
}
