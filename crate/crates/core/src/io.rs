//! File formats: event matrices (CSV and raw binary), density vectors,
//! labels, persistence diagrams, recordings, rasters, ground truth, and
//! evaluation summaries.
//!
//! Binary events: an 8-byte header of two little-endian u32 (n, dim)
//! followed by n*dim little-endian f64 in row-major order.
//!
//! Binary recordings: two little-endian u32 (n_sites, n_samples) and one
//! little-endian f64 (sampling rate in Hz), followed by the samples site by
//! site, each a little-endian f64.

use crate::density::DensityEstimate;
use crate::error::{Error, Result};
use crate::evalsort::ConfusionMatrix;
use crate::geometry::EventMatrix;
use crate::pipeline::{Raster, Recording};
use crate::spikesim::GroundTruth;
use crate::tomato::{DiagramPoint, PersistenceDiagram};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

// ---------------------------------------------------------------- events

/// Reads an event matrix from CSV, one row per event. `has_header` skips
/// the first row.
pub fn read_events_csv(path: &Path, has_header: bool) -> Result<EventMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.trim().parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::BadFormat(format!("bad float in event CSV: {e}")))?);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("event CSV has no rows"));
    }
    EventMatrix::from_rows(rows)
}

pub fn write_events_csv(path: &Path, events: &EventMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in events.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_bin(path: &Path) -> Result<EventMatrix> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 8];
    r.read_exact(&mut header)
        .map_err(|_| Error::BadFormat("event binary too short for header".into()))?;
    let n = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n * dim * 8 {
        return Err(Error::BadFormat(format!(
            "event binary payload is {} bytes, expected {} (n = {n}, dim = {dim})",
            payload.len(),
            n * dim * 8
        )));
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    EventMatrix::new(n, dim, data)
}

pub fn write_events_bin(path: &Path, events: &EventMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(events.n() as u32).to_le_bytes())?;
    w.write_all(&(events.dim() as u32).to_le_bytes())?;
    for v in events.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

// --------------------------------------------------------------- density

/// Single-column CSV of density values (externally supplied densities).
pub fn read_density_csv(path: &Path) -> Result<Vec<f64>> {
    let content = std::fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(
            line.parse::<f64>()
                .map_err(|e| Error::BadFormat(format!("bad density on line {}: {e}", i + 1)))?,
        );
    }
    if values.is_empty() {
        return Err(Error::EmptyInput("density CSV has no values"));
    }
    Ok(values)
}

pub fn write_density_csv(path: &Path, density: &DensityEstimate) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in density.values() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- labels

/// Single-column CSV of integer cluster labels, aligned with event rows.
pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let content = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(
            line.parse::<usize>()
                .map_err(|e| Error::BadFormat(format!("bad label on line {}: {e}", i + 1)))?,
        );
    }
    Ok(labels)
}

pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

// --------------------------------------------------------------- diagram

#[derive(Serialize, Deserialize)]
struct DiagramPointJson {
    birth: f64,
    /// `None` encodes a death at negative infinity.
    death: Option<f64>,
}

/// JSON array of `{birth, death}` objects; `death: null` encodes an
/// infinite death.
pub fn write_diagram_json(path: &Path, diagram: &PersistenceDiagram) -> Result<()> {
    let points: Vec<DiagramPointJson> = diagram
        .points()
        .iter()
        .map(|p| DiagramPointJson {
            birth: p.birth,
            death: if p.is_essential() { None } else { Some(p.death) },
        })
        .collect();
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, &points)?;
    Ok(())
}

pub fn read_diagram_json(path: &Path) -> Result<PersistenceDiagram> {
    let r = BufReader::new(File::open(path)?);
    let points: Vec<DiagramPointJson> = serde_json::from_reader(r)?;
    Ok(PersistenceDiagram::new(
        points
            .into_iter()
            .map(|p| DiagramPoint {
                birth: p.birth,
                death: p.death.unwrap_or(f64::NEG_INFINITY),
            })
            .collect(),
    ))
}

// ------------------------------------------------------------- recording

pub fn read_recording_bin(path: &Path) -> Result<Recording> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::BadFormat("recording binary too short for header".into()))?;
    let n_sites = u32::from_le_bytes(header[0..4].try_into().unwrap()) as usize;
    let n_samples = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let rate = f64::from_le_bytes(header[8..16].try_into().unwrap());
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != n_sites * n_samples * 8 {
        return Err(Error::BadFormat(format!(
            "recording payload is {} bytes, expected {}",
            payload.len(),
            n_sites * n_samples * 8
        )));
    }
    let mut sites = Vec::with_capacity(n_sites);
    for s in 0..n_sites {
        let start = s * n_samples * 8;
        let site: Vec<f64> = payload[start..start + n_samples * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        sites.push(site);
    }
    Recording::new(sites, rate)
}

pub fn write_recording_bin(path: &Path, rec: &Recording) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(rec.n_sites() as u32).to_le_bytes())?;
    w.write_all(&(rec.n_samples() as u32).to_le_bytes())?;
    w.write_all(&rec.sampling_rate_hz().to_le_bytes())?;
    for s in 0..rec.n_sites() {
        for v in rec.site(s) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Multi-column CSV, one column per site, one row per sample. The sampling
/// rate is not stored in the CSV and must be supplied.
pub fn read_recording_csv(path: &Path, rate_hz: f64) -> Result<Recording> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut sites: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        if sites.is_empty() {
            sites = vec![Vec::new(); record.len()];
        }
        if record.len() != sites.len() {
            return Err(Error::BadFormat(format!(
                "recording CSV row with {} columns, expected {}",
                record.len(),
                sites.len()
            )));
        }
        for (s, field) in record.iter().enumerate() {
            sites[s].push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::BadFormat(format!("bad sample: {e}")))?,
            );
        }
    }
    if sites.is_empty() {
        return Err(Error::EmptyInput("recording CSV has no rows"));
    }
    Recording::new(sites, rate_hz)
}

pub fn write_recording_csv(path: &Path, rec: &Recording) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for t in 0..rec.n_samples() {
        let line: Vec<String> = (0..rec.n_sites())
            .map(|s| format!("{}", rec.site(s)[t]))
            .collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- raster

/// CSV rows of `cluster_id,time_seconds`, sorted by cluster then time.
pub fn write_raster_csv(path: &Path, raster: &Raster) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (cluster, times) in raster.rows().iter().enumerate() {
        for t in times {
            writeln!(w, "{cluster},{t}")?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------- ground truth

/// CSV with header `event_index,true_label,is_superposition`.
pub fn write_ground_truth_csv(path: &Path, truth: &GroundTruth) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "event_index,true_label,is_superposition")?;
    for (i, (&label, &sup)) in truth
        .labels
        .iter()
        .zip(&truth.is_superposition)
        .enumerate()
    {
        writeln!(w, "{i},{label},{}", u8::from(sup))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads back the `(labels, is_superposition)` columns.
pub fn read_ground_truth_csv(path: &Path) -> Result<(Vec<usize>, Vec<bool>)> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let mut labels = Vec::new();
    let mut superpositions = Vec::new();
    for record in reader.records() {
        let record = record?;
        if record.len() < 3 {
            return Err(Error::BadFormat(
                "ground truth CSV needs 3 columns".into(),
            ));
        }
        labels.push(
            record[1]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::BadFormat(format!("bad true_label: {e}")))?,
        );
        let flag = record[2].trim();
        superpositions.push(flag == "1" || flag.eq_ignore_ascii_case("true"));
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("ground truth CSV has no rows"));
    }
    Ok((labels, superpositions))
}

// ------------------------------------------------------------ evaluation

/// Confusion CSV: header `neuron` plus one column per cluster (the matched
/// cluster id, or `pad` for zero padding), then one row per true neuron.
pub fn write_confusion_csv(path: &Path, m: &ConfusionMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let header: Vec<String> = std::iter::once("neuron".to_string())
        .chain(m.col_clusters().iter().map(|c| match c {
            Some(id) => format!("{id}"),
            None => "pad".to_string(),
        }))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for i in 0..m.n_true() {
        let cells: Vec<String> = std::iter::once(format!("{}", m.true_ids()[i]))
            .chain(m.row(i).iter().map(|v| format!("{v}")))
            .collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Evaluation summary.
#[derive(Debug, Serialize, Deserialize)]
pub struct EvalSummary {
    pub n_true_neurons: usize,
    pub n_clusters: usize,
    pub diagonal_weight: f64,
    pub n_identified: usize,
    pub identified_neurons: Vec<usize>,
    pub diagonal_weight_identified: f64,
    pub unmatched_neurons: Vec<usize>,
}

impl EvalSummary {
    pub fn from_confusion(m: &ConfusionMatrix, min_diag: f64) -> Self {
        let identified = m.identified(min_diag);
        EvalSummary {
            n_true_neurons: m.n_true(),
            n_clusters: m.col_clusters().iter().flatten().count(),
            diagonal_weight: m.diagonal_weight(),
            n_identified: identified.len(),
            diagonal_weight_identified: m.diagonal_weight_over(&identified),
            identified_neurons: identified,
            unmatched_neurons: m.unmatched_neurons(),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}
