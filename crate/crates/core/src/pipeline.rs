//! Raw-recording preprocessing: MAD normalization, threshold-crossing
//! extremum detection, fixed-width cuts on every site, and the raster
//! assembled after clustering.
//!
//! Input recordings are assumed band-pass filtered already; this stage only
//! normalizes amplitudes into noise units and slices events out.

use crate::error::{Error, Result};
use crate::geometry::EventMatrix;
use crate::tomato::ClusterLabeling;

/// Consistency constant calibrating the median absolute deviation to the
/// standard deviation of a Gaussian.
pub const MAD_TO_SD: f64 = 1.4826;

/// A multi-site recording sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    sampling_rate_hz: f64,
    /// One row per site, all of equal length.
    data: Vec<Vec<f64>>,
}

impl Recording {
    pub fn new(data: Vec<Vec<f64>>, sampling_rate_hz: f64) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyInput("recording needs at least one site"));
        }
        let len = data[0].len();
        for (s, site) in data.iter().enumerate() {
            if site.len() != len {
                return Err(Error::LengthMismatch {
                    left: site.len(),
                    right: len,
                });
            }
            for (i, &v) in site.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: s, col: i });
                }
            }
        }
        if !(sampling_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        Ok(Recording {
            sampling_rate_hz,
            data,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.data.len()
    }

    pub fn n_samples(&self) -> usize {
        self.data[0].len()
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn site(&self, s: usize) -> &[f64] {
        &self.data[s]
    }

    pub fn sites(&self) -> &[Vec<f64>] {
        &self.data
    }
}

/// Cut geometry around a detected extremum: `pre` samples before it,
/// `post` samples from it onward. `pre + post` is the per-site cut length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutWindow {
    pub pre: usize,
    pub post: usize,
}

impl CutWindow {
    pub fn len(&self) -> usize {
        self.pre + self.post
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for CutWindow {
    /// 45-sample cuts with the valley a third of the way in.
    fn default() -> Self {
        CutWindow { pre: 15, post: 30 }
    }
}

/// Detected events: the cut matrix plus the detection sample index of each
/// event, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSet {
    pub events: EventMatrix,
    pub times: Vec<usize>,
    pub window: CutWindow,
}

/// Per-cluster spike times in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    rows: Vec<Vec<f64>>,
}

impl Raster {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_clusters(&self) -> usize {
        self.rows.len()
    }

    pub fn total_spikes(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Divides every site by `1.4826 * median(|x - median(x)|)`, returning the
/// normalized recording and the per-site divisor. A site with zero MAD
/// (constant signal) is an error.
pub fn mad_normalize(rec: &Recording) -> Result<(Recording, Vec<f64>)> {
    let mut scales = Vec::with_capacity(rec.n_sites());
    let mut normalized = Vec::with_capacity(rec.n_sites());
    for (s, site) in rec.sites().iter().enumerate() {
        let mut work = site.clone();
        let med = median(&mut work);
        for v in &mut work {
            *v = (*v - med).abs();
        }
        let mad = median(&mut work);
        if mad == 0.0 {
            return Err(Error::ZeroMad { site: s });
        }
        let scale = MAD_TO_SD * mad;
        normalized.push(site.iter().map(|&v| v / scale).collect());
        scales.push(scale);
    }
    Ok((Recording::new(normalized, rec.sampling_rate_hz())?, scales))
}

/// Detects events: samples where |x| exceeds `threshold` on some site and is
/// a local extremum of |x| there. Detections closer than one window length
/// keep only the largest extremum; cuts overlapping the recording borders
/// are dropped. Returns the cut events (sites concatenated) and their
/// detection times.
pub fn detect_events(rec: &Recording, threshold: f64, window: CutWindow) -> Result<EventSet> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "detection threshold must be positive, got {threshold}"
        )));
    }
    let n_samples = rec.n_samples();
    if window.is_empty() || window.len() > n_samples {
        return Err(Error::WindowTooLarge {
            window: window.len(),
            samples: n_samples,
        });
    }

    // Candidate extrema per sample: the largest |x| over sites flagging it.
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    for t in 1..n_samples.saturating_sub(1) {
        let mut best: Option<f64> = None;
        for site in rec.sites() {
            let a = site[t].abs();
            if a > threshold && a > site[t - 1].abs() && a >= site[t + 1].abs() {
                best = Some(best.map_or(a, |b: f64| b.max(a)));
            }
        }
        if let Some(a) = best {
            candidates.push((t, a));
        }
    }

    // Dead time of one window length, left to right, larger extremum wins.
    let dead = window.len();
    let mut retained: Vec<(usize, f64)> = Vec::new();
    for (t, a) in candidates {
        loop {
            match retained.last() {
                Some(&(t_prev, a_prev)) if t - t_prev < dead => {
                    if a > a_prev {
                        retained.pop();
                    } else {
                        break;
                    }
                }
                _ => {
                    retained.push((t, a));
                    break;
                }
            }
        }
    }

    let mut times = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (t, _) in retained {
        if t < window.pre || t + window.post > n_samples {
            continue;
        }
        let mut row = Vec::with_capacity(rec.n_sites() * window.len());
        for site in rec.sites() {
            row.extend_from_slice(&site[t - window.pre..t + window.post]);
        }
        rows.push(row);
        times.push(t);
    }
    let dim = rec.n_sites() * window.len();
    let events = EventMatrix::new(rows.len(), dim, rows.into_iter().flatten().collect())?;
    Ok(EventSet {
        events,
        times,
        window,
    })
}

/// Groups detection times by cluster label, in seconds.
pub fn build_raster(events: &EventSet, labels: &ClusterLabeling, rate_hz: f64) -> Result<Raster> {
    if labels.labels().len() != events.times.len() {
        return Err(Error::LengthMismatch {
            left: labels.labels().len(),
            right: events.times.len(),
        });
    }
    if !(rate_hz > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sampling rate must be positive, got {rate_hz}"
        )));
    }
    let mut rows = vec![Vec::new(); labels.k()];
    for (&t, &label) in events.times.iter().zip(labels.labels()) {
        rows[label].push(t as f64 / rate_hz);
    }
    for row in &mut rows {
        row.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    }
    Ok(Raster { rows })
}
