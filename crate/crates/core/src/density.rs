//! Per-point density estimation: Gaussian KDE, DTM, and their log variants.
//!
//! Estimates are unnormalized: dimension-dependent constants are dropped
//! because the clustering stage only compares density values and their
//! differences, never integrates them. Densities can also be supplied
//! externally (one value per point) and passed straight to the clusterer.

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, EventMatrix};

/// Whether density values are on a linear or natural-log scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityScale {
    Linear,
    Log,
}

/// Which estimator produced the values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Kde,
    LogKde,
    Dtm,
    LogDtm,
    External,
}

/// One density value per point.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    values: Vec<f64>,
    scale: DensityScale,
    kind: EstimatorKind,
}

impl DensityEstimate {
    /// Wraps externally supplied values. Linear-scale values must be
    /// strictly positive; all values must be finite.
    pub fn from_values(values: Vec<f64>, scale: DensityScale, kind: EstimatorKind) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
            if scale == DensityScale::Linear && v <= 0.0 {
                return Err(Error::NonPositiveDensity { index: i, value: v });
            }
        }
        Ok(DensityEstimate {
            values,
            scale,
            kind,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self) -> DensityScale {
        self.scale
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// Smallest density value; the substitute for infinite deaths in
    /// prominence arithmetic.
    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Parameters of the DTM density estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtmParams {
    /// Number of nearest neighbors averaged over (the point itself excluded).
    pub k: usize,
    /// Power applied to each neighbor distance.
    pub q: f64,
    /// Intrinsic-dimension exponent in the final inverse power.
    pub dim: f64,
}

impl DtmParams {
    /// Defaults: k = 10, q = 2, dim = the ambient dimension.
    pub fn defaults_for(ambient_dim: usize) -> Self {
        DtmParams {
            k: 10,
            q: 2.0,
            dim: ambient_dim as f64,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k > n.saturating_sub(1) {
            return Err(Error::KOutOfRange { k: self.k, n });
        }
        if !(self.q > 0.0) || !self.q.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "DTM exponent q must be positive, got {}",
                self.q
            )));
        }
        if !(self.dim > 0.0) || !self.dim.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "DTM dim must be positive, got {}",
                self.dim
            )));
        }
        Ok(())
    }
}

/// Gaussian-kernel density estimate:
/// `f_i = (1/n) * sum_j exp(-|x_i - x_j|^2 / (2 h^2))`.
pub fn kde_density(points: &EventMatrix, bandwidth: f64) -> Result<DensityEstimate> {
    if points.n() == 0 {
        return Err(Error::EmptyInput("kde_density needs at least one point"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::NonPositiveBandwidth(bandwidth));
    }
    let n = points.n();
    let inv_two_h2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let pi = points.row(i);
        let mut sum = 0.0;
        for j in 0..n {
            sum += (-squared_distance(pi, points.row(j)) * inv_two_h2).exp();
        }
        // The j = i term contributes 1, so the value is at least 1/n.
        values.push(sum / n as f64);
    }
    DensityEstimate::from_values(values, DensityScale::Linear, EstimatorKind::Kde)
}

/// DTM density estimate:
/// `f_i = ((1/k) * sum_{m=1..k} d(x_i, nn_m(x_i))^q)^(-dim/q)`,
/// the k nearest neighbors excluding the point itself.
///
/// A point whose k nearest neighbors are all at distance zero has no finite
/// value and is reported as an error.
pub fn dtm_density(points: &EventMatrix, params: &DtmParams) -> Result<DensityEstimate> {
    if points.n() == 0 {
        return Err(Error::EmptyInput("dtm_density needs at least one point"));
    }
    let n = points.n();
    params.validate(n)?;
    let k = params.k;
    let mut values = Vec::with_capacity(n);
    let mut scratch: Vec<f64> = Vec::with_capacity(n - 1);
    for i in 0..n {
        scratch.clear();
        let pi = points.row(i);
        for j in 0..n {
            if j != i {
                scratch.push(squared_distance(pi, points.row(j)));
            }
        }
        scratch.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
        let mean_pow: f64 = scratch[..k]
            .iter()
            .map(|&d2| d2.sqrt().powf(params.q))
            .sum::<f64>()
            / k as f64;
        if mean_pow == 0.0 {
            return Err(Error::DegenerateDuplicates { index: i, k });
        }
        let v = mean_pow.powf(-params.dim / params.q);
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        values.push(v);
    }
    DensityEstimate::from_values(values, DensityScale::Linear, EstimatorKind::Dtm)
}

/// Elementwise natural log of a linear-scale estimate. Order-preserving.
pub fn log_transform(d: &DensityEstimate) -> Result<DensityEstimate> {
    if d.scale() == DensityScale::Log {
        return Err(Error::AlreadyLogScale);
    }
    let mut values = Vec::with_capacity(d.len());
    for (i, &v) in d.values().iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::NonPositiveDensity { index: i, value: v });
        }
        values.push(v.ln());
    }
    let kind = match d.kind() {
        EstimatorKind::Kde => EstimatorKind::LogKde,
        EstimatorKind::Dtm => EstimatorKind::LogDtm,
        other => other,
    };
    DensityEstimate::from_values(values, DensityScale::Log, kind)
}

/// Scott-style default bandwidth: `n^(-1/(D+4))` times the mean
/// per-coordinate standard deviation. Falls back to 1.0 for degenerate
/// (constant) data so the KDE stays well defined.
pub fn scott_bandwidth(points: &EventMatrix) -> f64 {
    let n = points.n();
    let d = points.dim();
    if n < 2 {
        return 1.0;
    }
    let mut mean_sd = 0.0;
    for c in 0..d {
        let mut mean = 0.0;
        for i in 0..n {
            mean += points.row(i)[c];
        }
        mean /= n as f64;
        let mut var = 0.0;
        for i in 0..n {
            let dv = points.row(i)[c] - mean;
            var += dv * dv;
        }
        mean_sd += (var / (n - 1) as f64).sqrt();
    }
    mean_sd /= d as f64;
    let h = (n as f64).powf(-1.0 / (d as f64 + 4.0)) * mean_sd;
    if h > 0.0 && h.is_finite() {
        h
    } else {
        1.0
    }
}
