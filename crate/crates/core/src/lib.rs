//! Persistence-based mode-seeking clustering with a spike-sorting toolkit.
//!
//! The clusterer builds directed trees on a neighborhood graph by walking
//! each point to its highest-density neighbor, then merges trees whose peak
//! prominence falls below a threshold, recording every merge in a
//! 0-dimensional persistence diagram. Cluster count selection reads the
//! diagram: points far from the diagonal are real modes, the near-diagonal
//! cloud is noise.
//!
//! Around the clusterer sit the pieces needed to run it on extracellular
//! recordings end to end:
//!
//! - [`geometry`]: event storage, k-NN and Rips graphs;
//! - [`density`]: KDE and DTM estimators with log variants;
//! - [`tomato`]: the clustering sweep and persistence diagram;
//! - [`diagram`]: cluster-count detection and diagram matching;
//! - [`spikesim`]: synthetic tetrode events with ground truth;
//! - [`pipeline`]: MAD normalization, event detection, raster assembly;
//! - [`evalsort`]: confusion matrices and identified-neuron counts;
//! - [`io`]: the CSV/JSON/binary formats shared by the CLI.

pub mod density;
pub mod diagram;
pub mod error;
pub mod evalsort;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod spikesim;
pub mod tomato;

pub use error::{Error, Result};
