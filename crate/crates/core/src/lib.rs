//! Cell segmentation with random-fern pixel classification and graph cuts.
//!
//! Pixels are classified as cell interior, border between two cells, or
//! exterior by an ensemble of random ferns. The per-pixel class posteriors
//! then drive a multi-label energy (line-integral data costs, sigmoid
//! smoothness weights, label costs) that is minimized with alpha-expansion
//! over an exact max-flow solver. Each label corresponds to one seed
//! extracted from the interior posterior map; label 0 is the background.
//!
//! The modules mirror the pipeline stages:
//!
//! - [`imagecore`]: image containers, morphology, connected components, line rasterization
//! - [`ferns`]: the random-fern classifier and its model file
//! - [`trainset`]: class masks from annotations and balanced sampling
//! - [`seeds`]: seed extraction by a decreasing threshold sweep
//! - [`energy`]: data costs, edge weights and label costs
//! - [`optimizer`]: max-flow and alpha-expansion with label costs
//! - [`eval`]: cross-validation, segmentation metrics, synthetic scenes
//! - [`pipeline`]: end-to-end orchestration used by the command-line tool

pub mod config;
pub mod dump;
pub mod energy;
pub mod error;
pub mod eval;
pub mod ferns;
pub mod imagecore;
pub mod optimizer;
pub mod pipeline;
pub mod seeds;
pub mod trainset;

pub use error::{Error, Result};
