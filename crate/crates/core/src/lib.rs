//! Anomaly detection and log analysis for network event streams.
//!
//! Three stages fused into one pipeline: an isolation forest for fast
//! per-record screening, a tabular GAN that augments training data with
//! synthetic normal traffic, and a small transformer encoder that scores
//! sliding windows of records as sequences. A benchmark harness drives
//! end-to-end experiments and the four-variant ablation over synthetic or
//! user-supplied intrusion-detection datasets.

pub mod bench;
pub mod cli;
pub mod error;
pub mod forest;
pub mod gan;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod tensor;
pub mod transformer;

pub use error::{Error, Result};
