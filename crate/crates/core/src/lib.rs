//! Block-frequency-domain acoustic echo cancellation: a partitioned-block
//! Kalman filter whose step size is controlled by a mask-based postfilter.

pub mod dataset;
pub mod dsp;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod kalman;
pub mod metrics;
pub mod postfilter;
pub mod psd;
pub mod scenario;

pub use dsp::BlockSpec;
pub use engine::{process_stream, EchoCanceller, Estimator, MaskSource, RunConfig, StreamInputs};
pub use error::{Error, Result};
pub use kalman::KalmanState;
pub use postfilter::{MaskFrame, NetworkWeights};
pub use psd::DiagonalPsd;
pub use scenario::{Scenario, ScenarioConfig};
