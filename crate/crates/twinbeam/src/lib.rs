//! Simulation and analysis of pulsed twin-beam intensity-difference
//! squeezing measured with a fast balanced detector.
//!
//! The crate models the full chain of a time-domain squeezing measurement:
//!
//! * [`model`] — linearized Gaussian statistics of the amplifier's twin
//!   beams, detection loss, noise-ratio prediction, electronic gain-ratio
//!   optimization and a seeded Monte-Carlo pulse-pair sampler;
//! * [`detector`] — response-kernel trace synthesis with band-limited
//!   electronic noise, common-mode leakage and ADC quantization;
//! * [`trace`] — sampled voltage records and their binary file format;
//! * [`daq`] — pulse-peak location, window integration, pulse-shift
//!   correlation and histograms;
//! * [`psd`] — ensemble-averaged power spectral densities;
//! * [`calibration`] — shot-noise-limit calibration sweeps and the
//!   persisted linear fit;
//! * [`metrics`] — squeezing ratios with electronic-noise subtraction,
//!   dB conversion, detection-loss correction and the frequency-domain
//!   estimate;
//! * [`ensemble`] — multi-record synthesis with derived per-record seeds.
//!
//! Everything stochastic is seeded explicitly; see [`seed`] for the rule
//! that derives per-record seeds from a master seed.

pub mod calibration;
pub mod daq;
pub mod detector;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod model;
pub mod psd;
pub mod seed;
pub mod trace;

pub use error::{Error, Result};
pub use model::{DetectionChain, FopaParams, PulsePairSeries, TwinBeamStats};
pub use trace::VoltageTrace;
