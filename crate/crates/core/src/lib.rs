//! Physics-informed learning for linear RLC circuits.
//!
//! A shallow Fourier network with closed-form time derivatives is trained
//! against circuit ODEs, compared with a tanh MLP baseline, and transferred
//! between circuit parameter sets and circuit classes without labels.

pub mod baseline;
pub mod bondgraph;
pub mod circuit;
pub mod error;
pub mod fourier;
pub mod loss;
pub mod optimizer;
pub mod simulator;
pub mod stats;
pub mod workflows;

pub use circuit::{ode_for_class, preset, CircuitClass, CircuitParams, LinearOde, PhysParam, PresetKind, SourceWaveform};
pub use error::{Error, Result};
pub use fourier::FourierNet;
