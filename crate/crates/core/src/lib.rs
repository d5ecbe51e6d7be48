//! Signal processing and inference for a smart-glasses EEG/EOG system:
//! synthetic recordings, IIR filter chains, EOG derivation, CCA-based SSVEP
//! detection, a small CNN with INT8 inference, evaluation metrics, and the
//! simulated acquisition stream.

pub mod dsp;
pub mod eog;
pub mod error;
pub mod eval;
pub mod io;
pub mod nn;
pub mod quant;
pub mod record;
pub mod ssvep;
pub mod synth;

pub use error::{Error, Result};
pub use record::{ConfigId, LabelRow, MultiChannelRecord};
