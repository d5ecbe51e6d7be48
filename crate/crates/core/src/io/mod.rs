//! Acquisition simulation and file formats: the AFE code conversion, the
//! binary frame protocol, lossy stream simulation with reassembly, the
//! sliding-window inference scheduler, and recording/label files.

pub mod afe;
pub mod frame;
pub mod recording;
pub mod scheduler;
pub mod stream;

pub use afe::AfeConfig;
pub use frame::{decode_frame, decode_stream, encode_frame, Frame, FrameError, FrameMeta};
pub use recording::{read_labels, read_recording, write_labels, write_recording};
pub use scheduler::{run_stream_pipeline, schedule_record, Classifier, InferenceScheduler, PipelineReport, Prediction};
pub use stream::{reassemble, stream_sim, GapReport, StreamConfig, StreamSim};
