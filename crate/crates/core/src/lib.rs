//! Numerical laboratory for feature-level two-stage training dynamics of a
//! one-layer normalized ReLU self-attention model.
//!
//! The pipeline is `datagen` → `trainer` (noisy full-batch gradient descent
//! with an exact signal/noise split) → `metrics` per epoch, with
//! `spectral_edit` for post-hoc SVD truncation of the trained weights and
//! `io` for the plain-text file formats.

pub mod datagen;
pub mod gradient;
pub mod io;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod spectral_edit;
pub mod trainer;

pub use datagen::{Component, Dataset, EmbeddedPrompt, Label, Prompt, TaskVectors};
pub use metrics::{TrajectoryLog, TrajectoryRecord};
pub use model::BlockWeights;
pub use numerics::{Matrix, Rng};
pub use spectral_edit::{EditOrder, EditSpec, EditTarget};
pub use trainer::{InitMode, SignalNoiseState, TheoryConstants, TrainConfig};
