//! Core of the T-Lens stack: a small autograd kernel, the multimodal
//! human-response model, receptivity metrics, corpus handling, training and
//! the evaluation statistics used to score predictions.

pub mod dataset;
pub mod encoders;
pub mod eval;
pub mod model;
pub mod nn;
pub mod stats;
pub mod tensor;
pub mod train;
