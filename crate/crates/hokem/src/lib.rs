//! Human-object interaction recognition from pose keypoints and object
//! masks: keypoint extraction, graph construction, an adaptive graph
//! convolutional classifier with keypoint attention, and role-based
//! average-precision evaluation.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod hograph;
pub mod io;
pub mod network;
pub mod par;
pub mod render;
pub mod synthetic;
pub mod tape;
pub mod tensor;
pub mod training;

pub use error::{HokemError, Result};
pub use tensor::Tensor;
