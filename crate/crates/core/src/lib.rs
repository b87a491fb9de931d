//! Style-based 3D-aware morphable face model.
//!
//! A four-group semantic code (identity, expression, texture, lighting) is
//! mapped group-wise to style codes. Identity and expression modulate a
//! low-resolution sine radiance field that is volume rendered into a feature
//! map; texture and lighting modulate the render blocks that upsample it to
//! the final image. An image encoder closes the loop for reconstruction,
//! fitting and editing.

pub mod applications;
pub mod camera;
pub mod codes;
pub mod config;
pub mod data_io;
pub mod discriminator;
pub mod encoder;
pub mod error;
pub mod image_decoder;
pub mod imaging;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod neural_field;
pub mod nn;
pub mod trainer;
pub mod volume_render;

pub use camera::{CameraIntrinsics, CameraPose};
pub use codes::{Group, Groups, SemanticCode, StyleCode};
pub use config::ModelConfig;
pub use error::{Error, Result};
pub use model::Model;
