//! Real-scale recovery for single-view 3D reconstructions.
//!
//! A reconstruction network emits meshes in an arbitrary canonical frame. This
//! crate regresses the volume scale factor `V_gt / V_recon` from paired image
//! embeddings (the input photo and rendered views of the reconstruction),
//! averages it over views, rescales meshes into centimeters and scores the
//! resulting volume and energy estimates.
//!
//! Modules:
//! - [`geometry`]: meshes, OBJ/PLY I/O, signed volume, primitives
//! - [`camrig`]: spherical render rig and pose export
//! - [`embedding`]: `EMB1` container, synthetic encoders, feature pairing
//! - [`scalereg`]: the MLP regressor, loss, training and checkpoints
//! - [`corpus`]: manifests, splits, frame sampling, synthetic corpora
//! - [`eval`]: volume metrics and mean baselines
//! - [`nutrition`]: volume to energy conversion
//! - [`pipeline`]: train/predict orchestration over manifests and embedding files

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod camrig;
pub mod corpus;
pub mod embedding;
mod error;
pub mod eval;
pub mod geometry;
pub mod nutrition;
pub mod pipeline;
pub mod rng;
pub mod scalereg;

pub use error::{Error, Result};
