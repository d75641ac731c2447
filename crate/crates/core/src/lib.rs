//! Scene representation, layout metrics and reward tooling for 3D indoor scenes.
//!
//! - [`ssr`]: the JSON scene format, edits, augmentation and the dataset filter
//! - [`boundary`]: rectilinear floor outlines and their extruded room prism
//! - [`voxel`]: occupancy grids and the OOB / MBL / VBL overlap counts
//! - [`sampler`]: catalog retrieval by embedding and size similarity
//! - [`metrics`]: prompt match, rewards, advantages, Best-of-N, removal accuracy
//! - [`instruct`]: instruction sampling and the model-input template
//! - [`commands`]: `<add>` / `<remove>` command lists and candidate parsing

pub mod boundary;
pub mod commands;
pub mod instruct;
pub mod manifest;
pub mod math;
pub mod mesh;
pub mod metrics;
pub mod sampler;
pub mod ssr;
pub mod voxel;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
