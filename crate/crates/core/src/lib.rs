//! Multiresolution co-clustering of region hierarchies across image
//! collections and video.
//!
//! Each image carries a leaf partition and a binary partition tree over it.
//! Boundaries between adjacent leaves (within an image) and between nearby
//! regions of different images become 0/1 variables; a linear objective
//! built from color and contour similarity is minimized subject to
//! hierarchy, triangle and resolution constraints. Connected components of
//! merged boundaries give labels that are consistent across the collection.

pub mod adjacency;
pub mod bundle;
pub mod cli;
pub mod config;
pub mod constraints;
pub mod descriptors;
pub mod error;
pub mod hierarchy;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod render;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
