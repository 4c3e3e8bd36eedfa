//! Geometry, segmentation, solar flux and evaluation primitives for rooftop
//! solar assessment from satellite-derived surface models.
//!
//! Everything operates on [`raster::Raster`] grids in a single planar map
//! frame: rows grow southward, columns eastward, azimuths are compass
//! bearings clockwise from north.

pub mod error;
pub mod infill;
pub mod io;
pub mod masking;
pub mod maxflow;
pub mod metrics;
pub mod panels;
pub mod pixel;
pub mod raster;
pub mod reproject;
pub mod resample;
pub mod segment;
pub mod solar;
pub mod stitch;
pub mod synth;
pub mod terrain;

pub use error::{Error, Result};
