//! Curation, segmentation routing, post-processing, radiomics and
//! evaluation for multi-sequence brain tumor MRI studies.

pub mod config;
pub mod curation;
pub mod dicom;
pub mod evaluation;
pub mod pipeline;
pub mod radiomics;
pub mod stats;
pub mod synth;
pub mod volume;

pub use volume::{Affine4, Geometry, Interpolation, MaskScheme, SegMask, Volume3D};
