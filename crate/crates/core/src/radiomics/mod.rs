//! Shape, first-order and texture features per (image, tumor class) over a
//! fixed-width session schema. Formulas and edge-case conventions are
//! listed in `docs/radiomics_formulas.md`.

mod discretize;
mod extract;
mod first_order;
mod shape;
pub mod texture;

pub use discretize::{bin_level, discretize, DiscretizedRoi};
pub use extract::{
    class_mask, extract_all, feature_names, write_features_csv, FeatureVector, RadiomicsParams, TumorClass,
    FEATURES_PER_IMAGE_CLASS, IMAGE_TOKENS, N_FEATURES, SHAPE_IMAGE_TOKEN,
};
pub use first_order::{first_order_features, first_order_from_values, masked_values, FIRST_ORDER_NAMES};
pub use shape::{shape_features, SHAPE_NAMES};
pub use texture::{texture_features, texture_matrix, TextureFamily, TextureMatrix, TextureParams};

use thiserror::Error;

use crate::volume::VolumeError;

#[derive(Debug, Error)]
pub enum RadiomicsError {
    #[error("mask has no voxels")]
    EmptyMask,
    #[error("image and mask are on different grids")]
    GridMismatch,
    #[error("bin width must be positive and finite, got {0}")]
    InvalidBinWidth(f64),
    #[error("{0:?} matrix is all zero")]
    DegenerateMatrix(TextureFamily),
    #[error("feature vector for session {0} does not follow the schema")]
    SchemaMismatch(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
