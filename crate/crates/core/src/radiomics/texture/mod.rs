mod features;
mod matrix;

pub use features::{
    texture_features, COARSENESS_CAP, GLCM_NAMES, GLDM_NAMES, GLRLM_NAMES, GLSZM_NAMES, NGTDM_NAMES,
};
pub use matrix::{directions_13, texture_matrix, CountMatrix, TextureMatrix, TextureParams};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TextureFamily {
    Glcm,
    Glrlm,
    Glszm,
    Gldm,
    Ngtdm,
}

impl TextureFamily {
    pub const ALL: [TextureFamily; 5] = [
        TextureFamily::Glcm,
        TextureFamily::Glrlm,
        TextureFamily::Glszm,
        TextureFamily::Gldm,
        TextureFamily::Ngtdm,
    ];

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            TextureFamily::Glcm => &GLCM_NAMES,
            TextureFamily::Glrlm => &GLRLM_NAMES,
            TextureFamily::Glszm => &GLSZM_NAMES,
            TextureFamily::Gldm => &GLDM_NAMES,
            TextureFamily::Ngtdm => &NGTDM_NAMES,
        }
    }

    pub fn n_features(&self) -> usize {
        self.names().len()
    }

    /// Lower-case token used in feature names.
    pub fn token(&self) -> &'static str {
        match self {
            TextureFamily::Glcm => "glcm",
            TextureFamily::Glrlm => "glrlm",
            TextureFamily::Glszm => "glszm",
            TextureFamily::Gldm => "gldm",
            TextureFamily::Ngtdm => "ngtdm",
        }
    }
}
