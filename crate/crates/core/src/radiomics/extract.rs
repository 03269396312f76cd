use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Deserialize, Serialize, Serializer};

use super::texture::{texture_features, texture_matrix, TextureFamily, TextureParams};
use super::{discretize, first_order_from_values, masked_values, shape_features, RadiomicsError, FIRST_ORDER_NAMES, SHAPE_NAMES};
use crate::curation::SequenceClass;
use crate::volume::{merge_mask_classes, MaskScheme, SegMask, Volume3D, LABEL_ED, LABEL_ET, LABEL_NC};

/// Tumor sub-regions used as radiomics masks, in output order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TumorClass {
    ED,
    NC,
    ET,
    TC,
    WT,
}

impl TumorClass {
    pub const ALL: [TumorClass; 5] = [TumorClass::ED, TumorClass::NC, TumorClass::ET, TumorClass::TC, TumorClass::WT];

    pub fn as_str(&self) -> &'static str {
        match self {
            TumorClass::ED => "ED",
            TumorClass::NC => "NC",
            TumorClass::ET => "ET",
            TumorClass::TC => "TC",
            TumorClass::WT => "WT",
        }
    }
}

/// Feature-name token of each image contrast, in output order.
pub const IMAGE_TOKENS: [(SequenceClass, &str); 4] = [
    (SequenceClass::T1WI, "T1WI"),
    (SequenceClass::GdT1WI, "GdT1WI"),
    (SequenceClass::T2WI, "T2WI"),
    (SequenceClass::FLAIR, "FLAIR"),
];

/// Image token used for the contrast-independent shape block.
pub const SHAPE_IMAGE_TOKEN: &str = "mask";

/// Per-(image, class) feature count: first-order plus all texture families.
pub const FEATURES_PER_IMAGE_CLASS: usize = 18 + 75;

/// Total width of the session feature schema.
pub const N_FEATURES: usize = 5 * 14 + 4 * 5 * FEATURES_PER_IMAGE_CLASS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiomicsParams {
    pub bin_width: f64,
    #[serde(skip, default)]
    pub texture: TextureParams,
}

impl Default for RadiomicsParams {
    fn default() -> Self {
        Self {
            bin_width: 25.0,
            texture: TextureParams::default(),
        }
    }
}

/// Binary mask of one tumor class, `None` when the class is not available
/// under the mask scheme or has no voxels.
pub fn class_mask(mask: &SegMask, class: TumorClass) -> Result<Option<Volume3D<u8>>, RadiomicsError> {
    let m = match (mask.scheme, class) {
        (MaskScheme::BinaryWt, TumorClass::WT) => merge_mask_classes(mask)?.wt,
        (MaskScheme::BinaryWt, _) => return Ok(None),
        (MaskScheme::MultiClass, TumorClass::ED) => mask.select(LABEL_ED),
        (MaskScheme::MultiClass, TumorClass::NC) => mask.select(LABEL_NC),
        (MaskScheme::MultiClass, TumorClass::ET) => mask.select(LABEL_ET),
        (MaskScheme::MultiClass, TumorClass::TC) => merge_mask_classes(mask)?.tc,
        (MaskScheme::MultiClass, TumorClass::WT) => merge_mask_classes(mask)?.wt,
    };
    Ok(m.voxels().iter().any(|&v| v != 0).then_some(m))
}

fn image_class_names(class: &str, image: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(FEATURES_PER_IMAGE_CLASS);
    out.extend(FIRST_ORDER_NAMES.iter().map(|f| format!("{class}_{image}_firstorder_{f}")));
    for fam in TextureFamily::ALL {
        out.extend(fam.names().iter().map(|f| format!("{class}_{image}_{}_{f}", fam.token())));
    }
    out
}

/// The fixed column schema: for each class, its shape block followed by
/// one first-order + texture block per image.
pub fn feature_names() -> Vec<String> {
    let mut out = Vec::with_capacity(N_FEATURES);
    for class in TumorClass::ALL {
        let c = class.as_str();
        out.extend(SHAPE_NAMES.iter().map(|f| format!("{c}_{SHAPE_IMAGE_TOKEN}_shape_{f}")));
        for (_, img) in IMAGE_TOKENS {
            out.extend(image_class_names(c, img));
        }
    }
    out
}

/// First-order and texture values for one (image, class) pair, in schema
/// order. Degenerate texture families yield `None`.
fn image_class_values(
    image: &Volume3D<f64>,
    mask: &Volume3D<u8>,
    params: &RadiomicsParams,
) -> Result<Vec<Option<f64>>, RadiomicsError> {
    let mut out = Vec::with_capacity(FEATURES_PER_IMAGE_CLASS);
    let values = masked_values(image, mask)?;
    out.extend(first_order_from_values(&values, params.bin_width)?.into_iter().map(|(_, v)| Some(v)));
    let roi = discretize(image, mask, params.bin_width)?;
    for fam in TextureFamily::ALL {
        match texture_features(&texture_matrix(&roi, fam, &params.texture)) {
            Ok(f) => out.extend(f.into_iter().map(|(_, v)| Some(v))),
            Err(RadiomicsError::DegenerateMatrix(_)) => out.extend(std::iter::repeat(None).take(fam.n_features())),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub session_id: String,
    pub entries: Vec<(String, Option<f64>)>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_null(&self) -> usize {
        self.entries.iter().filter(|(_, v)| v.is_none()).count()
    }

    pub fn get(&self, name: &str) -> Option<Option<f64>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

struct Ordered<'a>(&'a [(String, Option<f64>)]);

impl Serialize for Ordered<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

/// JSON form: `{"session_id": .., "features": {name: value | null, ..}}`
/// with names in schema order.
impl Serialize for FeatureVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FeatureVector", 2)?;
        st.serialize_field("session_id", &self.session_id)?;
        st.serialize_field("features", &Ordered(&self.entries))?;
        st.end()
    }
}

/// One CSV row per session under a `session_id` + schema header. Nulls are
/// empty cells.
pub fn write_features_csv<W: Write>(out: W, vectors: &[FeatureVector]) -> Result<(), RadiomicsError> {
    let mut w = csv::Writer::from_writer(out);
    let names = feature_names();
    let mut header = vec!["session_id".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for v in vectors {
        if v.entries.len() != names.len() || v.entries.iter().zip(&names).any(|((a, _), b)| a != b) {
            return Err(RadiomicsError::SchemaMismatch(v.session_id.clone()));
        }
        let mut row = vec![v.session_id.clone()];
        row.extend(v.entries.iter().map(|(_, x)| x.map_or_else(String::new, |x| format!("{x:?}"))));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Full session extraction over the fixed 1,930-column schema. Shape is
/// computed once per class; first-order and texture per (image, class).
/// Missing images, unavailable or empty classes, degenerate texture
/// matrices and non-finite values all become `None`.
pub fn extract_all(
    session_id: &str,
    images: &BTreeMap<SequenceClass, Volume3D<f64>>,
    mask: &SegMask,
    params: &RadiomicsParams,
) -> Result<FeatureVector, RadiomicsError> {
    for img in images.values() {
        if !img.geometry().same_grid(mask.labels.geometry()) {
            return Err(RadiomicsError::GridMismatch);
        }
    }
    let mut class_masks = BTreeMap::new();
    for class in TumorClass::ALL {
        class_masks.insert(class, class_mask(mask, class)?);
    }
    let jobs: Vec<(TumorClass, SequenceClass)> = TumorClass::ALL
        .iter()
        .flat_map(|&c| IMAGE_TOKENS.iter().map(move |&(s, _)| (c, s)))
        .filter(|(c, s)| class_masks[c].is_some() && images.contains_key(s))
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let m = class_masks[&c].as_ref().expect("filtered");
            image_class_values(&images[&s], m, params).map(|v| ((c, s), v))
        })
        .collect::<Result<_, _>>()?;
    let mut blocks: BTreeMap<(TumorClass, SequenceClass), Vec<Option<f64>>> = results.into_iter().collect();
    let shapes: BTreeMap<TumorClass, Vec<Option<f64>>> = class_masks
        .par_iter()
        .map(|(&c, m)| {
            let v = match m {
                Some(m) => shape_features(m)?.into_iter().map(|(_, v)| Some(v)).collect(),
                None => vec![None; SHAPE_NAMES.len()],
            };
            Ok((c, v))
        })
        .collect::<Result<_, RadiomicsError>>()?;

    let mut values = Vec::with_capacity(N_FEATURES);
    for class in TumorClass::ALL {
        values.extend(shapes[&class].iter().copied());
        for (img, _) in IMAGE_TOKENS {
            match blocks.remove(&(class, img)) {
                Some(b) => values.extend(b),
                None => values.extend(std::iter::repeat(None).take(FEATURES_PER_IMAGE_CLASS)),
            }
        }
    }
    let entries = feature_names()
        .into_iter()
        .zip(values)
        .map(|(n, v)| (n, v.filter(|x| x.is_finite())))
        .collect();
    Ok(FeatureVector {
        session_id: session_id.to_string(),
        entries,
    })
}
