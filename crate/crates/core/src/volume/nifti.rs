//! Single-file NIfTI-1 (`.nii`) reading and writing.
//!
//! Only little-endian, uncompressed files with `uint8`, `int16` or
//! `float32` voxels are handled. On read the sform is preferred over the
//! qform; spacing and origin of the returned [`Volume3D`] are taken from the
//! columns and translation of that affine.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::{Affine4, Geometry, MaskScheme, Volume3D, VolumeError};

const HEADER_SIZE: usize = 348;
const VOX_OFFSET: usize = 352;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

#[derive(Debug, Error)]
pub enum NiftiError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a single-file little-endian NIfTI-1 image: {0}")]
    BadHeader(String),
    #[error("unsupported NIfTI datatype code {0}")]
    UnsupportedDatatype(i16),
    #[error("voxel payload truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("label volume contains non-integer or out-of-range value {0}")]
    NotLabels(f64),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// On-disk voxel type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Datatype {
    Uint8,
    Int16,
    Float32,
}

impl Datatype {
    fn code(self) -> i16 {
        match self {
            Datatype::Uint8 => DT_UINT8,
            Datatype::Int16 => DT_INT16,
            Datatype::Float32 => DT_FLOAT32,
        }
    }

    fn bytes(self) -> usize {
        match self {
            Datatype::Uint8 => 1,
            Datatype::Int16 => 2,
            Datatype::Float32 => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NiftiImage {
    pub volume: Volume3D<f64>,
    /// Voxel-to-world transform as stored in the file.
    pub affine: Affine4,
    pub datatype: Datatype,
    pub intent_name: String,
    pub descrip: String,
}

impl NiftiImage {
    /// Label scheme recorded in `intent_name`, if any.
    pub fn mask_scheme(&self) -> Option<MaskScheme> {
        MaskScheme::parse(&self.intent_name)
    }

    pub fn into_labels(self) -> Result<Volume3D<u8>, NiftiError> {
        for &v in self.volume.voxels() {
            if v.fract() != 0.0 || !(0.0..=255.0).contains(&v) {
                return Err(NiftiError::NotLabels(v));
            }
        }
        Ok(self.volume.map(|v| v as u8))
    }
}

fn rd_i16(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn rd_i32(b: &[u8], off: usize) -> i32 {
    i32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn rd_f32(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

fn rd_str(b: &[u8], off: usize, len: usize) -> String {
    let raw = &b[off..off + len];
    let end = raw.iter().position(|&c| c == 0).unwrap_or(len);
    String::from_utf8_lossy(&raw[..end]).into_owned()
}

fn quatern_affine(b: &[u8], pixdim: [f64; 4]) -> Affine4 {
    let qb = rd_f32(b, 256) as f64;
    let qc = rd_f32(b, 260) as f64;
    let qd = rd_f32(b, 264) as f64;
    let qa = (1.0 - (qb * qb + qc * qc + qd * qd)).max(0.0).sqrt();
    let qfac = if pixdim[0] < 0.0 { -1.0 } else { 1.0 };
    let (dx, dy, dz) = (pixdim[1], pixdim[2], pixdim[3] * qfac);
    let r = [
        [qa * qa + qb * qb - qc * qc - qd * qd, 2.0 * (qb * qc - qa * qd), 2.0 * (qb * qd + qa * qc)],
        [2.0 * (qb * qc + qa * qd), qa * qa + qc * qc - qb * qb - qd * qd, 2.0 * (qc * qd - qa * qb)],
        [2.0 * (qb * qd - qa * qc), 2.0 * (qc * qd + qa * qb), qa * qa + qd * qd - qc * qc - qb * qb],
    ];
    let t = [rd_f32(b, 268) as f64, rd_f32(b, 272) as f64, rd_f32(b, 276) as f64];
    Affine4::from_rows([
        [r[0][0] * dx, r[0][1] * dy, r[0][2] * dz, t[0]],
        [r[1][0] * dx, r[1][1] * dy, r[1][2] * dz, t[1]],
        [r[2][0] * dx, r[2][1] * dy, r[2][2] * dz, t[2]],
        [0.0, 0.0, 0.0, 1.0],
    ])
    .expect("bottom row is fixed")
}

pub fn decode(bytes: &[u8]) -> Result<NiftiImage, NiftiError> {
    if bytes.len() < HEADER_SIZE {
        return Err(NiftiError::BadHeader(format!("{} bytes is shorter than a header", bytes.len())));
    }
    if rd_i32(bytes, 0) != HEADER_SIZE as i32 {
        return Err(NiftiError::BadHeader("sizeof_hdr != 348 (big endian or not NIfTI-1)".into()));
    }
    if &bytes[344..348] != b"n+1\0" {
        return Err(NiftiError::BadHeader("magic is not n+1".into()));
    }
    let ndim = rd_i16(bytes, 40);
    if !(1..=7).contains(&ndim) {
        return Err(NiftiError::BadHeader(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for (a, d) in dims.iter_mut().enumerate().take(ndim.min(3) as usize) {
        let v = rd_i16(bytes, 42 + 2 * a);
        if v <= 0 {
            return Err(NiftiError::BadHeader(format!("dim[{}] = {v}", a + 1)));
        }
        *d = v as usize;
    }
    let datatype = match rd_i16(bytes, 70) {
        DT_UINT8 => Datatype::Uint8,
        DT_INT16 => Datatype::Int16,
        DT_FLOAT32 => Datatype::Float32,
        other => return Err(NiftiError::UnsupportedDatatype(other)),
    };
    let mut pixdim = [0f64; 4];
    for (i, p) in pixdim.iter_mut().enumerate() {
        *p = rd_f32(bytes, 76 + 4 * i) as f64;
    }
    let vox_offset = rd_f32(bytes, 108) as usize;
    let slope = rd_f32(bytes, 112) as f64;
    let inter = rd_f32(bytes, 116) as f64;
    let (slope, inter) = if slope == 0.0 || !slope.is_finite() { (1.0, 0.0) } else { (slope, inter) };

    let qform_code = rd_i16(bytes, 252);
    let sform_code = rd_i16(bytes, 254);
    let affine = if sform_code > 0 {
        let mut rows = [[0.0; 4]; 4];
        for (r, row) in rows.iter_mut().enumerate().take(3) {
            for (c, v) in row.iter_mut().enumerate() {
                *v = rd_f32(bytes, 280 + 16 * r + 4 * c) as f64;
            }
        }
        rows[3] = [0.0, 0.0, 0.0, 1.0];
        Affine4::from_rows(rows)?
    } else if qform_code > 0 {
        quatern_affine(bytes, pixdim)
    } else {
        let s = |v: f64| if v > 0.0 { v } else { 1.0 };
        Affine4::from_rows([
            [s(pixdim[1]), 0.0, 0.0, 0.0],
            [0.0, s(pixdim[2]), 0.0, 0.0],
            [0.0, 0.0, s(pixdim[3]), 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])?
    };

    let rows = affine.rows();
    let mut spacing = [0.0; 3];
    for (c, s) in spacing.iter_mut().enumerate() {
        *s = (rows[0][c].powi(2) + rows[1][c].powi(2) + rows[2][c].powi(2)).sqrt();
    }
    let origin = [rows[0][3], rows[1][3], rows[2][3]];
    let geometry = Geometry::new(dims, spacing, origin)?;

    let n = geometry.len();
    let need = vox_offset + n * datatype.bytes();
    if bytes.len() < need {
        return Err(NiftiError::Truncated { need, have: bytes.len() });
    }
    let data = &bytes[vox_offset..need];
    let voxels: Vec<f64> = match datatype {
        Datatype::Uint8 => data.iter().map(|&v| v as f64).collect(),
        Datatype::Int16 => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
        Datatype::Float32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    };
    let voxels = if slope != 1.0 || inter != 0.0 {
        voxels.into_iter().map(|v| v * slope + inter).collect()
    } else {
        voxels
    };
    Ok(NiftiImage {
        volume: Volume3D::new(geometry, voxels)?,
        affine,
        datatype,
        intent_name: rd_str(bytes, 328, 16),
        descrip: rd_str(bytes, 148, 80),
    })
}

/// Options for writing; `intent_name` is truncated to 15 bytes.
#[derive(Debug, Clone, Default)]
pub struct WriteOptions<'a> {
    pub intent_name: &'a str,
    pub descrip: &'a str,
}

/// Encodes a volume. The affine written to both qform and sform is the
/// diagonal spacing matrix plus origin translation.
pub fn encode(geometry: &Geometry, voxels: &[f64], datatype: Datatype, opts: &WriteOptions<'_>) -> Vec<u8> {
    let mut h = vec![0u8; VOX_OFFSET];
    let w_i16 = |h: &mut [u8], off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let w_f32 = |h: &mut [u8], off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());
    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r';
    w_i16(&mut h, 40, 3);
    for a in 0..3 {
        w_i16(&mut h, 42 + 2 * a, geometry.dims[a] as i16);
    }
    for a in 3..7 {
        w_i16(&mut h, 42 + 2 * a, 1);
    }
    w_i16(&mut h, 70, datatype.code());
    w_i16(&mut h, 72, (datatype.bytes() * 8) as i16);
    w_f32(&mut h, 76, 1.0);
    for a in 0..3 {
        w_f32(&mut h, 80 + 4 * a, geometry.spacing[a] as f32);
    }
    w_f32(&mut h, 108, VOX_OFFSET as f32);
    w_f32(&mut h, 112, 1.0);
    h[123] = 2; // mm
    let d = opts.descrip.as_bytes();
    h[148..148 + d.len().min(79)].copy_from_slice(&d[..d.len().min(79)]);
    w_i16(&mut h, 252, 1);
    w_i16(&mut h, 254, 1);
    // identity rotation quaternion; offsets carry the origin
    for a in 0..3 {
        w_f32(&mut h, 268 + 4 * a, geometry.origin[a] as f32);
    }
    for r in 0..3 {
        for c in 0..3 {
            let v = if r == c { geometry.spacing[r] } else { 0.0 };
            w_f32(&mut h, 280 + 16 * r + 4 * c, v as f32);
        }
        w_f32(&mut h, 280 + 16 * r + 12, geometry.origin[r] as f32);
    }
    let name = opts.intent_name.as_bytes();
    h[328..328 + name.len().min(15)].copy_from_slice(&name[..name.len().min(15)]);
    h[344..348].copy_from_slice(b"n+1\0");

    h.reserve(voxels.len() * datatype.bytes());
    match datatype {
        Datatype::Uint8 => h.extend(voxels.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8)),
        Datatype::Int16 => {
            for &v in voxels {
                h.extend_from_slice(&(v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16).to_le_bytes());
            }
        }
        Datatype::Float32 => {
            for &v in voxels {
                h.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
    }
    h
}

pub fn read(path: &Path) -> Result<NiftiImage, NiftiError> {
    let bytes = fs::read(path).map_err(|source| NiftiError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), NiftiError> {
    fs::write(path, bytes).map_err(|source| NiftiError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes an intensity volume as float32.
pub fn write_image(path: &Path, vol: &Volume3D<f64>) -> Result<(), NiftiError> {
    write_bytes(
        path,
        &encode(vol.geometry(), vol.voxels(), Datatype::Float32, &WriteOptions::default()),
    )
}

/// Writes a label volume as uint8, tagging the label scheme.
pub fn write_labels(path: &Path, vol: &Volume3D<u8>, scheme: Option<MaskScheme>) -> Result<(), NiftiError> {
    let voxels: Vec<f64> = vol.voxels().iter().map(|&v| v as f64).collect();
    let opts = WriteOptions {
        intent_name: scheme.map(|s| s.as_str()).unwrap_or(""),
        descrip: "",
    };
    write_bytes(path, &encode(vol.geometry(), &voxels, Datatype::Uint8, &opts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip() {
        let g = Geometry::new([3, 4, 2], [0.5, 1.0, 2.5], [-10.0, 4.0, 7.5]).unwrap();
        let v = Volume3D::from_fn(g, |x, y, z| (x + 10 * y + 100 * z) as f64 - 20.5);
        let img = decode(&encode(&g, v.voxels(), Datatype::Float32, &WriteOptions::default())).unwrap();
        assert_eq!(img.volume, v);
        assert_eq!(img.datatype, Datatype::Float32);
    }

    #[test]
    fn int16_and_labels() {
        let g = Geometry::new([2, 2, 1], [1.0; 3], [0.0; 3]).unwrap();
        let img = decode(&encode(&g, &[-300.0, 0.0, 2.0, 32000.0], Datatype::Int16, &WriteOptions::default())).unwrap();
        assert_eq!(img.volume.voxels(), &[-300.0, 0.0, 2.0, 32000.0]);
        let bytes = encode(
            &g,
            &[0.0, 1.0, 2.0, 4.0],
            Datatype::Uint8,
            &WriteOptions { intent_name: "multiclass", descrip: "seg" },
        );
        let img = decode(&bytes).unwrap();
        assert_eq!(img.mask_scheme(), Some(MaskScheme::MultiClass));
        assert_eq!(img.descrip, "seg");
        assert_eq!(img.into_labels().unwrap().voxels(), &[0, 1, 2, 4]);
    }

    #[test]
    fn header_checks() {
        assert!(matches!(decode(&[0u8; 10]), Err(NiftiError::BadHeader(_))));
        let g = Geometry::new([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        let mut b = encode(&g, &[0.0; 8], Datatype::Uint8, &WriteOptions::default());
        b.truncate(355);
        assert!(matches!(decode(&b), Err(NiftiError::Truncated { .. })));
        let mut b = encode(&g, &[0.0; 8], Datatype::Uint8, &WriteOptions::default());
        b[70] = 64;
        assert!(matches!(decode(&b), Err(NiftiError::UnsupportedDatatype(64))));
    }

    #[test]
    fn qform_used_without_sform() {
        let g = Geometry::new([2, 2, 2], [2.0, 3.0, 4.0], [1.0, 2.0, 3.0]).unwrap();
        let mut b = encode(&g, &[0.0; 8], Datatype::Uint8, &WriteOptions::default());
        b[254] = 0;
        b[255] = 0;
        let img = decode(&b).unwrap();
        assert_eq!(img.volume.spacing(), [2.0, 3.0, 4.0]);
        assert_eq!(img.volume.origin(), [1.0, 2.0, 3.0]);
    }
}
