//! Synthetic sessions with known ground truth: an intensity-coded tumor
//! phantom written as DICOM series, used by the end-to-end tests and the
//! `phantom` CLI command.

use std::collections::BTreeMap;
use std::path::Path;

use crate::curation::SequenceClass;
use crate::dicom::writer::{DicomWriter, Syntax};
use crate::dicom::InstanceMeta;
use crate::volume::{Geometry, Volume3D, LABEL_ED, LABEL_ET, LABEL_NC};

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    /// mm, isotropic
    pub spacing: f64,
    pub origin: [f64; 3],
    /// Voxel index of the tumor center.
    pub center: [usize; 3],
    /// Radii in voxels: necrotic core, enhancing rim, edema.
    pub r_nc: f64,
    pub r_et: f64,
    pub r_ed: f64,
    /// Voxels of background between the grid border and the brain box.
    pub brain_inset: usize,
    /// Brain intensity ramps from `ramp.0` to `ramp.1` along x.
    pub ramp: (f64, f64),
    pub gd_nc: f64,
    pub gd_et: f64,
    /// T2WI and FLAIR intensity inside the edema radius.
    pub fluid: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [48, 48, 36],
            spacing: 1.0,
            origin: [-24.0, -24.0, -18.0],
            center: [24, 24, 18],
            r_nc: 3.0,
            r_et: 5.0,
            r_ed: 8.0,
            brain_inset: 4,
            ramp: (80.0, 120.0),
            gd_nc: 30.0,
            gd_et: 400.0,
            fluid: 300.0,
        }
    }
}

/// Authored images and the multi-class truth, all on one native grid.
#[derive(Debug, Clone)]
pub struct Phantom {
    pub images: BTreeMap<SequenceClass, Volume3D<f64>>,
    pub truth: Volume3D<u8>,
}

impl PhantomSpec {
    pub fn geometry(&self) -> Geometry {
        Geometry::new(self.dims, [self.spacing; 3], self.origin).expect("phantom geometry is valid")
    }

    fn radius(&self, x: usize, y: usize, z: usize) -> f64 {
        let d = |a: usize, b: usize| a as f64 - b as f64;
        let (dx, dy, dz) = (d(x, self.center[0]), d(y, self.center[1]), d(z, self.center[2]));
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    fn in_brain(&self, x: usize, y: usize, z: usize) -> bool {
        let i = self.brain_inset;
        [x, y, z].iter().zip(self.dims).all(|(&c, n)| c >= i && c + i < n)
    }

    fn ramp(&self, x: usize) -> f64 {
        let i = self.brain_inset as f64;
        let span = (self.dims[0] as f64 - 1.0 - 2.0 * i).max(1.0);
        (self.ramp.0 + (self.ramp.1 - self.ramp.0) * (x as f64 - i) / span).round()
    }

    pub fn truth_label(&self, x: usize, y: usize, z: usize) -> u8 {
        let r = self.radius(x, y, z);
        if r <= self.r_nc {
            LABEL_NC
        } else if r <= self.r_et {
            LABEL_ET
        } else if r <= self.r_ed {
            LABEL_ED
        } else {
            0
        }
    }

    pub fn build(&self) -> Phantom {
        let g = self.geometry();
        let gd = Volume3D::from_fn(g, |x, y, z| {
            if !self.in_brain(x, y, z) {
                return 0.0;
            }
            match self.truth_label(x, y, z) {
                LABEL_NC => self.gd_nc,
                LABEL_ET => self.gd_et,
                _ => self.ramp(x),
            }
        });
        let fluid = Volume3D::from_fn(g, |x, y, z| {
            if !self.in_brain(x, y, z) {
                0.0
            } else if self.truth_label(x, y, z) != 0 {
                self.fluid
            } else {
                self.ramp(x)
            }
        });
        let mut images = BTreeMap::new();
        images.insert(SequenceClass::GdT1WI, gd);
        images.insert(SequenceClass::T2WI, fluid.clone());
        images.insert(SequenceClass::FLAIR, fluid);
        Phantom {
            images,
            truth: Volume3D::from_fn(g, |x, y, z| self.truth_label(x, y, z)),
        }
    }
}

/// Describes one synthetic series.
#[derive(Debug, Clone)]
struct SeriesPlan<'a> {
    description: &'a str,
    series_number: i64,
    slices: usize,
}

fn uid_root(session_id: &str) -> String {
    let digits: u64 = session_id.bytes().fold(7u64, |h, b| h.wrapping_mul(31).wrapping_add(b as u64)) % 1_000_000_007;
    format!("1.2.826.0.1.3680043.10.1.{digits}")
}

fn write_series(
    dir: &Path,
    session_id: &str,
    spec: &PhantomSpec,
    plan: &SeriesPlan<'_>,
    vol: Option<&Volume3D<f64>>,
) -> std::io::Result<()> {
    let root = uid_root(session_id);
    let series_uid = format!("{root}.{}", plan.series_number);
    let sub = dir.join(format!("series_{:03}", plan.series_number));
    std::fs::create_dir_all(&sub)?;
    let writer = DicomWriter::new(Syntax::ExplicitLittle);
    let [nx, ny, _] = spec.dims;
    for z in 0..plan.slices {
        let mut m = InstanceMeta::new(&series_uid, format!("{series_uid}.{}", z + 1));
        m.study_uid = Some(format!("{root}.0"));
        m.series_description = Some(plan.description.to_string());
        m.image_type = Some(vec!["ORIGINAL".into(), "PRIMARY".into(), "M".into(), "ND".into()]);
        m.mr_acq_type = Some("2D".into());
        m.image_orientation_patient = Some([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        m.image_position_patient = Some([spec.origin[0], spec.origin[1], spec.origin[2] + z as f64 * spec.spacing]);
        m.rows = Some(ny as u16);
        m.cols = Some(nx as u16);
        m.pixel_spacing = Some([spec.spacing, spec.spacing]);
        m.series_number = Some(plan.series_number);
        m.instance_number = Some(z as i64 + 1);
        m.bits_allocated = Some(16);
        m.pixel_representation = Some(0);
        let mut px = Vec::with_capacity(nx * ny * 2);
        for y in 0..ny {
            for x in 0..nx {
                let v = vol.map_or(0.0, |v| v.get(x, y, z));
                px.extend_from_slice(&(v.round().clamp(0.0, u16::MAX as f64) as u16).to_le_bytes());
            }
        }
        std::fs::write(sub.join(format!("{:04}.dcm", z + 1)), writer.encode(&m, Some(&px)))?;
    }
    Ok(())
}

/// Writes the phantom as a DICOM session under `dir`: axial Gd-T1WI,
/// T2WI and FLAIR series, plus a scout and a diffusion series when
/// `distractors` is set. Returns the authored images and truth.
pub fn write_phantom_session(dir: &Path, session_id: &str, spec: &PhantomSpec, distractors: bool) -> std::io::Result<Phantom> {
    let phantom = spec.build();
    let nz = spec.dims[2];
    let plans = [
        (SequenceClass::GdT1WI, SeriesPlan { description: "AX T1 GD", series_number: 3, slices: nz }),
        (SequenceClass::T2WI, SeriesPlan { description: "AX T2 TSE", series_number: 4, slices: nz }),
        (SequenceClass::FLAIR, SeriesPlan { description: "AX FLAIR", series_number: 5, slices: nz }),
    ];
    for (class, plan) in &plans {
        write_series(dir, session_id, spec, plan, phantom.images.get(class))?;
    }
    if distractors {
        let scout = SeriesPlan { description: "SCOUT", series_number: 1, slices: 3 };
        let dwi = SeriesPlan { description: "AX DWI", series_number: 2, slices: nz };
        write_series(dir, session_id, spec, &scout, None)?;
        write_series(dir, session_id, spec, &dwi, phantom.images.get(&SequenceClass::T2WI))?;
    }
    Ok(phantom)
}
