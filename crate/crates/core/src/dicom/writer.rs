//! Encoder for synthetic Part-10 files. It writes exactly the tag subset
//! the parser reads, optionally surrounded by unrelated elements and
//! nested sequences, and is used to author test fixtures and phantoms.

use super::tag::{tags, DicomTag};
use super::{InstanceMeta, EXPLICIT_VR_LE, IMPLICIT_VR_LE};

#[derive(Debug, Clone, PartialEq)]
pub enum Syntax {
    ExplicitLittle,
    ImplicitLittle,
    /// Any other transfer syntax UID. The dataset is written explicit-VR
    /// little endian and pixel data, if any, encapsulated.
    Other(String),
}

impl Syntax {
    fn uid(&self) -> &str {
        match self {
            Syntax::ExplicitLittle => EXPLICIT_VR_LE,
            Syntax::ImplicitLittle => IMPLICIT_VR_LE,
            Syntax::Other(s) => s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DicomWriter {
    pub syntax: Syntax,
    /// Emit the 128-byte preamble and `DICM` magic.
    pub preamble: bool,
    /// Add unrelated elements, a private tag and nested sequences.
    pub noise: bool,
}

struct El {
    tag: DicomTag,
    vr: [u8; 2],
    value: Vec<u8>,
    undefined: bool,
}

fn pad(mut v: Vec<u8>, with: u8) -> Vec<u8> {
    if v.len() % 2 == 1 {
        v.push(with);
    }
    v
}

fn string_el(tag: DicomTag, vr: &[u8; 2], s: &str) -> El {
    let filler = if vr == b"UI" { 0 } else { b' ' };
    El {
        tag,
        vr: *vr,
        value: pad(s.as_bytes().to_vec(), filler),
        undefined: false,
    }
}

fn us_el(tag: DicomTag, v: u16) -> El {
    El {
        tag,
        vr: *b"US",
        value: v.to_le_bytes().to_vec(),
        undefined: false,
    }
}

fn ds(vals: &[f64]) -> String {
    vals.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join("\\")
}

fn long_vr(vr: &[u8; 2]) -> bool {
    matches!(vr, b"OB" | b"OW" | b"SQ" | b"UN" | b"UT")
}

fn write_el(out: &mut Vec<u8>, el: &El, explicit: bool) {
    out.extend_from_slice(&el.tag.group.to_le_bytes());
    out.extend_from_slice(&el.tag.element.to_le_bytes());
    let len = if el.undefined { u32::MAX } else { el.value.len() as u32 };
    if explicit {
        out.extend_from_slice(&el.vr);
        if long_vr(&el.vr) {
            out.extend_from_slice(&[0, 0]);
            out.extend_from_slice(&len.to_le_bytes());
        } else {
            out.extend_from_slice(&(len as u16).to_le_bytes());
        }
    } else {
        out.extend_from_slice(&len.to_le_bytes());
    }
    out.extend_from_slice(&el.value);
}

fn raw_item(out: &mut Vec<u8>, tag: DicomTag, len: u32) {
    out.extend_from_slice(&tag.group.to_le_bytes());
    out.extend_from_slice(&tag.element.to_le_bytes());
    out.extend_from_slice(&len.to_le_bytes());
}

impl DicomWriter {
    pub fn new(syntax: Syntax) -> Self {
        Self {
            syntax,
            preamble: true,
            noise: false,
        }
    }

    pub fn encode(&self, meta: &InstanceMeta, pixels: Option<&[u8]>) -> Vec<u8> {
        let mut out = Vec::new();
        if self.preamble {
            out.extend_from_slice(&[0u8; 128]);
            out.extend_from_slice(b"DICM");
        }
        self.write_meta_group(&mut out, meta);

        let explicit = !matches!(self.syntax, Syntax::ImplicitLittle);
        let encapsulated = matches!(self.syntax, Syntax::Other(_));
        let mut els = self.dataset(meta);
        els.sort_by_key(|e| e.tag);
        for el in &els {
            if el.tag == DicomTag::new(0x0008, 0x1140) {
                self.write_nested_sequence(&mut out, explicit);
                continue;
            }
            write_el(&mut out, el, explicit);
        }
        if let Some(px) = pixels {
            let vr = if meta.bits_allocated == Some(8) { *b"OB" } else { *b"OW" };
            if encapsulated {
                write_el(
                    &mut out,
                    &El {
                        tag: tags::PIXEL_DATA,
                        vr: *b"OB",
                        value: Vec::new(),
                        undefined: true,
                    },
                    true,
                );
                raw_item(&mut out, tags::ITEM, 0);
                let frag = pad(px.to_vec(), 0);
                raw_item(&mut out, tags::ITEM, frag.len() as u32);
                out.extend_from_slice(&frag);
                raw_item(&mut out, tags::SEQUENCE_DELIMITATION, 0);
            } else {
                write_el(
                    &mut out,
                    &El {
                        tag: tags::PIXEL_DATA,
                        vr,
                        value: pad(px.to_vec(), 0),
                        undefined: false,
                    },
                    explicit,
                );
            }
        }
        out
    }

    fn write_meta_group(&self, out: &mut Vec<u8>, meta: &InstanceMeta) {
        let mut body = Vec::new();
        let els = [
            El {
                tag: DicomTag::new(0x0002, 0x0001),
                vr: *b"OB",
                value: vec![0, 1],
                undefined: false,
            },
            string_el(DicomTag::new(0x0002, 0x0002), b"UI", "1.2.840.10008.5.1.4.1.1.4"),
            string_el(DicomTag::new(0x0002, 0x0003), b"UI", &meta.sop_uid),
            string_el(tags::TRANSFER_SYNTAX_UID, b"UI", self.syntax.uid()),
            string_el(DicomTag::new(0x0002, 0x0012), b"UI", "1.2.826.0.1.3680043.10.1"),
        ];
        for el in &els {
            write_el(&mut body, el, true);
        }
        write_el(
            out,
            &El {
                tag: DicomTag::new(0x0002, 0x0000),
                vr: *b"UL",
                value: (body.len() as u32).to_le_bytes().to_vec(),
                undefined: false,
            },
            true,
        );
        out.extend_from_slice(&body);
    }

    fn dataset(&self, m: &InstanceMeta) -> Vec<El> {
        let mut els = vec![
            string_el(tags::SOP_INSTANCE_UID, b"UI", &m.sop_uid),
            string_el(tags::SERIES_INSTANCE_UID, b"UI", &m.series_uid),
            string_el(DicomTag::new(0x0008, 0x0060), b"CS", "MR"),
        ];
        if let Some(v) = &m.study_uid {
            els.push(string_el(tags::STUDY_INSTANCE_UID, b"UI", v));
        }
        if let Some(v) = &m.series_description {
            els.push(string_el(tags::SERIES_DESCRIPTION, b"LO", v));
        }
        if let Some(v) = &m.image_type {
            els.push(string_el(tags::IMAGE_TYPE, b"CS", &v.join("\\")));
        }
        if let Some(v) = m.angio_flag {
            els.push(string_el(tags::ANGIO_FLAG, b"CS", &v.to_string()));
        }
        if let Some(v) = &m.mr_acq_type {
            els.push(string_el(tags::MR_ACQUISITION_TYPE, b"CS", v));
        }
        if let Some(v) = m.image_orientation_patient {
            els.push(string_el(tags::IMAGE_ORIENTATION_PATIENT, b"DS", &ds(&v)));
        }
        if let Some(v) = m.image_position_patient {
            els.push(string_el(tags::IMAGE_POSITION_PATIENT, b"DS", &ds(&v)));
        }
        if let Some(v) = m.pixel_spacing {
            els.push(string_el(tags::PIXEL_SPACING, b"DS", &ds(&v)));
        }
        if let Some(v) = m.series_number {
            els.push(string_el(tags::SERIES_NUMBER, b"IS", &v.to_string()));
        }
        if let Some(v) = m.instance_number {
            els.push(string_el(tags::INSTANCE_NUMBER, b"IS", &v.to_string()));
        }
        if let Some(v) = m.rows {
            els.push(us_el(tags::ROWS, v));
        }
        if let Some(v) = m.cols {
            els.push(us_el(tags::COLUMNS, v));
        }
        if let Some(v) = m.bits_allocated {
            els.push(us_el(tags::BITS_ALLOCATED, v));
        }
        if let Some(v) = m.pixel_representation {
            els.push(us_el(tags::PIXEL_REPRESENTATION, v));
        }
        if let Some(v) = m.rescale_intercept {
            els.push(string_el(tags::RESCALE_INTERCEPT, b"DS", &ds(&[v])));
        }
        if let Some(v) = m.rescale_slope {
            els.push(string_el(tags::RESCALE_SLOPE, b"DS", &ds(&[v])));
        }
        if self.noise {
            els.push(string_el(DicomTag::new(0x0010, 0x0010), b"PN", "DOE^JANE"));
            els.push(El {
                tag: DicomTag::new(0x0029, 0x1010),
                vr: *b"OB",
                value: vec![9, 8, 7, 6, 5, 4],
                undefined: false,
            });
            // placeholder, replaced by an undefined-length nested sequence
            els.push(El {
                tag: DicomTag::new(0x0008, 0x1140),
                vr: *b"SQ",
                value: Vec::new(),
                undefined: true,
            });
            // defined-length sequence with one defined-length item
            let mut item_body = Vec::new();
            write_el(
                &mut item_body,
                &string_el(DicomTag::new(0x0040, 0x0009), b"SH", "SPS1"),
                !matches!(self.syntax, Syntax::ImplicitLittle),
            );
            let mut seq = Vec::new();
            raw_item(&mut seq, tags::ITEM, item_body.len() as u32);
            seq.extend_from_slice(&item_body);
            els.push(El {
                tag: DicomTag::new(0x0040, 0x0275),
                vr: *b"SQ",
                value: seq,
                undefined: false,
            });
        }
        els
    }

    fn write_nested_sequence(&self, out: &mut Vec<u8>, explicit: bool) {
        write_el(
            out,
            &El {
                tag: DicomTag::new(0x0008, 0x1140),
                vr: *b"SQ",
                value: Vec::new(),
                undefined: true,
            },
            explicit,
        );
        raw_item(out, tags::ITEM, u32::MAX);
        write_el(out, &string_el(DicomTag::new(0x0008, 0x1150), b"UI", "1.2.3"), explicit);
        // an inner undefined-length sequence inside the item
        write_el(
            out,
            &El {
                tag: DicomTag::new(0x0008, 0x9215),
                vr: *b"SQ",
                value: Vec::new(),
                undefined: true,
            },
            explicit,
        );
        raw_item(out, tags::ITEM, 4);
        out.extend_from_slice(&[1, 2, 3, 4]);
        raw_item(out, tags::SEQUENCE_DELIMITATION, 0);
        raw_item(out, tags::ITEM_DELIMITATION, 0);
        raw_item(out, tags::SEQUENCE_DELIMITATION, 0);
    }
}
