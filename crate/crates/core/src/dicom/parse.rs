use super::tag::{tags, DicomTag};
use super::{DicomError, InstanceMeta, EXPLICIT_VR_LE, IMPLICIT_VR_LE};

const UNDEFINED: u32 = 0xFFFF_FFFF;

/// An instance's metadata together with its raw pixel payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedInstance {
    pub meta: InstanceMeta,
    pub pixel_data: Option<Vec<u8>>,
    /// False when the transfer syntax is compressed and only the
    /// metadata could be read.
    pub pixels_decodable: bool,
}

/// Parses a Part-10 stream into [`InstanceMeta`].
pub fn parse_dicom_file(bytes: &[u8]) -> Result<InstanceMeta, DicomError> {
    parse_dicom(bytes).map(|p| p.meta)
}

/// Strict parse: metadata plus uncompressed pixel data.
pub fn parse_dicom(bytes: &[u8]) -> Result<ParsedInstance, DicomError> {
    parse_impl(bytes, false)
}

/// Lenient parse used for curation: compressed transfer syntaxes are read
/// up to the pixel data element, and the result is flagged as not
/// decodable instead of failing.
pub fn parse_dicom_metadata(bytes: &[u8]) -> Result<ParsedInstance, DicomError> {
    parse_impl(bytes, true)
}

#[derive(Clone, Copy)]
enum Encoding {
    Explicit,
    Implicit,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

struct Element<'a> {
    tag: DicomTag,
    len: u32,
    value: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DicomError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(DicomError::TruncatedElement { offset: self.pos }),
        }
    }

    fn u16(&mut self) -> Result<u16, DicomError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, DicomError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn peek_group(&self) -> Option<u16> {
        self.buf
            .get(self.pos..self.pos + 2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
    }

    fn at_end(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn tag(&mut self) -> Result<DicomTag, DicomError> {
        let g = self.u16()?;
        let e = self.u16()?;
        Ok(DicomTag::new(g, e))
    }

    /// Reads one element header. Delimiter items (FFFE group) never carry a VR.
    fn header(&mut self, enc: Encoding) -> Result<(DicomTag, [u8; 2], u32), DicomError> {
        let tag = self.tag()?;
        if tag.group == 0xFFFE {
            let len = self.u32()?;
            return Ok((tag, *b"  ", len));
        }
        match enc {
            Encoding::Explicit => {
                let vr_bytes = self.take(2)?;
                let vr = [vr_bytes[0], vr_bytes[1]];
                let len = if long_length_vr(&vr) {
                    self.take(2)?;
                    self.u32()?
                } else {
                    self.u16()? as u32
                };
                Ok((tag, vr, len))
            }
            Encoding::Implicit => {
                let len = self.u32()?;
                let vr = tags::vr_of(tag).copied().unwrap_or(*b"UN");
                Ok((tag, vr, len))
            }
        }
    }

    fn element(&mut self, enc: Encoding) -> Result<Element<'a>, DicomError> {
        let start = self.pos;
        let (tag, _, len) = self.header(enc)?;
        if len == UNDEFINED {
            if tag == tags::PIXEL_DATA {
                // encapsulated pixel data; caller decides what to do
                return Ok(Element { tag, len, value: &[] });
            }
            self.skip_undefined_sequence(enc)?;
            return Ok(Element { tag, len, value: &[] });
        }
        let value = self
            .take(len as usize)
            .map_err(|_| DicomError::TruncatedElement { offset: start })?;
        Ok(Element { tag, len, value })
    }

    /// Skips the items of an undefined-length sequence, up to and including
    /// its sequence delimitation item.
    fn skip_undefined_sequence(&mut self, enc: Encoding) -> Result<(), DicomError> {
        loop {
            let start = self.pos;
            let tag = self.tag()?;
            let len = self.u32()?;
            match tag {
                t if t == tags::SEQUENCE_DELIMITATION => return Ok(()),
                t if t == tags::ITEM => {
                    if len == UNDEFINED {
                        self.skip_undefined_item(enc)?;
                    } else {
                        self.take(len as usize)
                            .map_err(|_| DicomError::TruncatedElement { offset: start })?;
                    }
                }
                _ => return Err(DicomError::TruncatedElement { offset: start }),
            }
        }
    }

    fn skip_undefined_item(&mut self, enc: Encoding) -> Result<(), DicomError> {
        loop {
            if self.at_end() {
                return Err(DicomError::TruncatedElement { offset: self.pos });
            }
            let save = self.pos;
            let tag = self.tag()?;
            if tag == tags::ITEM_DELIMITATION {
                self.u32()?;
                return Ok(());
            }
            self.pos = save;
            self.element(enc)?;
        }
    }
}

fn long_length_vr(vr: &[u8; 2]) -> bool {
    matches!(
        vr,
        b"OB" | b"OD" | b"OF" | b"OL" | b"OV" | b"OW" | b"SQ" | b"SV" | b"UC" | b"UN" | b"UR" | b"UT" | b"UV"
    )
}

fn text(value: &[u8]) -> String {
    String::from_utf8_lossy(value)
        .trim_end_matches(['\0', ' '])
        .trim_start()
        .to_string()
}

fn multi(value: &[u8]) -> Vec<String> {
    text(value).split('\\').map(|s| s.trim().to_string()).collect()
}

fn reals<const N: usize>(tag: DicomTag, value: &[u8]) -> Result<[f64; N], DicomError> {
    let parts = multi(value);
    let bad = || DicomError::MalformedValue {
        tag,
        value: text(value),
    };
    if parts.len() != N {
        return Err(bad());
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts.iter()) {
        *o = p.parse::<f64>().map_err(|_| bad())?;
    }
    Ok(out)
}

fn real(tag: DicomTag, value: &[u8]) -> Result<f64, DicomError> {
    reals::<1>(tag, value).map(|v| v[0])
}

fn integer(tag: DicomTag, value: &[u8]) -> Result<i64, DicomError> {
    let t = text(value);
    t.parse::<i64>().map_err(|_| DicomError::MalformedValue { tag, value: t })
}

fn ushort(tag: DicomTag, value: &[u8]) -> Result<u16, DicomError> {
    if value.len() < 2 {
        return Err(DicomError::MalformedValue {
            tag,
            value: format!("{value:?}"),
        });
    }
    Ok(u16::from_le_bytes([value[0], value[1]]))
}

fn is_compressed(ts: &str) -> bool {
    ts.starts_with("1.2.840.10008.1.2.4.") || ts == "1.2.840.10008.1.2.5" || ts == "1.2.840.10008.1.2.1.99"
}

fn parse_impl(bytes: &[u8], lenient: bool) -> Result<ParsedInstance, DicomError> {
    let start = if bytes.len() >= 132 && &bytes[128..132] == b"DICM" {
        132
    } else if bytes.len() >= 2 && bytes[0..2] == [0x02, 0x00] {
        0
    } else {
        return Err(DicomError::MissingMagic);
    };
    let mut r = Reader { buf: bytes, pos: start };

    let mut transfer_syntax = None;
    while r.peek_group() == Some(0x0002) {
        let el = r.element(Encoding::Explicit)?;
        if el.tag == tags::TRANSFER_SYNTAX_UID {
            transfer_syntax = Some(text(el.value));
        }
    }
    let ts = transfer_syntax.ok_or(DicomError::MissingTransferSyntax)?;
    let (enc, decodable) = match ts.as_str() {
        EXPLICIT_VR_LE => (Encoding::Explicit, true),
        IMPLICIT_VR_LE => (Encoding::Implicit, true),
        other if lenient && is_compressed(other) => (Encoding::Explicit, false),
        other => return Err(DicomError::UnsupportedTransferSyntax(other.to_string())),
    };

    let mut meta = InstanceMeta::new(String::new(), String::new());
    meta.transfer_syntax = ts.clone();
    let mut pixel_data = None;
    while !r.at_end() {
        let el = r.element(enc)?;
        let v = el.value;
        match el.tag {
            t if t == tags::SERIES_INSTANCE_UID => meta.series_uid = text(v),
            t if t == tags::SOP_INSTANCE_UID => meta.sop_uid = text(v),
            t if t == tags::STUDY_INSTANCE_UID => meta.study_uid = Some(text(v)),
            t if t == tags::SERIES_DESCRIPTION => meta.series_description = Some(text(v)),
            t if t == tags::IMAGE_TYPE => meta.image_type = Some(multi(v)),
            t if t == tags::ANGIO_FLAG => meta.angio_flag = text(v).chars().next(),
            t if t == tags::MR_ACQUISITION_TYPE => meta.mr_acq_type = Some(text(v)),
            t if t == tags::IMAGE_ORIENTATION_PATIENT => meta.image_orientation_patient = Some(reals::<6>(t, v)?),
            t if t == tags::IMAGE_POSITION_PATIENT => meta.image_position_patient = Some(reals::<3>(t, v)?),
            t if t == tags::PIXEL_SPACING => meta.pixel_spacing = Some(reals::<2>(t, v)?),
            t if t == tags::ROWS => meta.rows = Some(ushort(t, v)?),
            t if t == tags::COLUMNS => meta.cols = Some(ushort(t, v)?),
            t if t == tags::BITS_ALLOCATED => meta.bits_allocated = Some(ushort(t, v)?),
            t if t == tags::PIXEL_REPRESENTATION => meta.pixel_representation = Some(ushort(t, v)?),
            t if t == tags::SERIES_NUMBER => meta.series_number = Some(integer(t, v)?),
            t if t == tags::INSTANCE_NUMBER => meta.instance_number = Some(integer(t, v)?),
            t if t == tags::RESCALE_SLOPE => meta.rescale_slope = Some(real(t, v)?),
            t if t == tags::RESCALE_INTERCEPT => meta.rescale_intercept = Some(real(t, v)?),
            t if t == tags::PIXEL_DATA => {
                if !decodable || el.len == UNDEFINED {
                    // encapsulated payload: metadata is complete at this point
                    break;
                }
                pixel_data = Some(v.to_vec());
            }
            _ => {}
        }
    }
    meta.validate()?;
    Ok(ParsedInstance {
        meta,
        pixel_data,
        pixels_decodable: decodable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::writer::{DicomWriter, Syntax};

    fn base() -> InstanceMeta {
        let mut m = InstanceMeta::new("1.2.3.4", "1.2.3.4.1");
        m.series_description = Some("AX FLAIR".into());
        m.image_type = Some(vec!["ORIGINAL".into(), "PRIMARY".into(), "M".into()]);
        m.image_orientation_patient = Some([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        m
    }

    #[test]
    fn description_echoed() {
        let bytes = DicomWriter::new(Syntax::ExplicitLittle).encode(&base(), None);
        let m = parse_dicom_file(&bytes).unwrap();
        assert_eq!(m.series_description.as_deref(), Some("AX FLAIR"));
    }

    #[test]
    fn absent_description_preserved() {
        let mut meta = base();
        meta.series_description = None;
        let bytes = DicomWriter::new(Syntax::ImplicitLittle).encode(&meta, None);
        let m = parse_dicom_file(&bytes).unwrap();
        assert_eq!(m.series_description, None);
        assert_eq!(m.angio_flag, None);
        assert_eq!(m.series_number, None);
    }

    #[test]
    fn orientation_parsed_as_unit_vectors() {
        for syntax in [Syntax::ExplicitLittle, Syntax::ImplicitLittle] {
            let bytes = DicomWriter::new(syntax).encode(&base(), None);
            let m = parse_dicom_file(&bytes).unwrap();
            assert_eq!(m.image_orientation_patient, Some([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]));
        }
    }

    #[test]
    fn missing_magic() {
        assert_eq!(parse_dicom_file(b"not a dicom file at all"), Err(DicomError::MissingMagic));
        assert_eq!(parse_dicom_file(&[]), Err(DicomError::MissingMagic));
    }

    #[test]
    fn no_preamble_accepted() {
        let w = DicomWriter {
            preamble: false,
            ..DicomWriter::new(Syntax::ExplicitLittle)
        };
        let m = parse_dicom_file(&w.encode(&base(), None)).unwrap();
        assert_eq!(m.series_uid, "1.2.3.4");
    }

    #[test]
    fn compressed_rejected_but_lenient_reads_metadata() {
        let w = DicomWriter::new(Syntax::Other("1.2.840.10008.1.2.4.50".into()));
        let bytes = w.encode(&base(), Some(&[0u8; 16]));
        assert_eq!(
            parse_dicom_file(&bytes),
            Err(DicomError::UnsupportedTransferSyntax("1.2.840.10008.1.2.4.50".into()))
        );
        let p = parse_dicom_metadata(&bytes).unwrap();
        assert!(!p.pixels_decodable);
        assert_eq!(p.meta.series_description.as_deref(), Some("AX FLAIR"));
        assert_eq!(p.pixel_data, None);
    }

    #[test]
    fn big_endian_rejected() {
        let bytes = DicomWriter::new(Syntax::Other("1.2.840.10008.1.2.2".into())).encode(&base(), None);
        assert!(matches!(
            parse_dicom_metadata(&bytes),
            Err(DicomError::UnsupportedTransferSyntax(_))
        ));
    }

    #[test]
    fn truncated_element_reported() {
        let bytes = DicomWriter::new(Syntax::ExplicitLittle).encode(&base(), None);
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(parse_dicom_file(cut), Err(DicomError::TruncatedElement { .. })));
    }

    #[test]
    fn unknown_elements_and_sequences_skipped() {
        let w = DicomWriter {
            noise: true,
            ..DicomWriter::new(Syntax::ExplicitLittle)
        };
        let bytes = w.encode(&base(), Some(&[1, 0, 2, 0]));
        let p = parse_dicom(&bytes).unwrap();
        assert_eq!(p.meta, {
            let mut m = base();
            m.transfer_syntax = EXPLICIT_VR_LE.into();
            m
        });
        assert_eq!(p.pixel_data.as_deref(), Some(&[1u8, 0, 2, 0][..]));
        let w = DicomWriter {
            noise: true,
            ..DicomWriter::new(Syntax::ImplicitLittle)
        };
        assert_eq!(parse_dicom_file(&w.encode(&base(), None)).unwrap().series_description.as_deref(), Some("AX FLAIR"));
    }

    #[test]
    fn missing_series_uid_rejected() {
        let mut m = base();
        m.series_uid = String::new();
        let bytes = DicomWriter::new(Syntax::ExplicitLittle).encode(&m, None);
        assert_eq!(parse_dicom_file(&bytes), Err(DicomError::MissingSeriesUid));
    }

    #[test]
    fn non_unit_orientation_rejected() {
        let mut m = base();
        m.image_orientation_patient = Some([2.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let bytes = DicomWriter::new(Syntax::ExplicitLittle).encode(&m, None);
        assert!(matches!(parse_dicom_file(&bytes), Err(DicomError::InvalidOrientation(_))));
    }
}
