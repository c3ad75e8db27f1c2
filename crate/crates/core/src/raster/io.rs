//! The `RTS1` container.
//!
//! ```text
//! bytes 0..4      magic "RTS1"
//! bytes 4..8      u32 LE header length N
//! bytes 8..8+N    UTF-8 JSON header
//!                 {"dims":[T,C,H,W],"dtype":"f32"|"u16","band_names":[..],
//!                  "step_days":int,"origin_day":int,"nodata":float|null,
//!                  "class_table":[..] (labels only),"unknown_id":int (labels only)}
//! then            T·C·H·W little-endian values, row-major (T, C, H, W)
//! ```
//!
//! Labels use dims `[1, 1, H, W]` and dtype `"u16"`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabelGrid, RasterError, RasterTimeSeries};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RTS1";
const MAGIC_PREFIX: &[u8; 3] = b"RTS";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dims: [usize; 4],
    dtype: String,
    band_names: Vec<String>,
    step_days: u32,
    origin_day: u32,
    nodata: Option<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class_table: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unknown_id: Option<u16>,
}

fn frame(header: &Header, payload: &[u8]) -> Vec<u8> {
    let json = serde_json::to_vec(header).expect("header serializes");
    let mut out = Vec::with_capacity(8 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    out
}

/// Splits a container into its header and payload bytes.
fn unframe(bytes: &[u8]) -> std::result::Result<(Header, &[u8]), RasterError> {
    if bytes.len() < 4 {
        return Err(RasterError::Truncated { expected: 8, found: bytes.len() });
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if &magic != MAGIC {
        if &magic[..3] == MAGIC_PREFIX {
            return Err(RasterError::VersionMismatch {
                found: String::from_utf8_lossy(&magic).into_owned(),
            });
        }
        return Err(RasterError::BadMagic(magic));
    }
    if bytes.len() < 8 {
        return Err(RasterError::Truncated { expected: 8, found: bytes.len() });
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() < 8 + n {
        return Err(RasterError::Truncated { expected: 8 + n, found: bytes.len() });
    }
    let header: Header = serde_json::from_slice(&bytes[8..8 + n])
        .map_err(|e| RasterError::Inconsistent(format!("header: {e}")))?;
    Ok((header, &bytes[8 + n..]))
}

fn check_payload(header: &Header, payload: &[u8], width: usize) -> std::result::Result<usize, RasterError> {
    let count: usize = header.dims.iter().product();
    let expected = count * width;
    if payload.len() < expected {
        return Err(RasterError::Truncated { expected, found: payload.len() });
    }
    if payload.len() > expected {
        return Err(RasterError::Inconsistent(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    Ok(count)
}

pub fn encode_series(series: &RasterTimeSeries) -> std::result::Result<Vec<u8>, RasterError> {
    series.validate()?;
    let header = Header {
        dims: series.dims(),
        dtype: "f32".into(),
        band_names: series.band_names.clone(),
        step_days: series.step_days,
        origin_day: series.origin_day,
        nodata: series.nodata,
        class_table: None,
        unknown_id: None,
    };
    let mut payload = Vec::with_capacity(series.values().len() * 4);
    for v in series.values() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    Ok(frame(&header, &payload))
}

pub fn decode_series(bytes: &[u8]) -> std::result::Result<RasterTimeSeries, RasterError> {
    let (header, payload) = unframe(bytes)?;
    if header.dtype != "f32" {
        return Err(RasterError::Inconsistent(format!(
            "series dtype must be f32, header says {:?}",
            header.dtype
        )));
    }
    if header.class_table.is_some() {
        return Err(RasterError::Inconsistent("series header carries a class_table".into()));
    }
    if header.band_names.len() != header.dims[1] {
        return Err(RasterError::Inconsistent(format!(
            "{} band names for {} channels",
            header.band_names.len(),
            header.dims[1]
        )));
    }
    check_payload(&header, payload, 4)?;
    let values = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    RasterTimeSeries::new(
        header.dims,
        values,
        header.band_names,
        header.step_days,
        header.origin_day,
        header.nodata,
    )
    .map_err(|e| RasterError::Inconsistent(e.to_string()))
}

pub fn encode_labels(labels: &LabelGrid) -> std::result::Result<Vec<u8>, RasterError> {
    labels.validate()?;
    let header = Header {
        dims: [1, 1, labels.height(), labels.width()],
        dtype: "u16".into(),
        band_names: vec!["label".into()],
        step_days: 1,
        origin_day: 0,
        nodata: None,
        class_table: Some(labels.class_table.clone()),
        unknown_id: Some(labels.unknown_id),
    };
    let mut payload = Vec::with_capacity(labels.ids().len() * 2);
    for v in labels.ids() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    Ok(frame(&header, &payload))
}

pub fn decode_labels(bytes: &[u8]) -> std::result::Result<LabelGrid, RasterError> {
    let (header, payload) = unframe(bytes)?;
    if header.dtype != "u16" {
        return Err(RasterError::Inconsistent(format!(
            "label dtype must be u16, header says {:?}",
            header.dtype
        )));
    }
    let [t, c, h, w] = header.dims;
    if t != 1 || c != 1 {
        return Err(RasterError::Inconsistent(format!("label dims must be [1,1,H,W], got {:?}", header.dims)));
    }
    let class_table = header
        .class_table
        .clone()
        .ok_or_else(|| RasterError::Inconsistent("label header lacks class_table".into()))?;
    check_payload(&header, payload, 2)?;
    let ids = payload
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes(b.try_into().unwrap()))
        .collect();
    LabelGrid::new(h, w, ids, class_table, header.unknown_id.unwrap_or(0))
        .map_err(|e| RasterError::Inconsistent(e.to_string()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_series(path: impl AsRef<Path>, series: &RasterTimeSeries) -> Result<()> {
    write_bytes(path.as_ref(), &encode_series(series)?)
}

pub fn read_series(path: impl AsRef<Path>) -> Result<RasterTimeSeries> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_series(&bytes)?)
}

pub fn write_labels(path: impl AsRef<Path>, labels: &LabelGrid) -> Result<()> {
    write_bytes(path.as_ref(), &encode_labels(labels)?)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_labels(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp_series(dims: [usize; 4]) -> RasterTimeSeries {
        let n: usize = dims.iter().product();
        let values = (0..n).map(|i| i as f32 * 0.25 - 3.0).collect();
        let bands = (0..dims[1]).map(|c| format!("B{}", c + 1)).collect();
        RasterTimeSeries::new(dims, values, bands, 15, 0, Some(-9999.0)).unwrap()
    }

    #[test]
    fn roundtrip_small_series() {
        let s = ramp_series([2, 3, 4, 5]);
        let back = decode_series(&encode_series(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_series(&ramp_series([1, 1, 2, 2])).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_series(&bytes), Err(RasterError::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn other_version_is_a_version_error() {
        let mut bytes = encode_series(&ramp_series([1, 1, 2, 2])).unwrap();
        bytes[3] = b'2';
        assert!(matches!(decode_series(&bytes), Err(RasterError::VersionMismatch { .. })));
    }

    #[test]
    fn truncated_payload_is_detected() {
        let bytes = encode_series(&ramp_series([1, 2, 2, 2])).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        assert!(matches!(decode_series(cut), Err(RasterError::Truncated { .. })));
    }

    #[test]
    fn dims_band_mismatch_is_inconsistent() {
        let s = ramp_series([1, 2, 2, 2]);
        let bytes = encode_series(&s).unwrap();
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[8..8 + n]).unwrap().replace("\"B2\"", "\"B2\",\"B3\"");
        let mut forged = Vec::new();
        forged.extend_from_slice(MAGIC);
        forged.extend_from_slice(&(header.len() as u32).to_le_bytes());
        forged.extend_from_slice(header.as_bytes());
        forged.extend_from_slice(&bytes[8 + n..]);
        assert!(matches!(decode_series(&forged), Err(RasterError::Inconsistent(_))));
    }

    #[test]
    fn payload_size_follows_the_format() {
        let s = RasterTimeSeries::zeros([24, 10, 64, 64], 15);
        let bytes = encode_series(&s).unwrap();
        let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        assert_eq!(bytes.len(), 8 + n + 24 * 10 * 64 * 64 * 4);
    }

    #[test]
    fn labels_roundtrip() {
        let ids = vec![0, 1, 2, 1, 0, 2];
        let g = LabelGrid::new(2, 3, ids, vec!["unknown".into(), "a".into(), "b".into()], 0).unwrap();
        let back = decode_labels(&encode_labels(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn series_file_is_not_a_label_file() {
        let bytes = encode_series(&ramp_series([1, 1, 2, 2])).unwrap();
        assert!(matches!(decode_labels(&bytes), Err(RasterError::Inconsistent(_))));
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(
            t in 1usize..4, c in 1usize..4, h in 1usize..6, w in 1usize..6,
            seed in any::<u64>(), step in 1u32..30, origin in 0u32..365,
        ) {
            let mut rng = crate::rng::SplitMix64::new(seed);
            let values = (0..t * c * h * w).map(|_| f32::from_bits(rng.next_u64() as u32 & 0x7f7f_ffff)).collect();
            let bands = (0..c).map(|i| format!("band-{i}")).collect();
            let s = RasterTimeSeries::new([t, c, h, w], values, bands, step, origin, None).unwrap();
            let back = decode_series(&encode_series(&s).unwrap()).unwrap();
            prop_assert_eq!(back.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                            s.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            prop_assert_eq!(back, s);
        }
    }
}
