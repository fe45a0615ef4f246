//! Binary weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "TCNW"                  magic
//! u32                     format version (1)
//! u32                     record count
//! per record:
//!   u16 + UTF-8 bytes     name
//!   u8                    rank
//!   u32 * rank            extents
//!   f32 * product(extents) values
//! u32                     CRC-32 of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::arch::ArchConfig;
use super::network::Model;

pub const MAGIC: &[u8; 4] = b"TCNW";
pub const FORMAT_VERSION: u32 = 1;

pub fn encode_weights<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let mut buf = Vec::with_capacity(16 + model.count_params() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.params().len() as u32).to_le_bytes());
    for (name, tensor) in model.param_names().iter().zip(model.params()) {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(tensor.rank() as u8);
        for &extent in tensor.shape() {
            buf.extend_from_slice(&(extent as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::WeightsFormat("unexpected end of payload".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

/// Parses a weight file and checks it against `config`. Nothing is returned
/// unless the whole file validates.
pub fn decode_weights(bytes: &[u8], config: &ArchConfig) -> Result<Model<f32>> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::WeightsFormat("bad magic".into()));
    }
    if bytes.len() < 16 {
        return Err(Error::WeightsFormat("file truncated".into()));
    }
    let (payload, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4 bytes"));
    if crc32fast::hash(payload) != stored {
        return Err(Error::WeightsFormat("CRC mismatch".into()));
    }

    let mut r = Reader {
        bytes: payload,
        pos: 4,
    };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::WeightsFormat(format!(
            "unsupported version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let count = r.u32()? as usize;
    let expected = config.param_shapes();
    if count != expected.len() {
        return Err(Error::WeightsFormat(format!(
            "{count} records, architecture needs {}",
            expected.len()
        )));
    }
    let mut params = Vec::with_capacity(count);
    for (want_name, want_shape) in &expected {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::WeightsFormat("record name is not UTF-8".into()))?;
        if name != *want_name {
            return Err(Error::WeightsFormat(format!(
                "record `{name}` where `{want_name}` was expected"
            )));
        }
        let rank = r.u8()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|e| e as usize))
            .collect::<Result<Vec<_>>>()?;
        if &shape != want_shape {
            return Err(Error::WeightsFormat(format!(
                "{name}: stored shape {shape:?}, architecture needs {want_shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        let raw = r.take(len * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        params.push(Tensor::from_vec(&shape, data)?);
    }
    if r.pos != payload.len() {
        return Err(Error::WeightsFormat("trailing bytes after records".into()));
    }
    Model::from_params(config.clone(), params)
}

pub fn save_weights<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_weights(model)).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>, config: &ArchConfig) -> Result<Model<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_weights(&bytes, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let cfg = ArchConfig::default();
        let model = Model::<f32>::build(cfg.clone(), 3).unwrap();
        let bytes = encode_weights(&model);
        let loaded = decode_weights(&bytes, &cfg).unwrap();
        assert_eq!(loaded.params(), model.params());
        assert_eq!(encode_weights(&loaded), bytes);
    }

    #[test]
    fn size_is_parameters_plus_header() {
        let cfg = ArchConfig::default();
        let bytes = encode_weights(&Model::<f32>::build(cfg.clone(), 0).unwrap());
        let header: usize = 4 + 4 + 4 + 4;
        let records: usize = cfg
            .param_shapes()
            .iter()
            .map(|(n, s)| 2 + n.len() + 1 + 4 * s.len())
            .sum();
        assert_eq!(bytes.len(), 43_267 * 4 + header + records);
        assert!(bytes.len() < 170 * 1024);
    }

    #[test]
    fn corruption_rejected() {
        let cfg = ArchConfig::default();
        let bytes = encode_weights(&Model::<f32>::build(cfg.clone(), 1).unwrap());

        let truncated = &bytes[..bytes.len() / 2];
        assert!(decode_weights(truncated, &cfg).is_err());

        let mut flipped = bytes.clone();
        flipped[1000] ^= 0x40;
        assert!(matches!(
            decode_weights(&flipped, &cfg),
            Err(Error::WeightsFormat(m)) if m.contains("CRC")
        ));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_weights(&magic, &cfg).is_err());

        let other = ArchConfig {
            dense2: 32,
            ..cfg.clone()
        };
        assert!(decode_weights(&bytes, &other).is_err());
    }

    #[test]
    fn version_mismatch_rejected() {
        let cfg = ArchConfig::default();
        let mut bytes = encode_weights(&Model::<f32>::build(cfg.clone(), 1).unwrap());
        bytes[4] = 9;
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            decode_weights(&bytes, &cfg),
            Err(Error::WeightsFormat(m)) if m.contains("version")
        ));
    }
}
