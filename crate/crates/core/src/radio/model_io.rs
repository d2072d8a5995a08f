//! `MLPM` binary model files.
//!
//! Little-endian: magic `MLPM`, u32 layer count, then per layer u32 rows,
//! u32 cols, f32 weights (row-major), f32 biases and one activation byte;
//! finally u32 input dimension followed by the f32 standardization means
//! and scales.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::mlp::{Activation, Layer, MlpModel, Standardizer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"MLPM";

pub fn encode_mlpm(model: &MlpModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * model.parameter_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    let f32s = |out: &mut Vec<u8>, it: &mut dyn Iterator<Item = f64>| {
        for v in it {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    };
    for layer in &model.layers {
        let (rows, cols) = layer.weights.shape();
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        out.extend_from_slice(&(cols as u32).to_le_bytes());
        f32s(&mut out, &mut (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|rc| layer.weights[rc]));
        f32s(&mut out, &mut layer.bias.iter().copied());
        out.push(layer.activation.tag());
    }
    out.extend_from_slice(&(model.input.dim() as u32).to_le_bytes());
    f32s(&mut out, &mut model.input.mean.iter().copied());
    f32s(&mut out, &mut model.input.scale.iter().copied());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> std::result::Result<&[u8], String> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f32s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let bytes = self.take(n.checked_mul(4).ok_or("size overflow")?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
            .collect())
    }
}

fn decode(buf: &[u8]) -> std::result::Result<MlpModel, String> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err("bad magic, expected MLPM".into());
    }
    let count = c.u32()?;
    if count == 0 {
        return Err("model has no layers".into());
    }
    let mut layers = Vec::with_capacity(count.min(1024));
    for l in 0..count {
        let (rows, cols) = (c.u32()?, c.u32()?);
        let w = c.f32s(rows * cols)?;
        let b = c.f32s(rows)?;
        let tag = c.take(1)?[0];
        let activation = Activation::from_tag(tag).ok_or(format!("layer {l}: unknown activation {tag}"))?;
        if let Some(prev) = layers.last().map(|p: &Layer| p.weights.nrows()) {
            if prev != cols {
                return Err(format!("layer {l} expects {cols} inputs, previous layer gives {prev}"));
            }
        }
        layers.push(Layer {
            weights: DMatrix::from_row_slice(rows, cols, &w),
            bias: DVector::from_vec(b),
            activation,
        });
    }
    let dim = c.u32()?;
    if dim != layers[0].weights.ncols() {
        return Err(format!("standardizer has {dim} dims, network takes {}", layers[0].weights.ncols()));
    }
    let input = Standardizer {
        mean: c.f32s(dim)?,
        scale: c.f32s(dim)?,
    };
    if c.pos != buf.len() {
        return Err(format!("{} trailing bytes", buf.len() - c.pos));
    }
    Ok(MlpModel { layers, input })
}

pub fn decode_mlpm(buf: &[u8]) -> Result<MlpModel> {
    decode(buf).map_err(|msg| Error::format("<memory>", msg))
}

pub fn write_mlpm(path: &Path, model: &MlpModel) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_mlpm(model)).map_err(|e| Error::io(path, e))
}

pub fn read_mlpm(path: &Path) -> Result<MlpModel> {
    let mut buf = vec![];
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode(&buf).map_err(|msg| Error::format(path, msg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_f32_values() {
        let mut m = MlpModel::init(3, &[5, 4], 3, 11);
        m.input = Standardizer {
            mean: vec![1.0, -2.0, 0.5],
            scale: vec![2.0, 0.25, 1.0],
        };
        let bytes = encode_mlpm(&m);
        let back = decode_mlpm(&bytes).unwrap();
        assert_eq!(back.layers.len(), 3);
        for (a, b) in m.layers.iter().zip(&back.layers) {
            assert_eq!(a.activation, b.activation);
            for (x, y) in a.weights.iter().zip(b.weights.iter()) {
                assert_eq!(*x as f32 as f64, *y);
            }
        }
        assert_eq!(back.input, m.input);
        // a second round trip is exact
        assert_eq!(encode_mlpm(&back), bytes);
    }

    #[test]
    fn layout_header_and_row_major_weights() {
        let mut m = MlpModel::init(2, &[], 2, 0);
        m.layers[0].weights = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = encode_mlpm(&m);
        assert_eq!(&b[..4], b"MLPM");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        let w: Vec<f32> = b[16..32]
            .chunks(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(w, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(b[40], Activation::Linear.tag());
    }

    #[test]
    fn corrupt_files_are_format_errors() {
        let bytes = encode_mlpm(&MlpModel::init(2, &[3], 1, 0));
        assert!(matches!(decode_mlpm(&bytes[..bytes.len() - 1]), Err(Error::Format { .. })));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_mlpm(&bad), Err(Error::Format { .. })));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(read_mlpm(&dir.path().join("none.mlpm")), Err(Error::Io { .. })));
    }
}
