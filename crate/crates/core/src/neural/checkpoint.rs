//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic     8 bytes  "SAGINCNN"
//! version   u32      1
//! width     u32      bytes per parameter (4 or 8)
//! seed      u64
//! input_h   u32
//! input_w   u32
//! n_conv    u32, then n_conv x (channels u32, kernel u32)
//! n_dense   u32, then n_dense x (width u32)
//! n_params  u64
//! params    n_params x scalar, conv (weight, bias) then dense (weight, bias)
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use super::cnn::{Arch, CnnModel, ConvSpec};
use crate::error::NeuralError;
use crate::scalar::Scalar;

const MAGIC: &[u8; 8] = b"SAGINCNN";
const VERSION: u32 = 1;

pub fn encode<S: Scalar>(model: &CnnModel<S>) -> Vec<u8> {
    let arch = model.arch();
    let mut out = Vec::with_capacity(64 + model.param_count() * S::BYTES);
    out.extend_from_slice(MAGIC);
    let u32s = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    u32s(&mut out, VERSION as usize);
    u32s(&mut out, S::BYTES);
    out.extend_from_slice(&model.seed().to_le_bytes());
    u32s(&mut out, arch.input_h);
    u32s(&mut out, arch.input_w);
    u32s(&mut out, arch.conv.len());
    for c in &arch.conv {
        u32s(&mut out, c.channels);
        u32s(&mut out, c.kernel);
    }
    u32s(&mut out, arch.dense.len());
    for &d in &arch.dense {
        u32s(&mut out, d);
    }
    out.extend_from_slice(&(model.param_count() as u64).to_le_bytes());
    for p in model.params() {
        for &v in p {
            v.write_le(&mut out);
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode<S: Scalar>(bytes: &[u8]) -> Result<CnnModel<S>, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("bad magic".into());
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(format!("unsupported version {version}"));
    }
    let width = r.u32()?;
    if width != S::BYTES {
        return Err(format!(
            "parameter width {width} does not match requested scalar ({} bytes)",
            S::BYTES
        ));
    }
    let seed = r.u64()?;
    let input_h = r.u32()?;
    let input_w = r.u32()?;
    let n_conv = r.u32()?;
    let conv = (0..n_conv)
        .map(|_| {
            Ok(ConvSpec {
                channels: r.u32()?,
                kernel: r.u32()?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    let n_dense = r.u32()?;
    let dense = (0..n_dense).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let arch = Arch {
        input_h,
        input_w,
        conv,
        dense,
    };
    let mut model = CnnModel::<S>::zeros(&arch).map_err(|e| e.to_string())?;
    model.set_seed(seed);
    let n_params = r.u64()? as usize;
    if n_params != model.param_count() {
        return Err(format!(
            "{n_params} parameters, architecture needs {}",
            model.param_count()
        ));
    }
    for p in model.params_mut() {
        for v in p.iter_mut() {
            *v = S::read_le(r.take(S::BYTES)?);
        }
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(model)
}

pub fn save<S: Scalar>(model: &CnnModel<S>, path: &Path) -> Result<(), NeuralError> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn load<S: Scalar>(path: &Path) -> Result<CnnModel<S>, NeuralError> {
    let bytes = fs::read(path)?;
    decode(&bytes).map_err(|reason| NeuralError::Checkpoint {
        path: path.to_path_buf(),
        reason,
    })
}

fn model_path(dir: &Path, combo: usize) -> PathBuf {
    dir.join(format!("cnn_{combo:03}.ckpt"))
}

/// Writes one checkpoint per combination as `cnn_NNN.ckpt`.
pub fn save_models<S: Scalar>(dir: &Path, models: &[CnnModel<S>]) -> Result<(), NeuralError> {
    fs::create_dir_all(dir)?;
    for (c, m) in models.iter().enumerate() {
        save(m, &model_path(dir, c))?;
    }
    Ok(())
}

pub fn load_models<S: Scalar>(dir: &Path, count: usize) -> Result<Vec<CnnModel<S>>, NeuralError> {
    (0..count)
        .map(|c| {
            let path = model_path(dir, c);
            if !path.exists() {
                return Err(NeuralError::Checkpoint {
                    path,
                    reason: "missing".into(),
                });
            }
            load(&path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let arch = Arch::reference(8, 16);
        let m = CnnModel::<f64>::new(&arch, 42).unwrap();
        let bytes = encode(&m);
        let back: CnnModel<f64> = decode(&bytes).unwrap();
        assert_eq!(back.seed(), 42);
        for (a, b) in m.params().iter().zip(back.params()) {
            let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn f32_round_trip() {
        let arch = Arch::reference(8, 2);
        let m = CnnModel::<f32>::new(&arch, 5).unwrap();
        assert_eq!(decode::<f32>(&encode(&m)).unwrap(), m);
        assert!(decode::<f64>(&encode(&m)).unwrap_err().contains("width"));
    }

    #[test]
    fn corrupt_inputs() {
        let m = CnnModel::<f64>::new(&Arch::reference(8, 2), 5).unwrap();
        let bytes = encode(&m);
        assert!(decode::<f64>(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode::<f64>(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert_eq!(decode::<f64>(&bad).unwrap_err(), "bad magic");
    }

    #[test]
    fn model_set_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let arch = Arch::reference(8, 2);
        let models: Vec<_> = (0..3).map(|s| CnnModel::<f64>::new(&arch, s).unwrap()).collect();
        save_models(dir.path(), &models).unwrap();
        assert_eq!(load_models::<f64>(dir.path(), 3).unwrap(), models);
        assert!(load_models::<f64>(dir.path(), 4).is_err());
    }
}
