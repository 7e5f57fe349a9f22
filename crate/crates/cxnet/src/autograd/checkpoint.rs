//! Versioned training checkpoint: embedded config JSON, step counter, and
//! every parameter's value plus Adam moments in the tensor container format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::ctensor::io as tio;
use crate::error::{Error, Result};

use super::param::{ParamStore, Parameter, Value};

const MAGIC: [u8; 4] = *b"CXCK";
const VERSION: u32 = 1;

pub struct CheckpointData {
    pub config_json: String,
    pub step: u64,
    pub params: Vec<Parameter>,
}

fn write_value<W: Write>(w: &mut W, v: &Value) -> Result<()> {
    match v {
        Value::Real(t) => tio::write_real(w, t),
        Value::Complex(t) => tio::write_complex(w, t),
    }
}

fn read_value<R: Read>(r: &mut R) -> Result<Value> {
    Ok(match tio::read_any(r)? {
        tio::TensorPayload::Real(t) => Value::Real(t),
        tio::TensorPayload::Complex(t) => Value::Complex(t),
    })
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let mut lb = [0u8; 8];
    r.read_exact(&mut lb)?;
    let len = u64::from_le_bytes(lb) as usize;
    if len > (1 << 24) {
        return Err(Error::Format(format!("implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("bad utf8 in checkpoint: {e}")))
}

pub fn write_checkpoint<W: Write>(w: &mut W, config_json: &str, step: u64, store: &ParamStore) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_str(w, config_json)?;
    w.write_all(&step.to_le_bytes())?;
    w.write_all(&(store.len() as u64).to_le_bytes())?;
    for p in store.iter() {
        write_str(w, &p.name)?;
        w.write_all(&[u8::from(p.trainable)])?;
        write_value(w, &p.value)?;
        write_value(w, &p.moment1)?;
        write_value(w, &p.moment2)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(r: &mut R) -> Result<CheckpointData> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let config_json = read_str(r)?;
    let mut sb = [0u8; 8];
    r.read_exact(&mut sb)?;
    let step = u64::from_le_bytes(sb);
    r.read_exact(&mut sb)?;
    let n = u64::from_le_bytes(sb) as usize;
    let mut params = Vec::with_capacity(n);
    for _ in 0..n {
        let name = read_str(r)?;
        let mut tb = [0u8; 1];
        r.read_exact(&mut tb)?;
        let value = read_value(r)?;
        let moment1 = read_value(r)?;
        let moment2 = read_value(r)?;
        let grad = value.zeros_like();
        params.push(Parameter { name, value, grad, moment1, moment2, trainable: tb[0] != 0 });
    }
    Ok(CheckpointData { config_json, step, params })
}

pub fn save_checkpoint(path: &Path, config_json: &str, step: u64, store: &ParamStore) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, config_json, step, store)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CheckpointData> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

/// Copy loaded parameters into a freshly constructed store, insisting that
/// names, kinds, and shapes agree exactly.
pub fn restore_into(store: &mut ParamStore, data: CheckpointData) -> Result<u64> {
    if data.params.len() != store.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} parameters, model expects {}",
            data.params.len(),
            store.len()
        )));
    }
    for loaded in data.params {
        let p = store.get_mut(&loaded.name).map_err(|_| {
            Error::Format(format!("checkpoint parameter {} not present in model", loaded.name))
        })?;
        let kinds_match = matches!(
            (&p.value, &loaded.value),
            (Value::Real(_), Value::Real(_)) | (Value::Complex(_), Value::Complex(_))
        );
        if !kinds_match || p.value.dims() != loaded.value.dims() {
            return Err(Error::Format(format!(
                "checkpoint parameter {} has shape {:?}, model expects {:?}",
                loaded.name,
                loaded.value.dims(),
                p.value.dims()
            )));
        }
        p.value = loaded.value;
        p.moment1 = loaded.moment1;
        p.moment2 = loaded.moment2;
        p.trainable = loaded.trainable;
        p.zero_grad();
    }
    Ok(data.step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctensor::{ComplexTensor, Tensor};

    fn sample_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.register_real("a.w", Tensor::from_vec(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(), true)
            .unwrap();
        s.register_complex(
            "b.z",
            ComplexTensor::new(Tensor::scalar(0.5), Tensor::scalar(-0.5)).unwrap(),
            true,
        )
        .unwrap();
        s.register_real("b.running", Tensor::scalar(0.9), false).unwrap();
        s
    }

    #[test]
    fn round_trip_preserves_everything() {
        let store = sample_store();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, "{\"arch\":\"test\"}", 42, &store).unwrap();
        let data = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(data.step, 42);
        assert_eq!(data.config_json, "{\"arch\":\"test\"}");
        let mut fresh = sample_store();
        let step = restore_into(&mut fresh, data).unwrap();
        assert_eq!(step, 42);
        assert!(!fresh.get("b.running").unwrap().trainable);
        // Byte-for-byte stable re-serialization.
        let mut buf2 = Vec::new();
        write_checkpoint(&mut buf2, "{\"arch\":\"test\"}", 42, &fresh).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let store = sample_store();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, "{}", 1, &store).unwrap();
        let data = read_checkpoint(&mut buf.as_slice()).unwrap();
        let mut other = ParamStore::new();
        other.register_real("a.w", Tensor::zeros(vec![3]), true).unwrap();
        other
            .register_complex("b.z", ComplexTensor::zeros(vec![1]), true)
            .unwrap();
        other.register_real("b.running", Tensor::scalar(0.0), false).unwrap();
        assert!(restore_into(&mut other, data).is_err());
    }
}
