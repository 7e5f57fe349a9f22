//! Flat binary tensor container ("CXT1").
//!
//! Layout: magic `CXT1` | dtype code (u8) | rank (u64 LE) | dims (u64 LE each)
//! | payload, row-major little-endian. Complex payloads store the full real
//! part followed by the full imaginary part. Dtype codes:
//!
//! | code | payload                  |
//! |------|--------------------------|
//! | 0    | complex, f64 parts       |
//! | 1    | complex, f32 parts       |
//! | 2    | real, f64                |
//! | 3    | real, f32                |
//!
//! Writers emit f64 (codes 0 and 2); readers accept all four codes and
//! promote f32 payloads to f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::complex::ComplexTensor;
use super::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"CXT1";

const CODE_COMPLEX_F64: u8 = 0;
const CODE_COMPLEX_F32: u8 = 1;
const CODE_REAL_F64: u8 = 2;
const CODE_REAL_F32: u8 = 3;

/// A tensor read back from a container: real or complex.
#[derive(Debug, Clone)]
pub enum TensorPayload {
    Real(Tensor),
    Complex(ComplexTensor),
}

fn write_header<W: Write>(w: &mut W, code: u8, dims: &[usize]) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&[code])?;
    w.write_all(&(dims.len() as u64).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    Ok(())
}

fn write_f64s<W: Write>(w: &mut W, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 8);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn write_complex<W: Write>(w: &mut W, t: &ComplexTensor) -> Result<()> {
    write_header(w, CODE_COMPLEX_F64, t.dims())?;
    write_f64s(w, t.re().data())?;
    write_f64s(w, t.im().data())
}

pub fn write_real<W: Write>(w: &mut W, t: &Tensor) -> Result<()> {
    write_header(w, CODE_REAL_F64, t.dims())?;
    write_f64s(w, t.data())
}

fn read_exact_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_payload<R: Read>(r: &mut R, n: usize, f32_payload: bool) -> Result<Vec<f64>> {
    if f32_payload {
        let mut buf = vec![0u8; n * 4];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect())
    } else {
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }
}

pub fn read_any<R: Read>(r: &mut R) -> Result<TensorPayload> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != MAGIC {
        return Err(Error::Format(format!("bad tensor magic {magic:?}")));
    }
    let mut code = [0u8; 1];
    r.read_exact(&mut code)?;
    let code = code[0];
    let rank = read_exact_u64(r)? as usize;
    if rank > 16 {
        return Err(Error::Format(format!("implausible tensor rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_exact_u64(r)? as usize);
    }
    let numel: usize = dims.iter().product();
    match code {
        CODE_COMPLEX_F64 | CODE_COMPLEX_F32 => {
            let f32p = code == CODE_COMPLEX_F32;
            let re = Tensor::from_vec(dims.clone(), read_payload(r, numel, f32p)?)?;
            let im = Tensor::from_vec(dims, read_payload(r, numel, f32p)?)?;
            Ok(TensorPayload::Complex(ComplexTensor::new(re, im)?))
        }
        CODE_REAL_F64 | CODE_REAL_F32 => {
            let f32p = code == CODE_REAL_F32;
            Ok(TensorPayload::Real(Tensor::from_vec(dims, read_payload(r, numel, f32p)?)?))
        }
        other => Err(Error::Format(format!("unknown tensor dtype code {other}"))),
    }
}

pub fn read_complex<R: Read>(r: &mut R) -> Result<ComplexTensor> {
    match read_any(r)? {
        TensorPayload::Complex(t) => Ok(t),
        TensorPayload::Real(_) => Err(Error::Format("expected complex tensor, found real".into())),
    }
}

pub fn read_real<R: Read>(r: &mut R) -> Result<Tensor> {
    match read_any(r)? {
        TensorPayload::Real(t) => Ok(t),
        TensorPayload::Complex(_) => Err(Error::Format("expected real tensor, found complex".into())),
    }
}

pub fn save_complex(path: &Path, t: &ComplexTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_complex(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_complex(path: &Path) -> Result<ComplexTensor> {
    read_complex(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_round_trip_is_bit_identical() {
        let t = ComplexTensor::new(
            Tensor::from_vec(vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-300, 7.0]).unwrap(),
            Tensor::from_vec(vec![2, 3], vec![0.5, 2.0, -0.125, 9.0, -4.0, 6.0]).unwrap(),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_complex(&mut buf, &t).unwrap();
        let mut again = Vec::new();
        write_complex(&mut again, &read_complex(&mut buf.as_slice()).unwrap()).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn real_round_trip_and_kind_check() {
        let t = Tensor::from_vec(vec![4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut buf = Vec::new();
        write_real(&mut buf, &t).unwrap();
        let back = read_real(&mut buf.as_slice()).unwrap();
        assert_eq!(back.data(), t.data());
        assert!(read_complex(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn bad_magic_is_rejected() {
        let buf = b"NOPE\x00\x00\x00\x00\x00\x00\x00\x00\x00".to_vec();
        assert!(read_any(&mut buf.as_slice()).is_err());
    }
}
