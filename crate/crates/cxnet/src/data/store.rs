//! In-memory patch collections and their on-disk container.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::ctensor::{io as tio, Tensor};
use crate::error::{Error, Result};

/// A labeled pair of patch indices; `label` is true for a match.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchPair {
    pub a: usize,
    pub b: usize,
    pub label: bool,
}

/// Two patches of one 3D point plus a patch of a different point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchTriplet {
    pub p1: usize,
    pub p2: usize,
    pub n: usize,
}

/// Grayscale patches (P, 1, S, S) in [0,1] with one 3D-point id per patch.
#[derive(Debug)]
pub struct PatchStore {
    patches: Tensor,
    point_ids: Vec<u64>,
    source: String,
}

impl PatchStore {
    pub fn new(patches: Tensor, point_ids: Vec<u64>, source: impl Into<String>) -> Result<Self> {
        let d = patches.dims();
        if d.len() != 4 || d[1] != 1 {
            return Err(Error::contract(
                "PatchStore::new",
                format!("expected (P,1,S,S), got {d:?}"),
            ));
        }
        if d[0] != point_ids.len() {
            return Err(Error::contract(
                "PatchStore::new",
                format!("{} patches but {} point ids", d[0], point_ids.len()),
            ));
        }
        if d[2] != d[3] {
            return Err(Error::contract("PatchStore::new", format!("non-square patches {d:?}")));
        }
        if !patches.data().iter().all(|&v| (0.0..=1.0).contains(&v)) {
            return Err(Error::contract("PatchStore::new", "patch values outside [0,1]"));
        }
        Ok(PatchStore { patches, point_ids, source: source.into() })
    }

    pub fn len(&self) -> usize {
        self.point_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.point_ids.is_empty()
    }

    pub fn patch_size(&self) -> usize {
        self.patches.dims()[2]
    }

    pub fn patches(&self) -> &Tensor {
        &self.patches
    }

    pub fn point_ids(&self) -> &[u64] {
        &self.point_ids
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Batch tensor (K, 1, S, S) for the given patch indices.
    pub fn gather(&self, indices: &[usize]) -> Result<Tensor> {
        let s = self.patch_size();
        let plane = s * s;
        let mut out = Vec::with_capacity(indices.len() * plane);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::contract("PatchStore::gather", format!("index {i} out of range")));
            }
            out.extend_from_slice(&self.patches.data()[i * plane..(i + 1) * plane]);
        }
        Tensor::from_vec(vec![indices.len(), 1, s, s], out)
    }

    /// Stacked 2-channel tensors (K, 2, S, S) for pair scoring.
    pub fn gather_pairs(&self, pairs: &[PatchPair]) -> Result<(Tensor, Vec<bool>)> {
        let s = self.patch_size();
        let plane = s * s;
        let mut out = Vec::with_capacity(pairs.len() * 2 * plane);
        let mut labels = Vec::with_capacity(pairs.len());
        for p in pairs {
            if p.a >= self.len() || p.b >= self.len() {
                return Err(Error::contract("PatchStore::gather_pairs", "pair index out of range"));
            }
            out.extend_from_slice(&self.patches.data()[p.a * plane..(p.a + 1) * plane]);
            out.extend_from_slice(&self.patches.data()[p.b * plane..(p.b + 1) * plane]);
            labels.push(p.label);
        }
        Ok((Tensor::from_vec(vec![pairs.len(), 2, s, s], out)?, labels))
    }

    /// Point ids grouped with their patch indices, in first-seen order.
    pub fn group_by_point(&self) -> Vec<(u64, Vec<usize>)> {
        let mut order: Vec<u64> = Vec::new();
        let mut groups: std::collections::HashMap<u64, Vec<usize>> = std::collections::HashMap::new();
        for (i, &pid) in self.point_ids.iter().enumerate() {
            let entry = groups.entry(pid).or_default();
            if entry.is_empty() {
                order.push(pid);
            }
            entry.push(i);
        }
        order.into_iter().map(|pid| (pid, groups.remove(&pid).unwrap())).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        tio::write_real(&mut w, &self.patches)?;
        w.write_all(&(self.point_ids.len() as u64).to_le_bytes())?;
        for &id in &self.point_ids {
            w.write_all(&id.to_le_bytes())?;
        }
        w.write_all(&(self.source.len() as u64).to_le_bytes())?;
        w.write_all(self.source.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PatchStore> {
        let mut r = BufReader::new(File::open(path)?);
        let patches = tio::read_real(&mut r)?;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        let mut point_ids = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut b8)?;
            point_ids.push(u64::from_le_bytes(b8));
        }
        r.read_exact(&mut b8)?;
        let slen = u64::from_le_bytes(b8) as usize;
        let mut sbuf = vec![0u8; slen];
        r.read_exact(&mut sbuf)?;
        let source = String::from_utf8(sbuf).map_err(|e| Error::Format(format!("bad source string: {e}")))?;
        PatchStore::new(patches, point_ids, source)
    }
}

/// Mean-pool an even-sized grayscale plane down by 2x.
pub(crate) fn mean_pool_2x(plane: &[f64], size: usize) -> Vec<f64> {
    let out_size = size / 2;
    let mut out = Vec::with_capacity(out_size * out_size);
    for y in 0..out_size {
        for x in 0..out_size {
            let i = 2 * y * size + 2 * x;
            out.push(0.25 * (plane[i] + plane[i + 1] + plane[i + size] + plane[i + size + 1]));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_store() -> PatchStore {
        let patches = Tensor::from_fn(vec![4, 1, 2, 2], |i| (i as f64) / 16.0);
        PatchStore::new(patches, vec![0, 0, 1, 1], "test").unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.cxs");
        let store = tiny_store();
        store.save(&path).unwrap();
        let loaded = PatchStore::load(&path).unwrap();
        assert_eq!(loaded.patches().data(), store.patches().data());
        assert_eq!(loaded.point_ids(), store.point_ids());
        assert_eq!(loaded.source(), store.source());
        // And the serialized bytes themselves are stable.
        let path2 = dir.path().join("store2.cxs");
        loaded.save(&path2).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn constructor_validates() {
        assert!(PatchStore::new(Tensor::zeros(vec![2, 1, 4, 4]), vec![0], "x").is_err());
        assert!(PatchStore::new(Tensor::zeros(vec![2, 3, 4, 4]), vec![0, 1], "x").is_err());
        assert!(PatchStore::new(Tensor::full(vec![2, 1, 4, 4], 2.0), vec![0, 1], "x").is_err());
    }

    #[test]
    fn gather_pairs_stacks_channels() {
        let store = tiny_store();
        let (t, labels) = store
            .gather_pairs(&[PatchPair { a: 0, b: 2, label: false }])
            .unwrap();
        assert_eq!(t.dims(), &[1, 2, 2, 2]);
        assert_eq!(labels, vec![false]);
        assert_eq!(&t.data()[0..4], &store.patches().data()[0..4]);
        assert_eq!(&t.data()[4..8], &store.patches().data()[8..12]);
    }

    #[test]
    fn mean_pool_halves() {
        let plane: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let out = mean_pool_2x(&plane, 4);
        assert_eq!(out, vec![2.5, 4.5, 10.5, 12.5]);
    }
}
