//! HPatches patch-release ingestion: per-sequence folders of patch-column
//! images (65x65 patches stacked vertically, one column per view) and a JSON
//! split file mapping split names to sequence lists.

use std::collections::BTreeSet;
use std::path::Path;

use image::GenericImageView;

use crate::ctensor::Tensor;
use crate::error::{Error, Result};

use super::store::{mean_pool_2x, PatchStore};

const RAW_PATCH: usize = 65;
const CROP: usize = 64;

/// Accepts either `{"name": ["seq", ...]}` or the nested release layout
/// `{"name": {"train": [...], "test": [...]}}`; nested lists are unioned.
fn sequences_for_split(value: &serde_json::Value, name: &str) -> Result<Vec<String>> {
    let entry = value
        .get(name)
        .ok_or_else(|| Error::Ingest(format!("split file has no split named {name:?}")))?;
    let mut out = Vec::new();
    let mut collect = |v: &serde_json::Value| -> Result<()> {
        let arr = v
            .as_array()
            .ok_or_else(|| Error::Ingest(format!("split {name:?} is not a sequence list")))?;
        for s in arr {
            out.push(
                s.as_str()
                    .ok_or_else(|| Error::Ingest(format!("split {name:?} holds a non-string entry")))?
                    .to_string(),
            );
        }
        Ok(())
    };
    match entry {
        serde_json::Value::Array(_) => collect(entry)?,
        serde_json::Value::Object(map) => {
            for v in map.values() {
                collect(v)?;
            }
        }
        _ => return Err(Error::Ingest(format!("split {name:?} has unsupported shape"))),
    }
    Ok(out)
}

/// Load the named splits of an HPatches patch directory. Patches are
/// center-cropped 65 -> 64, mean-pooled to 32, and scaled to [0,1]; the
/// point id groups the corresponding row across all views of one sequence.
pub fn load_hpatches(dir: &Path, split_file: &Path, split_names: &[String]) -> Result<PatchStore> {
    let split_text = std::fs::read_to_string(split_file)
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", split_file.display())))?;
    let split_json: serde_json::Value =
        serde_json::from_str(&split_text).map_err(|e| Error::Ingest(format!("{}: {e}", split_file.display())))?;
    let mut selected = BTreeSet::new();
    for name in split_names {
        for seq in sequences_for_split(&split_json, name)? {
            selected.insert(seq);
        }
    }
    if selected.is_empty() {
        return Err(Error::Ingest("selected splits contain no sequences".into()));
    }

    let out_size = CROP / 2;
    let mut data = Vec::new();
    let mut point_ids = Vec::new();
    let mut next_base = 0u64;
    for seq in &selected {
        let seq_dir = dir.join(seq);
        let mut images: Vec<_> = std::fs::read_dir(&seq_dir)
            .map_err(|e| Error::Ingest(format!("missing sequence folder {}: {e}", seq_dir.display())))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().and_then(|x| x.to_str()) == Some("png"))
            .collect();
        images.sort();
        if images.is_empty() {
            return Err(Error::Ingest(format!("{}: no patch images", seq_dir.display())));
        }
        let mut rows = None;
        for img_path in &images {
            let img = image::open(img_path)
                .map_err(|e| Error::Ingest(format!("cannot decode {}: {e}", img_path.display())))?;
            let (w, h) = img.dimensions();
            if w as usize != RAW_PATCH || h as usize % RAW_PATCH != 0 {
                return Err(Error::Ingest(format!(
                    "{}: expected {RAW_PATCH}xN*{RAW_PATCH} column, got {w}x{h}",
                    img_path.display()
                )));
            }
            let r = h as usize / RAW_PATCH;
            match rows {
                None => rows = Some(r),
                Some(prev) if prev != r => {
                    return Err(Error::Ingest(format!(
                        "{}: {r} rows but sibling images have {prev}",
                        img_path.display()
                    )))
                }
                _ => {}
            }
            let gray = img.into_luma8();
            for row in 0..r {
                let mut raw = Vec::with_capacity(CROP * CROP);
                for y in 0..CROP {
                    for x in 0..CROP {
                        let px = gray.get_pixel(x as u32, (row * RAW_PATCH + y) as u32);
                        raw.push(px.0[0] as f64 / 255.0);
                    }
                }
                data.extend(mean_pool_2x(&raw, CROP));
                point_ids.push(next_base + row as u64);
            }
        }
        next_base += rows.unwrap_or(0) as u64;
    }
    let patches = Tensor::from_vec(vec![point_ids.len(), 1, out_size, out_size], data)?;
    PatchStore::new(patches, point_ids, format!("hpatches:{}", dir.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_sequence(dir: &Path, seq: &str, rows: usize, images: usize) {
        let seq_dir = dir.join(seq);
        std::fs::create_dir_all(&seq_dir).unwrap();
        for i in 0..images {
            let mut img = image::GrayImage::new(RAW_PATCH as u32, (rows * RAW_PATCH) as u32);
            for row in 0..rows {
                let v = ((i * rows + row) * 10 % 251) as u8;
                for y in 0..RAW_PATCH {
                    for x in 0..RAW_PATCH {
                        img.put_pixel(x as u32, (row * RAW_PATCH + y) as u32, image::Luma([v]));
                    }
                }
            }
            img.save(seq_dir.join(format!("{}.png", ["ref", "e1", "e2", "e3", "e4", "e5"][i]))).unwrap();
        }
    }

    fn write_split(dir: &Path) -> std::path::PathBuf {
        let path = dir.join("splits.json");
        std::fs::write(&path, r#"{"a": ["seq_a"], "b": ["seq_b"], "view": {"test": ["seq_a"]}}"#).unwrap();
        path
    }

    #[test]
    fn sequence_layout_contract() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), "seq_a", 3, 6);
        write_sequence(dir.path(), "seq_b", 2, 6);
        let split = write_split(dir.path());
        let store = load_hpatches(dir.path(), &split, &["a".into()]).unwrap();
        assert_eq!(store.len(), 18); // 3 rows x 6 images
        let distinct: BTreeSet<u64> = store.point_ids().iter().copied().collect();
        assert_eq!(distinct.len(), 3);
        // Same row in different images shares the point id.
        assert_eq!(store.point_ids()[0], store.point_ids()[3]);
    }

    #[test]
    fn split_filter_and_unknown_split() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), "seq_a", 2, 6);
        write_sequence(dir.path(), "seq_b", 2, 6);
        let split = write_split(dir.path());
        let store = load_hpatches(dir.path(), &split, &["b".into()]).unwrap();
        assert!(store.source().contains("hpatches"));
        assert_eq!(store.len(), 12);
        assert!(load_hpatches(dir.path(), &split, &["nope".into()]).is_err());
        // Nested split value (view -> {test: [...]}) is accepted.
        let nested = load_hpatches(dir.path(), &split, &["view".into()]).unwrap();
        assert_eq!(nested.len(), 12);
    }

    #[test]
    fn malformed_column_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let seq_dir = dir.path().join("seq_a");
        std::fs::create_dir_all(&seq_dir).unwrap();
        image::GrayImage::new(64, 65).save(seq_dir.join("ref.png")).unwrap();
        let split = write_split(dir.path());
        let err = load_hpatches(dir.path(), &split, &["a".into()]).unwrap_err();
        assert!(err.to_string().contains("ref.png"), "{err}");
    }
}
