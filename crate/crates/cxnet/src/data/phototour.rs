//! Photo-Tour (Brown) patch dataset ingestion: mosaic bitmaps of 16x16 cells
//! of 64x64-pixel patches plus `info.txt` (one line per patch, first field is
//! the 3D point id), and the `m50`-style match files.

use std::path::Path;

use image::GenericImageView;

use crate::ctensor::Tensor;
use crate::error::{Error, Result};

use super::store::{mean_pool_2x, PatchPair, PatchStore};

const MOSAIC_GRID: usize = 16;
const RAW_PATCH: usize = 64;
const MOSAIC_SIDE: usize = MOSAIC_GRID * RAW_PATCH;
const PATCHES_PER_MOSAIC: usize = MOSAIC_GRID * MOSAIC_GRID;

fn read_info(dir: &Path) -> Result<Vec<u64>> {
    let info_path = dir.join("info.txt");
    let text = std::fs::read_to_string(&info_path)
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", info_path.display())))?;
    let mut ids = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let first = line.split_whitespace().next().unwrap();
        let id: u64 = first.parse().map_err(|_| {
            Error::Ingest(format!("{}:{}: bad point id {first:?}", info_path.display(), lineno + 1))
        })?;
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(Error::Ingest(format!("{} lists no patches", info_path.display())));
    }
    Ok(ids)
}

fn mosaic_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::Ingest(format!("cannot list {}: {e}", dir.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            let ext = p.extension().and_then(|x| x.to_str()).unwrap_or("");
            name.starts_with("patches") && matches!(ext, "bmp" | "png")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Ingest(format!("no patches*.bmp/png mosaics in {}", dir.display())));
    }
    Ok(files)
}

/// Load a Photo-Tour subset directory: patches are extracted in mosaic order,
/// downsampled 64 -> 32 by 2x2 mean pooling and scaled to [0,1].
pub fn load_phototour(dir: &Path) -> Result<PatchStore> {
    let ids = read_info(dir)?;
    let mosaics = mosaic_files(dir)?;
    let needed_mosaics = ids.len().div_ceil(PATCHES_PER_MOSAIC);
    if mosaics.len() < needed_mosaics {
        return Err(Error::Ingest(format!(
            "{}: info.txt lists {} patches but only {} mosaics present",
            dir.display(),
            ids.len(),
            mosaics.len()
        )));
    }
    let out_size = RAW_PATCH / 2;
    let mut data = Vec::with_capacity(ids.len() * out_size * out_size);
    let mut current: Option<image::GrayImage> = None;
    let mut current_idx = usize::MAX;
    for k in 0..ids.len() {
        let m = k / PATCHES_PER_MOSAIC;
        if m != current_idx {
            let img = image::open(&mosaics[m])
                .map_err(|e| Error::Ingest(format!("cannot decode {}: {e}", mosaics[m].display())))?;
            let (w, h) = img.dimensions();
            if (w as usize, h as usize) != (MOSAIC_SIDE, MOSAIC_SIDE) {
                return Err(Error::Ingest(format!(
                    "{}: mosaic is {w}x{h}, expected {MOSAIC_SIDE}x{MOSAIC_SIDE}",
                    mosaics[m].display()
                )));
            }
            current = Some(img.into_luma8());
            current_idx = m;
        }
        let img = current.as_ref().unwrap();
        let cell = k % PATCHES_PER_MOSAIC;
        let (row, col) = (cell / MOSAIC_GRID, cell % MOSAIC_GRID);
        let mut raw = Vec::with_capacity(RAW_PATCH * RAW_PATCH);
        for y in 0..RAW_PATCH {
            for x in 0..RAW_PATCH {
                let px = img.get_pixel((col * RAW_PATCH + x) as u32, (row * RAW_PATCH + y) as u32);
                raw.push(px.0[0] as f64 / 255.0);
            }
        }
        data.extend(mean_pool_2x(&raw, RAW_PATCH));
    }
    let patches = Tensor::from_vec(vec![ids.len(), 1, out_size, out_size], data)?;
    PatchStore::new(patches, ids, format!("phototour:{}", dir.display()))
}

/// Parse an m50-style match file: whitespace-separated
/// `patchID1 3DpointID1 unused patchID2 3DpointID2 unused` per line.
/// A pair is a match iff the two 3D point ids are equal.
pub fn load_match_file(path: &Path, store: &PatchStore) -> Result<Vec<PatchPair>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Ingest(format!("cannot read {}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 6 {
            return Err(Error::Ingest(format!(
                "{}:{}: expected 6 fields, got {}",
                path.display(),
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::Ingest(format!("{}:{}: bad field {s:?}", path.display(), lineno + 1)))
        };
        let (a, pid_a) = (parse(fields[0])? as usize, parse(fields[1])?);
        let (b, pid_b) = (parse(fields[3])? as usize, parse(fields[4])?);
        if a >= store.len() || b >= store.len() {
            return Err(Error::Ingest(format!(
                "{}:{}: patch id out of range (store has {} patches)",
                path.display(),
                lineno + 1,
                store.len()
            )));
        }
        pairs.push(PatchPair { a, b, label: pid_a == pid_b });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two-mosaic fixture with per-cell watermarks: the global cell index k
    /// fills the entire cell with intensity k % 251.
    fn write_fixture(dir: &Path, patches: usize) {
        let mosaics = patches.div_ceil(PATCHES_PER_MOSAIC);
        for m in 0..mosaics {
            let mut img = image::GrayImage::new(MOSAIC_SIDE as u32, MOSAIC_SIDE as u32);
            for cell in 0..PATCHES_PER_MOSAIC {
                let k = m * PATCHES_PER_MOSAIC + cell;
                let v = (k % 251) as u8;
                let (row, col) = (cell / MOSAIC_GRID, cell % MOSAIC_GRID);
                for y in 0..RAW_PATCH {
                    for x in 0..RAW_PATCH {
                        img.put_pixel((col * RAW_PATCH + x) as u32, (row * RAW_PATCH + y) as u32, image::Luma([v]));
                    }
                }
            }
            img.save(dir.join(format!("patches{m:04}.png"))).unwrap();
        }
        let info: String = (0..patches).map(|k| format!("{} 0\n", k / 2)).collect();
        std::fs::write(dir.join("info.txt"), info).unwrap();
    }

    #[test]
    fn fixture_count_and_watermarks() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 512);
        let store = load_phototour(dir.path()).unwrap();
        assert_eq!(store.len(), 512);
        assert_eq!(store.patch_size(), 32);
        // Patch k must come from cell (k % 256) of mosaic k / 256; the
        // watermark makes that checkable: every pixel equals (k % 251) / 255.
        for k in [0usize, 1, 17, 255, 256, 300, 511] {
            let expected = (k % 251) as f64 / 255.0;
            let plane = 32 * 32;
            for &v in &store.patches().data()[k * plane..(k + 1) * plane] {
                assert!((v - expected).abs() < 1e-12, "patch {k}");
            }
        }
        // Idempotent ingestion.
        let again = load_phototour(dir.path()).unwrap();
        assert_eq!(store.patches().data(), again.patches().data());
        assert_eq!(store.point_ids(), again.point_ids());
    }

    #[test]
    fn corrupt_mosaic_dimensions_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let img = image::GrayImage::new(512, MOSAIC_SIDE as u32);
        img.save(dir.path().join("patches0000.png")).unwrap();
        std::fs::write(dir.path().join("info.txt"), "0 0\n1 0\n").unwrap();
        let err = load_phototour(dir.path()).unwrap_err();
        assert!(err.to_string().contains("patches0000.png"), "{err}");
    }

    #[test]
    fn missing_info_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_phototour(dir.path()).is_err());
        write_fixture(dir.path(), 256);
        // Claim more patches than the mosaics can hold.
        let info: String = (0..300).map(|k| format!("{k} 0\n")).collect();
        std::fs::write(dir.path().join("info.txt"), info).unwrap();
        let err = load_phototour(dir.path()).unwrap_err();
        assert!(err.to_string().contains("mosaics"), "{err}");
    }

    #[test]
    fn match_file_labels_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), 256);
        let store = load_phototour(dir.path()).unwrap();
        let mf = dir.path().join("m50_test.txt");
        std::fs::write(&mf, "0 0 0 1 0 0\n0 0 0 2 7 0\n").unwrap();
        let pairs = load_match_file(&mf, &store).unwrap();
        assert_eq!(pairs[0], PatchPair { a: 0, b: 1, label: true });
        assert_eq!(pairs[1], PatchPair { a: 0, b: 2, label: false });
        std::fs::write(&mf, "0 0 0 9999 0 0\n").unwrap();
        assert!(load_match_file(&mf, &store).is_err());
    }
}
