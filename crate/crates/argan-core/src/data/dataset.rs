//! Directory-layout dataset loading and writing.
//!
//! Labeled: `<root>/A/*.ppm` shadow, `<root>/B/*.ppm` matte (P5),
//! `<root>/C/*.ppm` shadow-free, with matching filenames.
//! Unlabeled: `<root>/U/*.ppm` shadow images only.

use super::{read_image, write_image, SampleTriplet};
use crate::error::{ArganError, Result};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    Labeled,
    Unlabeled,
}

fn sorted_ppm_names(dir: &Path) -> Result<Vec<String>> {
    let mut names = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| {
        ArganError::Data(format!("cannot list dataset directory {}: {e}", dir.display()))
    })?;
    for entry in entries {
        let entry = entry.map_err(|e| ArganError::Data(format!("directory walk: {e}")))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".ppm") {
            names.push(name);
        }
    }
    names.sort();
    Ok(names)
}

/// Load a dataset in the layout above, lexicographically sorted and
/// validated (matching names and dimensions across A/B/C).
pub fn load_dataset(root: &Path, kind: DatasetKind) -> Result<Vec<SampleTriplet>> {
    match kind {
        DatasetKind::Unlabeled => {
            let dir = root.join("U");
            let mut out = Vec::new();
            for name in sorted_ppm_names(&dir)? {
                let shadow = read_image(&dir.join(&name))?;
                out.push(SampleTriplet {
                    shadow,
                    matte: None,
                    free: None,
                });
            }
            Ok(out)
        }
        DatasetKind::Labeled => {
            let (a, b, c) = (root.join("A"), root.join("B"), root.join("C"));
            let mut out = Vec::new();
            for name in sorted_ppm_names(&a)? {
                let shadow = read_image(&a.join(&name))?;
                let matte_path = b.join(&name);
                if !matte_path.exists() {
                    return Err(ArganError::Data(format!(
                        "labeled dataset: missing matte B/{name}"
                    )));
                }
                let free_path = c.join(&name);
                if !free_path.exists() {
                    return Err(ArganError::Data(format!(
                        "labeled dataset: missing shadow-free C/{name}"
                    )));
                }
                let matte = read_image(&matte_path)?;
                let free = read_image(&free_path)?;
                if matte.channels != 1 {
                    return Err(ArganError::Data(format!(
                        "labeled dataset: matte B/{name} must be single-channel (P5)"
                    )));
                }
                if shadow.width != matte.width
                    || shadow.height != matte.height
                    || shadow.width != free.width
                    || shadow.height != free.height
                {
                    return Err(ArganError::Data(format!(
                        "labeled dataset: dimension mismatch across triplet {name}"
                    )));
                }
                out.push(SampleTriplet {
                    shadow,
                    matte: Some(matte),
                    free: Some(free),
                });
            }
            Ok(out)
        }
    }
}

/// Write triplets in the standard layout; names are 0-padded indices.
/// Unlabeled datasets keep only the shadow image under U/.
pub fn write_dataset(root: &Path, samples: &[SampleTriplet], kind: DatasetKind) -> Result<()> {
    let make = |sub: &str| -> Result<std::path::PathBuf> {
        let dir = root.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| {
            ArganError::Data(format!("cannot create {}: {e}", dir.display()))
        })?;
        Ok(dir)
    };
    match kind {
        DatasetKind::Unlabeled => {
            let u = make("U")?;
            for (i, s) in samples.iter().enumerate() {
                write_image(&u.join(format!("{i:04}.ppm")), &s.shadow)?;
            }
        }
        DatasetKind::Labeled => {
            let a = make("A")?;
            let b = make("B")?;
            let c = make("C")?;
            for (i, s) in samples.iter().enumerate() {
                let name = format!("{i:04}.ppm");
                let matte = s.matte.as_ref().ok_or_else(|| {
                    ArganError::Data(format!("sample {i} lacks a matte for labeled output"))
                })?;
                let free = s.free.as_ref().ok_or_else(|| {
                    ArganError::Data(format!("sample {i} lacks a shadow-free image"))
                })?;
                write_image(&a.join(&name), &s.shadow)?;
                write_image(&b.join(&name), matte)?;
                write_image(&c.join(&name), free)?;
            }
        }
    }
    Ok(())
}
