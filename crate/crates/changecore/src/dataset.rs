//! Single-temporal dataset ingestion: image/mask pairing with validation, the
//! entry point every training and generation pipeline starts from.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{CoreError, Result};
use crate::image_array::ImageArray;
use crate::manifest::{read_jsonl, SingleTemporalRecord};
use crate::mask::SemanticMask;

/// One validated dataset entry.
#[derive(Debug, Clone)]
pub struct DatasetItem {
    pub id: String,
    pub image_path: PathBuf,
    pub mask_path: PathBuf,
    pub size: (usize, usize),
}

/// An immutable, validated single-temporal segmentation dataset. Safe to
/// share across readers; items are loaded lazily via [`SingleTemporalDataset::get`].
#[derive(Debug, Clone)]
pub struct SingleTemporalDataset {
    items: Vec<DatasetItem>,
    class_count: u16,
    /// Uniform resolution if all items agree, else `None`.
    resolution: Option<(usize, usize)>,
}

/// Loads and validates a dataset.
///
/// `manifest` is resolved against `root`; the paths inside the manifest are
/// relative to the manifest file's own directory. The class count is inferred
/// as `max label + 1` (at least 2) unless `class_count` overrides it.
pub fn load_dataset(
    root: &Path,
    manifest: &Path,
    class_count: Option<u16>,
) -> Result<SingleTemporalDataset> {
    let manifest_path = root.join(manifest);
    let records: Vec<SingleTemporalRecord> = read_jsonl(&manifest_path)?;
    if records.is_empty() {
        return Err(CoreError::EmptyDataset(format!(
            "manifest {} has no records",
            manifest_path.display()
        )));
    }
    let base = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let mut seen = HashSet::new();
    let mut items = Vec::with_capacity(records.len());
    let mut max_label = 0u8;
    for rec in &records {
        if !seen.insert(rec.id.clone()) {
            return Err(CoreError::DuplicateId(rec.id.clone()));
        }
        let image_path = base.join(&rec.image);
        let mask_path = base.join(&rec.mask);
        for p in [&image_path, &mask_path] {
            if !p.is_file() {
                return Err(CoreError::MissingFile {
                    id: rec.id.clone(),
                    path: p.clone(),
                });
            }
        }
        let image = ImageArray::load_png(&image_path)?;
        // Load with the widest class count; the real bound is checked below.
        let mask = SemanticMask::load_png(&mask_path, u16::from(u8::MAX) + 1)?;
        if image.shape() != mask.shape() {
            return Err(CoreError::PairSizeMismatch {
                id: rec.id.clone(),
                image: image.shape(),
                mask: mask.shape(),
            });
        }
        max_label = max_label.max(mask.max_label());
        items.push(DatasetItem {
            id: rec.id.clone(),
            image_path,
            mask_path,
            size: image.shape(),
        });
    }

    let inferred = (u16::from(max_label) + 1).max(2);
    let class_count = class_count.unwrap_or(inferred);
    if u16::from(max_label) >= class_count {
        return Err(CoreError::Config(format!(
            "class count {class_count} does not cover max label {max_label}"
        )));
    }

    let first = items[0].size;
    let resolution = items.iter().all(|i| i.size == first).then_some(first);
    Ok(SingleTemporalDataset {
        items,
        class_count,
        resolution,
    })
}

impl SingleTemporalDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[DatasetItem] {
        &self.items
    }

    pub fn class_count(&self) -> u16 {
        self.class_count
    }

    pub fn resolution(&self) -> Option<(usize, usize)> {
        self.resolution
    }

    /// Loads item `index` from disk.
    pub fn get(&self, index: usize) -> Result<(ImageArray, SemanticMask)> {
        let item = &self.items[index];
        let image = ImageArray::load_png(&item.image_path)?;
        let mask = SemanticMask::load_png(&item.mask_path, self.class_count)?;
        Ok((image, mask))
    }
}
