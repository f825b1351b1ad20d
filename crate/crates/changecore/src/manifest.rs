//! Line-delimited JSON manifests. One record per line keeps them streamable;
//! all paths are relative to the manifest file's directory.

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::events::EventLog;
use crate::mask::SemanticMask;
use crate::sample::BitemporalSample;
use crate::ImageArray;

/// One entry of a single-temporal segmentation dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SingleTemporalRecord {
    pub id: String,
    pub image: String,
    pub mask: String,
}

/// One entry of a generated bitemporal change dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitemporalRecord {
    pub id: String,
    pub t0_image: String,
    pub t0_mask: String,
    pub t1_image: String,
    pub t1_mask: String,
    pub change: String,
    /// Event log path; absent for datasets whose transitions were not
    /// produced by the event simulator (e.g. external benchmarks).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub events: Option<String>,
}

/// Reads every line of a JSONL file into records.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path)
        .map_err(|e| CoreError::io(format!("opening manifest {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CoreError::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| CoreError::Manifest {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Overwrites `path` with one JSON line per record.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut file = File::create(path)
        .map_err(|e| CoreError::io(format!("creating manifest {}", path.display()), e))?;
    for rec in records {
        let line = serde_json::to_string(rec).map_err(|e| CoreError::Manifest {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(file, "{line}").map_err(|e| CoreError::io("writing manifest", e))?;
    }
    Ok(())
}

/// Appends one JSON line to `path`, creating the file if needed.
pub fn append_jsonl<T: Serialize>(path: &Path, record: &T) -> Result<()> {
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CoreError::io(format!("opening manifest {}", path.display()), e))?;
    let line = serde_json::to_string(record).map_err(|e| CoreError::Manifest {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    writeln!(file, "{line}").map_err(|e| CoreError::io("appending manifest", e))
}

/// A bitemporal change dataset backed by a manifest on disk.
#[derive(Debug, Clone)]
pub struct BitemporalDataset {
    root: PathBuf,
    records: Vec<BitemporalRecord>,
    class_count: u16,
}

impl BitemporalDataset {
    /// Loads a manifest, verifying that every referenced file exists and ids
    /// are unique.
    pub fn load(manifest: &Path, class_count: u16) -> Result<Self> {
        let records: Vec<BitemporalRecord> = read_jsonl(manifest)?;
        let root = manifest
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let mut seen = HashSet::new();
        for rec in &records {
            if !seen.insert(rec.id.clone()) {
                return Err(CoreError::DuplicateId(rec.id.clone()));
            }
            let mut paths = vec![
                &rec.t0_image,
                &rec.t0_mask,
                &rec.t1_image,
                &rec.t1_mask,
                &rec.change,
            ];
            if let Some(ev) = &rec.events {
                paths.push(ev);
            }
            for rel in paths {
                let p = root.join(rel);
                if !p.is_file() {
                    return Err(CoreError::MissingFile {
                        id: rec.id.clone(),
                        path: p,
                    });
                }
            }
        }
        if records.is_empty() {
            return Err(CoreError::EmptyDataset(format!(
                "manifest {} has no records",
                manifest.display()
            )));
        }
        Ok(Self {
            root,
            records,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[BitemporalRecord] {
        &self.records
    }

    pub fn class_count(&self) -> u16 {
        self.class_count
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Loads sample `index` fully into memory.
    pub fn get(&self, index: usize) -> Result<BitemporalSample> {
        let rec = &self.records[index];
        let image_t = ImageArray::load_png(&self.root.join(&rec.t0_image))?;
        let image_t1 = ImageArray::load_png(&self.root.join(&rec.t1_image))?;
        let mask_t = SemanticMask::load_png(&self.root.join(&rec.t0_mask), self.class_count)?;
        let mask_t1 = SemanticMask::load_png(&self.root.join(&rec.t1_mask), self.class_count)?;
        // Change labels are {0,1,2}; stored like a 3-class mask.
        let change = SemanticMask::load_png(&self.root.join(&rec.change), 3)?.into_labels();
        let events = match &rec.events {
            Some(rel) => {
                let path = self.root.join(rel);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CoreError::io(format!("reading {}", path.display()), e))?;
                let log: EventLog = serde_json::from_str(&text).map_err(|e| CoreError::Manifest {
                    path,
                    line: 0,
                    message: e.to_string(),
                })?;
                log.events
            }
            None => Vec::new(),
        };
        Ok(BitemporalSample {
            image_t,
            mask_t,
            mask_t1,
            image_t1,
            change,
            events,
        })
    }
}
