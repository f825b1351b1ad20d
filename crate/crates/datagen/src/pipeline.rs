//! Stochastic-change-process sampling and resumable dataset generation.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use changecore::manifest::{append_jsonl, read_jsonl, BitemporalRecord};
use changecore::rng::{derive_rng, stream};
use changecore::{
    BitemporalSample, EventConfig, EventLog, ImageArray, NoiseMap, SemanticMask,
    SingleTemporalDataset,
};
use eventsim::{derive_change_label, simulate_event};
use gennet::GeneratorParams;
use rand::Rng;

use crate::{DatagenError, Result};

/// What the image conditioning of chain step `j > 0` is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConditionMode {
    /// Condition on the previously generated image (progressive chain).
    #[default]
    GeneratedChain,
    /// Always condition on the real time-t image.
    RealT0,
}

/// Samples an `n`-step chain from the stochastic change process: masks evolve
/// by event simulation, images by the generator with fresh noise per step.
/// Returns one bitemporal sample per consecutive step pair.
pub fn sample_scp(
    image_t: &ImageArray,
    mask_t: &SemanticMask,
    params: &GeneratorParams,
    event_cfg: &EventConfig,
    rng: &mut impl Rng,
    n: usize,
    mode: ConditionMode,
) -> Result<Vec<BitemporalSample>> {
    if params.iteration == 0 {
        return Err(DatagenError::Untrained);
    }
    if n == 0 {
        return Err(DatagenError::EmptyChain);
    }
    let (h, w) = image_t.shape();
    let d_z = params.cfg.d_z();
    let mut samples = Vec::with_capacity(n);
    let mut prev_image = image_t.clone();
    let mut prev_mask = mask_t.clone();
    for _ in 0..n {
        let (next_mask, log) = simulate_event(&prev_mask, event_cfg, rng)?;
        let z = NoiseMap::sample(d_z, h, w, rng);
        let cond_image = match mode {
            ConditionMode::GeneratedChain => &prev_image,
            ConditionMode::RealT0 => image_t,
        };
        let next_image = gennet::synthesize(&next_mask, cond_image, &prev_mask, &z, params)?;
        let change = derive_change_label(&prev_mask, &next_mask, &log.events)?;
        let sample = BitemporalSample {
            image_t: prev_image.clone(),
            mask_t: prev_mask.clone(),
            mask_t1: next_mask.clone(),
            image_t1: next_image.clone(),
            change,
            events: log.events.clone(),
        };
        sample.validate()?;
        samples.push(sample);
        prev_image = next_image;
        prev_mask = next_mask;
    }
    Ok(samples)
}

/// Outcome of a generation run.
#[derive(Debug, Clone)]
pub struct GenerateReport {
    pub manifest: PathBuf,
    pub written: usize,
    pub skipped_existing: usize,
}

const SUBDIRS: [&str; 6] = ["t0", "t1", "masks_t0", "masks_t1", "change", "events"];

fn sample_id(source_id: &str, step: usize) -> String {
    format!("{source_id}_s{step}")
}

/// Generates `|dataset| * n` bitemporal samples under `out`, with a JSONL
/// manifest. Re-running resumes: source items whose chain is fully present
/// are skipped, partially present chains are regenerated deterministically
/// (per-source RNG streams) and only missing manifest lines are appended.
pub fn generate_dataset(
    dataset: &SingleTemporalDataset,
    params: &GeneratorParams,
    event_cfg: &EventConfig,
    n: usize,
    out: &Path,
    seed: u64,
    mode: ConditionMode,
) -> Result<GenerateReport> {
    if params.iteration == 0 {
        return Err(DatagenError::Untrained);
    }
    if n == 0 {
        return Err(DatagenError::EmptyChain);
    }
    for sub in SUBDIRS {
        std::fs::create_dir_all(out.join(sub))
            .map_err(|e| DatagenError::io(format!("creating {}", out.join(sub).display()), e))?;
    }
    let manifest = out.join("manifest.jsonl");
    let existing: HashSet<String> = if manifest.is_file() {
        read_jsonl::<BitemporalRecord>(&manifest)?
            .into_iter()
            .map(|r| r.id)
            .collect()
    } else {
        HashSet::new()
    };

    let mut written = 0usize;
    let mut skipped = 0usize;
    for (index, item) in dataset.items().iter().enumerate() {
        let complete = (0..n).all(|j| existing.contains(&sample_id(&item.id, j)));
        if complete {
            skipped += n;
            continue;
        }
        let (image_t, mask_t) = dataset.get(index)?;
        let mut rng = derive_rng(seed, &[stream::SAMPLE, index as u64]);
        let samples = sample_scp(&image_t, &mask_t, params, event_cfg, &mut rng, n, mode)?;
        for (j, sample) in samples.iter().enumerate() {
            let id = sample_id(&item.id, j);
            if existing.contains(&id) {
                skipped += 1;
                continue;
            }
            let rec = BitemporalRecord {
                id: id.clone(),
                t0_image: format!("t0/{id}.png"),
                t0_mask: format!("masks_t0/{id}.png"),
                t1_image: format!("t1/{id}.png"),
                t1_mask: format!("masks_t1/{id}.png"),
                change: format!("change/{id}.png"),
                events: Some(format!("events/{id}.json")),
            };
            sample.image_t.save_png(&out.join(&rec.t0_image))?;
            sample.image_t1.save_png(&out.join(&rec.t1_image))?;
            sample.mask_t.save_png(&out.join(&rec.t0_mask))?;
            sample.mask_t1.save_png(&out.join(&rec.t1_mask))?;
            SemanticMask::new(sample.change.clone(), 3)?.save_png(&out.join(&rec.change))?;
            let log = EventLog::new(sample.events.clone(), Vec::new());
            let log_path = out.join(rec.events.as_ref().unwrap());
            std::fs::write(
                &log_path,
                serde_json::to_vec_pretty(&log)
                    .map_err(|e| DatagenError::io("event log encode", std::io::Error::other(e)))?,
            )
            .map_err(|e| DatagenError::io(format!("writing {}", log_path.display()), e))?;
            append_jsonl(&manifest, &rec)?;
            written += 1;
        }
    }
    Ok(GenerateReport {
        manifest,
        written,
        skipped_existing: skipped,
    })
}
