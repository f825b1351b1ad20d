//! The bitemporal adversarial learning loop.
//!
//! Per step: sample a time-t mini-batch, simulate change events on the
//! masks, synthesize fake post-event images, update the generator once, then
//! update the discriminator once with the time-t pair as its real target
//! (the same fake images, detached, serve both updates). All randomness is a
//! pure function of `(seed, step, slot)`, so checkpoint/resume reproduces a
//! run bit-exactly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use changecore::rng::{derive_rng, stream};
use changecore::{ImageArray, NoiseMap, RunConfig, SemanticMask, SingleTemporalDataset};
use eventsim::simulate_event;
use gennet::{CondLevels, GeneratorConfig, GeneratorParams};
use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tapegrad::optim::Adam;
use tapegrad::serialize::{
    adam_from_bytes, adam_to_bytes, params_from_bytes, params_to_bytes, read_checkpoint,
    write_checkpoint, CheckpointMeta,
};
use tapegrad::{ParamStore, Session, Tape};

use crate::augment::augment;
use crate::discriminator::{DiscriminatorConfig, DiscriminatorParams};
use crate::losses::{d_loss_graph, g_loss_graph, labels_of};
use crate::{AdvTrainError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UpdateKind {
    Generator,
    Discriminator,
}

/// What one training step did, for logging and conformance tests.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub step: u64,
    pub g_loss: f64,
    pub d_loss: f64,
    /// Exactly one generator update followed by one discriminator update.
    pub update_order: [UpdateKind; 2],
    /// The discriminator's real input was verified equal to the time-t batch.
    pub real_is_time_t: bool,
    pub skipped_placements: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub g_loss: f64,
    pub d_loss: f64,
    pub wall_ms: u64,
}

/// A training mini-batch. Holds time-t data only: the training loop never
/// sees a ground-truth post-event image (none exists in the dataset type).
pub struct TrainBatch {
    pub images_t: Vec<ImageArray>,
    pub masks_t: Vec<SemanticMask>,
    pub indices: Vec<usize>,
}

/// Samples and augments the step's mini-batch; all draws derive from
/// `(seed, BATCH/AUGMENT, step, slot)`.
pub fn assemble_batch(
    dataset: &SingleTemporalDataset,
    run: &RunConfig,
    step: u64,
) -> Result<TrainBatch> {
    let mut pick = derive_rng(run.seed, &[stream::BATCH, step]);
    let mut images = Vec::with_capacity(run.gan.batch_size);
    let mut masks = Vec::with_capacity(run.gan.batch_size);
    let mut indices = Vec::with_capacity(run.gan.batch_size);
    let mut aug_cfg = run.augment.clone();
    aug_cfg.crop = Some(run.gan.crop_size);
    for slot in 0..run.gan.batch_size {
        let idx = pick.random_range(0..dataset.len());
        let (image, mask) = dataset.get(idx)?;
        let mut aug_rng = derive_rng(run.seed, &[stream::AUGMENT, step, slot as u64]);
        let (image, mask) = augment(&image, &mask, &aug_cfg, &mut aug_rng)?;
        images.push(image);
        masks.push(mask);
        indices.push(idx);
    }
    Ok(TrainBatch {
        images_t: images,
        masks_t: masks,
        indices,
    })
}

/// Full training state with bit-exact checkpointing.
pub struct TrainState {
    pub gen: GeneratorParams,
    pub disc: DiscriminatorParams,
    pub opt_g: Adam,
    pub opt_d: Adam,
    pub step: u64,
    pub seed: u64,
    pub history: Vec<LossRecord>,
    pub ema: Option<ParamStore>,
}

impl TrainState {
    pub fn new(run: &RunConfig) -> Self {
        let gen_cfg = GeneratorConfig::new(run.model.clone());
        let disc_cfg = DiscriminatorConfig::new(run.model.clone());
        let gen = GeneratorParams::init(gen_cfg, run.seed);
        let disc = DiscriminatorParams::init(disc_cfg, run.seed);
        let ema = run.model.ema_decay.map(|_| gen.store.clone());
        Self {
            gen,
            disc,
            opt_g: Adam::new(run.gan.lr_g, run.gan.beta1, run.gan.beta2),
            opt_d: Adam::new(run.gan.lr_d, run.gan.beta1, run.gan.beta2),
            step: 0,
            seed: run.seed,
            history: Vec::new(),
            ema: None.or(ema),
        }
    }

    pub fn config_hash(&self) -> String {
        self.gen.config_hash()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = CheckpointMeta {
            kind: "train_state".into(),
            config_hash: self.config_hash(),
            iteration: self.step,
        };
        let gen_cfg = toml::to_string(&self.gen.cfg)
            .map_err(|e| AdvTrainError::Checkpoint(format!("config serialization: {e}")))?;
        let history = serde_json::to_vec(&self.history)
            .map_err(|e| AdvTrainError::Checkpoint(e.to_string()))?;
        let seed_bytes = self.seed.to_le_bytes().to_vec();
        let mut sections = vec![
            ("gen.config", gen_cfg.into_bytes()),
            ("gen.params", params_to_bytes(&self.gen.store)),
            ("disc.params", params_to_bytes(&self.disc.store)),
            ("opt_g", adam_to_bytes(&self.opt_g)),
            ("opt_d", adam_to_bytes(&self.opt_d)),
            ("seed", seed_bytes),
            ("history", history),
        ];
        if let Some(ema) = &self.ema {
            sections.push(("ema", params_to_bytes(ema)));
        }
        write_checkpoint(path, &meta, &sections)?;
        Ok(())
    }

    pub fn load(path: &Path, expected_hash: Option<&str>, force: bool) -> Result<Self> {
        let (meta, sections) = read_checkpoint(path)?;
        if meta.kind != "train_state" {
            return Err(AdvTrainError::Checkpoint(format!(
                "expected a train_state checkpoint, found `{}`",
                meta.kind
            )));
        }
        if let Some(expected) = expected_hash {
            if expected != meta.config_hash && !force {
                return Err(AdvTrainError::Checkpoint(format!(
                    "config hash mismatch: checkpoint {}, expected {expected}; pass --force to override",
                    meta.config_hash
                )));
            }
        }
        let get = |name: &str| -> Result<&Vec<u8>> {
            sections
                .get(name)
                .ok_or_else(|| AdvTrainError::Checkpoint(format!("missing section {name}")))
        };
        let gen_cfg: GeneratorConfig = toml::from_str(
            std::str::from_utf8(get("gen.config")?)
                .map_err(|e| AdvTrainError::Checkpoint(e.to_string()))?,
        )
        .map_err(|e| AdvTrainError::Checkpoint(format!("config parse: {e}")))?;
        let gen = GeneratorParams {
            cfg: gen_cfg.clone(),
            store: params_from_bytes(get("gen.params")?)?,
            iteration: meta.iteration,
        };
        let disc = DiscriminatorParams {
            cfg: DiscriminatorConfig::new(gen_cfg.model.clone()),
            store: params_from_bytes(get("disc.params")?)?,
            iteration: meta.iteration,
        };
        let seed_bytes = get("seed")?;
        let seed = u64::from_le_bytes(
            seed_bytes[..8]
                .try_into()
                .map_err(|_| AdvTrainError::Checkpoint("bad seed section".into()))?,
        );
        let history: Vec<LossRecord> = serde_json::from_slice(get("history")?)
            .map_err(|e| AdvTrainError::Checkpoint(e.to_string()))?;
        let ema = sections
            .get("ema")
            .map(|b| params_from_bytes(b))
            .transpose()?;
        Ok(Self {
            gen,
            disc,
            opt_g: adam_from_bytes(get("opt_g")?)?,
            opt_d: adam_from_bytes(get("opt_d")?)?,
            step: meta.iteration,
            seed,
            history,
            ema,
        })
    }
}

fn stack_images(images: &[ImageArray]) -> ArrayD<f64> {
    let (h, w) = images[0].shape();
    let mut out = ArrayD::zeros(IxDyn(&[images.len(), 3, h, w]));
    for (n, img) in images.iter().enumerate() {
        let chw = img.to_chw();
        for ((c, r, col), &v) in chw.indexed_iter() {
            out[[n, c, r, col]] = v;
        }
    }
    out
}

/// One Algorithm-style step: event simulation, synthesis, one generator
/// update, one discriminator update (real target: the time-t pair).
pub fn train_step(
    state: &mut TrainState,
    dataset: &SingleTemporalDataset,
    run: &RunConfig,
) -> Result<StepReport> {
    let step = state.step;
    let batch = assemble_batch(dataset, run, step)?;
    let n = batch.images_t.len();
    let (h, w) = batch.images_t[0].shape();

    // stochastic change event simulation
    let mut masks_t1 = Vec::with_capacity(n);
    let mut skipped = 0usize;
    for (slot, mask_t) in batch.masks_t.iter().enumerate() {
        let mut ev_rng = derive_rng(state.seed, &[stream::EVENT, step, slot as u64]);
        let (mask_t1, log) = simulate_event(mask_t, &run.events, &mut ev_rng)?;
        skipped += log.skipped.len();
        masks_t1.push(mask_t1);
    }

    // noise maps
    let d_z = state.gen.cfg.d_z();
    let noise: Vec<NoiseMap> = (0..n)
        .map(|slot| {
            let mut z_rng = derive_rng(state.seed, &[stream::NOISE, step, slot as u64]);
            NoiseMap::sample(d_z, h, w, &mut z_rng)
        })
        .collect();

    // one power-iteration update per step, before both forwards
    state.gen.store.update_spectral();
    state.disc.store.update_spectral();

    let gen_net = state.gen.net();
    let disc_net = state.disc.net();
    let images_t = stack_images(&batch.images_t);
    let cond = CondLevels::build(&state.gen.cfg, &batch.masks_t, &masks_t1, &noise)?;
    let mask_t1_refs: Vec<&SemanticMask> = masks_t1.iter().collect();
    let labels_t1 = labels_of(&mask_t1_refs);

    // --- update the generator once ---
    let tape_g = Tape::new();
    let sess_g = Session::new(&tape_g, &state.gen.store);
    let sess_d_frozen = Session::frozen(&tape_g, &state.disc.store);
    let x_t = tape_g.constant(images_t.clone());
    let fake = gen_net.synthesize_graph(&sess_g, &x_t, &cond, None);
    let g_loss = g_loss_graph(&disc_net, &sess_d_frozen, &fake, &labels_t1);
    let g_loss_val = g_loss.scalar();
    let fake_value = fake.value().clone();
    let grads = tape_g.backward(&g_loss);
    let g_named = sess_g.grads(&grads);
    state.opt_g.step(&mut state.gen.store, &g_named);
    if let (Some(ema), Some(decay)) = (state.ema.as_mut(), run.model.ema_decay) {
        ema.ema_update(&state.gen.store, decay);
    }

    // --- update the discriminator once (real target: time-t pair) ---
    let tape_d = Tape::new();
    let sess_d = Session::new(&tape_d, &state.disc.store);
    let real = tape_d.constant(images_t.clone());
    let fake_detached = tape_d.constant(fake_value);
    let mask_t_refs: Vec<&SemanticMask> = batch.masks_t.iter().collect();
    let labels_t = labels_of(&mask_t_refs);
    let d_loss = d_loss_graph(&disc_net, &sess_d, &real, &labels_t, &fake_detached);
    let d_loss_val = d_loss.scalar();
    let grads_d = tape_d.backward(&d_loss);
    let d_named = sess_d.grads(&grads_d);
    state.opt_d.step(&mut state.disc.store, &d_named);

    let real_is_time_t = real.value() == &images_t;

    if !g_loss_val.is_finite() || !d_loss_val.is_finite() {
        return Err(AdvTrainError::NonFinite {
            step,
            g_loss: g_loss_val,
            d_loss: d_loss_val,
        });
    }

    state.step += 1;
    state.gen.iteration = state.step;
    state.disc.iteration = state.step;
    Ok(StepReport {
        step,
        g_loss: g_loss_val,
        d_loss: d_loss_val,
        update_order: [UpdateKind::Generator, UpdateKind::Discriminator],
        real_is_time_t,
        skipped_placements: skipped,
    })
}

/// Paths produced by a training run.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub state_checkpoint: PathBuf,
    pub generator_checkpoint: PathBuf,
    pub loss_log: PathBuf,
}

fn dump_samples(
    state: &TrainState,
    dataset: &SingleTemporalDataset,
    run: &RunConfig,
    dir: &Path,
    step: u64,
) -> Result<()> {
    // one row per sample: pre-event image | post-event mask | synthesized
    let batch = assemble_batch(dataset, run, step)?;
    let count = batch.images_t.len().min(4);
    let size = run.gan.crop_size;
    let mut canvas = image::RgbImage::new((size * 3) as u32, (size * count) as u32);
    for slot in 0..count {
        let image_t = &batch.images_t[slot];
        let mask_t = &batch.masks_t[slot];
        let mut ev_rng = derive_rng(state.seed, &[stream::EVENT, step, slot as u64]);
        let (mask_t1, _) = simulate_event(mask_t, &run.events, &mut ev_rng)?;
        let mut z_rng = derive_rng(state.seed, &[stream::NOISE, step, slot as u64]);
        let z = NoiseMap::sample(state.gen.cfg.d_z(), size, size, &mut z_rng);
        let fake = gennet::synthesize(&mask_t1, image_t, mask_t, &z, &state.gen)?;
        let rgb_t = image_t.to_rgb8();
        let rgb_f = fake.to_rgb8();
        let classes = state.gen.cfg.model.class_count.max(2) as u32;
        for r in 0..size {
            for c in 0..size {
                canvas.put_pixel(c as u32, (slot * size + r) as u32, *rgb_t.get_pixel(c as u32, r as u32));
                let label = u32::from(mask_t1.labels()[(r, c)]);
                let v = (label * 255 / (classes - 1)).min(255) as u8;
                canvas.put_pixel(
                    (size + c) as u32,
                    (slot * size + r) as u32,
                    image::Rgb([v, v, v]),
                );
                canvas.put_pixel(
                    (2 * size + c) as u32,
                    (slot * size + r) as u32,
                    *rgb_f.get_pixel(c as u32, r as u32),
                );
            }
        }
    }
    let path = dir.join(format!("samples_step{step:07}.png"));
    canvas
        .save(&path)
        .map_err(|e| AdvTrainError::Checkpoint(format!("sample grid: {e}")))?;
    Ok(())
}

fn append_log(path: &Path, records: &[LossRecord]) -> Result<()> {
    use std::io::Write;
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| AdvTrainError::io(format!("opening {}", path.display()), e))?;
    for rec in records {
        let line = serde_json::to_string(rec).map_err(|e| AdvTrainError::Checkpoint(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| AdvTrainError::io("writing loss log", e))?;
    }
    Ok(())
}

/// Runs (or resumes) training to `run.gan.iterations` steps, with periodic
/// checkpoints, loss logs, and sample grids under `out_dir`.
pub fn train(
    dataset: &SingleTemporalDataset,
    run: &RunConfig,
    out_dir: &Path,
    resume: Option<&Path>,
    force: bool,
) -> Result<TrainOutputs> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| AdvTrainError::io(format!("creating {}", out_dir.display()), e))?;
    let expected_hash = GeneratorConfig::new(run.model.clone()).hash();
    let mut state = match resume {
        Some(path) => TrainState::load(path, Some(&expected_hash), force)?,
        None => TrainState::new(run),
    };
    let log_path = out_dir.join("losses.jsonl");
    let mut pending: Vec<LossRecord> = Vec::new();

    while state.step < run.gan.iterations {
        let start = Instant::now();
        let report = match train_step(&mut state, dataset, run) {
            Ok(r) => r,
            Err(AdvTrainError::NonFinite { step, g_loss, d_loss }) => {
                // keep the wreckage for diagnosis, then abort
                let crash = out_dir.join(format!("abort_step{step:07}.ckpt"));
                state.save(&crash)?;
                let diag = serde_json::json!({
                    "step": step,
                    "g_loss": g_loss,
                    "d_loss": d_loss,
                    "checkpoint": crash.display().to_string(),
                });
                std::fs::write(
                    out_dir.join(format!("abort_step{step:07}.json")),
                    serde_json::to_vec_pretty(&diag).unwrap(),
                )
                .map_err(|e| AdvTrainError::io("writing abort diagnostics", e))?;
                return Err(AdvTrainError::NonFinite { step, g_loss, d_loss });
            }
            Err(e) => return Err(e),
        };
        let wall_ms = start.elapsed().as_millis() as u64;
        let record = LossRecord {
            step: report.step,
            g_loss: report.g_loss,
            d_loss: report.d_loss,
            wall_ms,
        };
        state.history.push(record.clone());
        pending.push(record);

        let done = state.step;
        if done % run.gan.log_every == 0 || done == run.gan.iterations {
            append_log(&log_path, &pending)?;
            pending.clear();
        }
        if run.gan.sample_every > 0 && done % run.gan.sample_every == 0 {
            dump_samples(&state, dataset, run, out_dir, done)?;
        }
        if run.gan.checkpoint_every > 0 && done % run.gan.checkpoint_every == 0 {
            state.save(&out_dir.join(format!("state_step{done:07}.ckpt")))?;
        }
    }
    append_log(&log_path, &pending)?;

    let state_path = out_dir.join("state_final.ckpt");
    state.save(&state_path)?;
    let gen_path = out_dir.join("generator.ckpt");
    state.gen.save(&gen_path)?;
    Ok(TrainOutputs {
        state_checkpoint: state_path,
        generator_checkpoint: gen_path,
        loss_log: log_path,
    })
}
