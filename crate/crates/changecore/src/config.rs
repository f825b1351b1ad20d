//! Run configuration. One TOML document drives every pipeline stage; the seed
//! fully determines all stochastic choices given a fixed thread count.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};

/// How pasted instances may be rotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationPolicy {
    /// No rotation.
    None,
    /// Uniform choice among 0/90/180/270 degrees.
    RightAngle,
    /// Uniform free angle in [0, 360).
    Free,
}

/// Free parameters of the stochastic change-event simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EventConfig {
    /// Probability that a create event fires.
    pub p_create: f64,
    /// Probability that a remove event fires.
    pub p_remove: f64,
    /// Instances per event: uniform integer in `[k_min, k_max]`.
    pub k_min: u32,
    pub k_max: u32,
    /// Uniform scale factor range for pasted instances.
    pub scale_range: (f64, f64),
    pub rotation: RotationPolicy,
    /// Rejection-sampling budget per paste before the placement is skipped.
    pub max_place_retries: u32,
    /// When true, create and remove may fire in the same event; otherwise at
    /// most one fires and `p_create + p_remove` must not exceed 1.
    pub allow_mixed: bool,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            p_create: 0.5,
            p_remove: 0.5,
            k_min: 1,
            k_max: 4,
            scale_range: (0.75, 1.25),
            rotation: RotationPolicy::RightAngle,
            max_place_retries: 10,
            allow_mixed: true,
        }
    }
}

impl EventConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_create", self.p_create), ("p_remove", self.p_remove)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(CoreError::Config(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        if self.k_min > self.k_max {
            return Err(CoreError::Config(format!(
                "k_min {} exceeds k_max {}",
                self.k_min, self.k_max
            )));
        }
        if self.scale_range.0 <= 0.0 || self.scale_range.1 < self.scale_range.0 {
            return Err(CoreError::Config(format!(
                "invalid scale range {:?}",
                self.scale_range
            )));
        }
        if !self.allow_mixed && self.p_create + self.p_remove > 1.0 + 1e-12 {
            return Err(CoreError::Config(
                "without allow_mixed, p_create + p_remove must be at most 1".into(),
            ));
        }
        Ok(())
    }
}

/// Architecture-defining knobs shared by the generator and discriminator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Semantic class count C (background included).
    pub class_count: u16,
    /// Global channel-width factor; 1.0 is full scale, 0.125 desk scale.
    /// Scales every channel count, including the noise channels.
    pub width_scale: f64,
    /// Noise channel count at width_scale 1.0.
    pub noise_channels: usize,
    /// Spectral normalization on all conv layers.
    pub spectral_norm: bool,
    /// Masked-transition masking step (ablation flag).
    pub masking: bool,
    /// Masked-transition de-styling step (ablation flag).
    pub destyling: bool,
    /// EMA decay for generator weights; disabled when absent.
    pub ema_decay: Option<f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            class_count: 2,
            width_scale: 1.0,
            noise_channels: 64,
            spectral_norm: true,
            masking: true,
            destyling: true,
            ema_decay: None,
        }
    }
}

impl ModelConfig {
    /// Effective noise channel count after width scaling.
    pub fn d_z(&self) -> usize {
        (((self.noise_channels as f64) * self.width_scale).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count < 2 {
            return Err(CoreError::ClassCount(self.class_count));
        }
        if self.width_scale <= 0.0 {
            return Err(CoreError::Config(format!(
                "width_scale must be positive, got {}",
                self.width_scale
            )));
        }
        if self.noise_channels == 0 {
            return Err(CoreError::Config("noise_channels must be positive".into()));
        }
        if let Some(d) = self.ema_decay {
            if !(0.0..1.0).contains(&d) {
                return Err(CoreError::Config(format!("ema_decay must be in [0, 1), got {d}")));
            }
        }
        Ok(())
    }

    /// Hash over the architecture-defining fields. Checkpoints refuse to load
    /// when this differs, unless forced.
    pub fn hash(&self) -> String {
        let canon = format!(
            "class_count={};width_scale={};noise_channels={};spectral_norm={};masking={};destyling={}",
            self.class_count,
            self.width_scale,
            self.noise_channels,
            self.spectral_norm,
            self.masking,
            self.destyling,
        );
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// GAN training hyperparameters. Defaults mirror the full-scale recipe; desk
/// runs override batch/iterations/crop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GanTrainConfig {
    pub batch_size: usize,
    pub iterations: u64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub crop_size: usize,
    pub checkpoint_every: u64,
    pub sample_every: u64,
    pub log_every: u64,
}

impl Default for GanTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            iterations: 100_000,
            lr_g: 1e-4,
            lr_d: 4e-4,
            beta1: 0.0,
            beta2: 0.999,
            crop_size: 256,
            checkpoint_every: 5_000,
            sample_every: 1_000,
            log_every: 100,
        }
    }
}

impl GanTrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("batch_size", self.batch_size as u64),
            ("iterations", self.iterations),
            ("crop_size", self.crop_size as u64),
        ] {
            if v == 0 {
                return Err(CoreError::Config(format!("{name} must be positive")));
            }
        }
        if self.crop_size % 32 != 0 {
            return Err(CoreError::Config(format!(
                "crop_size must be divisible by 32, got {}",
                self.crop_size
            )));
        }
        for (name, lr) in [("lr_g", self.lr_g), ("lr_d", self.lr_d)] {
            if lr < 0.0 || !lr.is_finite() {
                return Err(CoreError::Config(format!("{name} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Geometric/photometric augmentation toggles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub flip: bool,
    pub rotate: bool,
    pub transpose: bool,
    /// Uniform resize factor range; disabled when absent.
    pub scale_jitter: Option<(f64, f64)>,
    /// Max per-channel brightness/contrast perturbation; disabled when absent.
    pub color_jitter: Option<f64>,
    /// Random crop size; disabled when absent.
    pub crop: Option<usize>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            flip: true,
            rotate: true,
            transpose: true,
            scale_jitter: Some((1.0, 1.5)),
            color_jitter: None,
            crop: None,
        }
    }
}

impl AugmentConfig {
    /// Everything off; useful for identity tests and generation-time loading.
    pub fn off() -> Self {
        Self {
            flip: false,
            rotate: false,
            transpose: false,
            scale_jitter: None,
            color_jitter: None,
            crop: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.scale_jitter {
            if lo <= 0.0 || hi < lo {
                return Err(CoreError::Config(format!(
                    "invalid scale_jitter range ({lo}, {hi})"
                )));
            }
        }
        if self.crop == Some(0) {
            return Err(CoreError::Config("crop must be positive".into()));
        }
        Ok(())
    }
}

/// Detector pre-training/fine-tuning hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorTrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub poly_gamma: f64,
    /// Channel count of the fused feature/change head at width_scale 1.0.
    pub head_channels: usize,
    pub seg_loss_weight: f64,
    pub change_loss_weight: f64,
}

impl Default for DetectorTrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 20,
            lr: 0.03,
            momentum: 0.9,
            weight_decay: 1e-4,
            poly_gamma: 0.9,
            head_channels: 96,
            seg_loss_weight: 1.0,
            change_loss_weight: 1.0,
        }
    }
}

impl DetectorTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 || self.head_channels == 0 {
            return Err(CoreError::Config(
                "detector batch_size, epochs, and head_channels must be positive".into(),
            ));
        }
        if self.lr < 0.0 || self.momentum < 0.0 || self.weight_decay < 0.0 {
            return Err(CoreError::Config(
                "detector optimizer values must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelConfig,
    pub gan: GanTrainConfig,
    pub events: EventConfig,
    pub augment: AugmentConfig,
    pub detector: DetectorTrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.gan.validate()?;
        self.events.validate()?;
        self.augment.validate()?;
        self.detector.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CoreError::io(format!("reading config {}", path.display()), e))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CoreError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CoreError::Config(format!("serializing config: {e}")))?;
        std::fs::write(path, text)
            .map_err(|e| CoreError::io(format!("writing config {}", path.display()), e))
    }

    /// Desk-scale preset: tiny widths and crops so everything runs on a CPU.
    pub fn desk_scale(seed: u64) -> Self {
        let mut cfg = Self {
            seed,
            ..Self::default()
        };
        cfg.model.width_scale = 0.125;
        cfg.gan.batch_size = 8;
        cfg.gan.iterations = 500;
        cfg.gan.crop_size = 64;
        cfg.gan.checkpoint_every = 250;
        cfg.gan.sample_every = 250;
        cfg.gan.log_every = 50;
        cfg.detector.batch_size = 8;
        cfg.detector.epochs = 20;
        cfg
    }
}
