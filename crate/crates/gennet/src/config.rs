use changecore::ModelConfig;
use serde::{Deserialize, Serialize};

/// Architecture configuration of the generator. The channel schedule derives
/// from the model's width scale; nothing here depends on the input size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub model: ModelConfig,
    pub leaky_slope: f64,
    /// Group-norm groups are the largest divisor of the channel count not
    /// exceeding this.
    pub gn_max_groups: usize,
    pub norm_eps: f64,
    /// Hidden width of the spatially-adaptive normalization MLP at
    /// width_scale 1.0.
    pub spade_hidden: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self::new(ModelConfig::default())
    }
}

impl GeneratorConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            leaky_slope: 0.2,
            gn_max_groups: 32,
            norm_eps: 1e-5,
            spade_hidden: 64,
        }
    }

    pub fn class_count(&self) -> usize {
        self.model.class_count as usize
    }

    /// Channels of pyramid level `i`: `round(512 * width_scale / 2^i)`,
    /// floored at 1.
    pub fn level_channels(&self, level: usize) -> usize {
        let raw = 512.0 * self.model.width_scale / (1u64 << level) as f64;
        (raw.round() as usize).max(1)
    }

    /// Effective noise channel count (width-scaled).
    pub fn d_z(&self) -> usize {
        self.model.d_z()
    }

    pub fn spade_hidden_channels(&self) -> usize {
        (((self.spade_hidden as f64) * self.model.width_scale).round() as usize).max(1)
    }

    /// Conditioning channels fed to the decoder: one-hot classes + noise.
    pub fn cond_channels(&self) -> usize {
        self.class_count() + self.d_z()
    }

    pub fn hash(&self) -> String {
        self.model.hash()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_schedule_full_scale() {
        let cfg = GeneratorConfig::default();
        let chans: Vec<usize> = (0..6).map(|i| cfg.level_channels(i)).collect();
        assert_eq!(chans, vec![512, 256, 128, 64, 32, 16]);
    }

    #[test]
    fn channel_schedule_desk_scale() {
        let mut model = ModelConfig::default();
        model.width_scale = 0.125;
        let cfg = GeneratorConfig::new(model);
        let chans: Vec<usize> = (0..6).map(|i| cfg.level_channels(i)).collect();
        assert_eq!(chans, vec![64, 32, 16, 8, 4, 2]);
        assert_eq!(cfg.d_z(), 8);
    }
}
