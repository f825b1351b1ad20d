//! Segmentation-based discriminator: a U-Net scoring each pixel over
//! `C + 1` classes, with spectral normalization and no normalization layers.
//! Depth mirrors the generator's six-level pyramid so receptive fields are
//! comparable.

use changecore::rng::{derive_rng, stream};
use changecore::{ImageArray, ModelConfig};
use ndarray::{Array3, ArrayD, Ix4, IxDyn};
use serde::{Deserialize, Serialize};
use tapegrad::ops::{self, Conv2d};
use tapegrad::{init, ParamStore, Session, Tape, Var};

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub model: ModelConfig,
    pub leaky_slope: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self::new(ModelConfig::default())
    }
}

impl DiscriminatorConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self {
            model,
            leaky_slope: 0.2,
        }
    }

    pub fn level_channels(&self, level: usize) -> usize {
        let raw = 512.0 * self.model.width_scale / (1u64 << level) as f64;
        (raw.round() as usize).max(1)
    }

    /// Real classes plus the fake class (appended last).
    pub fn out_classes(&self) -> usize {
        self.model.class_count as usize + 1
    }

    pub fn hash(&self) -> String {
        self.model.hash()
    }
}

#[derive(Debug, Clone)]
pub struct DiscriminatorParams {
    pub cfg: DiscriminatorConfig,
    pub store: ParamStore,
    pub iteration: u64,
}

impl DiscriminatorParams {
    pub fn init(cfg: DiscriminatorConfig, seed: u64) -> Self {
        let net = DiscriminatorNet::new(cfg.clone());
        let store = net.init_params(seed);
        Self {
            cfg,
            store,
            iteration: 0,
        }
    }

    pub fn net(&self) -> DiscriminatorNet {
        DiscriminatorNet::new(self.cfg.clone())
    }
}

pub struct DiscriminatorNet {
    pub cfg: DiscriminatorConfig,
}

impl DiscriminatorNet {
    pub fn new(cfg: DiscriminatorConfig) -> Self {
        Self { cfg }
    }

    fn conv(&self, store: &mut ParamStore, rng: &mut impl rand::Rng, name: &str, shape: &[usize]) {
        let w = init::he_normal(shape, self.cfg.leaky_slope, rng);
        if self.cfg.model.spectral_norm {
            store.insert_spectral(name, w, rng);
        } else {
            store.insert(name, w);
        }
    }

    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = derive_rng(seed, &[stream::INIT, 0xD]);
        let rng = &mut rng;
        let mut store = ParamStore::new();
        let c: Vec<usize> = (0..6).map(|i| self.cfg.level_channels(i)).collect();

        self.conv(&mut store, rng, "stem.w", &[c[5], 3, 3, 3]);
        store.insert("stem.b", init::zeros(&[c[5]]));
        for stage in 1..=5 {
            let c_in = c[6 - stage];
            let c_out = c[5 - stage];
            let p = format!("down{stage}");
            self.conv(&mut store, rng, &format!("{p}.conv1.w"), &[c_out, c_in, 3, 3]);
            store.insert(&format!("{p}.conv1.b"), init::zeros(&[c_out]));
            self.conv(&mut store, rng, &format!("{p}.conv2.w"), &[c_out, c_out, 3, 3]);
            store.insert(&format!("{p}.conv2.b"), init::zeros(&[c_out]));
            self.conv(&mut store, rng, &format!("{p}.skip.w"), &[c_out, c_in, 1, 1]);
        }
        self.conv(&mut store, rng, "top.w", &[c[0], c[0], 3, 3]);
        store.insert("top.b", init::zeros(&[c[0]]));
        for level in 1..6 {
            let cat = c[level - 1] + c[level];
            self.conv(&mut store, rng, &format!("up{level}.w"), &[c[level], cat, 3, 3]);
            store.insert(&format!("up{level}.b"), init::zeros(&[c[level]]));
        }
        self.conv(&mut store, rng, "head.w", &[self.cfg.out_classes(), c[5], 3, 3]);
        store.insert("head.b", init::zeros(&[self.cfg.out_classes()]));
        store
    }

    fn down_block<'t>(&self, sess: &Session<'t, '_>, prefix: &str, x: &Var<'t>) -> Var<'t> {
        let slope = self.cfg.leaky_slope;
        let h = ops::conv2d(
            x,
            &sess.weight(&format!("{prefix}.conv1.w")),
            Some(&sess.param(&format!("{prefix}.conv1.b"))),
            Conv2d::down_3x3(),
        );
        let h = ops::leaky_relu(&h, slope);
        let h = ops::conv2d(
            &h,
            &sess.weight(&format!("{prefix}.conv2.w")),
            Some(&sess.param(&format!("{prefix}.conv2.b"))),
            Conv2d::same_3x3(),
        );
        let s = ops::conv2d(
            x,
            &sess.weight(&format!("{prefix}.skip.w")),
            None,
            Conv2d { stride: 2, pad: 0 },
        );
        ops::leaky_relu(&ops::add(&h, &s), slope)
    }

    /// Per-pixel logits `(N, C+1, H, W)`. Fully convolutional: any input
    /// divisible by 32.
    pub fn forward_graph<'t>(&self, sess: &Session<'t, '_>, image: &Var<'t>) -> Var<'t> {
        let slope = self.cfg.leaky_slope;
        let mut skips: Vec<Option<Var<'t>>> = vec![None; 6];
        let mut cur = ops::conv2d(
            image,
            &sess.weight("stem.w"),
            Some(&sess.param("stem.b")),
            Conv2d::same_3x3(),
        );
        cur = ops::leaky_relu(&cur, slope);
        skips[5] = Some(cur.clone());
        for stage in 1..=5 {
            cur = self.down_block(sess, &format!("down{stage}"), &cur);
            skips[5 - stage] = Some(cur.clone());
        }
        let mut f = ops::conv2d(
            &skips[0].clone().unwrap(),
            &sess.weight("top.w"),
            Some(&sess.param("top.b")),
            Conv2d::same_3x3(),
        );
        f = ops::leaky_relu(&f, slope);
        for level in 1..6 {
            let up = ops::upsample_nearest_x2(&f);
            let cat = ops::concat_channels(&[&up, &skips[level].clone().unwrap()]);
            f = ops::conv2d(
                &cat,
                &sess.weight(&format!("up{level}.w")),
                Some(&sess.param(&format!("up{level}.b"))),
                Conv2d::same_3x3(),
            );
            f = ops::leaky_relu(&f, slope);
        }
        ops::conv2d(
            &f,
            &sess.weight("head.w"),
            Some(&sess.param("head.b")),
            Conv2d::same_3x3(),
        )
    }
}

/// Per-pixel scores for one image, laid out `(H, W, C+1)`.
pub fn discriminate(image: &ImageArray, params: &DiscriminatorParams) -> Result<Array3<f64>> {
    let (h, w) = image.shape();
    let net = params.net();
    let tape = Tape::new();
    let sess = Session::frozen(&tape, &params.store);
    let chw = image.to_chw();
    let mut batch = ArrayD::zeros(IxDyn(&[1, 3, h, w]));
    for ((c, r, col), &v) in chw.indexed_iter() {
        batch[[0, c, r, col]] = v;
    }
    let x = tape.constant(batch);
    let logits = net.forward_graph(&sess, &x);
    let v4 = logits.value().view().into_dimensionality::<Ix4>().unwrap();
    let (_, k, oh, ow) = v4.dim();
    Ok(Array3::from_shape_fn((oh, ow, k), |(r, c, cls)| {
        v4[(0, cls, r, c)]
    }))
}
