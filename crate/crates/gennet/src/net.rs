//! The generator network definition: parameter initialization and the graph
//! forwards for the encoder, masked transition layers, and decoder.

use changecore::rng::{derive_rng, stream};
use ndarray::ArrayD;
use rand::Rng;
use tapegrad::ops::{self, Conv2d};
use tapegrad::{init, ParamStore, Session, Var};

use crate::config::GeneratorConfig;
use crate::cond::CondLevels;
use crate::pyramid::LEVELS;

/// Shapes observed during one synthesis pass; used by the size-formula tests.
#[derive(Debug, Clone, Default)]
pub struct SynthesisTrace {
    /// Decoder feature shape `(C, H, W)` entering each level's transition.
    pub decoder_levels: Vec<(usize, usize, usize)>,
    /// Change-field shape `(C, H, W)` at each level.
    pub change_fields: Vec<(usize, usize, usize)>,
}

pub struct GeneratorNet {
    pub cfg: GeneratorConfig,
}

fn chw(v: &Var<'_>) -> (usize, usize, usize) {
    let s = v.shape();
    (s[1], s[2], s[3])
}

impl GeneratorNet {
    pub fn new(cfg: GeneratorConfig) -> Self {
        Self { cfg }
    }

    fn conv_weight(
        &self,
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        shape: &[usize],
    ) {
        let w = init::he_normal(shape, self.cfg.leaky_slope, rng);
        if self.cfg.model.spectral_norm {
            store.insert_spectral(name, w, rng);
        } else {
            store.insert(name, w);
        }
    }

    fn head_weight(
        &self,
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        shape: &[usize],
        std: f64,
    ) {
        let w = init::normal(shape, std, rng);
        if self.cfg.model.spectral_norm {
            store.insert_spectral(name, w, rng);
        } else {
            store.insert(name, w);
        }
    }

    fn init_gn(&self, store: &mut ParamStore, prefix: &str, channels: usize) {
        store.insert(&format!("{prefix}.g"), init::ones(&[channels]));
        store.insert(&format!("{prefix}.b"), init::zeros(&[channels]));
    }

    fn init_spade(
        &self,
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        x_channels: usize,
        cond_channels: usize,
    ) {
        let nh = self.cfg.spade_hidden_channels();
        self.conv_weight(store, rng, &format!("{prefix}.hidden.w"), &[nh, cond_channels, 3, 3]);
        store.insert(&format!("{prefix}.hidden.b"), init::zeros(&[nh]));
        // modulation heads start near identity
        self.head_weight(store, rng, &format!("{prefix}.gamma.w"), &[x_channels, nh, 3, 3], 0.02);
        store.insert(&format!("{prefix}.gamma.b"), init::zeros(&[x_channels]));
        self.head_weight(store, rng, &format!("{prefix}.beta.w"), &[x_channels, nh, 3, 3], 0.02);
        store.insert(&format!("{prefix}.beta.b"), init::zeros(&[x_channels]));
    }

    fn init_enc_block(
        &self,
        store: &mut ParamStore,
        rng: &mut impl Rng,
        prefix: &str,
        c_in: usize,
        c_out: usize,
        downsample: bool,
    ) {
        self.conv_weight(store, rng, &format!("{prefix}.conv1.w"), &[c_out, c_in, 3, 3]);
        self.init_gn(store, &format!("{prefix}.gn1"), c_out);
        self.conv_weight(store, rng, &format!("{prefix}.conv2.w"), &[c_out, c_out, 3, 3]);
        self.init_gn(store, &format!("{prefix}.gn2"), c_out);
        if downsample || c_in != c_out {
            self.conv_weight(store, rng, &format!("{prefix}.skip.w"), &[c_out, c_in, 1, 1]);
        }
    }

    /// Channel count entering decoder level `i`.
    fn dec_in_channels(&self, level: usize) -> usize {
        self.cfg.level_channels(level)
    }

    /// Channel count leaving decoder level `i`.
    fn dec_out_channels(&self, level: usize) -> usize {
        if level + 1 < LEVELS {
            self.cfg.level_channels(level + 1)
        } else {
            self.cfg.level_channels(LEVELS - 1)
        }
    }

    /// Creates all parameters. The RNG stream derives from `(seed, INIT)`,
    /// and creation order is fixed, so initialization is reproducible.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let mut rng = derive_rng(seed, &[stream::INIT]);
        let rng = &mut rng;
        let mut store = ParamStore::new();
        let cfg = &self.cfg;
        let c: Vec<usize> = (0..LEVELS).map(|i| cfg.level_channels(i)).collect();

        // encoder: stem at stride 1, five downsampling stages of two blocks
        self.conv_weight(&mut store, rng, "enc.stem.w", &[c[5], 3, 3, 3]);
        self.init_gn(&mut store, "enc.stem.gn", c[5]);
        for stage in 1..=5 {
            let c_in = c[6 - stage];
            let c_out = c[5 - stage];
            self.init_enc_block(&mut store, rng, &format!("enc.down{stage}.b0"), c_in, c_out, true);
            self.init_enc_block(&mut store, rng, &format!("enc.down{stage}.b1"), c_out, c_out, false);
        }
        // U-Net top and upsampling path
        self.conv_weight(&mut store, rng, "enc.top.w", &[c[0], c[0], 3, 3]);
        self.init_gn(&mut store, "enc.top.gn", c[0]);
        for level in 1..LEVELS {
            let cat = c[level - 1] + c[level];
            self.conv_weight(&mut store, rng, &format!("enc.up{level}.w"), &[c[level], cat, 3, 3]);
            self.init_gn(&mut store, &format!("enc.up{level}.gn"), c[level]);
        }

        // decoder input projection over the 32x-downsampled conditioning
        self.conv_weight(&mut store, rng, "dec.in.w", &[c[0], cfg.cond_channels(), 3, 3]);
        store.insert("dec.in.b", init::zeros(&[c[0]]));

        // per level: masked transition + decoder residual block
        for level in 0..LEVELS {
            let ci = self.dec_in_channels(level);
            let co = self.dec_out_channels(level);
            let cm = ci.min(co);
            let mtl = format!("mtl{level}");
            self.conv_weight(&mut store, rng, &format!("{mtl}.destyle.w"), &[ci, ci, 1, 1]);
            self.init_spade(&mut store, rng, &format!("{mtl}.spade"), ci, cfg.class_count());

            let dec = format!("dec{level}");
            self.init_spade(&mut store, rng, &format!("{dec}.spade1"), ci, cfg.cond_channels());
            self.conv_weight(&mut store, rng, &format!("{dec}.conv1.w"), &[cm, ci, 3, 3]);
            store.insert(&format!("{dec}.conv1.b"), init::zeros(&[cm]));
            self.init_spade(&mut store, rng, &format!("{dec}.spade2"), cm, cfg.cond_channels());
            self.conv_weight(&mut store, rng, &format!("{dec}.conv2.w"), &[co, cm, 3, 3]);
            store.insert(&format!("{dec}.conv2.b"), init::zeros(&[co]));
            if ci != co {
                self.init_spade(&mut store, rng, &format!("{dec}.spade_s"), ci, cfg.cond_channels());
                self.conv_weight(&mut store, rng, &format!("{dec}.skip.w"), &[co, ci, 1, 1]);
            }
        }

        self.head_weight(&mut store, rng, "dec.head.w", &[3, c[5], 3, 3], 0.02);
        store.insert("dec.head.b", init::zeros(&[3]));
        store
    }

    fn gn_affine<'t>(&self, sess: &Session<'t, '_>, prefix: &str, x: &Var<'t>) -> Var<'t> {
        let channels = x.shape()[1];
        let groups = groups_for(channels, self.cfg.gn_max_groups);
        let xh = ops::group_norm(x, groups, self.cfg.norm_eps);
        ops::affine_channels(
            &xh,
            &sess.param(&format!("{prefix}.g")),
            &sess.param(&format!("{prefix}.b")),
        )
    }

    fn enc_block<'t>(
        &self,
        sess: &Session<'t, '_>,
        prefix: &str,
        x: &Var<'t>,
        c_out: usize,
        downsample: bool,
    ) -> Var<'t> {
        let slope = self.cfg.leaky_slope;
        let c_in = x.shape()[1];
        let spec1 = if downsample {
            Conv2d::down_3x3()
        } else {
            Conv2d::same_3x3()
        };
        let mut h = ops::conv2d(x, &sess.weight(&format!("{prefix}.conv1.w")), None, spec1);
        h = self.gn_affine(sess, &format!("{prefix}.gn1"), &h);
        h = ops::leaky_relu(&h, slope);
        h = ops::conv2d(&h, &sess.weight(&format!("{prefix}.conv2.w")), None, Conv2d::same_3x3());
        h = self.gn_affine(sess, &format!("{prefix}.gn2"), &h);
        let s = if downsample || c_in != c_out {
            let spec = Conv2d {
                stride: if downsample { 2 } else { 1 },
                pad: 0,
            };
            ops::conv2d(x, &sess.weight(&format!("{prefix}.skip.w")), None, spec)
        } else {
            x.clone()
        };
        ops::leaky_relu(&ops::add(&h, &s), slope)
    }

    /// U-Net encoder: six pyramid levels, coarsest (level 0) first.
    pub fn encode_graph<'t>(&self, sess: &Session<'t, '_>, image: &Var<'t>) -> Vec<Var<'t>> {
        let slope = self.cfg.leaky_slope;
        let c: Vec<usize> = (0..LEVELS).map(|i| self.cfg.level_channels(i)).collect();
        // downward path; skips[level] holds the feature at that level's stride
        let mut skips: Vec<Option<Var<'t>>> = vec![None; LEVELS];
        let mut cur = ops::conv2d(image, &sess.weight("enc.stem.w"), None, Conv2d::same_3x3());
        cur = self.gn_affine(sess, "enc.stem.gn", &cur);
        cur = ops::leaky_relu(&cur, slope);
        skips[5] = Some(cur.clone());
        for stage in 1..=5 {
            let c_out = c[5 - stage];
            cur = self.enc_block(sess, &format!("enc.down{stage}.b0"), &cur, c_out, true);
            cur = self.enc_block(sess, &format!("enc.down{stage}.b1"), &cur, c_out, false);
            skips[5 - stage] = Some(cur.clone());
        }
        // upward path producing the pyramid
        let mut levels = Vec::with_capacity(LEVELS);
        let top_in = skips[0].clone().unwrap();
        let mut f = ops::conv2d(&top_in, &sess.weight("enc.top.w"), None, Conv2d::same_3x3());
        f = self.gn_affine(sess, "enc.top.gn", &f);
        f = ops::leaky_relu(&f, slope);
        levels.push(f.clone());
        for level in 1..LEVELS {
            let up = ops::upsample_nearest_x2(&f);
            let skip = skips[level].clone().unwrap();
            let cat = ops::concat_channels(&[&up, &skip]);
            f = ops::conv2d(&cat, &sess.weight(&format!("enc.up{level}.w")), None, Conv2d::same_3x3());
            f = self.gn_affine(sess, &format!("enc.up{level}.gn"), &f);
            f = ops::leaky_relu(&f, slope);
            levels.push(f.clone());
        }
        levels
    }

    /// Spatially-adaptive normalization conditioned on a constant map.
    fn spade<'t>(&self, sess: &Session<'t, '_>, prefix: &str, x: &Var<'t>, cond: &ArrayD<f64>) -> Var<'t> {
        let slope = self.cfg.leaky_slope;
        let c = sess.tape().constant(cond.clone());
        let hidden = ops::conv2d(
            &c,
            &sess.weight(&format!("{prefix}.hidden.w")),
            Some(&sess.param(&format!("{prefix}.hidden.b"))),
            Conv2d::same_3x3(),
        );
        let hidden = ops::leaky_relu(&hidden, slope);
        let gamma = ops::conv2d(
            &hidden,
            &sess.weight(&format!("{prefix}.gamma.w")),
            Some(&sess.param(&format!("{prefix}.gamma.b"))),
            Conv2d::same_3x3(),
        );
        let beta = ops::conv2d(
            &hidden,
            &sess.weight(&format!("{prefix}.beta.w")),
            Some(&sess.param(&format!("{prefix}.beta.b"))),
            Conv2d::same_3x3(),
        );
        let groups = groups_for(x.shape()[1], self.cfg.gn_max_groups);
        let xh = ops::group_norm(x, groups, self.cfg.norm_eps);
        ops::spade_modulate(&xh, &gamma, &beta)
    }

    /// De-styling: 1x1 conv, instance normalization, leaky rectifier.
    pub(crate) fn destyle_graph<'t>(
        &self,
        sess: &Session<'t, '_>,
        level: usize,
        x: &Var<'t>,
    ) -> (Var<'t>, Var<'t>) {
        let projected = ops::conv2d(
            x,
            &sess.weight(&format!("mtl{level}.destyle.w")),
            None,
            Conv2d::pointwise(),
        );
        let normalized = ops::instance_norm(&projected, self.cfg.norm_eps);
        let out = ops::leaky_relu(&normalized, self.cfg.leaky_slope);
        (normalized, out)
    }

    /// Masked transition layer at `level`: masking selects post-event decoder
    /// features on pre-event foreground, de-styling weakens the remaining
    /// pre-event statistics, and a spatially-adaptive normalization injects
    /// the post-event semantics, yielding the change field.
    pub(crate) fn masked_transition_graph<'t>(
        &self,
        sess: &Session<'t, '_>,
        level: usize,
        f_t: &Var<'t>,
        f_dec: &Var<'t>,
        fg_t: &ArrayD<f64>,
        onehot_t1: &ArrayD<f64>,
    ) -> Var<'t> {
        let mut x = if self.cfg.model.masking {
            ops::select_mask(f_t, f_dec, fg_t)
        } else {
            f_t.clone()
        };
        if self.cfg.model.destyling {
            x = self.destyle_graph(sess, level, &x).1;
        }
        self.spade(sess, &format!("mtl{level}.spade"), &x, onehot_t1)
    }

    /// Decoder residual block `G_i` (no upsampling; the caller upsamples).
    pub(crate) fn resblock_graph<'t>(
        &self,
        sess: &Session<'t, '_>,
        level: usize,
        x: &Var<'t>,
        cond: &ArrayD<f64>,
    ) -> Var<'t> {
        let slope = self.cfg.leaky_slope;
        let ci = self.dec_in_channels(level);
        let co = self.dec_out_channels(level);
        let dec = format!("dec{level}");
        let h = self.spade(sess, &format!("{dec}.spade1"), x, cond);
        let h = ops::leaky_relu(&h, slope);
        let h = ops::conv2d(
            &h,
            &sess.weight(&format!("{dec}.conv1.w")),
            Some(&sess.param(&format!("{dec}.conv1.b"))),
            Conv2d::same_3x3(),
        );
        let h = self.spade(sess, &format!("{dec}.spade2"), &h, cond);
        let h = ops::leaky_relu(&h, slope);
        let h = ops::conv2d(
            &h,
            &sess.weight(&format!("{dec}.conv2.w")),
            Some(&sess.param(&format!("{dec}.conv2.b"))),
            Conv2d::same_3x3(),
        );
        let s = if ci != co {
            let xs = self.spade(sess, &format!("{dec}.spade_s"), x, cond);
            ops::conv2d(&xs, &sess.weight(&format!("{dec}.skip.w")), None, Conv2d::pointwise())
        } else {
            x.clone()
        };
        ops::add(&h, &s)
    }

    /// Full synthesis graph for a batch. Returns the tanh image `(N, 3, H, W)`.
    pub fn synthesize_graph<'t>(
        &self,
        sess: &Session<'t, '_>,
        image_t: &Var<'t>,
        cond: &CondLevels,
        mut trace: Option<&mut SynthesisTrace>,
    ) -> Var<'t> {
        let f_t = self.encode_graph(sess, image_t);
        let mut f = ops::conv2d(
            &sess.tape().constant(cond.cond[0].clone()),
            &sess.weight("dec.in.w"),
            Some(&sess.param("dec.in.b")),
            Conv2d::same_3x3(),
        );
        for level in 0..LEVELS {
            if let Some(t) = trace.as_deref_mut() {
                t.decoder_levels.push(chw(&f));
            }
            let delta = self.masked_transition_graph(
                sess,
                level,
                &f_t[level],
                &f,
                &cond.fg_t[level],
                &cond.onehot_t1[level],
            );
            if let Some(t) = trace.as_deref_mut() {
                t.change_fields.push(chw(&delta));
            }
            f = ops::add(&f, &delta);
            f = self.resblock_graph(sess, level, &f, &cond.cond[level]);
            if level + 1 < LEVELS {
                f = ops::upsample_nearest_x2(&f);
            }
        }
        let out = ops::conv2d(
            &f,
            &sess.weight("dec.head.w"),
            Some(&sess.param("dec.head.b")),
            Conv2d::same_3x3(),
        );
        ops::tanh(&out)
    }
}

/// Largest group count <= `max_groups` dividing `channels`.
pub(crate) fn groups_for(channels: usize, max_groups: usize) -> usize {
    (1..=max_groups.min(channels))
        .rev()
        .find(|g| channels % g == 0)
        .unwrap_or(1)
}
