//! Training-loop conformance: loss closed forms, gradient hygiene between
//! the two updates, alternation order, seeded determinism, and bit-exact
//! checkpoint/resume.

use advtrain::{
    assemble_batch, d_loss, discriminate, g_loss, train_step, DiscriminatorConfig,
    DiscriminatorParams, TrainState, UpdateKind,
};
use changecore::rng::{derive_rng, stream};
use changecore::{load_dataset, ImageArray, ModelConfig, NoiseMap, RunConfig, SemanticMask};
use gennet::CondLevels;
use ndarray::{Array2, Array3, ArrayD, IxDyn};
use rand::Rng;
use std::path::Path;
use tapegrad::{Session, Tape};

fn desk_run(seed: u64) -> RunConfig {
    let mut run = RunConfig::desk_scale(seed);
    run.gan.batch_size = 2;
    run.gan.crop_size = 32;
    run.gan.iterations = 4;
    run.gan.checkpoint_every = 0;
    run.gan.sample_every = 0;
    run
}

fn toy_dataset(dir: &Path, count: usize, seed: u64) -> changecore::SingleTemporalDataset {
    toydata::generate_source_dataset(dir, count, 32, seed).unwrap();
    load_dataset(dir, Path::new("manifest.jsonl"), None).unwrap()
}

fn zeroed_disc(seed: u64) -> DiscriminatorParams {
    let cfg = DiscriminatorConfig::new(ModelConfig {
        width_scale: 0.125,
        ..ModelConfig::default()
    });
    let mut params = DiscriminatorParams::init(cfg, seed);
    let names: Vec<String> = params.store.names().map(str::to_string).collect();
    for name in names {
        params.store.get_mut(&name).fill(0.0);
    }
    params
}

fn random_pair(seed: u64) -> (ImageArray, SemanticMask) {
    let mut rng = derive_rng(seed, &[stream::TOY]);
    let img = ImageArray::new(Array3::from_shape_fn((32, 32, 3), |_| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let mask = SemanticMask::new(
        Array2::from_shape_fn((32, 32), |(r, c)| u8::from((r / 8 + c / 8) % 2 == 0)),
        2,
    )
    .unwrap();
    (img, mask)
}

#[test]
fn discriminator_shape_and_resolution_scaling() {
    let params = zeroed_disc(1);
    let (img, _) = random_pair(2);
    let scores = discriminate(&img, &params).unwrap();
    assert_eq!(scores.dim(), (32, 32, 3)); // C+1 = 3 classes
    // doubling the input resolution doubles the output resolution
    let mut rng = derive_rng(3, &[stream::TOY]);
    let big = ImageArray::new(Array3::from_shape_fn((64, 64, 3), |_| {
        rng.random_range(-1.0..1.0)
    }))
    .unwrap();
    let scores = discriminate(&big, &params).unwrap();
    assert_eq!(scores.dim(), (64, 64, 3));
}

#[test]
fn uniform_logits_give_ln_c_plus_1() {
    // all-zero discriminator parameters produce uniform logits everywhere
    let params = zeroed_disc(4);
    let (img_r, mask_r) = random_pair(5);
    let (img_f, mask_f) = random_pair(6);
    let expected = 3.0f64.ln(); // C+1 = 3
    let d = d_loss((&img_r, &mask_r), (&img_f, &mask_f), &params).unwrap();
    assert!((d - expected).abs() < 1e-9, "d_loss {d} vs {expected}");
    let g = g_loss((&img_f, &mask_f), &params).unwrap();
    assert!((g - expected).abs() < 1e-9, "g_loss {g} vs {expected}");
}

#[test]
fn d_loss_gradients_never_reach_the_generator() {
    // reproduce the discriminator step with a *tracked* generator session:
    // because the fake image is detached, no gradient may reach any
    // generator parameter
    let run = desk_run(7);
    let mut model = run.model.clone();
    model.width_scale = 0.125;
    let gen = gennet::GeneratorParams::init(gennet::GeneratorConfig::new(model.clone()), 7);
    let disc = DiscriminatorParams::init(DiscriminatorConfig::new(model), 7);
    let (img, mask_t) = random_pair(8);
    let mask_t1 = mask_t.clone();
    let z = NoiseMap::sample(gen.cfg.d_z(), 32, 32, &mut derive_rng(9, &[stream::NOISE]));

    let tape = Tape::new();
    let sess_g = Session::new(&tape, &gen.store); // deliberately tracked
    let sess_d = Session::new(&tape, &disc.store);
    let cond = CondLevels::build(
        &gen.cfg,
        std::slice::from_ref(&mask_t),
        std::slice::from_ref(&mask_t1),
        std::slice::from_ref(&z),
    )
    .unwrap();
    let mut x = ArrayD::zeros(IxDyn(&[1, 3, 32, 32]));
    for ((c, r, col), &v) in img.to_chw().indexed_iter() {
        x[[0, c, r, col]] = v;
    }
    let x = tape.constant(x);
    let fake = gen.net().synthesize_graph(&sess_g, &x, &cond, None);
    let fake_detached = fake.detach();

    let disc_net = disc.net();
    let d_out_real = disc_net.forward_graph(&sess_d, &x);
    let d_out_fake = disc_net.forward_graph(&sess_d, &fake_detached);
    let labels = Array3::<usize>::zeros((1, 32, 32));
    let wr = advtrain::class_weights(&labels, 3);
    let real_term = tapegrad::ops::cross_entropy_map(&d_out_real, &labels, &wr.view());
    let fakes = Array3::<usize>::from_elem((1, 32, 32), 2);
    let wf = advtrain::class_weights(&fakes, 3);
    let fake_term = tapegrad::ops::cross_entropy_map(&d_out_fake, &fakes, &wf.view());
    let loss = tapegrad::ops::scale(&tapegrad::ops::add(&real_term, &fake_term), 0.5);

    let grads = tape.backward(&loss);
    let gen_grads = sess_g.grads(&grads);
    assert!(
        gen_grads.is_empty(),
        "generator received gradients from d_loss: {:?}",
        gen_grads.keys().collect::<Vec<_>>()
    );
    let disc_grads = sess_d.grads(&grads);
    assert!(!disc_grads.is_empty(), "discriminator got no gradients");
}

#[test]
fn zero_learning_rates_freeze_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_dataset(dir.path(), 3, 20);
    let mut run = desk_run(21);
    run.gan.lr_g = 0.0;
    run.gan.lr_d = 0.0;
    let mut state = TrainState::new(&run);
    let gen_before = state.gen.store.clone();
    let disc_before = state.disc.store.clone();
    let report = train_step(&mut state, &dataset, &run).unwrap();
    assert_eq!(
        report.update_order,
        [UpdateKind::Generator, UpdateKind::Discriminator]
    );
    assert!(report.real_is_time_t);
    // values unchanged (spectral u/v buffers advance; compare tensors)
    for (name, value) in gen_before.iter() {
        assert_eq!(state.gen.store.get(name), value, "generator {name} moved");
    }
    for (name, value) in disc_before.iter() {
        assert_eq!(state.disc.store.get(name), value, "discriminator {name} moved");
    }
}

#[test]
fn one_step_moves_both_networks() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_dataset(dir.path(), 3, 22);
    let run = desk_run(23);
    let mut state = TrainState::new(&run);
    let gen_before = state.gen.store.clone();
    let disc_before = state.disc.store.clone();
    let report = train_step(&mut state, &dataset, &run).unwrap();
    assert!(report.g_loss.is_finite() && report.d_loss.is_finite());
    let delta_g: f64 = gen_before
        .iter()
        .map(|(n, v)| (state.gen.store.get(n) - v).mapv(f64::abs).sum())
        .sum();
    let delta_d: f64 = disc_before
        .iter()
        .map(|(n, v)| (state.disc.store.get(n) - v).mapv(f64::abs).sum())
        .sum();
    assert!(delta_g > 0.0, "generator did not move");
    assert!(delta_d > 0.0, "discriminator did not move");
}

#[test]
fn seeded_runs_reproduce_loss_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_dataset(dir.path(), 3, 24);
    let run = desk_run(25);
    let losses = |run: &RunConfig| -> Vec<(f64, f64)> {
        let mut state = TrainState::new(run);
        (0..3)
            .map(|_| {
                let r = train_step(&mut state, &dataset, run).unwrap();
                (r.g_loss, r.d_loss)
            })
            .collect()
    };
    let a = losses(&run);
    let b = losses(&run);
    assert_eq!(a, b, "same seed must give identical trajectories");
}

#[test]
fn checkpoint_resume_matches_uninterrupted_run() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_dataset(dir.path(), 3, 26);
    let run = desk_run(27);

    let mut uninterrupted = TrainState::new(&run);
    let mut expected = Vec::new();
    for _ in 0..4 {
        let r = train_step(&mut uninterrupted, &dataset, &run).unwrap();
        expected.push((r.g_loss, r.d_loss));
    }

    let mut first = TrainState::new(&run);
    for _ in 0..2 {
        train_step(&mut first, &dataset, &run).unwrap();
    }
    let ckpt = dir.path().join("mid.ckpt");
    first.save(&ckpt).unwrap();
    let mut resumed = TrainState::load(&ckpt, Some(&first.config_hash()), false).unwrap();
    let mut tail = Vec::new();
    for _ in 0..2 {
        let r = train_step(&mut resumed, &dataset, &run).unwrap();
        tail.push((r.g_loss, r.d_loss));
    }
    assert_eq!(&expected[2..], &tail[..], "resume diverged from the run");
}

#[test]
fn batches_carry_only_time_t_data() {
    // the training batch type has no post-event image; this is the
    // compile-level half of the interface audit
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_dataset(dir.path(), 3, 28);
    let run = desk_run(29);
    let batch = assemble_batch(&dataset, &run, 0).unwrap();
    assert_eq!(batch.images_t.len(), run.gan.batch_size);
    assert_eq!(batch.masks_t.len(), run.gan.batch_size);
    for (img, mask) in batch.images_t.iter().zip(&batch.masks_t) {
        assert_eq!(img.shape(), (32, 32));
        assert_eq!(mask.shape(), (32, 32));
    }
}
