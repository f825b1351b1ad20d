//! Dataset-production contracts: the count law, manifest completeness and
//! change-label consistency, resume idempotence, chain replay, and the
//! pad/crop round trip.

use changecore::manifest::BitemporalDataset;
use changecore::rng::{derive_rng, stream};
use changecore::{load_dataset, EventConfig, ModelConfig};
use datagen::{
    generate_dataset, pad_to_multiple, sample_scp, synthesize_large, ConditionMode, SynthMode,
};
use eventsim::replay_events;
use gennet::{GeneratorConfig, GeneratorParams};
use std::path::Path;

fn desk_generator(seed: u64) -> GeneratorParams {
    let cfg = GeneratorConfig::new(ModelConfig {
        width_scale: 0.125,
        ..ModelConfig::default()
    });
    let mut params = GeneratorParams::init(cfg, seed);
    // the pipeline only cares that the generator is marked trained
    params.iteration = 1;
    params
}

fn toy_source(dir: &Path, count: usize, seed: u64) -> changecore::SingleTemporalDataset {
    toydata::generate_source_dataset(dir, count, 32, seed).unwrap();
    load_dataset(dir, Path::new("manifest.jsonl"), None).unwrap()
}

#[test]
fn untrained_generator_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_source(dir.path(), 1, 1);
    let (img, mask) = dataset.get(0).unwrap();
    let mut params = desk_generator(1);
    params.iteration = 0;
    let mut rng = derive_rng(1, &[stream::SAMPLE]);
    let err = sample_scp(
        &img,
        &mask,
        &params,
        &EventConfig::default(),
        &mut rng,
        1,
        ConditionMode::GeneratedChain,
    )
    .unwrap_err();
    assert!(err.to_string().contains("untrained"));
}

#[test]
fn null_events_give_identity_transition() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_source(dir.path(), 1, 2);
    let (img, mask) = dataset.get(0).unwrap();
    let params = desk_generator(2);
    let cfg = EventConfig {
        p_create: 0.0,
        p_remove: 0.0,
        ..EventConfig::default()
    };
    let mut rng = derive_rng(2, &[stream::SAMPLE]);
    let samples = sample_scp(&img, &mask, &params, &cfg, &mut rng, 1, ConditionMode::GeneratedChain)
        .unwrap();
    assert_eq!(samples.len(), 1);
    assert_eq!(samples[0].mask_t1, samples[0].mask_t);
    assert!(samples[0].change.iter().all(|&v| v == 0));
}

#[test]
fn chains_replay_and_stay_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_source(dir.path(), 1, 3);
    let (img, mask) = dataset.get(0).unwrap();
    let params = desk_generator(3);
    let mut rng = derive_rng(3, &[stream::SAMPLE]);
    let samples = sample_scp(
        &img,
        &mask,
        &params,
        &EventConfig::default(),
        &mut rng,
        3,
        ConditionMode::GeneratedChain,
    )
    .unwrap();
    assert_eq!(samples.len(), 3);
    for s in &samples {
        let replayed = replay_events(&s.mask_t, &s.events).unwrap();
        assert_eq!(&replayed, &s.mask_t1, "event replay mismatch");
        assert!(s
            .image_t1
            .pixels()
            .iter()
            .all(|&v| (-1.0..=1.0).contains(&v)));
    }
    // chain continuity: step j's pre pair is step j-1's post pair
    for w in samples.windows(2) {
        assert_eq!(w[0].mask_t1, w[1].mask_t);
        assert_eq!(w[0].image_t1, w[1].image_t);
    }
}

#[test]
fn count_law_and_manifest_consistency() {
    let src_dir = tempfile::tempdir().unwrap();
    let dataset = toy_source(src_dir.path(), 4, 4);
    let params = desk_generator(4);
    for n in [1usize, 2] {
        let out = tempfile::tempdir().unwrap();
        let report = generate_dataset(
            &dataset,
            &params,
            &EventConfig::default(),
            n,
            out.path(),
            77,
            ConditionMode::GeneratedChain,
        )
        .unwrap();
        assert_eq!(report.written, dataset.len() * n);
        let loaded = BitemporalDataset::load(&report.manifest, 2).unwrap();
        assert_eq!(loaded.len(), dataset.len() * n);
        for i in 0..loaded.len() {
            let sample = loaded.get(i).unwrap();
            sample.validate().unwrap();
        }
    }
}

#[test]
fn rerun_on_complete_output_writes_nothing() {
    let src_dir = tempfile::tempdir().unwrap();
    let dataset = toy_source(src_dir.path(), 3, 5);
    let params = desk_generator(5);
    let out = tempfile::tempdir().unwrap();
    let first = generate_dataset(
        &dataset,
        &params,
        &EventConfig::default(),
        2,
        out.path(),
        88,
        ConditionMode::GeneratedChain,
    )
    .unwrap();
    assert_eq!(first.written, 6);
    let second = generate_dataset(
        &dataset,
        &params,
        &EventConfig::default(),
        2,
        out.path(),
        88,
        ConditionMode::GeneratedChain,
    )
    .unwrap();
    assert_eq!(second.written, 0);
    assert_eq!(second.skipped_existing, 6);
    let loaded = BitemporalDataset::load(&second.manifest, 2).unwrap();
    assert_eq!(loaded.len(), 6, "no duplicate ids after rerun");
}

#[test]
fn real_t0_conditioning_differs_from_chain() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = toy_source(dir.path(), 1, 6);
    let (img, mask) = dataset.get(0).unwrap();
    let params = desk_generator(6);
    let cfg = EventConfig::default();
    let mut rng1 = derive_rng(9, &[stream::SAMPLE]);
    let chain =
        sample_scp(&img, &mask, &params, &cfg, &mut rng1, 2, ConditionMode::GeneratedChain).unwrap();
    let mut rng2 = derive_rng(9, &[stream::SAMPLE]);
    let real = sample_scp(&img, &mask, &params, &cfg, &mut rng2, 2, ConditionMode::RealT0).unwrap();
    // step 0 is identical (same conditioning); step 1 differs in general
    assert_eq!(chain[0].image_t1, real[0].image_t1);
    assert_eq!(chain[1].mask_t1, real[1].mask_t1, "mask chain must agree");
    assert_ne!(chain[1].image_t1, real[1].image_t1);
}

#[test]
fn pad_crop_round_trip_preserves_size_and_content() {
    let dir = tempfile::tempdir().unwrap();
    toydata::generate_source_dataset(dir.path(), 1, 48, 7).unwrap();
    let dataset = load_dataset(dir.path(), Path::new("manifest.jsonl"), None).unwrap();
    let (img, mask) = dataset.get(0).unwrap();
    let (padded_img, padded_mask, orig) = pad_to_multiple(&img, &mask, 32).unwrap();
    assert_eq!(padded_img.shape(), (64, 64));
    assert_eq!(padded_mask.shape(), (64, 64));
    let back = datagen::crop_back(&padded_img, orig).unwrap();
    assert_eq!(back, img);
}

#[test]
fn whole_image_synthesis_handles_nondivisible_input() {
    let dir = tempfile::tempdir().unwrap();
    toydata::generate_source_dataset(dir.path(), 1, 48, 8).unwrap();
    let dataset = load_dataset(dir.path(), Path::new("manifest.jsonl"), None).unwrap();
    let (img, mask) = dataset.get(0).unwrap();
    let params = desk_generator(8);
    let mut rng = derive_rng(8, &[stream::NOISE]);
    let out = synthesize_large(&mask, &img, &mask, &params, &mut rng, SynthMode::Whole).unwrap();
    assert_eq!(out.shape(), (48, 48));
}

#[test]
fn tiled_path_produces_output_and_reports_diff() {
    let dir = tempfile::tempdir().unwrap();
    toydata::generate_source_dataset(dir.path(), 1, 64, 9).unwrap();
    let dataset = load_dataset(dir.path(), Path::new("manifest.jsonl"), None).unwrap();
    let (img, mask) = dataset.get(0).unwrap();
    let params = desk_generator(9);
    let diff = datagen::tiled_vs_whole_diff(&mask, &img, &mask, &params, 10, 32).unwrap();
    assert!(diff.is_finite());
    assert!(diff >= 0.0);
}
