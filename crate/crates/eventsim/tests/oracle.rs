//! Randomized oracle suite: area conservation, no-overlap, replay
//! determinism, and change-label consistency over random masks.

use changecore::rng::{derive_rng, stream};
use changecore::sample::CHANGE_NONE;
use changecore::{ChangeEvent, EventConfig, SemanticMask};
use eventsim::{derive_change_label, extract_instances, replay_events, simulate_event};
use ndarray::Array2;
use rand::Rng;

/// Random mask made of axis-aligned rectangles (possibly overlapping, so
/// components have irregular shapes).
fn random_mask(h: usize, w: usize, class_count: u16, rng: &mut impl Rng) -> SemanticMask {
    let mut labels = Array2::<u8>::zeros((h, w));
    let count = rng.random_range(0..6);
    for _ in 0..count {
        let rh = rng.random_range(1..=(h / 3).max(1));
        let rw = rng.random_range(1..=(w / 3).max(1));
        let r0 = rng.random_range(0..=(h - rh));
        let c0 = rng.random_range(0..=(w - rw));
        let label = rng.random_range(1..class_count) as u8;
        for r in r0..r0 + rh {
            for c in c0..c0 + rw {
                labels[(r, c)] = label;
            }
        }
    }
    SemanticMask::new(labels, class_count).unwrap()
}

fn assert_invariants(mask: &SemanticMask, next: &SemanticMask, events: &[ChangeEvent]) {
    // conservation: removed areas decrease foreground, created areas increase
    let removed: usize = events
        .iter()
        .filter(|e| matches!(e, ChangeEvent::Remove { .. }))
        .map(|e| e.area())
        .sum();
    let created: usize = events
        .iter()
        .filter(|e| matches!(e, ChangeEvent::Create { .. }))
        .map(|e| e.area())
        .sum();
    assert_eq!(
        next.foreground_area() as i64,
        mask.foreground_area() as i64 - removed as i64 + created as i64,
        "area conservation violated"
    );

    // no-overlap: created pixels were background at paste time and are
    // disjoint across creates
    let mut seen = std::collections::HashSet::new();
    for ev in events {
        if let ChangeEvent::Create { pixels, .. } = ev {
            for &(r, c) in pixels {
                assert!(seen.insert((r, c)), "created footprints overlap");
            }
        }
    }
    let removed_px: std::collections::HashSet<(u32, u32)> = events
        .iter()
        .filter_map(|e| match e {
            ChangeEvent::Remove { pixels, .. } => Some(pixels.iter().copied()),
            _ => None,
        })
        .flatten()
        .collect();
    for &(r, c) in &seen {
        let was_fg = mask.labels()[(r as usize, c as usize)] != 0;
        let was_removed = removed_px.contains(&(r, c));
        assert!(
            !was_fg || was_removed,
            "paste overlapped live foreground at ({r}, {c})"
        );
    }

    // replay determinism
    let replayed = replay_events(mask, events).unwrap();
    assert_eq!(&replayed, next, "replay failed to reproduce the mask");

    // change-label consistency
    let change = derive_change_label(mask, next, events).unwrap();
    for ((r, c), &ch) in change.indexed_iter() {
        let differs = mask.labels()[(r, c)] != next.labels()[(r, c)];
        assert_eq!(ch != CHANGE_NONE, differs, "binary change mismatch");
    }
}

#[test]
fn randomized_event_invariants() {
    let cfg = EventConfig::default();
    for trial in 0..200u64 {
        let mut rng = derive_rng(0xE0, &[stream::EVENT, trial]);
        let mask = random_mask(24, 24, 3, &mut rng);
        let (next, log) = simulate_event(&mask, &cfg, &mut rng).unwrap();
        assert_invariants(&mask, &next, &log.events);
    }
}

#[test]
fn randomized_chain_replays_step_by_step() {
    let cfg = EventConfig::default();
    for trial in 0..40u64 {
        let mut rng = derive_rng(0xE1, &[stream::EVENT, trial]);
        let mask = random_mask(20, 20, 2, &mut rng);
        let chain = eventsim::simulate_chain(&mask, 3, &cfg, &mut rng).unwrap();
        let mut prev = mask.clone();
        for (m, log) in &chain {
            let replayed = replay_events(&prev, &log.events).unwrap();
            assert_eq!(&replayed, m);
            prev = m.clone();
        }
    }
}

#[test]
fn extraction_partitions_foreground() {
    for trial in 0..50u64 {
        let mut rng = derive_rng(0xE2, &[stream::EVENT, trial]);
        let mask = random_mask(16, 16, 4, &mut rng);
        let instances = extract_instances(&mask);
        let mut covered = Array2::<u8>::zeros(mask.shape());
        for inst in &instances {
            assert!(inst.area >= 1);
            for &(r, c) in &inst.pixels {
                assert_eq!(covered[(r as usize, c as usize)], 0, "pixel claimed twice");
                covered[(r as usize, c as usize)] = 1;
                assert_eq!(mask.labels()[(r as usize, c as usize)], inst.label);
            }
        }
        let covered_count = covered.iter().filter(|&&v| v != 0).count();
        assert_eq!(covered_count, mask.foreground_area());
    }
}

#[test]
fn mixed_events_can_contain_both_kinds() {
    let cfg = EventConfig {
        p_create: 1.0,
        p_remove: 1.0,
        allow_mixed: true,
        ..EventConfig::default()
    };
    let mut found_both = false;
    for trial in 0..20u64 {
        let mut rng = derive_rng(0xE3, &[stream::EVENT, trial]);
        let mask = random_mask(24, 24, 2, &mut rng);
        if mask.foreground_area() == 0 {
            continue;
        }
        let (next, log) = simulate_event(&mask, &cfg, &mut rng).unwrap();
        assert_invariants(&mask, &next, &log.events);
        let has_remove = log
            .events
            .iter()
            .any(|e| matches!(e, ChangeEvent::Remove { .. }));
        let has_create = log
            .events
            .iter()
            .any(|e| matches!(e, ChangeEvent::Create { .. }));
        if has_remove && has_create {
            found_both = true;
        }
    }
    assert!(found_both, "mixed events never fired both kinds in 20 trials");
}
