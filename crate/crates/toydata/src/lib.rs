//! Procedural shapes data. Scenes are textured backgrounds with rectangular
//! "building" footprints; renders vary in illumination and sensor noise, so
//! two renders of related scenes are never pixel-identical. Everything is a
//! deterministic function of the seed.
//!
//! Two products:
//! - a single-temporal source dataset (image + mask pairs with a manifest),
//!   the input to generator training;
//! - a bitemporal benchmark with its own scene-level change process and
//!   ground-truth change labels, standing in for a real downstream dataset.

use std::path::{Path, PathBuf};

use changecore::manifest::{write_jsonl, BitemporalRecord, SingleTemporalRecord};
use changecore::rng::{derive_rng, stream};
use changecore::sample::{CHANGE_CREATE, CHANGE_NONE, CHANGE_REMOVE};
use changecore::{CoreError, ImageArray, Result, SemanticMask};
use ndarray::{Array2, Array3};
use rand::Rng;

/// One rectangular building footprint with a rendering style.
#[derive(Debug, Clone)]
struct Shape {
    r0: usize,
    c0: usize,
    h: usize,
    w: usize,
    /// roof base color in [0,1] rgb
    color: [f64; 3],
}

#[derive(Debug, Clone)]
struct Scene {
    size: usize,
    shapes: Vec<Shape>,
    /// low-frequency background phases
    phases: [f64; 4],
    base_color: [f64; 3],
}

fn sample_shape(size: usize, rng: &mut impl Rng) -> Shape {
    let h = rng.random_range(size / 10..size / 3);
    let w = rng.random_range(size / 10..size / 3);
    let r0 = rng.random_range(0..size - h);
    let c0 = rng.random_range(0..size - w);
    let tone: f64 = rng.random_range(0.45..0.95);
    let tint: f64 = rng.random_range(-0.12..0.12);
    Shape {
        r0,
        c0,
        h,
        w,
        color: [
            (tone + tint).clamp(0.05, 1.0),
            tone.clamp(0.05, 1.0),
            (tone - tint).clamp(0.05, 1.0),
        ],
    }
}

fn sample_scene(size: usize, rng: &mut impl Rng) -> Scene {
    let count = rng.random_range(3..9);
    let mut shapes: Vec<Shape> = Vec::new();
    for _ in 0..count {
        // a few placement attempts to limit overlap
        for _ in 0..8 {
            let s = sample_shape(size, rng);
            let clear = shapes.iter().all(|o| {
                s.r0 + s.h <= o.r0 || o.r0 + o.h <= s.r0 || s.c0 + s.w <= o.c0 || o.c0 + o.w <= s.c0
            });
            if clear {
                shapes.push(s);
                break;
            }
        }
    }
    let g = rng.random_range(0.25..0.5);
    Scene {
        size,
        shapes,
        phases: [
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.0..std::f64::consts::TAU),
            rng.random_range(0.02..0.08),
        ],
        base_color: [g * 0.9, g, g * 0.75],
    }
}

impl Scene {
    fn mask(&self) -> SemanticMask {
        let mut labels = Array2::<u8>::zeros((self.size, self.size));
        for s in &self.shapes {
            for r in s.r0..s.r0 + s.h {
                for c in s.c0..s.c0 + s.w {
                    labels[(r, c)] = 1;
                }
            }
        }
        SemanticMask::new(labels, 2).expect("toy mask")
    }

    /// Renders with a per-render illumination factor and sensor noise.
    fn render(&self, rng: &mut impl Rng) -> ImageArray {
        let illum = rng.random_range(0.85..1.15);
        let n = self.size;
        let freq = self.phases[3];
        let mut pixels = Array3::<f64>::zeros((n, n, 3));
        let labels = self.mask().into_labels();
        for r in 0..n {
            for c in 0..n {
                let texture = 0.12
                    * ((r as f64 * freq + self.phases[0]).sin()
                        + (c as f64 * freq * 1.3 + self.phases[1]).sin()
                        + ((r + c) as f64 * freq * 0.7 + self.phases[2]).sin())
                    / 3.0;
                let mut base = self.base_color;
                if labels[(r, c)] != 0 {
                    let s = self
                        .shapes
                        .iter()
                        .find(|s| r >= s.r0 && r < s.r0 + s.h && c >= s.c0 && c < s.c0 + s.w)
                        .expect("pixel belongs to a shape");
                    base = s.color;
                    // darker rim to give footprints an edge
                    let on_rim = r == s.r0 || r + 1 == s.r0 + s.h || c == s.c0 || c + 1 == s.c0 + s.w;
                    if on_rim {
                        base = [base[0] * 0.55, base[1] * 0.55, base[2] * 0.55];
                    }
                }
                for ch in 0..3 {
                    let noise = rng.random_range(-0.03..0.03);
                    let v = ((base[ch] + texture) * illum + noise).clamp(0.0, 1.0);
                    pixels[(r, c, ch)] = v * 2.0 - 1.0;
                }
            }
        }
        ImageArray::new(pixels).expect("toy image in range")
    }
}

/// Generates `count` single-temporal image/mask pairs of `size`^2 under
/// `out/`, returning the manifest path.
pub fn generate_source_dataset(out: &Path, count: usize, size: usize, seed: u64) -> Result<PathBuf> {
    std::fs::create_dir_all(out).map_err(|e| CoreError::io("creating toy dataset dir", e))?;
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = derive_rng(seed, &[stream::TOY, 1, i as u64]);
        let scene = sample_scene(size, &mut rng);
        let image = scene.render(&mut rng);
        let mask = scene.mask();
        let image_rel = format!("images/{i:05}.png");
        let mask_rel = format!("masks/{i:05}.png");
        std::fs::create_dir_all(out.join("images"))
            .and_then(|()| std::fs::create_dir_all(out.join("masks")))
            .map_err(|e| CoreError::io("creating toy dataset dirs", e))?;
        image.save_png(&out.join(&image_rel))?;
        mask.save_png(&out.join(&mask_rel))?;
        records.push(SingleTemporalRecord {
            id: format!("toy{i:05}"),
            image: image_rel,
            mask: mask_rel,
        });
    }
    let manifest = out.join("manifest.jsonl");
    write_jsonl(&manifest, &records)?;
    Ok(manifest)
}

/// The benchmark's own change process: remove some shapes, add some new ones,
/// re-render both times with independent illumination/noise.
fn evolve(scene: &Scene, rng: &mut impl Rng) -> Scene {
    let mut next = scene.clone();
    next.shapes.retain(|_| rng.random_bool(0.65));
    let additions = rng.random_range(1..4);
    for _ in 0..additions {
        for _ in 0..8 {
            let s = sample_shape(scene.size, rng);
            let clear = next.shapes.iter().all(|o| {
                s.r0 + s.h <= o.r0 || o.r0 + o.h <= s.r0 || s.c0 + s.w <= o.c0 || o.c0 + o.w <= s.c0
            });
            if clear {
                next.shapes.push(s);
                break;
            }
        }
    }
    next
}

fn change_between(a: &SemanticMask, b: &SemanticMask) -> Array2<u8> {
    Array2::from_shape_fn(a.shape(), |(r, c)| {
        let va = a.labels()[(r, c)];
        let vb = b.labels()[(r, c)];
        if va == vb {
            CHANGE_NONE
        } else if vb != 0 {
            CHANGE_CREATE
        } else {
            CHANGE_REMOVE
        }
    })
}

/// Generates a bitemporal benchmark of `count` pairs under `out/`, returning
/// the manifest path. Every pair carries ground-truth semantic masks and a
/// change label derived from the scene graphs.
pub fn generate_benchmark(out: &Path, count: usize, size: usize, seed: u64) -> Result<PathBuf> {
    for sub in ["t0", "t1", "masks_t0", "masks_t1", "change"] {
        std::fs::create_dir_all(out.join(sub))
            .map_err(|e| CoreError::io("creating benchmark dirs", e))?;
    }
    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = derive_rng(seed, &[stream::TOY, 2, i as u64]);
        let scene_t = sample_scene(size, &mut rng);
        let scene_t1 = evolve(&scene_t, &mut rng);
        let image_t = scene_t.render(&mut rng);
        let image_t1 = scene_t1.render(&mut rng);
        let mask_t = scene_t.mask();
        let mask_t1 = scene_t1.mask();
        let change = change_between(&mask_t, &mask_t1);

        let id = format!("bench{i:05}");
        let rec = BitemporalRecord {
            id: id.clone(),
            t0_image: format!("t0/{id}.png"),
            t0_mask: format!("masks_t0/{id}.png"),
            t1_image: format!("t1/{id}.png"),
            t1_mask: format!("masks_t1/{id}.png"),
            change: format!("change/{id}.png"),
            events: None,
        };
        image_t.save_png(&out.join(&rec.t0_image))?;
        image_t1.save_png(&out.join(&rec.t1_image))?;
        mask_t.save_png(&out.join(&rec.t0_mask))?;
        mask_t1.save_png(&out.join(&rec.t1_mask))?;
        SemanticMask::new(change, 3)?.save_png(&out.join(&rec.change))?;
        records.push(rec);
    }
    let manifest = out.join("manifest.jsonl");
    write_jsonl(&manifest, &records)?;
    Ok(manifest)
}
