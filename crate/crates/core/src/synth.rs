//! Deterministic synthetic fixtures: a two-rectangle image pair, a
//! translated-rectangle sequence and a static sequence.
//!
//! Leaves are a background grid plus each rectangle split into an upper and
//! a lower part, so every rectangle needs one merge to become a single
//! region. The split row alternates between one and two thirds of the
//! height from frame to frame, so the split never lines up across frames.
//! Horizontal background borders are comb-shaped, which gives the background
//! most of the boundary length and lets object contours survive the coarsest
//! band. Colors carry small seeded noise.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, ScheduleConfig};
use crate::descriptors::{DescriptorConfig, FeatureVariances};
use crate::error::{Error, Result};
use crate::metrics::PixelSet;
use crate::pipeline::{Frame, PipelineConfig};
use crate::raster::{raw_label_csv, save_image, Image, LabelMap};

pub const WIDTH: usize = 64;
pub const HEIGHT: usize = 36;
const CELL: usize = 16;
const ROW: usize = 6;
const BACKGROUND: [u8; 3] = [112, 144, 112];
const NOISE: i32 = 4;
/// Tooth depth of the comb-shaped background borders.
const COMB: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub color: [u8; 3],
}

impl Rect {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    pub fn shifted(&self, dx: usize) -> Rect {
        Rect { x: self.x + dx, ..*self }
    }
}

/// Frames plus per-object ground-truth masks (`objects[k][frame]`).
#[derive(Debug, Clone)]
pub struct Sequence {
    pub name: &'static str,
    pub frames: Vec<Frame>,
    pub objects: Vec<Vec<PixelSet>>,
}

/// Descriptor settings for the fixtures: a matching window that covers the
/// per-frame displacement, a small per-pair offset and a loose shape term.
pub fn fixture_config() -> PipelineConfig {
    PipelineConfig {
        descriptors: DescriptorConfig {
            window: 6.0,
            mu: 0.05,
            variances: FeatureVariances {
                shape: 0.5,
                ..FeatureVariances::default()
            },
            ..DescriptorConfig::default()
        },
        ..PipelineConfig::default()
    }
}

fn jitter(rng: &mut ChaCha8Rng, c: [u8; 3]) -> [u8; 3] {
    c.map(|v| (v as i32 + rng.gen_range(-NOISE..=NOISE)).clamp(0, 255) as u8)
}

fn render(rects: &[Rect], frame: usize, rng: &mut ChaCha8Rng) -> Result<Frame> {
    let mut image = Image::filled(WIDTH, HEIGHT, BACKGROUND)?;
    let mut raw = Vec::with_capacity(WIDTH * HEIGHT);
    let cols = WIDTH.div_ceil(CELL);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            let hit = rects.iter().position(|r| r.contains(x, y));
            let (color, label) = match hit {
                Some(k) => {
                    let r = &rects[k];
                    let split = if frame % 2 == 0 { r.h / 3 } else { 2 * r.h / 3 };
                    let half = usize::from(y >= r.y + split);
                    (r.color, 1000 + 2 * k + half)
                }
                None => {
                    let col = x / CELL;
                    let row = ((y + (x % 2) * COMB) / ROW).min((HEIGHT - 1) / ROW);
                    (BACKGROUND, row * (cols + 1) + col)
                }
            };
            image.set_pixel(x, y, jitter(rng, color));
            raw.push(label as u32);
        }
    }
    let leaves = LabelMap::new(WIDTH, HEIGHT, raw)?;
    Frame::with_bpt(image, leaves)
}

fn masks(rect: &Rect) -> PixelSet {
    let mask = (0..WIDTH * HEIGHT)
        .map(|p| rect.contains(p % WIDTH, p / WIDTH))
        .collect();
    PixelSet::new(WIDTH, HEIGHT, mask).expect("grid-sized mask")
}

const RED: [u8; 3] = [208, 48, 48];
const BLUE: [u8; 3] = [48, 80, 208];

/// Two frames of a red and a blue rectangle; the second frame is shifted
/// right by two pixels.
pub fn two_rectangles(seed: u64) -> Result<Sequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Rect { x: 8, y: 7, w: 10, h: 23, color: RED };
    let b = Rect { x: 36, y: 7, w: 12, h: 23, color: BLUE };
    let mut frames = Vec::new();
    let mut objects = vec![Vec::new(), Vec::new()];
    for (f, dx) in [0, 2].into_iter().enumerate() {
        let rects = [a.shifted(dx), b.shifted(dx)];
        frames.push(render(&rects, f, &mut rng)?);
        objects[0].push(masks(&rects[0]));
        objects[1].push(masks(&rects[1]));
    }
    Ok(Sequence {
        name: "two-rectangles",
        frames,
        objects,
    })
}

/// A red rectangle moving right by `step` pixels per frame.
pub fn translated_rectangle(seed: u64, frames: usize, step: usize) -> Result<Sequence> {
    let start = Rect { x: 6, y: 7, w: 12, h: 23, color: RED };
    if start.x + start.w + step * frames.saturating_sub(1) > WIDTH {
        return Err(Error::invalid("rectangle leaves the frame"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut gt = Vec::new();
    for f in 0..frames {
        let r = start.shifted(f * step);
        out.push(render(&[r], f, &mut rng)?);
        gt.push(masks(&r));
    }
    Ok(Sequence {
        name: "translated-rectangle",
        frames: out,
        objects: vec![gt],
    })
}

/// `frames` copies of one frame.
pub fn static_sequence(seed: u64, frames: usize) -> Result<Sequence> {
    let r = Rect { x: 20, y: 7, w: 14, h: 23, color: BLUE };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frame = render(&[r], 0, &mut rng)?;
    Ok(Sequence {
        name: "static",
        frames: vec![frame; frames],
        objects: vec![vec![masks(&r); frames]],
    })
}

/// The fixture set written by the command-line `synth` command.
pub fn fixture_set(seed: u64) -> Result<Vec<Sequence>> {
    Ok(vec![
        two_rectangles(seed)?,
        translated_rectangle(seed.wrapping_add(1), 6, 3)?,
        static_sequence(seed.wrapping_add(2), 4)?,
    ])
}

/// Object label map of one frame: 0 for background, `k + 1` for object `k`.
pub fn ground_truth_labels(seq: &Sequence, frame: usize) -> Vec<u32> {
    let mut labels = vec![0u32; WIDTH * HEIGHT];
    for (k, masks) in seq.objects.iter().enumerate() {
        for (p, &inside) in masks[frame].mask().iter().enumerate() {
            if inside {
                labels[p] = k as u32 + 1;
            }
        }
    }
    labels
}

/// Run configuration for a sequence written by [`write_sequence`], with
/// paths relative to the sequence directory.
pub fn sequence_config(seq: &Sequence, seed: u64) -> RunConfig {
    let names = |prefix: &str, ext: &str| -> Vec<PathBuf> {
        (0..seq.frames.len())
            .map(|f| PathBuf::from(format!("{prefix}_{f:03}.{ext}")))
            .collect()
    };
    RunConfig {
        frames: names("frame", "png"),
        leaves: names("leaves", "csv"),
        hierarchies: names("hierarchy", "json"),
        ground_truth: names("gt", "csv"),
        schedule: ScheduleConfig {
            levels: 10,
            ..ScheduleConfig::default()
        },
        pipeline: fixture_config(),
        seed,
        ..RunConfig::default()
    }
}

/// Writes `frame_NNN.png`, `leaves_NNN.csv`, `hierarchy_NNN.json`,
/// `gt_NNN.csv` and `config.json` into `dir`.
pub fn write_sequence(seq: &Sequence, seed: u64, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: String, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    for (f, frame) in seq.frames.iter().enumerate() {
        save_image(&frame.image, dir.join(format!("frame_{f:03}.png")))?;
        write(format!("leaves_{f:03}.csv"), raw_label_csv(WIDTH, frame.leaves.labels()))?;
        frame.hierarchy.save(dir.join(format!("hierarchy_{f:03}.json")))?;
        write(format!("gt_{f:03}.csv"), raw_label_csv(WIDTH, &ground_truth_labels(seq, f)))?;
    }
    write("config.json".into(), sequence_config(seq, seed).to_json())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_are_deterministic() {
        let a = two_rectangles(7).unwrap();
        let b = two_rectangles(7).unwrap();
        for (x, y) in a.frames.iter().zip(&b.frames) {
            assert_eq!(x.image, y.image);
            assert_eq!(x.leaves, y.leaves);
        }
    }

    #[test]
    fn leaf_counts() {
        let s = two_rectangles(1).unwrap();
        for f in &s.frames {
            let n = f.leaves.region_count();
            assert!((20..=32).contains(&n), "{n} leaves");
        }
    }
}
