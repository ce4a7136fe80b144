//! Draws boundary overlays and color fills of a solved level.
//!
//! Usage: `render [OUT_DIR]` (default `render_out`).

use std::path::PathBuf;

use hcocluster::pipeline::{multiresolution, Schedule, SolutionBundle};
use hcocluster::raster::save_image;
use hcocluster::render::{boundary_overlay, color_fill};
use hcocluster::synth::{fixture_config, two_rectangles};

fn main() -> hcocluster::Result<()> {
    let out = std::env::args().nth(1).map_or_else(|| PathBuf::from("render_out"), PathBuf::from);
    std::fs::create_dir_all(&out).map_err(|e| hcocluster::Error::Io { path: out.clone(), source: e })?;
    let seq = two_rectangles(7)?;
    let schedule = Schedule::linear(2, 0.40, 0.30, 0.1)?;
    let levels = multiresolution(&seq.frames, &schedule, &fixture_config())?;
    let bundle = SolutionBundle::from_levels(&seq.frames, &schedule, &levels);
    for (f, frame) in seq.frames.iter().enumerate() {
        for r in 0..schedule.len() {
            let Some(labels) = bundle.pixel_labels(f, r) else { continue };
            save_image(&boundary_overlay(&frame.image, &labels)?, out.join(format!("f{f}_r{r}_overlay.png")))?;
            save_image(
                &color_fill(frame.image.width(), frame.image.height(), &labels)?,
                out.join(format!("f{f}_r{r}_fill.png")),
            )?;
        }
    }
    println!("images written to {}", out.display());
    Ok(())
}
