//! Forward-only video co-clustering of a translated rectangle.
//!
//! Usage: `video_sequence [OUT_DIR]`; with a directory the solution bundle
//! is written there.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Instant;

use hcocluster::bundle::write_bundle;
use hcocluster::metrics::{majority_label, sequence_consistency};
use hcocluster::pipeline::{video_segment, Schedule};
use hcocluster::synth::{fixture_config, translated_rectangle};

fn main() -> hcocluster::Result<()> {
    let seq = translated_rectangle(11, 6, 3)?;
    let schedule = Schedule::linear(10, 0.40, 0.10, 0.1)?;
    let start = Instant::now();
    let bundle = video_segment(&seq.frames, &schedule, &fixture_config())?;
    println!("{} frames, {} levels in {:.2?}", bundle.frame_count(), schedule.len(), start.elapsed());

    let gt = &seq.objects[0];
    for (r, level) in schedule.levels().iter().enumerate() {
        let Some(frames) = (0..bundle.frame_count())
            .map(|f| bundle.pixel_labels(f, r).map(|l| (seq.frames[f].leaves.width(), seq.frames[f].leaves.height(), l)))
            .collect::<Option<Vec<_>>>()
        else {
            println!("t = {:.3}: infeasible", level.t);
            continue;
        };
        let ids: Vec<u32> = frames.iter().zip(gt).filter_map(|((_, _, l), g)| majority_label(l, g)).collect();
        let object: BTreeSet<u32> = ids.iter().copied().collect();
        let score = sequence_consistency(&frames, gt, &object)?;
        println!("t = {:.3}: object ids per frame {ids:?}, sequence consistency {score:.4}", level.t);
    }

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        write_bundle(&bundle, &dir)?;
        println!("bundle written to {}", dir.display());
    }
    Ok(())
}
