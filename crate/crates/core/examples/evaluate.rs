//! Scores a multiresolution run of the two-rectangle pair: per-object
//! consistency curves and boundary precision/recall per level.

use hcocluster::metrics::{boundary_pixels, boundary_pr, consistency_curve_labels, DEFAULT_BOUNDARY_TOLERANCE};
use hcocluster::pipeline::{multiresolution, Schedule, SolutionBundle};
use hcocluster::synth::{fixture_config, ground_truth_labels, two_rectangles, HEIGHT, WIDTH};

fn main() -> hcocluster::Result<()> {
    let seq = two_rectangles(7)?;
    let schedule = Schedule::linear(5, 0.40, 0.10, 0.1)?;
    let levels = multiresolution(&seq.frames, &schedule, &fixture_config())?;
    let bundle = SolutionBundle::from_levels(&seq.frames, &schedule, &levels);

    for (r, level) in schedule.levels().iter().enumerate() {
        println!("t = {:.3}", level.t);
        for f in 0..bundle.frame_count() {
            let Some(labels) = bundle.pixel_labels(f, r) else {
                println!("  frame {f}: infeasible");
                continue;
            };
            let truth = boundary_pixels(WIDTH, HEIGHT, &ground_truth_labels(&seq, f))?;
            let pr = boundary_pr(&boundary_pixels(WIDTH, HEIGHT, &labels)?, &truth, DEFAULT_BOUNDARY_TOLERANCE)?;
            let curves: Vec<String> = seq
                .objects
                .iter()
                .map(|o| consistency_curve_labels(WIDTH, HEIGHT, &labels, &o[f]).map(|c| format!("{:?}", c.points)))
                .collect::<hcocluster::Result<_>>()?;
            println!(
                "  frame {f}: precision {:.3} recall {:.3}, object curves {}",
                pr.precision,
                pr.recall,
                curves.join(" ")
            );
        }
    }
    Ok(())
}
