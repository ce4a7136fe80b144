//! Joint multiresolution co-clustering of the two-rectangle image pair.

use std::time::Instant;

use hcocluster::pipeline::{multiresolution, prepare, LevelOutcome, Schedule};
use hcocluster::synth::{fixture_config, two_rectangles};

fn main() -> hcocluster::Result<()> {
    let seq = two_rectangles(7)?;
    let config = fixture_config();
    let refs: Vec<_> = seq.frames.iter().collect();
    let prepared = prepare(&refs, &config)?;
    println!(
        "leaves: {:?}, variables: {} ({} inter), constraints: {}",
        seq.frames.iter().map(|f| f.leaves.region_count()).collect::<Vec<_>>(),
        prepared.vars.len(),
        prepared.vars.inter_count(),
        prepared.base.len()
    );
    let schedule = Schedule::linear(10, 0.40, 0.10, 0.1)?;
    let start = Instant::now();
    let levels = multiresolution(&seq.frames, &schedule, &config)?;
    for outcome in &levels {
        match outcome {
            LevelOutcome::Solved(s) => {
                let clusters = s.clusters.iter().flatten().max().map_or(0, |m| m + 1);
                println!(
                    "t = {:.3}: {clusters} clusters, objective {:.4}, cycle cuts {}",
                    s.level.t, s.objective, s.cycle_cuts
                );
                for (f, c) in s.clusters.iter().enumerate() {
                    println!("  frame {f}: {c:?}");
                }
            }
            LevelOutcome::Infeasible { level, reason } => println!("t = {:.3}: infeasible ({reason})", level.t),
        }
    }
    println!("solved in {:.2?}", start.elapsed());
    Ok(())
}
