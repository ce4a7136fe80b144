//! Builds a binary partition tree over an over-segmented image and saves it.
//!
//! Usage: `build_bpt [IMAGE] [OUT.json]`; without an image the first frame
//! of the two-rectangle fixture is used.

use hcocluster::hierarchy::build_bpt;
use hcocluster::raster::{load_image, LabelMap};
use hcocluster::synth::two_rectangles;

fn main() -> hcocluster::Result<()> {
    let mut args = std::env::args().skip(1);
    let (image, leaves) = match args.next() {
        Some(path) => {
            let image = load_image(&path)?;
            let leaves = LabelMap::over_segment(&image, 4, 16)?;
            (image, leaves)
        }
        None => {
            let frame = two_rectangles(7)?.frames.swap_remove(0);
            (frame.image, frame.leaves)
        }
    };
    let tree = build_bpt(&image, &leaves)?;
    println!("{} leaves, {} merges", tree.leaf_count(), tree.merges().len());
    for (step, m) in tree.merges().iter().enumerate().take(10) {
        println!("step {:>2}: {} + {} -> {}", step + 1, m.a, m.b, m.parent);
    }
    if let Some(out) = args.next() {
        tree.save(&out)?;
        println!("saved to {out}");
    }
    Ok(())
}
