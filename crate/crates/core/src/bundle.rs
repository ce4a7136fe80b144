//! On-disk solution bundles.
//!
//! ```text
//! manifest.json
//! correspondence.csv            frame,leaf,cluster,level
//! frame_000/leaves.csv
//! frame_000/level_00.csv        cluster id per pixel
//! frame_000/level_00.png        same, 16-bit grayscale
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{Schedule, SolutionBundle};
use crate::raster::{label_csv, parse_label_csv, save_raw_labels};

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    frames: usize,
    schedule: Schedule,
    /// `null` for solved levels, otherwise the reason, per frame and level.
    infeasible: Vec<Vec<Option<String>>>,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn frame_dir(dir: &Path, frame: usize) -> std::path::PathBuf {
    dir.join(format!("frame_{frame:03}"))
}

pub fn write_bundle(bundle: &SolutionBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        frames: bundle.frame_count(),
        schedule: bundle.schedule.clone(),
        infeasible: bundle.notes.clone(),
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Internal(format!("manifest serialization: {e}")))?;
    write_file(&dir.join("manifest.json"), &(json + "\n"))?;

    let mut corr = String::from("frame,leaf,cluster,level\n");
    for (f, leaves) in bundle.leaves.iter().enumerate() {
        let fd = frame_dir(dir, f);
        fs::create_dir_all(&fd).map_err(|e| Error::io(&fd, e))?;
        write_file(&fd.join("leaves.csv"), &label_csv(leaves))?;
        for (r, clusters) in bundle.labels[f].iter().enumerate() {
            let Some(clusters) = clusters else { continue };
            for (leaf, c) in clusters.iter().enumerate() {
                let _ = writeln!(corr, "{f},{leaf},{c},{r}");
            }
            let pixels = bundle.pixel_labels(f, r).expect("solved level");
            let (w, h) = (leaves.width(), leaves.height());
            save_raw_labels(w, h, &pixels, fd.join(format!("level_{r:02}.csv")))?;
            save_raw_labels(w, h, &pixels, fd.join(format!("level_{r:02}.png")))?;
        }
    }
    write_file(&dir.join("correspondence.csv"), &corr)
}

pub fn read_bundle(dir: &Path) -> Result<SolutionBundle> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::format("manifest.json", e.to_string()))?;
    let mut leaves = Vec::with_capacity(manifest.frames);
    for f in 0..manifest.frames {
        let p = frame_dir(dir, f).join("leaves.csv");
        let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        leaves.push(parse_label_csv(&text)?);
    }
    let n_levels = manifest.schedule.len();
    let mut labels: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; n_levels]; leaves.len()];
    for (f, l) in leaves.iter().enumerate() {
        for r in 0..n_levels {
            if manifest.infeasible.get(f).and_then(|v| v.get(r)).is_some_and(|n| n.is_none()) {
                labels[f][r] = Some(vec![usize::MAX; l.region_count()]);
            }
        }
    }
    let path = dir.join("correspondence.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    for (line_no, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<usize> = line
            .split(',')
            .map(|v| v.trim().parse())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(format!("correspondence line {}", line_no + 1), line))?;
        let [f, leaf, c, r] = fields[..] else {
            return Err(Error::format(format!("correspondence line {}", line_no + 1), line));
        };
        let slot = labels
            .get_mut(f)
            .and_then(|v| v.get_mut(r))
            .and_then(|v| v.as_mut())
            .and_then(|v| v.get_mut(leaf))
            .ok_or_else(|| Error::format(format!("correspondence line {}", line_no + 1), "out of range"))?;
        *slot = c;
    }
    if labels.iter().flatten().flatten().flatten().any(|&c| c == usize::MAX) {
        return Err(Error::format("correspondence.csv", "missing leaf entries"));
    }
    Ok(SolutionBundle {
        schedule: manifest.schedule,
        leaves,
        labels,
        notes: manifest.infeasible,
    })
}
