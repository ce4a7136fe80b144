//! Evaluation: Jaccard consistency, greedy consistency/efficiency curves,
//! sequence consistency and tolerance-based boundary precision/recall.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::raster::LabelMap;

/// A set of pixels on a fixed grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelSet {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl PixelSet {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != width * height {
            return Err(Error::Dimension(format!(
                "mask has {} entries for {width}x{height}",
                mask.len()
            )));
        }
        Ok(Self { width, height, mask })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    /// Pixels whose label is in `selected`.
    pub fn from_labels(width: usize, height: usize, labels: &[u32], selected: &BTreeSet<u32>) -> Result<Self> {
        Self::new(width, height, labels.iter().map(|l| selected.contains(l)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    fn check_grid(&self, other: &PixelSet) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

/// Jaccard index with a flag set when both sets are empty (value 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jaccard {
    pub value: f64,
    pub both_empty: bool,
}

pub fn jaccard_flagged(a: &PixelSet, b: &PixelSet) -> Result<Jaccard> {
    a.check_grid(b)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in a.mask.iter().zip(&b.mask) {
        inter += usize::from(x && y);
        union += usize::from(x || y);
    }
    Ok(if union == 0 {
        Jaccard {
            value: 1.0,
            both_empty: true,
        }
    } else {
        Jaccard {
            value: inter as f64 / union as f64,
            both_empty: false,
        }
    })
}

pub fn jaccard(a: &PixelSet, b: &PixelSet) -> Result<f64> {
    jaccard_flagged(a, b).map(|j| j.value)
}

/// `(efficiency, consistency)` points: region count and Jaccard value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConsistencyCurve {
    pub points: Vec<(usize, f64)>,
}

impl ConsistencyCurve {
    /// Consistency at the given efficiency, holding the last value.
    pub fn value_at(&self, efficiency: usize) -> f64 {
        self.points
            .iter()
            .take_while(|p| p.0 <= efficiency)
            .last()
            .map_or(0.0, |p| p.1)
    }

    pub fn max_consistency(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.1)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("efficiency,consistency\n");
        for (e, c) in &self.points {
            let _ = writeln!(out, "{e},{c}");
        }
        out
    }

    /// Pointwise maximum over several curves (one per resolution level).
    pub fn upper_envelope(curves: &[ConsistencyCurve]) -> ConsistencyCurve {
        let mut best: BTreeMap<usize, f64> = BTreeMap::new();
        for c in curves {
            for &(e, v) in &c.points {
                let slot = best.entry(e).or_insert(v);
                *slot = slot.max(v);
            }
        }
        let mut points = Vec::new();
        let mut running = f64::NEG_INFINITY;
        for (e, v) in best {
            running = running.max(v);
            points.push((e, running));
        }
        ConsistencyCurve { points }
    }
}

/// Greedy selection over groups of pixels: each step adds the group whose
/// addition gives the largest Jaccard value, stopping when nothing improves.
/// `areas[g]` is the group size and `hits[g]` its overlap with the target.
fn greedy_curve(areas: &[usize], hits: &[usize], target: usize) -> (Vec<(usize, f64)>, Vec<usize>) {
    let mut used = vec![false; areas.len()];
    let (mut inter, mut union) = (0usize, target);
    let mut current = 0.0;
    let mut points = Vec::new();
    let mut picked = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for g in 0..areas.len() {
            if used[g] || areas[g] == 0 {
                continue;
            }
            let i = inter + hits[g];
            let u = union + areas[g] - hits[g];
            let j = if u == 0 { 0.0 } else { i as f64 / u as f64 };
            if best.is_none_or(|(_, b)| j > b) {
                best = Some((g, j));
            }
        }
        match best {
            Some((g, j)) if j > current => {
                used[g] = true;
                inter += hits[g];
                union += areas[g] - hits[g];
                current = j;
                picked.push(g);
                points.push((picked.len(), j));
            }
            _ => break,
        }
    }
    (points, picked)
}

/// Greedy consistency curve of raw per-pixel labels against `gt`.
pub fn consistency_curve_labels(
    width: usize,
    height: usize,
    labels: &[u32],
    gt: &PixelSet,
) -> Result<ConsistencyCurve> {
    if labels.len() != width * height || gt.width != width || gt.height != height {
        return Err(Error::Dimension("partition and ground truth grids differ".into()));
    }
    let ids: BTreeSet<u32> = labels.iter().copied().collect();
    let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(k, &l)| (l, k)).collect();
    let mut areas = vec![0; ids.len()];
    let mut hits = vec![0; ids.len()];
    for (p, l) in labels.iter().enumerate() {
        let g = index[l];
        areas[g] += 1;
        hits[g] += usize::from(gt.mask[p]);
    }
    Ok(ConsistencyCurve {
        points: greedy_curve(&areas, &hits, gt.len()).0,
    })
}

pub fn consistency_curve(partition: &LabelMap, gt: &PixelSet) -> Result<ConsistencyCurve> {
    consistency_curve_labels(partition.width(), partition.height(), partition.labels(), gt)
}

/// Most frequent label inside `mask`; ties go to the smaller label.
pub fn majority_label(labels: &[u32], mask: &PixelSet) -> Option<u32> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for (l, _) in labels.iter().zip(&mask.mask).filter(|(_, &m)| m) {
        *counts.entry(*l).or_default() += 1;
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(l, _)| l)
}

/// Distinct labels inside `mask`.
pub fn labels_within(labels: &[u32], mask: &PixelSet) -> BTreeSet<u32> {
    labels
        .iter()
        .zip(&mask.mask)
        .filter(|(_, &m)| m)
        .map(|(&l, _)| l)
        .collect()
}

/// Mean over frames of the Jaccard index between the pixels carrying any of
/// `labels` and that frame's ground truth. An empty label set scores 0.
pub fn sequence_consistency(
    frames: &[(usize, usize, Vec<u32>)],
    gt: &[PixelSet],
    labels: &BTreeSet<u32>,
) -> Result<f64> {
    if frames.len() != gt.len() {
        return Err(Error::Dimension(format!(
            "{} labelings for {} ground-truth frames",
            frames.len(),
            gt.len()
        )));
    }
    if labels.is_empty() || frames.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ((w, h, l), g) in frames.iter().zip(gt) {
        let selected = PixelSet::from_labels(*w, *h, l, labels)?;
        total += jaccard(&selected, g)?;
    }
    Ok(total / frames.len() as f64)
}

/// Greedy curve over label-set sizes for a whole sequence; labels are
/// persistent across frames, so one label selects pixels in every frame.
pub fn sequence_curve(frames: &[(usize, usize, Vec<u32>)], gt: &[PixelSet]) -> Result<ConsistencyCurve> {
    if frames.len() != gt.len() {
        return Err(Error::Dimension("frame count mismatch".into()));
    }
    let all: BTreeSet<u32> = frames.iter().flat_map(|f| f.2.iter().copied()).collect();
    let mut chosen: BTreeSet<u32> = BTreeSet::new();
    let mut current = 0.0;
    let mut points = Vec::new();
    loop {
        let mut best: Option<(u32, f64)> = None;
        for &l in all.difference(&chosen) {
            let mut trial = chosen.clone();
            trial.insert(l);
            let v = sequence_consistency(frames, gt, &trial)?;
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((l, v));
            }
        }
        match best {
            Some((l, v)) if v > current => {
                chosen.insert(l);
                current = v;
                points.push((chosen.len(), v));
            }
            _ => break,
        }
    }
    Ok(ConsistencyCurve { points })
}

/// Pixels with at least one 4-neighbor carrying a different label.
pub fn boundary_pixels(width: usize, height: usize, labels: &[u32]) -> Result<PixelSet> {
    if labels.len() != width * height {
        return Err(Error::Dimension("label count does not match grid".into()));
    }
    let mut mask = vec![false; labels.len()];
    for y in 0..height {
        for x in 0..width {
            let p = y * width + x;
            let l = labels[p];
            mask[p] = (x > 0 && labels[p - 1] != l)
                || (x + 1 < width && labels[p + 1] != l)
                || (y > 0 && labels[p - width] != l)
                || (y + 1 < height && labels[p + width] != l);
        }
    }
    PixelSet::new(width, height, mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPr {
    pub precision: f64,
    pub recall: f64,
    /// Precision defaulted to 1 because the prediction was empty.
    pub empty_prediction: bool,
    /// Recall defaulted to 1 because the ground truth was empty.
    pub empty_truth: bool,
}

/// Fraction of `from` pixels within Euclidean distance `tol` of `to`.
fn matched_fraction(from: &PixelSet, to: &PixelSet, tol: f64) -> Option<f64> {
    let total = from.len();
    if total == 0 {
        return None;
    }
    let r = tol.floor() as i64;
    let tol2 = tol * tol;
    let mut hit = 0;
    for y in 0..from.height as i64 {
        for x in 0..from.width as i64 {
            if !from.contains(x as usize, y as usize) {
                continue;
            }
            let found = (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (qx, qy) = (x + dx, y + dy);
                    qx >= 0
                        && qy >= 0
                        && (qx as usize) < to.width
                        && (qy as usize) < to.height
                        && ((dx * dx + dy * dy) as f64) <= tol2
                        && to.contains(qx as usize, qy as usize)
                })
            });
            hit += usize::from(found);
        }
    }
    Some(hit as f64 / total as f64)
}

pub fn boundary_pr(predicted: &PixelSet, truth: &PixelSet, tol: f64) -> Result<BoundaryPr> {
    predicted.check_grid(truth)?;
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be non-negative, got {tol}")));
    }
    let precision = matched_fraction(predicted, truth, tol);
    let recall = matched_fraction(truth, predicted, tol);
    Ok(BoundaryPr {
        precision: precision.unwrap_or(1.0),
        recall: recall.unwrap_or(1.0),
        empty_prediction: precision.is_none(),
        empty_truth: recall.is_none(),
    })
}

pub const DEFAULT_BOUNDARY_TOLERANCE: f64 = 2.0;

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: usize, h: usize, x0: usize, x1: usize) -> PixelSet {
        let mask = (0..w * h).map(|p| (x0..x1).contains(&(p % w))).collect();
        PixelSet::new(w, h, mask).unwrap()
    }

    #[test]
    fn jaccard_examples() {
        let a = square(20, 10, 0, 10);
        let b = square(20, 10, 5, 15);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &square(20, 10, 10, 20)).unwrap(), 0.0);
        assert!((jaccard(&a, &b).unwrap() - 50.0 / 150.0).abs() < 1e-12);
        let e = PixelSet::empty(2, 2);
        assert!(jaccard_flagged(&e, &e).unwrap().both_empty);
    }

    #[test]
    fn greedy_curve_on_quadrants() {
        // four equal columns; ground truth covers the first two
        let labels: Vec<u32> = (0..16).map(|p| (p % 4) as u32).collect();
        let gt = square(4, 4, 0, 2);
        let c = consistency_curve_labels(4, 4, &labels, &gt).unwrap();
        assert_eq!(c.points, vec![(1, 0.5), (2, 1.0)]);
        let one = square(4, 4, 0, 1);
        assert_eq!(consistency_curve_labels(4, 4, &labels, &one).unwrap().points, vec![(1, 1.0)]);
        let none = PixelSet::empty(4, 4);
        assert!(consistency_curve_labels(4, 4, &labels, &none).unwrap().points.is_empty());
    }

    #[test]
    fn half_present_label() {
        let gt = square(4, 1, 0, 2);
        let frames = vec![(4, 1, vec![7, 7, 1, 1]), (4, 1, vec![2, 2, 1, 1])];
        let v = sequence_consistency(&frames, &[gt.clone(), gt], &BTreeSet::from([7])).unwrap();
        assert_eq!(v, 0.5);
        assert_eq!(sequence_consistency(&frames[..1], &[square(4, 1, 0, 2)], &BTreeSet::new()).unwrap(), 0.0);
    }

    #[test]
    fn boundary_examples() {
        let a = square(10, 10, 4, 5);
        let shifted = square(10, 10, 5, 6);
        let pr = boundary_pr(&a, &shifted, 2.0).unwrap();
        assert_eq!((pr.precision, pr.recall), (1.0, 1.0));
        let pr0 = boundary_pr(&a, &shifted, 0.0).unwrap();
        assert!(pr0.precision < 1.0 && pr0.recall < 1.0);
        let pr = boundary_pr(&PixelSet::empty(10, 10), &a, 2.0).unwrap();
        assert!(pr.empty_prediction);
        assert_eq!((pr.precision, pr.recall), (1.0, 0.0));
    }
}
