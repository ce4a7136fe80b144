//! Region and contour-element descriptors and the objective coefficients
//! built from them.
//!
//! Intra coefficients compare whole-region color histograms of adjacent
//! leaves. Inter coefficients aggregate contour-element similarities between
//! two regions of different images, weighted by the phase difference of their
//! outward normals, minus a per-pair regularization offset.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::adjacency::{element_pairs_within, BoundaryVariableSet, ContourElement, NodeRef, VarKind};
use crate::error::{Error, Result};
use crate::raster::{Image, LabelMap};

pub const HIST_BINS: usize = 8;
pub const COLOR_DIM: usize = 3 * HIST_BINS;
pub const SHAPE_DIM: usize = 8;
pub const FEATURE_DIM: usize = COLOR_DIM + SHAPE_DIM + 2;

const NORMALIZATION_TOL: f64 = 1e-9;

/// `cos(k·π/4)` for `k` in `0..8`.
const PHASE_COS: [f64; 8] = [
    1.0,
    FRAC_1_SQRT_2,
    0.0,
    -FRAC_1_SQRT_2,
    -1.0,
    -FRAC_1_SQRT_2,
    0.0,
    FRAC_1_SQRT_2,
];

#[inline]
fn bin_of(v: u8) -> usize {
    v as usize * HIST_BINS / 256
}

/// Per-channel 8-bin RGB histogram with raw counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ColorHistogram {
    counts: [[u64; HIST_BINS]; 3],
    total: u64,
}

impl ColorHistogram {
    pub fn add(&mut self, rgb: [u8; 3]) {
        for (c, &v) in rgb.iter().enumerate() {
            self.counts[c][bin_of(v)] += 1;
        }
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn merged(&self, other: &ColorHistogram) -> ColorHistogram {
        let mut out = self.clone();
        for c in 0..3 {
            for k in 0..HIST_BINS {
                out.counts[c][k] += other.counts[c][k];
            }
        }
        out.total += other.total;
        out
    }

    /// Normalized histogram of one channel; all zeros when empty.
    pub fn channel(&self, c: usize) -> [f64; HIST_BINS] {
        let mut h = [0.0; HIST_BINS];
        if self.total > 0 {
            for (k, v) in h.iter_mut().enumerate() {
                *v = self.counts[c][k] as f64 / self.total as f64;
            }
        }
        h
    }

    /// Mean over the three channels of the per-channel Bhattacharyya
    /// coefficient.
    pub fn coefficient(&self, other: &ColorHistogram) -> f64 {
        let sum: f64 = (0..3)
            .map(|c| bc_sum(&self.channel(c), &other.channel(c)))
            .sum();
        (sum / 3.0).clamp(0.0, 1.0)
    }
}

fn bc_sum(h1: &[f64], h2: &[f64]) -> f64 {
    h1.iter().zip(h2).map(|(a, b)| (a * b).sqrt()).sum()
}

/// `Σ_k sqrt(h1_k · h2_k)` over two normalized histograms.
pub fn bhattacharyya_coefficient(h1: &[f64], h2: &[f64]) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::Dimension(format!(
            "histograms have {} and {} bins",
            h1.len(),
            h2.len()
        )));
    }
    for h in [h1, h2] {
        if h.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("histogram has a negative or non-finite bin"));
        }
        let s: f64 = h.iter().sum();
        if (s - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::invalid(format!("histogram sums to {s}, not 1")));
        }
    }
    Ok(bc_sum(h1, h2).clamp(0.0, 1.0))
}

pub fn region_histograms(image: &Image, leaves: &LabelMap) -> Vec<ColorHistogram> {
    let mut hist = vec![ColorHistogram::default(); leaves.region_count()];
    for y in 0..leaves.height() {
        for x in 0..leaves.width() {
            hist[leaves.get(x, y)].add(image.pixel(x, y));
        }
    }
    hist
}

/// `α · (1 − e^{1−bc})`; zero for identical regions, `α(1−e)` for disjoint
/// color supports.
pub fn intra_similarity(alpha: f64, bc: f64) -> f64 {
    alpha * (1.0 - (1.0 - bc).exp())
}

/// Smoothed-luminance gradient of an image.
#[derive(Debug, Clone)]
pub struct GradientField {
    width: usize,
    height: usize,
    smoothed: Vec<f64>,
    gx: Vec<f64>,
    gy: Vec<f64>,
}

pub const SMOOTHING_SIGMA: f64 = 1.0;

pub fn luminance(image: &Image) -> Vec<f64> {
    image
        .samples()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

#[inline]
fn clamp_index(v: i64, n: usize) -> usize {
    v.clamp(0, n as i64 - 1) as usize
}

impl GradientField {
    pub fn new(image: &Image) -> Self {
        let (w, h) = (image.width(), image.height());
        let gray = luminance(image);
        let kernel = gaussian_kernel(SMOOTHING_SIGMA);
        let r = (kernel.len() / 2) as i64;
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * gray[y * w + clamp_index(x as i64 + k as i64 - r, w)])
                    .sum();
            }
        }
        let mut smoothed = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                smoothed[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * tmp[clamp_index(y as i64 + k as i64 - r, h) * w + x])
                    .sum();
            }
        }
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let s = |xx: i64, yy: i64| smoothed[clamp_index(yy, h) * w + clamp_index(xx, w)];
                let (xi, yi) = (x as i64, y as i64);
                gx[y * w + x] = (s(xi + 1, yi) - s(xi - 1, yi)) / 2.0;
                gy[y * w + x] = (s(xi, yi + 1) - s(xi, yi - 1)) / 2.0;
            }
        }
        Self {
            width: w,
            height: h,
            smoothed,
            gx,
            gy,
        }
    }

    pub fn smoothed(&self) -> &[f64] {
        &self.smoothed
    }

    /// `(∂/∂x, ∂/∂y)` at a pixel, clamped to the grid.
    pub fn at(&self, x: i64, y: i64) -> (f64, f64) {
        let i = clamp_index(y, self.height) * self.width + clamp_index(x, self.width);
        (self.gx[i], self.gy[i])
    }
}

/// Descriptor of one contour element.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementFeature {
    /// Average of the two half-disk histograms, three normalized channels.
    pub color: [f64; COLOR_DIM],
    /// L2-normalized 8-orientation gradient histogram (all zero if flat).
    pub shape: [f64; SHAPE_DIM],
    pub position: [f64; 2],
}

impl ElementFeature {
    pub fn to_vector(&self) -> [f64; FEATURE_DIM] {
        let mut v = [0.0; FEATURE_DIM];
        v[..COLOR_DIM].copy_from_slice(&self.color);
        v[COLOR_DIM..COLOR_DIM + SHAPE_DIM].copy_from_slice(&self.shape);
        v[COLOR_DIM + SHAPE_DIM..].copy_from_slice(&self.position);
        v
    }
}

/// Diagonal feature covariance: one variance per descriptor block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureVariances {
    pub color: f64,
    pub shape: f64,
    pub position: f64,
}

impl Default for FeatureVariances {
    fn default() -> Self {
        Self {
            color: 0.05,
            shape: 0.05,
            position: 25.0,
        }
    }
}

impl FeatureVariances {
    pub fn per_dimension(&self) -> Result<[f64; FEATURE_DIM]> {
        for (name, v) in [
            ("color", self.color),
            ("shape", self.shape),
            ("position", self.position),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} variance must be positive, got {v}")));
            }
        }
        let mut out = [self.color; FEATURE_DIM];
        out[COLOR_DIM..COLOR_DIM + SHAPE_DIM].fill(self.shape);
        out[COLOR_DIM + SHAPE_DIM..].fill(self.position);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DescriptorConfig {
    /// Side of the gradient-histogram cell, pixels.
    pub cell: usize,
    /// Radius of the color half-disks, pixels.
    pub half_disk: usize,
    /// Inter matching window, pixels.
    pub window: f64,
    /// Offset subtracted per matched element pair.
    pub mu: f64,
    pub variances: FeatureVariances,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            cell: 16,
            half_disk: 4,
            window: crate::adjacency::DEFAULT_WINDOW,
            mu: 0.2,
            variances: FeatureVariances::default(),
        }
    }
}

impl DescriptorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cell == 0 || self.half_disk == 0 {
            return Err(Error::invalid("cell and half_disk must be at least 1 pixel"));
        }
        if !(self.window > 0.0) {
            return Err(Error::invalid("window must be positive"));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu must be finite"));
        }
        self.variances.per_dimension().map(|_| ())
    }
}

/// Feature extraction for the elements of one image.
pub struct FeatureExtractor<'a> {
    image: &'a Image,
    gradient: GradientField,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(image: &'a Image) -> Self {
        Self {
            image,
            gradient: GradientField::new(image),
        }
    }

    pub fn gradient(&self) -> &GradientField {
        &self.gradient
    }

    pub fn feature(&self, e: &ContourElement, cell: usize, half_disk: usize) -> ElementFeature {
        let (w, h) = (self.image.width(), self.image.height());
        let (cx, cy) = (e.x, e.y);
        let (nx, ny) = (e.theta().cos(), e.theta().sin());

        let r = half_disk as f64;
        let mut sides = [ColorHistogram::default(), ColorHistogram::default()];
        let (x0, x1) = ((cx - r).floor() as i64, (cx + r).ceil() as i64);
        let (y0, y1) = ((cy - r).floor() as i64, (cy + r).ceil() as i64);
        for py in y0..=y1 {
            for px in x0..=x1 {
                let (dx, dy) = (px as f64 - cx, py as f64 - cy);
                if dx.hypot(dy) > r {
                    continue;
                }
                let s = dx * nx + dy * ny;
                let side = if s > 1e-12 {
                    0
                } else if s < -1e-12 {
                    1
                } else {
                    continue;
                };
                sides[side].add(self.image.pixel(clamp_index(px, w), clamp_index(py, h)));
            }
        }
        let mut color = [0.0; COLOR_DIM];
        for c in 0..3 {
            let (a, b) = (sides[0].channel(c), sides[1].channel(c));
            for k in 0..HIST_BINS {
                color[c * HIST_BINS + k] = (a[k] + b[k]) / 2.0;
            }
        }

        let half = cell as f64 / 2.0;
        let mut shape = [0.0; SHAPE_DIM];
        let (x0, x1) = ((cx - half).ceil() as i64, (cx + half).floor() as i64);
        let (y0, y1) = ((cy - half).ceil() as i64, (cy + half).floor() as i64);
        for py in y0..=y1 {
            for px in x0..=x1 {
                let (gx, gy) = self.gradient.at(px, py);
                let mag = gx.hypot(gy);
                if mag == 0.0 {
                    continue;
                }
                let angle = gy.atan2(gx).rem_euclid(PI);
                let bin = ((angle / (PI / SHAPE_DIM as f64)) as usize).min(SHAPE_DIM - 1);
                shape[bin] += mag;
            }
        }
        let norm = shape.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            shape.iter_mut().for_each(|v| *v /= norm);
        } else {
            shape = [0.0; SHAPE_DIM];
        }

        ElementFeature {
            color,
            shape,
            position: [cx, cy],
        }
    }
}

pub fn element_feature(
    image: &Image,
    element: &ContourElement,
    cell: usize,
    half_disk: usize,
) -> ElementFeature {
    FeatureExtractor::new(image).feature(element, cell, half_disk)
}

/// `exp(−dᵀ Σ⁻¹ d)` for a diagonal `Σ`.
pub fn gaussian_similarity(fu: &[f64], fv: &[f64], variances: &[f64]) -> Result<f64> {
    if fu.len() != fv.len() || fu.len() != variances.len() {
        return Err(Error::Dimension("feature and variance lengths differ".into()));
    }
    if let Some(v) = variances.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::invalid(format!("variance must be positive, got {v}")));
    }
    let d2: f64 = fu
        .iter()
        .zip(fv)
        .zip(variances)
        .map(|((a, b), s)| (a - b) * (a - b) / s)
        .sum();
    Ok((-d2).exp())
}

/// Contour-element similarity; exactly zero when the elements are `window`
/// pixels apart or more.
pub fn inter_element_similarity(
    fu: &ElementFeature,
    fv: &ElementFeature,
    variances: &FeatureVariances,
    window: f64,
) -> Result<f64> {
    let per_dim = variances.per_dimension()?;
    let dist = (fu.position[0] - fv.position[0]).hypot(fu.position[1] - fv.position[1]);
    if dist >= window {
        return Ok(0.0);
    }
    gaussian_similarity(&fu.to_vector(), &fv.to_vector(), &per_dim)
}

/// Per-image inputs of [`assemble_affinity`].
#[derive(Debug, Clone)]
pub struct AffinityInputs {
    pub histograms: Vec<Vec<ColorHistogram>>,
    pub features: Vec<Vec<ElementFeature>>,
}

impl AffinityInputs {
    pub fn compute(
        images: &[&Image],
        leaves: &[&LabelMap],
        vars: &BoundaryVariableSet,
        config: &DescriptorConfig,
    ) -> Result<Self> {
        use rayon::prelude::*;
        if images.len() != vars.image_count() || leaves.len() != vars.image_count() {
            return Err(Error::Dimension(
                "image, leaves and graph counts differ".into(),
            ));
        }
        let histograms = images
            .iter()
            .zip(leaves)
            .map(|(img, l)| region_histograms(img, l))
            .collect();
        let features = images
            .par_iter()
            .zip(vars.graphs().par_iter())
            .map(|(img, g)| {
                let fx = FeatureExtractor::new(img);
                g.elements
                    .iter()
                    .map(|e| fx.feature(e, config.cell, config.half_disk))
                    .collect()
            })
            .collect();
        Ok(Self {
            histograms,
            features,
        })
    }
}

/// Objective coefficient for every enumerated variable.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    coefficients: Vec<f64>,
    kinds: Vec<VarKind>,
}

impl AffinityMatrix {
    pub fn new(coefficients: Vec<f64>, kinds: Vec<VarKind>) -> Self {
        Self {
            coefficients,
            kinds,
        }
    }

    pub fn get(&self, id: usize) -> Option<f64> {
        self.coefficients.get(id).copied()
    }

    pub fn kind(&self, id: usize) -> VarKind {
        self.kinds[id]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Assembles `q` for all variables. Inter terms of one variable are summed
/// in ascending value order so the result does not depend on image order.
pub fn assemble_affinity(
    vars: &BoundaryVariableSet,
    inputs: &AffinityInputs,
    config: &DescriptorConfig,
) -> Result<AffinityMatrix> {
    config.validate()?;
    let mut coefficients = vec![0.0; vars.len()];
    let kinds: Vec<VarKind> = vars.vars().iter().map(|v| v.kind()).collect();
    for i in 0..vars.image_count() {
        for id in vars.intra(i) {
            let v = vars.var(id);
            let hist = &inputs.histograms[i];
            let bc = hist[v.a.region].coefficient(&hist[v.b.region]);
            coefficients[id] = intra_similarity(vars.alpha(id) as f64, bc);
        }
    }
    let mut terms: Vec<Vec<f64>> = vec![Vec::new(); vars.len()];
    for i in 0..vars.image_count() {
        for j in i + 1..vars.image_count() {
            let (gi, gj) = (vars.graph(i), vars.graph(j));
            for (u, v) in element_pairs_within(gi, gj, config.window) {
                let w = inter_element_similarity(
                    &inputs.features[i][u],
                    &inputs.features[j][v],
                    &config.variances,
                    config.window,
                )?;
                if w == 0.0 {
                    continue;
                }
                let (eu, ev) = (&gi.elements[u], &gj.elements[v]);
                for m in [eu.regions.0, eu.regions.1] {
                    for n in [ev.regions.0, ev.regions.1] {
                        let id = vars
                            .id_of(NodeRef::new(i, m), NodeRef::new(j, n))
                            .ok_or_else(|| {
                                Error::Internal(format!(
                                    "matched elements without inter variable ({i},{m})-({j},{n})"
                                ))
                            })?;
                        let phase =
                            (ev.outward_direction(n) as i32 - eu.outward_direction(m) as i32)
                                .rem_euclid(8) as usize;
                        terms[id].push(w * PHASE_COS[phase]);
                    }
                }
            }
        }
    }
    for (id, mut t) in terms.into_iter().enumerate() {
        if kinds[id] != VarKind::Inter {
            continue;
        }
        let k = t.len() as f64;
        t.sort_by(f64::total_cmp);
        coefficients[id] = t.iter().sum::<f64>() - config.mu * k;
    }
    Ok(AffinityMatrix::new(coefficients, kinds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_examples() {
        assert_eq!(
            bhattacharyya_coefficient(&[0.25; 4], &[0.25; 4]).unwrap(),
            1.0
        );
        assert_eq!(
            bhattacharyya_coefficient(&[1.0, 0.0], &[0.0, 1.0]).unwrap(),
            0.0
        );
        let v = bhattacharyya_coefficient(&[0.5, 0.5], &[1.0, 0.0]).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((v - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn unnormalized_histogram_is_rejected() {
        assert!(bhattacharyya_coefficient(&[0.5, 0.4], &[1.0, 0.0]).is_err());
        assert!(bhattacharyya_coefficient(&[1.5, -0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn intra_similarity_examples() {
        assert_eq!(intra_similarity(10.0, 1.0), 0.0);
        assert!((intra_similarity(10.0, 0.0) - -17.182818284590452).abs() < 1e-12);
        assert!((intra_similarity(10.0, 0.5) - -6.487212707001282).abs() < 1e-12);
    }

    #[test]
    fn similarity_single_dimension() {
        let w = gaussian_similarity(&[1.0, 0.0], &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((w - (-1.0f64).exp()).abs() < 1e-15);
        assert!(gaussian_similarity(&[0.0], &[0.0], &[0.0]).is_err());
    }

    #[test]
    fn window_cuts_similarity_to_zero() {
        let f = ElementFeature {
            color: [0.0; COLOR_DIM],
            shape: [0.0; SHAPE_DIM],
            position: [0.0, 0.0],
        };
        let mut g = f.clone();
        let var = FeatureVariances::default();
        assert_eq!(inter_element_similarity(&f, &g, &var, 20.0).unwrap(), 1.0);
        g.position = [20.0, 0.0];
        assert_eq!(inter_element_similarity(&f, &g, &var, 20.0).unwrap(), 0.0);
        g.position = [19.9, 0.0];
        assert!(inter_element_similarity(&f, &g, &var, 20.0).unwrap() > 0.0);
    }

    #[test]
    fn bad_variance_is_rejected() {
        let var = FeatureVariances {
            color: 0.0,
            ..Default::default()
        };
        assert!(var.per_dimension().is_err());
    }

    #[test]
    fn phase_table_is_cosine() {
        for (k, c) in PHASE_COS.iter().enumerate() {
            assert!((c - (k as f64 * PI / 4.0).cos()).abs() < 1e-15);
        }
    }
}
