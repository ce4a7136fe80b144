//! Region adjacency graphs, contour elements and boundary-variable enumeration.
//!
//! Coordinates: x grows to the right, y grows downward, pixel centers sit on
//! integer coordinates. A contour element is the unit edge between two
//! 4-adjacent pixels with different labels; its position is the midpoint of
//! the two pixel centers and its normal points from the lower region id into
//! the higher one, quantized to one of eight directions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::FRAC_PI_4;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::raster::LabelMap;

/// Default inter-image matching window in pixels.
pub const DEFAULT_WINDOW: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ContourElement {
    pub image: usize,
    pub x: f64,
    pub y: f64,
    /// Separated regions `(m, n)` with `m < n`.
    pub regions: (usize, usize),
    /// Normal direction from `m` into `n` in units of π/4, in `0..8`.
    pub direction: u8,
}

impl ContourElement {
    /// Normal angle in radians, in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        self.direction as f64 * FRAC_PI_4
    }

    /// Quantized outward normal of `region` at this element.
    pub fn outward_direction(&self, region: usize) -> u8 {
        if region == self.regions.0 {
            self.direction
        } else {
            debug_assert_eq!(region, self.regions.1);
            (self.direction + 4) % 8
        }
    }

    pub fn distance(&self, other: &ContourElement) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Shared boundary length in pixel edges.
    pub alpha: usize,
    pub elements: Vec<usize>,
}

/// Adjacency graph of one leave partition.
#[derive(Debug, Clone)]
pub struct RegionGraph {
    pub image: usize,
    pub width: usize,
    pub height: usize,
    pub region_count: usize,
    pub elements: Vec<ContourElement>,
    pub edges: BTreeMap<(usize, usize), Edge>,
    /// Element ids incident to each region, ascending.
    pub region_elements: Vec<Vec<usize>>,
}

impl RegionGraph {
    pub fn alpha(&self, m: usize, n: usize) -> Option<usize> {
        self.edges.get(&(m.min(n), m.max(n))).map(|e| e.alpha)
    }

    pub fn total_boundary(&self) -> usize {
        self.edges.values().map(|e| e.alpha).sum()
    }
}

fn quantize(vx: f64, vy: f64) -> u8 {
    let theta = vy.atan2(vx);
    let k = (theta / FRAC_PI_4).round() as i64;
    k.rem_euclid(8) as u8
}

/// Normal from the lower-id side `m` into `n`, fitted on the 3x3
/// neighborhoods of both pixels of the edge.
fn fit_normal(leaves: &LabelMap, p: (usize, usize), q: (usize, usize), m: usize, n: usize) -> u8 {
    let cx = (p.0 + q.0) as f64 / 2.0;
    let cy = (p.1 + q.1) as f64 / 2.0;
    let (w, h) = (leaves.width() as i64, leaves.height() as i64);
    let x0 = (p.0.min(q.0) as i64 - 1).max(0);
    let x1 = (p.0.max(q.0) as i64 + 1).min(w - 1);
    let y0 = (p.1.min(q.1) as i64 - 1).max(0);
    let y1 = (p.1.max(q.1) as i64 + 1).min(h - 1);
    let (mut vx, mut vy) = (0.0, 0.0);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let l = leaves.get(x as usize, y as usize);
            let sign = if l == n {
                1.0
            } else if l == m {
                -1.0
            } else {
                continue;
            };
            vx += sign * (x as f64 - cx);
            vy += sign * (y as f64 - cy);
        }
    }
    if vx.abs() < 1e-12 && vy.abs() < 1e-12 {
        // symmetric neighborhood; fall back to the raw pixel-edge direction
        let (pm, pn) = if leaves.get(p.0, p.1) == m { (p, q) } else { (q, p) };
        vx = pn.0 as f64 - pm.0 as f64;
        vy = pn.1 as f64 - pm.1 as f64;
    }
    quantize(vx, vy)
}

/// Builds the adjacency graph and contour elements of a leave partition.
/// Elements are numbered in raster order (right neighbor before down neighbor).
pub fn build_graph(leaves: &LabelMap, image: usize) -> RegionGraph {
    let (w, h) = (leaves.width(), leaves.height());
    let mut elements = Vec::new();
    let mut edges: BTreeMap<(usize, usize), Edge> = BTreeMap::new();
    let mut region_elements = vec![Vec::new(); leaves.region_count()];
    let mut push = |p: (usize, usize), q: (usize, usize), elements: &mut Vec<ContourElement>| {
        let (a, b) = (leaves.get(p.0, p.1), leaves.get(q.0, q.1));
        if a == b {
            return;
        }
        let (m, n) = (a.min(b), a.max(b));
        let id = elements.len();
        elements.push(ContourElement {
            image,
            x: (p.0 + q.0) as f64 / 2.0,
            y: (p.1 + q.1) as f64 / 2.0,
            regions: (m, n),
            direction: fit_normal(leaves, p, q, m, n),
        });
        let e = edges.entry((m, n)).or_insert(Edge {
            alpha: 0,
            elements: Vec::new(),
        });
        e.alpha += 1;
        e.elements.push(id);
        region_elements[m].push(id);
        region_elements[n].push(id);
    };
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w {
                push((x, y), (x + 1, y), &mut elements);
            }
            if y + 1 < h {
                push((x, y), (x, y + 1), &mut elements);
            }
        }
    }
    RegionGraph {
        image,
        width: w,
        height: h,
        region_count: leaves.region_count(),
        elements,
        edges,
        region_elements,
    }
}

/// A leaf region of one image in the collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeRef {
    pub image: usize,
    pub region: usize,
}

impl NodeRef {
    pub fn new(image: usize, region: usize) -> Self {
        Self { image, region }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Intra,
    Inter,
}

/// One boundary variable `b_{a,b}` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryVar {
    pub a: NodeRef,
    pub b: NodeRef,
}

impl BoundaryVar {
    pub fn kind(&self) -> VarKind {
        if self.a.image == self.b.image {
            VarKind::Intra
        } else {
            VarKind::Inter
        }
    }
}

/// Uniform grid over the elements of one graph for window queries.
struct ElementGrid<'a> {
    graph: &'a RegionGraph,
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> ElementGrid<'a> {
    fn new(graph: &'a RegionGraph, cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (id, e) in graph.elements.iter().enumerate() {
            buckets
                .entry(((e.x / cell).floor() as i64, (e.y / cell).floor() as i64))
                .or_default()
                .push(id);
        }
        Self {
            graph,
            cell,
            buckets,
        }
    }

    /// Element ids strictly closer than `window` to `(x, y)`, ascending.
    fn within(&self, x: f64, y: f64, window: f64) -> Vec<usize> {
        let (cx, cy) = ((x / self.cell).floor() as i64, (y / self.cell).floor() as i64);
        let reach = (window / self.cell).ceil() as i64;
        let mut out = Vec::new();
        for gy in cy - reach..=cy + reach {
            for gx in cx - reach..=cx + reach {
                if let Some(ids) = self.buckets.get(&(gx, gy)) {
                    for &id in ids {
                        let e = &self.graph.elements[id];
                        if (e.x - x).hypot(e.y - y) < window {
                            out.push(id);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// All element pairs `(u in first, v in second)` strictly closer than
/// `window`, sorted lexicographically.
pub fn element_pairs_within(
    first: &RegionGraph,
    second: &RegionGraph,
    window: f64,
) -> Vec<(usize, usize)> {
    let grid = ElementGrid::new(second, window.max(1.0));
    let mut pairs = Vec::new();
    for (u, e) in first.elements.iter().enumerate() {
        for v in grid.within(e.x, e.y, window) {
            pairs.push((u, v));
        }
    }
    pairs
}

/// Indexed intra and inter boundary variables over a collection of leave
/// partitions. Ids are assigned per image-pair block `(i, j)`, `i <= j`, in
/// lexicographic block order and lexicographic pair order within a block.
#[derive(Debug, Clone)]
pub struct BoundaryVariableSet {
    graphs: Vec<RegionGraph>,
    window: f64,
    vars: Vec<BoundaryVar>,
    index: HashMap<(NodeRef, NodeRef), usize>,
    blocks: BTreeMap<(usize, usize), Range<usize>>,
}

pub fn enumerate_variables(graphs: Vec<RegionGraph>, window: f64) -> Result<BoundaryVariableSet> {
    if graphs.is_empty() {
        return Err(Error::invalid("at least one image is required"));
    }
    if !(window > 0.0) {
        return Err(Error::invalid(format!("window must be positive, got {window}")));
    }
    for (i, g) in graphs.iter().enumerate() {
        if g.image != i {
            return Err(Error::invalid(format!(
                "graph at position {i} is labelled image {}",
                g.image
            )));
        }
    }
    let mut vars = Vec::new();
    let mut blocks = BTreeMap::new();
    for i in 0..graphs.len() {
        for j in i..graphs.len() {
            let start = vars.len();
            if i == j {
                for &(m, n) in graphs[i].edges.keys() {
                    vars.push(BoundaryVar {
                        a: NodeRef::new(i, m),
                        b: NodeRef::new(i, n),
                    });
                }
            } else {
                let mut pairs = BTreeSet::new();
                for (u, v) in element_pairs_within(&graphs[i], &graphs[j], window) {
                    let (eu, ev) = (&graphs[i].elements[u], &graphs[j].elements[v]);
                    for m in [eu.regions.0, eu.regions.1] {
                        for n in [ev.regions.0, ev.regions.1] {
                            pairs.insert((m, n));
                        }
                    }
                }
                for (m, n) in pairs {
                    vars.push(BoundaryVar {
                        a: NodeRef::new(i, m),
                        b: NodeRef::new(j, n),
                    });
                }
            }
            blocks.insert((i, j), start..vars.len());
        }
    }
    let index = vars
        .iter()
        .enumerate()
        .map(|(id, v)| ((v.a, v.b), id))
        .collect();
    Ok(BoundaryVariableSet {
        graphs,
        window,
        vars,
        index,
        blocks,
    })
}

impl BoundaryVariableSet {
    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn image_count(&self) -> usize {
        self.graphs.len()
    }

    pub fn graphs(&self) -> &[RegionGraph] {
        &self.graphs
    }

    pub fn graph(&self, image: usize) -> &RegionGraph {
        &self.graphs[image]
    }

    pub fn vars(&self) -> &[BoundaryVar] {
        &self.vars
    }

    pub fn var(&self, id: usize) -> BoundaryVar {
        self.vars[id]
    }

    /// Variable id for an unordered node pair.
    pub fn id_of(&self, x: NodeRef, y: NodeRef) -> Option<usize> {
        let key = if x <= y { (x, y) } else { (y, x) };
        self.index.get(&key).copied()
    }

    pub fn block(&self, i: usize, j: usize) -> Range<usize> {
        let key = (i.min(j), i.max(j));
        self.blocks.get(&key).cloned().unwrap_or(0..0)
    }

    /// Ids of the intra variables of `image`, in pair-lexicographic order.
    pub fn intra(&self, image: usize) -> Range<usize> {
        self.block(image, image)
    }

    pub fn inter_count(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind() == VarKind::Inter)
            .count()
    }

    /// Boundary length weight of a variable (1 for inter variables).
    pub fn alpha(&self, id: usize) -> usize {
        let v = self.vars[id];
        if v.kind() == VarKind::Intra {
            self.graphs[v.a.image]
                .alpha(v.a.region, v.b.region)
                .unwrap_or(0)
        } else {
            1
        }
    }

    /// Neighbors of every node in the combined intra+inter graph.
    pub fn neighbors(&self) -> BTreeMap<NodeRef, BTreeSet<NodeRef>> {
        let mut adj: BTreeMap<NodeRef, BTreeSet<NodeRef>> = BTreeMap::new();
        for v in &self.vars {
            adj.entry(v.a).or_default().insert(v.b);
            adj.entry(v.b).or_default().insert(v.a);
        }
        adj
    }

    /// Total number of leaves across the collection.
    pub fn node_count(&self) -> usize {
        self.graphs.iter().map(|g| g.region_count).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::parse_label_csv;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn two_rows_give_one_edge_pointing_down() {
        let m = parse_label_csv("0,0\n1,1").unwrap();
        let g = build_graph(&m, 0);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.alpha(0, 1), Some(2));
        for e in &g.elements {
            assert_eq!(e.theta(), FRAC_PI_2);
        }
    }

    #[test]
    fn single_region_has_no_edges() {
        let m = parse_label_csv("4,4\n4,4").unwrap();
        assert!(build_graph(&m, 0).edges.is_empty());
    }

    #[test]
    fn vertical_boundary_points_right() {
        let m = parse_label_csv("0,0,1,1\n0,0,1,1\n0,0,1,1").unwrap();
        let g = build_graph(&m, 0);
        assert!(g.elements.iter().all(|e| e.direction == 0));
        assert_eq!(g.elements[0].outward_direction(1), 4);
    }

    #[test]
    fn single_image_has_no_inter_variables() {
        let m = parse_label_csv("0,1\n2,2").unwrap();
        let vars = enumerate_variables(vec![build_graph(&m, 0)], 20.0).unwrap();
        assert_eq!(vars.inter_count(), 0);
        assert_eq!(vars.len(), 3);
    }

    #[test]
    fn non_positive_window_is_rejected() {
        let m = parse_label_csv("0,1").unwrap();
        assert!(enumerate_variables(vec![build_graph(&m, 0)], 0.0).is_err());
    }

    #[test]
    fn id_lookup_is_order_insensitive() {
        let m = parse_label_csv("0,1\n2,2").unwrap();
        let vars =
            enumerate_variables(vec![build_graph(&m, 0), build_graph(&m, 1)], 5.0).unwrap();
        for (id, v) in vars.vars().iter().enumerate() {
            assert_eq!(vars.id_of(v.a, v.b), Some(id));
            assert_eq!(vars.id_of(v.b, v.a), Some(id));
        }
    }
}
