//! End-to-end co-clustering: joint single-level solves, multiresolution
//! sweeps and the forward-only video loop.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjacency::{build_graph, enumerate_variables, BoundaryVariableSet, NodeRef};
use crate::constraints::{
    band_constraints, freeze_constraints, intra_constraints, triangle_constraints, BandWeighting,
    ConstraintKind, LinearConstraint, Provenance,
};
use crate::descriptors::{assemble_affinity, AffinityInputs, AffinityMatrix, DescriptorConfig};
use crate::error::{Error, Result};
use crate::hierarchy::{build_bpt, Hierarchy};
use crate::raster::{Image, LabelMap};
use crate::solver::{solve_binary_lazy, LpProblem, SolverConfig, Status};

/// One image with its leaf partition and hierarchy.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: Image,
    pub leaves: LabelMap,
    pub hierarchy: Hierarchy,
}

impl Frame {
    pub fn new(image: Image, leaves: LabelMap, hierarchy: Hierarchy) -> Result<Self> {
        if !leaves.same_grid(image.width(), image.height()) {
            return Err(Error::Dimension(format!(
                "leaves are {}x{}, image is {}x{}",
                leaves.width(),
                leaves.height(),
                image.width(),
                image.height()
            )));
        }
        if hierarchy.leaf_count() != leaves.region_count() {
            return Err(Error::Dimension(format!(
                "hierarchy has {} leaves, partition has {} regions",
                hierarchy.leaf_count(),
                leaves.region_count()
            )));
        }
        Ok(Self {
            image,
            leaves,
            hierarchy,
        })
    }

    /// Frame whose hierarchy is the greedy color-merging tree of `leaves`.
    pub fn with_bpt(image: Image, leaves: LabelMap) -> Result<Self> {
        let hierarchy = build_bpt(&image, &leaves)?;
        Self::new(image, leaves, hierarchy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub descriptors: DescriptorConfig,
    pub weighting: BandWeighting,
    pub solver: SolverConfig,
    /// Re-solves allowed for adding cycle inequalities at one level.
    pub max_cycle_rounds: usize,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.descriptors.validate()
    }

    fn cycle_rounds(&self) -> usize {
        if self.max_cycle_rounds == 0 {
            DEFAULT_CYCLE_ROUNDS
        } else {
            self.max_cycle_rounds
        }
    }
}

const DEFAULT_CYCLE_ROUNDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    /// Fraction of the intra boundary mass kept active.
    pub t: f64,
    /// Band width below `t`.
    pub beta: f64,
}

/// Resolution levels, strictly decreasing in `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    levels: Vec<Level>,
}

impl Schedule {
    pub fn new(levels: Vec<Level>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("schedule needs at least one level"));
        }
        for l in &levels {
            if !(l.t > 0.0 && l.t <= 1.0) || !(l.beta >= 0.0 && l.beta <= l.t + 1e-12) {
                return Err(Error::invalid(format!(
                    "level t = {}, beta = {} outside 0 <= beta <= t <= 1",
                    l.t, l.beta
                )));
            }
        }
        if levels.windows(2).any(|w| w[1].t >= w[0].t) {
            return Err(Error::invalid("schedule must be strictly decreasing in t"));
        }
        Ok(Self { levels })
    }

    /// `n` levels with `t` linear from `t_max` down to `t_min`.
    pub fn linear(n: usize, t_max: f64, t_min: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("schedule needs at least one level"));
        }
        if n > 1 && t_max <= t_min {
            return Err(Error::invalid("t_max must exceed t_min"));
        }
        let levels = (0..n)
            .map(|k| {
                let t = match k {
                    0 => t_max,
                    k if k + 1 == n => t_min,
                    k => t_max - (t_max - t_min) * k as f64 / (n - 1) as f64,
                };
                Level { t, beta }
            })
            .collect();
        Self::new(levels)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

impl Default for Schedule {
    /// 30 levels from 0.40 to 0.10 with `β = 0.1`.
    fn default() -> Self {
        Self::linear(30, 0.40, 0.10, 0.1).expect("default schedule is valid")
    }
}

/// Everything shared by the levels of one joint problem.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub vars: BoundaryVariableSet,
    pub affinity: AffinityMatrix,
    /// Intra constraints.
    pub base: Vec<LinearConstraint>,
    /// Triangle constraints, added to a solve only once violated.
    pub triangles: Vec<LinearConstraint>,
}

pub fn prepare(frames: &[&Frame], config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    if frames.is_empty() {
        return Err(Error::invalid("at least one image is required"));
    }
    let graphs = frames
        .iter()
        .enumerate()
        .map(|(i, f)| build_graph(&f.leaves, i))
        .collect();
    let vars = enumerate_variables(graphs, config.descriptors.window)?;
    let images: Vec<&Image> = frames.iter().map(|f| &f.image).collect();
    let leaves: Vec<&LabelMap> = frames.iter().map(|f| &f.leaves).collect();
    let inputs = AffinityInputs::compute(&images, &leaves, &vars, &config.descriptors)?;
    let affinity = assemble_affinity(&vars, &inputs, &config.descriptors)?;
    let mut base = Vec::new();
    for (i, f) in frames.iter().enumerate() {
        base.extend(intra_constraints(&f.hierarchy, &vars, i)?);
    }
    let triangles = triangle_constraints(&vars);
    Ok(Prepared {
        vars,
        affinity,
        base,
        triangles,
    })
}

/// Connected components of the `b = 0` graph, per image and leaf. Cluster
/// ids are ranked by their smallest `(image, leaf)`.
pub fn extract_clusters(vars: &BoundaryVariableSet, assignment: &[u8]) -> Result<Vec<Vec<usize>>> {
    if assignment.len() != vars.len() {
        return Err(Error::Dimension(format!(
            "assignment has {} entries for {} variables",
            assignment.len(),
            vars.len()
        )));
    }
    let offsets = node_offsets(vars);
    let total = *offsets.last().unwrap_or(&0);
    let mut parent: Vec<usize> = (0..total).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (id, v) in vars.vars().iter().enumerate() {
        if assignment[id] == 0 {
            let a = find(&mut parent, offsets[v.a.image] + v.a.region);
            let b = find(&mut parent, offsets[v.b.image] + v.b.region);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut rank: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(vars.image_count());
    for i in 0..vars.image_count() {
        let mut labels = Vec::with_capacity(offsets[i + 1] - offsets[i]);
        for node in offsets[i]..offsets[i + 1] {
            let root = find(&mut parent, node);
            let next = rank.len();
            labels.push(*rank.entry(root).or_insert(next));
        }
        out.push(labels);
    }
    Ok(out)
}

fn node_offsets(vars: &BoundaryVariableSet) -> Vec<usize> {
    let mut offsets = vec![0];
    for g in vars.graphs() {
        offsets.push(offsets.last().unwrap() + g.region_count);
    }
    offsets
}

/// Boundary values implied by a cluster labeling.
pub fn realized_assignment(vars: &BoundaryVariableSet, clusters: &[Vec<usize>]) -> Vec<u8> {
    vars.vars()
        .iter()
        .map(|v| u8::from(clusters[v.a.image][v.a.region] != clusters[v.b.image][v.b.region]))
        .collect()
}

/// Per-pixel cluster ids of one image.
pub fn pixel_labels(leaves: &LabelMap, clusters: &[usize]) -> Vec<u32> {
    leaves.labels().iter().map(|&l| clusters[l as usize] as u32).collect()
}

/// One solved level of a joint problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSolution {
    pub level: Level,
    /// Cluster id per image and leaf.
    pub clusters: Vec<Vec<usize>>,
    pub assignment: Vec<u8>,
    pub objective: f64,
    pub status: Status,
    /// Cycle inequalities added before the labeling became consistent.
    pub cycle_cuts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevelOutcome {
    Solved(LevelSolution),
    Infeasible { level: Level, reason: String },
}

impl LevelOutcome {
    pub fn solution(&self) -> Option<&LevelSolution> {
        match self {
            LevelOutcome::Solved(s) => Some(s),
            LevelOutcome::Infeasible { .. } => None,
        }
    }
}

/// Shortest `b = 0` path between two nodes, as variable ids.
fn merged_path(
    adjacency: &BTreeMap<NodeRef, Vec<(NodeRef, usize)>>,
    from: NodeRef,
    to: NodeRef,
) -> Option<Vec<usize>> {
    let mut prev: BTreeMap<NodeRef, (NodeRef, usize)> = BTreeMap::new();
    let mut queue = VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(x) = queue.pop_front() {
        if x == to {
            let mut path = Vec::new();
            let mut cur = to;
            while cur != from {
                let (p, id) = prev[&cur];
                path.push(id);
                cur = p;
            }
            path.sort_unstable();
            return Some(path);
        }
        for &(y, id) in adjacency.get(&x).into_iter().flatten() {
            if seen.insert(y) {
                prev.insert(y, (x, id));
                queue.push_back(y);
            }
        }
    }
    None
}

/// Cycle inequalities `b_xy ≤ Σ path` for active boundaries whose endpoints
/// are joined by merged boundaries.
fn cycle_cuts(vars: &BoundaryVariableSet, assignment: &[u8], clusters: &[Vec<usize>]) -> Vec<LinearConstraint> {
    let mut adjacency: BTreeMap<NodeRef, Vec<(NodeRef, usize)>> = BTreeMap::new();
    for (id, v) in vars.vars().iter().enumerate() {
        if assignment[id] == 0 {
            adjacency.entry(v.a).or_default().push((v.b, id));
            adjacency.entry(v.b).or_default().push((v.a, id));
        }
    }
    let mut cuts = Vec::new();
    for (id, v) in vars.vars().iter().enumerate() {
        if assignment[id] == 1 && clusters[v.a.image][v.a.region] == clusters[v.b.image][v.b.region] {
            if let Some(path) = merged_path(&adjacency, v.a, v.b) {
                cuts.push(LinearConstraint::int(
                    ConstraintKind::LessEqual,
                    std::iter::once((id, 1)).chain(path.into_iter().map(|p| (p, -1))),
                    0,
                    Provenance::Cycle,
                ));
            }
        }
    }
    cuts
}

/// Solves one level: `extra` holds band and freeze constraints.
fn solve_level(
    prepared: &Prepared,
    level: Level,
    extra: Vec<LinearConstraint>,
    config: &PipelineConfig,
) -> Result<LevelOutcome> {
    let vars = &prepared.vars;
    let mut problem = LpProblem::new(prepared.affinity.coefficients().to_vec());
    problem.constraints = prepared.base.clone();
    problem.constraints.extend(extra);
    let mut added = 0;
    for _ in 0..=config.cycle_rounds() {
        let (sol, _) = solve_binary_lazy(&problem, &prepared.triangles, &config.solver)?;
        let assignment = match sol.status {
            Status::Infeasible => {
                let reason = match sol.certificate_row.and_then(|r| problem.constraints.get(r)) {
                    Some(c) => format!(
                        "t = {}, beta = {}: {} constraint cannot hold",
                        level.t,
                        level.beta,
                        c.provenance.tag()
                    ),
                    None => format!("t = {}, beta = {}: no 0/1 assignment", level.t, level.beta),
                };
                return Ok(LevelOutcome::Infeasible { level, reason });
            }
            Status::IterationLimit => {
                return Err(Error::Internal(format!(
                    "simplex iteration limit at t = {}",
                    level.t
                )))
            }
            Status::NodeLimit if sol.values.is_empty() => {
                return Err(Error::Internal(format!(
                    "node limit without incumbent at t = {}",
                    level.t
                )))
            }
            Status::Optimal | Status::NodeLimit => sol
                .assignment()
                .ok_or_else(|| Error::Internal("binary solve returned a fractional point".into()))?,
        };
        let clusters = extract_clusters(vars, &assignment)?;
        if realized_assignment(vars, &clusters) == assignment {
            return Ok(LevelOutcome::Solved(LevelSolution {
                level,
                clusters,
                objective: sol.objective,
                status: sol.status,
                assignment,
                cycle_cuts: added,
            }));
        }
        let cuts = cycle_cuts(vars, &assignment, &clusters);
        if cuts.is_empty() {
            return Err(Error::Internal("inconsistent labeling without a cycle".into()));
        }
        added += cuts.len();
        problem.constraints.extend(cuts);
    }
    Err(Error::Internal(format!(
        "labeling still inconsistent after {} cycle rounds",
        config.cycle_rounds()
    )))
}

fn band_for(
    vars: &BoundaryVariableSet,
    images: impl IntoIterator<Item = usize>,
    level: Level,
    weighting: BandWeighting,
) -> Result<Vec<LinearConstraint>> {
    let mut out = Vec::new();
    for i in images {
        if vars.intra(i).is_empty() {
            continue;
        }
        out.extend(band_constraints(vars, i, level.t, level.beta, weighting)?);
    }
    Ok(out)
}

/// Joint solve of all frames at one resolution level.
pub fn cocluster(frames: &[Frame], level: Level, config: &PipelineConfig) -> Result<LevelOutcome> {
    let refs: Vec<&Frame> = frames.iter().collect();
    let prepared = prepare(&refs, config)?;
    cocluster_prepared(&prepared, level, config)
}

pub fn cocluster_prepared(prepared: &Prepared, level: Level, config: &PipelineConfig) -> Result<LevelOutcome> {
    let band = band_for(&prepared.vars, 0..prepared.vars.image_count(), level, config.weighting)?;
    solve_level(prepared, level, band, config)
}

/// One independent joint solve per level, levels in parallel.
pub fn multiresolution(
    frames: &[Frame],
    schedule: &Schedule,
    config: &PipelineConfig,
) -> Result<Vec<LevelOutcome>> {
    let refs: Vec<&Frame> = frames.iter().collect();
    let prepared = prepare(&refs, config)?;
    schedule
        .levels()
        .par_iter()
        .map(|&level| cocluster_prepared(&prepared, level, config))
        .collect()
}

/// Per-frame, per-level cluster labels of a whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionBundle {
    pub schedule: Schedule,
    pub leaves: Vec<LabelMap>,
    /// `labels[frame][level]`: cluster id per leaf, `None` when the level was
    /// infeasible.
    pub labels: Vec<Vec<Option<Vec<usize>>>>,
    /// Reason per infeasible level, `notes[frame][level]`.
    pub notes: Vec<Vec<Option<String>>>,
}

impl SolutionBundle {
    pub fn from_levels(frames: &[Frame], schedule: &Schedule, outcomes: &[LevelOutcome]) -> Self {
        let mut labels = vec![Vec::new(); frames.len()];
        let mut notes = vec![Vec::new(); frames.len()];
        for outcome in outcomes {
            for f in 0..frames.len() {
                match outcome {
                    LevelOutcome::Solved(s) => {
                        labels[f].push(Some(s.clusters[f].clone()));
                        notes[f].push(None);
                    }
                    LevelOutcome::Infeasible { reason, .. } => {
                        labels[f].push(None);
                        notes[f].push(Some(reason.clone()));
                    }
                }
            }
        }
        Self {
            schedule: schedule.clone(),
            leaves: frames.iter().map(|f| f.leaves.clone()).collect(),
            labels,
            notes,
        }
    }

    pub fn frame_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn pixel_labels(&self, frame: usize, level: usize) -> Option<Vec<u32>> {
        self.labels[frame][level]
            .as_ref()
            .map(|c| pixel_labels(&self.leaves[frame], c))
    }
}

/// State carried between video steps at one level.
#[derive(Clone)]
struct Carried {
    /// Cluster id per leaf of the two most recent frames.
    prev2: Vec<usize>,
    prev1: Vec<usize>,
    next_id: usize,
}

/// Forward-only video co-clustering. Frames 0 and 1 are solved jointly;
/// every later frame is solved against the published labels of its two
/// predecessors, which are frozen.
pub fn video_segment(
    frames: &[Frame],
    schedule: &Schedule,
    config: &PipelineConfig,
) -> Result<SolutionBundle> {
    if frames.len() < 2 {
        return Err(Error::invalid("video needs at least two frames"));
    }
    let n_levels = schedule.len();
    let mut labels: Vec<Vec<Option<Vec<usize>>>> = vec![vec![None; n_levels]; frames.len()];
    let mut notes: Vec<Vec<Option<String>>> = vec![vec![None; n_levels]; frames.len()];

    let init = multiresolution(&frames[..2], schedule, config)?;
    let mut carried: Vec<Option<Carried>> = Vec::with_capacity(n_levels);
    for (r, outcome) in init.into_iter().enumerate() {
        match outcome {
            LevelOutcome::Solved(s) => {
                let next_id = s.clusters.iter().flatten().max().map_or(0, |m| m + 1);
                labels[0][r] = Some(s.clusters[0].clone());
                labels[1][r] = Some(s.clusters[1].clone());
                carried.push(Some(Carried {
                    prev2: s.clusters[0].clone(),
                    prev1: s.clusters[1].clone(),
                    next_id,
                }));
            }
            LevelOutcome::Infeasible { reason, .. } => {
                notes[0][r] = Some(reason.clone());
                notes[1][r] = Some(reason);
                carried.push(None);
            }
        }
    }

    for i in 2..frames.len() {
        let steps: Vec<Result<std::result::Result<Carried, String>>> = schedule
            .levels()
            .par_iter()
            .enumerate()
            .map(|(r, &level)| match &carried[r] {
                None => Ok(Err(format!("level unavailable since an earlier frame (t = {})", level.t))),
                Some(c) => video_step(frames, i, level, c, config),
            })
            .collect();
        for (r, step) in steps.into_iter().enumerate() {
            match step? {
                Ok(next) => {
                    labels[i][r] = Some(next.prev1.clone());
                    carried[r] = Some(next);
                }
                Err(reason) => {
                    notes[i][r] = Some(reason);
                    carried[r] = None;
                }
            }
        }
    }
    Ok(SolutionBundle {
        schedule: schedule.clone(),
        leaves: frames.iter().map(|f| f.leaves.clone()).collect(),
        labels,
        notes,
    })
}

/// Solves frame `i` at one level. `Err(reason)` is an infeasible band.
fn video_step(
    frames: &[Frame],
    i: usize,
    level: Level,
    carried: &Carried,
    config: &PipelineConfig,
) -> Result<std::result::Result<Carried, String>> {
    let f2 = &frames[i - 2];
    // published partition of frame i-2 as a flat leaf partition
    let raw = pixel_labels(&f2.leaves, &carried.prev2);
    let clusters_map = LabelMap::new(f2.leaves.width(), f2.leaves.height(), raw.clone())?;
    let mut slot0_labels = vec![0usize; clusters_map.region_count()];
    for (p, &region) in clusters_map.labels().iter().enumerate() {
        slot0_labels[region as usize] = raw[p] as usize;
    }
    let slot0 = Frame::new(
        f2.image.clone(),
        clusters_map.clone(),
        Hierarchy::left_fold(clusters_map.region_count())?,
    )?;
    let refs = [&slot0, &frames[i - 1], &frames[i]];
    let prepared = prepare(&refs, config)?;
    let vars = &prepared.vars;
    let mut extra = band_for(vars, [2], level, config.weighting)?;
    extra.extend(freeze_constraints(
        vars,
        &[(0, &slot0_labels), (1, &carried.prev1)],
    )?);
    let solution = match solve_level(&prepared, level, extra, config)? {
        LevelOutcome::Infeasible { reason, .. } => return Ok(Err(reason)),
        LevelOutcome::Solved(s) => s,
    };

    // carry ids: components touching frozen slots keep their published id
    let mut component_id: BTreeMap<usize, usize> = BTreeMap::new();
    for (slot, published) in [(0usize, &slot0_labels), (1, &carried.prev1)] {
        for (leaf, &comp) in solution.clusters[slot].iter().enumerate() {
            let id = published[leaf];
            if let Some(&old) = component_id.get(&comp) {
                if old != id {
                    return Err(Error::Internal(format!(
                        "frame {i}: published clusters {old} and {id} were merged"
                    )));
                }
            }
            component_id.insert(comp, id);
        }
    }
    let mut next_id = carried.next_id;
    let mut current = Vec::with_capacity(solution.clusters[2].len());
    for &comp in &solution.clusters[2] {
        let id = *component_id.entry(comp).or_insert_with(|| {
            next_id += 1;
            next_id - 1
        });
        current.push(id);
    }
    // frozen slots must be reproduced exactly
    for (slot, published) in [(0usize, &slot0_labels), (1, &carried.prev1)] {
        let again: Vec<usize> = solution.clusters[slot].iter().map(|c| component_id[c]).collect();
        if &again != published {
            return Err(Error::Internal(format!(
                "frame {i}: frozen slot {slot} changed at t = {}",
                level.t
            )));
        }
    }
    Ok(Ok(Carried {
        prev2: carried.prev1.clone(),
        prev1: current,
        next_id,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::parse_label_csv;

    fn four_leaf() -> (Frame, Prepared) {
        let leaves = parse_label_csv("1,1,2,2\n1,1,2,2\n3,3,3,2\n3,3,4,4\n").unwrap();
        let image = Image::filled(4, 4, [10, 20, 30]).unwrap();
        let h = Hierarchy::from_pairs(4, &[(0, 1), (2, 3), (4, 5)]).unwrap();
        let frame = Frame::new(image, leaves, h).unwrap();
        let prepared = prepare(&[&frame], &PipelineConfig::default()).unwrap();
        (frame, prepared)
    }

    #[test]
    fn four_leaf_clusters() {
        let (_, p) = four_leaf();
        let c = extract_clusters(&p.vars, &[1, 1, 1, 1, 0]).unwrap();
        assert_eq!(c, vec![vec![0, 1, 2, 2]]);
        assert_eq!(extract_clusters(&p.vars, &[1; 5]).unwrap(), vec![vec![0, 1, 2, 3]]);
        assert_eq!(extract_clusters(&p.vars, &[0; 5]).unwrap(), vec![vec![0; 4]]);
    }

    #[test]
    fn default_schedule() {
        let s = Schedule::default();
        assert_eq!(s.len(), 30);
        assert!((s.levels()[0].t - 0.40).abs() < 1e-12);
        assert!((s.levels()[29].t - 0.10).abs() < 1e-12);
        assert!(Schedule::new(vec![Level { t: 0.2, beta: 0.1 }, Level { t: 0.3, beta: 0.1 }]).is_err());
    }

    #[test]
    fn unconstrained_level() {
        let (frame, _) = four_leaf();
        let out = cocluster(&[frame], Level { t: 1.0, beta: 1.0 }, &PipelineConfig::default()).unwrap();
        let s = out.solution().unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert_eq!(realized_assignment(&prepare_one(), &s.clusters), s.assignment);
    }

    fn prepare_one() -> BoundaryVariableSet {
        four_leaf().1.vars
    }
}
