//! Binary partition trees over leave partitions and their boundary encodings.
//!
//! Node ids `0..leaf_count` are leaves; the k-th merge creates node
//! `leaf_count + k`. A partition drawn from the tree (a [`TreeCut`]) is
//! encoded over the intra boundary variables of its image: `b_{m,n} = 0` iff
//! leaves `m` and `n` lie under the same selected node.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adjacency::{build_graph, BoundaryVariableSet};
use crate::descriptors::{region_histograms, ColorHistogram};
use crate::error::{Error, Result};
use crate::raster::{Image, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub parent: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hierarchy {
    leaf_count: usize,
    merges: Vec<Merge>,
    parent: Vec<Option<usize>>,
    leaves: Vec<Vec<usize>>,
}

impl Hierarchy {
    /// Builds a tree from child pairs; the k-th pair creates node
    /// `leaf_count + k`.
    pub fn from_pairs(leaf_count: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if leaf_count == 0 {
            return Err(Error::invalid("hierarchy needs at least one leaf"));
        }
        if pairs.len() + 1 != leaf_count {
            return Err(Error::invalid(format!(
                "a binary tree over {leaf_count} leaves needs {} merges, got {}",
                leaf_count - 1,
                pairs.len()
            )));
        }
        let total = 2 * leaf_count - 1;
        let mut parent = vec![None; total];
        let mut leaves: Vec<Vec<usize>> = (0..leaf_count).map(|l| vec![l]).collect();
        let mut merges = Vec::with_capacity(pairs.len());
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let p = leaf_count + k;
            for c in [a, b] {
                if c >= p {
                    return Err(Error::invalid(format!(
                        "merge {k} references node {c} before it exists"
                    )));
                }
                if parent[c].is_some() {
                    return Err(Error::invalid(format!("node {c} has two parents")));
                }
                parent[c] = Some(p);
            }
            if a == b {
                return Err(Error::invalid(format!("merge {k} joins node {a} with itself")));
            }
            let mut union: Vec<usize> = leaves[a].iter().chain(&leaves[b]).copied().collect();
            union.sort_unstable();
            leaves.push(union);
            merges.push(Merge { a, b, parent: p });
        }
        Ok(Self {
            leaf_count,
            merges,
            parent,
            leaves,
        })
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn node_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn root(&self) -> usize {
        self.node_count() - 1
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parent[node]
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.leaf_count)
            .map(|k| (self.merges[k].a, self.merges[k].b))
    }

    /// Leaves under `node`, ascending.
    pub fn leaves(&self, node: usize) -> &[usize] {
        &self.leaves[node]
    }

    /// Lowest node whose subtree contains both leaves.
    pub fn lowest_common_ancestor(&self, x: usize, y: usize) -> usize {
        let mut ancestors = BTreeSet::new();
        let mut cur = Some(x);
        while let Some(n) = cur {
            ancestors.insert(n);
            cur = self.parent[n];
        }
        let mut cur = y;
        loop {
            if ancestors.contains(&cur) {
                return cur;
            }
            cur = self.parent[cur].expect("nodes of one tree share the root");
        }
    }

    /// For each leaf, the node containing it after the first `step` merges.
    pub fn partition_at_step(&self, step: usize) -> Result<Vec<usize>> {
        if step >= self.leaf_count {
            return Err(Error::invalid(format!(
                "step {step} out of range 0..={}",
                self.leaf_count - 1
            )));
        }
        let mut owner: Vec<usize> = (0..self.leaf_count).collect();
        for m in &self.merges[..step] {
            for &l in &self.leaves[m.parent] {
                owner[l] = m.parent;
            }
        }
        Ok(owner)
    }

    pub fn to_json(&self) -> String {
        let file = HierarchyFile {
            leaf_count: self.leaf_count,
            merges: self
                .merges
                .iter()
                .map(|m| vec![m.a, m.b, m.parent])
                .collect(),
        };
        serde_json::to_string(&file).expect("plain data serializes")
    }

    /// Imports `{"leaf_count": N, "merges": [[c1, c2, ..., parent], ...]}`.
    /// Entries with more than two children are binarized by a left fold in
    /// listed order; parent ids may be arbitrary and are renumbered.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: HierarchyFile =
            serde_json::from_str(text).map_err(|e| Error::format("hierarchy", e.to_string()))?;
        let n = file.leaf_count;
        let mut remap: BTreeMap<usize, usize> = (0..n).map(|l| (l, l)).collect();
        let mut pairs = Vec::new();
        for (k, entry) in file.merges.iter().enumerate() {
            if entry.len() < 3 {
                return Err(Error::format(
                    format!("merges[{k}]"),
                    "expected at least two children and a parent",
                ));
            }
            let (children, parent) = entry.split_at(entry.len() - 1);
            let parent = parent[0];
            if remap.contains_key(&parent) {
                return Err(Error::format(
                    format!("merges[{k}]"),
                    format!("parent id {parent} already in use"),
                ));
            }
            let resolve = |c: usize| {
                remap.get(&c).copied().ok_or_else(|| {
                    Error::format(format!("merges[{k}]"), format!("unknown child id {c}"))
                })
            };
            let mut cur = resolve(children[0])?;
            for &c in &children[1..] {
                pairs.push((cur, resolve(c)?));
                cur = n + pairs.len() - 1;
            }
            remap.insert(parent, cur);
        }
        Self::from_pairs(n, &pairs)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Flat tree: leaves joined by a left fold in id order.
    pub fn left_fold(leaf_count: usize) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = (1..leaf_count)
            .map(|k| (if k == 1 { 0 } else { leaf_count + k - 2 }, k))
            .collect();
        Self::from_pairs(leaf_count, &pairs)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct HierarchyFile {
    leaf_count: usize,
    merges: Vec<Vec<usize>>,
}

/// Greedy region merging: repeatedly joins the adjacent pair with the largest
/// Bhattacharyya coefficient of their color histograms. Ties go to the
/// lexicographically smallest `(min id, max id)` pair.
pub fn build_bpt(image: &Image, leaves: &LabelMap) -> Result<Hierarchy> {
    if !leaves.same_grid(image.width(), image.height()) {
        return Err(Error::Dimension(format!(
            "image is {}x{}, leaves are {}x{}",
            image.width(),
            image.height(),
            leaves.width(),
            leaves.height()
        )));
    }
    let n = leaves.region_count();
    let mut hist: Vec<ColorHistogram> = region_histograms(image, leaves);
    let graph = build_graph(leaves, 0);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in graph.edges.keys() {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut scores: BTreeMap<(usize, usize), f64> = graph
        .edges
        .keys()
        .map(|&(a, b)| ((a, b), hist[a].coefficient(&hist[b])))
        .collect();
    let mut pairs = Vec::with_capacity(n.saturating_sub(1));
    while let Some((&(a, b), _)) = scores
        .iter()
        .fold(None, |best: Option<(&(usize, usize), &f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
    {
        let p = n + pairs.len();
        pairs.push((a, b));
        let merged = hist[a].merged(&hist[b]);
        hist.push(merged);
        adj.push(BTreeSet::new());
        let neighbors: BTreeSet<usize> = adj[a]
            .union(&adj[b])
            .copied()
            .filter(|&x| x != a && x != b)
            .collect();
        for x in [a, b] {
            for y in std::mem::take(&mut adj[x]) {
                adj[y].remove(&x);
                scores.remove(&(x.min(y), x.max(y)));
            }
        }
        for &x in &neighbors {
            adj[x].insert(p);
            adj[p].insert(x);
            scores.insert((x, p), hist[x].coefficient(&hist[p]));
        }
    }
    if pairs.len() + 1 != n {
        return Err(Error::Internal(
            "leave partition adjacency graph is disconnected".into(),
        ));
    }
    Hierarchy::from_pairs(n, &pairs)
}

/// A set of nodes whose leaf sets partition the leaves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeCut {
    nodes: BTreeSet<usize>,
}

impl TreeCut {
    pub fn new(h: &Hierarchy, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let nodes: BTreeSet<usize> = nodes.into_iter().collect();
        let mut covered = vec![false; h.leaf_count()];
        for &node in &nodes {
            if node >= h.node_count() {
                return Err(Error::invalid(format!("node {node} not in hierarchy")));
            }
            for &l in h.leaves(node) {
                if covered[l] {
                    return Err(Error::invalid(format!("leaf {l} covered twice")));
                }
                covered[l] = true;
            }
        }
        if let Some(l) = covered.iter().position(|c| !c) {
            return Err(Error::invalid(format!("leaf {l} not covered")));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &BTreeSet<usize> {
        &self.nodes
    }

    /// Selected node owning each leaf.
    pub fn owners(&self, h: &Hierarchy) -> Vec<usize> {
        let mut owner = vec![0; h.leaf_count()];
        for &node in &self.nodes {
            for &l in h.leaves(node) {
                owner[l] = node;
            }
        }
        owner
    }
}

/// Why an intra assignment is not the encoding of any tree cut.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutRejection {
    /// Parent node whose sibling-boundary constraint is violated.
    pub witness: usize,
    /// A merged leaf pair `(m, n)` straddling two selected nodes.
    pub edge: (usize, usize),
}

fn check_vars(h: &Hierarchy, vars: &BoundaryVariableSet, image: usize) -> Result<()> {
    if image >= vars.image_count() {
        return Err(Error::invalid(format!("image {image} not in variable set")));
    }
    let regions = vars.graph(image).region_count;
    if regions != h.leaf_count() {
        return Err(Error::Dimension(format!(
            "hierarchy has {} leaves, image {image} has {regions} regions",
            h.leaf_count()
        )));
    }
    Ok(())
}

fn encode_owners(vars: &BoundaryVariableSet, image: usize, owner: &[usize]) -> Vec<u8> {
    vars.intra(image)
        .map(|id| {
            let v = vars.var(id);
            u8::from(owner[v.a.region] != owner[v.b.region])
        })
        .collect()
}

/// Intra assignment of the merging-sequence partition after `step` merges.
pub fn merging_step_encoding(
    h: &Hierarchy,
    vars: &BoundaryVariableSet,
    image: usize,
    step: usize,
) -> Result<Vec<u8>> {
    check_vars(h, vars, image)?;
    Ok(encode_owners(vars, image, &h.partition_at_step(step)?))
}

pub fn cut_to_encoding(
    h: &Hierarchy,
    vars: &BoundaryVariableSet,
    image: usize,
    cut: &TreeCut,
) -> Result<Vec<u8>> {
    check_vars(h, vars, image)?;
    Ok(encode_owners(vars, image, &cut.owners(h)))
}

/// Decodes a full intra assignment into the tree cut it encodes, or rejects
/// it with the violated parent node.
pub fn encoding_to_cut(
    h: &Hierarchy,
    vars: &BoundaryVariableSet,
    image: usize,
    assignment: &[u8],
) -> Result<std::result::Result<TreeCut, CutRejection>> {
    check_vars(h, vars, image)?;
    let ids = vars.intra(image);
    if assignment.len() != ids.len() {
        return Err(Error::Dimension(format!(
            "assignment has {} entries, image {image} has {} intra variables",
            assignment.len(),
            ids.len()
        )));
    }
    if let Some(v) = assignment.iter().find(|&&v| v > 1) {
        return Err(Error::invalid(format!("non-binary value {v} in assignment")));
    }
    // active boundaries strictly inside each subtree
    let mut active_below = vec![0usize; h.node_count()];
    let mut lca = Vec::with_capacity(ids.len());
    for (k, id) in ids.clone().enumerate() {
        let v = vars.var(id);
        let node = h.lowest_common_ancestor(v.a.region, v.b.region);
        lca.push(node);
        active_below[node] += assignment[k] as usize;
    }
    for m in h.merges() {
        active_below[m.parent] += active_below[m.a] + active_below[m.b];
    }
    let mut selected = Vec::new();
    let mut stack = vec![h.root()];
    while let Some(node) = stack.pop() {
        match h.children(node) {
            Some((a, b)) if active_below[node] > 0 => {
                stack.push(a);
                stack.push(b);
            }
            _ => selected.push(node),
        }
    }
    let cut = TreeCut::new(h, selected)?;
    let owner = cut.owners(h);
    for (k, id) in ids.enumerate() {
        let v = vars.var(id);
        if assignment[k] == 0 && owner[v.a.region] != owner[v.b.region] {
            return Ok(Err(CutRejection {
                witness: lca[k],
                edge: (v.a.region, v.b.region),
            }));
        }
    }
    Ok(Ok(cut))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjacency::enumerate_variables;
    use crate::raster::parse_label_csv;

    pub(crate) const FOUR_LEAVES: &str = "1,1,2,2\n1,1,2,2\n3,3,3,2\n3,3,4,4\n";

    fn fixture() -> (Hierarchy, BoundaryVariableSet) {
        let leaves = parse_label_csv(FOUR_LEAVES).unwrap();
        let vars = enumerate_variables(vec![build_graph(&leaves, 0)], 20.0).unwrap();
        let h = Hierarchy::from_pairs(4, &[(0, 1), (2, 3), (4, 5)]).unwrap();
        (h, vars)
    }

    #[test]
    fn fixture_variable_order_matches_pairs() {
        let (_, vars) = fixture();
        let pairs: Vec<_> = vars
            .vars()
            .iter()
            .map(|v| (v.a.region + 1, v.b.region + 1))
            .collect();
        assert_eq!(pairs, vec![(1, 2), (1, 3), (2, 3), (2, 4), (3, 4)]);
    }

    #[test]
    fn step_encodings() {
        let (h, vars) = fixture();
        assert_eq!(merging_step_encoding(&h, &vars, 0, 0).unwrap(), vec![1; 5]);
        assert_eq!(
            merging_step_encoding(&h, &vars, 0, 1).unwrap(),
            vec![0, 1, 1, 1, 1]
        );
        assert_eq!(merging_step_encoding(&h, &vars, 0, 3).unwrap(), vec![0; 5]);
        assert!(merging_step_encoding(&h, &vars, 0, 4).is_err());
    }

    #[test]
    fn cut_round_trip_on_fixture() {
        let (h, vars) = fixture();
        let cut = TreeCut::new(&h, [0, 1, 5]).unwrap();
        assert_eq!(
            cut_to_encoding(&h, &vars, 0, &cut).unwrap(),
            vec![1, 1, 1, 1, 0]
        );
        let back = encoding_to_cut(&h, &vars, 0, &[1, 1, 1, 1, 0]).unwrap().unwrap();
        assert_eq!(back, cut);
    }

    #[test]
    fn inconsistent_assignment_names_root() {
        let (h, vars) = fixture();
        let rej = encoding_to_cut(&h, &vars, 0, &[0, 1, 0, 1, 1])
            .unwrap()
            .unwrap_err();
        assert_eq!(rej.witness, 6);
    }

    #[test]
    fn invalid_cuts_are_rejected() {
        let (h, _) = fixture();
        assert!(TreeCut::new(&h, [0, 4]).is_err());
        assert!(TreeCut::new(&h, [0, 1, 2]).is_err());
    }

    #[test]
    fn json_round_trip_and_binarization() {
        let (h, _) = fixture();
        assert_eq!(Hierarchy::from_json(&h.to_json()).unwrap(), h);
        let flat = Hierarchy::from_json(r#"{"leaf_count":3,"merges":[[0,1,2,9]]}"#).unwrap();
        assert_eq!(flat.merges().len(), 2);
        assert_eq!(flat.merges()[0], Merge { a: 0, b: 1, parent: 3 });
        assert_eq!(flat.merges()[1], Merge { a: 3, b: 2, parent: 4 });
        assert_eq!(flat, Hierarchy::left_fold(3).unwrap());
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(Hierarchy::from_json(r#"{"leaf_count":2,"merges":[[0,5,2]]}"#).is_err());
        assert!(Hierarchy::from_json(r#"{"leaf_count":3,"merges":[[0,1,3]]}"#).is_err());
    }

    #[test]
    fn single_region_is_a_one_node_tree() {
        let img = Image::filled(3, 3, [5, 5, 5]).unwrap();
        let leaves = parse_label_csv("0,0,0\n0,0,0\n0,0,0").unwrap();
        let h = build_bpt(&img, &leaves).unwrap();
        assert_eq!(h.node_count(), 1);
        assert_eq!(h.root(), 0);
    }

    #[test]
    fn two_regions_merge_into_node_two() {
        let img = Image::filled(2, 2, [5, 5, 5]).unwrap();
        let leaves = parse_label_csv("0,0\n1,1").unwrap();
        let h = build_bpt(&img, &leaves).unwrap();
        assert_eq!(h.merges(), &[Merge { a: 0, b: 1, parent: 2 }]);
    }

    #[test]
    fn bpt_dimension_mismatch_is_an_error() {
        let img = Image::filled(3, 2, [0, 0, 0]).unwrap();
        let leaves = parse_label_csv("0,0\n1,1").unwrap();
        assert!(build_bpt(&img, &leaves).is_err());
    }
}
