//! Linear constraint generators over boundary variables.
//!
//! * hierarchical intra constraints: per parent node, all sibling-crossing
//!   boundaries share one value, and a merged node forces its subtree merged;
//! * triangle constraints on 3-cliques that involve at least one inter edge;
//! * resolution band constraints on the (length-weighted) active intra mass;
//! * freeze constraints pinning previously published labelings.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::adjacency::{BoundaryVariableSet, NodeRef, VarKind};
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintKind {
    Equal,
    LessEqual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Provenance {
    IntraEqual,
    IntraSubtree,
    Triangle,
    BandLo,
    BandHi,
    FreezeSep,
    FreezeMerge,
    /// Cycle inequality added when a solution closes a cluster across an
    /// active boundary.
    Cycle,
    /// Constraints not produced by a generator (imported or hand-built).
    Other,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::IntraEqual => "intra-equal",
            Provenance::IntraSubtree => "intra-subtree",
            Provenance::Triangle => "triangle",
            Provenance::BandLo => "band-lo",
            Provenance::BandHi => "band-hi",
            Provenance::FreezeSep => "freeze-sep",
            Provenance::FreezeMerge => "freeze-merge",
            Provenance::Cycle => "cycle",
            Provenance::Other => "other",
        }
    }
}

/// `Σ coef·b (= | ≤) rhs`. Terms are sorted by variable id, unique and
/// nonzero.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearConstraint {
    pub kind: ConstraintKind,
    pub terms: Vec<(usize, Rational64)>,
    pub rhs: Rational64,
    pub provenance: Provenance,
}

impl LinearConstraint {
    pub fn new(
        kind: ConstraintKind,
        terms: impl IntoIterator<Item = (usize, Rational64)>,
        rhs: Rational64,
        provenance: Provenance,
    ) -> Self {
        let mut acc: BTreeMap<usize, Rational64> = BTreeMap::new();
        for (id, c) in terms {
            *acc.entry(id).or_insert_with(Rational64::zero) += c;
        }
        Self {
            kind,
            terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
            rhs,
            provenance,
        }
    }

    /// Integer-coefficient shorthand.
    pub fn int(
        kind: ConstraintKind,
        terms: impl IntoIterator<Item = (usize, i64)>,
        rhs: i64,
        provenance: Provenance,
    ) -> Self {
        Self::new(
            kind,
            terms.into_iter().map(|(id, c)| (id, Rational64::from_integer(c))),
            Rational64::from_integer(rhs),
            provenance,
        )
    }

    pub fn fix(id: usize, value: u8, provenance: Provenance) -> Self {
        Self::int(ConstraintKind::Equal, [(id, 1)], value as i64, provenance)
    }

    pub fn max_var(&self) -> Option<usize> {
        self.terms.last().map(|t| t.0)
    }

    pub fn activity(&self, assignment: &[u8]) -> Rational64 {
        self.terms
            .iter()
            .filter(|(id, _)| assignment[*id] != 0)
            .map(|(_, c)| *c)
            .sum()
    }

    /// Exact check of a 0/1 assignment.
    pub fn is_satisfied(&self, assignment: &[u8]) -> bool {
        let lhs = self.activity(assignment);
        match self.kind {
            ConstraintKind::Equal => lhs == self.rhs,
            ConstraintKind::LessEqual => lhs <= self.rhs,
        }
    }

    /// Check of a real-valued point with absolute tolerance.
    pub fn is_satisfied_approx(&self, values: &[f64], tol: f64) -> bool {
        let lhs: f64 = self
            .terms
            .iter()
            .map(|(id, c)| ratio_f64(c) * values[*id])
            .sum();
        let rhs = ratio_f64(&self.rhs);
        match self.kind {
            ConstraintKind::Equal => (lhs - rhs).abs() <= tol,
            ConstraintKind::LessEqual => lhs <= rhs + tol,
        }
    }
}

pub(crate) fn ratio_f64(r: &Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl fmt::Display for LinearConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, (id, c)) in self.terms.iter().enumerate() {
            let sign = if c.is_negative() { "-" } else if k > 0 { "+" } else { "" };
            let mag = c.abs();
            if k > 0 {
                write!(f, " ")?;
            }
            if mag.is_one() {
                write!(f, "{sign}b{id}")?;
            } else {
                write!(f, "{sign}{mag} b{id}")?;
            }
        }
        let op = match self.kind {
            ConstraintKind::Equal => "=",
            ConstraintKind::LessEqual => "<=",
        };
        write!(f, " {op} {}", self.rhs)
    }
}

/// Stable sort by provenance; generation order is kept within a provenance.
pub fn sort_constraints(constraints: &mut [LinearConstraint]) {
    constraints.sort_by_key(|c| c.provenance);
}

/// Cross (sibling-boundary) and inner (subtree) intra variables per parent
/// node, in ascending variable id order.
pub struct NodeBoundaries {
    pub node: usize,
    pub cross: Vec<usize>,
    pub inner: Vec<usize>,
}

pub fn node_boundaries(
    h: &Hierarchy,
    vars: &BoundaryVariableSet,
    image: usize,
) -> Result<Vec<NodeBoundaries>> {
    let regions = vars.graph(image).region_count;
    if regions != h.leaf_count() {
        return Err(Error::Dimension(format!(
            "hierarchy has {} leaves, image {image} has {regions} regions",
            h.leaf_count()
        )));
    }
    let mut cross: Vec<Vec<usize>> = vec![Vec::new(); h.node_count()];
    for id in vars.intra(image) {
        let v = vars.var(id);
        cross[h.lowest_common_ancestor(v.a.region, v.b.region)].push(id);
    }
    let mut below: Vec<Vec<usize>> = vec![Vec::new(); h.node_count()];
    let mut out = Vec::with_capacity(h.merges().len());
    for m in h.merges() {
        let mut inner: Vec<usize> = below[m.a]
            .iter()
            .chain(&below[m.b])
            .chain(&cross[m.a])
            .chain(&cross[m.b])
            .copied()
            .collect();
        inner.sort_unstable();
        below[m.parent] = inner.clone();
        out.push(NodeBoundaries {
            node: m.parent,
            cross: cross[m.parent].clone(),
            inner,
        });
    }
    Ok(out)
}

/// Hierarchical constraints of one image: chained equalities over the
/// sibling-crossing variables of every parent node, and
/// `Σ inner ≤ N_m · c_1` anchored on the smallest crossing variable.
pub fn intra_constraints(
    h: &Hierarchy,
    vars: &BoundaryVariableSet,
    image: usize,
) -> Result<Vec<LinearConstraint>> {
    let mut eqs = Vec::new();
    let mut subtree = Vec::new();
    for nb in node_boundaries(h, vars, image)? {
        for w in nb.cross.windows(2) {
            eqs.push(LinearConstraint::int(
                ConstraintKind::Equal,
                [(w[0], 1), (w[1], -1)],
                0,
                Provenance::IntraEqual,
            ));
        }
        if let (Some(&anchor), false) = (nb.cross.first(), nb.inner.is_empty()) {
            let n_m = nb.inner.len() as i64;
            subtree.push(LinearConstraint::int(
                ConstraintKind::LessEqual,
                nb.inner
                    .iter()
                    .map(|&id| (id, 1))
                    .chain(std::iter::once((anchor, -n_m))),
                0,
                Provenance::IntraSubtree,
            ));
        }
    }
    eqs.extend(subtree);
    Ok(eqs)
}

/// The 3-cliques of the combined adjacency graph with at least one inter
/// edge, nodes ascending.
pub fn mixed_cliques(vars: &BoundaryVariableSet) -> Vec<[NodeRef; 3]> {
    let adj = vars.neighbors();
    let mut out = Vec::new();
    for v in vars.vars() {
        let (x, y) = (v.a, v.b);
        let (nx, ny) = (&adj[&x], &adj[&y]);
        for &z in nx.range(y..).skip_while(|&&z| z == y) {
            if !ny.contains(&z) {
                continue;
            }
            if x.image == y.image && y.image == z.image {
                continue;
            }
            out.push([x, y, z]);
        }
    }
    out.sort();
    out
}

/// `b_xy ≤ b_xz + b_zy` for each edge of every mixed 3-clique.
pub fn triangle_constraints(vars: &BoundaryVariableSet) -> Vec<LinearConstraint> {
    let mut out = Vec::new();
    for [x, y, z] in mixed_cliques(vars) {
        let id = |p: NodeRef, q: NodeRef| vars.id_of(p, q).expect("clique edge is a variable");
        let (xy, xz, yz) = (id(x, y), id(x, z), id(y, z));
        for (lhs, r1, r2) in [(xy, xz, yz), (xz, xy, yz), (yz, xy, xz)] {
            out.push(LinearConstraint::int(
                ConstraintKind::LessEqual,
                [(lhs, 1), (r1, -1), (r2, -1)],
                0,
                Provenance::Triangle,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandWeighting {
    /// Each intra variable weighted by its shared boundary length.
    #[default]
    Length,
    /// Each intra variable counts once.
    Count,
}

/// Integer band `[⌈(t−β)·N_b⌉, ⌊t·N_b⌋]`. Products are snapped to the
/// nearest integer within 1e-9 so that decimal fractions like 0.4 behave as
/// written.
pub fn band_bounds(n_b: u64, t: f64, beta: f64) -> Result<(i64, i64)> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("resolution fraction {t} outside (0, 1]")));
    }
    if !(beta >= 0.0 && beta <= t + 1e-12) {
        return Err(Error::invalid(format!("beta {beta} outside [0, {t}]")));
    }
    let lo = ((t - beta) * n_b as f64 - 1e-9).ceil().max(0.0) as i64;
    let hi = (t * n_b as f64 + 1e-9).floor() as i64;
    Ok((lo, hi))
}

pub fn band_weight(vars: &BoundaryVariableSet, id: usize, weighting: BandWeighting) -> u64 {
    match weighting {
        BandWeighting::Length => vars.alpha(id) as u64,
        BandWeighting::Count => 1,
    }
}

/// Band-lo and band-hi constraints on the active intra mass of `image`.
pub fn band_constraints(
    vars: &BoundaryVariableSet,
    image: usize,
    t: f64,
    beta: f64,
    weighting: BandWeighting,
) -> Result<[LinearConstraint; 2]> {
    let ids = vars.intra(image);
    if ids.is_empty() {
        return Err(Error::invalid(format!("image {image} has no intra variables")));
    }
    let weights: Vec<(usize, i64)> = ids
        .map(|id| (id, band_weight(vars, id, weighting) as i64))
        .collect();
    let n_b: u64 = weights.iter().map(|w| w.1 as u64).sum();
    let (lo, hi) = band_bounds(n_b, t, beta)?;
    Ok([
        LinearConstraint::int(
            ConstraintKind::LessEqual,
            weights.iter().map(|&(id, w)| (id, -w)),
            -lo,
            Provenance::BandLo,
        ),
        LinearConstraint::int(
            ConstraintKind::LessEqual,
            weights.iter().copied(),
            hi,
            Provenance::BandHi,
        ),
    ])
}

/// Pins every variable whose endpoints both lie in frozen images: 0 when the
/// endpoints carried the same cluster label, 1 otherwise. `frozen` lists
/// `(image, label per region)`.
pub fn freeze_constraints(
    vars: &BoundaryVariableSet,
    frozen: &[(usize, &[usize])],
) -> Result<Vec<LinearConstraint>> {
    let mut labels: BTreeMap<usize, &[usize]> = BTreeMap::new();
    for &(image, l) in frozen {
        if image >= vars.image_count() {
            return Err(Error::invalid(format!("frozen image {image} not in variable set")));
        }
        let regions = vars.graph(image).region_count;
        if l.len() != regions {
            return Err(Error::Dimension(format!(
                "frozen labels for image {image} cover {} of {regions} regions",
                l.len()
            )));
        }
        labels.insert(image, l);
    }
    let mut sep = Vec::new();
    let mut merge = Vec::new();
    for (id, v) in vars.vars().iter().enumerate() {
        let (Some(la), Some(lb)) = (labels.get(&v.a.image), labels.get(&v.b.image)) else {
            continue;
        };
        if la[v.a.region] == lb[v.b.region] {
            merge.push(LinearConstraint::fix(id, 0, Provenance::FreezeMerge));
        } else {
            sep.push(LinearConstraint::fix(id, 1, Provenance::FreezeSep));
        }
    }
    sep.extend(merge);
    Ok(sep)
}

/// Count of mixed 3-cliques whose realized assignment has exactly one active
/// edge (the forbidden pattern).
pub fn triangle_violations(vars: &BoundaryVariableSet, assignment: &[u8]) -> usize {
    mixed_cliques(vars)
        .into_iter()
        .filter(|&[x, y, z]| {
            let b = |p, q| assignment[vars.id_of(p, q).expect("clique edge")];
            b(x, y) + b(x, z) + b(y, z) == 1
        })
        .count()
}

/// Convenience filter used by callers that only need intra variables.
pub fn is_intra(vars: &BoundaryVariableSet, id: usize) -> bool {
    vars.var(id).kind() == VarKind::Intra
}
