use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use num_rational::{BigRational, Rational64};
use num_traits::{Signed, Zero};

use super::scalar::Scalar;
use super::{relax, LpProblem, Relaxed, Solution, SolverConfig, Status};
use crate::constraints::{ConstraintKind, LinearConstraint};
use crate::error::{Error, Result};

struct Node<S> {
    bound: S,
    seq: usize,
    fixings: BTreeMap<usize, u8>,
    x: Vec<S>,
}

impl<S: Scalar> PartialEq for Node<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<S: Scalar> Eq for Node<S> {}
impl<S: Scalar> PartialOrd for Node<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<S: Scalar> Ord for Node<S> {
    // reversed: the heap pops the smallest bound, then the oldest node
    fn cmp(&self, other: &Self) -> Ordering {
        if self.bound.lt(&other.bound) {
            Ordering::Greater
        } else if other.bound.lt(&self.bound) {
            Ordering::Less
        } else {
            other.seq.cmp(&self.seq)
        }
    }
}

struct Incumbent<S> {
    assignment: Vec<u8>,
    exact: BigRational,
    value: S,
}

fn integral_point<S: Scalar>(x: &[S]) -> Option<Vec<u8>> {
    x.iter()
        .map(|v| {
            if !v.is_integer() {
                None
            } else if v.to_f64() > 0.5 {
                Some(1)
            } else {
                Some(0)
            }
        })
        .collect()
}

/// Most fractional variable, lowest id on ties.
fn branching_var<S: Scalar>(x: &[S]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in x.iter().enumerate() {
        if v.is_integer() {
            continue;
        }
        let f = v.to_f64();
        let dist = f.min(1.0 - f);
        if best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

pub(crate) fn branch_and_bound<S: Scalar>(
    p: &LpProblem,
    costs: &[BigRational],
    config: &SolverConfig,
) -> Result<Solution> {
    let root = match relax::<S>(p, costs, &p.fixed, false, config.iteration_limit) {
        Relaxed::Infeasible { row } => {
            return Ok(Solution::without_point(Status::Infeasible, Some(row)))
        }
        Relaxed::IterationLimit => return Ok(Solution::without_point(Status::IterationLimit, None)),
        Relaxed::Optimal { x, objective } => (x, objective),
    };
    let (root_x, root_bound) = root;
    if let Some(a) = integral_point(&root_x) {
        return finish(p, &a, Status::Optimal, 1, &root_bound);
    }

    let mut incumbent: Option<Incumbent<S>> = None;
    let offer = |incumbent: &mut Option<Incumbent<S>>, a: Vec<u8>| {
        if !p.is_feasible(&a) {
            return;
        }
        let exact = p.objective_exact(&a);
        if incumbent.as_ref().is_none_or(|inc| exact < inc.exact) {
            *incumbent = Some(Incumbent {
                value: S::from_big(&exact),
                assignment: a,
                exact,
            });
        }
    };
    let approx: Vec<f64> = root_x.iter().map(|v| v.to_f64()).collect();
    if let Some(a) = round_and_propagate(p, &p.fixed, &approx) {
        offer(&mut incumbent, a);
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(Node {
        bound: root_bound.clone(),
        seq,
        fixings: p.fixed.clone(),
        x: root_x,
    });
    let mut nodes = 0;
    let mut hit_limit = false;
    while let Some(node) = heap.pop() {
        if let Some(inc) = &incumbent {
            if !node.bound.lt(&inc.value) {
                break;
            }
        }
        if nodes >= config.node_limit {
            hit_limit = true;
            break;
        }
        nodes += 1;
        let Some(j) = branching_var(&node.x) else {
            continue;
        };
        for v in [0u8, 1] {
            let mut fixings = node.fixings.clone();
            fixings.insert(j, v);
            let (x, bound) = match relax::<S>(p, costs, &fixings, true, config.iteration_limit) {
                Relaxed::Infeasible { .. } => continue,
                Relaxed::IterationLimit => {
                    return Ok(Solution::without_point(Status::IterationLimit, None))
                }
                Relaxed::Optimal { x, objective } => (x, objective),
            };
            if let Some(inc) = &incumbent {
                if !bound.lt(&inc.value) {
                    continue;
                }
            }
            if let Some(a) = integral_point(&x) {
                offer(&mut incumbent, a);
                continue;
            }
            if nodes % 32 == 1 {
                let approx: Vec<f64> = x.iter().map(|v| v.to_f64()).collect();
                if let Some(a) = round_and_propagate(p, &fixings, &approx) {
                    offer(&mut incumbent, a);
                }
            }
            seq += 1;
            heap.push(Node {
                bound,
                seq,
                fixings,
                x,
            });
        }
    }
    match incumbent {
        None if hit_limit => Ok(Solution {
            nodes,
            ..Solution::without_point(Status::NodeLimit, None)
        }),
        None => Ok(Solution {
            nodes,
            ..Solution::without_point(Status::Infeasible, None)
        }),
        Some(inc) => {
            let status = if hit_limit { Status::NodeLimit } else { Status::Optimal };
            finish(p, &inc.assignment, status, nodes, &root_bound)
        }
    }
}

fn finish<S: Scalar>(
    p: &LpProblem,
    assignment: &[u8],
    status: Status,
    nodes: usize,
    root_bound: &S,
) -> Result<Solution> {
    if let Some(i) = p.first_violation(assignment) {
        return Err(Error::Internal(format!(
            "binary solution violates constraint {i}: {}",
            p.constraints[i]
        )));
    }
    let sol = Solution::from_assignment(p, assignment, status, nodes);
    let exact = sol.exact_objective.as_ref().expect("binary objective is exact");
    let violated = match root_bound.to_exact() {
        Some(b) => b > *exact,
        None => {
            let o = sol.objective;
            root_bound.to_f64() > o + 1e-6 * (1.0 + o.abs())
        }
    };
    if violated {
        return Err(Error::Internal(format!(
            "relaxation bound {} exceeds binary objective {}",
            root_bound.to_f64(),
            sol.objective
        )));
    }
    Ok(sol)
}

/// Rounds the most confident values first, propagating every choice through
/// the constraints; falls back to the opposite value on conflict.
pub(crate) fn round_and_propagate(
    p: &LpProblem,
    fixings: &BTreeMap<usize, u8>,
    x: &[f64],
) -> Option<Vec<u8>> {
    let n = p.var_count();
    let mut val: Vec<Option<u8>> = vec![None; n];
    for (&v, &b) in fixings.iter().chain(&p.fixed) {
        if val[v].is_some_and(|old| old != b) {
            return None;
        }
        val[v] = Some(b);
    }
    let watch = watch_lists(&p.constraints, n);
    if !propagate(&p.constraints, &watch, &mut val, 0..p.constraints.len()) {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let ca = (x[a] - 0.5).abs();
        let cb = (x[b] - 0.5).abs();
        cb.total_cmp(&ca).then(a.cmp(&b))
    });
    for j in order {
        if val[j].is_some() {
            continue;
        }
        let first = u8::from(x[j] > 0.5);
        let snapshot = val.clone();
        val[j] = Some(first);
        if propagate(&p.constraints, &watch, &mut val, watch[j].iter().copied()) {
            continue;
        }
        val = snapshot;
        val[j] = Some(1 - first);
        if !propagate(&p.constraints, &watch, &mut val, watch[j].iter().copied()) {
            return None;
        }
    }
    val.into_iter().collect()
}

fn watch_lists(constraints: &[LinearConstraint], n: usize) -> Vec<Vec<usize>> {
    let mut watch = vec![Vec::new(); n];
    for (i, c) in constraints.iter().enumerate() {
        for (v, _) in &c.terms {
            watch[*v].push(i);
        }
    }
    watch
}

/// Unit propagation over a partial 0/1 assignment; false on conflict.
fn propagate(
    constraints: &[LinearConstraint],
    watch: &[Vec<usize>],
    val: &mut [Option<u8>],
    start: impl IntoIterator<Item = usize>,
) -> bool {
    let mut queue: Vec<usize> = start.into_iter().collect();
    let mut queued = vec![false; constraints.len()];
    for &i in &queue {
        queued[i] = true;
    }
    while let Some(i) = queue.pop() {
        queued[i] = false;
        let c = &constraints[i];
        let mut forced = Vec::new();
        let sides: &[bool] = match c.kind {
            ConstraintKind::LessEqual => &[false],
            ConstraintKind::Equal => &[false, true],
        };
        for &negate in sides {
            let sign = if negate { -Rational64::from_integer(1) } else { Rational64::from_integer(1) };
            let rhs = c.rhs * sign;
            let mut minact = Rational64::zero();
            for (v, a) in &c.terms {
                let a = *a * sign;
                match val[*v] {
                    Some(b) => minact += a * Rational64::from_integer(b as i64),
                    None if a.is_negative() => minact += a,
                    None => {}
                }
            }
            if minact > rhs {
                return false;
            }
            for (v, a) in &c.terms {
                let a = *a * sign;
                if val[*v].is_none() && minact + a.abs() > rhs {
                    forced.push((*v, u8::from(a.is_negative())));
                }
            }
        }
        for (v, b) in forced {
            match val[v] {
                Some(old) if old != b => return false,
                Some(_) => {}
                None => {
                    val[v] = Some(b);
                    for &k in &watch[v] {
                        if !queued[k] {
                            queued[k] = true;
                            queue.push(k);
                        }
                    }
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Provenance;

    #[test]
    fn propagation_completes_band() {
        // b0 + b1 + b2 = 2 with b0 = 0 forces b1 = b2 = 1
        let p = LpProblem::new(vec![0.0; 3]).with_constraints([LinearConstraint::int(
            ConstraintKind::Equal,
            [(0, 1), (1, 1), (2, 1)],
            2,
            Provenance::Other,
        )]);
        let mut fix = BTreeMap::new();
        fix.insert(0, 0);
        let a = round_and_propagate(&p, &fix, &[0.0, 0.1, 0.2]).unwrap();
        assert_eq!(a, vec![0, 1, 1]);
    }

    #[test]
    fn branching_prefers_most_fractional() {
        assert_eq!(branching_var(&[0.0f64, 0.3, 0.5, 0.5]), Some(2));
        assert_eq!(branching_var(&[1.0f64, 0.0]), None);
    }
}
