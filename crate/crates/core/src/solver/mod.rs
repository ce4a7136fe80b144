//! 0/1 minimization of `Σ q·b` under linear constraints.
//!
//! [`solve_relaxation`] solves the LP with `b ∈ [0, 1]`, [`solve_binary`]
//! finds an exact 0/1 optimum by best-first branch-and-bound and
//! [`brute_force`] enumerates all assignments for small problems.
//!
//! Small presolved problems are pivoted in exact rational arithmetic, larger
//! ones in floating point with a `1e-9` tolerance (see
//! [`SolverConfig::exact_limit`]).

mod bnb;
mod brute;
mod lp_format;
mod presolve;
mod scalar;
mod simplex;

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::constraints::LinearConstraint;
use crate::error::{Error, Result};

pub use brute::{brute_force, BRUTE_FORCE_MAX_VARS};
pub use lp_format::{read_lp, write_lp};
pub use scalar::exact_f64;

use presolve::{presolve, PresolveOutcome, VarMap};
use scalar::Scalar;
use simplex::LpOutcome;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
    pub fixed: BTreeMap<usize, u8>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            ..Self::default()
        }
    }

    pub fn with_constraints(mut self, constraints: impl IntoIterator<Item = LinearConstraint>) -> Self {
        self.constraints.extend(constraints);
        self
    }

    pub fn var_count(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.var_count();
        if let Some(q) = self.objective.iter().find(|q| !q.is_finite()) {
            return Err(Error::invalid(format!("objective coefficient {q} is not finite")));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if let Some(v) = c.max_var().filter(|&v| v >= n) {
                return Err(Error::invalid(format!(
                    "constraint {i} references b{v} but only {n} variables exist"
                )));
            }
        }
        for (&v, &val) in &self.fixed {
            if v >= n || val > 1 {
                return Err(Error::invalid(format!("bad fixing b{v} = {val}")));
            }
        }
        Ok(())
    }

    /// Exact `Σ q·b` of a 0/1 assignment.
    pub fn objective_exact(&self, assignment: &[u8]) -> BigRational {
        self.objective
            .iter()
            .zip(assignment)
            .filter(|(_, &b)| b != 0)
            .fold(<BigRational as Zero>::zero(), |acc, (q, _)| acc + exact_f64(*q))
    }

    /// Exact feasibility of a 0/1 assignment, including the fixed map.
    pub fn is_feasible(&self, assignment: &[u8]) -> bool {
        assignment.len() == self.var_count()
            && assignment.iter().all(|&b| b <= 1)
            && self.fixed.iter().all(|(&v, &val)| assignment[v] == val)
            && self.constraints.iter().all(|c| c.is_satisfied(assignment))
    }

    /// Index of the first violated constraint, if any.
    pub fn first_violation(&self, assignment: &[u8]) -> Option<usize> {
        self.constraints.iter().position(|c| !c.is_satisfied(assignment))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    IterationLimit,
    /// Branch-and-bound stopped early; the assignment is the best incumbent.
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub values: Vec<f64>,
    pub objective: f64,
    /// Exact objective when it is known exactly.
    pub exact_objective: Option<BigRational>,
    pub status: Status,
    /// Constraint index proving infeasibility.
    pub certificate_row: Option<usize>,
    /// Branch-and-bound nodes expanded.
    pub nodes: usize,
}

impl Solution {
    fn without_point(status: Status, certificate_row: Option<usize>) -> Self {
        Self {
            values: Vec::new(),
            objective: f64::INFINITY,
            exact_objective: None,
            status,
            certificate_row,
            nodes: 0,
        }
    }

    fn from_assignment(p: &LpProblem, assignment: &[u8], status: Status, nodes: usize) -> Self {
        let exact = p.objective_exact(assignment);
        Self {
            values: assignment.iter().map(|&b| b as f64).collect(),
            objective: ToPrimitive::to_f64(&exact).unwrap_or(f64::NAN),
            exact_objective: Some(exact),
            status,
            certificate_row: None,
            nodes,
        }
    }

    pub fn has_point(&self) -> bool {
        !self.values.is_empty() || matches!(self.status, Status::Optimal | Status::NodeLimit)
    }

    /// The point as 0/1 values when every entry is integral.
    pub fn assignment(&self) -> Option<Vec<u8>> {
        if !self.has_point() {
            return None;
        }
        self.values
            .iter()
            .map(|v| match v {
                v if *v == 0.0 => Some(0),
                v if *v == 1.0 => Some(1),
                _ => None,
            })
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.assignment().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Presolved problems with at most this many columns plus rows are
    /// pivoted in exact rational arithmetic.
    pub exact_limit: usize,
    pub iteration_limit: usize,
    pub node_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            exact_limit: 200,
            iteration_limit: 1_000_000,
            node_limit: 100_000,
        }
    }
}

pub(crate) enum Relaxed<S> {
    Optimal { x: Vec<S>, objective: S },
    Infeasible { row: usize },
    IterationLimit,
}

pub(crate) fn exact_costs(p: &LpProblem) -> Vec<BigRational> {
    p.objective.iter().map(|q| exact_f64(*q)).collect()
}

/// Presolve plus simplex; values are returned per original variable.
pub(crate) fn relax<S: Scalar>(
    p: &LpProblem,
    costs: &[BigRational],
    fixings: &BTreeMap<usize, u8>,
    integral: bool,
    iteration_limit: usize,
) -> Relaxed<S> {
    let reduced = match presolve(costs, &p.constraints, fixings, integral) {
        PresolveOutcome::Infeasible { row } => return Relaxed::Infeasible { row },
        PresolveOutcome::Reduced(r) => r,
    };
    let model = simplex::Model {
        cost: reduced.model.cost.iter().map(S::from_big).collect(),
        lower: reduced.model.lower.iter().map(S::from_big).collect(),
        upper: reduced.model.upper.iter().map(S::from_big).collect(),
        rows: reduced
            .model
            .rows
            .iter()
            .map(|r| simplex::Row {
                terms: r.terms.iter().map(|(j, a)| (*j, S::from_big(a))).collect(),
                rhs: S::from_big(&r.rhs),
                equality: r.equality,
            })
            .collect(),
    };
    match simplex::solve(&model, iteration_limit) {
        LpOutcome::IterationLimit => Relaxed::IterationLimit,
        LpOutcome::Infeasible { row } => Relaxed::Infeasible {
            row: reduced.origin[row],
        },
        LpOutcome::Optimal { x, objective } => {
            let values = reduced
                .map
                .iter()
                .map(|m| match m {
                    VarMap::Fixed(v) => S::from_big(v),
                    VarMap::Column(c) => x[*c].clone(),
                })
                .collect();
            Relaxed::Optimal {
                x: values,
                objective: objective.add(&S::from_big(&reduced.offset)),
            }
        }
    }
}

/// Whether the exact backend is used for this problem.
pub(crate) fn use_exact(p: &LpProblem, costs: &[BigRational], config: &SolverConfig) -> bool {
    match presolve(costs, &p.constraints, &p.fixed, false) {
        PresolveOutcome::Infeasible { .. } => true,
        PresolveOutcome::Reduced(r) => r.size() <= config.exact_limit,
    }
}

fn relaxed_solution<S: Scalar>(r: Relaxed<S>) -> Solution {
    match r {
        Relaxed::Infeasible { row } => Solution::without_point(Status::Infeasible, Some(row)),
        Relaxed::IterationLimit => Solution::without_point(Status::IterationLimit, None),
        Relaxed::Optimal { x, objective } => Solution {
            values: x.iter().map(|v| v.to_f64()).collect(),
            objective: objective.to_f64(),
            exact_objective: objective.to_exact(),
            status: Status::Optimal,
            certificate_row: None,
            nodes: 0,
        },
    }
}

/// Optimal basic solution of the LP relaxation.
pub fn solve_relaxation(p: &LpProblem, config: &SolverConfig) -> Result<Solution> {
    p.validate()?;
    let costs = exact_costs(p);
    let sol = if use_exact(p, &costs, config) {
        relaxed_solution(relax::<BigRational>(p, &costs, &p.fixed, false, config.iteration_limit))
    } else {
        relaxed_solution(relax::<f64>(p, &costs, &p.fixed, false, config.iteration_limit))
    };
    Ok(sol)
}

/// Exact 0/1 optimum by branch-and-bound.
pub fn solve_binary(p: &LpProblem, config: &SolverConfig) -> Result<Solution> {
    p.validate()?;
    let costs = exact_costs(p);
    if use_exact(p, &costs, config) {
        bnb::branch_and_bound::<BigRational>(p, &costs, config)
    } else {
        bnb::branch_and_bound::<f64>(p, &costs, config)
    }
}

/// Binary optimum of `p` plus every constraint in `pool`, adding pool rows
/// only once an optimum violates them. Returns the solution and the number
/// of pool rows that were added.
pub fn solve_binary_lazy(
    p: &LpProblem,
    pool: &[LinearConstraint],
    config: &SolverConfig,
) -> Result<(Solution, usize)> {
    let mut active = p.clone();
    let mut added = vec![false; pool.len()];
    let mut count = 0;
    loop {
        let sol = solve_binary(&active, config)?;
        let Some(assignment) = sol.assignment().filter(|_| sol.has_point()) else {
            return Ok((sol, count));
        };
        let before = count;
        for (k, c) in pool.iter().enumerate() {
            if !added[k] && !c.is_satisfied(&assignment) {
                added[k] = true;
                active.constraints.push(c.clone());
                count += 1;
            }
        }
        if count == before {
            return Ok((sol, count));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{ConstraintKind, Provenance};

    #[test]
    fn single_free_variable() {
        let p = LpProblem::new(vec![-1.0]);
        let s = solve_relaxation(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.values, vec![1.0]);
        assert_eq!(s.objective, -1.0);
    }

    #[test]
    fn single_variable_pinned_to_zero() {
        let p = LpProblem::new(vec![-1.0]).with_constraints([LinearConstraint::fix(
            0,
            0,
            Provenance::Other,
        )]);
        let s = solve_relaxation(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn band_keeps_most_negative() {
        let p = LpProblem::new(vec![-1.0, -3.0, -2.0]).with_constraints([LinearConstraint::int(
            ConstraintKind::Equal,
            [(0, 1), (1, 1), (2, 1)],
            1,
            Provenance::BandHi,
        )]);
        let s = solve_binary(&p, &SolverConfig::default()).unwrap();
        assert_eq!(s.assignment().unwrap(), vec![0, 1, 0]);
        assert_eq!(s.objective, -3.0);
    }

    #[test]
    fn float_backend_agrees_with_exact() {
        let p = LpProblem::new(vec![0.5, -1.25, -2.0, 0.75]).with_constraints([
            LinearConstraint::int(ConstraintKind::LessEqual, [(1, 1), (2, 1)], 1, Provenance::Other),
            LinearConstraint::int(
                ConstraintKind::LessEqual,
                [(0, -1), (2, 1), (3, -1)],
                0,
                Provenance::Other,
            ),
        ]);
        let exact = solve_binary(&p, &SolverConfig::default()).unwrap();
        let float = solve_binary(
            &p,
            &SolverConfig {
                exact_limit: 0,
                ..SolverConfig::default()
            },
        )
        .unwrap();
        assert_eq!(exact.exact_objective, float.exact_objective);
        assert_eq!(exact.objective, brute_force(&p).unwrap().objective);
    }
}
