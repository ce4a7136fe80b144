//! Solves a small 0/1 program three ways: LP relaxation, branch-and-bound
//! and exhaustive enumeration, then prints it in LP text format.

use hcocluster::constraints::{ConstraintKind, LinearConstraint, Provenance};
use hcocluster::solver::{brute_force, solve_binary, solve_relaxation, write_lp, LpProblem, SolverConfig};

fn main() -> hcocluster::Result<()> {
    // a triangle of boundaries: at most two active, never exactly one
    let le = |terms: Vec<(usize, i64)>, rhs| LinearConstraint::int(ConstraintKind::LessEqual, terms, rhs, Provenance::Other);
    let problem = LpProblem::new(vec![-1.5, -1.0, 0.75]).with_constraints([
        le(vec![(0, 1), (1, -1), (2, -1)], 0),
        le(vec![(0, -1), (1, 1), (2, -1)], 0),
        le(vec![(0, -1), (1, -1), (2, 1)], 0),
        le(vec![(0, 1), (1, 1), (2, 1)], 2),
    ]);
    let config = SolverConfig::default();
    let relaxed = solve_relaxation(&problem, &config)?;
    let binary = solve_binary(&problem, &config)?;
    let brute = brute_force(&problem)?;
    println!("relaxation:   {:?} objective {}", relaxed.values, relaxed.objective);
    println!("branch-bound: {:?} objective {} ({} nodes)", binary.assignment(), binary.objective, binary.nodes);
    println!("brute force:  {:?} objective {}", brute.assignment(), brute.objective);
    print!("{}", write_lp(&problem));
    Ok(())
}
