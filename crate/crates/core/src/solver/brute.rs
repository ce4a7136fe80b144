use num_rational::BigRational;

use super::{LpProblem, Solution, Status};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Exhaustive scan in lexicographic order (b0 most significant); the first
/// optimal assignment found is kept.
pub fn brute_force(p: &LpProblem) -> Result<Solution> {
    p.validate()?;
    let n = p.var_count();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::invalid(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_VARS} variables, got {n}"
        )));
    }
    let mut assignment = vec![0u8; n];
    let mut best: Option<(Vec<u8>, f64, BigRational)> = None;
    for code in 0u32..(1u32 << n) {
        for (k, b) in assignment.iter_mut().enumerate() {
            *b = ((code >> (n - 1 - k)) & 1) as u8;
        }
        if !p.is_feasible(&assignment) {
            continue;
        }
        let approx: f64 = p
            .objective
            .iter()
            .zip(&assignment)
            .filter(|(_, &b)| b != 0)
            .map(|(q, _)| q)
            .sum();
        let better = match &best {
            None => true,
            Some((_, best_approx, best_exact)) => {
                let scale = 1.0 + approx.abs().max(best_approx.abs());
                if approx < best_approx - 1e-6 * scale {
                    true
                } else if approx > best_approx + 1e-6 * scale {
                    false
                } else {
                    p.objective_exact(&assignment) < *best_exact
                }
            }
        };
        if better {
            let exact = p.objective_exact(&assignment);
            best = Some((assignment.clone(), approx, exact));
        }
    }
    Ok(match best {
        None => Solution::without_point(Status::Infeasible, None),
        Some((a, _, _)) => Solution::from_assignment(p, &a, Status::Optimal, 0),
    })
}
