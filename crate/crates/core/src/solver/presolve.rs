//! Problem reduction ahead of the simplex: bound propagation, fixing,
//! aliasing of `x = y` equalities, redundant and duplicate row removal.

use std::collections::{BTreeMap, HashSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::simplex::{Model, Row};
use crate::constraints::{ConstraintKind, LinearConstraint};

#[derive(Debug, Clone)]
pub(crate) enum VarMap {
    Fixed(BigRational),
    Column(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Presolved {
    pub model: Model<BigRational>,
    /// Original constraint index per reduced row.
    pub origin: Vec<usize>,
    pub map: Vec<VarMap>,
    pub offset: BigRational,
}

impl Presolved {
    pub fn size(&self) -> usize {
        self.model.cost.len() + self.model.rows.len()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum PresolveOutcome {
    Reduced(Presolved),
    Infeasible { row: usize },
}

struct PRow {
    terms: BTreeMap<usize, BigRational>,
    rhs: BigRational,
    equality: bool,
    origin: usize,
}

struct Bounds {
    lo: Vec<BigRational>,
    hi: Vec<BigRational>,
    parent: Vec<usize>,
    integral: bool,
}

impl Bounds {
    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn fixed(&self, v: usize) -> bool {
        self.lo[v] == self.hi[v]
    }

    fn tighten_hi(&mut self, v: usize, bound: BigRational) -> Result<bool, ()> {
        let bound = if self.integral { bound.floor() } else { bound };
        if bound < self.hi[v] {
            if bound < self.lo[v] {
                return Err(());
            }
            self.hi[v] = bound;
            return Ok(true);
        }
        Ok(false)
    }

    fn tighten_lo(&mut self, v: usize, bound: BigRational) -> Result<bool, ()> {
        let bound = if self.integral { bound.ceil() } else { bound };
        if bound > self.lo[v] {
            if bound > self.hi[v] {
                return Err(());
            }
            self.lo[v] = bound;
            return Ok(true);
        }
        Ok(false)
    }
}

fn big(r: &num_rational::Rational64) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Continuous problems can creep towards a bound forever; cap the sweeps.
const MAX_PASSES: usize = 64;

pub(crate) fn presolve(
    cost: &[BigRational],
    constraints: &[LinearConstraint],
    fixed: &BTreeMap<usize, u8>,
    integral: bool,
) -> PresolveOutcome {
    let n = cost.len();
    let mut b = Bounds {
        lo: vec![BigRational::zero(); n],
        hi: vec![BigRational::one(); n],
        parent: (0..n).collect(),
        integral,
    };
    for (&v, &val) in fixed {
        let val = BigRational::from_integer(BigInt::from(val));
        b.lo[v] = val.clone();
        b.hi[v] = val;
    }
    let mut rows: Vec<PRow> = constraints
        .iter()
        .enumerate()
        .map(|(origin, c)| PRow {
            terms: c.terms.iter().map(|(v, a)| (*v, big(a))).collect(),
            rhs: big(&c.rhs),
            equality: c.kind == ConstraintKind::Equal,
            origin,
        })
        .collect();

    let mut passes = 0;
    loop {
        passes += 1;
        let mut changed = false;
        let mut kept = Vec::with_capacity(rows.len());
        for mut row in std::mem::take(&mut rows) {
            // substitute fixed variables and aliases
            let mut terms: BTreeMap<usize, BigRational> = BTreeMap::new();
            for (v, a) in std::mem::take(&mut row.terms) {
                let r = b.find(v);
                if b.fixed(r) {
                    row.rhs -= &a * &b.lo[r];
                } else {
                    *terms.entry(r).or_insert_with(BigRational::zero) += a;
                }
            }
            terms.retain(|_, a| !a.is_zero());
            row.terms = terms;

            let (minact, maxact) = activity_range(&row.terms, &b);
            if minact > row.rhs || (row.equality && maxact < row.rhs) {
                return PresolveOutcome::Infeasible { row: row.origin };
            }
            if row.terms.is_empty() || (!row.equality && maxact <= row.rhs) {
                continue;
            }
            if row.equality && row.terms.len() == 2 && row.rhs.is_zero() {
                let mut it = row.terms.iter();
                let (&x, ax) = it.next().unwrap();
                let (&y, ay) = it.next().unwrap();
                if ax == &-ay {
                    let lo = b.lo[x].clone().max(b.lo[y].clone());
                    let hi = b.hi[x].clone().min(b.hi[y].clone());
                    if lo > hi {
                        return PresolveOutcome::Infeasible { row: row.origin };
                    }
                    b.parent[y] = x;
                    b.lo[x] = lo;
                    b.hi[x] = hi;
                    changed = true;
                    continue;
                }
            }
            let origin = row.origin;
            let forward = propagate(&row.terms, &row.rhs, minact, &mut b);
            let backward = if row.equality {
                let neg: BTreeMap<usize, BigRational> =
                    row.terms.iter().map(|(v, a)| (*v, -a)).collect();
                propagate(&neg, &-&row.rhs, -maxact, &mut b)
            } else {
                Ok(false)
            };
            match (forward, backward) {
                (Err(()), _) | (_, Err(())) => return PresolveOutcome::Infeasible { row: origin },
                (Ok(f), Ok(g)) => changed |= f || g,
            }
            kept.push(row);
        }
        rows = kept;
        if !changed || passes >= MAX_PASSES {
            break;
        }
    }

    // final substitution so every row references live columns only
    let mut seen: HashSet<(bool, Vec<(usize, BigRational)>, BigRational)> = HashSet::new();
    let mut final_rows = Vec::new();
    for row in rows {
        let mut terms: BTreeMap<usize, BigRational> = BTreeMap::new();
        let mut rhs = row.rhs.clone();
        for (v, a) in row.terms {
            let r = b.find(v);
            if b.fixed(r) {
                rhs -= &a * &b.lo[r];
            } else {
                *terms.entry(r).or_insert_with(BigRational::zero) += a;
            }
        }
        terms.retain(|_, a| !a.is_zero());
        let (minact, maxact) = activity_range(&terms, &b);
        if minact > rhs || (row.equality && maxact < rhs) {
            return PresolveOutcome::Infeasible { row: row.origin };
        }
        if terms.is_empty() || (!row.equality && maxact <= rhs) {
            continue;
        }
        let key = (row.equality, terms.clone().into_iter().collect::<Vec<_>>(), rhs.clone());
        if seen.insert(key) {
            final_rows.push((terms, rhs, row.equality, row.origin));
        }
    }

    let mut map = Vec::with_capacity(n);
    let mut column_of = vec![usize::MAX; n];
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut model_cost: Vec<BigRational> = Vec::new();
    let mut offset = BigRational::zero();
    for v in 0..n {
        let r = b.find(v);
        if b.fixed(r) {
            offset += &cost[v] * &b.lo[r];
            map.push(VarMap::Fixed(b.lo[r].clone()));
            continue;
        }
        if column_of[r] == usize::MAX {
            column_of[r] = model_cost.len();
            model_cost.push(BigRational::zero());
            lower.push(b.lo[r].clone());
            upper.push(b.hi[r].clone());
        }
        let c = column_of[r];
        model_cost[c] += &cost[v];
        map.push(VarMap::Column(c));
    }
    let mut origin = Vec::with_capacity(final_rows.len());
    let rows = final_rows
        .into_iter()
        .map(|(terms, rhs, equality, o)| {
            origin.push(o);
            Row {
                terms: terms.into_iter().map(|(v, a)| (column_of[v], a)).collect(),
                rhs,
                equality,
            }
        })
        .collect();
    PresolveOutcome::Reduced(Presolved {
        model: Model {
            cost: model_cost,
            lower,
            upper,
            rows,
        },
        origin,
        map,
        offset,
    })
}

fn activity_range(terms: &BTreeMap<usize, BigRational>, b: &Bounds) -> (BigRational, BigRational) {
    let mut lo = BigRational::zero();
    let mut hi = BigRational::zero();
    for (v, a) in terms {
        if a.is_positive() {
            lo += a * &b.lo[*v];
            hi += a * &b.hi[*v];
        } else {
            lo += a * &b.hi[*v];
            hi += a * &b.lo[*v];
        }
    }
    (lo, hi)
}

/// Implied bounds from `Σ a·x ≤ rhs` given its minimum activity.
fn propagate(
    terms: &BTreeMap<usize, BigRational>,
    rhs: &BigRational,
    minact: BigRational,
    b: &mut Bounds,
) -> Result<bool, ()> {
    let slack = rhs - &minact;
    let mut changed = false;
    for (v, a) in terms {
        let v = *v;
        if b.fixed(v) {
            continue;
        }
        if a.is_positive() {
            let bound = &b.lo[v] + &slack / a;
            changed |= b.tighten_hi(v, bound)?;
        } else {
            let bound = &b.hi[v] + &slack / a;
            changed |= b.tighten_lo(v, bound)?;
        }
    }
    Ok(changed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Provenance;

    fn zero_cost(n: usize) -> Vec<BigRational> {
        vec![BigRational::zero(); n]
    }

    #[test]
    fn aliases_chain_equalities() {
        let cs = vec![
            LinearConstraint::int(ConstraintKind::Equal, [(0, 1), (1, -1)], 0, Provenance::Other),
            LinearConstraint::int(ConstraintKind::Equal, [(1, 1), (2, -1)], 0, Provenance::Other),
        ];
        let PresolveOutcome::Reduced(p) = presolve(&zero_cost(3), &cs, &BTreeMap::new(), true)
        else {
            panic!("feasible");
        };
        assert_eq!(p.model.cost.len(), 1);
        assert!(p.model.rows.is_empty());
    }

    #[test]
    fn conflicting_fixings_report_row() {
        let cs = vec![
            LinearConstraint::fix(0, 0, Provenance::Other),
            LinearConstraint::fix(0, 1, Provenance::Other),
        ];
        match presolve(&zero_cost(1), &cs, &BTreeMap::new(), false) {
            PresolveOutcome::Infeasible { row } => assert_eq!(row, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn integral_rounding_forces_values() {
        // 2x <= 1 forces x = 0 over the integers but not over the reals
        let cs = vec![LinearConstraint::int(
            ConstraintKind::LessEqual,
            [(0, 2)],
            1,
            Provenance::Other,
        )];
        let PresolveOutcome::Reduced(p) = presolve(&zero_cost(1), &cs, &BTreeMap::new(), true)
        else {
            panic!()
        };
        assert!(matches!(p.map[0], VarMap::Fixed(ref v) if v.is_zero()));
        let PresolveOutcome::Reduced(p) = presolve(&zero_cost(1), &cs, &BTreeMap::new(), false)
        else {
            panic!()
        };
        assert_eq!(p.model.upper[0], BigRational::new(1.into(), 2.into()));
    }
}
