//! Bounded-variable revised primal simplex.
//!
//! Pricing is Dantzig's rule, switching to Bland's rule after a run of
//! degenerate pivots. The basis inverse is kept explicitly (dense,
//! product-form updates; refactored periodically in floating point). Phase 1
//! minimizes the sum of artificial variables; phase 2 keeps the artificials
//! with bounds `[0, 0]`.

use super::scalar::Scalar;

#[derive(Debug, Clone)]
pub(crate) struct Row<S> {
    pub terms: Vec<(usize, S)>,
    pub rhs: S,
    pub equality: bool,
}

/// `min cᵀx` s.t. rows, `lower ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub(crate) struct Model<S> {
    pub cost: Vec<S>,
    pub lower: Vec<S>,
    pub upper: Vec<S>,
    pub rows: Vec<Row<S>>,
}

#[derive(Debug, Clone)]
pub(crate) enum LpOutcome<S> {
    Optimal { x: Vec<S>, objective: S },
    /// Row of the first artificial that stays positive after phase 1.
    Infeasible { row: usize },
    IterationLimit,
}

struct State<S> {
    columns: Vec<Vec<(usize, S)>>,
    lower: Vec<S>,
    upper: Vec<Option<S>>,
    rhs: Vec<S>,
    x: Vec<S>,
    at_upper: Vec<bool>,
    basis: Vec<usize>,
    in_basis: Vec<Option<usize>>,
    binv: Vec<Vec<S>>,
    iterations: usize,
    degenerate_run: usize,
}

enum Step {
    Optimal,
    Pivoted,
    Unbounded,
}

const REFRESH_EVERY: usize = 64;
const BLAND_AFTER: usize = 16;

impl<S: Scalar> State<S> {
    fn reduced_cost(&self, j: usize, cost: &[S], y: &[S]) -> S {
        let mut d = cost[j].clone();
        for (r, a) in &self.columns[j] {
            if !y[*r].is_zero_tol() || S::EXACT {
                d = d.sub(&y[*r].mul(a));
            }
        }
        d
    }

    fn duals(&self, cost: &[S]) -> Vec<S> {
        let m = self.basis.len();
        let mut y = vec![S::zero(); m];
        for (i, &b) in self.basis.iter().enumerate() {
            if cost[b].sign() == 0 && (S::EXACT || cost[b].to_f64() == 0.0) {
                continue;
            }
            for (k, v) in self.binv[i].iter().enumerate() {
                if v.sign() != 0 {
                    y[k] = y[k].add(&cost[b].mul(v));
                }
            }
        }
        y
    }

    fn direction(&self, j: usize) -> Vec<S> {
        let m = self.basis.len();
        let mut alpha = vec![S::zero(); m];
        for (i, a) in alpha.iter_mut().enumerate() {
            let row = &self.binv[i];
            let mut acc = S::zero();
            for (r, c) in &self.columns[j] {
                if row[*r].sign() != 0 {
                    acc = acc.add(&row[*r].mul(c));
                }
            }
            *a = acc;
        }
        alpha
    }

    /// Recomputes basic values from the nonbasic ones.
    fn refresh(&mut self) {
        let m = self.basis.len();
        let mut resid = self.rhs.clone();
        for (j, col) in self.columns.iter().enumerate() {
            if self.in_basis[j].is_some() || self.x[j].sign() == 0 {
                continue;
            }
            for (r, a) in col {
                resid[*r] = resid[*r].sub(&a.mul(&self.x[j]));
            }
        }
        for i in 0..m {
            let mut v = S::zero();
            for (k, b) in self.binv[i].iter().enumerate() {
                if b.sign() != 0 {
                    v = v.add(&b.mul(&resid[k]));
                }
            }
            self.x[self.basis[i]] = v;
        }
    }

    /// Recomputes the basis inverse by Gauss-Jordan elimination with partial
    /// pivoting. Keeps the current inverse if the basis looks singular.
    fn refactor(&mut self) {
        let m = self.basis.len();
        let mut a = vec![vec![0.0f64; 2 * m]; m];
        for (i, &b) in self.basis.iter().enumerate() {
            for (r, v) in &self.columns[b] {
                a[*r][i] = v.to_f64();
            }
        }
        for (r, row) in a.iter_mut().enumerate() {
            row[m + r] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
                .expect("non-empty range");
            if a[p][c].abs() < 1e-12 {
                return;
            }
            a.swap(c, p);
            let inv = 1.0 / a[c][c];
            a[c].iter_mut().for_each(|v| *v *= inv);
            let pivot_row = a[c].clone();
            for (r, row) in a.iter_mut().enumerate() {
                let f = row[c];
                if r == c || f == 0.0 {
                    continue;
                }
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
        // rows of [B | I] reduced to [I | B⁻¹]: row i is basic position i
        for (i, row) in a.iter().enumerate() {
            for k in 0..m {
                self.binv[i][k] = S::from_f64(row[m + k]);
            }
        }
    }

    fn step(&mut self, cost: &[S]) -> Step {
        let y = self.duals(cost);
        let bland = self.degenerate_run >= BLAND_AFTER;
        let mut entering: Option<(usize, i8)> = None;
        let mut best_d = 0.0;
        for j in 0..self.columns.len() {
            if self.in_basis[j].is_some() {
                continue;
            }
            if let Some(u) = &self.upper[j] {
                if !self.lower[j].lt(u) {
                    continue; // fixed
                }
            }
            let d = self.reduced_cost(j, cost, &y);
            let dir = match d.sign() {
                s if s < 0 && !self.at_upper[j] => 1i8,
                s if s > 0 && self.at_upper[j] => -1i8,
                _ => continue,
            };
            if bland {
                entering = Some((j, dir));
                break;
            }
            let mag = d.to_f64().abs();
            if entering.is_none() || mag > best_d {
                entering = Some((j, dir));
                best_d = mag;
            }
        }
        let Some((j, dir)) = entering else {
            return Step::Optimal;
        };
        let alpha = self.direction(j);

        // ratio test; ties go to the smallest column index under Bland's
        // rule, otherwise to the largest pivot
        let mut best: Option<(S, usize, Option<usize>, bool, f64)> = None;
        let mut consider = |t: S, col: usize, row: Option<usize>, to_upper: bool, pivot: f64| {
            let t = if t.sign() < 0 { S::zero() } else { t };
            let replace = match &best {
                None => true,
                Some((bt, bcol, _, _, bp)) => {
                    t.lt(bt)
                        || (t.approx_eq(bt)
                            && if bland { col < *bcol } else { pivot > *bp || (pivot == *bp && col < *bcol) })
                }
            };
            if replace {
                best = Some((t, col, row, to_upper, pivot));
            }
        };
        if let Some(u) = &self.upper[j] {
            consider(u.sub(&self.lower[j]), j, None, !self.at_upper[j], f64::INFINITY);
        }
        for (i, a) in alpha.iter().enumerate() {
            if a.sign() == 0 {
                continue;
            }
            let b = self.basis[i];
            let rate = if dir > 0 { a.clone() } else { a.neg() };
            let pivot = a.to_f64().abs();
            if rate.sign() > 0 {
                consider(self.x[b].sub(&self.lower[b]).div(&rate), b, Some(i), false, pivot);
            } else if let Some(u) = &self.upper[b] {
                consider(u.sub(&self.x[b]).div(&rate.neg()), b, Some(i), true, pivot);
            }
        }
        let Some((t, _, row, to_upper, _)) = best else {
            return Step::Unbounded;
        };
        if t.sign() == 0 {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }

        let signed_t = if dir > 0 { t.clone() } else { t.neg() };
        if signed_t.sign() != 0 || S::EXACT {
            self.x[j] = self.x[j].add(&signed_t);
            for (i, a) in alpha.iter().enumerate() {
                if a.sign() != 0 {
                    let b = self.basis[i];
                    self.x[b] = self.x[b].sub(&signed_t.mul(a));
                }
            }
        }
        match row {
            None => {
                self.at_upper[j] = to_upper;
                self.x[j] = if to_upper {
                    self.upper[j].clone().expect("flip needs an upper bound")
                } else {
                    self.lower[j].clone()
                };
            }
            Some(r) => {
                let leaving = self.basis[r];
                self.x[leaving] = if to_upper {
                    self.upper[leaving].clone().expect("bounded leaving variable")
                } else {
                    self.lower[leaving].clone()
                };
                self.at_upper[leaving] = to_upper;
                self.in_basis[leaving] = None;
                self.basis[r] = j;
                self.in_basis[j] = Some(r);
                self.at_upper[j] = false;

                let pivot = alpha[r].clone();
                let prow: Vec<S> = self.binv[r].iter().map(|v| v.div(&pivot)).collect();
                for (i, a) in alpha.iter().enumerate() {
                    if i == r || a.sign() == 0 {
                        continue;
                    }
                    let row = &mut self.binv[i];
                    for (k, p) in prow.iter().enumerate() {
                        if p.sign() != 0 {
                            row[k] = row[k].sub(&a.mul(p));
                        }
                    }
                }
                self.binv[r] = prow;
            }
        }
        self.iterations += 1;
        if !S::EXACT && self.iterations % REFRESH_EVERY == 0 {
            self.refactor();
            self.refresh();
        }
        Step::Pivoted
    }

    fn run(&mut self, cost: &[S], limit: usize) -> Option<bool> {
        loop {
            if self.iterations >= limit {
                return None;
            }
            match self.step(cost) {
                Step::Optimal => return Some(true),
                Step::Unbounded => return Some(false),
                Step::Pivoted => {}
            }
        }
    }
}

pub(crate) fn solve<S: Scalar>(model: &Model<S>, iteration_limit: usize) -> LpOutcome<S> {
    let n = model.cost.len();
    let m = model.rows.len();
    let mut columns: Vec<Vec<(usize, S)>> = vec![Vec::new(); n];
    for (i, row) in model.rows.iter().enumerate() {
        for (j, a) in &row.terms {
            columns[*j].push((i, a.clone()));
        }
    }
    let mut lower = model.lower.clone();
    let mut upper: Vec<Option<S>> = model.upper.iter().cloned().map(Some).collect();
    let mut x = model.lower.clone();
    let rhs: Vec<S> = model.rows.iter().map(|r| r.rhs.clone()).collect();

    // slacks
    for (i, row) in model.rows.iter().enumerate() {
        columns.push(vec![(i, one::<S>())]);
        lower.push(S::zero());
        upper.push(if row.equality { Some(S::zero()) } else { None });
        x.push(S::zero());
    }
    let mut basis = vec![0; m];
    let mut binv = vec![vec![S::zero(); m]; m];
    let mut artificials = Vec::new();
    for (i, row) in model.rows.iter().enumerate() {
        let mut r = row.rhs.clone();
        for (j, a) in &row.terms {
            r = r.sub(&a.mul(&model.lower[*j]));
        }
        if !row.equality && r.sign() >= 0 {
            basis[i] = n + i;
            x[n + i] = r;
            binv[i][i] = one();
        } else {
            let sigma = if r.sign() >= 0 { one::<S>() } else { one::<S>().neg() };
            let col = columns.len();
            columns.push(vec![(i, sigma.clone())]);
            lower.push(S::zero());
            upper.push(None);
            x.push(if r.sign() >= 0 { r } else { r.neg() });
            basis[i] = col;
            binv[i][i] = sigma;
            artificials.push((col, i));
        }
    }
    let total = columns.len();
    let mut in_basis = vec![None; total];
    for (i, &b) in basis.iter().enumerate() {
        in_basis[b] = Some(i);
    }
    let mut state = State {
        columns,
        lower,
        upper,
        rhs,
        x,
        at_upper: vec![false; total],
        basis,
        in_basis,
        binv,
        iterations: 0,
        degenerate_run: 0,
    };

    if !artificials.is_empty() {
        let mut phase1 = vec![S::zero(); total];
        for &(col, _) in &artificials {
            phase1[col] = one();
        }
        match state.run(&phase1, iteration_limit) {
            None => return LpOutcome::IterationLimit,
            Some(false) => unreachable!("phase 1 objective is bounded below"),
            Some(true) => {}
        }
        if !S::EXACT {
            state.refresh();
        }
        if let Some(&(_, row)) = artificials
            .iter()
            .find(|(col, _)| state.x[*col].sign() > 0)
        {
            return LpOutcome::Infeasible { row };
        }
        for &(col, _) in &artificials {
            state.upper[col] = Some(S::zero());
            if state.in_basis[col].is_none() {
                state.x[col] = S::zero();
                state.at_upper[col] = false;
            }
        }
    }

    let mut cost = model.cost.clone();
    cost.resize(total, S::zero());
    match state.run(&cost, iteration_limit) {
        None => return LpOutcome::IterationLimit,
        Some(false) => unreachable!("all structural variables are bounded"),
        Some(true) => {}
    }
    if !S::EXACT {
        state.refresh();
    }
    let x: Vec<S> = (0..n)
        .map(|j| {
            let v = state.x[j].clone();
            if S::EXACT {
                v
            } else {
                // snap float drift back inside the bounds
                let lo = model.lower[j].to_f64();
                let hi = model.upper[j].to_f64();
                S::from_f64(v.to_f64().clamp(lo, hi))
            }
        })
        .collect();
    let objective = x
        .iter()
        .zip(&model.cost)
        .fold(S::zero(), |acc, (v, c)| acc.add(&v.mul(c)));
    LpOutcome::Optimal { x, objective }
}

fn one<S: Scalar>() -> S {
    S::from_f64(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn r(v: i64) -> BigRational {
        BigRational::from_integer(v.into())
    }

    #[test]
    fn small_lp_exact() {
        // min -x - y s.t. x + y <= 1.5, 0 <= x, y <= 1
        let model = Model {
            cost: vec![r(-1), r(-1)],
            lower: vec![r(0), r(0)],
            upper: vec![r(1), r(1)],
            rows: vec![Row {
                terms: vec![(0, r(1)), (1, r(1))],
                rhs: BigRational::new(3.into(), 2.into()),
                equality: false,
            }],
        };
        match solve(&model, 1000) {
            LpOutcome::Optimal { objective, .. } => {
                assert_eq!(objective, BigRational::new((-3).into(), 2.into()))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_equality_pair() {
        let model = Model {
            cost: vec![0.0],
            lower: vec![0.0],
            upper: vec![1.0],
            rows: vec![
                Row {
                    terms: vec![(0, 1.0)],
                    rhs: 0.0,
                    equality: true,
                },
                Row {
                    terms: vec![(0, 1.0)],
                    rhs: 1.0,
                    equality: true,
                },
            ],
        };
        assert!(matches!(solve(&model, 1000), LpOutcome::Infeasible { .. }));
    }

    #[test]
    fn lower_bound_row_needs_phase_one() {
        // min x + y s.t. x + y >= 1 (as -x - y <= -1)
        let model = Model {
            cost: vec![1.0, 2.0],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            rows: vec![Row {
                terms: vec![(0, -1.0), (1, -1.0)],
                rhs: -1.0,
                equality: false,
            }],
        };
        match solve(&model, 1000) {
            LpOutcome::Optimal { x, objective } => {
                assert_eq!(x, vec![1.0, 0.0]);
                assert_eq!(objective, 1.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
