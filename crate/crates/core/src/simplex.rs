//! Dense two-phase simplex with Bland's rule, for the small programs that
//! stencil decomposition produces (tens of variables, under ten rows).

use crate::scalar::Real;

/// `maximize c·x  subject to  A x = b, x ≥ 0`.
#[derive(Clone, Debug)]
pub struct LinearProgram<T> {
    num_vars: usize,
    objective: Vec<T>,
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpSolution<T> {
    Optimal { x: Vec<T>, objective: T },
    Infeasible,
    Unbounded,
    IterationLimit,
}

const MAX_PIVOTS: usize = 100_000;

impl<T: Real> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, objective: vec![T::zero(); num_vars], rows: Vec::new(), rhs: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn set_objective(&mut self, c: Vec<T>) {
        assert_eq!(c.len(), self.num_vars);
        self.objective = c;
    }

    pub fn add_equality(&mut self, coeffs: Vec<T>, rhs: T) {
        assert_eq!(coeffs.len(), self.num_vars);
        self.rows.push(coeffs);
        self.rhs.push(rhs);
    }

    /// Solves with pivot tolerance `tol`. Phase one declares infeasibility when
    /// the artificial mass exceeds `tol · (1 + max|b|)`.
    pub fn solve(&self, tol: T) -> LpSolution<T> {
        let m = self.rows.len();
        let n = self.num_vars;
        let width = n + m + 1;
        let rhs_col = n + m;

        let mut tab = vec![vec![T::zero(); width]; m];
        for i in 0..m {
            let flip = self.rhs[i] < T::zero();
            for j in 0..n {
                tab[i][j] = if flip { -self.rows[i][j] } else { self.rows[i][j] };
            }
            tab[i][n + i] = T::one();
            tab[i][rhs_col] = self.rhs[i].abs();
        }
        let mut basis: Vec<usize> = (n..n + m).collect();

        // Phase one: maximize -Σ artificials.
        let mut reduced = vec![T::zero(); width];
        for row in &tab {
            for j in 0..n {
                reduced[j] = reduced[j] + row[j];
            }
            reduced[rhs_col] = reduced[rhs_col] + row[rhs_col];
        }
        match run_simplex(&mut tab, &mut basis, &mut reduced, n, tol) {
            Ok(()) => {}
            Err(Stop::Unbounded) => unreachable!("phase one is bounded"),
            Err(Stop::Limit) => return LpSolution::IterationLimit,
        }
        let bmax = self.rhs.iter().fold(T::zero(), |a, &b| a.max(b.abs()));
        let infeasibility = reduced[rhs_col];
        if infeasibility > tol * (T::one() + bmax) {
            return LpSolution::Infeasible;
        }

        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.len() {
            if basis[i] >= n {
                match (0..n).find(|&j| tab[i][j].abs() > tol) {
                    Some(q) => {
                        pivot(&mut tab, &mut reduced, i, q);
                        basis[i] = q;
                        i += 1;
                    }
                    None => {
                        tab.remove(i);
                        basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }

        // Phase two.
        let mut reduced = vec![T::zero(); width];
        reduced[..n].copy_from_slice(&self.objective);
        let mut value = T::zero();
        for (row, &b) in tab.iter().zip(&basis) {
            let cb = self.objective[b];
            if cb != T::zero() {
                for j in 0..n {
                    reduced[j] = reduced[j] - cb * row[j];
                }
                value = value + cb * row[rhs_col];
            }
        }
        reduced[rhs_col] = -value;
        match run_simplex(&mut tab, &mut basis, &mut reduced, n, tol) {
            Ok(()) => {}
            Err(Stop::Unbounded) => return LpSolution::Unbounded,
            Err(Stop::Limit) => return LpSolution::IterationLimit,
        }

        let mut x = vec![T::zero(); n];
        for (row, &b) in tab.iter().zip(&basis) {
            x[b] = row[rhs_col].max(T::zero());
        }
        let objective = self.objective.iter().zip(&x).map(|(&c, &v)| c * v).sum();
        LpSolution::Optimal { x, objective }
    }
}

enum Stop {
    Unbounded,
    Limit,
}

/// Maximizes over columns `0..allowed` given a canonical tableau.
/// `reduced[rhs]` holds minus the current objective value.
fn run_simplex<T: Real>(
    tab: &mut [Vec<T>],
    basis: &mut [usize],
    reduced: &mut [T],
    allowed: usize,
    tol: T,
) -> Result<(), Stop> {
    let rhs_col = reduced.len() - 1;
    for _ in 0..MAX_PIVOTS {
        // Bland: lowest-index improving column.
        let Some(q) = (0..allowed).find(|&j| reduced[j] > tol) else {
            return Ok(());
        };
        let mut leave: Option<(usize, T)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[q] > tol {
                let ratio = row[rhs_col] / row[q];
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((p, best)) => {
                        let slack = tol * (T::one() + best.abs());
                        if ratio < best - slack
                            || ((ratio - best).abs() <= slack && basis[i] < basis[p])
                        {
                            Some((i, ratio))
                        } else {
                            Some((p, best))
                        }
                    }
                };
            }
        }
        let Some((p, _)) = leave else {
            return Err(Stop::Unbounded);
        };
        pivot(tab, reduced, p, q);
        basis[p] = q;
    }
    Err(Stop::Limit)
}

fn pivot<T: Real>(tab: &mut [Vec<T>], reduced: &mut [T], p: usize, q: usize) {
    let piv = tab[p][q];
    for v in tab[p].iter_mut() {
        *v = *v / piv;
    }
    tab[p][q] = T::one();
    let prow = tab[p].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == p {
            continue;
        }
        let f = row[q];
        if f != T::zero() {
            for (v, &pv) in row.iter_mut().zip(&prow) {
                *v = *v - f * pv;
            }
            row[q] = T::zero();
        }
    }
    let f = reduced[q];
    if f != T::zero() {
        for (v, &pv) in reduced.iter_mut().zip(&prow) {
            *v = *v - f * pv;
        }
        reduced[q] = T::zero();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], rows: &[(&[f64], f64)]) -> LinearProgram<f64> {
        let mut lp = LinearProgram::new(c.len());
        lp.set_objective(c.to_vec());
        for (a, b) in rows {
            lp.add_equality(a.to_vec(), *b);
        }
        lp
    }

    #[test]
    fn textbook_optimum() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 (slacks s1..s3): optimum (2, 6), value 36
        let p = lp(
            &[3.0, 5.0, 0.0, 0.0, 0.0],
            &[
                (&[1.0, 0.0, 1.0, 0.0, 0.0], 4.0),
                (&[0.0, 2.0, 0.0, 1.0, 0.0], 12.0),
                (&[3.0, 2.0, 0.0, 0.0, 1.0], 18.0),
            ],
        );
        match p.solve(1e-10) {
            LpSolution::Optimal { x, objective } => {
                assert!((objective - 36.0).abs() < 1e-12);
                assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn detects_infeasible() {
        // x + y = -1 with x, y ≥ 0
        let p = lp(&[0.0, 0.0], &[(&[1.0, 1.0], -1.0)]);
        assert_eq!(p.solve(1e-10), LpSolution::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // max x subject to x - y = 1
        let p = lp(&[1.0, 0.0], &[(&[1.0, -1.0], 1.0)]);
        assert_eq!(p.solve(1e-10), LpSolution::Unbounded);
    }

    #[test]
    fn redundant_rows_are_dropped() {
        let p = lp(&[1.0, 1.0], &[(&[1.0, 1.0], 2.0), (&[2.0, 2.0], 4.0)]);
        match p.solve(1e-10) {
            LpSolution::Optimal { objective, .. } => assert!((objective - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_rhs_rows() {
        // -x = -3 → x = 3; max -x
        let p = lp(&[-1.0, 0.0], &[(&[-1.0, 0.0], -3.0)]);
        match p.solve(1e-10) {
            LpSolution::Optimal { x, .. } => assert_eq!(x[0], 3.0),
            other => panic!("{other:?}"),
        }
    }
}
