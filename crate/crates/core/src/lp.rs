//! Exact phase-1 simplex for small feasibility problems `A x = b, x >= 0`.
//!
//! Dense tableau over [`Rational`] with Bland's rule, so it terminates and
//! needs no tolerances.

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(Vec<Rational>),
    /// The minimum total infeasibility (sum of artificials) is positive.
    Infeasible { residual: Rational },
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Finds some `x >= 0` with `A x = b`, or proves none exists.
///
/// `a` is row-major with every row of the same length.
pub fn find_feasible(a: &[Vec<Rational>], b: &[Rational]) -> Feasibility {
    assert_eq!(a.len(), b.len(), "one right-hand side per row");
    let m = a.len();
    let n = a.first().map_or(0, Vec::len);
    assert!(a.iter().all(|r| r.len() == n), "ragged constraint matrix");

    // Columns: n structural, then m artificials, then the right-hand side.
    let width = n + m + 1;
    let mut tab: Vec<Vec<Rational>> = Vec::with_capacity(m + 1);
    for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
        let flip = rhs.is_negative();
        let mut t = Vec::with_capacity(width);
        t.extend(row.iter().map(|v| if flip { -v } else { v.clone() }));
        t.extend((0..m).map(|k| if k == i { Rational::one() } else { Rational::zero() }));
        t.push(if flip { -rhs } else { rhs.clone() });
        tab.push(t);
    }
    // Objective row: reduced costs of minimizing the artificial sum.
    let mut obj: Vec<Rational> = vec![Rational::zero(); width];
    for row in &tab {
        for j in 0..n {
            obj[j] -= &row[j];
        }
        obj[width - 1] -= &row[width - 1];
    }
    tab.push(obj);
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Bland: lowest-index column with negative reduced cost.
    while let Some(enter) = (0..n + m).find(|&j| tab[m][j].is_negative()) {
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..m {
            let coef = &tab[i][enter];
            if coef > &Rational::zero() {
                let ratio = &tab[i][width - 1] / coef;
                let better = match &leave {
                    None => true,
                    Some((li, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let Some((pivot_row, _)) = leave else {
            // Unbounded direction; cannot happen for a phase-1 objective
            // bounded below by zero.
            unreachable!("phase-1 objective is bounded");
        };
        pivot(&mut tab, pivot_row, enter);
        basis[pivot_row] = enter;
    }

    let residual = -&tab[m][width - 1];
    if !residual.is_zero() {
        return Feasibility::Infeasible { residual };
    }
    let mut x = vec![Rational::zero(); n];
    for (i, &var) in basis.iter().enumerate() {
        if var < n {
            x[var] = tab[i][width - 1].clone();
        }
    }
    Feasibility::Feasible(x)
}

fn pivot(tab: &mut [Vec<Rational>], row: usize, col: usize) {
    let p = tab[row][col].clone();
    for v in tab[row].iter_mut() {
        *v = &*v / &p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row || r[col].is_zero() {
            continue;
        }
        let factor = r[col].clone();
        for (v, pv) in r.iter_mut().zip(&pivot_row) {
            if !pv.is_zero() {
                *v -= &(&factor * pv);
            }
        }
    }
}
