//! Sparse exact linear solving.
//!
//! Gauss-Jordan elimination over rationals with a sparsest-row pivot
//! heuristic. The systems here come from Markov chains (`(I - P) x = c`),
//! which are mostly banded or tree-like, so keeping fill-in down matters more
//! than asymptotics.

use crate::rational::Rat;
use num::Zero;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinearError {
    #[error("linear system is singular")]
    Singular,
    #[error("system has {rows} rows for {cols} unknowns")]
    NotSquare { rows: usize, cols: usize },
}

/// Solves the square system given by `rows[i] = coefficients of equation i`
/// and right-hand side `rhs[i]`. Duplicate column entries accumulate.
pub fn solve_sparse(
    n: usize,
    rows: Vec<Vec<(usize, Rat)>>,
    rhs: Vec<Rat>,
) -> Result<Vec<Rat>, LinearError> {
    if rows.len() != n || rhs.len() != n {
        return Err(LinearError::NotSquare {
            rows: rows.len().max(rhs.len()),
            cols: n,
        });
    }
    let mut mat: Vec<BTreeMap<usize, Rat>> = Vec::with_capacity(n);
    for row in rows {
        let mut m: BTreeMap<usize, Rat> = BTreeMap::new();
        for (col, coeff) in row {
            let entry = m.entry(col).or_insert_with(Rat::zero);
            *entry += coeff;
            if entry.is_zero() {
                m.remove(&col);
            }
        }
        mat.push(m);
    }
    let mut rhs = rhs;
    // Which rows mention each column, kept in sync during elimination.
    let mut col_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, row) in mat.iter().enumerate() {
        for &col in row.keys() {
            col_rows[col].insert(r);
        }
    }
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; n];
    let mut row_done = vec![false; n];

    for _ in 0..n {
        // Sparsest unprocessed row; ties broken by index for determinism.
        let pivot_row = (0..n)
            .filter(|&r| !row_done[r])
            .min_by_key(|&r| (mat[r].len(), r))
            .expect("loop runs once per row");
        // Lowest unassigned column in it.
        let pivot_col = match mat[pivot_row]
            .keys()
            .copied()
            .find(|&c| pivot_of_col[c].is_none())
        {
            Some(c) => c,
            None => return Err(LinearError::Singular),
        };
        let pivot_val = mat[pivot_row][&pivot_col].clone();
        // Normalize the pivot row.
        for coeff in mat[pivot_row].values_mut() {
            *coeff /= &pivot_val;
        }
        rhs[pivot_row] /= &pivot_val;
        // Eliminate the column everywhere else.
        let users: Vec<usize> = col_rows[pivot_col]
            .iter()
            .copied()
            .filter(|&r| r != pivot_row)
            .collect();
        let pivot_entries: Vec<(usize, Rat)> =
            mat[pivot_row].iter().map(|(c, v)| (*c, v.clone())).collect();
        for r in users {
            let factor = match mat[r].remove(&pivot_col) {
                Some(f) => f,
                None => continue,
            };
            col_rows[pivot_col].remove(&r);
            for (col, coeff) in &pivot_entries {
                if *col == pivot_col {
                    continue;
                }
                let entry = mat[r].entry(*col).or_insert_with(Rat::zero);
                *entry -= &factor * coeff;
                if entry.is_zero() {
                    mat[r].remove(col);
                    col_rows[*col].remove(&r);
                } else {
                    col_rows[*col].insert(r);
                }
            }
            let delta = &factor * &rhs[pivot_row];
            rhs[r] -= delta;
        }
        pivot_of_col[pivot_col] = Some(pivot_row);
        row_done[pivot_row] = true;
    }

    let mut solution = vec![Rat::zero(); n];
    for (col, pivot) in pivot_of_col.into_iter().enumerate() {
        let row = pivot.ok_or(LinearError::Singular)?;
        debug_assert_eq!(mat[row].len(), 1, "pivot row fully reduced");
        solution[col] = rhs[row].clone();
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    #[test]
    fn solves_two_by_two() {
        // x + y = 3, x - y = 1  =>  x = 2, y = 1
        let x = solve_sparse(
            2,
            vec![
                vec![(0, rat(1, 1)), (1, rat(1, 1))],
                vec![(0, rat(1, 1)), (1, rat(-1, 1))],
            ],
            vec![rat(3, 1), rat(1, 1)],
        )
        .unwrap();
        assert_eq!(x, vec![rat(2, 1), rat(1, 1)]);
    }

    #[test]
    fn accumulates_duplicate_entries() {
        // (1 + 1) x = 4
        let x = solve_sparse(1, vec![vec![(0, rat(1, 1)), (0, rat(1, 1))]], vec![rat(4, 1)]).unwrap();
        assert_eq!(x, vec![rat(2, 1)]);
    }

    #[test]
    fn detects_singular() {
        let r = solve_sparse(
            2,
            vec![
                vec![(0, rat(1, 1)), (1, rat(1, 1))],
                vec![(0, rat(2, 1)), (1, rat(2, 1))],
            ],
            vec![rat(1, 1), rat(2, 1)],
        );
        assert_eq!(r, Err(LinearError::Singular));
    }

    #[test]
    fn exact_on_awkward_fractions() {
        // (1/3) x + (1/7) y = 10/21 ; (1/7) x - (1/3) y = -4/21
        // => x = 1, y = 1 exactly.
        let x = solve_sparse(
            2,
            vec![
                vec![(0, rat(1, 3)), (1, rat(1, 7))],
                vec![(0, rat(1, 7)), (1, rat(-1, 3))],
            ],
            vec![rat(10, 21), rat(-4, 21)],
        )
        .unwrap();
        assert_eq!(x, vec![rat(1, 1), rat(1, 1)]);
    }
}
