//! Dense linear solve used by exact policy evaluation.

use ndarray::{Array1, Array2};

use crate::error::{CoreError, Result};

/// Solve `A x = b` by LU decomposition with partial pivoting.
///
/// The systems arising here are small (`I - γ P_π` for tabular MDPs with at
/// most a few hundred states) and well conditioned for γ < 1, so a direct
/// dense solve is both exact enough and fast enough.
pub fn solve_linear(a: &Array2<f64>, b: &Array1<f64>) -> Result<Array1<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(CoreError::DimensionMismatch {
            context: "solve_linear: matrix must be square",
            expected: n,
            got: a.ncols(),
        });
    }
    if b.len() != n {
        return Err(CoreError::DimensionMismatch {
            context: "solve_linear: rhs length",
            expected: n,
            got: b.len(),
        });
    }

    let mut lu = a.clone();
    let mut x = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // Partial pivot: bring the largest remaining entry in column k up.
        let mut pivot_row = k;
        let mut pivot_val = lu[[k, k]].abs();
        for i in (k + 1)..n {
            let v = lu[[i, k]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = i;
            }
        }
        if pivot_val < 1e-300 {
            return Err(CoreError::SingularSystem(format!(
                "pivot {pivot_val:e} at column {k}"
            )));
        }
        if pivot_row != k {
            for j in 0..n {
                lu.swap([k, j], [pivot_row, j]);
            }
            perm.swap(k, pivot_row);
            x.swap(k, pivot_row);
        }
        for i in (k + 1)..n {
            let factor = lu[[i, k]] / lu[[k, k]];
            lu[[i, k]] = factor;
            for j in (k + 1)..n {
                lu[[i, j]] -= factor * lu[[k, j]];
            }
        }
    }

    // Forward substitution with the unit-lower factor.
    for i in 1..n {
        let mut s = x[i];
        for j in 0..i {
            s -= lu[[i, j]] * x[j];
        }
        x[i] = s;
    }
    // Back substitution with the upper factor.
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in (i + 1)..n {
            s -= lu[[i, j]] * x[j];
        }
        x[i] = s / lu[[i, i]];
    }
    Ok(x)
}
