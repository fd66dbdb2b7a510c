//! Dense linear solve used for exact occupancy computation.

use crate::scalar::Real;

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n`. Returns `None` when a pivot falls below `pivot_tol`.
pub fn solve_dense<T: Real>(mut a: Vec<T>, mut b: Vec<T>, pivot_tol: T) -> Option<Vec<T>> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "matrix must be n x n");
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, T::neg_infinity()), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs.is_nan() || pivot_abs <= pivot_tol {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * n + col];
        for r in (col + 1)..n {
            let factor = a[r * n + col] / pivot;
            if factor == T::zero() {
                continue;
            }
            a[r * n + col] = T::zero();
            for j in (col + 1)..n {
                let v = a[col * n + j];
                a[r * n + j] -= factor * v;
            }
            let bv = b[col];
            b[r] -= factor * bv;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for j in (r + 1)..n {
            acc -= a[r * n + j] * x[j];
        }
        x[r] = acc / a[r * n + r];
    }
    Some(x)
}
