//! Small dense linear solves.

use crate::num::Scalar;

/// Solves `a x = b` by Gaussian elimination with partial pivoting. Returns
/// `None` when a pivot falls below `rel_eps` times the largest diagonal
/// magnitude.
pub(crate) fn solve_dense<S: Scalar>(mut a: Vec<Vec<S>>, mut b: Vec<S>, rel_eps: S) -> Option<Vec<S>> {
    let n = b.len();
    let scale = (0..n).map(|i| a[i][i].abs()).fold(S::zero(), S::max).max(S::min_positive_value());
    let eps = scale * rel_eps;
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| {
            a[i][col]
                .abs()
                .partial_cmp(&a[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(a[piv][col].abs() > eps) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == S::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let s: S = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
