//! Tridiagonal solves for the implicit steps.

/// Solves `A x = rhs` for tridiagonal `A` by the Thomas algorithm.
///
/// `lower[i]` couples row `i` to `i - 1` (entry 0 unused), `upper[i]` couples
/// row `i` to `i + 1` (last entry unused). Returns `None` on a zero pivot.
/// Stable for diagonally dominant systems, which is all the solvers produce.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return None;
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return None;
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn apply(lower: &[f64], diag: &[f64], upper: &[f64], x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn zero_pivot_is_reported() {
        assert!(solve_tridiagonal(&[0.0, 1.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_none());
    }

    proptest! {
        #[test]
        fn solves_dominant_systems(
            lower in proptest::collection::vec(-1.0f64..1.0, 12),
            upper in proptest::collection::vec(-1.0f64..1.0, 12),
            extra in proptest::collection::vec(0.1f64..3.0, 12),
            x in proptest::collection::vec(-5.0f64..5.0, 12),
        ) {
            let diag: Vec<f64> = (0..12).map(|i| lower[i].abs() + upper[i].abs() + extra[i]).collect();
            let rhs = apply(&lower, &diag, &upper, &x);
            let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
            for (a, b) in sol.iter().zip(&x) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }
    }
}
