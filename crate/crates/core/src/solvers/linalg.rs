//! Small dense complex solves used inside the path tracker.

use num_complex::Complex64;

/// Solves `a x = b` in place by Gaussian elimination with partial pivoting.
/// `a` is row-major `n x n` and is overwritten. Returns the ratio of the
/// largest to the smallest pivot magnitude as a cheap condition estimate, or
/// `None` if a pivot is exactly zero.
pub(crate) fn solve_in_place(a: &mut [Complex64], b: &mut [Complex64], n: usize) -> Option<f64> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, a[r * n + col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if piv_abs == 0.0 || !piv_abs.is_finite() {
            return None;
        }
        max_pivot = max_pivot.max(piv_abs);
        min_pivot = min_pivot.min(piv_abs);
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let inv = a[col * n + col].inv();
        for r in col + 1..n {
            let factor = a[r * n + col] * inv;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col..n {
                let v = a[col * n + k];
                a[r * n + k] -= factor * v;
            }
            let v = b[col];
            b[r] -= factor * v;
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col * n + k] * b[k];
        }
        b[col] = s / a[col * n + col];
    }
    Some(max_pivot / min_pivot)
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_permuted_system() {
        let c = |r: f64, i: f64| Complex64::new(r, i);
        let mut a = vec![c(0.0, 0.0), c(2.0, 1.0), c(1.0, 0.0), c(3.0, 0.0)];
        let x = [c(1.0, -1.0), c(0.5, 2.0)];
        let mut b = vec![a[0] * x[0] + a[1] * x[1], a[2] * x[0] + a[3] * x[1]];
        let cond = solve_in_place(&mut a, &mut b, 2).unwrap();
        assert!(cond >= 1.0);
        assert!((b[0] - x[0]).norm() < 1e-14);
        assert!((b[1] - x[1]).norm() < 1e-14);
    }

    #[test]
    fn singular_matrix_returns_none() {
        let one = Complex64::new(1.0, 0.0);
        let mut a = vec![one, one, one, one];
        let mut b = vec![one, one];
        // second pivot cancels exactly
        assert!(solve_in_place(&mut a, &mut b, 2).is_none());
    }
}
