//! Small dense linear-algebra helpers: Gaussian elimination and weighted
//! least squares on design matrices of at most a few dozen columns.

/// Solves `A x = b` in place by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot is numerically zero.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(1e-300);
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
            .unwrap();
        if pivot < 1e-12 * scale {
            return None;
        }
        a.swap(col, pivot_row);
        b.swap(col, pivot_row);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= factor * a[col][c];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for c in row + 1..n {
            acc -= a[row][c] * x[c];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

/// Weighted least squares on a flat row-major design matrix (the caller
/// supplies any intercept column). Returns `None` on singular normal
/// equations.
pub(crate) fn weighted_least_squares(
    design: &[f64],
    n_rows: usize,
    n_cols: usize,
    y: &[f64],
    weights: Option<&[f64]>,
) -> Option<Vec<f64>> {
    debug_assert_eq!(design.len(), n_rows * n_cols);
    debug_assert_eq!(y.len(), n_rows);
    let mut ata = vec![vec![0.0f64; n_cols]; n_cols];
    let mut atb = vec![0.0f64; n_cols];
    for i in 0..n_rows {
        let w = weights.map_or(1.0, |ws| ws[i]);
        let row = &design[i * n_cols..(i + 1) * n_cols];
        for a in 0..n_cols {
            let wa = w * row[a];
            atb[a] += wa * y[i];
            for b in a..n_cols {
                ata[a][b] += wa * row[b];
            }
        }
    }
    for a in 0..n_cols {
        for b in 0..a {
            ata[a][b] = ata[b][a];
        }
    }
    solve(ata, atb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(a, vec![5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(a, vec![1.0, 2.0]).is_none());
    }

    #[test]
    fn wls_recovers_exact_line() {
        // y = 3 + 2x over a handful of points, unit weights.
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let mut design = Vec::new();
        let mut y = Vec::new();
        for &x in &xs {
            design.extend_from_slice(&[1.0, x]);
            y.push(3.0 + 2.0 * x);
        }
        let coef = weighted_least_squares(&design, xs.len(), 2, &y, None).unwrap();
        assert!((coef[0] - 3.0).abs() < 1e-10);
        assert!((coef[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn wls_weights_shift_the_fit() {
        // Two inconsistent points: weights decide the constant fit.
        let design = vec![1.0, 1.0];
        let coef_a = weighted_least_squares(&design, 2, 1, &[0.0, 1.0], Some(&[1.0, 3.0])).unwrap();
        assert!((coef_a[0] - 0.75).abs() < 1e-12);
        let coef_b = weighted_least_squares(&design, 2, 1, &[0.0, 1.0], None).unwrap();
        assert!((coef_b[0] - 0.5).abs() < 1e-12);
    }
}
