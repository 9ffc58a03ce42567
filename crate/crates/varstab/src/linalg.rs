//! Small dense linear algebra for desk-scale problems (dimensions <= ~8).
//!
//! Everything here is plain `Vec`-based: the matrices this crate sees are
//! tiny (primal dimension is capped at 6), so simple Gaussian elimination,
//! normal equations, Lawson-Hanson NNLS, and Jacobi eigenvalue sweeps are
//! both adequate and easy to audit.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], c: f64) -> Vec<f64> {
    a.iter().map(|x| c * x).collect()
}

/// `A x` for a row-major matrix.
pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|row| dot(row, x)).collect()
}

/// `A^T x` for a row-major matrix.
pub fn mat_t_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let cols = a.first().map_or(0, Vec::len);
    let mut out = vec![0.0; cols];
    for (row, &xi) in a.iter().zip(x) {
        for (o, &r) in out.iter_mut().zip(row) {
            *o += r * xi;
        }
    }
    out
}

/// Solves the square system `A x = b` by Gaussian elimination with partial
/// pivoting. Returns `None` when the matrix is numerically singular.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    if n == 0 {
        return Some(Vec::new());
    }
    debug_assert!(a.iter().all(|row| row.len() == n) && b.len() == n);
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = m[row][n];
        for k in row + 1..n {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

/// Least squares `min |A x - b|^2 + ridge |x|^2` via the normal equations.
///
/// A small ridge keeps rank-deficient systems solvable; callers that need
/// the exact minimum-residual solution pass `ridge = 0` and fall back to a
/// ridged solve only when the unregularized system is singular.
pub fn lstsq(a: &[Vec<f64>], b: &[f64], ridge: f64) -> Vec<f64> {
    let cols = a.first().map_or(0, Vec::len);
    if cols == 0 {
        return Vec::new();
    }
    let mut ata = vec![vec![0.0; cols]; cols];
    for row in a {
        for i in 0..cols {
            for j in 0..cols {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += ridge;
    }
    let atb = mat_t_vec(a, b);
    match solve(&ata, &atb) {
        Some(x) => x,
        None => {
            let mut ata2 = ata;
            for (i, row) in ata2.iter_mut().enumerate() {
                row[i] += 1e-10;
            }
            solve(&ata2, &atb).unwrap_or_else(|| vec![0.0; cols])
        }
    }
}

/// Lawson-Hanson non-negative least squares: `min |A x - b|` with `x >= 0`.
pub fn nnls(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let cols = a.first().map_or(0, Vec::len);
    let rows = a.len();
    let mut x = vec![0.0; cols];
    if cols == 0 || rows == 0 {
        return x;
    }
    let mut passive = vec![false; cols];
    let tol = 1e-12 * (1.0 + norm_inf(b));
    for _outer in 0..(4 * cols.max(1) + 16) {
        let resid: Vec<f64> = (0..rows).map(|i| b[i] - dot(&a[i], &x)).collect();
        let w = mat_t_vec(a, &resid);
        let cand = (0..cols)
            .filter(|&j| !passive[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let j = match cand {
            Some(j) if w[j] > tol => j,
            _ => break,
        };
        passive[j] = true;
        loop {
            // Unconstrained least squares restricted to the passive columns.
            let idx: Vec<usize> = (0..cols).filter(|&k| passive[k]).collect();
            let a_p: Vec<Vec<f64>> = a
                .iter()
                .map(|row| idx.iter().map(|&k| row[k]).collect())
                .collect();
            let z_p = lstsq(&a_p, b, 0.0);
            if z_p.iter().all(|&z| z > tol) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&k, &z) in idx.iter().zip(&z_p) {
                    x[k] = z;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&k, &z) in idx.iter().zip(&z_p) {
                if z <= tol {
                    let step = x[k] / (x[k] - z);
                    alpha = alpha.min(step);
                }
            }
            let alpha = alpha.clamp(0.0, 1.0);
            for (&k, &z) in idx.iter().zip(&z_p) {
                x[k] += alpha * (z - x[k]);
            }
            for &k in &idx {
                if x[k] <= tol {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    x
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// Returns eigenvalues in ascending order with matching orthonormal
/// eigenvectors as rows of the second element.
pub fn jacobi_eigen(sym: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = sym.len();
    let mut a: Vec<Vec<f64>> = sym.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[p][k];
                    let vkq = v[q][k];
                    v[p][k] = c * vkp - s * vkq;
                    v[q][k] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let eigvals = order.iter().map(|&i| a[i][i]).collect();
    let eigvecs = order.iter().map(|&i| v[i].clone()).collect();
    (eigvals, eigvecs)
}

/// Numerical rank of a row-major matrix at the given singular-value-squared
/// tolerance (computed through the Gram matrix).
pub fn rank(rows: &[Vec<f64>], tol: f64) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let r = rows.len();
    let mut gram = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in 0..r {
            gram[i][j] = dot(&rows[i], &rows[j]);
        }
    }
    let (eigs, _) = jacobi_eigen(&gram);
    eigs.iter().filter(|&&e| e > tol).count()
}

/// Orthonormal basis for the null space `{x : R x = 0}` of a row-major
/// matrix, via the eigenvectors of `R^T R` with near-zero eigenvalues.
pub fn null_space_basis(rows: &[Vec<f64>], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    let mut gram = vec![vec![0.0; dim]; dim];
    for row in rows {
        for i in 0..dim {
            for j in 0..dim {
                gram[i][j] += row[i] * row[j];
            }
        }
    }
    let (eigs, vecs) = jacobi_eigen(&gram);
    let mut basis: Vec<Vec<f64>> = eigs
        .iter()
        .zip(vecs)
        .filter(|(&e, _)| e <= tol)
        .map(|(_, v)| v)
        .collect();
    // Deterministic sign convention: first nonzero component positive.
    for b in &mut basis {
        if let Some(&lead) = b.iter().find(|c| c.abs() > 1e-12) {
            if lead < 0.0 {
                b.iter_mut().for_each(|c| *c = -*c);
            }
        }
    }
    basis.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .find_map(|(x, y)| {
                let c = y.abs().total_cmp(&x.abs());
                (c != std::cmp::Ordering::Equal).then_some(c)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&a, &[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn solve_detects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(solve(&a, &[1.0, 2.0]).is_none());
    }

    #[test]
    fn nnls_clamps_negative_component() {
        // min |x - (-1)|^2 subject to x >= 0 has solution 0.
        let a = vec![vec![1.0]];
        let x = nnls(&a, &[-1.0]);
        assert_eq!(x[0], 0.0);
        // And an interior solution is recovered exactly.
        let x = nnls(&a, &[2.5]);
        assert!((x[0] - 2.5).abs() < 1e-10);
    }

    #[test]
    fn nnls_two_columns() {
        // b = 1*c0 + 2*c1 with orthogonal columns.
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0]];
        let x = nnls(&a, &[1.0, 2.0, 0.0]);
        assert!((x[0] - 1.0).abs() < 1e-10 && (x[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 2.0, 1.0],
            vec![0.0, 1.0, 2.0],
        ];
        let (eigs, vecs) = jacobi_eigen(&a);
        let expected = [2.0 - std::f64::consts::SQRT_2, 2.0, 2.0 + std::f64::consts::SQRT_2];
        for (e, ex) in eigs.iter().zip(expected) {
            assert!((e - ex).abs() < 1e-10, "eig {e} vs {ex}");
        }
        // Eigenvector residual |A q - lambda q|.
        for (lam, q) in eigs.iter().zip(&vecs) {
            let aq = mat_vec(&a, q);
            for (r, qi) in aq.iter().zip(q) {
                assert!((r - lam * qi).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn null_space_of_plane_normal() {
        let rows = vec![vec![0.0, 0.0, 1.0]];
        let basis = null_space_basis(&rows, 3, 1e-10);
        assert_eq!(basis.len(), 2);
        for b in &basis {
            assert!(dot(b, &rows[0]).abs() < 1e-10);
            assert!((norm2(b) - 1.0).abs() < 1e-10);
        }
        assert!(dot(&basis[0], &basis[1]).abs() < 1e-10);
    }

    #[test]
    fn rank_counts_independent_rows() {
        let rows = vec![
            vec![1.0, 0.0, -1.0, 0.0],
            vec![-1.0, 0.0, -1.0, 0.0],
            vec![0.0, 1.0, -1.0, 0.0],
            vec![0.0, -1.0, -1.0, 0.0],
        ];
        assert_eq!(rank(&rows, 1e-10), 3);
    }
}
