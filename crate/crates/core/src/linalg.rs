//! Small dense linear algebra.
//!
//! Linear solves are generic over [`Scalar`] so that they differentiate
//! through dual numbers; spectral work (SVD, eigenvalues) is plain `f64`
//! and delegated to nalgebra.

use nalgebra::{Complex, DMatrix};

use crate::autodiff::Scalar;
use crate::error::{Error, Result};

pub type Mat<S> = Vec<Vec<S>>;

/// Relative pivot threshold below which a system is declared singular.
pub const PIVOT_TOL: f64 = 1e-12;

pub fn identity<S: Scalar>(n: usize) -> Mat<S> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
        .collect()
}

pub fn matmul<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> Mat<S> {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    (0..inner).fold(S::zero(), |acc, k| acc + row[k].clone() * b[k][j].clone())
                })
                .collect()
        })
        .collect()
}

pub fn matvec<S: Scalar>(a: &Mat<S>, v: &[S]) -> Vec<S> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(v)
                .fold(S::zero(), |acc, (m, x)| acc + m.clone() * x.clone())
        })
        .collect()
}

pub fn transpose<S: Clone>(a: &Mat<S>) -> Mat<S> {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j].clone()).collect()).collect()
}

pub fn primal_matrix<S: Scalar>(a: &Mat<S>) -> Mat<f64> {
    a.iter().map(|r| r.iter().map(Scalar::primal).collect()).collect()
}

/// Solves `A X = B` for several right-hand sides (columns of `b`) by
/// Gaussian elimination with partial pivoting on primal magnitudes.
pub fn solve_many<S: Scalar>(a: &Mat<S>, b: &Mat<S>) -> Result<Mat<S>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) || b.len() != n {
        return Err(Error::InvalidArgument("solve: shape mismatch".into()));
    }
    let scale = a
        .iter()
        .flatten()
        .map(|v| v.primal().abs())
        .fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::SingularMatrix);
    }
    let mut m = a.clone();
    let mut rhs = b.clone();
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, m[r][col].primal().abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if mag <= PIVOT_TOL * scale {
            return Err(Error::SingularMatrix);
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in (col + 1)..n {
            let factor = m[r][col].clone() / m[col][col].clone();
            for c in col..n {
                let t = factor.clone() * m[col][c].clone();
                m[r][c] = m[r][c].clone() - t;
            }
            for c in 0..rhs[r].len() {
                let t = factor.clone() * rhs[col][c].clone();
                rhs[r][c] = rhs[r][c].clone() - t;
            }
        }
    }
    let k = rhs.first().map_or(0, Vec::len);
    let mut x: Mat<S> = vec![vec![S::zero(); k]; n];
    for c in 0..k {
        for r in (0..n).rev() {
            let mut acc = rhs[r][c].clone();
            for j in (r + 1)..n {
                acc = acc - m[r][j].clone() * x[j][c].clone();
            }
            x[r][c] = acc / m[r][r].clone();
        }
    }
    Ok(x)
}

pub fn solve<S: Scalar>(a: &Mat<S>, b: &[S]) -> Result<Vec<S>> {
    let cols: Mat<S> = b.iter().map(|v| vec![v.clone()]).collect();
    Ok(solve_many(a, &cols)?.into_iter().map(|mut r| r.remove(0)).collect())
}

pub fn inverse<S: Scalar>(a: &Mat<S>) -> Result<Mat<S>> {
    solve_many(a, &identity(a.len()))
}

fn to_na(a: &Mat<f64>) -> DMatrix<f64> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    DMatrix::from_fn(rows, cols, |i, j| a[i][j])
}

pub fn determinant(a: &Mat<f64>) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    to_na(a).determinant()
}

/// Singular values in decreasing order.
pub fn singular_values(a: &Mat<f64>) -> Vec<f64> {
    if a.is_empty() || a[0].is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(a: &Mat<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let Some(&top) = s.first() else { return 0 };
    if top == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * top).count()
}

/// Ratio of extreme singular values; infinite when rank deficient.
pub fn condition_number(a: &Mat<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
pub fn least_squares(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument("least squares: shape mismatch".into()));
    }
    let m = to_na(a);
    let rhs = nalgebra::DVector::from_column_slice(b);
    let svd = m.svd(true, true);
    let x = svd
        .solve(&rhs, f64::EPSILON * 16.0)
        .map_err(|e| Error::InvalidArgument(format!("least squares: {e}")))?;
    Ok(x.iter().copied().collect())
}

/// All eigenvalues of a real square matrix via the real Schur form.
pub fn eigenvalues(a: &Mat<f64>) -> Result<Vec<Complex<f64>>> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidArgument("eigenvalues of a non-square matrix".into()));
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::EigenSolverFailure("non-finite matrix entry".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(to_na(a), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::EigenSolverFailure("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{seed, Dual};

    #[test]
    fn solve_small_system() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn singular_detected() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(matches!(solve(&a, &[1.0, 1.0]), Err(Error::SingularMatrix)));
    }

    #[test]
    fn solve_differentiates() {
        // [[t, 0], [0, 1]] x = [1, 1]  =>  x0 = 1/t, dx0/dt = -1/t²
        let t = seed(&[2.0])[0].clone();
        let a: Mat<Dual<f64>> = vec![
            vec![t, Dual::constant(0.0)],
            vec![Dual::constant(0.0), Dual::constant(1.0)],
        ];
        let x = solve(&a, &[Dual::constant(1.0), Dual::constant(1.0)]).unwrap();
        assert_eq!(x[0].re, 0.5);
        assert_eq!(x[0].d(0), -0.25);
    }

    #[test]
    fn least_squares_overdetermined() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let x = least_squares(&a, &[1.0, 2.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
        assert!(condition_number(&vec![vec![1.0, 0.0], vec![0.0, 0.0]]).is_infinite());
    }

    #[test]
    fn rank_and_eigen() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert_eq!(numerical_rank(&a, 1e-8), 1);
        let rot = vec![vec![0.0, -1.0], vec![1.0, 0.0]];
        let ev = eigenvalues(&rot).unwrap();
        assert!(ev.iter().all(|z| (z.im.abs() - 1.0).abs() < 1e-12 && z.re.abs() < 1e-12));
        assert!((determinant(&rot) - 1.0).abs() < 1e-15);
    }
}
