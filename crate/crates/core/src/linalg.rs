//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = symmetrize(m).symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(f64::NAN)
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Induced infinity norm: maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Real parts of the eigenvalues of a general square matrix, ascending.
pub fn eig_real_parts(m: &DMatrix<f64>) -> Vec<f64> {
    let mut re: Vec<f64> = m.complex_eigenvalues().iter().map(|c| c.re).collect();
    re.sort_by(f64::total_cmp);
    re
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    eig_real_parts(m).iter().all(|&r| r < 0.0)
}

/// `P^{-1/2}` for symmetric positive definite `P`.
pub fn inv_sqrt_spd(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = symmetrize(p).symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::InvalidInput("matrix is not positive definite".into()));
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone().try_inverse().ok_or_else(|| Error::InvalidInput("singular matrix".into()))
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Solves `Aᵀ X + X A + Q = 0` through the Kronecker-vectorized system.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    // vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X
    let big = kron(&eye, &a.transpose()) + kron(&a.transpose(), &eye);
    let rhs = DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = big
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidInput("Lyapunov operator is singular".into()))?;
    Ok(symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice())))
}

/// Basis of symmetric `n×n` matrices, upper-triangle order `(i, j)` with `i ≤ j`.
pub fn sym_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            out.push(e);
        }
    }
    out
}

/// Packs a symmetric matrix into the coordinates of [`sym_basis`].
pub fn sym_pack(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) });
        }
    }
    out
}

pub fn sym_unpack(n: usize, v: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
            k += 1;
        }
    }
    m
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let q = DMatrix::from_element(1, 1, 2.0);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert_relative_eq!(x[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lyapunov_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, -0.5, -3.0, 1.0, 0.0, 0.2, -2.0]);
        let q = DMatrix::identity(3, 3);
        let x = solve_lyapunov(&a, &q).unwrap();
        let r = a.transpose() * &x + &x * &a + &q;
        assert!(r.norm() < 1e-12);
        assert!(min_eig(&x) > 0.0);
    }

    #[test]
    fn norms() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 3.0]);
        assert_eq!(inf_norm(&w), 3.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -4.0]));
        assert_relative_eq!(spectral_norm(&d), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn inv_sqrt_roundtrip() {
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 2.0]);
        let s = inv_sqrt_spd(&p).unwrap();
        let back = &s * &p * &s;
        assert!(max_abs_diff(&back, &DMatrix::identity(2, 2)) < 1e-12);
        assert!(inv_sqrt_spd(&(-p)).is_err());
    }

    #[test]
    fn sym_pack_roundtrip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let v = sym_pack(&m);
        assert_eq!(v, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(sym_unpack(3, &v), m);
        let basis = sym_basis(3);
        let rebuilt = basis.iter().zip(&v).fold(DMatrix::zeros(3, 3), |acc, (e, c)| {
            // off-diagonal basis elements set both triangles
            acc + e * *c
        });
        assert_eq!(rebuilt, m);
    }

    #[test]
    fn hurwitz_check() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, -1.0]);
        assert!(is_hurwitz(&a));
        let re = eig_real_parts(&a);
        assert_relative_eq!(re[0], -0.5, epsilon = 1e-12);
        assert!(!is_hurwitz(&DMatrix::identity(2, 2)));
    }
}
