//! Dense linear-algebra helpers shared by the model, filter and simulation code.

use nalgebra::{Complex, DMatrix, DVector, Schur};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Relative tolerance used by the (semi)definiteness checks.
pub const DEFINITENESS_RTOL: f64 = 1e-12;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetrize_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn is_symmetric(m: &DMatrix<f64>, rtol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > rtol * scale {
                return false;
            }
        }
    }
    true
}

/// Smallest eigenvalue of the symmetric part of `m` (0 for an empty matrix).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |acc, &v| acc.min(v))
}

/// PSD test with tolerance relative to the largest-magnitude entry.
pub fn is_psd(m: &DMatrix<f64>, rtol: f64) -> bool {
    m.nrows() == 0 || min_eigenvalue(m) >= -rtol * max_abs(m)
}

/// PD test: smallest eigenvalue strictly above `rtol` times the largest entry.
pub fn is_pd(m: &DMatrix<f64>, rtol: f64) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let scale = max_abs(m);
    scale > 0.0 && min_eigenvalue(m) > rtol * scale
}

pub fn ensure_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if is_psd(m, DEFINITENESS_RTOL) {
        Ok(())
    } else {
        Err(Error::NotPositiveSemidefinite {
            what: what.to_string(),
            min_eig: min_eigenvalue(m),
        })
    }
}

/// Factor `F` with `F Fᵀ = m` for a symmetric PSD matrix, clamping tiny negative
/// eigenvalues at zero. Works for singular covariances where Cholesky fails.
pub fn psd_factor(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let scale = max_abs(m);
    let eig = symmetrize(m).symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &v| a.min(v));
    // Eigen-decomposition rounding is of order n·eps·scale; anything more negative
    // than that is a genuinely indefinite covariance.
    if min_eig < -1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotPositiveSemidefinite {
            what: what.to_string(),
            min_eig,
        });
    }
    let mut f = eig.eigenvectors.clone();
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        f.column_mut(j).scale_mut(s);
    }
    Ok(f)
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return DMatrix::zeros(0, 0);
    }
    m.clone().exp()
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<C64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum of `a` (−∞ for an empty matrix).
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .fold(f64::NEG_INFINITY, |acc, l| acc.max(l.re))
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Solve `A X + X Aᵀ + Q = 0` by Bartels–Stewart on the complex Schur form of `A`.
///
/// Requires `λ_i(A) + conj(λ_j(A)) ≠ 0` for all pairs, which holds for Hurwitz `A`.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || q.nrows() != n || q.ncols() != n {
        return Err(Error::Dimension(format!(
            "lyapunov: A is {}x{}, Q is {}x{}",
            a.nrows(),
            a.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (u, t) = Schur::new(to_complex(a)).unpack();
    let uh = u.adjoint();
    // T Y + Y Tᴴ = −Uᴴ Q U
    let c = -(&uh * to_complex(q) * &u);
    let mut y = DMatrix::<C64>::zeros(n, n);
    let scale = t.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()));
    for j in (0..n).rev() {
        for i in (0..n).rev() {
            let mut rhs = c[(i, j)];
            for k in (i + 1)..n {
                rhs -= t[(i, k)] * y[(k, j)];
            }
            for k in (j + 1)..n {
                rhs -= y[(i, k)] * t[(j, k)].conj();
            }
            let denom = t[(i, i)] + t[(j, j)].conj();
            if denom.norm() <= 1e-14 * scale {
                return Err(Error::InvalidParameter(format!(
                    "lyapunov: eigenvalue pair sums to zero ({} + {})",
                    t[(i, i)],
                    t[(j, j)].conj()
                )));
            }
            y[(i, j)] = rhs / denom;
        }
    }
    let x = &u * y * &uh;
    Ok(symmetrize(&x.map(|v| v.re)))
}

/// Stationary covariance of `ẋ = A x + L w`, `E[w wᵀ] = W δ`.
pub fn stationary_covariance(
    a: &DMatrix<f64>,
    l: &DMatrix<f64>,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let max_re = spectral_abscissa(a);
    if a.nrows() > 0 && max_re >= 0.0 {
        return Err(Error::NotHurwitz { max_real: max_re });
    }
    lyapunov(a, &(l * w * l.transpose()))
}

/// Solve `S X = B` for symmetric positive definite `S` via Cholesky.
pub fn spd_solve(s: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = s.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        what: what.to_string(),
    })?;
    Ok(chol.solve(b))
}

pub fn spd_inverse(s: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = s.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite {
        what: what.to_string(),
    })?;
    Ok(symmetrize(&chol.inverse()))
}

/// Vector of diagonal entries.
pub fn diag(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows().min(m.ncols()), (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]))
}

/// Block-diagonal stacking of two matrices.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

/// Copy of `m` with column `col` removed.
pub fn remove_column(m: &DMatrix<f64>, col: usize) -> DMatrix<f64> {
    m.clone().remove_column(col)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kron_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let eye = DMatrix::<f64>::identity(n, n);
        let big = eye.kronecker(a) + a.kronecker(&eye);
        let rhs = DVector::from_column_slice(q.as_slice()) * -1.0;
        let sol = big.lu().solve(&rhs).unwrap();
        DMatrix::from_column_slice(n, n, sol.as_slice())
    }

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_element(1, 1, -1.0);
        let q = DMatrix::from_element(1, 1, 2.0);
        let x = lyapunov(&a, &q).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_matches_kronecker_oracle() {
        let a = DMatrix::from_row_slice(
            4,
            4,
            &[
                -0.1, 3.0, 0.0, 0.2, -3.0, -0.3, 0.5, 0.0, 0.1, 0.0, -1.0, 2.0, 0.0, -0.4, -2.0,
                -1.0,
            ],
        );
        let l = DMatrix::from_row_slice(4, 2, &[0.0, 1.0, 1.0, 0.0, 0.3, 0.2, 0.0, 1.0]);
        let q = &l * l.transpose();
        let x = lyapunov(&a, &q).unwrap();
        let oracle = kron_lyapunov(&a, &q);
        assert!((&x - &oracle).norm() < 1e-12 * oracle.norm());
        let resid = &a * &x + &x * a.transpose() + &q;
        assert!(resid.norm() < 1e-12 * q.norm());
    }

    #[test]
    fn psd_factor_handles_singular() {
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let m = &v * v.transpose();
        let f = psd_factor(&m, "test").unwrap();
        assert!((&f * f.transpose() - &m).norm() < 1e-12);
        let mut bad = m.clone();
        bad[(0, 0)] = -1.0;
        assert!(psd_factor(&bad, "bad").is_err());
    }

    #[test]
    fn definiteness_checks() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(is_psd(&z, DEFINITENESS_RTOL));
        assert!(!is_pd(&z, DEFINITENESS_RTOL));
        let i = DMatrix::<f64>::identity(2, 2);
        assert!(is_pd(&i, DEFINITENESS_RTOL));
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(!is_psd(&d, DEFINITENESS_RTOL));
    }
}
