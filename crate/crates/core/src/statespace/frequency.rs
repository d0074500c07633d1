//! Frequency-domain evaluation. Spectra are two-sided densities in rad/s, so the
//! output covariance is `(1/2π) ∫ S(ω) dω`.

use nalgebra::DMatrix;

use super::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, spectral_abscissa, to_complex, C64};

/// Precomputed spectrum of `A` for repeated resolvent solves.
struct Resolvent {
    a: DMatrix<C64>,
    eig: Vec<C64>,
    scale: f64,
}

impl Resolvent {
    fn new(a: &DMatrix<f64>) -> Self {
        let scale = a.norm().max(1.0);
        Self {
            a: to_complex(a),
            eig: eigenvalues(a),
            scale,
        }
    }

    /// `(iω I − A)⁻¹ rhs`.
    fn solve(&self, omega: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<C64>> {
        let n = self.a.nrows();
        if n == 0 {
            return Ok(DMatrix::zeros(0, rhs.ncols()));
        }
        let s = C64::new(0.0, omega);
        if let Some(nearest) = self
            .eig
            .iter()
            .min_by(|x, y| (s - **x).norm().total_cmp(&(s - **y).norm()))
        {
            if (s - nearest).norm() <= 1e-12 * self.scale {
                return Err(Error::SingularResolvent {
                    omega,
                    nearest_re: nearest.re,
                    nearest_im: nearest.im,
                });
            }
        }
        let mut m = -self.a.clone();
        for i in 0..n {
            m[(i, i)] += s;
        }
        m.lu().solve(&to_complex(rhs)).ok_or(Error::SingularResolvent {
            omega,
            nearest_re: f64::NAN,
            nearest_im: f64::NAN,
        })
    }
}

/// `G(iω) = C (iω I − A)⁻¹ B + D` using the base measurement matrices.
pub fn transfer_function(sys: &StateSpaceModel, omega: f64) -> Result<DMatrix<C64>> {
    let r = Resolvent::new(sys.a());
    let x = r.solve(omega, sys.b())?;
    Ok(to_complex(sys.c()) * x + to_complex(sys.d()))
}

/// `H(iω) = C (iω I − A)⁻¹ L`, the transfer from process noise to output.
pub fn noise_transfer(sys: &StateSpaceModel, omega: f64) -> Result<DMatrix<C64>> {
    let r = Resolvent::new(sys.a());
    Ok(to_complex(sys.c()) * r.solve(omega, sys.l())?)
}

fn check_hurwitz(sys: &StateSpaceModel) -> Result<()> {
    if sys.n() > 0 {
        let max_real = spectral_abscissa(sys.a());
        if max_real >= 0.0 {
            return Err(Error::NotHurwitz { max_real });
        }
    }
    Ok(())
}

fn cross_spectrum_with(sys: &StateSpaceModel, r: &Resolvent, omega: f64) -> Result<DMatrix<C64>> {
    let h = to_complex(sys.c()) * r.solve(omega, sys.l())?;
    let hm = &h * to_complex(sys.m());
    Ok(&h * to_complex(sys.w()) * h.adjoint() + &hm + hm.adjoint() + to_complex(sys.v()))
}

/// Full Hermitian output spectral matrix
/// `S(ω) = H W Hᴴ + H M + (H M)ᴴ + V` with `H = C (iω − A)⁻¹ L`.
pub fn output_cross_spectrum(sys: &StateSpaceModel, omega: f64) -> Result<DMatrix<C64>> {
    check_hurwitz(sys)?;
    cross_spectrum_with(sys, &Resolvent::new(sys.a()), omega)
}

fn real_part_checked(s: DMatrix<C64>) -> Result<DMatrix<f64>> {
    let scale = s.iter().fold(0.0_f64, |a, v| a.max(v.norm())).max(f64::MIN_POSITIVE);
    for i in 0..s.nrows() {
        if s[(i, i)].im.abs() > 1e-10 * scale {
            return Err(Error::InvalidParameter(format!(
                "spectrum diagonal {i} has imaginary residue {:e}",
                s[(i, i)].im
            )));
        }
    }
    let re = s.map(|v| v.re);
    Ok((&re + re.transpose()) * 0.5)
}

/// Real symmetric part of the output spectral matrix (auto-spectra on the diagonal,
/// co-spectra off it).
pub fn output_noise_spectrum(sys: &StateSpaceModel, omega: f64) -> Result<DMatrix<f64>> {
    real_part_checked(output_cross_spectrum(sys, omega)?)
}

/// [`output_noise_spectrum`] over a frequency grid, factoring `A` once.
pub fn output_noise_spectrum_grid(
    sys: &StateSpaceModel,
    omegas: &[f64],
) -> Result<Vec<DMatrix<f64>>> {
    check_hurwitz(sys)?;
    let r = Resolvent::new(sys.a());
    omegas
        .iter()
        .map(|&w| real_part_checked(cross_spectrum_with(sys, &r, w)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn low_pass(kappa: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            dmatrix![-kappa],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![2.0],
            dmatrix![0.0],
            dmatrix![0.0],
        )
        .unwrap()
    }

    #[test]
    fn static_model_transfer_is_d() {
        let d = dmatrix![1.0, 2.0; 3.0, 4.0];
        let s = StateSpaceModel::static_gain(d.clone(), DMatrix::identity(2, 2)).unwrap();
        for w in [0.0, 1.0, 1e6] {
            let g = transfer_function(&s, w).unwrap();
            assert!((g.map(|v| v.re) - &d).norm() == 0.0);
        }
    }

    #[test]
    fn first_order_transfer() {
        let s = low_pass(1.0);
        assert!((transfer_function(&s, 0.0).unwrap()[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        let g = transfer_function(&s, 1.0).unwrap()[(0, 0)];
        assert!((g.norm() - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn singular_resolvent_names_omega() {
        let s = StateSpaceModel::autonomous(dmatrix![0.0, 1.0; -1.0, 0.0], dmatrix![1.0, 0.0])
            .unwrap();
        match transfer_function(&s, 1.0) {
            Err(Error::SingularResolvent { omega, nearest_im, .. }) => {
                assert_eq!(omega, 1.0);
                assert!((nearest_im - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ou_spectrum() {
        let s = low_pass(1.0);
        assert!((output_noise_spectrum(&s, 0.0).unwrap()[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn measurement_only_spectrum_is_v() {
        let v = dmatrix![0.5, 0.1; 0.1, 0.7];
        let s = StateSpaceModel::new(
            dmatrix![-1.0],
            DMatrix::zeros(1, 0),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 0),
            dmatrix![1.0],
            dmatrix![1.0],
            v.clone(),
            DMatrix::zeros(1, 2),
        )
        .unwrap();
        for w in [0.0, 3.0] {
            assert_eq!(output_noise_spectrum(&s, w).unwrap(), v);
        }
    }

    #[test]
    fn high_frequency_limit_is_v() {
        let s = StateSpaceModel::new(
            dmatrix![-1.0],
            DMatrix::zeros(1, 0),
            dmatrix![1.0],
            DMatrix::zeros(1, 0),
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.5],
            dmatrix![0.3],
        )
        .unwrap();
        let sv = output_noise_spectrum(&s, 1e6).unwrap()[(0, 0)];
        assert!((sv - 0.5).abs() < 1e-10);
    }

    #[test]
    fn non_hurwitz_rejected() {
        let mut s = low_pass(-1.0);
        assert!(matches!(
            output_noise_spectrum(&s, 0.0),
            Err(Error::NotHurwitz { .. })
        ));
        s = low_pass(1.0);
        assert!(output_noise_spectrum_grid(&s, &[0.0, 1.0]).is_ok());
    }
}
