//! Stationary Riccati solution with cross-correlated noise.
//!
//! With `Ã = A − L M V⁻¹ C`, `Q̃ = L (W − M V⁻¹ Mᵀ) Lᵀ` and `R̃ = Cᵀ V⁻¹ C` the
//! Riccati equation becomes `Ṗ = Ã P + P Ãᵀ + Q̃ − P R̃ P`. It is integrated exactly
//! with the Hamiltonian flow `Φ = exp([[Ã, Q̃], [R̃, −Ãᵀ]] h)`,
//! `P ← (Φ₁₁ P + Φ₁₂)(Φ₂₁ P + Φ₂₂)⁻¹`, doubling `h` by squaring `Φ` while the
//! flow stays well conditioned. Once close, Newton–Kleinman steps polish the root.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{expm, lyapunov, spd_solve, spectral_abscissa, symmetrize};
use crate::statespace::StateSpaceModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    /// Upper bound on flow steps plus Newton steps.
    pub max_iterations: usize,
    /// Target for the normalized residual.
    pub tolerance: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub p: DMatrix<f64>,
    /// `‖Ṗ‖ / (‖ÃP‖ + ‖PÃᵀ‖ + ‖Q̃‖ + ‖PR̃P‖)` at the solution.
    pub residual: f64,
    pub iterations: usize,
}

/// Riccati data in decorrelated form.
#[derive(Debug, Clone)]
pub struct DecorrelatedRiccati {
    pub a: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl DecorrelatedRiccati {
    pub fn new(sys: &StateSpaceModel) -> Result<Self> {
        let set = sys.base_measurement();
        let v = set.v;
        // V⁻¹ C and V⁻¹ Mᵀ via Cholesky solves.
        let vic = spd_solve(v, set.c, "V")?;
        let vimt = spd_solve(v, &set.m.transpose(), "V")?;
        let l = sys.l();
        let lm = l * set.m;
        let a = sys.a() - &lm * &vic;
        let wr = sys.w() - set.m * &vimt;
        let q = symmetrize(&(l * wr * l.transpose()));
        let r = symmetrize(&(set.c.transpose() * vic));
        Ok(Self { a, q, r })
    }

    pub fn rhs(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        let ap = &self.a * p;
        symmetrize(&(&ap + ap.transpose() + &self.q - p * &self.r * p))
    }

    pub fn normalized_residual(&self, p: &DMatrix<f64>) -> f64 {
        let ap = &self.a * p;
        let prp = p * &self.r * p;
        let scale = 2.0 * ap.norm() + self.q.norm() + prp.norm();
        if scale == 0.0 {
            return 0.0;
        }
        (&ap + ap.transpose() + &self.q - prp).norm() / scale
    }

    fn hamiltonian(&self) -> DMatrix<f64> {
        let n = self.a.nrows();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, n)).copy_from(&self.q);
        h.view_mut((n, 0), (n, n)).copy_from(&self.r);
        h.view_mut((n, n), (n, n)).copy_from(&(-self.a.transpose()));
        h
    }

    fn flow(phi: &DMatrix<f64>, p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let n = p.nrows();
        let num = phi.view((0, 0), (n, n)) * p + phi.view((0, n), (n, n));
        let den = phi.view((n, 0), (n, n)) * p + phi.view((n, n), (n, n));
        // P_new = num · den⁻¹  ⇔  den ᵀ P_newᵀ = numᵀ
        let sol = den.transpose().lu().solve(&num.transpose())?;
        let out = symmetrize(&sol);
        out.iter().all(|v| v.is_finite()).then_some(out)
    }

    /// One Newton–Kleinman step from a stabilizing `p`.
    fn newton(&self, p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let ak = &self.a - p * &self.r;
        if spectral_abscissa(&ak) >= 0.0 {
            return None;
        }
        let rhs = &self.q + p * &self.r * p;
        lyapunov(&ak, &symmetrize(&rhs)).ok()
    }
}

pub fn steady_state(sys: &StateSpaceModel, opts: &SteadyStateOptions) -> Result<SteadyState> {
    let n = sys.n();
    if n == 0 {
        return Ok(SteadyState {
            p: DMatrix::zeros(0, 0),
            residual: 0.0,
            iterations: 0,
        });
    }
    let ric = DecorrelatedRiccati::new(sys)?;
    let h = ric.hamiltonian();
    let hnorm = h.norm().max(f64::MIN_POSITIVE);
    let mut step = 0.5 / hnorm;
    let mut phi = expm(&(&h * step));
    let mut p = DMatrix::zeros(n, n);
    let mut residual = ric.normalized_residual(&p);
    let mut iterations = 0;
    const PHI_LIMIT: f64 = 1e8;
    const HANDOFF: f64 = 1e-6;

    while iterations < opts.max_iterations {
        iterations += 1;
        if residual < HANDOFF {
            // Newton polishing; keep the best iterate.
            let mut best = (residual, p.clone());
            let mut cur = p.clone();
            let mut newton_ok = true;
            for _ in 0..50 {
                iterations += 1;
                match ric.newton(&cur) {
                    Some(next) => {
                        let r = ric.normalized_residual(&next);
                        cur = next;
                        if r < best.0 {
                            best = (r, cur.clone());
                        } else {
                            break;
                        }
                        if r < opts.tolerance {
                            break;
                        }
                    }
                    None => {
                        newton_ok = false;
                        break;
                    }
                }
            }
            if best.0 < opts.tolerance || newton_ok && best.0 < 1e3 * opts.tolerance {
                return Ok(SteadyState {
                    p: best.1,
                    residual: best.0,
                    iterations,
                });
            }
            p = best.1;
            residual = best.0;
        }
        let Some(next) = DecorrelatedRiccati::flow(&phi, &p) else {
            return Err(Error::NoConvergence {
                iterations,
                residual,
            });
        };
        let change = (&next - &p).norm() / next.norm().max(f64::MIN_POSITIVE);
        p = next;
        residual = ric.normalized_residual(&p);
        // Lengthen the step while the flow is slow and Φ remains well scaled.
        if change < 0.25 {
            let squared = &phi * &phi;
            if squared.norm() < PHI_LIMIT && squared.iter().all(|v| v.is_finite()) {
                phi = squared;
                step *= 2.0;
            }
        }
    }
    let _ = step;
    Err(Error::NoConvergence {
        iterations,
        residual,
    })
}
