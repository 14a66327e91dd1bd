//! LQR gain from the continuous algebraic Riccati equation.
//!
//! The ARE `A'P + PA - P B R^-1 B' P + Q = 0` is solved as the steady state of the
//! differential Riccati equation integrated backward in time from `P = 0`. The flow is
//! globally convergent for stabilizable/detectable pairs and only needs RK4.

use nalgebra::{DMatrix, Matrix4, RowVector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::{LinearModel, StateVector};

/// Integration step of the Riccati flow.
pub const CARE_STEP: f64 = 1e-3;
/// Stop once `||dP/dt||_inf` falls below this, or below the rounding floor of its
/// evaluation when that is larger.
pub const CARE_TOLERANCE: f64 = 1e-10;
pub const CARE_MAX_STEPS: u64 = 10_000_000;
/// Largest admissible ARE residual of a returned solution.
pub const CARE_MAX_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqrWeights {
    pub q: Matrix4<f64>,
    pub r: f64,
}

impl Default for LqrWeights {
    fn default() -> Self {
        Self {
            q: Matrix4::from_diagonal(&[1.0, 1.0, 500.0, 250.0].into()),
            r: 1.0,
        }
    }
}

impl LqrWeights {
    pub fn validate(&self) -> Result<()> {
        validate_weights(&DMatrix::from_iterator(4, 4, self.q.iter().copied()), self.r)
    }
}

fn validate_weights(q: &DMatrix<f64>, r: f64) -> Result<()> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::invalid("R", format!("must be > 0, got {r}")));
    }
    if !q.is_square() || q.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Q", "must be a finite square matrix"));
    }
    if (q - q.transpose()).amax() > 1e-12 {
        return Err(Error::invalid("Q", "must be symmetric"));
    }
    let min_eig = q.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-12 {
        return Err(Error::invalid("Q", format!("must be PSD, min eigenvalue {min_eig:e}")));
    }
    Ok(())
}

/// Result of a Riccati solve for the cart-pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqrGain {
    pub k: RowVector4<f64>,
    pub p: Matrix4<f64>,
    /// `||A'P + PA - P B R^-1 B' P + Q||_inf` at the returned `P`.
    pub residual: f64,
}

impl LqrGain {
    /// A fixed gain without a Riccati certificate (e.g. a gain read from a file).
    pub fn from_gain(k: [f64; 4]) -> Self {
        Self {
            k: RowVector4::from(k),
            p: Matrix4::zeros(),
            residual: f64::NAN,
        }
    }
}

/// Dimension-generic Riccati solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CareSolution {
    pub p: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub residual: f64,
    pub steps: u64,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `A'P + PA - P B R^-1 B' P + Q`.
pub fn riccati_rhs(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pb = p * b;
    a.tr_mul(p) + p * a - (&pb * pb.transpose()) / r + q
}

/// Size of the rounding noise in a computed [`riccati_rhs`]; `||dP/dt||` cannot be
/// resolved below this.
pub fn riccati_rounding_floor(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
    p: &DMatrix<f64>,
) -> f64 {
    let pb = p * b;
    let scale = 2.0 * inf_norm(a) * inf_norm(p) + inf_norm(&(&pb * pb.transpose())) / r + inf_norm(q);
    4.0 * a.nrows() as f64 * f64::EPSILON * scale
}

/// Solves the CARE for arbitrary `(A, B)` with scalar input weight `R = r I`.
pub fn solve_care_matrices(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: f64,
) -> Result<CareSolution> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) {
        return Err(Error::invalid("A/B/Q", "inconsistent dimensions"));
    }
    validate_weights(q, r)?;

    let h = CARE_STEP;
    let f = |p: &DMatrix<f64>| riccati_rhs(a, b, q, r, p);
    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut steps = 0u64;
    let mut rate = f(&p);
    loop {
        let rate_norm = inf_norm(&rate);
        if !rate_norm.is_finite() {
            return Err(Error::CareNotConverged {
                steps,
                residual: rate_norm,
            });
        }
        if rate_norm <= CARE_TOLERANCE.max(riccati_rounding_floor(a, b, q, r, &p)) {
            break;
        }
        if steps >= CARE_MAX_STEPS {
            return Err(Error::CareNotConverged {
                steps,
                residual: rate_norm,
            });
        }
        let k1 = &rate;
        let k2 = f(&(&p + k1 * (0.5 * h)));
        let k3 = f(&(&p + &k2 * (0.5 * h)));
        let k4 = f(&(&p + &k3 * h));
        p += (k1 + &k2 * 2.0 + &k3 * 2.0 + k4) * (h / 6.0);
        p = (&p + p.transpose()) * 0.5;
        steps += 1;
        rate = f(&p);
    }

    let residual = inf_norm(&rate);
    let k = b.transpose() * &p / r;

    if residual > CARE_MAX_RESIDUAL {
        return Err(Error::InvalidCareSolution(format!("ARE residual {residual:e}")));
    }
    if (&p - p.transpose()).amax() > 1e-9 {
        return Err(Error::InvalidCareSolution("P not symmetric".into()));
    }
    let min_eig = p.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-9 {
        return Err(Error::InvalidCareSolution(format!(
            "P not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    let closed = a - b * &k;
    let max_re = closed
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(max_re < 0.0) {
        return Err(Error::InvalidCareSolution(format!(
            "A - BK not Hurwitz (max real part {max_re:e})"
        )));
    }

    Ok(CareSolution {
        p,
        k,
        residual,
        steps,
    })
}

/// LQR gain `K = R^-1 B' P` for the cart-pole model.
pub fn solve_care(model: &LinearModel, weights: &LqrWeights) -> Result<LqrGain> {
    let a = DMatrix::from_iterator(4, 4, model.a.iter().copied());
    let b = DMatrix::from_iterator(4, 1, model.b.iter().copied());
    let q = DMatrix::from_iterator(4, 4, weights.q.iter().copied());
    let sol = solve_care_matrices(&a, &b, &q, weights.r)?;
    Ok(LqrGain {
        k: RowVector4::from_iterator(sol.k.iter().copied()),
        p: Matrix4::from_iterator(sol.p.iter().copied()),
        residual: sol.residual,
    })
}

/// `u = -K X`.
pub fn lqr_feedback(gain: &LqrGain, state: &StateVector) -> f64 {
    -(gain.k * state.to_vector())[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn stable_plant_zero_cost() {
        let s = solve_care_matrices(&scalar(-1.0), &scalar(1.0), &scalar(0.0), 1.0).unwrap();
        assert_eq!(s.p[(0, 0)], 0.0);
        assert_eq!(s.k[(0, 0)], 0.0);
    }

    #[test]
    fn integrator_unit_weights() {
        // -P^2 + 1 = 0
        let s = solve_care_matrices(&scalar(0.0), &scalar(1.0), &scalar(1.0), 1.0).unwrap();
        assert!((s.p[(0, 0)] - 1.0).abs() < 1e-10);
        assert!((s.k[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn unstabilizable_pair_fails() {
        // unstable mode not reachable from the input
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let q = DMatrix::identity(2, 2);
        let r = solve_care_matrices(&a, &b, &q, 1.0);
        assert!(r.is_err(), "{r:?}");
    }

    #[test]
    fn weights_validation() {
        let mut w = LqrWeights::default();
        assert!(w.validate().is_ok());
        w.r = 0.0;
        assert!(w.validate().is_err());
        let mut w = LqrWeights::default();
        w.q[(0, 1)] = 1.0;
        assert!(w.validate().is_err());
        let mut w = LqrWeights::default();
        w.q[(0, 0)] = -1.0;
        assert!(w.validate().is_err());
    }

    #[test]
    fn feedback_examples() {
        let g = LqrGain::from_gain([-137.7896, -25.9783, -22.3607, -27.5768]);
        assert_eq!(lqr_feedback(&g, &StateVector::ZERO), 0.0);
        let u = lqr_feedback(&g, &StateVector::new(0.0, 0.0, 0.1, 0.0));
        assert!((u - 2.23607).abs() < 1e-12);
    }
}
