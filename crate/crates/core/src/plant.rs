//! Cart-pole dynamics: the nonlinear equations of motion, their linearization about the
//! upright equilibrium, and a fixed-step RK4 integrator with zero-order hold on the input.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of the inverted-pendulum-cart system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantParams {
    /// Cart mass `M` in kg.
    pub cart_mass: f64,
    /// Point mass at the pendulum tip `m` in kg.
    pub bob_mass: f64,
    /// Pendulum length `l` in m.
    pub pendulum_length: f64,
    /// Gravitational acceleration `g` in m/s^2.
    pub gravity: f64,
}

impl Default for PlantParams {
    /// Tabulated rig values. Note `g = 9.8` here while [`LinearModel::printed`] was printed
    /// with `g = 9.81`; both are kept as published.
    fn default() -> Self {
        Self {
            cart_mass: 2.4,
            bob_mass: 0.23,
            pendulum_length: 0.36,
            gravity: 9.8,
        }
    }
}

impl PlantParams {
    pub fn new(cart_mass: f64, bob_mass: f64, pendulum_length: f64, gravity: f64) -> Result<Self> {
        let p = Self {
            cart_mass,
            bob_mass,
            pendulum_length,
            gravity,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("cart_mass", self.cart_mass),
            ("bob_mass", self.bob_mass),
            ("pendulum_length", self.pendulum_length),
            ("gravity", self.gravity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Same masses and length with `g = 9.81`, the value the printed matrices imply.
    pub fn with_gravity(self, gravity: f64) -> Self {
        Self { gravity, ..self }
    }
}

/// Plant state `(theta, theta_dot, x, x_dot)` in rad, rad/s, m, m/s.
///
/// Also used for state derivatives, in which case the components are the time
/// derivatives of the respective fields.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub theta: f64,
    pub theta_dot: f64,
    pub x: f64,
    pub x_dot: f64,
}

impl StateVector {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(theta: f64, theta_dot: f64, x: f64, x_dot: f64) -> Self {
        Self {
            theta,
            theta_dot,
            x,
            x_dot,
        }
    }

    pub const fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub const fn to_array(self) -> [f64; 4] {
        [self.theta, self.theta_dot, self.x, self.x_dot]
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::from(self.to_array())
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `self + h * d`, component-wise.
    #[inline]
    pub fn add_scaled(self, h: f64, d: Self) -> Self {
        Self::new(
            self.theta + h * d.theta,
            self.theta_dot + h * d.theta_dot,
            self.x + h * d.x,
            self.x_dot + h * d.x_dot,
        )
    }

    pub fn sub(self, o: Self) -> Self {
        self.add_scaled(-1.0, o)
    }

    pub fn scale(self, c: f64) -> Self {
        Self::ZERO.add_scaled(c, self)
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Linearized model `X' = A X + B u` about the upright equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub a: Matrix4<f64>,
    pub b: Vector4<f64>,
}

impl LinearModel {
    /// The numeric state-space matrices as printed for the reference rig.
    pub fn printed() -> Self {
        Self::from_entries(29.8615, -0.9401, -1.1574, 0.4167)
    }

    /// Builds the model from the four non-structural entries
    /// `A[1][0]`, `A[3][0]`, `B[1]`, `B[3]`.
    pub fn from_entries(a10: f64, a30: f64, b1: f64, b3: f64) -> Self {
        #[rustfmt::skip]
        let a = Matrix4::new(
            0.0, 1.0, 0.0, 0.0,
            a10, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            a30, 0.0, 0.0, 0.0,
        );
        Self {
            a,
            b: Vector4::new(0.0, b1, 0.0, b3),
        }
    }

    /// Accepts arbitrary matrices but enforces the structural entries of the cart-pole form.
    pub fn from_matrices(a: Matrix4<f64>, b: Vector4<f64>) -> Result<Self> {
        if a[(0, 1)] != 1.0 || a[(2, 3)] != 1.0 {
            return Err(Error::invalid("A", "A[0][1] and A[2][3] must be exactly 1"));
        }
        if b[0] != 0.0 || b[2] != 0.0 {
            return Err(Error::invalid("B", "B[0] and B[2] must be exactly 0"));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("linear model entry"));
        }
        Ok(Self { a, b })
    }
}

/// Jacobian linearization of the cart-pole equations at `theta = 0`.
pub fn linearize(params: &PlantParams) -> LinearModel {
    let PlantParams {
        cart_mass: big_m,
        bob_mass: m,
        pendulum_length: l,
        gravity: g,
    } = *params;
    LinearModel::from_entries(
        (big_m + m) * g / (big_m * l),
        -m * g / big_m,
        -1.0 / (big_m * l),
        1.0 / big_m,
    )
}

/// `A X + B u`.
#[inline]
pub fn linear_derivative(model: &LinearModel, state: &StateVector, u: f64) -> StateVector {
    StateVector::from_vector(&(model.a * state.to_vector() + model.b * u))
}

/// Time derivative of the full nonlinear cart-pole.
///
/// Solves, at the given state, the coupled pair
/// `(M+m) x'' - m l sin(th) th'^2 + m l cos(th) th'' = u` and
/// `m x'' cos(th) + m l th'' = m g sin(th)` for `(x'', th'')`.
pub fn nonlinear_derivative(
    params: &PlantParams,
    state: &StateVector,
    u: f64,
) -> Result<StateVector> {
    let PlantParams {
        cart_mass: big_m,
        bob_mass: m,
        pendulum_length: l,
        gravity: g,
    } = *params;
    let (s, c) = state.theta.sin_cos();

    // [a11 a12; a21 a22] [x''; th''] = [r1; r2]
    let a11 = big_m + m;
    let a12 = m * l * c;
    let a21 = m * c;
    let a22 = m * l;
    let r1 = u + m * l * s * state.theta_dot * state.theta_dot;
    let r2 = m * g * s;

    let det = a11 * a22 - a12 * a21;
    if det.abs() < 1e-12 {
        return Err(Error::DegenerateConfiguration { det });
    }
    let x_acc = (r1 * a22 - a12 * r2) / det;
    let theta_acc = (a11 * r2 - a21 * r1) / det;
    Ok(StateVector::new(state.theta_dot, theta_acc, state.x_dot, x_acc))
}

/// Anything that can produce a state derivative under a held input.
pub trait Dynamics {
    fn derivative(&self, state: &StateVector, u: f64) -> Result<StateVector>;
}

impl Dynamics for LinearModel {
    #[inline]
    fn derivative(&self, state: &StateVector, u: f64) -> Result<StateVector> {
        Ok(linear_derivative(self, state, u))
    }
}

impl Dynamics for PlantParams {
    fn derivative(&self, state: &StateVector, u: f64) -> Result<StateVector> {
        nonlinear_derivative(self, state, u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Linear,
    Nonlinear,
}

/// The plant as seen by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlantModel {
    Linear(LinearModel),
    Nonlinear(PlantParams),
}

impl Dynamics for PlantModel {
    #[inline]
    fn derivative(&self, state: &StateVector, u: f64) -> Result<StateVector> {
        match self {
            PlantModel::Linear(m) => m.derivative(state, u),
            PlantModel::Nonlinear(p) => p.derivative(state, u),
        }
    }
}

/// Classical four-stage Runge-Kutta step with `u` held over `[t, t + dt]`.
///
/// Returns [`Error::Diverged`] with `time = NaN` when the result is not finite; callers
/// that know the absolute time re-tag it.
pub fn step_rk4<D: Dynamics + ?Sized>(
    dynamics: &D,
    state: &StateVector,
    u: f64,
    dt: f64,
) -> Result<StateVector> {
    let k1 = dynamics.derivative(state, u)?;
    let k2 = dynamics.derivative(&state.add_scaled(0.5 * dt, k1), u)?;
    let k3 = dynamics.derivative(&state.add_scaled(0.5 * dt, k2), u)?;
    let k4 = dynamics.derivative(&state.add_scaled(dt, k3), u)?;
    let next = state
        .add_scaled(dt / 6.0, k1)
        .add_scaled(dt / 3.0, k2)
        .add_scaled(dt / 3.0, k3)
        .add_scaled(dt / 6.0, k4);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::Diverged { time: f64::NAN })
    }
}

/// Integrator settings for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Integrator and controller sample time in s.
    pub dt: f64,
    /// Simulated time span in s.
    pub horizon: f64,
    pub model_kind: ModelKind,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 15.0,
            model_kind: ModelKind::Linear,
        }
    }
}

impl SimConfig {
    /// Upper bound on the number of integrator steps of a single run.
    pub const MAX_STEPS: usize = 1 << 32;

    pub fn validate(&self) -> Result<()> {
        self.steps().map(|_| ())
    }

    /// Number of integrator steps, `round(horizon / dt)`.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::invalid(
                "horizon",
                format!("must be >= dt ({}), got {}", self.dt, self.horizon),
            ));
        }
        let n = (self.horizon / self.dt).round();
        if n > Self::MAX_STEPS as f64 {
            return Err(Error::invalid(
                "horizon",
                format!("horizon/dt = {n} exceeds {} steps", Self::MAX_STEPS),
            ));
        }
        Ok(n as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rig() -> PlantParams {
        PlantParams::default().with_gravity(9.81)
    }

    #[test]
    fn params_reject_non_positive() {
        assert!(PlantParams::new(0.0, 0.23, 0.36, 9.8).is_err());
        assert!(PlantParams::new(2.4, -1.0, 0.36, 9.8).is_err());
        assert!(PlantParams::new(2.4, 0.23, f64::NAN, 9.8).is_err());
        assert!(PlantParams::new(2.4, 0.23, 0.36, 9.8).is_ok());
    }

    #[test]
    fn linearize_closed_form_entries() {
        let lm = linearize(&rig());
        assert!((lm.a[(1, 0)] - 29.861_458).abs() < 1e-5);
        assert!((lm.a[(3, 0)] + 0.940_125).abs() < 1e-5);
        assert!((lm.b[1] + 1.157_407).abs() < 1e-5);
        assert!((lm.b[3] - 0.416_667).abs() < 1e-5);
        assert_eq!(lm.a[(0, 1)], 1.0);
        assert_eq!(lm.a[(2, 3)], 1.0);
        assert_eq!(lm.b[0], 0.0);
        assert_eq!(lm.b[2], 0.0);
    }

    #[test]
    fn linearize_matches_printed_matrices() {
        let lm = linearize(&rig());
        let printed = LinearModel::printed();
        assert!((lm.a - printed.a).amax() < 5e-3);
        assert!((lm.b - printed.b).amax() < 5e-3);
    }

    #[test]
    fn massive_cart_limit() {
        let lm = linearize(&PlantParams::new(1e6, 0.23, 0.36, 9.81).unwrap());
        assert!(lm.a[(3, 0)].abs() < 1e-5);
        assert!(lm.b[3].abs() < 1e-5);
    }

    #[test]
    fn structural_zeros_enforced() {
        let mut m = LinearModel::printed();
        assert!(LinearModel::from_matrices(m.a, m.b).is_ok());
        m.b[0] = 1e-9;
        assert!(LinearModel::from_matrices(m.a, m.b).is_err());
    }

    #[test]
    fn nonlinear_equilibrium_is_fixed() {
        let d = nonlinear_derivative(&rig(), &StateVector::ZERO, 0.0).unwrap();
        assert_eq!(d, StateVector::ZERO);
    }

    #[test]
    fn nonlinear_unit_force_at_equilibrium() {
        let d = nonlinear_derivative(&rig(), &StateVector::ZERO, 1.0).unwrap();
        assert!((d.x_dot - 1.0 / 2.4).abs() < 1e-12);
        assert!((d.theta_dot + 1.0 / (2.4 * 0.36)).abs() < 1e-12);
        assert!((d.x_dot - 0.41667).abs() < 1e-5);
        assert!((d.theta_dot + 1.1574).abs() < 1e-4);
    }

    #[test]
    fn nonlinear_degenerate_guard() {
        // det = m l (M + m sin^2 th) vanishes for a massless cart at th = 0
        let p = PlantParams {
            cart_mass: 1e-30,
            ..rig()
        };
        let s = StateVector::ZERO;
        assert!(matches!(
            nonlinear_derivative(&p, &s, 0.0),
            Err(Error::DegenerateConfiguration { .. })
        ));
    }

    #[test]
    fn linear_derivative_examples() {
        let m = LinearModel::printed();
        assert_eq!(linear_derivative(&m, &StateVector::ZERO, 0.0), StateVector::ZERO);

        let d = linear_derivative(&m, &StateVector::new(0.1, 0.0, 0.0, 0.0), 0.0);
        assert!((d.theta - 0.0).abs() < 1e-15);
        assert!((d.theta_dot - 2.98615).abs() < 1e-12);
        assert!((d.x - 0.0).abs() < 1e-15);
        assert!((d.x_dot + 0.09401).abs() < 1e-12);

        let d = linear_derivative(&m, &StateVector::ZERO, 2.0);
        assert_eq!(d.to_array(), [0.0, -2.3148, 0.0, 0.8334]);
    }

    #[test]
    fn rk4_zero_derivative_keeps_state() {
        let m = LinearModel::printed();
        for dt in [1e-4, 1e-3, 0.1, 1.0] {
            assert_eq!(step_rk4(&m, &StateVector::ZERO, 0.0, dt).unwrap(), StateVector::ZERO);
            assert_eq!(step_rk4(&rig(), &StateVector::ZERO, 0.0, dt).unwrap(), StateVector::ZERO);
        }
    }

    #[test]
    fn rk4_non_finite_is_divergence() {
        let m = LinearModel::printed();
        let s = StateVector::new(f64::MAX, 0.0, 0.0, 0.0);
        assert!(matches!(step_rk4(&m, &s, 0.0, 1.0), Err(Error::Diverged { .. })));
    }

    #[test]
    fn sim_config_steps() {
        assert_eq!(SimConfig::default().steps().unwrap(), 15_000);
        let bad = SimConfig {
            dt: 0.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            horizon: 1e-4,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let huge = SimConfig {
            dt: 1e-12,
            horizon: 1e3,
            ..SimConfig::default()
        };
        assert!(huge.validate().is_err());
    }
}
