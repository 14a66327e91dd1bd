use balance_core::plant::{
    linear_derivative, linearize, nonlinear_derivative, step_rk4, PlantModel,
};
use balance_core::{LinearModel, PlantParams, StateVector};
use nalgebra::{Matrix4, Vector4};
use proptest::prelude::*;

/// `exp(A dt) x` from the first eight terms of the power series.
fn expm_series(a: &Matrix4<f64>, dt: f64, x: &Vector4<f64>) -> Vector4<f64> {
    let mut term = *x;
    let mut sum = *x;
    for k in 1..8 {
        term = a * term * (dt / k as f64);
        sum += term;
    }
    sum
}

fn propagate(model: &LinearModel, x0: StateVector, dt: f64, horizon: f64) -> StateVector {
    let n = (horizon / dt).round() as usize;
    (0..n).fold(x0, |x, _| step_rk4(model, &x, 0.0, dt).unwrap())
}

fn exact(model: &LinearModel, x0: StateVector, dt: f64, horizon: f64) -> Vector4<f64> {
    let n = (horizon / dt).round() as usize;
    (0..n).fold(x0.to_vector(), |x, _| expm_series(&model.a, dt, &x))
}

#[test]
fn rk4_step_matches_matrix_exponential() {
    let m = LinearModel::printed();
    let x0 = StateVector::new(0.01, 0.0, 0.0, 0.0);
    let rk = step_rk4(&m, &x0, 0.0, 1e-3).unwrap().to_vector();
    let ex = expm_series(&m.a, 1e-3, &x0.to_vector());
    assert!((rk - ex).amax() < 1e-10, "{}", (rk - ex).amax());
}

#[test]
fn rk4_is_fourth_order() {
    let m = LinearModel::printed();
    let x0 = StateVector::new(0.01, 0.0, 0.0, 0.0);
    let err = |dt: f64| {
        let x = propagate(&m, x0, dt, 1.0).to_vector();
        (x - exact(&m, x0, dt, 1.0)).amax()
    };
    let (e4, e2, e1) = (err(4e-3), err(2e-3), err(1e-3));
    for ratio in [e4 / e2, e2 / e1] {
        assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
    }
}

#[test]
fn halving_step_changes_endpoint_little() {
    let m = LinearModel::printed();
    let x0 = StateVector::new(0.01, 0.0, 0.0, 0.0);
    let a = propagate(&m, x0, 1e-3, 1.0);
    let b = propagate(&m, x0, 5e-4, 1.0);
    assert!(a.sub(b).max_abs() < 1e-8, "{}", a.sub(b).max_abs());
}

#[test]
fn printed_model_is_open_loop_unstable() {
    let a = LinearModel::printed().a;
    let max_re = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max_re >= 5.0, "{max_re}");
}

#[test]
fn linear_derivative_examples() {
    let m = LinearModel::printed();
    let d = linear_derivative(&m, &StateVector::new(0.1, 0.0, 0.0, 0.0), 0.0);
    let want = [0.0, 2.98615, 0.0, -0.09401];
    for (g, w) in d.to_array().iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
    }
    let d = linear_derivative(&m, &StateVector::ZERO, 2.0);
    let want = [0.0, -2.3148, 0.0, 0.8334];
    for (g, w) in d.to_array().iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
    }
}

fn rig() -> PlantParams {
    PlantParams::default().with_gravity(9.81)
}

fn small_state() -> impl Strategy<Value = StateVector> {
    prop::array::uniform4(-1e-4..1e-4f64).prop_map(StateVector::from_array)
}

proptest! {
    #[test]
    fn small_angle_models_agree(x in small_state(), u in -1e-4..1e-4f64) {
        let p = rig();
        let lin = linear_derivative(&linearize(&p), &x, u);
        let non = nonlinear_derivative(&p, &x, u).unwrap();
        prop_assert!(lin.sub(non).max_abs() < 1e-6);
    }

    #[test]
    fn equilibrium_is_preserved(dt in 1e-6..0.5f64) {
        for model in [PlantModel::Linear(LinearModel::printed()), PlantModel::Nonlinear(rig())] {
            prop_assert_eq!(step_rk4(&model, &StateVector::ZERO, 0.0, dt).unwrap(), StateVector::ZERO);
        }
    }

    #[test]
    fn linear_derivative_is_linear(
        x in prop::array::uniform4(-1.0..1.0f64),
        y in prop::array::uniform4(-1.0..1.0f64),
        u in -5.0..5.0f64,
        v in -5.0..5.0f64,
    ) {
        let m = LinearModel::printed();
        let (x, y) = (StateVector::from_array(x), StateVector::from_array(y));
        let sum = linear_derivative(&m, &x.add_scaled(1.0, y), u + v);
        let parts = linear_derivative(&m, &x, u).add_scaled(1.0, linear_derivative(&m, &y, v));
        prop_assert!(sum.sub(parts).max_abs() < 1e-12);
    }

    #[test]
    fn linearize_structure(
        big_m in 0.1..100.0f64,
        m in 0.01..10.0f64,
        l in 0.05..5.0f64,
        g in 1.0..20.0f64,
    ) {
        let lm = linearize(&PlantParams::new(big_m, m, l, g).unwrap());
        prop_assert_eq!(lm.a[(0, 1)], 1.0);
        prop_assert_eq!(lm.a[(2, 3)], 1.0);
        prop_assert_eq!(lm.b[0], 0.0);
        prop_assert_eq!(lm.b[2], 0.0);
        prop_assert!(lm.a[(1, 0)] > 0.0 && lm.a[(3, 0)] < 0.0);
        prop_assert!(lm.b[1] < 0.0 && lm.b[3] > 0.0);
    }
}
