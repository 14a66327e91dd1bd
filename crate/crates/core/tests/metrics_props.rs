use balance_core::control::{SimTrace, TraceSample};
use balance_core::metrics::{ise, trapezoid};
use balance_core::{
    closed_loop_sim, evaluate_objective, step_metrics, Channel, ObjectiveKind, ObjectiveSpec,
    PidGains, Scenario, StateVector,
};
use proptest::prelude::*;

/// Trace with references `(0, x_ref)` and channel values from `f(t) = (theta, x)`.
fn trace_from(dt: f64, n: usize, x_ref: f64, f: impl Fn(f64) -> (f64, f64)) -> SimTrace {
    SimTrace::new(
        (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let (theta, x) = f(t);
                TraceSample {
                    t,
                    state: StateVector::new(theta, 0.0, x, 0.0),
                    theta_ref: 0.0,
                    x_ref,
                    ..TraceSample::default()
                }
            })
            .collect(),
    )
}

fn smooth_response(t: f64) -> (f64, f64) {
    let e = (-1.5 * t).exp();
    (0.02 * e * (4.0 * t).sin(), 0.1 * (1.0 - e * (1.0 + 0.3 * (2.0 * t).sin())))
}

fn abs_part(trace: &SimTrace) -> f64 {
    let spec = ObjectiveSpec::new(ObjectiveKind::IseAb);
    evaluate_objective(trace, &spec) - ise(trace, &spec)
}

#[test]
fn abs_integral_exact_for_linear_error() {
    // e_x = 0.2 + 0.3 t > 0 so |e_x| is linear
    let tr = trace_from(0.01, 500, 1.0, |t| (0.0, 1.0 - (0.2 + 0.3 * t)));
    let exact = 0.25 * (0.2 * 5.0 + 0.15 * 25.0);
    assert!((abs_part(&tr) - exact).abs() < 1e-12);
}

#[test]
fn squared_integral_exact_for_linear_integrand() {
    // e_x^2 = 1 + t
    let tr = trace_from(0.01, 300, 0.0, |t| (0.0, -(1.0 + t).sqrt()));
    let spec = ObjectiveSpec::new(ObjectiveKind::Ise);
    let exact = 0.5 * (3.0 + 4.5);
    assert!((evaluate_objective(&tr, &spec) - exact).abs() < 1e-12);
}

#[test]
fn refinement_changes_objectives_little() {
    let fine = closed_loop_sim(&PidGains::PRASAD, &Scenario::default()).unwrap();
    let coarse = SimTrace::new(fine.samples.iter().step_by(2).copied().collect());
    assert_eq!(coarse.samples.last(), fine.samples.last());
    for kind in ObjectiveKind::ALL {
        let spec = ObjectiveSpec::new(kind);
        let (a, b) = (evaluate_objective(&fine, &spec), evaluate_objective(&coarse, &spec));
        assert!(((a - b) / a).abs() < 1e-3, "{kind}: {a} vs {b}");
    }
}

#[test]
fn rise_precedes_settling_on_closed_loop_runs() {
    let tr = closed_loop_sim(&PidGains::PRASAD, &Scenario::default()).unwrap();
    let m = step_metrics(&tr, Channel::X, 0.02).unwrap();
    assert!(m.rise_time.unwrap() <= m.settling_time.unwrap());
    assert!(m.overshoot >= 0.0);
}

proptest! {
    #[test]
    fn scaling_errors(c in -5.0..5.0f64) {
        let base = trace_from(0.01, 400, 0.0, |t| smooth_response(t));
        let scaled = trace_from(0.01, 400, 0.0, |t| {
            let (a, b) = smooth_response(t);
            (c * a, c * b)
        });
        let spec = ObjectiveSpec::new(ObjectiveKind::Ise);
        let (i0, i1) = (ise(&base, &spec), ise(&scaled, &spec));
        prop_assert!((i1 - c * c * i0).abs() <= 1e-12 * (1.0 + i1.abs()));
        let (a0, a1) = (abs_part(&base), abs_part(&scaled));
        prop_assert!((a1 - c.abs() * a0).abs() <= 1e-12 * (1.0 + a1.abs()));
    }

    #[test]
    fn larger_error_costs_more(
        start in 0.0..7.0f64,
        len in 0.05..1.0f64,
        bump in 1e-3..0.05f64,
    ) {
        let base = trace_from(1e-3, 8000, 0.1, smooth_response);
        let bumped = trace_from(1e-3, 8000, 0.1, |t| {
            let (th, x) = smooth_response(t);
            if (start..=start + len).contains(&t) {
                // push x away from the reference on whichever side it sits
                let side = if x >= 0.1 { 1.0 } else { -1.0 };
                (th, x + side * bump)
            } else {
                (th, x)
            }
        });
        for kind in ObjectiveKind::ALL {
            let spec = ObjectiveSpec::new(kind);
            let (a, b) = (evaluate_objective(&base, &spec), evaluate_objective(&bumped, &spec));
            prop_assert!(b > a, "{}: {} !> {}", kind, b, a);
        }
    }

    #[test]
    fn trapezoid_is_linear(a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let tr = trace_from(0.02, 100, 0.0, smooth_response);
        let f = |s: &TraceSample| s.state.theta;
        let g = |s: &TraceSample| s.state.x;
        let lhs = trapezoid(&tr, |s| a * f(s) + b * g(s));
        let rhs = a * trapezoid(&tr, f) + b * trapezoid(&tr, g);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn step_metric_invariants(k in 0.2..5.0f64, amp in prop_oneof![-1.0..-0.01f64, 0.01..1.0f64]) {
        let tr = trace_from(1e-3, 15000, amp, |t| {
            (0.0, amp * (1.0 - (-k * t).exp() * (1.0 + 0.8 * (3.0 * t).sin())))
        });
        let m = step_metrics(&tr, Channel::X, 0.02).unwrap();
        prop_assert!(m.overshoot >= 0.0);
        if let (Some(r), Some(s)) = (m.rise_time, m.settling_time) {
            prop_assert!(r <= s);
        }
    }
}
