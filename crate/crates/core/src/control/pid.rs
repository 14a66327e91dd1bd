use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gains of the two interacting PID loops, angle loop first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp_theta: f64,
    pub ki_theta: f64,
    pub kd_theta: f64,
    pub kp_x: f64,
    pub ki_x: f64,
    pub kd_x: f64,
}

impl PidGains {
    /// Number of tunable gains.
    pub const LEN: usize = 6;

    pub const NAMES: [&'static str; 6] = ["kp_theta", "ki_theta", "kd_theta", "kp_x", "ki_x", "kd_x"];

    /// Baseline gains from the Riccati-based design the tuner is compared against.
    pub const PRASAD: Self = Self::from_array([-40.0, 0.0, -8.0, -1.0, 0.0, -3.0]);

    pub const fn from_array(a: [f64; 6]) -> Self {
        Self {
            kp_theta: a[0],
            ki_theta: a[1],
            kd_theta: a[2],
            kp_x: a[3],
            ki_x: a[4],
            kd_x: a[5],
        }
    }

    pub const fn to_array(self) -> [f64; 6] {
        [
            self.kp_theta,
            self.ki_theta,
            self.kd_theta,
            self.kp_x,
            self.ki_x,
            self.kd_x,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|g| g.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite("PID gain"))
        }
    }
}

/// Accumulators of the discrete PID realization.
///
/// Trapezoidal integral and backward-difference derivative on the error; the derivative
/// term is zero on the first sample after a reset.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PidState {
    pub integral_theta: f64,
    pub integral_x: f64,
    pub prev_error_theta: f64,
    pub prev_error_x: f64,
    pub initialized: bool,
}

impl PidState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }
}

/// One controller sample. Returns `u_pid = u_theta + u_x` and the advanced accumulators.
pub fn pid_update(
    gains: &PidGains,
    state: &PidState,
    e_theta: f64,
    e_x: f64,
    dt: f64,
) -> Result<(f64, PidState)> {
    if !(dt > 0.0) {
        return Err(Error::invalid("dt", format!("must be > 0, got {dt}")));
    }
    if !e_theta.is_finite() || !e_x.is_finite() {
        return Err(Error::NonFinite("tracking error"));
    }

    let (integral_theta, integral_x, de_theta, de_x) = if state.initialized {
        (
            state.integral_theta + 0.5 * (e_theta + state.prev_error_theta) * dt,
            state.integral_x + 0.5 * (e_x + state.prev_error_x) * dt,
            (e_theta - state.prev_error_theta) / dt,
            (e_x - state.prev_error_x) / dt,
        )
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };
    if !integral_theta.is_finite() || !integral_x.is_finite() {
        return Err(Error::NonFinite("PID integral"));
    }

    let u_theta = gains.kp_theta * e_theta + gains.ki_theta * integral_theta + gains.kd_theta * de_theta;
    let u_x = gains.kp_x * e_x + gains.ki_x * integral_x + gains.kd_x * de_x;

    let next = PidState {
        integral_theta,
        integral_x,
        prev_error_theta: e_theta,
        prev_error_x: e_x,
        initialized: true,
    };
    Ok((u_theta + u_x, next))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gains_zero_output() {
        let mut s = PidState::default();
        for (et, ex) in [(1.0, -2.0), (0.3, 5.0), (-7.0, 0.0)] {
            let (u, n) = pid_update(&PidGains::default(), &s, et, ex, 1e-3).unwrap();
            assert_eq!(u, 0.0);
            s = n;
        }
    }

    #[test]
    fn constant_error_pi() {
        let g = PidGains {
            kp_x: 2.0,
            ki_x: 1.0,
            ..PidGains::default()
        };
        let mut s = PidState::default();
        let mut u = 0.0;
        // samples at t = 0, 1 ms, ..., 1 s
        for _ in 0..=1000 {
            let (out, n) = pid_update(&g, &s, 0.0, 1.0, 1e-3).unwrap();
            u = out;
            s = n;
        }
        assert!((u - 3.0).abs() < 1e-3);
        assert!((s.integral_x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backward_difference_derivative() {
        let g = PidGains {
            kd_theta: -8.0,
            ..PidGains::default()
        };
        let (u0, s) = pid_update(&g, &PidState::default(), 0.0, 0.0, 1e-3).unwrap();
        assert_eq!(u0, 0.0);
        let (u1, _) = pid_update(&g, &s, 0.01, 0.0, 1e-3).unwrap();
        assert!((u1 + 80.0).abs() < 1e-9);
    }

    #[test]
    fn first_sample_has_no_derivative_kick() {
        let g = PidGains {
            kd_x: 100.0,
            ..PidGains::default()
        };
        let (u, _) = pid_update(&g, &PidState::default(), 0.0, 0.1, 1e-3).unwrap();
        assert_eq!(u, 0.0);
    }

    #[test]
    fn trapezoid_exact_for_ramp() {
        let g = PidGains {
            ki_theta: 1.0,
            ..PidGains::default()
        };
        let dt = 0.01;
        let mut s = PidState::default();
        for k in 0..=100 {
            let t = k as f64 * dt;
            s = pid_update(&g, &s, 3.0 * t - 1.0, 0.0, dt).unwrap().1;
        }
        // integral of 3t - 1 over [0, 1] = 0.5
        assert!((s.integral_theta - 0.5).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_input() {
        let s = PidState::default();
        assert!(pid_update(&PidGains::PRASAD, &s, f64::NAN, 0.0, 1e-3).is_err());
        assert!(pid_update(&PidGains::PRASAD, &s, 0.0, f64::INFINITY, 1e-3).is_err());
        assert!(pid_update(&PidGains::PRASAD, &s, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn reset_clears_everything() {
        let (_, mut s) = pid_update(&PidGains::PRASAD, &PidState::default(), 0.2, 0.1, 1e-3).unwrap();
        let (_, s2) = pid_update(&PidGains::PRASAD, &s, 0.4, 0.3, 1e-3).unwrap();
        s = s2;
        s.reset();
        assert_eq!(s, PidState::default());
    }
}
