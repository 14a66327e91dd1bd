//! Step-response characteristics, the ISE family of tuning objectives and the quadratic
//! cost integrals used to compare controllers.
//!
//! All time integrals use the trapezoidal rule over the trace's own sampling grid.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::control::{SimTrace, StateFrame, TraceSample};
use crate::error::{Error, Result};
use crate::plant::StateVector;

/// Cost assigned by settling-time and overshoot objectives when the metric is undefined.
pub const NON_SETTLING_PENALTY: f64 = 1e6;

/// Default settling tube half-width as a fraction of the step amplitude.
pub const DEFAULT_SETTLING_BAND: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Theta,
    X,
}

impl Channel {
    #[inline]
    fn read(self, s: &TraceSample) -> (f64, f64) {
        match self {
            Channel::Theta => (s.state.theta, s.theta_ref),
            Channel::X => (s.state.x, s.x_ref),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    /// 10% to 90% rise time in s; `None` if the response never reaches both levels.
    pub rise_time: Option<f64>,
    /// Time after which the response stays inside the settling tube; `None` if it is
    /// still outside at the end of the trace.
    pub settling_time: Option<f64>,
    /// Peak excursion past the reference in percent of the step amplitude, floored at 0.
    pub overshoot: f64,
    /// `ref - y` at the last sample.
    pub steady_state_error: f64,
}

/// Time at which the normalized response first reaches `level`, linearly interpolated.
fn first_crossing(t: &[f64], z: &[f64], level: f64) -> Option<f64> {
    let k = z.iter().position(|&v| v >= level)?;
    if k == 0 {
        return Some(t[0]);
    }
    let (z0, z1) = (z[k - 1], z[k]);
    Some(t[k - 1] + (level - z0) / (z1 - z0) * (t[k] - t[k - 1]))
}

/// Step-response metrics of one channel against its final reference value.
///
/// The step is taken from the channel's first sample to the last sample's reference.
/// `band` is the settling tube half-width as a fraction of the amplitude.
pub fn step_metrics(trace: &SimTrace, channel: Channel, band: f64) -> Result<StepMetrics> {
    if trace.is_empty() {
        return Err(Error::UndefinedMetric("empty trace"));
    }
    if !(band > 0.0 && band < 1.0) {
        return Err(Error::invalid("band", format!("must be in (0, 1), got {band}")));
    }
    let t: Vec<f64> = trace.iter().map(|s| s.t).collect();
    let (y, r): (Vec<f64>, Vec<f64>) = trace.iter().map(|s| channel.read(s)).unzip();
    let target = *r.last().unwrap();
    let y0 = y[0];
    let y_last = *y.last().unwrap();
    let t0 = t[0];

    let amplitude = target - y0;
    let scale = target.abs().max(y0.abs()).max(1.0);
    if amplitude.abs() <= f64::EPSILON * scale {
        let flat = y.iter().all(|v| (v - target).abs() <= f64::EPSILON * scale);
        return if flat {
            Ok(StepMetrics {
                rise_time: None,
                settling_time: Some(0.0),
                overshoot: 0.0,
                steady_state_error: target - y_last,
            })
        } else {
            Err(Error::UndefinedMetric("zero-amplitude step"))
        };
    }

    let z: Vec<f64> = y.iter().map(|v| (v - y0) / amplitude).collect();
    let rise_time = match (first_crossing(&t, &z, 0.1), first_crossing(&t, &z, 0.9)) {
        (Some(t10), Some(t90)) => Some(t90 - t10),
        _ => None,
    };

    let tube = band * amplitude.abs();
    let settling_time = match y.iter().rposition(|v| (v - target).abs() > tube) {
        None => Some(0.0),
        Some(k) if k + 1 == y.len() => None,
        Some(k) => {
            let d0 = y[k] - target;
            let d1 = y[k + 1] - target;
            let edge = tube.copysign(d0);
            let frac = ((d0 - edge) / (d0 - d1)).clamp(0.0, 1.0);
            Some(t[k] + frac * (t[k + 1] - t[k]) - t0)
        }
    };

    let peak = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(StepMetrics {
        rise_time,
        settling_time,
        overshoot: ((peak - 1.0) * 100.0).max(0.0),
        steady_state_error: target - y_last,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectiveKind {
    #[serde(rename = "ISE")]
    Ise,
    #[serde(rename = "ISE-AB")]
    IseAb,
    #[serde(rename = "ISE-ST")]
    IseSt,
    #[serde(rename = "ISE-OS")]
    IseOs,
}

impl ObjectiveKind {
    pub const ALL: [ObjectiveKind; 4] = [
        ObjectiveKind::Ise,
        ObjectiveKind::IseSt,
        ObjectiveKind::IseOs,
        ObjectiveKind::IseAb,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectiveKind::Ise => "ISE",
            ObjectiveKind::IseAb => "ISE-AB",
            ObjectiveKind::IseSt => "ISE-ST",
            ObjectiveKind::IseOs => "ISE-OS",
        }
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "ISE" => Ok(ObjectiveKind::Ise),
            "ISE-AB" => Ok(ObjectiveKind::IseAb),
            "ISE-ST" | "ISE-TS" => Ok(ObjectiveKind::IseSt),
            "ISE-OS" => Ok(ObjectiveKind::IseOs),
            _ => Err(Error::invalid("objective", format!("unknown kind {s:?}"))),
        }
    }
}

/// A tuning criterion with its weights. Weights not used by `kind` are ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    pub w_theta: f64,
    pub w_x: f64,
    /// Absolute-error weights of ISE-AB.
    pub w_theta_abs: f64,
    pub w_x_abs: f64,
    /// Settling-time weight of ISE-ST (per second).
    pub w_settle: f64,
    /// Overshoot weight of ISE-OS (per percent).
    pub w_overshoot: f64,
    /// Settling band used by ISE-ST and ISE-OS step metrics.
    pub band: f64,
}

impl ObjectiveSpec {
    pub fn new(kind: ObjectiveKind) -> Self {
        let base = Self {
            kind,
            w_theta: 0.5,
            w_x: 0.5,
            w_theta_abs: 0.0,
            w_x_abs: 0.0,
            w_settle: 0.0,
            w_overshoot: 0.0,
            band: DEFAULT_SETTLING_BAND,
        };
        match kind {
            ObjectiveKind::Ise => base,
            ObjectiveKind::IseAb => Self {
                w_theta: 0.25,
                w_x: 0.25,
                w_theta_abs: 0.25,
                w_x_abs: 0.25,
                ..base
            },
            ObjectiveKind::IseSt => Self {
                w_settle: 0.1,
                ..base
            },
            ObjectiveKind::IseOs => Self {
                w_overshoot: 0.1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, w) in [
            ("w_theta", self.w_theta),
            ("w_x", self.w_x),
            ("w_theta_abs", self.w_theta_abs),
            ("w_x_abs", self.w_x_abs),
            ("w_settle", self.w_settle),
            ("w_overshoot", self.w_overshoot),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(field, format!("must be >= 0, got {w}")));
            }
        }
        if !(self.band > 0.0 && self.band < 1.0) {
            return Err(Error::invalid("band", format!("must be in (0, 1), got {}", self.band)));
        }
        Ok(())
    }
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        Self::new(ObjectiveKind::Ise)
    }
}

/// Trapezoidal integral of `f` over the trace's sample times.
pub fn trapezoid(trace: &SimTrace, f: impl Fn(&TraceSample) -> f64) -> f64 {
    let mut acc = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for s in trace.iter() {
        let v = f(s);
        if let Some((t0, v0)) = prev {
            acc += 0.5 * (v0 + v) * (s.t - t0);
        }
        prev = Some((s.t, v));
    }
    acc
}

/// `\int w_theta e_theta^2 + w_x e_x^2` with the configured weights.
pub fn ise(trace: &SimTrace, spec: &ObjectiveSpec) -> f64 {
    trapezoid(trace, |s| {
        let (et, ex) = (s.error_theta(), s.error_x());
        spec.w_theta * et * et + spec.w_x * ex * ex
    })
}

/// Value of the tuning criterion on a finished run.
///
/// ISE-ST and ISE-OS runs whose cart-position metric is undefined score
/// [`NON_SETTLING_PENALTY`].
pub fn evaluate_objective(trace: &SimTrace, spec: &ObjectiveSpec) -> f64 {
    let base = ise(trace, spec);
    let extra = match spec.kind {
        ObjectiveKind::Ise => 0.0,
        ObjectiveKind::IseAb => trapezoid(trace, |s| {
            spec.w_theta_abs * s.error_theta().abs() + spec.w_x_abs * s.error_x().abs()
        }),
        ObjectiveKind::IseSt => match step_metrics(trace, Channel::X, spec.band) {
            Ok(StepMetrics {
                settling_time: Some(ts),
                ..
            }) => spec.w_settle * ts,
            _ => return NON_SETTLING_PENALTY,
        },
        ObjectiveKind::IseOs => match step_metrics(trace, Channel::X, spec.band) {
            Ok(m) => spec.w_overshoot * m.overshoot,
            Err(_) => return NON_SETTLING_PENALTY,
        },
    };
    base + extra
}

/// Weights of the LQR performance index and of the network's one-step cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticWeights {
    pub q: Matrix4<f64>,
    pub r: f64,
    pub q_nn: Matrix4<f64>,
    pub r_nn: f64,
}

impl Default for QuadraticWeights {
    fn default() -> Self {
        Self {
            q: Matrix4::from_diagonal(&[1.0, 1.0, 500.0, 250.0].into()),
            r: 1.0,
            q_nn: Matrix4::from_diagonal(&[1.0, 1.0, 50.0, 25.0].into()),
            r_nn: 0.016,
        }
    }
}

#[inline]
fn quad(m: &Matrix4<f64>, x: &StateVector) -> f64 {
    let v = x.to_vector();
    v.dot(&(m * v))
}

/// `U = 1/2 (X'QX + R u^2)`.
pub fn utility(x: &StateVector, u: f64, q: &Matrix4<f64>, r: f64) -> f64 {
    0.5 * (quad(q, x) + r * u * u)
}

/// `F = X'Q_nn X + R_nn u^2`, the continuous-time reading of the network cost.
pub fn nn_cost_rate(x: &StateVector, u: f64, q_nn: &Matrix4<f64>, r_nn: f64) -> f64 {
    quad(q_nn, x) + r_nn * u * u
}

/// `(\int U, \int F)` over the trace with the state expressed in `frame`.
pub fn quadratic_integrals(trace: &SimTrace, w: &QuadraticWeights, frame: StateFrame) -> (f64, f64) {
    let x = |s: &TraceSample| frame.apply(&s.state, s.theta_ref, s.x_ref);
    (
        trapezoid(trace, |s| utility(&x(s), s.u, &w.q, w.r)),
        trapezoid(trace, |s| nn_cost_rate(&x(s), s.u, &w.q_nn, w.r_nn)),
    )
}

/// Running `\int_0^t |e_x|` at every sample.
pub fn cumulative_abs_error_x(trace: &SimTrace) -> Vec<f64> {
    let mut out = Vec::with_capacity(trace.len());
    let mut acc = 0.0;
    let mut prev: Option<&TraceSample> = None;
    for s in trace.iter() {
        if let Some(p) = prev {
            acc += 0.5 * (p.error_x().abs() + s.error_x().abs()) * (s.t - p.t);
        }
        out.push(acc);
        prev = Some(s);
    }
    out
}
