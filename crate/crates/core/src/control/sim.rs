use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::lqr::{lqr_feedback, LqrGain};
use super::pid::{pid_update, PidGains, PidState};
use crate::error::{Error, Result};
use crate::plant::{step_rk4, LinearModel, ModelKind, PlantModel, PlantParams, SimConfig, StateVector};
use crate::policy_nn::PolicyNet;

/// Cart position and pendulum angle references as functions of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSignal {
    /// Constant references applied from `t = 0`.
    Step { x: f64, theta: f64 },
    /// Cart reference alternating between `low` (first half of each period) and `high`;
    /// the angle reference is 0.
    SquareWave { low: f64, high: f64, period: f64 },
}

impl Default for ReferenceSignal {
    fn default() -> Self {
        ReferenceSignal::Step { x: 0.1, theta: 0.0 }
    }
}

impl ReferenceSignal {
    pub fn square_default() -> Self {
        ReferenceSignal::SquareWave {
            low: 0.08,
            high: 0.12,
            period: 20.0,
        }
    }

    /// `(theta_ref, x_ref)` at time `t`.
    #[inline]
    pub fn at(&self, t: f64) -> (f64, f64) {
        match *self {
            ReferenceSignal::Step { x, theta } => (theta, x),
            ReferenceSignal::SquareWave { low, high, period } => {
                let phase = t.rem_euclid(period);
                (0.0, if phase < 0.5 * period { low } else { high })
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ReferenceSignal::Step { x, theta } => {
                if !x.is_finite() || !theta.is_finite() {
                    return Err(Error::NonFinite("step reference"));
                }
            }
            ReferenceSignal::SquareWave { low, high, period } => {
                if !low.is_finite() || !high.is_finite() {
                    return Err(Error::NonFinite("square-wave level"));
                }
                if !(period.is_finite() && period > 0.0) {
                    return Err(Error::invalid("period", format!("must be > 0, got {period}")));
                }
            }
        }
        Ok(())
    }
}

/// Coordinates the state-feedback term and the quadratic cost integrals see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFrame {
    /// The plant state as is.
    Raw,
    /// `X - X_ref` with `X_ref = (theta_ref, 0, x_ref, 0)`.
    #[default]
    Deviation,
}

impl StateFrame {
    #[inline]
    pub fn apply(self, state: &StateVector, theta_ref: f64, x_ref: f64) -> StateVector {
        match self {
            StateFrame::Raw => *state,
            StateFrame::Deviation => StateVector::new(
                state.theta - theta_ref,
                state.theta_dot,
                state.x - x_ref,
                state.x_dot,
            ),
        }
    }
}

/// Extra state-feedback loop added to the PID output.
#[derive(Debug, Clone, Default)]
pub enum StateFeedback {
    #[default]
    None,
    /// `u_fb = -K X`.
    Lqr(LqrGain),
    /// `u_fb = NN(X)`.
    Nn(Arc<PolicyNet>),
}

impl StateFeedback {
    #[inline]
    pub fn output(&self, state: &StateVector) -> f64 {
        match self {
            StateFeedback::None => 0.0,
            StateFeedback::Lqr(g) => lqr_feedback(g, state),
            StateFeedback::Nn(net) => net.feedback(state),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            StateFeedback::None => "pid",
            StateFeedback::Lqr(_) => "pid+lqr",
            StateFeedback::Nn(_) => "pid+nn",
        }
    }
}

/// Everything a closed-loop run needs besides the PID gains.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Used when `sim.model_kind` is linear.
    pub linear_model: LinearModel,
    /// Used when `sim.model_kind` is nonlinear.
    pub params: PlantParams,
    pub sim: SimConfig,
    pub reference: ReferenceSignal,
    pub feedback: StateFeedback,
    pub frame: StateFrame,
    pub initial_state: StateVector,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            linear_model: LinearModel::printed(),
            params: PlantParams::default(),
            sim: SimConfig::default(),
            reference: ReferenceSignal::default(),
            feedback: StateFeedback::None,
            frame: StateFrame::Deviation,
            initial_state: StateVector::ZERO,
        }
    }
}

impl Scenario {
    pub fn plant(&self) -> PlantModel {
        match self.sim.model_kind {
            ModelKind::Linear => PlantModel::Linear(self.linear_model),
            ModelKind::Nonlinear => PlantModel::Nonlinear(self.params),
        }
    }

    pub fn with_feedback(mut self, feedback: StateFeedback) -> Self {
        self.feedback = feedback;
        self
    }

    pub fn with_reference(mut self, reference: ReferenceSignal) -> Self {
        self.reference = reference;
        self
    }
}

/// One controller sample of a closed-loop run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub state: StateVector,
    pub u: f64,
    pub u_pid: f64,
    pub u_fb: f64,
    pub theta_ref: f64,
    pub x_ref: f64,
}

impl TraceSample {
    #[inline]
    pub fn error_theta(&self) -> f64 {
        self.theta_ref - self.state.theta
    }

    #[inline]
    pub fn error_x(&self) -> f64 {
        self.x_ref - self.state.x
    }
}

/// Time-indexed record of a closed-loop run on a uniform grid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub samples: Vec<TraceSample>,
}

impl SimTrace {
    pub fn new(samples: Vec<TraceSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceSample> {
        self.samples.iter()
    }
}

/// Simulates the PID loops (plus optional state feedback) against the scenario plant.
///
/// At every sample `k` the tracking errors `e = ref - y` drive the PID, the feedback term
/// is evaluated in `scenario.frame`, the sample is recorded and the plant is advanced
/// one RK4 step with `u = u_pid + u_fb` held. The trace has `horizon/dt + 1` samples.
pub fn closed_loop_sim(gains: &PidGains, scenario: &Scenario) -> Result<SimTrace> {
    gains.validate()?;
    scenario.reference.validate()?;
    let n = scenario.sim.steps()?;
    let dt = scenario.sim.dt;
    let plant = scenario.plant();
    let diverged = |time: f64| Error::SimulationDiverged { time, gains: *gains };

    let mut x = scenario.initial_state;
    if !x.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let mut pid = PidState::default();
    let mut samples = Vec::with_capacity(n + 1);

    for k in 0..=n {
        let t = k as f64 * dt;
        let (theta_ref, x_ref) = scenario.reference.at(t);
        let (u_pid, next_pid) = pid_update(gains, &pid, theta_ref - x.theta, x_ref - x.x, dt)
            .map_err(|_| diverged(t))?;
        pid = next_pid;
        let u_fb = scenario
            .feedback
            .output(&scenario.frame.apply(&x, theta_ref, x_ref));
        let u = u_pid + u_fb;
        if !u.is_finite() {
            return Err(diverged(t));
        }
        samples.push(TraceSample {
            t,
            state: x,
            u,
            u_pid,
            u_fb,
            theta_ref,
            x_ref,
        });
        if k < n {
            x = match step_rk4(&plant, &x, u, dt) {
                Ok(next) => next,
                Err(Error::Diverged { .. }) => return Err(diverged(t + dt)),
                Err(e) => return Err(e),
            };
        }
    }
    Ok(SimTrace { samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_everything_is_zero_trace() {
        let sc = Scenario::default().with_reference(ReferenceSignal::Step { x: 0.0, theta: 0.0 });
        let tr = closed_loop_sim(&PidGains::default(), &sc).unwrap();
        assert_eq!(tr.len(), 15_001);
        assert!(tr.iter().all(|s| s.state == StateVector::ZERO && s.u == 0.0));
    }

    #[test]
    fn square_wave_levels() {
        let r = ReferenceSignal::square_default();
        assert_eq!(r.at(0.0), (0.0, 0.08));
        assert_eq!(r.at(9.999), (0.0, 0.08));
        assert_eq!(r.at(10.0), (0.0, 0.12));
        assert_eq!(r.at(20.0), (0.0, 0.08));
        assert_eq!(r.at(35.0), (0.0, 0.12));
    }

    #[test]
    fn deviation_frame() {
        let s = StateVector::new(0.1, 0.2, 0.3, 0.4);
        assert_eq!(StateFrame::Raw.apply(&s, 0.05, 0.1), s);
        let d = StateFrame::Deviation.apply(&s, 0.05, 0.1);
        assert_eq!(d.to_array(), [0.1 - 0.05, 0.2, 0.3 - 0.1, 0.4]);
    }

    #[test]
    fn open_loop_diverges_with_time() {
        let sc = Scenario {
            initial_state: StateVector::new(0.01, 0.0, 0.0, 0.0),
            sim: SimConfig {
                horizon: 400.0,
                ..SimConfig::default()
            },
            ..Scenario::default()
        }
        .with_reference(ReferenceSignal::Step { x: 0.0, theta: 0.0 });
        match closed_loop_sim(&PidGains::default(), &sc) {
            Err(Error::SimulationDiverged { time, gains }) => {
                assert!(time > 10.0 && time < 400.0, "{time}");
                assert_eq!(gains, PidGains::default());
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn prasad_tracks_step() {
        let tr = closed_loop_sim(&PidGains::PRASAD, &Scenario::default()).unwrap();
        let last = tr.samples.last().unwrap();
        assert!((last.state.x - 0.1).abs() < 1e-3);
        assert!(last.state.theta.abs() < 1e-4);
    }
}
