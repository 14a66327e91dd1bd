//! Simulation and gain-tuning toolkit for the inverted-pendulum-cart balance system.
//!
//! The crate is organised bottom-up:
//!
//! - [`plant`]: nonlinear and linearized cart-pole dynamics plus a fixed-step RK4 integrator.
//! - [`control`]: the coupled angle/position PID loops, the LQR gain from a continuous
//!   algebraic Riccati solve, and closed-loop simulation producing a [`SimTrace`].
//! - [`metrics`]: step-response characteristics, the ISE family of tuning objectives and
//!   the quadratic cost integrals used for comparison.
//! - [`nlta`]: nonlinear threshold accepting search over the six PID gains.
//! - [`policy_nn`]: Q-table tabulation of a one-step cost, per-state argmin policy
//!   extraction and a Levenberg-Marquardt trained 4-H-1 tanh network used as state feedback.
//!
//! State ordering is `(theta, theta_dot, x, x_dot)` everywhere.

pub mod control;
pub mod error;
pub mod metrics;
pub mod nlta;
pub mod plant;
pub mod policy_nn;

pub use control::{
    closed_loop_sim, lqr_feedback, pid_update, solve_care, LqrGain, LqrWeights, PidGains,
    PidState, ReferenceSignal, Scenario, SimTrace, StateFeedback, StateFrame, TraceSample,
};
pub use error::{Error, Result};
pub use metrics::{
    evaluate_objective, quadratic_integrals, step_metrics, Channel, ObjectiveKind, ObjectiveSpec,
    QuadraticWeights, StepMetrics,
};
pub use nlta::{NltaConfig, NltaOutcome, NltaRunRecord};
pub use plant::{LinearModel, ModelKind, PlantModel, PlantParams, SimConfig, StateVector};
pub use policy_nn::{GridSpec, PolicyNet, QTable};
