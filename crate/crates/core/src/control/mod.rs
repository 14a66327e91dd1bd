//! Controllers and closed-loop simulation.
//!
//! The control input is always `u = u_pid + u_fb`, where `u_fb` is zero (PID only),
//! `-K X` (PID + LQR) or the policy network output (PID + NN).

mod lqr;
mod pid;
mod sim;

pub use lqr::{
    lqr_feedback, riccati_rhs, riccati_rounding_floor, solve_care, solve_care_matrices, CareSolution, LqrGain, LqrWeights,
    CARE_MAX_RESIDUAL, CARE_MAX_STEPS, CARE_STEP, CARE_TOLERANCE,
};
pub use pid::{pid_update, PidGains, PidState};
pub use sim::{
    closed_loop_sim, ReferenceSignal, Scenario, SimTrace, StateFeedback, StateFrame, TraceSample,
};
