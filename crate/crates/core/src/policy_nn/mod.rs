//! Grid-search policy and its neural-network approximation.
//!
//! A Q-table of one-step costs is tabulated over a discretized state box and action set,
//! the per-state argmin becomes a labelled dataset, and a small tanh network is fitted
//! to it with Levenberg-Marquardt.

mod grid;
mod net;
mod train;

pub use grid::{
    best_action, build_qtable, extract_policy, one_step_cost, Axis, Dataset, GridSpec,
    OneStepCost, QTable, DEFAULT_QTABLE_BUDGET,
};
pub use net::PolicyNet;
pub use train::{train_policy_net, EpochLog, StopReason, TrainConfig, TrainingReport};
