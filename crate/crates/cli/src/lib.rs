//! Experiment harness around `balance-core`.

pub mod harness;
