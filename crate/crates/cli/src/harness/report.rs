use std::collections::BTreeMap;

use balance_core::{LqrGain, PidGains, StepMetrics};
use serde::{Deserialize, Serialize};

/// Outcome of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub controller: String,
    pub gains: PidGains,
    /// Cart-position step characteristics; absent for square-wave runs and undefined steps.
    pub step: Option<StepMetrics>,
    pub ise: f64,
    /// Every tuning criterion evaluated on this run, keyed by name.
    pub objectives: BTreeMap<String, f64>,
    pub int_u: f64,
    pub int_f: f64,
    /// `int |e_x| dt` over the whole run.
    pub cumulative_abs_error_x: f64,
    /// Trace file relative to the output directory.
    pub trace: Option<String>,
}

impl ScenarioReport {
    pub fn rise_time(&self) -> Option<f64> {
        self.step.and_then(|s| s.rise_time)
    }

    pub fn settling_time(&self) -> Option<f64> {
        self.step.and_then(|s| s.settling_time)
    }

    pub fn overshoot(&self) -> Option<f64> {
        self.step.map(|s| s.overshoot)
    }

    /// Checks that every numeric field is finite.
    pub fn is_finite(&self) -> bool {
        let step_ok = self.step.is_none_or(|s| {
            s.overshoot.is_finite()
                && s.steady_state_error.is_finite()
                && s.rise_time.is_none_or(f64::is_finite)
                && s.settling_time.is_none_or(f64::is_finite)
        });
        step_ok
            && self.gains.is_finite()
            && [self.ise, self.int_u, self.int_f, self.cumulative_abs_error_x]
                .iter()
                .chain(self.objectives.values())
                .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqrReport {
    pub k: [f64; 4],
    pub p: [[f64; 4]; 4],
    pub residual: f64,
}

impl From<&LqrGain> for LqrReport {
    fn from(g: &LqrGain) -> Self {
        Self {
            k: [g.k[0], g.k[1], g.k[2], g.k[3]],
            p: std::array::from_fn(|i| std::array::from_fn(|j| g.p[(i, j)])),
            residual: g.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedGains {
    pub objective: String,
    pub seed: u64,
    pub best_run: usize,
    pub best_cost: f64,
    pub gains: PidGains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub retuned: bool,
    pub lqr: Option<LqrReport>,
    pub tuned: Vec<TunedGains>,
    pub scenarios: Vec<ScenarioReport>,
}

impl RunReport {
    pub fn scenario(&self, name: &str) -> Option<&ScenarioReport> {
        self.scenarios.iter().find(|s| s.name == name)
    }
}
