use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use balance_core::metrics::{cumulative_abs_error_x, ise};
use balance_core::nlta;
use balance_core::policy_nn::{build_qtable, extract_policy, train_policy_net, TrainingReport, DEFAULT_QTABLE_BUDGET};
use balance_core::{
    closed_loop_sim, evaluate_objective, quadratic_integrals, solve_care, step_metrics, Channel, LqrGain,
    NltaOutcome, ObjectiveKind, PidGains, PolicyNet, ReferenceSignal, Scenario, SimTrace,
};

use super::config::{ExperimentConfig, GainsSource};
use super::report::ScenarioReport;

pub fn lqr_gain(cfg: &ExperimentConfig) -> Result<LqrGain> {
    solve_care(&cfg.linear_model(), &cfg.lqr_weights()).context("solving the Riccati equation")
}

/// Q-table, policy extraction and LM fit, seeded by `cfg.seed`.
pub fn train_network(cfg: &ExperimentConfig) -> Result<(PolicyNet, TrainingReport)> {
    let table = build_qtable(&cfg.nn.grid, &cfg.one_step_cost(), DEFAULT_QTABLE_BUDGET)?;
    let data = extract_policy(&table);
    drop(table);
    let out = train_policy_net(&data, &cfg.nn.grid, &cfg.train_config())?;
    Ok(out)
}

pub fn load_network(path: &Path) -> Result<PolicyNet> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    PolicyNet::read_from(std::io::BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

pub fn save_network(path: &Path, net: &PolicyNet) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(f);
    net.write_to(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

/// Loads `nn.network` when set, trains otherwise.
pub fn resolve_network(cfg: &ExperimentConfig) -> Result<(Arc<PolicyNet>, Option<TrainingReport>)> {
    match &cfg.nn.network {
        Some(p) => Ok((Arc::new(load_network(p)?), None)),
        None => {
            let (net, rep) = train_network(cfg)?;
            Ok((Arc::new(net), Some(rep)))
        }
    }
}

/// Seed of the tuning experiment for one criterion.
pub fn objective_seed(seed: u64, kind: ObjectiveKind) -> u64 {
    let k = ObjectiveKind::ALL.iter().position(|&o| o == kind).unwrap_or(0) as u64;
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn tune(cfg: &ExperimentConfig, kind: ObjectiveKind, seed: u64) -> Result<NltaOutcome> {
    nlta::tune(&cfg.nlta_config(seed), &cfg.scenario(), &cfg.objective(kind))
        .with_context(|| format!("tuning for {kind}"))
}

pub fn resolve_gains(cfg: &ExperimentConfig) -> Result<(PidGains, Option<NltaOutcome>)> {
    match cfg.gains {
        GainsSource::Explicit { gains } => Ok((gains, None)),
        GainsSource::Nlta { objective } => {
            let out = tune(cfg, objective, cfg.seed)?;
            Ok((out.best_gains, Some(out)))
        }
    }
}

/// Runs one scenario and summarizes it.
pub fn evaluate(
    cfg: &ExperimentConfig,
    name: &str,
    gains: &PidGains,
    scenario: &Scenario,
) -> Result<(ScenarioReport, SimTrace)> {
    let trace = closed_loop_sim(gains, scenario).with_context(|| format!("scenario `{name}`"))?;
    let step = match scenario.reference {
        ReferenceSignal::Step { .. } => step_metrics(&trace, Channel::X, cfg.settling_band).ok(),
        ReferenceSignal::SquareWave { .. } => None,
    };
    let objectives: BTreeMap<String, f64> = ObjectiveKind::ALL
        .iter()
        .map(|&k| (k.name().to_owned(), evaluate_objective(&trace, &cfg.objective(k))))
        .collect();
    let (int_u, int_f) = quadratic_integrals(&trace, &cfg.weights, scenario.frame);
    let report = ScenarioReport {
        name: name.to_owned(),
        controller: scenario.feedback.label().to_owned(),
        gains: *gains,
        step,
        ise: ise(&trace, &cfg.objective(ObjectiveKind::Ise)),
        objectives,
        int_u,
        int_f,
        cumulative_abs_error_x: cumulative_abs_error_x(&trace).last().copied().unwrap_or(0.0),
        trace: None,
    };
    Ok((report, trace))
}
