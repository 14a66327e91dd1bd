use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use balance_core::metrics::cumulative_abs_error_x;
use balance_core::policy_nn::TrainingReport;
use balance_core::{
    LqrGain, NltaOutcome, ObjectiveKind, PidGains, PolicyNet, Scenario, SimTrace, StateFeedback,
};
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::io::{fmt_f64, write_json, write_nlta_log_file, write_table, write_trace_file};
use super::printed::{self, PerfRow, Quantity};
use super::pipeline::{evaluate, lqr_gain, objective_seed, resolve_network, save_network, tune};
use super::report::{LqrReport, RunReport, ScenarioReport, TunedGains};

const STORED_GAINS: &str = include_str!("../../data/tuned_gains.json");

/// Sampling interval of the figure series, s.
pub const FIGURE_INTERVAL: f64 = 0.01;

/// Tuned gains shipped with the crate, keyed by criterion.
pub fn stored_gains() -> Result<HashMap<ObjectiveKind, PidGains>> {
    let raw: BTreeMap<String, PidGains> = serde_json::from_str(STORED_GAINS).context("stored gains")?;
    raw.into_iter()
        .map(|(k, g)| {
            g.validate()?;
            Ok((k.parse::<ObjectiveKind>()?, g))
        })
        .collect()
}

/// Everything `reproduce` computed, besides what it wrote.
pub struct ReproduceOutput {
    pub report: RunReport,
    pub tuning: Vec<(ObjectiveKind, NltaOutcome)>,
    pub training: Option<TrainingReport>,
    pub network: Arc<PolicyNet>,
    pub lqr: LqrGain,
    /// Emitted files relative to the output directory, sorted.
    pub files: Vec<PathBuf>,
}

pub fn slug(name: &str) -> String {
    let mut s = String::new();
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_owned()
}

fn rel(ours: Option<f64>, printed: f64) -> String {
    match ours {
        Some(v) if printed != 0.0 => fmt_f64((v - printed) / printed.abs()),
        _ => String::new(),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn perf_values(r: &ScenarioReport) -> [Option<f64>; 6] {
    [
        r.rise_time(),
        r.settling_time(),
        r.overshoot(),
        Some(r.ise),
        Some(r.int_u),
        Some(r.int_f),
    ]
}

const PERF_COLUMNS: [&str; 6] = ["rise_time", "settling_time", "overshoot", "ISE", "int_U", "int_F"];

fn perf_table(path: &Path, rows: &[PerfRow], ours: &[&ScenarioReport]) -> Result<()> {
    let mut header = vec!["method".to_owned()];
    for c in PERF_COLUMNS {
        header.extend([format!("{c}_printed"), format!("{c}_ours"), format!("{c}_rel")]);
    }
    let body: Vec<Vec<String>> = rows
        .iter()
        .zip(ours)
        .map(|(p, r)| {
            let printed = [p.rise, p.settling, p.overshoot, p.ise, p.int_u, p.int_f];
            let mut line = vec![p.method.to_owned()];
            for (pv, ov) in printed.into_iter().zip(perf_values(r)) {
                line.extend([fmt_f64(pv), cell(ov), rel(ov, pv)]);
            }
            line
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(path, &header, &body)
}

fn quantity(r: &ScenarioReport, q: Quantity) -> Option<f64> {
    match q {
        Quantity::Rise => r.rise_time(),
        Quantity::Settling => r.settling_time(),
        Quantity::Overshoot => r.overshoot(),
        Quantity::Ise => Some(r.ise),
        Quantity::Objective(k) => r.objectives.get(k.name()).copied(),
    }
}

fn min_max(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, Option<f64>) {
    values.flatten().fold((None, None), |(lo, hi): (Option<f64>, Option<f64>), v| {
        (Some(lo.map_or(v, |l| l.min(v))), Some(hi.map_or(v, |h| h.max(v))))
    })
}

fn write_lines(path: &Path, t: &[f64], header: &[String], cols: &[Vec<f64>]) -> Result<()> {
    let body: Vec<Vec<String>> = t
        .iter()
        .enumerate()
        .map(|(k, &tk)| std::iter::once(fmt_f64(tk)).chain(cols.iter().map(|c| fmt_f64(c[k]))).collect())
        .collect();
    let header: Vec<&str> = std::iter::once("t").chain(header.iter().map(String::as_str)).collect();
    write_table(path, &header, &body)
}

fn sampled<T: Copy>(v: &[T], stride: usize) -> Vec<T> {
    let n = v.len();
    v.iter()
        .enumerate()
        .filter(|(k, _)| k % stride == 0 || k + 1 == n)
        .map(|(_, x)| *x)
        .collect()
}

struct Job {
    name: String,
    gains: PidGains,
    scenario: Scenario,
}

/// Regenerates the tuning, gain and performance tables plus the figure series under `cfg.out`.
///
/// The tuning experiments always run; `retune` decides whether the performance tables use
/// their gains or the stored ones.
pub fn reproduce_tables(cfg: &ExperimentConfig, retune: bool) -> Result<ReproduceOutput> {
    let out = cfg.out.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let stored = stored_gains()?;

    let (tuning, (lqr, nn)) = rayon::join(
        || {
            printed::VARIANTS
                .par_iter()
                .map(|&k| tune(cfg, k, objective_seed(cfg.seed, k)).map(|o| (k, o)))
                .collect::<Result<Vec<_>>>()
        },
        || rayon::join(|| lqr_gain(cfg), || resolve_network(cfg)),
    );
    let tuning = tuning?;
    let lqr = lqr?;
    let (network, training) = nn?;

    let variant_gains: Vec<PidGains> = tuning
        .iter()
        .map(|(k, o)| if retune { o.best_gains } else { stored[k] })
        .collect();

    let step = cfg.scenario();
    let square = cfg.square_scenario();
    let lqr_fb = StateFeedback::Lqr(lqr);
    let nn_fb = StateFeedback::Nn(network.clone());

    let mut jobs = vec![Job {
        name: printed::PID_ROWS[0].method.to_owned(),
        gains: PidGains::PRASAD,
        scenario: step.clone(),
    }];
    for (i, g) in variant_gains.iter().enumerate() {
        jobs.push(Job {
            name: printed::PID_ROWS[i + 1].method.to_owned(),
            gains: *g,
            scenario: step.clone(),
        });
    }
    let combined: Vec<(String, PidGains, StateFeedback)> = std::iter::once((
        printed::COMBINED_ROWS[0].method.to_owned(),
        PidGains::PRASAD,
        lqr_fb,
    ))
    .chain(
        variant_gains
            .iter()
            .enumerate()
            .map(|(i, g)| (printed::COMBINED_ROWS[i + 1].method.to_owned(), *g, nn_fb.clone())),
    )
    .collect();
    for (name, g, fb) in &combined {
        jobs.push(Job {
            name: name.clone(),
            gains: *g,
            scenario: step.clone().with_feedback(fb.clone()),
        });
    }
    for (name, g, fb) in &combined {
        jobs.push(Job {
            name: format!("{name} [square]"),
            gains: *g,
            scenario: square.clone().with_feedback(fb.clone()),
        });
    }
    // every run of every tuning experiment, for the outcome ranges
    let mut range_jobs = Vec::new();
    for (k, o) in &tuning {
        for r in &o.runs {
            range_jobs.push(Job {
                name: format!("{k} run {}", r.run_index),
                gains: r.best_gains,
                scenario: step.clone(),
            });
        }
    }

    let stride = ((FIGURE_INTERVAL / cfg.sim.dt).round() as usize).max(1);
    let results: Vec<(ScenarioReport, SimTrace)> = jobs
        .par_iter()
        .map(|j| {
            let (mut rep, trace) = evaluate(cfg, &j.name, &j.gains, &j.scenario)?;
            let rel_path = format!("traces/{}.csv", slug(&j.name));
            write_trace_file(&out.join(&rel_path), &trace, stride)?;
            rep.trace = Some(rel_path);
            Ok((rep, trace))
        })
        .collect::<Result<_>>()?;
    let ranges: Vec<ScenarioReport> = range_jobs
        .par_iter()
        .map(|j| evaluate(cfg, &j.name, &j.gains, &j.scenario).map(|(r, _)| r))
        .collect::<Result<_>>()?;

    let reports: Vec<&ScenarioReport> = results.iter().map(|(r, _)| r).collect();

    // tuning outcomes
    let per_run = cfg.nlta.n_o;
    let t3: Vec<Vec<String>> = printed::TUNING_RANGES
        .iter()
        .map(|&(k, q, pmin, pmax)| {
            let idx = printed::VARIANTS.iter().position(|&v| v == k).unwrap();
            let runs = &ranges[idx * per_run..(idx + 1) * per_run];
            let (lo, hi) = min_max(runs.iter().map(|r| quantity(r, q)));
            vec![
                k.name().to_owned(),
                q.label().to_owned(),
                fmt_f64(pmin),
                fmt_f64(pmax),
                cell(lo),
                cell(hi),
                rel(lo, pmin),
                rel(hi, pmax),
            ]
        })
        .collect();
    write_table(
        &out.join("tuning_ranges.csv"),
        &["objective", "quantity", "printed_min", "printed_max", "ours_min", "ours_max", "rel_min", "rel_max"],
        &t3,
    )?;

    // gains
    let mut header = vec!["method".to_owned()];
    for g in PidGains::NAMES {
        header.extend([format!("{g}_printed"), format!("{g}_ours"), format!("{g}_rel")]);
    }
    let t4: Vec<Vec<String>> = printed::GAIN_ROWS
        .iter()
        .enumerate()
        .map(|(i, (name, printed))| {
            let ours = if i == 0 { PidGains::PRASAD } else { tuning[i - 1].1.best_gains };
            let mut line = vec![(*name).to_owned()];
            for (p, o) in printed.iter().zip(ours.to_array()) {
                line.extend([fmt_f64(*p), fmt_f64(o), rel(Some(o), *p)]);
            }
            line
        })
        .collect();
    let header4: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&out.join("gains.csv"), &header4, &t4)?;

    perf_table(&out.join("pid_performance.csv"), &printed::PID_ROWS, &reports[0..5])?;
    perf_table(&out.join("combined_performance.csv"), &printed::COMBINED_ROWS, &reports[5..10])?;

    // figure series over the combined structures
    let combined_step = &results[5..10];
    let combined_square = &results[10..15];
    let names: Vec<String> = combined.iter().map(|(n, _, _)| n.clone()).collect();
    let t = sampled(&combined_step[0].1.samples.iter().map(|s| s.t).collect::<Vec<_>>(), stride);
    let series = |runs: &[(ScenarioReport, SimTrace)], f: &dyn Fn(&SimTrace) -> Vec<f64>| -> Vec<Vec<f64>> {
        runs.iter().map(|(_, tr)| sampled(&f(tr), stride)).collect()
    };
    write_lines(
        &out.join("step_x.csv"),
        &t,
        &names,
        &series(combined_step, &|tr| tr.samples.iter().map(|s| s.state.x).collect()),
    )?;
    write_lines(
        &out.join("step_theta.csv"),
        &t,
        &names,
        &series(combined_step, &|tr| tr.samples.iter().map(|s| s.state.theta).collect()),
    )?;
    write_lines(
        &out.join("step_u.csv"),
        &t,
        &names,
        &series(combined_step, &|tr| tr.samples.iter().map(|s| s.u).collect()),
    )?;
    let tsq = sampled(&combined_square[0].1.samples.iter().map(|s| s.t).collect::<Vec<_>>(), stride);
    let mut sq_names = vec!["x_ref".to_owned()];
    sq_names.extend(names.iter().cloned());
    let mut sq_x = vec![sampled(
        &combined_square[0].1.samples.iter().map(|s| s.x_ref).collect::<Vec<_>>(),
        stride,
    )];
    sq_x.extend(series(combined_square, &|tr| tr.samples.iter().map(|s| s.state.x).collect()));
    write_lines(&out.join("square_x.csv"), &tsq, &sq_names, &sq_x)?;
    write_lines(
        &out.join("square_cum_abs_ex.csv"),
        &tsq,
        &names,
        &series(combined_square, &|tr| cumulative_abs_error_x(tr)),
    )?;

    // tuning artefacts
    let mut tuned = Vec::new();
    for (k, o) in &tuning {
        let s = slug(k.name());
        write_nlta_log_file(&out.join(format!("nlta/{s}_log.csv")), &o.runs)?;
        write_json(&out.join(format!("gains/{s}.json")), &o.best_gains)?;
        tuned.push(TunedGains {
            objective: k.name().to_owned(),
            seed: objective_seed(cfg.seed, *k),
            best_run: o.best_run,
            best_cost: o.best_cost,
            gains: o.best_gains,
        });
    }

    let lqr_report = LqrReport::from(&lqr);
    write_json(&out.join("lqr.json"), &lqr_report)?;
    save_network(&out.join("policy.bpnn"), &network)?;
    if let Some(tr) = &training {
        write_json(&out.join("training_report.json"), tr)?;
    }

    let report = RunReport {
        seed: cfg.seed,
        retuned: retune,
        lqr: Some(lqr_report),
        tuned,
        scenarios: results.into_iter().map(|(r, _)| r).collect(),
    };
    write_json(&out.join("report.json"), &report)?;

    let files = list_files(out)?;
    Ok(ReproduceOutput {
        report,
        tuning,
        training,
        network,
        lqr,
        files,
    })
}

/// All regular files below `root`, relative and sorted.
pub fn list_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root)?.to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}
