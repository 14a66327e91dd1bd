use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use balance_cli::harness::io::{write_gains, write_json, write_nlta_log_file, write_trace_file};
use balance_cli::harness::pipeline::{evaluate, lqr_gain, resolve_gains, resolve_network, save_network, train_network};
use balance_cli::harness::report::{LqrReport, RunReport};
use balance_cli::harness::{reproduce_tables, ControllerKind, ExperimentConfig, GainsSource};
use balance_core::{ObjectiveKind, PidGains, StateFeedback};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "balance", version, about = "Inverted-pendulum-cart PID/LQR/NN experiments")]
struct Cli {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One closed-loop run: trace CSV and report.
    Simulate {
        #[arg(long)]
        controller: Option<ControllerKind>,
        /// Six comma-separated gains: kp_theta,ki_theta,kd_theta,kp_x,ki_x,kd_x.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        gains: Option<Vec<f64>>,
        /// Step amplitude of the cart reference, m.
        #[arg(long, allow_hyphen_values = true)]
        amplitude: Option<f64>,
    },
    /// Threshold-accepting gain search: gains file and search log.
    Tune {
        #[arg(long, default_value = "ISE")]
        objective: ObjectiveKind,
    },
    /// Riccati solve: K, P and residual.
    Lqr,
    /// Q-table, policy extraction and network training.
    TrainNn,
    /// Regenerates every table and figure series.
    Reproduce {
        /// Use freshly tuned gains for the performance tables.
        #[arg(long)]
        retune: bool,
    },
}

fn load(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(
    mut cfg: ExperimentConfig,
    controller: Option<ControllerKind>,
    gains: Option<Vec<f64>>,
    amplitude: Option<f64>,
) -> Result<RunReport> {
    if let Some(c) = controller {
        cfg.controller = c;
    }
    if let Some(g) = gains {
        let g: [f64; 6] = g
            .try_into()
            .map_err(|v: Vec<f64>| anyhow::anyhow!("--gains needs 6 values, got {}", v.len()))?;
        let g = PidGains::from_array(g);
        g.validate()?;
        cfg.gains = GainsSource::Explicit { gains: g };
    }
    if let Some(a) = amplitude {
        cfg.reference = balance_core::ReferenceSignal::Step { x: a, theta: 0.0 };
    }
    cfg.validate()?;
    let (gains, _) = resolve_gains(&cfg)?;
    let (feedback, lqr) = match cfg.controller {
        ControllerKind::Pid => (StateFeedback::None, None),
        ControllerKind::PidLqr => {
            let g = lqr_gain(&cfg)?;
            (StateFeedback::Lqr(g), Some(LqrReport::from(&g)))
        }
        ControllerKind::PidNn => (StateFeedback::Nn(resolve_network(&cfg)?.0), None),
    };
    let scenario = cfg.scenario().with_feedback(feedback);
    let name = cfg.controller.name();
    let (mut rep, trace) = evaluate(&cfg, name, &gains, &scenario)?;
    write_trace_file(&cfg.out.join("trace.csv"), &trace, 1)?;
    rep.trace = Some("trace.csv".into());
    let report = RunReport {
        seed: cfg.seed,
        retuned: false,
        lqr,
        tuned: Vec::new(),
        scenarios: vec![rep],
    };
    write_json(&cfg.out.join("report.json"), &report)?;
    Ok(report)
}

fn print_path(out: &Path, file: &str) {
    println!("wrote {}", out.join(file).display());
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load(&cli)?;
    let out = cfg.out.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    match cli.command {
        Command::Simulate {
            controller,
            gains,
            amplitude,
        } => {
            let rep = simulate(cfg, controller, gains, amplitude)?;
            let s = &rep.scenarios[0];
            println!(
                "{}: rise {:?} s, settling {:?} s, overshoot {:?} %, ISE {:.6}, int U {:.6}, int F {:.6}",
                s.name,
                s.rise_time(),
                s.settling_time(),
                s.overshoot(),
                s.ise,
                s.int_u,
                s.int_f
            );
            print_path(&out, "trace.csv");
            print_path(&out, "report.json");
        }
        Command::Tune { objective } => {
            let cfg = ExperimentConfig {
                gains: GainsSource::Nlta { objective },
                ..cfg
            };
            let (gains, outcome) = resolve_gains(&cfg)?;
            let outcome = outcome.expect("nlta source");
            write_gains(&out.join("gains.json"), &gains)?;
            write_nlta_log_file(&out.join("nlta_log.csv"), &outcome.runs)?;
            println!(
                "{objective}: best cost {:.6} (run {}) gains {:?}",
                outcome.best_cost,
                outcome.best_run,
                gains.to_array()
            );
            print_path(&out, "gains.json");
            print_path(&out, "nlta_log.csv");
        }
        Command::Lqr => {
            let g = lqr_gain(&cfg)?;
            let rep = LqrReport::from(&g);
            write_json(&out.join("lqr.json"), &rep)?;
            println!("K = {:?}, residual {:e}", rep.k, rep.residual);
            print_path(&out, "lqr.json");
        }
        Command::TrainNn => {
            let (net, rep) = train_network(&cfg)?;
            save_network(&out.join("policy.bpnn"), &net)?;
            write_json(&out.join("training_report.json"), &rep)?;
            println!(
                "{} epochs ({:?}), train MSE {:.6}, test MSE {:?}",
                rep.epochs, rep.stop, rep.train_mse, rep.test_mse
            );
            print_path(&out, "policy.bpnn");
            print_path(&out, "training_report.json");
        }
        Command::Reproduce { retune } => {
            let res = reproduce_tables(&cfg, retune)?;
            for s in &res.report.scenarios {
                println!("{:<32} ISE {:.6}  int U {:.6}  int F {:.6}", s.name, s.ise, s.int_u, s.int_f);
            }
            println!("{} files under {}", res.files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
