use std::path::Path;
use std::process::{Command, Output};

use balance_cli::harness::io::{read_nlta_log, read_trace, write_trace};
use balance_cli::harness::report::{LqrReport, RunReport};
use balance_cli::harness::ExperimentConfig;
use balance_core::nlta::threshold;
use balance_core::{closed_loop_sim, LqrWeights, PidGains, Scenario, StateFeedback};

fn balance(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_balance"));
    cmd.args(args).env_remove("BALANCE_SEED").env_remove("BALANCE_OUT");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_report(path: &Path) -> RunReport {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn trace_csv_round_trips_bit_for_bit() {
    let g = balance_core::solve_care(&balance_core::LinearModel::printed(), &LqrWeights::default()).unwrap();
    let sc = Scenario::default().with_feedback(StateFeedback::Lqr(g));
    let tr = closed_loop_sim(&PidGains::PRASAD, &sc).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, &tr, 1).unwrap();
    let back = read_trace(buf.as_slice()).unwrap();
    assert_eq!(back.samples.len(), tr.samples.len());
    for (a, b) in tr.samples.iter().zip(&back.samples) {
        let (x, y) = (serde_json::to_value(a).unwrap(), serde_json::to_value(b).unwrap());
        assert_eq!(x, y);
        assert_eq!(a.u.to_bits(), b.u.to_bits());
        assert_eq!(a.state.to_array().map(f64::to_bits), b.state.to_array().map(f64::to_bits));
    }
}

#[test]
fn zero_step_with_zero_gains_is_silent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = balance(
        &["simulate", "--gains", "0,0,0,0,0,0", "--amplitude", "0", "--out", out],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let f = std::fs::File::open(dir.path().join("trace.csv")).unwrap();
    let tr = read_trace(f).unwrap();
    assert_eq!(tr.samples.len(), 15_001);
    assert!(tr.samples.iter().all(|s| s.state.max_abs() == 0.0 && s.u == 0.0));
    let rep = read_report(&dir.path().join("report.json"));
    let s = &rep.scenarios[0];
    assert_eq!((s.ise, s.int_u, s.int_f, s.cumulative_abs_error_x), (0.0, 0.0, 0.0, 0.0));
    assert_eq!((s.rise_time(), s.settling_time(), s.overshoot()), (None, Some(0.0), Some(0.0)));
    assert_eq!(s.trace.as_deref(), Some("trace.csv"));
}

#[test]
fn prasad_simulation_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["simulate", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep = read_report(&dir.path().join("report.json"));
    let s = &rep.scenarios[0];
    assert_eq!(s.gains, PidGains::PRASAD);
    assert_eq!(s.overshoot(), Some(0.0));
    assert!(((s.rise_time().unwrap() - 4.8914) / 4.8914).abs() < 0.15);
    assert!(((s.settling_time().unwrap() - 9.6098) / 9.6098).abs() < 0.15);
    assert!(s.is_finite());
}

#[test]
fn lqr_command_writes_the_gain() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(&["lqr", "--out", dir.path().to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rep: LqrReport =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("lqr.json")).unwrap()).unwrap();
    for (k, want) in rep.k.iter().zip([-137.7896, -25.9783, -22.3607, -27.5768]) {
        assert!(((k - want) / want).abs() < 5e-3);
    }
    assert!(rep.residual <= 1e-8);
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"nlta": {"n_o": "ten"}}"#).unwrap();
    let o = balance(&["lqr", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("nlta.n_o"), "{}", stderr(&o));

    std::fs::write(&cfg, r#"{"settling_band": 2.0}"#).unwrap();
    let o = balance(&["lqr", "--config", cfg.to_str().unwrap()], &[]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("settling_band"), "{}", stderr(&o));

    let o = balance(&["lqr", "--config", dir.path().join("missing.json").to_str().unwrap()], &[]);
    assert!(!o.status.success());
}

#[test]
fn divergence_names_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = balance(
        &["simulate", "--gains", "0,0,0,1e300,0,0", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert!(!o.status.success());
    assert!(stderr(&o).contains("scenario `pid`"), "{}", stderr(&o));
}

#[test]
fn environment_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let o = balance(&["lqr"], &[("BALANCE_OUT", target.to_str().unwrap())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("lqr.json").exists());

    let o = balance(&["lqr", "--out", dir.path().to_str().unwrap()], &[("BALANCE_SEED", "seven")]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("BALANCE_SEED"), "{}", stderr(&o));

    // flags win over the environment
    let flag = dir.path().join("from_flag");
    let o = balance(
        &["lqr", "--out", flag.to_str().unwrap()],
        &[("BALANCE_OUT", dir.path().join("ignored").to_str().unwrap())],
    );
    assert!(o.status.success());
    assert!(flag.join("lqr.json").exists() && !dir.path().join("ignored").exists());
}

#[test]
fn small_tuning_run_is_logged_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"nlta": {"n_t": 20, "n_o": 2}}"#).unwrap();
    let run = |sub: &str| {
        let out = dir.path().join(sub);
        let o = balance(
            &["tune", "--objective", "ISE-OS", "--seed", "5", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
            &[],
        );
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["gains.json", "nlta_log.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let rows = read_nlta_log(std::fs::File::open(a.join("nlta_log.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 40);
    let omega0 = ExperimentConfig::default().nlta.omega0;
    for r in rows.iter().filter(|r| r.accepted) {
        assert!(r.cost_new <= r.cost_old / threshold(r.omega, omega0));
    }
}
