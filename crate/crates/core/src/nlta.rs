//! Nonlinear threshold accepting (NLTA) search over the six PID gains.
//!
//! Each run starts from a uniform random point of the gain box and, for `n_t`
//! iterations, resamples one gain, evaluates the objective and accepts the neighbour
//! when `OF_new <= OF_old` or `OF_new <= OF_old / |H(omega)|`, where
//! `|H(omega)| = 1 / sqrt(1 + (omega/omega0)^2)` is a first-order low-pass magnitude and
//! `omega` decreases by `delta_omega` per iteration while it stays positive.
//! The returned gains are those of the run with the lowest final cost.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::{closed_loop_sim, PidGains, Scenario};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_objective, ObjectiveSpec, NON_SETTLING_PENALTY};

/// Closed search interval of one gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }
}

/// Search box, one interval per gain in [`PidGains::to_array`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBounds(pub [Interval; 6]);

impl Default for GainBounds {
    fn default() -> Self {
        GainBounds([
            Interval::new(-44.0, -36.0),
            Interval::new(-2.0, 2.0),
            Interval::new(-10.0, -6.0),
            Interval::new(-3.0, 1.0),
            Interval::new(-2.0, 2.0),
            Interval::new(-5.0, -1.0),
        ])
    }
}

impl GainBounds {
    pub fn contains(&self, g: &PidGains) -> bool {
        self.0.iter().zip(g.to_array()).all(|(iv, v)| iv.contains(v))
    }

    pub fn center(&self) -> PidGains {
        PidGains::from_array(self.0.map(|iv| iv.center()))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> PidGains {
        let mut a = [0.0; 6];
        for (v, iv) in a.iter_mut().zip(&self.0) {
            *v = iv.sample(rng);
        }
        PidGains::from_array(a)
    }
}

/// How a neighbour differs from the current point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NeighborMove {
    /// Replace one gain by a uniform draw over its whole interval.
    #[default]
    Resample,
    /// Move one gain by a uniform step of at most `fraction * width`, clamped to the box.
    Perturb { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NltaConfig {
    pub bounds: GainBounds,
    /// Corner frequency of the acceptance filter, rad/s.
    pub omega0: f64,
    /// Initial probe frequency, rad/s.
    pub omega1: f64,
    /// Per-iteration decrement of the probe frequency, rad/s.
    pub delta_omega: f64,
    /// Iterations per run.
    pub n_t: usize,
    /// Independent runs.
    pub n_o: usize,
    pub rng_seed: u64,
    pub neighbor: NeighborMove,
}

impl Default for NltaConfig {
    fn default() -> Self {
        Self {
            bounds: GainBounds::default(),
            omega0: 200.0,
            omega1: 50.0,
            delta_omega: 0.005,
            n_t: 1000,
            n_o: 10,
            rng_seed: 0,
            neighbor: NeighborMove::Resample,
        }
    }
}

impl NltaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, iv) in PidGains::NAMES.iter().zip(&self.bounds.0) {
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo < iv.hi) {
                return Err(Error::invalid(
                    "bounds",
                    format!("{name}: need lo < hi, got ({}, {})", iv.lo, iv.hi),
                ));
            }
        }
        if !(self.omega0 > 0.0 && self.omega0.is_finite()) {
            return Err(Error::invalid("omega0", "must be > 0"));
        }
        if !(self.omega1 > 0.0 && self.omega1.is_finite()) {
            return Err(Error::invalid("omega1", "must be > 0"));
        }
        if !(self.delta_omega > 0.0 && self.delta_omega.is_finite()) {
            return Err(Error::invalid("delta_omega", "must be > 0"));
        }
        if self.n_o == 0 {
            return Err(Error::invalid("n_o", "must be >= 1"));
        }
        if let NeighborMove::Perturb { fraction } = self.neighbor {
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(Error::invalid("neighbor.fraction", "must be in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// `|H(omega)| = 1 / sqrt(1 + (omega/omega0)^2)`.
pub fn threshold(omega: f64, omega0: f64) -> f64 {
    let r = omega / omega0;
    1.0 / (1.0 + r * r).sqrt()
}

/// Threshold-accepting rule. This exact predicate is also used to replay run logs.
pub fn accept(of_new: f64, of_old: f64, omega: f64, omega0: f64) -> bool {
    of_new <= of_old || of_new <= of_old / threshold(omega, omega0)
}

/// Resamples (or perturbs) one uniformly chosen gain; the other five are untouched.
pub fn propose_neighbor<R: Rng>(
    current: &PidGains,
    bounds: &GainBounds,
    mv: NeighborMove,
    rng: &mut R,
) -> PidGains {
    let mut a = current.to_array();
    let i = rng.random_range(0..PidGains::LEN);
    let iv = bounds.0[i];
    a[i] = match mv {
        NeighborMove::Resample => iv.sample(rng),
        NeighborMove::Perturb { fraction } => {
            let step = fraction * iv.width();
            if step == 0.0 {
                a[i]
            } else {
                (a[i] + rng.random_range(-step..=step)).clamp(iv.lo, iv.hi)
            }
        }
    };
    PidGains::from_array(a)
}

/// A cost to minimize over gain tuples.
pub trait Objective: Sync {
    fn cost(&self, gains: &PidGains) -> f64;
}

impl<F: Fn(&PidGains) -> f64 + Sync> Objective for F {
    fn cost(&self, gains: &PidGains) -> f64 {
        self(gains)
    }
}

/// Closed-loop simulation scored by a tuning criterion; diverged runs score
/// [`NON_SETTLING_PENALTY`].
pub struct SimObjective<'a> {
    pub scenario: &'a Scenario,
    pub spec: ObjectiveSpec,
}

impl Objective for SimObjective<'_> {
    fn cost(&self, gains: &PidGains) -> f64 {
        match closed_loop_sim(gains, self.scenario) {
            Ok(trace) => evaluate_objective(&trace, &self.spec),
            Err(_) => NON_SETTLING_PENALTY,
        }
    }
}

fn sanitized_cost<O: Objective + ?Sized>(objective: &O, gains: &PidGains) -> f64 {
    let c = objective.cost(gains);
    if c.is_finite() {
        c
    } else {
        NON_SETTLING_PENALTY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Probe frequency used in this iteration's acceptance test.
    pub omega: f64,
    pub cost_old: f64,
    pub cost_new: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NltaRunRecord {
    pub run_index: usize,
    pub initial_gains: PidGains,
    pub initial_cost: f64,
    /// Current solution at the end of the run.
    pub best_gains: PidGains,
    /// `OF_O` at the end of the run.
    pub best_cost: f64,
    pub log: Vec<IterationLog>,
}

impl NltaRunRecord {
    /// Checks the log against the acceptance rule and the bookkeeping of `OF_O`.
    pub fn replay_consistent(&self, omega0: f64) -> bool {
        let mut of_o = self.initial_cost;
        for entry in &self.log {
            if entry.cost_old != of_o {
                return false;
            }
            if accept(entry.cost_new, entry.cost_old, entry.omega, omega0) != entry.accepted {
                return false;
            }
            if entry.accepted {
                of_o = entry.cost_new;
            }
        }
        of_o == self.best_cost
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NltaOutcome {
    pub best_gains: PidGains,
    pub best_cost: f64,
    pub best_run: usize,
    pub runs: Vec<NltaRunRecord>,
}

/// Independent random stream for run `run_index` of a seeded experiment.
pub fn run_rng(seed: u64, run_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_index as u64);
    rng
}

/// One NLTA run. Does not validate `config`, so degenerate settings such as
/// `omega1 = 0` (pure descent) can be exercised directly.
pub fn single_run<O: Objective + ?Sized>(
    config: &NltaConfig,
    objective: &O,
    run_index: usize,
) -> NltaRunRecord {
    let mut rng = run_rng(config.rng_seed, run_index);
    let initial_gains = config.bounds.sample(&mut rng);
    let initial_cost = sanitized_cost(objective, &initial_gains);

    let mut current = initial_gains;
    let mut of_o = initial_cost;
    let mut omega = config.omega1;
    let mut log = Vec::with_capacity(config.n_t);

    for iteration in 1..=config.n_t {
        let candidate = propose_neighbor(&current, &config.bounds, config.neighbor, &mut rng);
        let of_n = sanitized_cost(objective, &candidate);
        let accepted = accept(of_n, of_o, omega, config.omega0);
        log.push(IterationLog {
            iteration,
            omega,
            cost_old: of_o,
            cost_new: of_n,
            accepted,
        });
        if accepted {
            current = candidate;
            of_o = of_n;
        }
        if omega - config.delta_omega > 0.0 {
            omega -= config.delta_omega;
        }
    }

    NltaRunRecord {
        run_index,
        initial_gains,
        initial_cost,
        best_gains: current,
        best_cost: of_o,
        log,
    }
}

/// Runs `n_o` independent searches (in parallel) and returns the best final solution.
/// Ties go to the lowest run index.
pub fn run<O: Objective + ?Sized>(config: &NltaConfig, objective: &O) -> Result<NltaOutcome> {
    config.validate()?;
    let runs: Vec<NltaRunRecord> = (0..config.n_o)
        .into_par_iter()
        .map(|q| single_run(config, objective, q))
        .collect();

    let mut best_run = 0;
    for (q, r) in runs.iter().enumerate() {
        if r.best_cost < runs[best_run].best_cost {
            best_run = q;
        }
    }
    Ok(NltaOutcome {
        best_gains: runs[best_run].best_gains,
        best_cost: runs[best_run].best_cost,
        best_run,
        runs,
    })
}

/// Tunes the PID gains of `scenario` for the given criterion.
pub fn tune(config: &NltaConfig, scenario: &Scenario, spec: &ObjectiveSpec) -> Result<NltaOutcome> {
    spec.validate()?;
    run(
        config,
        &SimObjective {
            scenario,
            spec: *spec,
        },
    )
}
