use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use balance_core::metrics::QuadraticWeights;
use balance_core::plant::linearize;
use balance_core::policy_nn::{OneStepCost, TrainConfig};
use balance_core::{
    GridSpec, LinearModel, LqrWeights, NltaConfig, ObjectiveKind, ObjectiveSpec, PidGains,
    PlantParams, ReferenceSignal, Scenario, SimConfig, StateFrame,
};
use serde::{Deserialize, Serialize};

pub const ENV_SEED: &str = "BALANCE_SEED";
pub const ENV_OUT: &str = "BALANCE_OUT";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: &'static str, message: String },
}

fn field(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError::Field {
        field: field.into(),
        message: message.to_string(),
    }
}

/// Which linear model the linear plant uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    /// The printed state-space matrices.
    #[default]
    Printed,
    /// Linearization of `params`.
    Derived,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ControllerKind {
    #[default]
    #[serde(rename = "pid")]
    Pid,
    #[serde(rename = "pid+lqr")]
    PidLqr,
    #[serde(rename = "pid+nn")]
    PidNn,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Pid => "pid",
            ControllerKind::PidLqr => "pid+lqr",
            ControllerKind::PidNn => "pid+nn",
        }
    }
}

impl FromStr for ControllerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pid" => Ok(ControllerKind::Pid),
            "pid+lqr" => Ok(ControllerKind::PidLqr),
            "pid+nn" => Ok(ControllerKind::PidNn),
            _ => Err(format!("unknown controller {s:?} (pid, pid+lqr, pid+nn)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainsSource {
    Explicit { gains: PidGains },
    /// Tune with the `nlta` settings for this criterion.
    Nlta { objective: ObjectiveKind },
}

impl Default for GainsSource {
    fn default() -> Self {
        GainsSource::Explicit {
            gains: PidGains::PRASAD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnSettings {
    pub grid: GridSpec,
    /// Prediction step of the one-step cost, s.
    pub dt: f64,
    pub train: TrainConfig,
    /// Load this network instead of training one.
    pub network: Option<PathBuf>,
}

impl Default for NnSettings {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            dt: 0.01,
            train: TrainConfig::default(),
            network: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub params: PlantParams,
    pub sim: SimConfig,
    pub reference: ReferenceSignal,
    pub controller: ControllerKind,
    pub gains: GainsSource,
    pub nlta: NltaConfig,
    pub weights: QuadraticWeights,
    /// Frame of the state-feedback input and of the quadratic integrals.
    pub frame: StateFrame,
    pub settling_band: f64,
    pub nn: NnSettings,
    /// Reference and horizon of the square-wave runs of `reproduce`.
    pub square_wave: ReferenceSignal,
    pub square_horizon: f64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSource::Printed,
            params: PlantParams::default(),
            sim: SimConfig::default(),
            reference: ReferenceSignal::default(),
            controller: ControllerKind::Pid,
            gains: GainsSource::default(),
            nlta: NltaConfig::default(),
            weights: QuadraticWeights::default(),
            frame: StateFrame::Deviation,
            settling_band: balance_core::metrics::DEFAULT_SETTLING_BAND,
            nn: NnSettings::default(),
            square_wave: ReferenceSignal::square_default(),
            square_horizon: 40.0,
            seed: 42,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            field(if path == "." { "<root>".into() } else { path }, e.inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Applies `BALANCE_SEED` and `BALANCE_OUT` when set.
    pub fn apply_env(&mut self) -> Result<(), ConfigError> {
        self.apply_overrides(std::env::var(ENV_SEED).ok(), std::env::var_os(ENV_OUT).map(PathBuf::from))
    }

    pub fn apply_overrides(&mut self, seed: Option<String>, out: Option<PathBuf>) -> Result<(), ConfigError> {
        if let Some(s) = seed {
            self.seed = s.trim().parse().map_err(|e| ConfigError::Env {
                name: ENV_SEED,
                message: format!("{s:?} is not a u64 ({e})"),
            })?;
        }
        if let Some(o) = out {
            self.out = o;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| field("params", e))?;
        self.sim.validate().map_err(|e| field("sim", e))?;
        self.reference.validate().map_err(|e| field("reference", e))?;
        self.square_wave.validate().map_err(|e| field("square_wave", e))?;
        if !matches!(self.square_wave, ReferenceSignal::SquareWave { .. }) {
            return Err(field("square_wave.kind", "must be square_wave"));
        }
        if !(self.square_horizon.is_finite() && self.square_horizon >= self.sim.dt) {
            return Err(field("square_horizon", "must be >= sim.dt"));
        }
        if let GainsSource::Explicit { gains } = &self.gains {
            gains.validate().map_err(|e| field("gains.gains", e))?;
        }
        self.nlta.validate().map_err(|e| field("nlta", e))?;
        self.lqr_weights().validate().map_err(|e| field("weights", e))?;
        if !(self.weights.r_nn.is_finite() && self.weights.r_nn > 0.0) {
            return Err(field("weights.r_nn", "must be > 0"));
        }
        self.objective(ObjectiveKind::Ise)
            .validate()
            .map_err(|e| field("settling_band", e))?;
        self.nn.grid.validate().map_err(|e| field("nn.grid", e))?;
        self.one_step_cost().validate().map_err(|e| field("nn.dt", e))?;
        self.nn.train.validate().map_err(|e| field("nn.train", e))?;
        Ok(())
    }

    pub fn linear_model(&self) -> LinearModel {
        match self.model {
            ModelSource::Printed => LinearModel::printed(),
            ModelSource::Derived => linearize(&self.params),
        }
    }

    /// Step scenario without state feedback.
    pub fn scenario(&self) -> Scenario {
        Scenario {
            linear_model: self.linear_model(),
            params: self.params,
            sim: self.sim,
            reference: self.reference,
            frame: self.frame,
            ..Scenario::default()
        }
    }

    /// Square-wave scenario without state feedback.
    pub fn square_scenario(&self) -> Scenario {
        let mut sc = self.scenario().with_reference(self.square_wave);
        sc.sim.horizon = self.square_horizon;
        sc
    }

    pub fn objective(&self, kind: ObjectiveKind) -> ObjectiveSpec {
        ObjectiveSpec {
            band: self.settling_band,
            ..ObjectiveSpec::new(kind)
        }
    }

    pub fn nlta_config(&self, seed: u64) -> NltaConfig {
        NltaConfig {
            rng_seed: seed,
            ..self.nlta
        }
    }

    pub fn lqr_weights(&self) -> LqrWeights {
        LqrWeights {
            q: self.weights.q,
            r: self.weights.r,
        }
    }

    pub fn one_step_cost(&self) -> OneStepCost {
        OneStepCost {
            model: self.linear_model(),
            dt: self.nn.dt,
            q: self.weights.q_nn,
            r: self.weights.r_nn,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.nn.train
        }
    }
}
