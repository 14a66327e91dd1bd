use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::grid::{Dataset, GridSpec};
use super::net::PolicyNet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden: usize,
    /// Train / validation / test fractions.
    pub split: [f64; 3],
    pub seed: u64,
    pub max_epochs: usize,
    /// Stop after this many consecutive epochs with rising validation error.
    pub max_val_increases: usize,
    pub lambda_init: f64,
    pub lambda_factor: f64,
    pub lambda_max: f64,
    /// Half-width of the uniform weight initialization.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: 13,
            split: [0.70, 0.15, 0.15],
            seed: 0,
            max_epochs: 200,
            max_val_increases: 6,
            lambda_init: 1e-3,
            lambda_factor: 10.0,
            lambda_max: 1e10,
            init_scale: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::invalid("hidden", "must be >= 1"));
        }
        if self.split.iter().any(|f| !(f.is_finite() && *f >= 0.0))
            || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9
            || self.split[0] <= 0.0
        {
            return Err(Error::invalid("split", "fractions must be >= 0, sum to 1, train > 0"));
        }
        if !(self.lambda_init > 0.0 && self.lambda_factor > 1.0 && self.lambda_max > self.lambda_init)
        {
            return Err(Error::invalid("lambda", "need 0 < init < max and factor > 1"));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::invalid("init_scale", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    ValidationIncrease,
    /// No damping up to `lambda_max` reduced the training error.
    LambdaLimit,
    /// Training error reached zero.
    PerfectFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub lambda: f64,
}

/// Errors are mean squared control-force errors in N^2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub epochs: usize,
    pub stop: StopReason,
    pub train_mse: f64,
    pub val_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub label_variance: f64,
    pub final_lambda: f64,
    pub history: Vec<EpochLog>,
}

struct Samples {
    z: Vec<[f64; 4]>,
    t: Vec<f64>,
}

impl Samples {
    fn gather(net: &PolicyNet, data: &Dataset, idx: &[usize]) -> Self {
        Self {
            z: idx.iter().map(|&i| net.normalize(&data.inputs[i])).collect(),
            t: idx.iter().map(|&i| net.target(data.labels[i])).collect(),
        }
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    /// Mean squared error in normalized output units.
    fn mse(&self, net: &PolicyNet) -> f64 {
        let sse: f64 = self
            .z
            .iter()
            .zip(&self.t)
            .map(|(z, t)| (net.forward(z) - t).powi(2))
            .sum();
        sse / self.len() as f64
    }
}

const CHUNK: usize = 1024;

/// Gauss-Newton normal equations `J'J` and `J'e` over the whole set.
fn normal_equations(net: &PolicyNet, s: &Samples) -> (DMatrix<f64>, DVector<f64>) {
    let p = net.param_count();
    let mut jtj = DMatrix::zeros(p, p);
    let mut jte = DVector::zeros(p);
    let mut jt = DMatrix::zeros(p, CHUNK);
    let mut grad = vec![0.0; p];
    for start in (0..s.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(s.len());
        let n = end - start;
        for (c, i) in (start..end).enumerate() {
            let e = net.forward_with_gradient(&s.z[i], &mut grad) - s.t[i];
            jt.column_mut(c).copy_from_slice(&grad);
            jte.axpy(e, &DVector::from_column_slice(&grad), 1.0);
        }
        let block = jt.columns(0, n);
        jtj.gemm(1.0, &block, &block.transpose(), 1.0);
    }
    (jtj, jte)
}

fn split_indices(n: usize, cfg: &TrainConfig) -> [Vec<usize>; 3] {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_train = ((cfg.split[0] * n as f64).round() as usize).clamp(1, n);
    let n_val = ((cfg.split[1] * n as f64).round() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_val);
    let val = idx.split_off(n_train);
    [idx, val, test]
}

/// Fits a policy network to the dataset with Levenberg-Marquardt.
///
/// The returned network holds the parameters with the lowest validation error seen
/// (the last accepted parameters when there is no validation split).
pub fn train_policy_net(
    data: &Dataset,
    grid: &GridSpec,
    cfg: &TrainConfig,
) -> Result<(PolicyNet, TrainingReport)> {
    cfg.validate()?;
    grid.validate()?;
    if data.inputs.len() != data.labels.len() || data.is_empty() {
        return Err(Error::invalid("dataset", "need matching, non-empty inputs and labels"));
    }
    if data.labels.iter().any(|v| !v.is_finite()) || data.inputs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("dataset"));
    }

    let mut net = PolicyNet::new(cfg.hidden, grid)?;
    let scale2 = net.output_scale * net.output_scale;
    let [tr, va, te] = split_indices(data.len(), cfg);
    let train = Samples::gather(&net, data, &tr);
    let val = Samples::gather(&net, data, &va);
    let test = Samples::gather(&net, data, &te);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mean_t = train.t.iter().sum::<f64>() / train.len() as f64;
    let mut params: Vec<f64> = (0..net.param_count())
        .map(|_| rng.random_range(-1.0..=1.0) * cfg.init_scale)
        .collect();
    *params.last_mut().unwrap() = mean_t;
    net.set_params(&params)?;

    let val_mse = |n: &PolicyNet| (val.len() > 0).then(|| val.mse(n));
    let mut lambda = cfg.lambda_init;
    let mut loss = train.mse(&net);
    let mut best = (val_mse(&net).unwrap_or(f64::INFINITY), params.clone());
    let mut prev_val = best.0;
    let mut rising = 0;
    let mut history = Vec::new();
    let mut epochs = 0;
    let p = net.param_count();

    let stop = loop {
        if epochs >= cfg.max_epochs {
            break StopReason::MaxEpochs;
        }
        if loss == 0.0 {
            break StopReason::PerfectFit;
        }
        let (jtj, jte) = normal_equations(&net, &train);
        let current = net.params();
        let mut accepted = false;
        while lambda <= cfg.lambda_max {
            let mut m = jtj.clone();
            for i in 0..p {
                m[(i, i)] += lambda;
            }
            if let Some(chol) = m.cholesky() {
                let delta = chol.solve(&jte);
                let trial: Vec<f64> = current.iter().zip(delta.iter()).map(|(a, d)| a - d).collect();
                net.set_params(&trial)?;
                let trial_loss = train.mse(&net);
                if trial_loss < loss {
                    loss = trial_loss;
                    lambda /= cfg.lambda_factor;
                    accepted = true;
                    break;
                }
            }
            lambda *= cfg.lambda_factor;
        }
        if !accepted {
            net.set_params(&current)?;
            break StopReason::LambdaLimit;
        }
        if !loss.is_finite() {
            return Err(Error::TrainingFailed {
                epoch: epochs,
                lambda,
                reason: "non-finite training error".into(),
            });
        }
        epochs += 1;
        let v = val_mse(&net);
        history.push(EpochLog {
            epoch: epochs,
            train_mse: loss * scale2,
            val_mse: v.map(|v| v * scale2),
            lambda,
        });
        match v {
            Some(v) => {
                if v < best.0 {
                    best = (v, net.params());
                }
                rising = if v > prev_val { rising + 1 } else { 0 };
                prev_val = v;
                if rising >= cfg.max_val_increases {
                    break StopReason::ValidationIncrease;
                }
            }
            None => best.1 = net.params(),
        }
    };

    if val.len() > 0 {
        net.set_params(&best.1)?;
    }
    let label_mean = data.labels.iter().sum::<f64>() / data.len() as f64;
    let label_variance =
        data.labels.iter().map(|u| (u - label_mean).powi(2)).sum::<f64>() / data.len() as f64;
    let report = TrainingReport {
        epochs,
        stop,
        train_mse: train.mse(&net) * scale2,
        val_mse: val_mse(&net).map(|v| v * scale2),
        test_mse: (test.len() > 0).then(|| test.mse(&net) * scale2),
        label_variance,
        final_lambda: lambda,
        history,
    };
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::StateVector;

    #[test]
    fn split_sizes_and_disjointness() {
        let [a, b, c] = split_indices(1000, &TrainConfig::default());
        assert_eq!((a.len(), b.len(), c.len()), (700, 150, 150));
        let mut all: Vec<usize> = a.iter().chain(&b).chain(&c).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut net = PolicyNet::new(3, &GridSpec::default()).unwrap();
        let p0: Vec<f64> = (0..net.param_count()).map(|i| ((i * 7) as f64).cos() * 0.8).collect();
        net.set_params(&p0).unwrap();
        let z = [0.3, -0.7, 0.1, 0.9];
        let mut g = vec![0.0; net.param_count()];
        net.forward_with_gradient(&z, &mut g);
        let h = 1e-6;
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] += h;
            net.set_params(&p).unwrap();
            let up = net.forward(&z);
            p[i] -= 2.0 * h;
            net.set_params(&p).unwrap();
            let dn = net.forward(&z);
            assert!(((up - dn) / (2.0 * h) - g[i]).abs() < 1e-8, "param {i}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = GridSpec::default();
        assert!(train_policy_net(&Dataset::default(), &g, &TrainConfig::default()).is_err());
        let d = Dataset {
            inputs: vec![StateVector::ZERO],
            labels: vec![f64::NAN],
        };
        assert!(train_policy_net(&d, &g, &TrainConfig::default()).is_err());
        let cfg = TrainConfig {
            split: [0.5, 0.1, 0.1],
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
