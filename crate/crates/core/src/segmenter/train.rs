//! Network training: Levenberg–Marquardt on the mean squared error, with a
//! plain gradient-descent fallback for very large sample counts.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::features::{FeatureVector23, FEATURE_LEN};
use super::network::{FeatureNorm, NetworkModel, DEFAULT_HIDDEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    LevenbergMarquardt,
    GradientDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub algorithm: Algorithm,
    pub hidden: usize,
    pub goal_error: f64,
    pub max_epochs: usize,
    pub lm_lambda_init: f64,
    pub lm_lambda_factor: f64,
    pub lm_lambda_max: f64,
    pub gd_learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::LevenbergMarquardt,
            hidden: DEFAULT_HIDDEN,
            goal_error: 0.001,
            max_epochs: 200,
            lm_lambda_init: 1e-3,
            lm_lambda_factor: 10.0,
            lm_lambda_max: 1e10,
            gd_learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    fn validate(&self) -> Result<()> {
        if !(self.goal_error > 0.0) || self.max_epochs == 0 || self.hidden == 0 {
            return Err(Error::Config(
                "training needs goal_error > 0, max_epochs >= 1 and hidden >= 1".into(),
            ));
        }
        if !(self.lm_lambda_init > 0.0 && self.lm_lambda_factor > 1.0) {
            return Err(Error::Config(
                "LM damping needs lambda_init > 0 and factor > 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub epochs: usize,
    pub final_mse: f64,
    /// MSE after initialization followed by the MSE after every epoch.
    pub mse_history: Vec<f64>,
    pub training_accuracy: f64,
    pub stop_reason: StopReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GoalReached,
    MaxEpochs,
    DampingExhausted,
}

pub type LabeledSample = (FeatureVector23, bool);

/// Population mean and standard deviation per feature. Constant features
/// get scale 1.
pub fn fit_feature_norm(samples: &[LabeledSample]) -> Vec<FeatureNorm> {
    let n = samples.len() as f64;
    (0..FEATURE_LEN)
        .map(|k| {
            let mean = samples.iter().map(|(v, _)| v.0[k]).sum::<f64>() / n;
            let var = samples
                .iter()
                .map(|(v, _)| (v.0[k] - mean).powi(2))
                .sum::<f64>()
                / n;
            let sd = var.sqrt();
            FeatureNorm {
                mean,
                scale: if sd > 1e-12 { sd } else { 1.0 },
            }
        })
        .collect()
}

fn target(label: bool) -> f64 {
    if label {
        1.0
    } else {
        0.0
    }
}

fn init_model(hidden: usize, norm: Vec<FeatureNorm>, seed: u64) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = NetworkModel::zeros(hidden);
    model.feature_norm = norm;
    let scale = 1.0 / (FEATURE_LEN as f64).sqrt();
    for w in &mut model.hidden_weights {
        *w = rng.random_range(-1.0..1.0) * scale;
    }
    for b in &mut model.hidden_bias {
        *b = rng.random_range(-0.5..0.5);
    }
    let out_scale = 1.0 / (hidden as f64).sqrt();
    for w in &mut model.output_weights {
        *w = rng.random_range(-1.0..1.0) * out_scale;
    }
    model.output_bias = 0.5;
    model
}

/// Residuals `output - target` for every sample.
pub fn residuals(model: &NetworkModel, samples: &[LabeledSample]) -> Vec<f64> {
    let mut h = vec![0.0; model.hidden_units()];
    samples
        .iter()
        .map(|(v, y)| model.raw_output(&model.normalize(v), &mut h) - target(*y))
        .collect()
}

pub fn mse(model: &NetworkModel, samples: &[LabeledSample]) -> f64 {
    let r = residuals(model, samples);
    r.iter().map(|e| e * e).sum::<f64>() / r.len() as f64
}

/// Jacobian of the residuals with respect to the flattened parameters
/// (hidden weights, hidden bias, output weights, output bias); one row per
/// sample. Also returns the residual vector.
pub fn residual_jacobian(
    model: &NetworkModel,
    samples: &[LabeledSample],
) -> (DMatrix<f64>, DVector<f64>) {
    let hidden = model.hidden_units();
    let np = model.n_params();
    let nw = hidden * FEATURE_LEN;
    let mut jac = DMatrix::zeros(samples.len(), np);
    let mut res = DVector::zeros(samples.len());
    let mut h = vec![0.0; hidden];
    for (n, (v, y)) in samples.iter().enumerate() {
        let x = model.normalize(v);
        res[n] = model.raw_output(&x, &mut h) - target(*y);
        for k in 0..hidden {
            let dz = model.output_weights[k] * (1.0 - h[k] * h[k]);
            for (i, xi) in x.iter().enumerate() {
                jac[(n, k * FEATURE_LEN + i)] = dz * xi;
            }
            jac[(n, nw + k)] = dz;
            jac[(n, nw + hidden + k)] = h[k];
        }
        jac[(n, np - 1)] = 1.0;
    }
    (jac, res)
}

fn accuracy(model: &NetworkModel, samples: &[LabeledSample]) -> f64 {
    let r = residuals(model, samples);
    let correct = r
        .iter()
        .zip(samples)
        .filter(|(e, (_, y))| {
            let p = (*e + target(*y)).clamp(0.0, 1.0);
            (p >= super::DEFAULT_THRESHOLD) == *y
        })
        .count();
    correct as f64 / samples.len() as f64
}

fn check_samples(samples: &[LabeledSample]) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::DegenerateTrainingSet(format!(
            "{} samples; at least 2 are required",
            samples.len()
        )));
    }
    let positives = samples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == samples.len() {
        return Err(Error::DegenerateTrainingSet(
            "samples contain a single class".into(),
        ));
    }
    if samples.iter().any(|(v, _)| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

pub fn train(samples: &[LabeledSample], cfg: &TrainingConfig) -> Result<NetworkModel> {
    train_with_report(samples, cfg).map(|(m, _)| m)
}

pub fn train_with_report(
    samples: &[LabeledSample],
    cfg: &TrainingConfig,
) -> Result<(NetworkModel, TrainingReport)> {
    cfg.validate()?;
    check_samples(samples)?;
    let norm = fit_feature_norm(samples);
    let model = init_model(cfg.hidden, norm, cfg.seed);
    match cfg.algorithm {
        Algorithm::LevenbergMarquardt => levenberg_marquardt(model, samples, cfg),
        Algorithm::GradientDescent => gradient_descent(model, samples, cfg),
    }
}

/// Damped Gauss–Newton on the sample-averaged normal equations
/// `(JᵀJ/N + λI) δ = -Jᵀr/N`. A step is accepted only if it lowers the MSE;
/// otherwise λ grows and the step is retried.
fn levenberg_marquardt(
    mut model: NetworkModel,
    samples: &[LabeledSample],
    cfg: &TrainingConfig,
) -> Result<(NetworkModel, TrainingReport)> {
    let n = samples.len() as f64;
    let mut lambda = cfg.lm_lambda_init;
    let mut current = mse(&model, samples);
    let mut history = vec![current];
    let mut epochs = 0;
    let mut stop = StopReason::MaxEpochs;

    while epochs < cfg.max_epochs {
        if current <= cfg.goal_error {
            stop = StopReason::GoalReached;
            break;
        }
        let (jac, res) = residual_jacobian(&model, samples);
        let jtj = jac.tr_mul(&jac) / n;
        let grad = jac.tr_mul(&res) / n;
        let params = DVector::from_vec(model.params());
        let mut accepted = false;
        while lambda <= cfg.lm_lambda_max {
            let mut a = jtj.clone();
            for i in 0..a.nrows() {
                a[(i, i)] += lambda;
            }
            // a failed factorization is handled like a rejected step
            let Some(chol) = a.cholesky() else {
                lambda *= cfg.lm_lambda_factor;
                continue;
            };
            let step = chol.solve(&(-&grad));
            let mut trial = model.clone();
            trial.set_params((&params + &step).as_slice());
            let trial_mse = mse(&trial, samples);
            if trial_mse.is_finite() && trial_mse < current {
                model = trial;
                current = trial_mse;
                lambda = (lambda / cfg.lm_lambda_factor).max(f64::MIN_POSITIVE);
                accepted = true;
                break;
            }
            lambda *= cfg.lm_lambda_factor;
        }
        if !accepted {
            stop = StopReason::DampingExhausted;
            break;
        }
        epochs += 1;
        history.push(current);
    }
    if stop == StopReason::MaxEpochs && current <= cfg.goal_error {
        stop = StopReason::GoalReached;
    }
    let report = TrainingReport {
        epochs,
        final_mse: current,
        mse_history: history,
        training_accuracy: accuracy(&model, samples),
        stop_reason: stop,
    };
    Ok((model, report))
}

fn gradient_descent(
    mut model: NetworkModel,
    samples: &[LabeledSample],
    cfg: &TrainingConfig,
) -> Result<(NetworkModel, TrainingReport)> {
    let n = samples.len() as f64;
    let mut current = mse(&model, samples);
    let mut history = vec![current];
    let mut epochs = 0;
    let mut stop = StopReason::MaxEpochs;
    while epochs < cfg.max_epochs {
        if current <= cfg.goal_error {
            stop = StopReason::GoalReached;
            break;
        }
        let (jac, res) = residual_jacobian(&model, samples);
        // d(MSE)/dp = 2 Jᵀr / N
        let grad = jac.tr_mul(&res) * (2.0 / n);
        let mut p = model.params();
        for (pi, g) in p.iter_mut().zip(grad.iter()) {
            *pi -= cfg.gd_learning_rate * g;
        }
        model.set_params(&p);
        current = mse(&model, samples);
        epochs += 1;
        history.push(current);
    }
    if current <= cfg.goal_error {
        stop = StopReason::GoalReached;
    }
    let report = TrainingReport {
        epochs,
        final_mse: current,
        mse_history: history,
        training_accuracy: accuracy(&model, samples),
        stop_reason: stop,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize, seed: u64) -> Vec<LabeledSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let x = rng.random_range(-1.0..1.0);
                let y = rng.random_range(-1.0..1.0);
                let mut v = [0.0; FEATURE_LEN];
                v[0] = x;
                v[1] = y;
                (FeatureVector23(v), x + 0.5 * y > 0.1)
            })
            .collect()
    }

    #[test]
    fn separable_toy_is_learned() {
        let data = toy(60, 1);
        let (model, report) = train_with_report(&data, &TrainingConfig::default()).unwrap();
        assert!(report.epochs <= 200);
        assert_eq!(report.training_accuracy, 1.0, "{report:?}");
        assert_eq!(model.layer_sizes(), (23, 16, 1));
    }

    #[test]
    fn lm_mse_never_increases() {
        let data = toy(40, 2);
        let (_, report) = train_with_report(&data, &TrainingConfig::default()).unwrap();
        for w in report.mse_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn duplicated_samples_give_the_same_model() {
        let data = toy(10, 3);
        let mut doubled = data.clone();
        doubled.extend(data.iter().cloned());
        let cfg = TrainingConfig {
            max_epochs: 30,
            ..Default::default()
        };
        let a = train(&data, &cfg).unwrap();
        let b = train(&doubled, &cfg).unwrap();
        for (x, y) in a.params().iter().zip(b.params()) {
            assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let data = toy(30, 4);
        let cfg = TrainingConfig {
            max_epochs: 20,
            seed: 9,
            ..Default::default()
        };
        assert_eq!(train(&data, &cfg).unwrap(), train(&data, &cfg).unwrap());
    }

    #[test]
    fn degenerate_inputs() {
        let data = toy(10, 5);
        let one_class: Vec<_> = data.iter().map(|(v, _)| (*v, true)).collect();
        assert!(matches!(
            train(&one_class, &TrainingConfig::default()),
            Err(Error::DegenerateTrainingSet(_))
        ));
        assert!(matches!(
            train(&data[..1], &TrainingConfig::default()),
            Err(Error::DegenerateTrainingSet(_))
        ));
        assert!(matches!(
            train(&[], &TrainingConfig::default()),
            Err(Error::DegenerateTrainingSet(_))
        ));
    }

    #[test]
    fn gradient_descent_reduces_error() {
        let data = toy(50, 6);
        let cfg = TrainingConfig {
            algorithm: Algorithm::GradientDescent,
            max_epochs: 300,
            gd_learning_rate: 0.1,
            ..Default::default()
        };
        let (_, report) = train_with_report(&data, &cfg).unwrap();
        assert!(report.final_mse < report.mse_history[0]);
        assert!(report.training_accuracy > 0.9);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let data = toy(5, 7);
        let norm = fit_feature_norm(&data);
        let model = init_model(4, norm, 3);
        let (jac, _) = residual_jacobian(&model, &data);
        let p0 = model.params();
        let h = 1e-6;
        for j in 0..p0.len() {
            let mut plus = model.clone();
            let mut minus = model.clone();
            let mut p = p0.clone();
            p[j] += h;
            plus.set_params(&p);
            p[j] -= 2.0 * h;
            minus.set_params(&p);
            let (rp, rm) = (residuals(&plus, &data), residuals(&minus, &data));
            for n in 0..data.len() {
                let fd = (rp[n] - rm[n]) / (2.0 * h);
                let an = jac[(n, j)];
                let denom = an.abs().max(fd.abs()).max(1e-8);
                assert!(
                    (an - fd).abs() / denom < 1e-4 || (an - fd).abs() < 1e-9,
                    "p{j} n{n}: {an} vs {fd}"
                );
            }
        }
    }
}
