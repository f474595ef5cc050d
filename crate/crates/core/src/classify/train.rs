use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::model::{LinearKind, LinearModel, MlpModel, MLP_HIDDEN};
use super::objective::{HingeObjective, LogisticObjective, MlpObjective, Objective};
use crate::{Error, Result};

/// Default L2 strength of the linear SVM.
pub const SVM_DEFAULT_L2: f64 = 1e-4;

/// Rows per chunk when evaluating the validation loss.
const EVAL_CHUNK: usize = 4096;

/// Mini-batch Adam settings shared by all model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// `None` picks the family default: 0 for LR and MLP, 1e-4 for SVM.
    pub l2: Option<f64>,
    /// Epochs without validation-loss improvement before stopping; only
    /// applies when a validation set is supplied.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 50,
            batch_size: 1024,
            l2: None,
            patience: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be > 0");
        }
        if let Some(l2) = self.l2 {
            if !(l2 >= 0.0 && l2.is_finite()) {
                return bad("l2 must be >= 0");
            }
        }
        Ok(())
    }
}

/// Per-epoch losses recorded during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    /// Objective on the full training set before the first update.
    pub initial_loss: f64,
    /// Mean mini-batch loss of each epoch.
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: Option<usize>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

fn gather(data: &Dataset, rows: &[usize], x: &mut Array2<f64>, y: &mut Array1<f64>) {
    let feats = data.features();
    for (k, &r) in rows.iter().enumerate() {
        for (dst, &src) in x.row_mut(k).iter_mut().zip(feats.row(r)) {
            *dst = f64::from(src);
        }
        y[k] = f64::from(data.labels()[r]);
    }
}

/// Mean objective over a whole dataset, evaluated chunk by chunk.
pub fn dataset_loss<O: Objective>(obj: &O, params: &[f64], data: &Dataset) -> f64 {
    let n = data.len();
    let mut total = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let rows: Vec<usize> = (start..end).collect();
        let mut x = Array2::zeros((rows.len(), data.n_features()));
        let mut y = Array1::zeros(rows.len());
        gather(data, &rows, &mut x, &mut y);
        total += obj.loss(params, x.view(), y.view()) * rows.len() as f64;
        start = end;
    }
    total / n as f64
}

/// Runs mini-batch Adam on `obj` starting from `params`.
///
/// Rows are reshuffled every epoch from `rng` unless one batch covers the
/// whole set. With a validation set, training stops after `cfg.patience`
/// epochs without improvement and the best parameters are restored.
pub fn fit<O: Objective>(
    obj: &O,
    params: &mut Vec<f64>,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    let n = train.len();
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut adam = Adam::new(params.len());
    let mut grad = vec![0.0; params.len()];
    let mut x = Array2::zeros((batch, train.n_features()));
    let mut y = Array1::zeros(batch);

    let mut history = TrainHistory {
        initial_loss: dataset_loss(obj, params, train),
        ..TrainHistory::default()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        if batch < n {
            order.shuffle(rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            if chunk.len() != x.nrows() {
                x = Array2::zeros((chunk.len(), train.n_features()));
                y = Array1::zeros(chunk.len());
            }
            gather(train, chunk, &mut x, &mut y);
            let loss = obj.evaluate(params, x.view(), y.view(), Some(&mut grad));
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch });
            }
            epoch_loss += loss * chunk.len() as f64;
            adam.step(params, &grad, cfg);
        }
        history.train_loss.push(epoch_loss / n as f64);

        if let Some(val) = validation {
            let vl = dataset_loss(obj, params, val);
            if !vl.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            history.val_loss.push(vl);
            if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                best = Some((vl, params.clone()));
                history.best_epoch = Some(epoch);
            } else if epoch - history.best_epoch.unwrap_or(0) >= cfg.patience {
                break;
            }
        }
    }
    if let Some((_, p)) = best {
        *params = p;
    } else {
        history.best_epoch = Some(history.train_loss.len() - 1);
    }
    Ok(history)
}

fn check_inputs(train: &Dataset, validation: Option<&Dataset>) -> Result<()> {
    train.require_both_classes()?;
    if let Some(v) = validation {
        if v.n_features() != train.n_features() {
            return Err(Error::Dimension(
                "validation features differ from training features".into(),
            ));
        }
        if v.is_empty() {
            return Err(Error::InvalidInput("empty validation set".into()));
        }
    }
    Ok(())
}

fn train_linear(
    kind: LinearKind,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainHistory)> {
    check_inputs(train, validation)?;
    let b = train.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = vec![0.0; b + 1];
    let history = match kind {
        LinearKind::Logistic => {
            let obj = LogisticObjective {
                n_features: b,
                l2: cfg.l2.unwrap_or(0.0),
            };
            fit(&obj, &mut params, train, validation, cfg, &mut rng)?
        }
        LinearKind::Svm => {
            let obj = HingeObjective {
                n_features: b,
                l2: cfg.l2.unwrap_or(SVM_DEFAULT_L2),
            };
            fit(&obj, &mut params, train, validation, cfg, &mut rng)?
        }
    };
    let bias = params[b];
    params.truncate(b);
    Ok((LinearModel::new(kind, params, bias)?, history))
}

/// Logistic regression on mean binary cross-entropy, zero-initialized.
pub fn train_logistic(data: &Dataset, cfg: &TrainConfig) -> Result<LinearModel> {
    train_linear(LinearKind::Logistic, data, None, cfg).map(|(m, _)| m)
}

/// Primal linear SVM on mean hinge loss, zero-initialized.
pub fn train_svm(data: &Dataset, cfg: &TrainConfig) -> Result<LinearModel> {
    train_linear(LinearKind::Svm, data, None, cfg).map(|(m, _)| m)
}

/// Linear model with optional validation-based early stopping.
pub fn train_linear_with_validation(
    kind: LinearKind,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainHistory)> {
    train_linear(kind, train, validation, cfg)
}

/// Draws initial MLP parameters: weights uniform in `±1/√fan_in`, biases zero.
pub fn init_mlp_params(widths: &[usize], rng: &mut impl Rng) -> Vec<f64> {
    let mut params = Vec::with_capacity(super::objective::mlp_param_count(widths));
    for pair in widths.windows(2) {
        let bound = 1.0 / (pair[0] as f64).sqrt();
        params.extend((0..pair[0] * pair[1]).map(|_| rng.random_range(-bound..=bound)));
        params.extend(std::iter::repeat_n(0.0, pair[1]));
    }
    params
}

/// The 100/50/25 rectifier network on mean binary cross-entropy.
pub fn train_mlp(data: &Dataset, cfg: &TrainConfig) -> Result<MlpModel> {
    train_mlp_with_validation(data, None, cfg).map(|(m, _)| m)
}

pub fn train_mlp_with_validation(
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainHistory)> {
    check_inputs(train, validation)?;
    let widths = MlpModel::widths_for(train.n_features());
    debug_assert_eq!(&widths[1..4], &MLP_HIDDEN);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_mlp_params(&widths, &mut rng);
    let obj = MlpObjective {
        widths: widths.clone(),
        l2: cfg.l2.unwrap_or(0.0),
    };
    let history = fit(&obj, &mut params, train, validation, cfg, &mut rng)?;
    Ok((MlpModel::from_params(train.n_features(), params)?, history))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        Dataset::from_rows(&[vec![0.1], vec![0.9]], vec![0, 1]).unwrap()
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate, 1e-3);
        assert_eq!(
            (cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
            (0.9, 0.999, 1e-8)
        );
        assert_eq!((cfg.epochs, cfg.batch_size, cfg.patience), (50, 1024, 5));
        assert!(cfg.validate().is_ok());
        for bad in [
            TrainConfig {
                learning_rate: 0.0,
                ..cfg.clone()
            },
            TrainConfig {
                epochs: 0,
                ..cfg.clone()
            },
            TrainConfig {
                batch_size: 0,
                ..cfg.clone()
            },
            TrainConfig {
                l2: Some(-1.0),
                ..cfg.clone()
            },
        ] {
            assert!(bad.validate().unwrap_err().is_config());
        }
        let parsed: TrainConfig = serde_json::from_str(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(parsed.epochs, 3);
        assert_eq!(parsed.batch_size, 1024);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 3}"#).is_err());
    }

    #[test]
    fn single_class_rejected() {
        let d = Dataset::from_rows(&[vec![0.1], vec![0.9]], vec![1, 1]).unwrap();
        let cfg = TrainConfig::default();
        assert!(matches!(train_logistic(&d, &cfg), Err(Error::SingleClass)));
        assert!(matches!(train_svm(&d, &cfg), Err(Error::SingleClass)));
        assert!(matches!(train_mlp(&d, &cfg), Err(Error::SingleClass)));
    }

    #[test]
    fn diverging_training_reports_non_finite_loss() {
        let d = Dataset::from_rows(&[vec![1e30], vec![-1e30]], vec![0, 1]).unwrap();
        let cfg = TrainConfig {
            learning_rate: 1e300,
            epochs: 5,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_logistic(&d, &cfg),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn logistic_separates_two_points() {
        let cfg = TrainConfig {
            epochs: 500,
            ..TrainConfig::default()
        };
        let d = tiny();
        let m = train_logistic(&d, &cfg).unwrap();
        assert!(m.decision(&[0.1]) < 0.0 && m.decision(&[0.9]) > 0.0);
        let obj = LogisticObjective {
            n_features: 1,
            l2: 0.0,
        };
        let mut p = m.weights.clone();
        p.push(m.bias);
        assert!(dataset_loss(&obj, &p, &d) < std::f64::consts::LN_2);
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let train = Dataset::from_rows(&[vec![0.1], vec![0.9]], vec![0, 1]).unwrap();
        // validation labels are inverted so validation loss rises from the start
        let val = Dataset::from_rows(&[vec![0.1], vec![0.9]], vec![1, 0]).unwrap();
        let cfg = TrainConfig {
            epochs: 100,
            patience: 3,
            learning_rate: 0.05,
            ..TrainConfig::default()
        };
        let (m, h) =
            train_linear_with_validation(LinearKind::Logistic, &train, Some(&val), &cfg).unwrap();
        assert_eq!(h.best_epoch, Some(0));
        assert_eq!(h.val_loss.len(), 4);
        // parameters after exactly one Adam step from zero
        assert!((m.bias - 0.0).abs() < 0.06);
    }
}
