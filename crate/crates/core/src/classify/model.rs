use std::path::Path;

use serde::{Deserialize, Serialize};

use super::objective::{layer_offsets, mlp_param_count};
use super::train::TrainConfig;
use crate::{Error, Result};

/// Hidden-layer widths of the network.
pub const MLP_HIDDEN: [usize; 3] = [100, 50, 25];

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearKind {
    Logistic,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Svm,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Svm => "svm",
            ModelKind::Mlp => "mlp",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn new(kind: LinearKind, weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput(
                "linear model needs at least one weight".into(),
            ));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput(
                "non-finite linear model parameter".into(),
            ));
        }
        Ok(Self {
            kind,
            weights,
            bias,
        })
    }

    pub fn zeros(kind: LinearKind, n_features: usize) -> Self {
        Self {
            kind,
            weights: vec![0.0; n_features],
            bias: 0.0,
        }
    }

    /// Raw `w·x + b`.
    pub fn decision(&self, x: &[f32]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .map(|(w, &v)| w * f64::from(v))
            .sum::<f64>()
            + self.bias
    }
}

/// Rectifier network `[B, 100, 50, 25, 1]` with a logistic output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    widths: Vec<usize>,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn widths_for(n_features: usize) -> Vec<usize> {
        let mut w = vec![n_features];
        w.extend(MLP_HIDDEN);
        w.push(1);
        w
    }

    pub fn from_params(n_features: usize, params: Vec<f64>) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidInput(
                "network needs at least one input".into(),
            ));
        }
        let widths = Self::widths_for(n_features);
        let expected = mlp_param_count(&widths);
        if params.len() != expected {
            return Err(Error::Dimension(format!(
                "network with {n_features} inputs needs {expected} parameters, got {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("non-finite network parameter".into()));
        }
        Ok(Self { widths, params })
    }

    /// All weights and biases zero; every input scores 0.5.
    pub fn zeros(n_features: usize) -> Self {
        let widths = Self::widths_for(n_features);
        let params = vec![0.0; mlp_param_count(&widths)];
        Self { widths, params }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn n_features(&self) -> usize {
        self.widths[0]
    }

    /// `(weights, biases)` of layer `l`; weights are `in×out` row-major.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w_off, b_off) = layer_offsets(&self.widths)[l];
        (
            &self.params[w_off..b_off],
            &self.params[b_off..b_off + self.widths[l + 1]],
        )
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linear(m) => match m.kind {
                LinearKind::Logistic => ModelKind::Logistic,
                LinearKind::Svm => ModelKind::Svm,
            },
            Model::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.weights.len(),
            Model::Mlp(m) => m.n_features(),
        }
    }

    /// 0.5 for probability outputs, 0 for SVM margins.
    pub fn default_threshold(&self) -> f64 {
        match self.kind() {
            ModelKind::Svm => 0.0,
            _ => 0.5,
        }
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl From<MlpModel> for Model {
    fn from(m: MlpModel) -> Self {
        Model::Mlp(m)
    }
}

/// On-disk JSON model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: ModelKind,
    pub layer_widths: Vec<usize>,
    /// One row-major `in×out` array per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub training_config: Option<TrainConfig>,
    pub seed: Option<u64>,
}

impl ModelFile {
    pub fn from_model(model: &Model, cfg: Option<&TrainConfig>) -> Self {
        let (layer_widths, weights, biases) = match model {
            Model::Linear(m) => (
                vec![m.weights.len(), 1],
                vec![m.weights.clone()],
                vec![vec![m.bias]],
            ),
            Model::Mlp(m) => {
                let (w, b) = (0..m.n_layers())
                    .map(|l| {
                        let (w, b) = m.layer(l);
                        (w.to_vec(), b.to_vec())
                    })
                    .unzip();
                (m.widths().to_vec(), w, b)
            }
        };
        Self {
            format_version: MODEL_FORMAT_VERSION,
            kind: model.kind(),
            layer_widths,
            weights,
            biases,
            training_config: cfg.cloned(),
            seed: cfg.map(|c| c.seed),
        }
    }

    pub fn to_model(&self) -> Result<Model> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let widths = &self.layer_widths;
        let layers = widths.len().saturating_sub(1);
        if layers == 0 || self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::InvalidInput("model layer count mismatch".into()));
        }
        for (l, pair) in widths.windows(2).enumerate() {
            if self.weights[l].len() != pair[0].saturating_mul(pair[1])
                || self.biases[l].len() != pair[1]
            {
                return Err(Error::InvalidInput(format!(
                    "layer {l} has wrong parameter count"
                )));
            }
        }
        match self.kind {
            ModelKind::Logistic | ModelKind::Svm => {
                if widths.len() != 2 || widths[1] != 1 {
                    return Err(Error::InvalidInput(
                        "linear model must have widths [B, 1]".into(),
                    ));
                }
                let kind = if self.kind == ModelKind::Logistic {
                    LinearKind::Logistic
                } else {
                    LinearKind::Svm
                };
                Ok(Model::Linear(LinearModel::new(
                    kind,
                    self.weights[0].clone(),
                    self.biases[0][0],
                )?))
            }
            ModelKind::Mlp => {
                let n_features = widths[0];
                if *widths != MlpModel::widths_for(n_features) {
                    return Err(Error::InvalidInput(format!(
                        "network widths must be [B, 100, 50, 25, 1], got {widths:?}"
                    )));
                }
                let params = self
                    .weights
                    .iter()
                    .zip(&self.biases)
                    .flat_map(|(w, b)| w.iter().chain(b))
                    .copied()
                    .collect();
                Ok(Model::Mlp(MlpModel::from_params(n_features, params)?))
            }
        }
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let file: ModelFile = serde_json::from_slice(bytes)?;
        file.to_model()?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

pub fn save_model(model: &Model, cfg: Option<&TrainConfig>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, ModelFile::from_model(model, cfg).to_json())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelFile::from_json_slice(&bytes)?.to_model()
}
