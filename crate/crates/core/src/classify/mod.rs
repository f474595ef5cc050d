//! Per-pixel binary classifiers: logistic regression, a primal linear SVM and
//! a `[B, 100, 50, 25, 1]` rectifier network, all trained with mini-batch Adam.

mod dataset;
mod infer;
mod model;
mod objective;
mod train;

pub use dataset::Dataset;
pub use infer::{
    predict_cube_scores, predict_mask, predict_scores, threshold_scores, Predictor, CHUNK_PIXELS,
};
pub use model::{
    load_model, save_model, LinearKind, LinearModel, MlpModel, Model, ModelFile, ModelKind,
    MLP_HIDDEN, MODEL_FORMAT_VERSION,
};
pub use objective::{HingeObjective, LogisticObjective, MlpObjective, Objective};
pub use train::{
    dataset_loss, fit, init_mlp_params, train_linear_with_validation, train_logistic, train_mlp,
    train_mlp_with_validation, train_svm, TrainConfig, TrainHistory, SVM_DEFAULT_L2,
};

use crate::Result;

/// Trains the requested model family, with optional early stopping on `validation`.
pub fn train_model(
    kind: ModelKind,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Model, TrainHistory)> {
    match kind {
        ModelKind::Logistic => {
            train_linear_with_validation(LinearKind::Logistic, train, validation, cfg)
                .map(|(m, h)| (m.into(), h))
        }
        ModelKind::Svm => train_linear_with_validation(LinearKind::Svm, train, validation, cfg)
            .map(|(m, h)| (m.into(), h)),
        ModelKind::Mlp => {
            train_mlp_with_validation(train, validation, cfg).map(|(m, h)| (m.into(), h))
        }
    }
}
