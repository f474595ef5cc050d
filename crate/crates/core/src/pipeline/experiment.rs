use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::render::{render_ppm, RenderPalette};
use super::split::split_dataset;
use crate::calibrate::{estimate_dark, extract_reference, reflectance};
use crate::classify::{
    load_model, predict_cube_scores, predict_scores, save_model, threshold_scores, train_model,
    Dataset, Model, ModelKind, TrainConfig, TrainHistory,
};
use crate::cube_io::{
    flatten_pixels, load_cube, load_mask, load_rgb, save_mask, CalibrationState, LabelMask,
    SceneManifest, SceneRole, SpectralCube, ValidityMask, WavelengthGrid,
};
use crate::metrics::{
    classification_metrics, confusion, confusion_from_labels, roc_auc, Averaging, ConfusionCounts,
    MetricsReport, ReportDocument,
};
use crate::register::{warp_cube, Homography};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    #[default]
    #[serde(rename = "hsi", alias = "HSI")]
    Hsi,
    #[serde(rename = "rgb", alias = "RGB")]
    Rgb,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::Hsi => "hsi",
            Modality::Rgb => "rgb",
        }
    }
}

fn default_model() -> ModelKind {
    ModelKind::Mlp
}

/// One train-and-evaluate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train_manifests: Vec<PathBuf>,
    pub test_manifests: Vec<PathBuf>,
    #[serde(default)]
    pub modality: Modality,
    #[serde(default = "default_model")]
    pub model: ModelKind,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub split_seed: u64,
    /// Decision threshold; defaults to 0.5 for probabilities, 0 for the SVM.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub averaging: Averaging,
    #[serde(default)]
    pub palette: RenderPalette,
    /// Model used by evaluation; defaults to `model.json` in the output directory.
    #[serde(default)]
    pub model_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(train_manifests: Vec<PathBuf>, test_manifests: Vec<PathBuf>) -> Self {
        Self {
            train_manifests,
            test_manifests,
            modality: Modality::default(),
            model: default_model(),
            train: TrainConfig::default(),
            split_seed: 0,
            threshold: None,
            averaging: Averaging::default(),
            palette: RenderPalette::default(),
            model_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_manifests.is_empty() || self.test_manifests.is_empty() {
            return Err(Error::Config(
                "experiment needs at least one train and one test manifest".into(),
            ));
        }
        if let Some(t) = self.threshold {
            if !t.is_finite() {
                return Err(Error::Config("threshold must be finite".into()));
            }
        }
        self.train.validate()?;
        self.palette.validate()
    }

    pub fn from_json_slice(bytes: &[u8]) -> Result<Self> {
        let cfg: Self = serde_json::from_slice(bytes)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and resolves its relative paths against the config's
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json_slice(&bytes)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.train_manifests.iter_mut().for_each(fix);
        cfg.test_manifests.iter_mut().for_each(fix);
        if let Some(m) = &mut cfg.model_path {
            fix(m);
        }
        Ok(cfg)
    }

    fn threshold_for(&self, model: &Model) -> f64 {
        self.threshold.unwrap_or_else(|| model.default_threshold())
    }
}

/// A scene prepared for classification: reflectance features on the mask's
/// pixel grid.
#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub manifest: SceneManifest,
    pub features: SpectralCube,
    /// Ground truth with invalid pixels set to the ignore code.
    pub truth: LabelMask,
    pub validity: ValidityMask,
}

fn warp_validity(
    valid: &ValidityMask,
    h: &Homography,
    out_height: usize,
    out_width: usize,
) -> Result<ValidityMask> {
    let grid = WavelengthGrid::new(vec![1000.0])?;
    let flags = SpectralCube::new(
        valid.height(),
        valid.width(),
        grid,
        CalibrationState::Reflectance,
        valid
            .flags()
            .iter()
            .map(|&v| if v { 1.0 } else { 0.0 })
            .collect(),
    )?;
    let (warped, inside) = warp_cube(&flags, h, out_height, out_width)?;
    // a sample is valid only when every bilinear tap was valid
    let interior = ValidityMask::new(
        out_height,
        out_width,
        warped.band(0).iter().map(|&v| v > 1.0 - 1e-6).collect(),
    )?;
    interior.and(&inside)
}

/// Loads, calibrates and registers one scene for `modality`.
pub fn load_scene(manifest: &SceneManifest, modality: Modality) -> Result<LoadedScene> {
    let mask = load_mask(&manifest.mask)?;
    let (features, validity) = match modality {
        Modality::Rgb => {
            let rgb = load_rgb(&manifest.rgb)?;
            let cube = rgb.to_cube();
            let valid = ValidityMask::all_valid(cube.height(), cube.width());
            (cube, valid)
        }
        Modality::Hsi => {
            let mut cube = load_cube(&manifest.cube)?;
            let mut valid = ValidityMask::all_valid(cube.height(), cube.width());
            if cube.state() == CalibrationState::RawCounts {
                let cal = manifest.calibration.as_ref().ok_or_else(|| {
                    Error::Config(format!(
                        "scenario {} holds raw counts but has no calibration inputs",
                        manifest.scenario_id
                    ))
                })?;
                let darks = cal.dark.iter().map(load_cube).collect::<Result<Vec<_>>>()?;
                let dark = estimate_dark(&darks)?;
                let reference = extract_reference(&cube, cal.panel, &dark, cal.reflectivity)?;
                (cube, valid) = reflectance(&cube, &dark, &reference)?;
            }
            if let Some(path) = &manifest.homography {
                let h = Homography::load(path)?;
                let (warped, inside) = warp_cube(&cube, &h, mask.height(), mask.width())?;
                valid = warp_validity(&valid, &h, mask.height(), mask.width())?.and(&inside)?;
                cube = warped;
            }
            (cube, valid)
        }
    };
    if features.height() != mask.height() || features.width() != mask.width() {
        return Err(Error::Dimension(format!(
            "scenario {}: {} data is {}x{}, mask is {}x{}",
            manifest.scenario_id,
            modality.name(),
            features.height(),
            features.width(),
            mask.height(),
            mask.width()
        )));
    }
    let mut truth = mask;
    truth.apply_validity(&validity)?;
    Ok(LoadedScene {
        manifest: manifest.clone(),
        features,
        truth,
        validity,
    })
}

fn load_role(path: &Path, role: SceneRole) -> Result<SceneManifest> {
    let m = SceneManifest::load(path)?;
    if m.role != role {
        return Err(Error::Config(format!(
            "{} is a {:?} scene, expected {role:?}",
            path.display(),
            m.role
        )));
    }
    Ok(m)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Metrics for thresholded `scores` against `labels`; AUC is flagged
/// undefined when only one class is present.
pub fn score_report(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
    averaging: Averaging,
) -> Result<MetricsReport> {
    let counts = confusion_from_labels(&threshold_scores(scores, threshold), labels);
    Ok(classification_metrics(counts, averaging)?.with_auc(roc_auc(scores, labels).ok()))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: TrainHistory,
    pub validation: MetricsReport,
    pub model_path: PathBuf,
    pub report_path: PathBuf,
}

/// Pools the training scenes, splits them, fits the configured model and
/// writes `model.json` and `validation_report.json` into `out_dir`.
pub fn run_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut parts = Vec::with_capacity(cfg.train_manifests.len());
    for path in &cfg.train_manifests {
        let manifest = load_role(path, SceneRole::Train)?;
        let scene = load_scene(&manifest, cfg.modality)?;
        let (x, y) = flatten_pixels(&scene.features, &scene.truth)?;
        parts.push(Dataset::new(x, y)?);
    }
    let bands = parts[0].n_features();
    if let Some(p) = parts.iter().find(|p| p.n_features() != bands) {
        return Err(Error::Config(format!(
            "training scenes disagree on band count ({bands} vs {})",
            p.n_features()
        )));
    }
    let pool = Dataset::concat(&parts)?;
    drop(parts);
    let (train, validation) = split_dataset(&pool, cfg.split_seed)?;
    drop(pool);

    let (model, history) = train_model(cfg.model, &train, Some(&validation), &cfg.train)?;
    let scores = predict_scores(&model, validation.features().view())?;
    let report = score_report(
        &scores,
        validation.labels(),
        cfg.threshold_for(&model),
        cfg.averaging,
    )?;

    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let model_path = out_dir.join("model.json");
    save_model(&model, Some(&cfg.train), &model_path)?;
    let report_path = out_dir.join("validation_report.json");
    write_json(
        &report_path,
        &ReportDocument::new(cfg.model.name(), cfg.modality.name(), "validation", &report),
    )?;
    Ok(TrainOutcome {
        model,
        history,
        validation: report,
        model_path,
        report_path,
    })
}

#[derive(Debug, Clone)]
pub struct SceneEvaluation {
    pub scenario_id: u32,
    pub report: MetricsReport,
    pub prediction: LabelMask,
    pub truth: LabelMask,
}

#[derive(Debug, Clone)]
pub struct EvalOutcome {
    pub scenes: Vec<SceneEvaluation>,
    /// All test pixels pooled into one confusion matrix and one ROC curve.
    pub pooled: MetricsReport,
    /// Unweighted mean of the per-scene metrics.
    pub scene_mean: MetricsReport,
}

/// Scene-mean report: each metric averaged over scenes, counts summed, and a
/// metric flagged undefined if it was undefined in any scene.
pub fn scene_mean_report(reports: &[MetricsReport], averaging: Averaging) -> Result<MetricsReport> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no scene reports to average".into()));
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mut undefined: Vec<String> = Vec::new();
    for r in reports {
        for u in &r.undefined {
            if !undefined.contains(u) {
                undefined.push(u.clone());
            }
        }
    }
    Ok(MetricsReport {
        accuracy: mean(|r| r.accuracy),
        precision: mean(|r| r.precision),
        recall: mean(|r| r.recall),
        f1: mean(|r| r.f1),
        auc: mean(|r| r.auc),
        counts: reports.iter().map(|r| r.counts).sum(),
        averaging,
        undefined,
    })
}

fn scene_stem(id: u32) -> String {
    format!("scene_{id:02}")
}

/// Scores every test scene with the trained model and writes per-scene,
/// pooled and scene-mean reports plus prediction masks and detection maps.
pub fn run_eval(cfg: &ExperimentConfig, out_dir: &Path) -> Result<EvalOutcome> {
    cfg.validate()?;
    let model_path = cfg
        .model_path
        .clone()
        .unwrap_or_else(|| out_dir.join("model.json"));
    let model = load_model(&model_path)?;
    let threshold = cfg.threshold_for(&model);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut scenes = Vec::with_capacity(cfg.test_manifests.len());
    let mut seen = std::collections::BTreeSet::new();
    let (mut pooled_scores, mut pooled_labels) = (Vec::new(), Vec::new());
    for path in &cfg.test_manifests {
        let manifest = load_role(path, SceneRole::Test)?;
        if !seen.insert(manifest.scenario_id) {
            return Err(Error::Config(format!(
                "scenario {} listed twice",
                manifest.scenario_id
            )));
        }
        let scene = load_scene(&manifest, cfg.modality)?;
        if scene.features.bands() != model.n_features() {
            return Err(Error::Dimension(format!(
                "model expects {} bands, scenario {} has {}",
                model.n_features(),
                manifest.scenario_id,
                scene.features.bands()
            )));
        }
        let scores = predict_cube_scores(&model, &scene.features)?;
        let mut prediction = LabelMask::new(
            scene.truth.height(),
            scene.truth.width(),
            threshold_scores(&scores, threshold),
        )?;
        prediction.apply_validity(&scene.validity)?;

        let (mut s, mut l) = (Vec::new(), Vec::new());
        for ((&score, &p), &t) in scores
            .iter()
            .zip(prediction.labels())
            .zip(scene.truth.labels())
        {
            if p != LabelMask::IGNORE && t != LabelMask::IGNORE {
                s.push(score);
                l.push(t);
            }
        }
        let counts = confusion(&prediction, &scene.truth)?;
        let report = classification_metrics(counts, cfg.averaging)?.with_auc(roc_auc(&s, &l).ok());
        pooled_scores.extend(s);
        pooled_labels.extend(l);

        let stem = scene_stem(manifest.scenario_id);
        save_mask(&prediction, out_dir.join(format!("pred_{stem}.pgm")))?;
        let map = render_ppm(&prediction, &scene.truth, &cfg.palette)?;
        let map_path = out_dir.join(format!("map_{stem}.ppm"));
        std::fs::write(&map_path, map).map_err(|e| Error::io(&map_path, e))?;
        write_json(
            &out_dir.join(format!("report_{stem}.json")),
            &ReportDocument::new(model.kind().name(), cfg.modality.name(), &stem, &report),
        )?;
        scenes.push(SceneEvaluation {
            scenario_id: manifest.scenario_id,
            report,
            prediction,
            truth: scene.truth,
        });
    }

    let counts: ConfusionCounts = scenes.iter().map(|s| s.report.counts).sum();
    let pooled = classification_metrics(counts, cfg.averaging)?
        .with_auc(roc_auc(&pooled_scores, &pooled_labels).ok());
    let reports: Vec<MetricsReport> = scenes.iter().map(|s| s.report.clone()).collect();
    let scene_mean = scene_mean_report(&reports, cfg.averaging)?;
    let kind = model.kind().name();
    let modality = cfg.modality.name();
    write_json(
        &out_dir.join("report_test_pooled.json"),
        &ReportDocument::new(kind, modality, "test_pooled", &pooled),
    )?;
    write_json(
        &out_dir.join("report_test_scene_mean.json"),
        &ReportDocument::new(kind, modality, "test_scene_mean", &scene_mean),
    )?;
    Ok(EvalOutcome {
        scenes,
        pooled,
        scene_mean,
    })
}

/// One detection map to render from saved masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub prediction: PathBuf,
    pub truth: PathBuf,
    /// Output stem; defaults to the prediction file's stem.
    #[serde(default)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderConfig {
    pub maps: Vec<MapSpec>,
    #[serde(default)]
    pub palette: RenderPalette,
}

impl RenderConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_slice(&bytes)?;
        if cfg.maps.is_empty() {
            return Err(Error::Config("render config lists no maps".into()));
        }
        cfg.palette.validate()?;
        let base = path.parent().unwrap_or(Path::new("."));
        for m in &mut cfg.maps {
            for p in [&mut m.prediction, &mut m.truth] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }
}

/// Renders `map_<name>.ppm` for each entry; returns the written paths.
pub fn run_render(cfg: &RenderConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    cfg.palette.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(cfg.maps.len());
    for m in &cfg.maps {
        let pred = load_mask(&m.prediction)?;
        let truth = load_mask(&m.truth)?;
        let name = match &m.name {
            Some(n) => n.clone(),
            None => m
                .prediction
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .ok_or_else(|| Error::Config("prediction path has no file name".into()))?,
        };
        let path = out_dir.join(format!("map_{name}.ppm"));
        std::fs::write(&path, render_ppm(&pred, &truth, &cfg.palette)?)
            .map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
