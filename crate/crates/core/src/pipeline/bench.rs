use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{init_mlp_params, load_model, MlpModel, Model, Predictor};
use crate::cube_io::{load_cube, CalibrationState, SpectralCube, WavelengthGrid};
use crate::{Error, Result};

/// Full-resolution registered cube size: 1052 × 1588 pixels, 33 bands.
pub const REFERENCE_CUBE: (usize, usize, usize) = (1052, 1588, 33);

pub const MIN_REPETITIONS: usize = 5;

fn default_repetitions() -> usize {
    MIN_REPETITIONS
}

/// Latency benchmark inputs. Without a model file a randomly initialized
/// network is timed; without a cube file a random reflectance cube of the
/// given size is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default)]
    pub model: Option<PathBuf>,
    #[serde(default)]
    pub cube: Option<PathBuf>,
    #[serde(default)]
    pub height: Option<usize>,
    #[serde(default)]
    pub width: Option<usize>,
    #[serde(default)]
    pub bands: Option<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            model: None,
            cube: None,
            height: None,
            width: None,
            bands: None,
            repetitions: MIN_REPETITIONS,
        }
    }
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = serde_json::from_slice(&bytes)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.model, &mut cfg.cube].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub model: String,
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub workers: usize,
    pub repetitions: usize,
    pub samples_ms: Vec<f64>,
    pub median_ms: f64,
    pub pixels_per_second: f64,
}

fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Times full-cube scoring `repetitions` times on the current rayon pool.
/// Only inference is timed; loading happens before.
pub fn bench_inference(
    model: &Model,
    cube: &SpectralCube,
    repetitions: usize,
) -> Result<BenchReport> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::Config(format!(
            "benchmark needs at least {MIN_REPETITIONS} repetitions, got {repetitions}"
        )));
    }
    let predictor = Predictor::new(model);
    let mut samples_ms = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let scores = predictor.cube_scores(cube)?;
        std::hint::black_box(&scores);
        samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let median_ms = median(&samples_ms);
    Ok(BenchReport {
        model: model.kind().name().into(),
        height: cube.height(),
        width: cube.width(),
        bands: cube.bands(),
        workers: rayon::current_num_threads(),
        repetitions,
        samples_ms,
        median_ms,
        pixels_per_second: cube.pixels() as f64 / (median_ms / 1e3),
    })
}

/// Uniform random reflectance cube on an evenly spaced grid.
pub fn random_cube(height: usize, width: usize, bands: usize, seed: u64) -> Result<SpectralCube> {
    if bands == 0 {
        return Err(Error::Config("cube needs at least one band".into()));
    }
    let grid = if bands == REFERENCE_CUBE.2 {
        WavelengthGrid::snapshot_vnir_swir()
    } else {
        let step = 1000.0 / bands as f64;
        WavelengthGrid::new((0..bands).map(|b| 700.0 + step * b as f64).collect())?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..height * width * bands)
        .map(|_| rng.random::<f32>())
        .collect();
    SpectralCube::new(height, width, grid, CalibrationState::Reflectance, data)
}

/// Randomly initialized network for `bands` inputs.
pub fn random_mlp(bands: usize, seed: u64) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = init_mlp_params(&MlpModel::widths_for(bands), &mut rng);
    Ok(MlpModel::from_params(bands, params)?.into())
}

pub fn run_bench(cfg: &BenchConfig, seed: u64) -> Result<BenchReport> {
    let cube = match &cfg.cube {
        Some(p) => load_cube(p)?,
        None => random_cube(
            cfg.height.unwrap_or(REFERENCE_CUBE.0),
            cfg.width.unwrap_or(REFERENCE_CUBE.1),
            cfg.bands.unwrap_or(REFERENCE_CUBE.2),
            seed,
        )?,
    };
    let model = match &cfg.model {
        Some(p) => load_model(p)?,
        None => random_mlp(cube.bands(), seed)?,
    };
    bench_inference(&model, &cube, cfg.repetitions)
}
