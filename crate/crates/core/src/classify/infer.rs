//! Batched inference.
//!
//! Network layers run in `f32` through blocked matrix products over chunks of
//! pixels; chunks are independent, so results do not depend on how rayon
//! partitions them.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ShapeBuilder};
use rayon::prelude::*;

use super::model::{MlpModel, Model};
use super::objective::sigmoid;
use crate::cube_io::{CalibrationState, LabelMask, SpectralCube, ValidityMask};
use crate::{Error, Result};

/// Pixels per inference chunk.
pub const CHUNK_PIXELS: usize = 4096;

struct Layer {
    weights: Array2<f32>,
    bias: Array1<f32>,
}

enum Compiled<'a> {
    Linear(&'a super::model::LinearModel),
    Mlp(Vec<Layer>),
}

/// A model prepared for fast scoring.
pub struct Predictor<'a> {
    compiled: Compiled<'a>,
    n_features: usize,
}

struct Scratch {
    features: Vec<f32>,
    activations: Vec<Array2<f32>>,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a Model) -> Self {
        let compiled = match model {
            Model::Linear(m) => Compiled::Linear(m),
            Model::Mlp(m) => Compiled::Mlp(compile_mlp(m)),
        };
        Self {
            compiled,
            n_features: model.n_features(),
        }
    }

    fn scratch(&self) -> Scratch {
        let activations = match &self.compiled {
            Compiled::Linear(_) => Vec::new(),
            Compiled::Mlp(layers) => layers
                .iter()
                .map(|l| Array2::zeros((CHUNK_PIXELS, l.weights.ncols())))
                .collect(),
        };
        Scratch {
            features: vec![0.0; CHUNK_PIXELS * self.n_features],
            activations,
        }
    }

    /// Scores `x` (`n ≤ CHUNK_PIXELS` rows) into `out`.
    fn score_chunk(&self, x: ArrayView2<f32>, scratch: &mut Scratch, out: &mut [f64]) {
        match &self.compiled {
            Compiled::Linear(m) => {
                let probability = m.kind == super::model::LinearKind::Logistic;
                for (o, row) in out.iter_mut().zip(x.rows()) {
                    let z = m.bias
                        + m.weights
                            .iter()
                            .zip(row)
                            .map(|(w, &v)| w * f64::from(v))
                            .sum::<f64>();
                    *o = if probability { sigmoid(z) } else { z };
                }
            }
            Compiled::Mlp(layers) => {
                let n = x.nrows();
                let last = layers.len() - 1;
                for (l, layer) in layers.iter().enumerate() {
                    let (done, rest) = scratch.activations.split_at_mut(l);
                    let mut act = rest[0].slice_mut(s![..n, ..]);
                    if l == 0 {
                        general_mat_mul(1.0, &x, &layer.weights, 0.0, &mut act);
                    } else {
                        let input = done[l - 1].slice(s![..n, ..]);
                        general_mat_mul(1.0, &input, &layer.weights, 0.0, &mut act);
                    }
                    let relu = l < last;
                    for mut row in act.rows_mut() {
                        for (v, &b) in row.iter_mut().zip(&layer.bias) {
                            let z = *v + b;
                            *v = if relu { z.max(0.0) } else { z };
                        }
                    }
                }
                let logits = scratch.activations[last].slice(s![..n, 0]);
                for (o, &z) in out.iter_mut().zip(logits) {
                    *o = sigmoid(f64::from(z));
                }
            }
        }
    }

    fn check_width(&self, width: usize) -> Result<()> {
        if width != self.n_features {
            return Err(Error::Dimension(format!(
                "model expects {} features, input has {width}",
                self.n_features
            )));
        }
        Ok(())
    }

    /// Scores every row of an `N×B` feature matrix.
    pub fn scores(&self, features: ArrayView2<f32>) -> Result<Vec<f64>> {
        self.check_width(features.ncols())?;
        let mut out = vec![0.0; features.nrows()];
        out.par_chunks_mut(CHUNK_PIXELS).enumerate().for_each_init(
            || self.scratch(),
            |scratch, (ci, chunk)| {
                let start = ci * CHUNK_PIXELS;
                let x = features.slice(s![start..start + chunk.len(), ..]);
                self.score_chunk(x, scratch, chunk);
            },
        );
        Ok(out)
    }

    /// Scores every pixel of a cube, returned in row-major pixel order.
    pub fn cube_scores(&self, cube: &SpectralCube) -> Result<Vec<f64>> {
        self.check_width(cube.bands())?;
        let bands = cube.bands();
        let mut out = vec![0.0; cube.pixels()];
        out.par_chunks_mut(CHUNK_PIXELS).enumerate().for_each_init(
            || self.scratch(),
            |scratch, (ci, chunk)| {
                let start = ci * CHUNK_PIXELS;
                let n = chunk.len();
                let mut features = std::mem::take(&mut scratch.features);
                // column-major n×B: each band is one contiguous copy
                for b in 0..bands {
                    features[b * n..(b + 1) * n].copy_from_slice(&cube.band(b)[start..start + n]);
                }
                let x = ArrayView2::from_shape((n, bands).f(), &features[..n * bands])
                    .expect("chunk shape");
                self.score_chunk(x, scratch, chunk);
                scratch.features = features;
            },
        );
        Ok(out)
    }
}

fn compile_mlp(m: &MlpModel) -> Vec<Layer> {
    (0..m.n_layers())
        .map(|l| {
            let (w, b) = m.layer(l);
            let (fan_in, fan_out) = (m.widths()[l], m.widths()[l + 1]);
            Layer {
                weights: Array2::from_shape_vec(
                    (fan_in, fan_out),
                    w.iter().map(|&v| v as f32).collect(),
                )
                .expect("layer shape"),
                bias: b.iter().map(|&v| v as f32).collect(),
            }
        })
        .collect()
}

/// Probabilities for logistic and network models, raw margins for the SVM.
pub fn predict_scores(model: &Model, features: ArrayView2<f32>) -> Result<Vec<f64>> {
    Predictor::new(model).scores(features)
}

pub fn predict_cube_scores(model: &Model, cube: &SpectralCube) -> Result<Vec<f64>> {
    Predictor::new(model).cube_scores(cube)
}

/// Class 1 iff `score > threshold`.
pub fn threshold_scores(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s > threshold)).collect()
}

/// Per-pixel detection mask for a reflectance cube. Pixels flagged invalid
/// by `validity` receive the ignore code.
pub fn predict_mask(
    model: &Model,
    cube: &SpectralCube,
    threshold: f64,
    validity: Option<&ValidityMask>,
) -> Result<LabelMask> {
    if cube.state() != CalibrationState::Reflectance {
        return Err(Error::InvalidInput(
            "prediction needs a reflectance cube".into(),
        ));
    }
    let scores = predict_cube_scores(model, cube)?;
    let mut mask = LabelMask::new(
        cube.height(),
        cube.width(),
        threshold_scores(&scores, threshold),
    )?;
    if let Some(v) = validity {
        mask.apply_validity(v)?;
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::model::{LinearKind, LinearModel};
    use crate::cube_io::WavelengthGrid;

    fn refl_cube(h: usize, w: usize, bands: usize) -> SpectralCube {
        let grid =
            WavelengthGrid::new((0..bands).map(|b| 700.0 + 10.0 * b as f64).collect()).unwrap();
        SpectralCube::from_fn(h, w, grid, CalibrationState::Reflectance, |b, r, c| {
            ((b * 7 + r * 3 + c * 5) % 11) as f32 / 10.0
        })
        .unwrap()
    }

    #[test]
    fn zero_models() {
        let x = Array2::<f32>::from_elem((5, 3), 0.4);
        let lr: Model = LinearModel::zeros(LinearKind::Logistic, 3).into();
        assert!(predict_scores(&lr, x.view())
            .unwrap()
            .iter()
            .all(|&s| s == 0.5));
        let svm: Model = LinearModel::zeros(LinearKind::Svm, 3).into();
        assert!(predict_scores(&svm, x.view())
            .unwrap()
            .iter()
            .all(|&s| s == 0.0));
        let mlp: Model = MlpModel::zeros(3).into();
        assert!(predict_scores(&mlp, x.view())
            .unwrap()
            .iter()
            .all(|&s| s == 0.5));
    }

    #[test]
    fn width_mismatch() {
        let x = Array2::<f32>::zeros((2, 4));
        let lr: Model = LinearModel::zeros(LinearKind::Logistic, 3).into();
        assert!(matches!(
            predict_scores(&lr, x.view()),
            Err(Error::Dimension(_))
        ));
        assert!(predict_mask(&lr, &refl_cube(2, 2, 4), 0.5, None).is_err());
    }

    #[test]
    fn zero_model_mask_tie_break() {
        let lr: Model = LinearModel::zeros(LinearKind::Logistic, 3).into();
        let cube = refl_cube(3, 4, 3);
        let mask = predict_mask(&lr, &cube, 0.5, None).unwrap();
        assert!(mask.labels().iter().all(|&l| l == 0));
        let mask = predict_mask(&lr, &cube, -1.0, None).unwrap();
        assert!(mask.labels().iter().all(|&l| l == 1));
        let svm: Model = LinearModel::zeros(LinearKind::Svm, 3).into();
        assert!(predict_mask(&svm, &cube, 0.0, None)
            .unwrap()
            .labels()
            .iter()
            .all(|&l| l == 0));
    }

    #[test]
    fn invalid_pixels_are_ignored() {
        let lr: Model = LinearModel::zeros(LinearKind::Logistic, 2).into();
        let cube = refl_cube(1, 3, 2);
        let v = ValidityMask::new(1, 3, vec![true, false, true]).unwrap();
        let mask = predict_mask(&lr, &cube, -1.0, Some(&v)).unwrap();
        assert_eq!(mask.labels(), &[1, 255, 1]);
    }

    #[test]
    fn raw_cube_rejected() {
        let grid = WavelengthGrid::new(vec![700.0]).unwrap();
        let raw = SpectralCube::new(1, 1, grid, CalibrationState::RawCounts, vec![3.0]).unwrap();
        let lr: Model = LinearModel::zeros(LinearKind::Logistic, 1).into();
        assert!(predict_mask(&lr, &raw, 0.5, None).is_err());
    }
}
