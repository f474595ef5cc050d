//! Training objectives over flat parameter vectors.
//!
//! Every model keeps its parameters in one contiguous `f64` slice so the
//! optimizer and finite-difference checks can treat all families alike.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};

/// A differentiable mean loss over a batch.
pub trait Objective {
    fn n_params(&self) -> usize;

    /// Mean loss over the batch; when `grad` is given it is overwritten with
    /// the gradient with respect to `params`.
    fn evaluate(
        &self,
        params: &[f64],
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        grad: Option<&mut [f64]>,
    ) -> f64;

    fn loss(&self, params: &[f64], x: ArrayView2<f64>, y: ArrayView1<f64>) -> f64 {
        self.evaluate(params, x, y, None)
    }
}

/// `log(1 + e^z) − y·z`, the binary cross-entropy of a logit.
#[inline]
pub(crate) fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parameters `[w_0 … w_{B−1}, b]`.
fn linear_scores(params: &[f64], x: ArrayView2<f64>) -> Array1<f64> {
    let b = x.ncols();
    let w = ArrayView1::from(&params[..b]);
    x.dot(&w) + params[b]
}

/// Logistic regression: mean binary cross-entropy plus `l2·‖w‖²/2`.
#[derive(Debug, Clone, Copy)]
pub struct LogisticObjective {
    pub n_features: usize,
    pub l2: f64,
}

impl Objective for LogisticObjective {
    fn n_params(&self) -> usize {
        self.n_features + 1
    }

    fn evaluate(
        &self,
        params: &[f64],
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let b = self.n_features;
        let n = x.nrows() as f64;
        let z = linear_scores(params, x);
        let w = &params[..b];
        let reg = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        let loss = z
            .iter()
            .zip(y)
            .map(|(&z, &y)| bce_with_logit(z, y))
            .sum::<f64>()
            / n
            + reg;
        if let Some(g) = grad {
            let dz: Array1<f64> = z
                .iter()
                .zip(y)
                .map(|(&z, &y)| (sigmoid(z) - y) / n)
                .collect();
            let gw = x.t().dot(&dz);
            for i in 0..b {
                g[i] = gw[i] + self.l2 * w[i];
            }
            g[b] = dz.sum();
        }
        loss
    }
}

/// Linear SVM in primal form: mean hinge loss `max(0, 1 − s·(w·x + b))` with
/// `s = 2y − 1`, plus `l2·‖w‖²/2`.
#[derive(Debug, Clone, Copy)]
pub struct HingeObjective {
    pub n_features: usize,
    pub l2: f64,
}

impl Objective for HingeObjective {
    fn n_params(&self) -> usize {
        self.n_features + 1
    }

    fn evaluate(
        &self,
        params: &[f64],
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let b = self.n_features;
        let n = x.nrows() as f64;
        let z = linear_scores(params, x);
        let w = &params[..b];
        let reg = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        let signs: Vec<f64> = y.iter().map(|&y| 2.0 * y - 1.0).collect();
        let loss = z
            .iter()
            .zip(&signs)
            .map(|(&z, &s)| (1.0 - s * z).max(0.0))
            .sum::<f64>()
            / n
            + reg;
        if let Some(g) = grad {
            // subgradient 0 at the hinge
            let dz: Array1<f64> = z
                .iter()
                .zip(&signs)
                .map(|(&z, &s)| if 1.0 - s * z > 0.0 { -s / n } else { 0.0 })
                .collect();
            let gw = x.t().dot(&dz);
            for i in 0..b {
                g[i] = gw[i] + self.l2 * w[i];
            }
            g[b] = dz.sum();
        }
        loss
    }
}

/// Feed-forward rectifier network with a single logistic output unit, trained
/// on mean binary cross-entropy plus `l2·Σ‖W‖²/2` (biases unregularized).
///
/// Parameter layout per layer: the `in×out` weight matrix row-major, then the
/// `out` biases.
#[derive(Debug, Clone)]
pub struct MlpObjective {
    pub widths: Vec<usize>,
    pub l2: f64,
}

/// Offsets of each layer's weights and biases in the flat parameter vector.
pub(crate) fn layer_offsets(widths: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(widths.len() - 1);
    let mut off = 0;
    for pair in widths.windows(2) {
        let w_off = off;
        off += pair[0] * pair[1];
        out.push((w_off, off));
        off += pair[1];
    }
    out
}

pub(crate) fn mlp_param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum()
}

impl MlpObjective {
    fn weight<'a>(&self, params: &'a [f64], layer: usize, w_off: usize) -> ArrayView2<'a, f64> {
        let (i, o) = (self.widths[layer], self.widths[layer + 1]);
        ArrayView2::from_shape((i, o), &params[w_off..w_off + i * o]).expect("layer shape")
    }

    /// Pre-activations of every layer for a batch; the last entry holds the logits.
    pub fn preactivations(&self, params: &[f64], x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let offsets = layer_offsets(&self.widths);
        let last = offsets.len() - 1;
        let mut zs: Vec<Array2<f64>> = Vec::with_capacity(offsets.len());
        let mut input: Array2<f64> = x.to_owned();
        for (l, &(w_off, b_off)) in offsets.iter().enumerate() {
            let w = self.weight(params, l, w_off);
            let b = ArrayView1::from(&params[b_off..b_off + self.widths[l + 1]]);
            let z = input.dot(&w) + b;
            if l < last {
                input = z.mapv(|v| v.max(0.0));
            }
            zs.push(z);
        }
        zs
    }
}

impl Objective for MlpObjective {
    fn n_params(&self) -> usize {
        mlp_param_count(&self.widths)
    }

    fn evaluate(
        &self,
        params: &[f64],
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let offsets = layer_offsets(&self.widths);
        let n = x.nrows() as f64;
        let zs = self.preactivations(params, x);
        let logits = zs.last().expect("at least one layer").column(0);
        let reg: f64 = offsets
            .iter()
            .map(|&(w_off, b_off)| params[w_off..b_off].iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            * 0.5
            * self.l2;
        let loss = logits
            .iter()
            .zip(y)
            .map(|(&z, &y)| bce_with_logit(z, y))
            .sum::<f64>()
            / n
            + reg;

        let Some(g) = grad else {
            return loss;
        };

        let mut delta: Array2<f64> =
            Array2::from_shape_fn((x.nrows(), 1), |(i, _)| (sigmoid(logits[i]) - y[i]) / n);
        for l in (0..offsets.len()).rev() {
            let (w_off, b_off) = offsets[l];
            let (fan_in, fan_out) = (self.widths[l], self.widths[l + 1]);
            let activations = if l == 0 {
                x.to_owned()
            } else {
                zs[l - 1].mapv(|v| v.max(0.0))
            };
            {
                let (gw_slice, rest) = g[w_off..].split_at_mut(fan_in * fan_out);
                let mut gw =
                    ArrayViewMut2::from_shape((fan_in, fan_out), gw_slice).expect("layer shape");
                general_mat_mul(1.0, &activations.t(), &delta, 0.0, &mut gw);
                if self.l2 != 0.0 {
                    let w = ArrayView2::from_shape((fan_in, fan_out), &params[w_off..b_off])
                        .expect("layer shape");
                    gw.scaled_add(self.l2, &w);
                }
                let mut gb = ArrayViewMut1::from(&mut rest[..fan_out]);
                gb.assign(&delta.sum_axis(Axis(0)));
            }
            if l > 0 {
                let w = self.weight(params, l, w_off);
                let mut prev = delta.dot(&w.t());
                prev.zip_mut_with(&zs[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = prev;
            }
        }
        loss
    }
}
