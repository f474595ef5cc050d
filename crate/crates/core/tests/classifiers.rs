use hyperplastic::classify::{
    dataset_loss, fit, init_mlp_params, predict_mask, predict_scores, threshold_scores,
    train_logistic, train_mlp, train_svm, Dataset, HingeObjective, LinearKind, LinearModel,
    LogisticObjective, MlpModel, MlpObjective, Model, Objective, TrainConfig,
};
use hyperplastic::cube_io::{
    flatten_pixels, CalibrationState, LabelMask, SpectralCube, WavelengthGrid,
};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-4;
/// Gradient components smaller than this are compared absolutely.
const FD_FLOOR: f64 = 1e-6;
const KINK_MARGIN: f64 = 1e-4;

fn single_worker<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(f)
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, b: usize) -> (Array2<f64>, Array1<f64>) {
    let x = Array2::from_shape_fn((n, b), |_| rng.random_range(0.0..1.0));
    let y = Array1::from_shape_fn(n, |_| f64::from(rng.random_range(0..2u8)));
    (x, y)
}

/// Worst relative disagreement between the analytic gradient and central
/// differences over every parameter.
fn gradient_error<O: Objective>(obj: &O, params: &[f64], x: &Array2<f64>, y: &Array1<f64>) -> f64 {
    let mut grad = vec![0.0; params.len()];
    obj.evaluate(params, x.view(), y.view(), Some(&mut grad));
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + FD_STEP;
        let up = obj.loss(&p, x.view(), y.view());
        p[i] = orig - FD_STEP;
        let down = obj.loss(&p, x.view(), y.view());
        p[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let scale = grad[i].abs().max(numeric.abs()).max(FD_FLOOR);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    worst
}

fn linear_margins(params: &[f64], x: &Array2<f64>) -> Vec<f64> {
    let b = params.len() - 1;
    x.rows()
        .into_iter()
        .map(|r| r.iter().zip(&params[..b]).map(|(a, w)| a * w).sum::<f64>() + params[b])
        .collect()
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for point in 0..25 {
        let b = 1 + point % 12;
        let obj = LogisticObjective {
            n_features: b,
            l2: if point % 2 == 0 { 0.0 } else { 0.01 },
        };
        let (x, y) = random_batch(&mut rng, 5, b);
        let params: Vec<f64> = (0..=b).map(|_| rng.random_range(-2.0..2.0)).collect();
        let err = gradient_error(&obj, &params, &x, &y);
        assert!(err < FD_TOLERANCE, "point {point}: relative error {err}");
    }
}

#[test]
fn hinge_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 25 {
        let b = 1 + checked % 12;
        let obj = HingeObjective {
            n_features: b,
            l2: 1e-4,
        };
        let (x, y) = random_batch(&mut rng, 5, b);
        let params: Vec<f64> = (0..=b).map(|_| rng.random_range(-2.0..2.0)).collect();
        let near_hinge = linear_margins(&params, &x)
            .iter()
            .zip(&y)
            .any(|(z, &y)| (1.0 - (2.0 * y - 1.0) * z).abs() < KINK_MARGIN);
        if near_hinge {
            continue;
        }
        let err = gradient_error(&obj, &params, &x, &y);
        assert!(err < FD_TOLERANCE, "point {checked}: relative error {err}");
        checked += 1;
    }
}

#[test]
fn mlp_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let bands = 33;
    let widths = MlpModel::widths_for(bands);
    assert_eq!(widths, vec![33, 100, 50, 25, 1]);
    let mut checked = 0;
    while checked < 20 {
        let obj = MlpObjective {
            widths: widths.clone(),
            l2: if checked % 2 == 0 { 0.0 } else { 1e-3 },
        };
        let (x, y) = random_batch(&mut rng, 5, bands);
        let mut params = init_mlp_params(&widths, &mut rng);
        // random biases so units sit on both sides of the rectifier
        for v in params.iter_mut() {
            if *v == 0.0 {
                *v = rng.random_range(-0.3..0.3);
            }
        }
        let zs = obj.preactivations(&params, x.view());
        let near_kink = zs[..zs.len() - 1]
            .iter()
            .any(|z| z.iter().any(|v| v.abs() < KINK_MARGIN));
        if near_kink {
            continue;
        }
        let err = gradient_error(&obj, &params, &x, &y);
        assert!(err < FD_TOLERANCE, "point {checked}: relative error {err}");
        checked += 1;
    }
}

/// Reports a gradient 1% too large.
struct Skewed(LogisticObjective);

impl Objective for Skewed {
    fn n_params(&self) -> usize {
        self.0.n_params()
    }

    fn evaluate(
        &self,
        p: &[f64],
        x: ndarray::ArrayView2<f64>,
        y: ndarray::ArrayView1<f64>,
        grad: Option<&mut [f64]>,
    ) -> f64 {
        let has_grad = grad.is_some();
        let mut g = vec![0.0; p.len()];
        let loss = self
            .0
            .evaluate(p, x, y, if has_grad { Some(&mut g) } else { None });
        if let Some(out) = grad {
            for (o, v) in out.iter_mut().zip(g) {
                *o = 1.01 * v;
            }
        }
        loss
    }
}

#[test]
fn oracle_catches_a_wrong_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let (x, y) = random_batch(&mut rng, 5, 3);
    let params = [0.3, -0.7, 1.1, 0.2];
    let err = gradient_error(
        &Skewed(LogisticObjective {
            n_features: 3,
            l2: 0.0,
        }),
        &params,
        &x,
        &y,
    );
    assert!(err > FD_TOLERANCE, "{err}");
}

/// Four tight clusters at the corners of a square, opposite corners sharing a class.
fn xor_data(seed: u64, per_cluster: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (cx, cy, label) in [
        (1.0, 1.0, 1),
        (-1.0, -1.0, 1),
        (1.0, -1.0, 0),
        (-1.0, 1.0, 0),
    ] {
        for _ in 0..per_cluster {
            rows.push(vec![
                cx + rng.random_range(-0.15f32..0.15),
                cy + rng.random_range(-0.15f32..0.15),
            ]);
            labels.push(label);
        }
    }
    Dataset::from_rows(&rows, labels).unwrap()
}

fn accuracy(model: &Model, data: &Dataset) -> f64 {
    let scores = predict_scores(model, data.features().view()).unwrap();
    let pred = threshold_scores(&scores, model.default_threshold());
    let hits = pred
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| p == l)
        .count();
    hits as f64 / data.len() as f64
}

#[test]
fn mlp_learns_xor_that_linear_models_cannot() {
    for seed in 0..5 {
        let data = xor_data(seed, 100);
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 32,
            seed,
            ..TrainConfig::default()
        };
        let mlp: Model = train_mlp(&data, &cfg).unwrap().into();
        let lr: Model = train_logistic(&data, &cfg).unwrap().into();
        let (a_mlp, a_lr) = (accuracy(&mlp, &data), accuracy(&lr, &data));
        assert!(a_mlp >= 0.95, "seed {seed}: mlp accuracy {a_mlp}");
        assert!(a_lr <= 0.75, "seed {seed}: logistic accuracy {a_lr}");
    }
}

#[test]
fn training_is_deterministic() {
    let data = xor_data(3, 40);
    let cfg = TrainConfig {
        epochs: 5,
        batch_size: 16,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        single_worker(|| {
            (
                train_mlp(&data, &cfg).unwrap(),
                train_logistic(&data, &cfg).unwrap(),
                train_svm(&data, &cfg).unwrap(),
            )
        })
    };
    let (a, b) = (run(), run());
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.0.params()), bits(b.0.params()));
    assert_eq!(bits(&a.1.weights), bits(&b.1.weights));
    assert_eq!(bits(&a.2.weights), bits(&b.2.weights));
    assert_eq!(a.2.bias.to_bits(), b.2.bias.to_bits());
}

fn two_class_dataset() -> impl Strategy<Value = Dataset> {
    (4usize..40, 1usize..5).prop_flat_map(|(n, b)| {
        (
            proptest::collection::vec(proptest::collection::vec(-1.0f32..1.0, b), n),
            proptest::collection::vec(0u8..2, n - 2),
        )
            .prop_map(|(rows, mut labels)| {
                labels.extend([0, 1]);
                Dataset::from_rows(&rows, labels).unwrap()
            })
    })
}

fn full_batch(n: usize, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: n,
        learning_rate: 1e-2,
        ..TrainConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn full_batch_training_lowers_convex_losses(data in two_class_dataset()) {
        let cfg = full_batch(data.len(), 20);
        let b = data.n_features();
        let lr_obj = LogisticObjective { n_features: b, l2: 0.0 };
        let svm_obj = HingeObjective { n_features: b, l2: 1e-4 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut p = vec![0.0; b + 1];
        let h = fit(&lr_obj, &mut p, &data, None, &cfg, &mut rng).unwrap();
        prop_assert!(dataset_loss(&lr_obj, &p, &data) < h.initial_loss);
        let mut p = vec![0.0; b + 1];
        let h = fit(&svm_obj, &mut p, &data, None, &cfg, &mut rng).unwrap();
        prop_assert!(dataset_loss(&svm_obj, &p, &data) < h.initial_loss);
    }

    #[test]
    fn full_batch_gradient_ignores_row_order(data in two_class_dataset(), seed in any::<u64>()) {
        let b = data.n_features();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let shuffled = data.select(&order);
        let as_f64 = |d: &Dataset| {
            (
                d.features().mapv(f64::from),
                Array1::from_iter(d.labels().iter().map(|&l| f64::from(l))),
            )
        };
        let (x1, y1) = as_f64(&data);
        let (x2, y2) = as_f64(&shuffled);
        let widths = vec![b, 6, 4, 1];
        let mlp = MlpObjective { widths: widths.clone(), l2: 0.0 };
        let mlp_params = init_mlp_params(&widths, &mut rng);
        let lin_params: Vec<f64> = (0..=b).map(|_| rng.random_range(-1.0..1.0)).collect();
        let objectives: [(&dyn Objective, &[f64]); 3] = [
            (&LogisticObjective { n_features: b, l2: 0.1 }, &lin_params),
            (&HingeObjective { n_features: b, l2: 0.1 }, &lin_params),
            (&mlp, &mlp_params),
        ];
        for (obj, params) in objectives {
            let mut g1 = vec![0.0; params.len()];
            let mut g2 = vec![0.0; params.len()];
            let l1 = obj.evaluate(params, x1.view(), y1.view(), Some(&mut g1));
            let l2 = obj.evaluate(params, x2.view(), y2.view(), Some(&mut g2));
            prop_assert!((l1 - l2).abs() <= 1e-12 * l1.abs().max(1.0));
            for (a, c) in g1.iter().zip(&g2) {
                prop_assert!((a - c).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}

#[test]
fn duplicated_rows_train_like_the_original() {
    let rows = vec![
        vec![0.1f32, 0.3],
        vec![0.9, 0.2],
        vec![0.4, 0.8],
        vec![0.7, 0.6],
    ];
    let labels = vec![0, 1, 0, 1];
    let once = Dataset::from_rows(&rows, labels.clone()).unwrap();
    let twice_rows: Vec<Vec<f32>> = rows.iter().flat_map(|r| [r.clone(), r.clone()]).collect();
    let twice_labels: Vec<u8> = labels.iter().flat_map(|&l| [l, l]).collect();
    let twice = Dataset::from_rows(&twice_rows, twice_labels).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        batch_size: 1024,
        ..TrainConfig::default()
    };
    let a = train_logistic(&once, &cfg).unwrap();
    let b = train_logistic(&twice, &cfg).unwrap();
    // equal up to summation order
    for (x, y) in a
        .weights
        .iter()
        .chain([&a.bias])
        .zip(b.weights.iter().chain([&b.bias]))
    {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn svm_separates_and_ignores_feature_scale() {
    let data = Dataset::from_rows(&[vec![0.1], vec![0.9]], vec![0, 1]).unwrap();
    let cfg = TrainConfig {
        epochs: 2000,
        l2: Some(0.0),
        ..TrainConfig::default()
    };
    let m = train_svm(&data, &cfg).unwrap();
    assert!(m.decision(&[0.1]) < 0.0 && m.decision(&[0.9]) > 0.0);
    let scaled = train_svm(&data.scaled(2.0), &cfg).unwrap();
    assert!(scaled.decision(&[0.2]) < 0.0 && scaled.decision(&[1.8]) > 0.0);
}

#[test]
fn zero_models_score_neutrally() {
    let x = Array2::from_shape_fn((6, 4), |(i, j)| (i * 4 + j) as f32 / 24.0);
    let lr: Model = LinearModel::zeros(LinearKind::Logistic, 4).into();
    let svm: Model = LinearModel::zeros(LinearKind::Svm, 4).into();
    let mlp: Model = MlpModel::zeros(4).into();
    assert!(predict_scores(&lr, x.view())
        .unwrap()
        .iter()
        .all(|&s| s == 0.5));
    assert!(predict_scores(&svm, x.view())
        .unwrap()
        .iter()
        .all(|&s| s == 0.0));
    assert!(predict_scores(&mlp, x.view())
        .unwrap()
        .iter()
        .all(|&s| s == 0.5));
    // strict inequality: a tie is class 0
    assert!(threshold_scores(&[0.5, 0.5000001], 0.5) == vec![0, 1]);
}

fn random_mlp(bands: usize, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_mlp_params(&MlpModel::widths_for(bands), &mut rng);
    params
        .iter_mut()
        .filter(|v| **v == 0.0)
        .for_each(|v| *v = rng.random_range(-0.2..0.2));
    MlpModel::from_params(bands, params).unwrap().into()
}

#[test]
fn batch_and_row_scores_agree() {
    let bands = 33;
    let model = random_mlp(bands, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // spans several inference chunks
    let n = 9000;
    let x = Array2::from_shape_fn((n, bands), |_| rng.random_range(0.0f32..1.0));
    let batch = predict_scores(&model, x.view()).unwrap();
    for i in (0..n).step_by(7) {
        let row = x.slice(ndarray::s![i..i + 1, ..]);
        let single = predict_scores(&model, row).unwrap()[0];
        assert!(
            (single - batch[i]).abs() < 1e-6,
            "row {i}: {single} vs {}",
            batch[i]
        );
    }
}

#[test]
fn mask_agrees_with_flattened_scores() {
    let (h, w, bands) = (13, 17, 6);
    let grid = WavelengthGrid::new((0..bands).map(|b| 700.0 + 50.0 * b as f64).collect()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let data = (0..h * w * bands)
        .map(|_| rng.random_range(0.0f32..=1.0))
        .collect();
    let cube = SpectralCube::new(h, w, grid, CalibrationState::Reflectance, data).unwrap();
    let model = random_mlp(bands, 9);
    let everything = LabelMask::filled(h, w, 0).unwrap();
    let (x, _) = flatten_pixels(&cube, &everything).unwrap();
    let expected = threshold_scores(&predict_scores(&model, x.view()).unwrap(), 0.5);
    let mask = predict_mask(&model, &cube, 0.5, None).unwrap();
    assert_eq!(mask.labels(), expected.as_slice());
    let all_on = predict_mask(&model, &cube, -1.0, None).unwrap();
    assert!(all_on.labels().iter().all(|&l| l == 1));
}
