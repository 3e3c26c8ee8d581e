use affectplay::emotionml::AVPoint;
use affectplay::face::{
    pose_variation, train_model, FaceError, FaceFeatureFrame, FacePredictor, LinearAVModel, LinearOutput, FEATURE_DIM,
    POSE_SLOT, SMOOTHING_ALPHA,
};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Row = [f64; FEATURE_DIM];

fn random_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Row> {
    (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect()
}

/// Ridge objective with an unpenalized bias, summed over both outputs.
fn objective(x: &[Row], y: &[[f64; 2]], lambda: f64, params: &[f64]) -> f64 {
    let mut total = 0.0;
    for out in 0..2 {
        let p = &params[out * (FEATURE_DIM + 1)..(out + 1) * (FEATURE_DIM + 1)];
        let (w, b) = (&p[..FEATURE_DIM], p[FEATURE_DIM]);
        for (row, t) in x.iter().zip(y) {
            let r = row.iter().zip(w).map(|(a, c)| a * c).sum::<f64>() + b - t[out];
            total += r * r;
        }
        total += lambda * w.iter().map(|c| c * c).sum::<f64>();
    }
    total
}

fn flatten(m: &LinearAVModel) -> Vec<f64> {
    let mut v = m.valence.weights.clone();
    v.push(m.valence.bias);
    v.extend(&m.arousal.weights);
    v.push(m.arousal.bias);
    v
}

#[allow(clippy::needless_range_loop)]
/// Normal equations of the augmented system `[X 1]` solved by Gauss-Jordan
/// elimination with partial pivoting; the bias row/column is unpenalized.
fn normal_equations(x: &[Row], t: &[f64], lambda: f64) -> Vec<f64> {
    let m = FEATURE_DIM + 1;
    let aug = |row: &Row, j: usize| if j < FEATURE_DIM { row[j] } else { 1.0 };
    let mut a = vec![vec![0.0; m + 1]; m];
    for i in 0..m {
        for j in 0..m {
            a[i][j] = x.iter().map(|r| aug(r, i) * aug(r, j)).sum();
        }
        if i < FEATURE_DIM {
            a[i][i] += lambda;
        }
        a[i][m] = x.iter().zip(t).map(|(r, y)| aug(r, i) * y).sum();
    }
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        let pivot = a[c][c];
        for v in a[c].iter_mut() {
            *v /= pivot;
        }
        for r in 0..m {
            if r != c {
                let f = a[r][c];
                let row_c = a[c].clone();
                for (v, pc) in a[r].iter_mut().zip(row_c) {
                    *v -= f * pc;
                }
            }
        }
    }
    a.iter().map(|r| r[m]).collect()
}

#[test]
fn recovers_planted_linear_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_rows(&mut rng, 120);
    let w: [Row; 2] = [0; 2].map(|_| std::array::from_fn(|_| rng.random_range(-0.5..0.5)));
    let b = [0.1, -0.3];
    let y: Vec<[f64; 2]> = x
        .iter()
        .map(|r| [0, 1].map(|o| r.iter().zip(&w[o]).map(|(a, c)| a * c).sum::<f64>() + b[o]))
        .collect();
    let m = train_model(&x, &y, 0.0).unwrap();
    for (out, fitted) in [&m.valence, &m.arousal].into_iter().enumerate() {
        for (a, c) in fitted.weights.iter().zip(&w[out]) {
            assert!((a - c).abs() < 1e-6);
        }
        assert!((fitted.bias - b[out]).abs() < 1e-6);
    }
}

#[test]
fn matches_normal_equations_with_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_rows(&mut rng, 80);
    let y: Vec<[f64; 2]> = (0..80).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
    let m = train_model(&x, &y, 0.7).unwrap();
    for (out, fitted) in [&m.valence, &m.arousal].into_iter().enumerate() {
        let t: Vec<f64> = y.iter().map(|r| r[out]).collect();
        let oracle = normal_equations(&x, &t, 0.7);
        for (a, c) in fitted.weights.iter().chain([&fitted.bias]).zip(&oracle) {
            assert!((a - c).abs() < 1e-9, "{a} vs {c}");
        }
    }
}

#[test]
fn zero_features_give_mean_bias() {
    let x = vec![[0.0; FEATURE_DIM]; 10];
    let y: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 / 10.0, -(i as f64) / 20.0]).collect();
    let m = train_model(&x, &y, 1.0).unwrap();
    assert!(m.valence.weights.iter().chain(&m.arousal.weights).all(|&w| w == 0.0));
    assert!((m.valence.bias - 0.45).abs() < 1e-12);
    assert!((m.arousal.bias + 0.225).abs() < 1e-12);
}

#[test]
fn huge_penalty_shrinks_to_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_rows(&mut rng, 60);
    let y: Vec<[f64; 2]> = x.iter().map(|r| [r[0].clamp(-1.0, 1.0), 0.5 * r[1]]).collect();
    let m = train_model(&x, &y, 1e9).unwrap();
    let mean = |o: usize| y.iter().map(|r| r[o]).sum::<f64>() / y.len() as f64;
    assert!(m.valence.weights.iter().chain(&m.arousal.weights).all(|w| w.abs() < 1e-3));
    assert!((m.valence.bias - mean(0)).abs() < 1e-3);
    assert!((m.arousal.bias - mean(1)).abs() < 1e-3);
}

#[test]
fn degenerate_without_penalty() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let few = random_rows(&mut rng, 20);
    let y = vec![[0.0, 0.0]; 20];
    assert!(matches!(train_model(&few, &y, 0.0), Err(FaceError::DegenerateSystem)));
    assert!(train_model(&few, &y, 0.5).is_ok());
    assert!(matches!(train_model(&[], &[], 1.0), Err(FaceError::DimensionMismatch(_))));
}

fn noisy_problem(seed: u64) -> (Vec<Row>, Vec<[f64; 2]>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_rows(&mut rng, 100);
    let y = x
        .iter()
        .map(|r| [(0.3 * r[0] - 0.2 * r[5] + rng.random_range(-0.2..0.2)).clamp(-1.0, 1.0), rng.random_range(-1.0..1.0)])
        .collect();
    (x, y)
}

#[test]
fn gradient_vanishes_at_solution() {
    let (x, y) = noisy_problem(5);
    let lambda = 1.0;
    let m = train_model(&x, &y, lambda).unwrap();
    let p = flatten(&m);
    let h = 1e-6;
    let mut grad_sq = 0.0;
    for k in 0..p.len() {
        let (mut up, mut down) = (p.clone(), p.clone());
        up[k] += h;
        down[k] -= h;
        let g = (objective(&x, &y, lambda, &up) - objective(&x, &y, lambda, &down)) / (2.0 * h);
        grad_sq += g * g;
    }
    let y_norm = y.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    assert!(grad_sq.sqrt() <= 1e-6 * (1.0 + y_norm), "gradient norm {}", grad_sq.sqrt());
}

#[test]
fn random_perturbations_never_improve() {
    let (x, y) = noisy_problem(6);
    let m = train_model(&x, &y, 1.0).unwrap();
    let p = flatten(&m);
    let best = objective(&x, &y, 1.0, &p);
    let mut rng = ChaCha8Rng::seed_from_u64(60);
    for _ in 0..1000 {
        let dir: Vec<f64> = p.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        let q: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + 1e-3 * d / norm).collect();
        assert!(objective(&x, &y, 1.0, &q) >= best);
    }
}

fn frame(features: Row) -> FaceFeatureFrame {
    FaceFeatureFrame::new(0.0, features)
}

#[test]
fn prediction_is_affine_inside_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let small = |rng: &mut ChaCha8Rng| LinearOutput {
        weights: (0..FEATURE_DIM).map(|_| rng.random_range(-0.01..0.01)).collect(),
        bias: rng.random_range(-0.2..0.2),
    };
    let model = LinearAVModel { valence: small(&mut rng), arousal: small(&mut rng), lambda: 1.0 };
    let once = |x: Row| FacePredictor::new(&model).predict(&frame(x)).unwrap();
    for _ in 0..100 {
        let a: Row = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let b: Row = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let sum: Row = std::array::from_fn(|k| a[k] + b[k]);
        let (pa, pb, p0, ps) = (once(a), once(b), once([0.0; FEATURE_DIM]), once(sum));
        assert!((pa.arousal + pb.arousal - p0.arousal - ps.arousal).abs() < 1e-9);
        assert!((pa.valence + pb.valence - p0.valence - ps.valence).abs() < 1e-9);
    }
}

fn constant_model(valence: f64, arousal: f64) -> LinearAVModel {
    LinearAVModel {
        valence: LinearOutput { weights: vec![0.0; FEATURE_DIM], bias: valence },
        arousal: LinearOutput { weights: vec![0.0; FEATURE_DIM], bias: arousal },
        lambda: 0.0,
    }
}

#[test]
fn clamp_and_smoothing_examples() {
    let zero = constant_model(0.0, 0.0);
    assert_eq!(FacePredictor::new(&zero).predict(&frame([0.0; FEATURE_DIM])).unwrap(), AVPoint::NEUTRAL);

    let over = constant_model(1.7, -0.2);
    let p = FacePredictor::new(&over).predict(&frame([0.0; FEATURE_DIM])).unwrap();
    assert_eq!((p.valence, p.arousal), (1.0, -0.2));

    // raw (1, 1) then (0, 0): slot 0 carries the signal through unit weights
    let mut unit = constant_model(0.0, 0.0);
    unit.valence.weights[0] = 1.0;
    unit.arousal.weights[0] = 1.0;
    let mut pred = FacePredictor::new(&unit);
    let mut x = [0.0; FEATURE_DIM];
    x[0] = 1.0;
    assert_eq!(pred.predict(&frame(x)).unwrap(), AVPoint::new(1.0, 1.0));
    let second = pred.predict(&frame([0.0; FEATURE_DIM])).unwrap();
    assert_eq!((second.valence, second.arousal), (0.7, 0.7));
}

proptest! {
    #[test]
    fn smoothing_is_a_contraction(raws in prop::collection::vec(-3.0..3.0f64, 2..40)) {
        let mut unit = constant_model(0.0, 0.0);
        unit.valence.weights[0] = 1.0;
        unit.arousal.weights[0] = -1.0;
        let mut pred = FacePredictor::new(&unit);
        let mut prev: Option<AVPoint> = None;
        for r in raws {
            let mut x = [0.0; FEATURE_DIM];
            x[0] = r;
            let out = pred.predict(&frame(x)).unwrap();
            prop_assert!(out.is_valid());
            if let Some(p) = prev {
                let target = r.clamp(-1.0, 1.0);
                prop_assert!((out.valence - p.valence).abs() <= SMOOTHING_ALPHA * (target - p.valence).abs() + 1e-12);
            }
            prev = Some(out);
        }
    }
}

#[test]
fn pose_variation_alternating_yaw() {
    let a = 0.3;
    let frames: Vec<FaceFeatureFrame> = (0..30)
        .map(|i| {
            let mut f = [0.0; FEATURE_DIM];
            f[POSE_SLOT] = if i % 2 == 0 { a } else { -a };
            FaceFeatureFrame::new(i as f64 * 33.0, f)
        })
        .collect();
    let std = pose_variation(&frames).unwrap();
    // population estimator: mean 0, every squared deviation a²
    assert!((std[0] - a).abs() < 1e-15);
    assert_eq!((std[1], std[2]), (0.0, 0.0));
}

#[test]
fn model_file_round_trip() {
    let (x, y) = noisy_problem(8);
    let m = train_model(&x, &y, 1.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("face.model");
    m.save(&path).unwrap();
    assert_eq!(LinearAVModel::load(&path).unwrap(), m);
}
