use gesture::mlp::{softmax, Gradients};
use gesture::*;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(dx: i32, dy: i32, jitter: i32, n: usize) -> Stroke {
    let samples = (0..n)
        .map(|k| {
            let w = if k % 2 == 0 { jitter } else { -jitter };
            FlowSample::new(dx + w * dy.signum(), dy + w * dx.signum(), 10 * (k as u64 + 1))
        })
        .collect();
    Stroke::new(samples).unwrap()
}

/// Rightward and upward strokes with varying wiggle.
fn separable() -> Vec<Stroke> {
    (0..20usize)
        .flat_map(|i| {
            let j = (i % 3) as i32;
            [line(6, 0, j, 8 + i % 5).with_label("right"), line(0, 6, j, 8 + i % 4).with_label("up")]
        })
        .collect()
}

fn batch_loss(net: &Mlp, xs: &[DVector<f64>], ys: &[usize]) -> f64 {
    xs.iter().zip(ys).map(|(x, &y)| net.loss(x, y)).sum::<f64>() / xs.len() as f64
}

fn batch_gradients(net: &Mlp, xs: &[DVector<f64>], ys: &[usize]) -> Gradients {
    let mut acc = net.gradients(&xs[0], ys[0]).1;
    for (x, &y) in xs.iter().zip(ys).skip(1) {
        let g = net.gradients(x, y).1;
        acc.w1 += g.w1;
        acc.b1 += g.b1;
        acc.w2 += g.w2;
        acc.b2 += g.b2;
    }
    let n = xs.len() as f64;
    Gradients {
        w1: acc.w1 / n,
        b1: acc.b1 / n,
        w2: acc.w2 / n,
        b2: acc.b2 / n,
    }
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let net = Mlp::random(FEATURE_DIM, 20, 6, &mut rng);
    let xs: Vec<DVector<f64>> = (0..8).map(|_| DVector::from_fn(FEATURE_DIM, |_, _| rng.random_range(-2.0..2.0))).collect();
    let ys: Vec<usize> = (0..8).map(|_| rng.random_range(0..6)).collect();
    let g = batch_gradients(&net, &xs, &ys);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for layer in 0..2 {
        for _ in 0..10 {
            let (mut plus, mut minus) = (net.clone(), net.clone());
            let analytic = if layer == 0 {
                let (r, c) = (rng.random_range(0..20), rng.random_range(0..FEATURE_DIM));
                plus.w1[(r, c)] += h;
                minus.w1[(r, c)] -= h;
                g.w1[(r, c)]
            } else {
                let (r, c) = (rng.random_range(0..6), rng.random_range(0..20));
                plus.w2[(r, c)] += h;
                minus.w2[(r, c)] -= h;
                g.w2[(r, c)]
            };
            let numeric = (batch_loss(&plus, &xs, &ys) - batch_loss(&minus, &xs, &ys)) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn separable_classes_reach_full_training_accuracy() {
    let mut cfg = TrainConfig::new(3, "dev");
    cfg.epochs = 200;
    let m = train(&separable(), &cfg).unwrap();
    assert_eq!(m.training.training_accuracy, 1.0);
    assert_eq!(m.hidden, 20);
    assert_eq!(m.classes, ["right", "up"]);
}

#[test]
fn training_is_bit_reproducible() {
    let mut cfg = TrainConfig::new(11, "dev");
    cfg.epochs = 50;
    let a = train(&separable(), &cfg).unwrap();
    let b = train(&separable(), &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
    cfg.seed = 12;
    assert_ne!(train(&separable(), &cfg).unwrap().network, a.network);
}

#[test]
fn training_samples_classify_as_their_own_label() {
    let data = separable();
    let m = train(&data, &TrainConfig::new(5, "dev")).unwrap();
    for s in &data {
        let c = classify(&m, s).unwrap();
        assert_eq!(Some(&c.label), s.label.as_ref());
        assert!((0.0..=1.0).contains(&c.confidence));
        assert!((c.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn zero_network_is_uniformly_unsure() {
    let corpus = synth_corpus(&builtin_templates(), &SynthConfig::new(4, 0.1, 2)).unwrap();
    let mut cfg = TrainConfig::new(1, "dev");
    cfg.epochs = 1;
    let mut m = train(&corpus, &cfg).unwrap();
    m.network = Mlp::zeros(FEATURE_DIM, 20, 6);
    let c = classify(&m, &corpus[7]).unwrap();
    assert!((c.confidence - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn softmax_is_normalized_over_wide_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let z = DVector::from_fn(6, |_, _| rng.random_range(-500.0..500.0));
        let p = softmax(&z);
        assert!((p.sum() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn training_needs_enough_data() {
    let data = separable();
    let one_class: Vec<Stroke> = data.iter().filter(|s| s.label.as_deref() == Some("up")).cloned().collect();
    assert!(matches!(train(&one_class, &TrainConfig::new(1, "d")), Err(GestureError::InsufficientData(_))));
    let few: Vec<Stroke> = data.iter().take(6).cloned().collect();
    assert!(matches!(train(&few, &TrainConfig::new(1, "d")), Err(GestureError::InsufficientData(_))));
}

#[test]
fn divergence_reports_the_epoch() {
    let mut cfg = TrainConfig::new(1, "dev");
    cfg.learning_rate = 1e300;
    match train(&separable(), &cfg) {
        Err(GestureError::NonFiniteLoss { epoch }) => assert!(epoch >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn models_are_tied_to_their_device() {
    let mut cfg = TrainConfig::new(2, "mouse-a");
    cfg.epochs = 20;
    let m = train(&separable(), &cfg).unwrap();
    let mut s = separable().remove(0);
    assert!(classify_on_device(&m, &s, Some("mouse-a")).is_ok());
    assert!(matches!(
        classify_on_device(&m, &s, Some("mouse-b")),
        Err(GestureError::DeviceMismatch { .. })
    ));
    s.device = Some("mouse-b".into());
    assert!(classify_on_device(&m, &s, None).is_err());
}

#[test]
fn wrong_feature_length_is_refused() {
    let mut cfg = TrainConfig::new(2, "dev");
    cfg.epochs = 5;
    let m = train(&separable(), &cfg).unwrap();
    assert!(matches!(
        m.classify_features(&[0.0; 10]),
        Err(GestureError::DimensionMismatch { expected: 32, got: 10 })
    ));
}

#[test]
fn model_file_round_trips() {
    let mut cfg = TrainConfig::new(4, "dev");
    cfg.epochs = 30;
    let m = train(&separable(), &cfg).unwrap();
    let text = m.to_json();
    let back = GestureModel::from_json(&text).unwrap();
    assert_eq!(back, m);
    assert_eq!(back.to_json(), text);

    let retagged = text.replace(MODEL_FORMAT, "some-other-model/9");
    assert!(matches!(GestureModel::from_json(&retagged), Err(GestureError::UnsupportedFormat(_))));
    assert!(GestureModel::from_json("{").is_err());
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn synthetic_classes_are_well_separated() {
    let corpus = synth_corpus(&builtin_templates(), &SynthConfig::new(20, 0.15, 7)).unwrap();
    let f: Vec<Vec<f64>> = corpus.iter().map(|s| featurize(s).unwrap()).collect();
    let (mut within, mut nw, mut between, mut nb) = (0.0, 0, 0.0, 0);
    for i in 0..f.len() {
        for j in i + 1..f.len() {
            let d = distance(&f[i], &f[j]);
            if corpus[i].label == corpus[j].label {
                within += d;
                nw += 1;
            } else {
                between += d;
                nb += 1;
            }
        }
    }
    let ratio = (between / nb as f64) / (within / nw as f64);
    assert!(ratio >= 3.0, "between/within = {ratio}");
}

#[test]
fn held_out_accuracy_on_a_small_corpus() {
    let start = std::time::Instant::now();
    let corpus = synth_corpus(&builtin_templates(), &SynthConfig::new(20, 0.15, 7)).unwrap();
    let r = evaluate(&corpus, &EvalConfig::new(7, "dev")).unwrap();
    assert_eq!(corpus.len(), 120);
    assert_eq!(r.splits.len(), 5);
    assert!(r.splits.iter().all(|s| s.train_size == 96 && s.test_size == 24));
    assert!(r.mean_accuracy >= 0.89, "mean accuracy {}", r.mean_accuracy);
    assert_eq!(r.per_user.len(), 4);
    let tested: usize = r.confusion.iter().flatten().sum();
    assert_eq!(tested, 5 * 24);
    assert!(start.elapsed().as_secs_f64() < 60.0);
}
