//! Per-device gesture models: training, classification, model files and
//! split evaluation.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{featurize, FEATURE_DIM};
use crate::mlp::Mlp;
use crate::stroke::Stroke;
use crate::{GestureError, GestureResult};

pub const MODEL_FORMAT: &str = "shellforge-gesture-model/1";
pub const DEFAULT_HIDDEN: usize = 20;
pub const DEFAULT_EPOCHS: usize = 500;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const MIN_SAMPLES_PER_CLASS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden width; `None` keeps the standard 20 units.
    #[serde(default)]
    pub hidden: Option<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub device_id: String,
}

impl TrainConfig {
    pub fn new(seed: u64, device_id: impl Into<String>) -> Self {
        Self {
            hidden: None,
            epochs: DEFAULT_EPOCHS,
            learning_rate: DEFAULT_LEARNING_RATE,
            seed,
            device_id: device_id.into(),
        }
    }

    pub fn hidden_width(&self) -> usize {
        self.hidden.unwrap_or(DEFAULT_HIDDEN)
    }

    fn check(&self) -> GestureResult<()> {
        if self.hidden_width() == 0 {
            return Err(GestureError::InvalidConfig("hidden width must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(GestureError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(GestureError::InvalidConfig(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Per-feature standardization applied before the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    /// Divisor per feature; 1 where the training data does not vary.
    pub scale: Vec<f64>,
}

impl Normalization {
    fn fit(xs: &[Vec<f64>]) -> Self {
        let d = xs[0].len();
        let n = xs.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
        let scale = (0..d)
            .map(|j| {
                let var = xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
                let s = var.sqrt();
                if s > 1e-9 {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub device_id: String,
    pub samples: usize,
    pub final_loss: f64,
    pub training_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GestureModel {
    pub format: String,
    pub classes: Vec<String>,
    pub input_dim: usize,
    pub hidden: usize,
    pub normalization: Normalization,
    pub network: Mlp,
    pub training: TrainingInfo,
}

impl GestureModel {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> GestureResult<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let format = v.get("format").and_then(|f| f.as_str()).unwrap_or("");
        if format != MODEL_FORMAT {
            return Err(GestureError::UnsupportedFormat(format.to_string()));
        }
        let m: GestureModel = serde_json::from_value(v)?;
        let net = &m.network;
        if net.inputs() != m.input_dim || net.hidden() != m.hidden || net.outputs() != m.classes.len() {
            return Err(GestureError::InvalidConfig(format!(
                "network {}-{}-{} does not match {} inputs, {} hidden, {} classes",
                net.inputs(),
                net.hidden(),
                net.outputs(),
                m.input_dim,
                m.hidden,
                m.classes.len()
            )));
        }
        if m.normalization.mean.len() != m.input_dim || m.normalization.scale.len() != m.input_dim {
            return Err(GestureError::DimensionMismatch {
                expected: m.input_dim,
                got: m.normalization.mean.len(),
            });
        }
        Ok(m)
    }

    pub fn probabilities(&self, features: &[f64]) -> GestureResult<DVector<f64>> {
        if features.len() != self.input_dim {
            return Err(GestureError::DimensionMismatch {
                expected: self.input_dim,
                got: features.len(),
            });
        }
        Ok(self.network.predict(&self.normalization.apply(features)))
    }

    pub fn classify_features(&self, features: &[f64]) -> GestureResult<Classification> {
        let p = self.probabilities(features)?;
        // first maximum wins ties
        let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
        Ok(Classification {
            label: self.classes[best].clone(),
            confidence: p[best],
            probabilities: p.iter().copied().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: String,
    /// Probability of the winning class.
    pub confidence: f64,
    /// Per class, in model order.
    pub probabilities: Vec<f64>,
}

/// Trains a model with per-sample gradient descent, visiting the samples in
/// a seeded shuffled order each epoch.
pub fn train(data: &[Stroke], config: &TrainConfig) -> GestureResult<GestureModel> {
    config.check()?;
    let (classes, xs, ys) = labelled_features(data)?;
    let norm = Normalization::fit(&xs);
    let inputs: Vec<DVector<f64>> = xs.iter().map(|x| norm.apply(x)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = Mlp::random(FEATURE_DIM, config.hidden_width(), classes.len(), &mut rng);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut final_loss = f64::NAN;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (loss, g) = net.gradients(&inputs[i], ys[i]);
            total += loss;
            net.step(&g, config.learning_rate);
        }
        final_loss = total / inputs.len() as f64;
        if !final_loss.is_finite() || !net.is_finite() {
            return Err(GestureError::NonFiniteLoss { epoch: epoch + 1 });
        }
    }
    let correct = inputs
        .iter()
        .zip(&ys)
        .filter(|(x, &y)| {
            let p = net.predict(x);
            (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b }) == y
        })
        .count();
    Ok(GestureModel {
        format: MODEL_FORMAT.into(),
        input_dim: FEATURE_DIM,
        hidden: config.hidden_width(),
        classes,
        normalization: norm,
        network: net,
        training: TrainingInfo {
            seed: config.seed,
            epochs: config.epochs,
            learning_rate: config.learning_rate,
            device_id: config.device_id.clone(),
            samples: inputs.len(),
            final_loss,
            training_accuracy: correct as f64 / inputs.len() as f64,
        },
    })
}

type Labelled = (Vec<String>, Vec<Vec<f64>>, Vec<usize>);

fn labelled_features(data: &[Stroke]) -> GestureResult<Labelled> {
    let mut labels = Vec::with_capacity(data.len());
    for (i, s) in data.iter().enumerate() {
        match &s.label {
            Some(l) => labels.push(l.as_str()),
            None => return Err(GestureError::InsufficientData(format!("stroke {i} has no label"))),
        }
    }
    let classes: Vec<String> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().map(String::from).collect();
    if classes.len() < 2 {
        return Err(GestureError::InsufficientData(format!("{} class(es), need at least 2", classes.len())));
    }
    for c in &classes {
        let n = labels.iter().filter(|l| **l == c.as_str()).count();
        if n < MIN_SAMPLES_PER_CLASS {
            return Err(GestureError::InsufficientData(format!(
                "class {c:?} has {n} samples, need at least {MIN_SAMPLES_PER_CLASS}"
            )));
        }
    }
    let xs = data.iter().map(featurize).collect::<GestureResult<Vec<_>>>()?;
    let ys = labels.iter().map(|l| classes.iter().position(|c| c == l).expect("label listed")).collect();
    Ok((classes, xs, ys))
}

pub fn classify(model: &GestureModel, stroke: &Stroke) -> GestureResult<Classification> {
    model.classify_features(&featurize(stroke)?)
}

/// Like [`classify`], but refuses strokes from another sensor. `device`
/// overrides the stroke's own device tag.
pub fn classify_on_device(model: &GestureModel, stroke: &Stroke, device: Option<&str>) -> GestureResult<Classification> {
    if let Some(d) = device.or(stroke.device.as_deref()) {
        if d != model.training.device_id {
            return Err(GestureError::DeviceMismatch {
                model: model.training.device_id.clone(),
                stream: d.to_string(),
            });
        }
    }
    classify(model, stroke)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub splits: usize,
    /// Share of each class used for training.
    pub train_fraction: f64,
    /// Seeds the split shuffles.
    pub seed: u64,
    pub train: TrainConfig,
}

impl EvalConfig {
    pub fn new(seed: u64, device_id: impl Into<String>) -> Self {
        Self {
            splits: 5,
            train_fraction: 0.8,
            seed,
            train: TrainConfig::new(seed, device_id),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub train_size: usize,
    pub test_size: usize,
    pub training_accuracy: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub splits: Vec<SplitResult>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub min_accuracy: f64,
    pub max_accuracy: f64,
    /// Held-out accuracy per user, pooled over splits.
    pub per_user: BTreeMap<String, f64>,
    /// `confusion[true][predicted]`, pooled over splits.
    pub confusion: Vec<Vec<usize>>,
}

/// Repeated stratified train/test splits.
pub fn evaluate(data: &[Stroke], config: &EvalConfig) -> GestureResult<EvalReport> {
    if config.splits == 0 || !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(GestureError::InvalidConfig(format!(
            "need at least one split and a train fraction in (0, 1), got {} and {}",
            config.splits, config.train_fraction
        )));
    }
    let (classes, _, ys) = labelled_features(data)?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes.len()];
    for (i, &y) in ys.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut splits = Vec::new();
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    let mut users: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for k in 0..config.splits {
        let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
        for members in &by_class {
            let mut m = members.clone();
            m.shuffle(&mut rng);
            let n_train = ((m.len() as f64 * config.train_fraction).round() as usize).clamp(1, m.len() - 1);
            train_idx.extend_from_slice(&m[..n_train]);
            test_idx.extend_from_slice(&m[n_train..]);
        }
        train_idx.sort_unstable();
        test_idx.sort_unstable();
        let train_set: Vec<Stroke> = train_idx.iter().map(|&i| data[i].clone()).collect();
        let tc = TrainConfig {
            seed: config.train.seed.wrapping_add(k as u64),
            ..config.train.clone()
        };
        let model = train(&train_set, &tc)?;
        let mut correct = 0;
        for &i in &test_idx {
            let got = classify(&model, &data[i])?;
            let p = classes.iter().position(|c| *c == got.label).expect("known class");
            confusion[ys[i]][p] += 1;
            let hit = p == ys[i];
            correct += hit as usize;
            let u = users.entry(data[i].user.clone().unwrap_or_default()).or_default();
            u.0 += hit as usize;
            u.1 += 1;
        }
        splits.push(SplitResult {
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            training_accuracy: model.training.training_accuracy,
            accuracy: correct as f64 / test_idx.len() as f64,
        });
    }
    let accs: Vec<f64> = splits.iter().map(|s| s.accuracy).collect();
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let std = (accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / accs.len() as f64).sqrt();
    Ok(EvalReport {
        classes,
        mean_accuracy: mean,
        std_accuracy: std,
        min_accuracy: accs.iter().copied().fold(f64::INFINITY, f64::min),
        max_accuracy: accs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        splits,
        per_user: users.into_iter().map(|(u, (c, n))| (u, c as f64 / n as f64)).collect(),
        confusion,
    })
}
