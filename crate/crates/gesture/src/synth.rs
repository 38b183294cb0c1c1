//! Synthetic stroke corpora from template paths.
//!
//! Each sample follows its template with smooth positional noise, a random
//! size and speed profile, and is quantized to integer sensor counts. Every
//! sample draws from its own ChaCha stream, so generation is reproducible
//! and independent of order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::resample;
use crate::stroke::{FlowSample, Stroke};
use crate::{GestureError, GestureResult};

/// Points each sample is traced through.
const TRACE_POINTS: usize = 96;
/// Moving-average window that smooths the per-point noise.
const SMOOTHING: usize = 9;
const COUNTS_RANGE: (f64, f64) = (300.0, 600.0);
const DURATION_MS: (f64, f64) = (300.0, 1200.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub name: String,
    /// Polyline in arbitrary units, y up.
    pub points: Vec<[f64; 2]>,
}

/// swipe-left/right/up/down and clockwise/counter-clockwise circles.
pub fn builtin_templates() -> Vec<Template> {
    let line = |name: &str, dx: f64, dy: f64| Template {
        name: name.into(),
        points: vec![[0.0, 0.0], [dx, dy]],
    };
    let circle = |name: &str, dir: f64| Template {
        name: name.into(),
        points: (0..=64)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
                [0.5 * dir * a.sin(), 0.5 * (1.0 - a.cos())]
            })
            .collect(),
    };
    vec![
        line("swipe-left", -1.0, 0.0),
        line("swipe-right", 1.0, 0.0),
        line("swipe-up", 0.0, 1.0),
        line("swipe-down", 0.0, -1.0),
        circle("circle-cw", -1.0),
        circle("circle-ccw", 1.0),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_per_class: usize,
    /// Per-point noise before smoothing, in template units (template size ~1).
    pub noise_sigma: f64,
    pub seed: u64,
    /// Samples are attributed round-robin to this many synthetic users.
    pub users: usize,
    #[serde(default)]
    pub device: Option<String>,
}

impl SynthConfig {
    pub fn new(n_per_class: usize, noise_sigma: f64, seed: u64) -> Self {
        Self {
            n_per_class,
            noise_sigma,
            seed,
            users: 4,
            device: None,
        }
    }
}

pub fn synth_corpus(templates: &[Template], config: &SynthConfig) -> GestureResult<Vec<Stroke>> {
    if config.n_per_class == 0 || config.users == 0 {
        return Err(GestureError::InvalidConfig("need at least one sample per class and one user".into()));
    }
    if !(config.noise_sigma.is_finite() && config.noise_sigma >= 0.0) {
        return Err(GestureError::InvalidConfig(format!("noise sigma must be >= 0, got {}", config.noise_sigma)));
    }
    for (i, a) in templates.iter().enumerate() {
        if templates[..i].iter().any(|b| b.name == a.name || b.points == a.points) {
            return Err(GestureError::InvalidConfig(format!("template {:?} duplicates an earlier one", a.name)));
        }
    }
    let traces = templates
        .iter()
        .map(|t| resample(&t.points, TRACE_POINTS))
        .collect::<GestureResult<Vec<_>>>()?;
    let n = config.n_per_class;
    (0..templates.len() * n)
        .into_par_iter()
        .map(|k| {
            let (c, i) = (k / n, k % n);
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(k as u64);
            let mut s = sample(&traces[c], config.noise_sigma, &mut rng).with_label(&templates[c].name);
            s.user = Some(format!("user-{}", i % config.users));
            s.device = config.device.clone();
            Ok(s)
        })
        .collect()
}

fn sample(trace: &[[f64; 2]], sigma: f64, rng: &mut ChaCha8Rng) -> Stroke {
    let m = trace.len();
    let mut noise = vec![[0.0; 2]; m];
    if sigma > 0.0 {
        let g = Normal::new(0.0, sigma).expect("finite sigma");
        let raw: Vec<[f64; 2]> = (0..m).map(|_| [g.sample(rng), g.sample(rng)]).collect();
        let h = SMOOTHING / 2;
        for (k, out) in noise.iter_mut().enumerate() {
            let (a, b) = (k.saturating_sub(h), (k + h).min(m - 1));
            for r in &raw[a..=b] {
                out[0] += r[0];
                out[1] += r[1];
            }
            let w = (b - a + 1) as f64;
            *out = [out[0] / w, out[1] / w];
        }
    }
    let counts = rng.random_range(COUNTS_RANGE.0..COUNTS_RANGE.1);
    let duration = rng.random_range(DURATION_MS.0..DURATION_MS.1);
    let wobble = rng.random_range(0.0..0.6);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let weights: Vec<f64> = (1..m)
        .map(|k| 1.0 + wobble * (std::f64::consts::PI * k as f64 / m as f64 + phase).sin())
        .collect();
    let total: f64 = weights.iter().sum();

    let pos = |k: usize| {
        let p = trace[k];
        [((p[0] + noise[k][0]) * counts).round() as i64, ((p[1] + noise[k][1]) * counts).round() as i64]
    };
    let mut prev = pos(0);
    let (mut t, mut elapsed) = (0u64, 0.0);
    let mut samples = Vec::with_capacity(m - 1);
    for k in 1..m {
        let p = pos(k);
        elapsed += duration * weights[k - 1] / total;
        t = (elapsed.round() as u64).max(t + 1);
        samples.push(FlowSample::new((p[0] - prev[0]) as i32, (p[1] - prev[1]) as i32, t));
        prev = p;
    }
    Stroke {
        samples,
        label: None,
        device: None,
        user: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{featurize, featurize_path};

    #[test]
    fn noiseless_samples_follow_templates() {
        let t = builtin_templates();
        let corpus = synth_corpus(&t, &SynthConfig::new(3, 0.0, 11)).unwrap();
        for s in &corpus {
            let tpl = t.iter().find(|t| Some(&t.name) == s.label.as_ref()).unwrap();
            let a = featurize(s).unwrap();
            let b = featurize_path(&tpl.points).unwrap();
            let err = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err < 5e-3, "{:?} {err}", s.label);
        }
    }

    #[test]
    fn reproducible() {
        let t = builtin_templates();
        let c = SynthConfig::new(4, 0.15, 5);
        assert_eq!(synth_corpus(&t, &c).unwrap(), synth_corpus(&t, &c).unwrap());
        let other = SynthConfig { seed: 6, ..c };
        assert_ne!(synth_corpus(&t, &other).unwrap(), synth_corpus(&t, &SynthConfig::new(4, 0.15, 5)).unwrap());
    }

    #[test]
    fn rejects_duplicate_templates() {
        let mut t = builtin_templates();
        t.push(t[0].clone());
        assert!(synth_corpus(&t, &SynthConfig::new(1, 0.1, 1)).is_err());
    }

    #[test]
    fn samples_are_valid_strokes() {
        let corpus = synth_corpus(&builtin_templates(), &SynthConfig::new(10, 0.15, 3)).unwrap();
        assert_eq!(corpus.len(), 60);
        for s in &corpus {
            s.check().unwrap();
            assert!(s.duration_ms() <= 1300);
        }
    }
}
