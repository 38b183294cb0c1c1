//! One-hidden-layer perceptron: tanh hidden units, softmax output,
//! cross-entropy loss, gradients by backpropagation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MlpData", try_from = "MlpData")]
pub struct Mlp {
    /// hidden x input
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// output x hidden
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

/// Gradient of the loss, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl Mlp {
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize) -> Self {
        Self {
            w1: DMatrix::zeros(hidden, inputs),
            b1: DVector::zeros(hidden),
            w2: DMatrix::zeros(outputs, hidden),
            b2: DVector::zeros(outputs),
        }
    }

    /// Every weight and bias uniform in [-0.5, 0.5]; drawn layer by layer,
    /// row-major, weights before biases.
    pub fn random(inputs: usize, hidden: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let mut draw = || rng.random_range(-0.5..=0.5);
        let mut m = Self::zeros(inputs, hidden, outputs);
        for r in 0..hidden {
            for c in 0..inputs {
                m.w1[(r, c)] = draw();
            }
        }
        for r in 0..hidden {
            m.b1[r] = draw();
        }
        for r in 0..outputs {
            for c in 0..hidden {
                m.w2[(r, c)] = draw();
            }
        }
        for r in 0..outputs {
            m.b2[r] = draw();
        }
        m
    }

    pub fn inputs(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.w2.nrows()
    }

    /// Hidden activations and class probabilities.
    pub fn forward(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let h = (&self.w1 * x + &self.b1).map(f64::tanh);
        let z = &self.w2 * &h + &self.b2;
        (h, softmax(&z))
    }

    pub fn predict(&self, x: &DVector<f64>) -> DVector<f64> {
        self.forward(x).1
    }

    /// Cross-entropy of the true class `y`.
    pub fn loss(&self, x: &DVector<f64>, y: usize) -> f64 {
        -self.predict(x)[y].ln()
    }

    pub fn gradients(&self, x: &DVector<f64>, y: usize) -> (f64, Gradients) {
        let (h, p) = self.forward(x);
        let mut dz2 = p.clone();
        dz2[y] -= 1.0;
        let dh = self.w2.tr_mul(&dz2);
        let dz1 = dh.zip_map(&h, |g, a| g * (1.0 - a * a));
        let g = Gradients {
            w1: &dz1 * x.transpose(),
            b1: dz1,
            w2: &dz2 * h.transpose(),
            b2: dz2,
        };
        (-p[y].ln(), g)
    }

    /// Gradient descent step.
    pub fn step(&mut self, g: &Gradients, rate: f64) {
        self.w1 -= &g.w1 * rate;
        self.b1 -= &g.b1 * rate;
        self.w2 -= &g.w2 * rate;
        self.b2 -= &g.b2 * rate;
    }

    pub fn is_finite(&self) -> bool {
        [self.w1.as_slice(), self.b1.as_slice(), self.w2.as_slice(), self.b2.as_slice()]
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &DVector<f64>) -> DVector<f64> {
    let m = z.max();
    let e = z.map(|v| (v - m).exp());
    let s = e.sum();
    e / s
}

#[derive(Serialize, Deserialize)]
struct LayerData {
    rows: usize,
    cols: usize,
    /// Row-major.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpData {
    hidden: LayerData,
    output: LayerData,
}

fn layer(w: &DMatrix<f64>, b: &DVector<f64>) -> LayerData {
    LayerData {
        rows: w.nrows(),
        cols: w.ncols(),
        weights: w.transpose().as_slice().to_vec(),
        biases: b.as_slice().to_vec(),
    }
}

fn unlayer(l: LayerData) -> Result<(DMatrix<f64>, DVector<f64>), String> {
    if l.weights.len() != l.rows * l.cols || l.biases.len() != l.rows {
        return Err(format!(
            "layer {}x{} has {} weights and {} biases",
            l.rows,
            l.cols,
            l.weights.len(),
            l.biases.len()
        ));
    }
    Ok((DMatrix::from_row_slice(l.rows, l.cols, &l.weights), DVector::from_vec(l.biases)))
}

impl From<Mlp> for MlpData {
    fn from(m: Mlp) -> Self {
        MlpData {
            hidden: layer(&m.w1, &m.b1),
            output: layer(&m.w2, &m.b2),
        }
    }
}

impl TryFrom<MlpData> for Mlp {
    type Error = String;

    fn try_from(d: MlpData) -> Result<Self, String> {
        let (w1, b1) = unlayer(d.hidden)?;
        let (w2, b2) = unlayer(d.output)?;
        if w2.ncols() != w1.nrows() {
            return Err(format!("output layer takes {} inputs, hidden layer has {}", w2.ncols(), w1.nrows()));
        }
        Ok(Mlp { w1, b1, w2, b2 })
    }
}
