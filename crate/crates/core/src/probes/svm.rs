use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub epochs: usize,
    /// Step size at epoch 0; epoch `t` uses `lr / (1 + t)`.
    pub lr: f64,
    pub l2_penalty: f64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.1,
            l2_penalty: 1e-3,
        }
    }
}

/// Linear max-margin classifier on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvm {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

const SCALE_FLOOR: f64 = 1e-8;

impl LinearSvm {
    /// Minimizes `λ/2·‖w‖² + mean(max(0, 1 − y·(w·x + b)))` by full-batch
    /// subgradient descent from zero.
    pub fn train(xs: &[&[f32]], ys: &[bool], params: &SvmParams) -> Result<Self> {
        let n = xs.len();
        if n == 0 || ys.len() != n {
            return Err(Error::InsufficientData(
                "svm needs a non-empty, labeled training set".into(),
            ));
        }
        let d = xs[0].len();
        if xs.iter().any(|x| x.len() != d) {
            return Err(Error::Shape {
                context: "svm input",
                expected: d,
                found: 0,
            });
        }
        let mut mean = vec![0.0; d];
        for x in xs {
            for (m, &v) in mean.iter_mut().zip(x.iter()) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut scale = vec![0.0; d];
        for x in xs {
            for ((s, &v), m) in scale.iter_mut().zip(x.iter()).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        scale
            .iter_mut()
            .for_each(|s| *s = (*s / n as f64).sqrt().max(SCALE_FLOOR));

        let z: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((&v, m), s)| (v as f64 - m) / s)
                    .collect()
            })
            .collect();
        let y: Vec<f64> = ys.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();

        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut gw = vec![0.0; d];
        for epoch in 0..params.epochs {
            let eta = params.lr / (1.0 + epoch as f64);
            for (g, wi) in gw.iter_mut().zip(&w) {
                *g = params.l2_penalty * wi;
            }
            let mut gb = 0.0;
            for (zi, &yi) in z.iter().zip(&y) {
                let margin = yi * (dot(&w, zi) + b);
                if margin < 1.0 {
                    for (g, v) in gw.iter_mut().zip(zi) {
                        *g -= yi * v / n as f64;
                    }
                    gb -= yi / n as f64;
                }
            }
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= eta * g;
            }
            b -= eta * gb;
        }
        Ok(Self {
            mean,
            scale,
            weights: w,
            bias: b,
        })
    }

    pub fn decision(&self, x: &[f32]) -> f32 {
        let mut s = self.bias;
        for (((&v, m), sc), w) in x.iter().zip(&self.mean).zip(&self.scale).zip(&self.weights) {
            s += w * (v as f64 - m) / sc;
        }
        s as f32
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
