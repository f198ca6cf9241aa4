//! Dense `f32` vectors and matrices, the affine(+ReLU) layer with its manual
//! backward pass, and the scalar helpers shared by the loss functions.
//!
//! Model math runs in `f32`. Scalar loss terms (softmax over two distances,
//! logistic) and all statistics run in `f64`.

mod rng;
mod special;

pub use rng::Rng;
pub use special::{f_sf, ln_gamma, reg_inc_beta, student_t_quantile, student_t_sf_two_sided};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A dense vector of finite `f32` values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f32>", into = "Vec<f32>")]
pub struct Vec32(Vec<f32>);

impl Vec32 {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("vector must have positive dimension".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at index {i}")));
        }
        Ok(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }
}

impl Deref for Vec32 {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.0
    }
}

impl TryFrom<Vec<f32>> for Vec32 {
    type Error = Error;

    fn try_from(values: Vec<f32>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<Vec32> for Vec<f32> {
    fn from(v: Vec32) -> Self {
        v.0
    }
}

/// Row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat32 {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl Mat32 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain("matrix dimensions must be positive".into()));
        }
        check_dim("Mat32::from_vec", rows * cols, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("matrix holds non-finite values".into()));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.values[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.values
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f32]) -> Result<Vec<f32>> {
        check_dim("matvec", self.cols, x.len())?;
        Ok((0..self.rows).map(|r| dot(self.row(r), x)).collect())
    }
}

#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean distance `sqrt(Σ(aᵢ−bᵢ)²)`.
pub fn l2_distance(a: &[f32], b: &[f32]) -> Result<f32> {
    Ok(l2_distance_f64(a, b)? as f32)
}

/// [`l2_distance`] without the final rounding to `f32`.
pub fn l2_distance_f64(a: &[f32], b: &[f32]) -> Result<f64> {
    check_dim("l2_distance", a.len(), b.len())?;
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// Floor applied to a distance before dividing by it in a gradient.
pub const DISTANCE_GRAD_FLOOR: f32 = 1e-8;

/// Gradient of `‖a − b‖₂` with respect to `a` (the gradient w.r.t. `b` is the
/// negation). The denominator is clamped at [`DISTANCE_GRAD_FLOOR`].
pub fn l2_distance_grad(a: &[f32], b: &[f32], distance: f32) -> Vec<f32> {
    let denom = distance.max(DISTANCE_GRAD_FLOOR);
    a.iter().zip(b).map(|(x, y)| (x - y) / denom).collect()
}

/// Two-way softmax with max-subtraction; stable for all finite inputs.
pub fn softmax2(d_plus: f64, d_minus: f64) -> (f64, f64) {
    let m = d_plus.max(d_minus);
    let ep = (d_plus - m).exp();
    let em = (d_minus - m).exp();
    let z = ep + em;
    (ep / z, em / z)
}

/// Logistic function `1 / (1 + e^{−x})`, evaluated without overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y = W·x + b`, followed by `max(0, ·)` when `relu` is set.
pub fn affine_forward(w: &Mat32, b: &[f32], x: &[f32], relu: bool) -> Result<Vec<f32>> {
    check_dim("affine_forward: W.cols vs x", w.cols(), x.len())?;
    check_dim("affine_forward: W.rows vs b", w.rows(), b.len())?;
    Ok((0..w.rows())
        .map(|r| {
            let y = dot(w.row(r), x) + b[r];
            if relu {
                y.max(0.0)
            } else {
                y
            }
        })
        .collect())
}

/// Gradients of one affine(+ReLU) layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineGrads {
    pub w: Mat32,
    pub b: Vec<f32>,
    pub x: Vec<f32>,
}

/// Backward pass of [`affine_forward`].
///
/// `upstream` is the gradient with respect to the layer output. `relu_mask`,
/// when given, marks outputs whose pre-activation was positive; gradient flows
/// only through those.
pub fn affine_backward(
    w: &Mat32,
    x: &[f32],
    upstream: &[f32],
    relu_mask: Option<&[bool]>,
) -> Result<AffineGrads> {
    let mut gw = Mat32::zeros(w.rows(), w.cols());
    let mut gb = vec![0.0; w.rows()];
    let mut gx = vec![0.0; w.cols()];
    affine_backward_into(w, x, upstream, relu_mask, &mut gw, &mut gb, Some(&mut gx))?;
    Ok(AffineGrads {
        w: gw,
        b: gb,
        x: gx,
    })
}

/// Like [`affine_backward`], but adds the weight and bias gradients into
/// existing buffers. The input gradient is written (not added) into
/// `grad_x` when one is supplied, and skipped otherwise.
pub fn affine_backward_into(
    w: &Mat32,
    x: &[f32],
    upstream: &[f32],
    relu_mask: Option<&[bool]>,
    grad_w: &mut Mat32,
    grad_b: &mut [f32],
    mut grad_x: Option<&mut [f32]>,
) -> Result<()> {
    check_dim("affine_backward: W.cols vs x", w.cols(), x.len())?;
    check_dim(
        "affine_backward: W.rows vs upstream",
        w.rows(),
        upstream.len(),
    )?;
    check_dim("affine_backward: grad_w rows", w.rows(), grad_w.rows())?;
    check_dim("affine_backward: grad_w cols", w.cols(), grad_w.cols())?;
    check_dim("affine_backward: grad_b", w.rows(), grad_b.len())?;
    if let Some(mask) = relu_mask {
        check_dim("affine_backward: relu mask", w.rows(), mask.len())?;
    }
    if let Some(gx) = grad_x.as_deref_mut() {
        check_dim("affine_backward: grad_x", w.cols(), gx.len())?;
        gx.fill(0.0);
    }
    let cols = w.cols();
    for r in 0..w.rows() {
        let g = match relu_mask {
            Some(mask) if !mask[r] => 0.0,
            _ => upstream[r],
        };
        if g == 0.0 {
            continue;
        }
        grad_b[r] += g;
        let gw_row = &mut grad_w.values[r * cols..(r + 1) * cols];
        for (gwi, xi) in gw_row.iter_mut().zip(x) {
            *gwi += g * xi;
        }
        if let Some(gx) = grad_x.as_deref_mut() {
            for (gxi, wi) in gx.iter_mut().zip(w.row(r)) {
                *gxi += g * wi;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn l2_distance_examples() {
        assert_eq!(l2_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(l2_distance(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(l2_distance(&[1.0; 4], &[0.0; 4]).unwrap(), 2.0);
        assert!(matches!(
            l2_distance(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn softmax2_examples() {
        assert_eq!(softmax2(0.0, 0.0), (0.5, 0.5));
        let (p, m) = softmax2(1.0, 2.0);
        assert!((p - 0.268_941_421_369_995).abs() < 1e-12);
        assert!((m - 0.731_058_578_630_005).abs() < 1e-12);
        let (p, m) = softmax2(1000.0, 0.0);
        assert!((p - 1.0).abs() < 1e-30);
        assert!(m.abs() < 1e-30);
        assert!(p.is_finite() && m.is_finite());
    }

    #[test]
    fn affine_forward_examples() {
        let id = Mat32::identity(2);
        assert_eq!(
            affine_forward(&id, &[0.0, 0.0], &[-1.0, 2.0], false).unwrap(),
            vec![-1.0, 2.0]
        );
        assert_eq!(
            affine_forward(&id, &[0.0, 0.0], &[-1.0, 2.0], true).unwrap(),
            vec![0.0, 2.0]
        );
        let w = Mat32::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        assert_eq!(
            affine_forward(&w, &[0.5], &[1.0, 2.0], false).unwrap(),
            vec![3.5]
        );
        assert!(affine_forward(&w, &[0.5], &[1.0], false).is_err());
        assert!(affine_forward(&w, &[0.5, 0.1], &[1.0, 2.0], false).is_err());
    }

    #[test]
    fn affine_backward_examples() {
        let w = Mat32::from_vec(2, 3, vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.0]).unwrap();
        let g = affine_backward(&w, &[1.0, 2.0, 3.0], &[0.0, 0.0], None).unwrap();
        assert!(g.w.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.b.iter().chain(&g.x).all(|&v| v == 0.0));

        let w = Mat32::from_vec(1, 1, vec![2.0]).unwrap();
        let g = affine_backward(&w, &[3.0], &[1.0], None).unwrap();
        assert_eq!(g.w.as_slice(), &[3.0]);
        assert_eq!(g.b, vec![1.0]);
        assert_eq!(g.x, vec![2.0]);

        let g = affine_backward(&w, &[3.0], &[1.0], Some(&[false])).unwrap();
        assert_eq!(g.w.as_slice(), &[0.0]);
        assert_eq!(g.x, vec![0.0]);
    }

    #[test]
    fn vec32_rejects_non_finite() {
        assert!(Vec32::new(vec![1.0, f32::NAN]).is_err());
        assert!(Vec32::new(vec![]).is_err());
        assert_eq!(Vec32::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    #[test]
    fn logistic_matches_softmax() {
        for &(a, b) in &[(1.0, 2.0), (-30.0, 4.0), (700.0, -700.0)] {
            let (p, _) = softmax2(a, b);
            assert!((p - logistic(a - b)).abs() < 1e-15);
        }
    }
}
