use crate::error::{check_dim, Result};
use crate::numerics::{affine_backward_into, affine_forward, softmax2, Mat32, Rng};

fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Mat32 {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| rng.uniform_range(-bound, bound) as f32)
        .collect();
    Mat32::from_vec(rows, cols, values).expect("glorot shape")
}

fn positive(h: &[f32]) -> Vec<bool> {
    h.iter().map(|&v| v > 0.0).collect()
}

/// One projection head: `affine → ReLU → affine`.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    w1: Mat32,
    b1: Vec<f32>,
    w2: Mat32,
    b2: Vec<f32>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct HeadTrace {
    hidden: Vec<f32>,
    output: Vec<f32>,
}

impl HeadTrace {
    pub(crate) fn output(&self) -> &[f32] {
        &self.output
    }
}

impl Head {
    pub fn new(w1: Mat32, b1: Vec<f32>, w2: Mat32, b2: Vec<f32>) -> Result<Self> {
        check_dim("head b1", w1.rows(), b1.len())?;
        check_dim("head W2 cols", w1.rows(), w2.cols())?;
        check_dim("head b2", w2.rows(), b2.len())?;
        Ok(Self { w1, b1, w2, b2 })
    }

    pub(crate) fn glorot(input: usize, hidden: usize, output: usize, rng: &mut Rng) -> Self {
        Self {
            w1: glorot(hidden, input, rng),
            b1: vec![0.0; hidden],
            w2: glorot(output, hidden, rng),
            b2: vec![0.0; output],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn w1(&self) -> &Mat32 {
        &self.w1
    }

    pub fn w2(&self) -> &Mat32 {
        &self.w2
    }

    pub fn b1(&self) -> &[f32] {
        &self.b1
    }

    pub fn b2(&self) -> &[f32] {
        &self.b2
    }

    pub fn forward(&self, x: &[f32]) -> Result<Vec<f32>> {
        Ok(self.trace(x)?.output)
    }

    pub(crate) fn trace(&self, x: &[f32]) -> Result<HeadTrace> {
        check_dim("head input", self.input_dim(), x.len())?;
        let hidden = affine_forward(&self.w1, &self.b1, x, true)?;
        let output = affine_forward(&self.w2, &self.b2, &hidden, false)?;
        Ok(HeadTrace { hidden, output })
    }

    /// Adds the weight gradients for `upstream = ∂L/∂output` into `grads`.
    pub(crate) fn backward(
        &self,
        x: &[f32],
        trace: &HeadTrace,
        upstream: &[f32],
        grads: &mut Head,
    ) -> Result<()> {
        check_dim("head upstream", self.output_dim(), upstream.len())?;
        let mut grad_hidden = vec![0.0; self.hidden_dim()];
        affine_backward_into(
            &self.w2,
            &trace.hidden,
            upstream,
            None,
            &mut grads.w2,
            &mut grads.b2,
            Some(&mut grad_hidden),
        )?;
        affine_backward_into(
            &self.w1,
            x,
            &grad_hidden,
            Some(&positive(&trace.hidden)),
            &mut grads.w1,
            &mut grads.b1,
            None,
        )
    }

    pub(crate) fn push_blocks<'a>(
        &'a self,
        prefix: &str,
        out: &mut Vec<(&'static str, &'a [f32])>,
    ) {
        let names = block_names(prefix);
        out.push((names[0], self.w1.as_slice()));
        out.push((names[1], &self.b1));
        out.push((names[2], self.w2.as_slice()));
        out.push((names[3], &self.b2));
    }

    pub(crate) fn push_blocks_mut<'a>(
        &'a mut self,
        prefix: &str,
        out: &mut Vec<(&'static str, &'a mut [f32])>,
    ) {
        let names = block_names(prefix);
        out.push((names[0], self.w1.as_mut_slice()));
        out.push((names[1], &mut self.b1));
        out.push((names[2], self.w2.as_mut_slice()));
        out.push((names[3], &mut self.b2));
    }
}

fn block_names(prefix: &str) -> [&'static str; 4] {
    match prefix {
        "face" => ["face.w1", "face.b1", "face.w2", "face.b2"],
        _ => ["voice.w1", "voice.b1", "voice.w2", "voice.b2"],
    }
}

/// Match classifier over concatenated `[face; voice]` features:
/// two ReLU layers and a 2-way softmax output (index 0 = match).
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    w1: Mat32,
    b1: Vec<f32>,
    w2: Mat32,
    b2: Vec<f32>,
    w3: Mat32,
    b3: Vec<f32>,
}

pub(crate) struct ClassifierTrace {
    h1: Vec<f32>,
    h2: Vec<f32>,
    logits: Vec<f32>,
}

impl ClassifierTrace {
    pub(crate) fn probs(&self) -> (f32, f32) {
        let (a, b) = softmax2(self.logits[0] as f64, self.logits[1] as f64);
        (a as f32, b as f32)
    }
}

impl ClassifierHead {
    pub fn new(
        w1: Mat32,
        b1: Vec<f32>,
        w2: Mat32,
        b2: Vec<f32>,
        w3: Mat32,
        b3: Vec<f32>,
    ) -> Result<Self> {
        check_dim("classifier b1", w1.rows(), b1.len())?;
        check_dim("classifier W2 cols", w1.rows(), w2.cols())?;
        check_dim("classifier b2", w2.rows(), b2.len())?;
        check_dim("classifier W3 cols", w2.rows(), w3.cols())?;
        check_dim("classifier output", 2, w3.rows())?;
        check_dim("classifier b3", 2, b3.len())?;
        Ok(Self {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        })
    }

    pub(crate) fn glorot(input: usize, hidden: usize, rng: &mut Rng) -> Self {
        Self {
            w1: glorot(hidden, input, rng),
            b1: vec![0.0; hidden],
            w2: glorot(hidden, hidden, rng),
            b2: vec![0.0; hidden],
            w3: glorot(2, hidden, rng),
            b3: vec![0.0; 2],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    /// Contribution of one modality's features to the first layer's
    /// pre-activation: the face half or the voice half of `W1` applied to
    /// `x`. The pre-activation is the sum of both halves plus `b1`.
    pub fn first_layer_partial(&self, face_half: bool, x: &[f32]) -> Result<Vec<f32>> {
        let d = self.input_dim() / 2;
        check_dim("classifier modality input", d, x.len())?;
        let range = if face_half { 0..d } else { d..2 * d };
        Ok((0..self.hidden_dim())
            .map(|r| {
                self.w1.row(r)[range.clone()]
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * v)
                    .sum()
            })
            .collect())
    }

    /// Runs the rest of the network from the two first-layer partials.
    pub(crate) fn forward_from_partials(
        &self,
        face_partial: &[f32],
        voice_partial: &[f32],
    ) -> Result<ClassifierTrace> {
        check_dim("classifier partial", self.hidden_dim(), face_partial.len())?;
        check_dim("classifier partial", self.hidden_dim(), voice_partial.len())?;
        let h1: Vec<f32> = face_partial
            .iter()
            .zip(voice_partial)
            .zip(&self.b1)
            .map(|((a, b), c)| (a + b + c).max(0.0))
            .collect();
        let h2 = affine_forward(&self.w2, &self.b2, &h1, true)?;
        let logits = affine_forward(&self.w3, &self.b3, &h2, false)?;
        Ok(ClassifierTrace { h1, h2, logits })
    }

    pub(crate) fn forward(&self, face: &[f32], voice: &[f32]) -> Result<ClassifierTrace> {
        let pf = self.first_layer_partial(true, face)?;
        let pv = self.first_layer_partial(false, voice)?;
        self.forward_from_partials(&pf, &pv)
    }

    pub(crate) fn backward(
        &self,
        x: &[f32],
        trace: &ClassifierTrace,
        grad_logits: &[f32; 2],
        grads: &mut ClassifierHead,
    ) -> Result<()> {
        let mut g_h2 = vec![0.0; self.w2.rows()];
        affine_backward_into(
            &self.w3,
            &trace.h2,
            grad_logits,
            None,
            &mut grads.w3,
            &mut grads.b3,
            Some(&mut g_h2),
        )?;
        let mut g_h1 = vec![0.0; self.w1.rows()];
        affine_backward_into(
            &self.w2,
            &trace.h1,
            &g_h2,
            Some(&positive(&trace.h2)),
            &mut grads.w2,
            &mut grads.b2,
            Some(&mut g_h1),
        )?;
        affine_backward_into(
            &self.w1,
            x,
            &g_h1,
            Some(&positive(&trace.h1)),
            &mut grads.w1,
            &mut grads.b1,
            None,
        )
    }

    pub(crate) fn push_blocks<'a>(&'a self, out: &mut Vec<(&'static str, &'a [f32])>) {
        out.push(("classifier.w1", self.w1.as_slice()));
        out.push(("classifier.b1", &self.b1));
        out.push(("classifier.w2", self.w2.as_slice()));
        out.push(("classifier.b2", &self.b2));
        out.push(("classifier.w3", self.w3.as_slice()));
        out.push(("classifier.b3", &self.b3));
    }

    pub(crate) fn push_blocks_mut<'a>(&'a mut self, out: &mut Vec<(&'static str, &'a mut [f32])>) {
        out.push(("classifier.w1", self.w1.as_mut_slice()));
        out.push(("classifier.b1", &mut self.b1));
        out.push(("classifier.w2", self.w2.as_mut_slice()));
        out.push(("classifier.b2", &mut self.b2));
        out.push(("classifier.w3", self.w3.as_mut_slice()));
        out.push(("classifier.b3", &mut self.b3));
    }
}
