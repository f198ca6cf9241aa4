use crate::error::{check_dim, Error, Result};
use crate::model::ModelParams;

/// First/second moment buffers, one per parameter block, plus the step
/// counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &ModelParams, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<f32>> = params
            .blocks()
            .iter()
            .map(|(_, b)| vec![0.0; b.len()])
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1,
            beta2,
            epsilon,
        }
    }
}

/// One bias-corrected Adam update. Gradients are checked for finiteness
/// before any parameter changes.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let grad_blocks = grads.blocks();
    check_dim("adam: block count", state.m.len(), grad_blocks.len())?;
    for (name, g) in &grad_blocks {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(name.to_string()));
        }
    }
    let mut param_blocks = params.blocks_mut();
    check_dim("adam: param blocks", grad_blocks.len(), param_blocks.len())?;
    for (((_, p), (_, g)), m) in param_blocks.iter().zip(&grad_blocks).zip(&state.m) {
        check_dim("adam: block size", p.len(), g.len())?;
        check_dim("adam: moment size", p.len(), m.len())?;
    }

    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for (((_, p), (_, g)), (m, v)) in param_blocks
        .iter_mut()
        .zip(&grad_blocks)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.len() {
            let gi = g[i] as f64;
            let mi = b1 * m[i] as f64 + (1.0 - b1) * gi;
            let vi = b2 * v[i] as f64 + (1.0 - b2) * gi * gi;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let update = lr * (mi / c1) / ((vi / c2).sqrt() + state.epsilon);
            p[i] = (p[i] as f64 - update) as f32;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, Objective};

    fn params() -> ModelParams {
        ModelParams::init(5, 4, 3, Objective::Triplet, Direction::V2F, 8).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        for (_, b) in g.blocks_mut() {
            b.fill(10.0);
        }
        let mut s = AdamState::new(&p, 0.9, 0.999, 1e-8);
        adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        assert_eq!(s.t, 1);
        for ((_, a), (_, b)) in p.blocks().iter().zip(before.blocks()) {
            for (x, y) in a.iter().zip(b) {
                let delta = (*x - *y) as f64;
                assert!((delta + 1e-3).abs() < 1e-6, "{delta}");
            }
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params();
        let before = p.clone();
        let g = p.zeros_like();
        let mut s = AdamState::new(&p, 0.9, 0.999, 1e-8);
        for _ in 0..50 {
            adam_step(&mut p, &g, &mut s, 1e-3).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = params();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.blocks_mut()[6].1[0] = f32::NAN;
        let mut s = AdamState::new(&p, 0.9, 0.999, 1e-8);
        match adam_step(&mut p, &g, &mut s, 1e-3) {
            Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "voice.w2"),
            other => panic!("{other:?}"),
        }
        assert_eq!(p, before);
        assert_eq!(s.t, 0);
    }
}
