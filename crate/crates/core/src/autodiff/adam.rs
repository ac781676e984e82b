use serde::{Deserialize, Serialize};

use super::{AutodiffError, Result, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn for_params(params: &[Tensor]) -> Self {
        Self {
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(
    params: &mut [Tensor],
    grads: &[Tensor],
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    if state.m.is_empty() && state.step == 0 {
        *state = AdamState::for_params(params);
    }
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(AutodiffError::ShapeMismatch {
            op: "adam_step",
            left: vec![params.len()],
            right: vec![grads.len(), state.m.len()],
        });
    }
    for ((p, g), (m, v)) in params.iter().zip(grads).zip(state.m.iter().zip(&state.v)) {
        if p.shape() != g.shape() || p.shape() != m.shape() || p.shape() != v.shape() {
            return Err(AutodiffError::ShapeMismatch {
                op: "adam_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        for (((p, g), m), v) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::with_lr(1e-3);
        let mut p = vec![Tensor::vector(vec![0.5])];
        let mut st = AdamState::for_params(&p);
        adam_step(&mut p, &[Tensor::vector(vec![1.0])], &mut st, &cfg).unwrap();
        let delta = (p[0].data()[0] - 0.5).abs();
        assert!((0.99e-3..=1e-3).contains(&delta), "{delta}");
    }

    #[test]
    fn zero_gradient_leaves_param() {
        let cfg = AdamConfig::default();
        let mut p = vec![Tensor::vector(vec![2.0, -1.0])];
        let mut st = AdamState::for_params(&p);
        st.m[0] = Tensor::vector(vec![0.3, 0.0]);
        adam_step(&mut p, &[Tensor::zeros(&[2])], &mut st, &cfg).unwrap();
        assert!((st.m[0].data()[0] - 0.27).abs() < 1e-15);
        // Moments were zero for the second entry, so it cannot move.
        assert_eq!(p[0].data()[1], -1.0);
    }

    #[test]
    fn descends_a_parabola() {
        let cfg = AdamConfig::with_lr(0.1);
        let mut p = vec![Tensor::vector(vec![0.0])];
        let mut st = AdamState::for_params(&p);
        for _ in 0..200 {
            let w = p[0].data()[0];
            adam_step(
                &mut p,
                &[Tensor::vector(vec![2.0 * (w - 3.0)])],
                &mut st,
                &cfg,
            )
            .unwrap();
        }
        assert!((p[0].data()[0] - 3.0).abs() < 0.05, "{}", p[0].data()[0]);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let mut p = vec![Tensor::zeros(&[2])];
        let mut st = AdamState::for_params(&p);
        let err = adam_step(
            &mut p,
            &[Tensor::zeros(&[3])],
            &mut st,
            &AdamConfig::default(),
        );
        assert!(matches!(err, Err(AutodiffError::ShapeMismatch { .. })));
    }
}
