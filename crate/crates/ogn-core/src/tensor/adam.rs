//! Bias-corrected Adam.

use super::DenseTensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment accumulators for one parameter tensor, plus the
/// shared step counter (owned by the optimizer loop, passed per call).
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: DenseTensor,
    pub second_moment: DenseTensor,
    pub step: u64,
}

impl AdamState {
    pub fn new(shape: &[usize]) -> Self {
        AdamState {
            first_moment: DenseTensor::zeros(shape),
            second_moment: DenseTensor::zeros(shape),
            step: 0,
        }
    }
}

/// One Adam update. Increments the step counter by exactly one and updates
/// parameters in place. Deterministic: identical inputs give identical bits.
pub fn adam_step(
    params: &mut DenseTensor,
    grads: &DenseTensor,
    state: &mut AdamState,
    hp: &AdamParams,
) -> Result<()> {
    if params.shape() != grads.shape() || params.shape() != state.first_moment.shape() {
        return Err(Error::Shape(format!(
            "adam_step: params {:?}, grads {:?}, state {:?}",
            params.shape(),
            grads.shape(),
            state.first_moment.shape()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - hp.beta1.powi(t);
    let bc2 = 1.0 - hp.beta2.powi(t);
    let m = state.first_moment.data_mut();
    let v = state.second_moment.data_mut();
    let p = params.data_mut();
    let g = grads.data();
    for i in 0..p.len() {
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= hp.lr * m_hat / (v_hat.sqrt() + hp.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = DenseTensor::from_vec(&[3], vec![1.0, 1.0, 1.0]).unwrap();
        let g = DenseTensor::from_vec(&[3], vec![0.5, -2.0, 1e-3]).unwrap();
        let mut st = AdamState::new(&[3]);
        let hp = AdamParams::default();
        adam_step(&mut p, &g, &mut st, &hp).unwrap();
        // Bias correction makes m_hat = g and v_hat = g^2 on step one, so the
        // update is -lr * g/(|g| + eps) = approximately -lr * sign(g).
        assert!((p.data()[0] - (1.0 - hp.lr)).abs() < 1e-6);
        assert!((p.data()[1] - (1.0 + hp.lr)).abs() < 1e-6);
        assert!((p.data()[2] - (1.0 - hp.lr)).abs() < 1e-4);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = DenseTensor::from_vec(&[2], vec![0.3, -0.7]).unwrap();
        let g = DenseTensor::zeros(&[2]);
        let mut st = AdamState::new(&[2]);
        adam_step(&mut p, &g, &mut st, &AdamParams::default()).unwrap();
        assert_eq!(p.data(), &[0.3, -0.7]);
    }

    #[test]
    fn trajectory_matches_scalar_reference() {
        // Scalar Adam carried out by hand for three steps.
        let hp = AdamParams {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        };
        let grads = [0.4, -0.3, 0.25];
        let mut reference = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (i, &g) in grads.iter().enumerate() {
            let t = (i + 1) as i32;
            m = hp.beta1 * m + (1.0 - hp.beta1) * g;
            v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
            let mh = m / (1.0 - hp.beta1.powi(t));
            let vh = v / (1.0 - hp.beta2.powi(t));
            reference -= hp.lr * mh / (vh.sqrt() + hp.epsilon);
        }

        let mut p = DenseTensor::from_vec(&[1], vec![1.0]).unwrap();
        let mut st = AdamState::new(&[1]);
        for &g in &grads {
            let gt = DenseTensor::from_vec(&[1], vec![g]).unwrap();
            adam_step(&mut p, &gt, &mut st, &hp).unwrap();
        }
        assert!((p.data()[0] - reference).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_are_bit_identical() {
        let run = || {
            let mut p = DenseTensor::from_vec(&[2], vec![0.5, -0.25]).unwrap();
            let g = DenseTensor::from_vec(&[2], vec![0.1, 0.2]).unwrap();
            let mut st = AdamState::new(&[2]);
            for _ in 0..5 {
                adam_step(&mut p, &g, &mut st, &AdamParams::default()).unwrap();
            }
            p.data().to_vec()
        };
        let a = run();
        let b = run();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
