//! Fully connected layers, ReLU, and the three-way softmax cross-entropy.

use super::DenseTensor;
use crate::error::{Error, Result};

/// `weights [M, N] * input [N] + bias [M]`.
pub fn fully_connected(
    input: &DenseTensor,
    weights: &DenseTensor,
    bias: &DenseTensor,
) -> Result<DenseTensor> {
    let n = input.numel();
    let wshape = weights.shape();
    if wshape.len() != 2 || wshape[1] != n || bias.numel() != wshape[0] {
        return Err(Error::Shape(format!(
            "fully_connected: weights {wshape:?}, bias {:?}, input of {n}",
            bias.shape()
        )));
    }
    let m = wshape[0];
    let mut out = vec![0.0; m];
    let wd = weights.data();
    let ind = input.data();
    for (row, o) in out.iter_mut().enumerate() {
        let wrow = &wd[row * n..(row + 1) * n];
        *o = bias.data()[row] + wrow.iter().zip(ind).map(|(w, x)| w * x).sum::<f64>();
    }
    let out = DenseTensor::from_vec(&[m], out)?;
    out.debug_assert_finite("fully_connected output");
    Ok(out)
}

pub fn fully_connected_backward(
    input: &DenseTensor,
    weights: &DenseTensor,
    grad_out: &DenseTensor,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    let n = input.numel();
    let m = weights.shape()[0];
    if grad_out.numel() != m {
        return Err(Error::Shape("fully_connected backward shape mismatch".into()));
    }
    let mut grad_in = DenseTensor::zeros(&[n]);
    let mut grad_w = DenseTensor::zeros(weights.shape());
    let grad_b = DenseTensor::from_vec(&[m], grad_out.data().to_vec())?;

    let wd = weights.data();
    let ind = input.data();
    let god = grad_out.data();
    let gid = grad_in.data_mut();
    let gwd = grad_w.data_mut();
    for row in 0..m {
        let g = god[row];
        let wrow = &wd[row * n..(row + 1) * n];
        let gwrow = &mut gwd[row * n..(row + 1) * n];
        for i in 0..n {
            gid[i] += g * wrow[i];
            gwrow[i] = g * ind[i];
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// Elementwise `max(0, x)`; the mask records which inputs were positive.
pub fn relu(input: &DenseTensor) -> (DenseTensor, Vec<bool>) {
    let mask: Vec<bool> = input.data().iter().map(|&v| v > 0.0).collect();
    let data = input
        .data()
        .iter()
        .map(|&v| if v > 0.0 { v } else { 0.0 })
        .collect();
    let out = DenseTensor::from_vec(input.shape(), data).expect("same shape");
    (out, mask)
}

pub fn relu_backward(grad_out: &DenseTensor, mask: &[bool]) -> DenseTensor {
    let data = grad_out
        .data()
        .iter()
        .zip(mask)
        .map(|(&g, &m)| if m { g } else { 0.0 })
        .collect();
    DenseTensor::from_vec(grad_out.shape(), data).expect("same shape")
}

/// In-place ReLU over a raw slice (sparse feature rows share this path).
pub fn relu_slice(data: &mut [f64]) -> Vec<bool> {
    let mut mask = vec![false; data.len()];
    for (v, m) in data.iter_mut().zip(mask.iter_mut()) {
        if *v > 0.0 {
            *m = true;
        } else {
            *v = 0.0;
        }
    }
    mask
}

/// Numerically stable softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Cross-entropy of one item against a target class. Returns the loss and
/// the logit gradient `softmax - one_hot`.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> (f64, Vec<f64>) {
    debug_assert!(target < logits.len());
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln() + m;
    let loss = log_sum - logits[target];
    let mut grad = softmax(logits);
    grad[target] -= 1.0;
    (loss, grad)
}
