//! Central-difference gradient verification.

use super::DenseTensor;

/// Default perturbation for 64-bit central differences.
pub const DEFAULT_DELTA: f64 = 1e-5;

/// Relative disagreement between an analytic and a numeric derivative.
#[inline]
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compare analytic gradients against central differences of a scalar
/// function. `f` is evaluated at perturbed copies of `inputs`; `analytic`
/// must hold one gradient tensor per input, same shapes. Returns the maximum
/// relative error over every element of every input.
pub fn finite_difference_check<F>(
    mut f: F,
    inputs: &[DenseTensor],
    analytic: &[DenseTensor],
    delta: f64,
) -> f64
where
    F: FnMut(&[DenseTensor]) -> f64,
{
    assert_eq!(inputs.len(), analytic.len());
    let mut work: Vec<DenseTensor> = inputs.to_vec();
    let mut worst = 0.0f64;
    for ti in 0..inputs.len() {
        assert_eq!(inputs[ti].shape(), analytic[ti].shape());
        for ei in 0..inputs[ti].numel() {
            let orig = work[ti].data()[ei];
            work[ti].data_mut()[ei] = orig + delta;
            let up = f(&work);
            work[ti].data_mut()[ei] = orig - delta;
            let down = f(&work);
            work[ti].data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * delta);
            let err = relative_error(analytic[ti].data()[ei], numeric);
            if err > worst {
                worst = err;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::conv::{conv3d, conv3d_backward};
    use rand::{Rng, SeedableRng};

    #[test]
    fn detects_a_wrong_gradient() {
        let x = DenseTensor::from_vec(&[2], vec![0.3, -0.4]).unwrap();
        let good = DenseTensor::from_vec(&[2], vec![2.0 * 0.3, 2.0 * -0.4]).unwrap();
        let bad = DenseTensor::from_vec(&[2], vec![0.3, -0.4]).unwrap();
        let f = |t: &[DenseTensor]| t[0].data().iter().map(|v| v * v).sum::<f64>();
        assert!(finite_difference_check(f, &[x.clone()], &[good], DEFAULT_DELTA) < 1e-8);
        assert!(finite_difference_check(f, &[x], &[bad], DEFAULT_DELTA) > 0.1);
    }

    #[test]
    fn conv3d_gradients_agree_with_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = DenseTensor::from_vec(&[2, 3, 3, 3], (0..54).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let w = DenseTensor::from_vec(&[2, 2, 3, 3, 3], (0..108).map(|_| rng.gen_range(-0.5..0.5)).collect()).unwrap();
        let b = DenseTensor::from_vec(&[2], vec![0.1, -0.2]).unwrap();
        // Scalar objective: sum of outputs, so grad_out is all ones.
        let loss = |t: &[DenseTensor]| {
            conv3d(&t[0], &t[1], &t[2], 1, 1).unwrap().data().iter().sum::<f64>()
        };
        let out = conv3d(&x, &w, &b, 1, 1).unwrap();
        let ones = DenseTensor::full(out.shape(), 1.0);
        let (gx, gw, gb) = conv3d_backward(&x, &w, &ones, 1, 1).unwrap();
        let err = finite_difference_check(
            loss,
            &[x, w, b],
            &[gx, gw, gb],
            DEFAULT_DELTA,
        );
        assert!(err < 1e-7, "max relative error {err}");
    }
}
