//! Dense tensors and the hand-written layer gradients built on them.
//!
//! Everything is 64-bit and row-major with the last axis fastest. Ops are
//! pure functions; each differentiable op has an explicit backward companion
//! rather than a tape of its own (the network module assembles tapes).

pub mod adam;
pub mod conv;
pub mod gradcheck;
pub mod nn;
pub mod resample;

use crate::error::{Error, Result};

/// N-dimensional array of `f64` with shape metadata.
#[derive(Clone, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl std::fmt::Debug for DenseTensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DenseTensor{:?}", self.shape)
    }
}

impl DenseTensor {
    pub fn zeros(shape: &[usize]) -> Self {
        DenseTensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {n} values, got {}",
                shape,
                data.len()
            )));
        }
        Ok(DenseTensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        DenseTensor {
            shape: shape.to_vec(),
            data: vec![value; shape.iter().product()],
        }
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn numel(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Reinterpret with a new shape of identical element count.
    pub fn reshaped(mut self, shape: &[usize]) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} to {:?}",
                self.shape, shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    /// Flat offset of a multi-index (last axis fastest).
    #[inline]
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        let mut off = 0;
        for (i, &idx) in index.iter().enumerate() {
            debug_assert!(idx < self.shape[i]);
            off = off * self.shape[i] + idx;
        }
        off
    }

    #[inline]
    pub fn at(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    #[inline]
    pub fn at_mut(&mut self, index: &[usize]) -> &mut f64 {
        let off = self.offset(index);
        &mut self.data[off]
    }

    /// Debug-mode guard: ops assert their outputs stay finite.
    #[inline]
    pub fn debug_assert_finite(&self, label: &str) {
        #[cfg(debug_assertions)]
        {
            if let Some(bad) = self.data.iter().position(|v| !v.is_finite()) {
                panic!("non-finite value in {label} at flat index {bad}");
            }
        }
        #[cfg(not(debug_assertions))]
        {
            let _ = label;
        }
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for v in &mut self.data {
            *v *= factor;
        }
        self
    }

    pub fn add_assign(&mut self, other: &DenseTensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn dot(&self, other: &DenseTensor) -> f64 {
        debug_assert_eq!(self.shape, other.shape);
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// Uniform Glorot initialization: `U(-sqrt(6/(fan_in+fan_out)), +...)`.
pub fn glorot_uniform(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut impl rand::Rng,
) -> DenseTensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    DenseTensor::from_vec(shape, data).expect("shape/product consistent")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offsets_are_row_major_last_fastest() {
        let t = DenseTensor::from_vec(&[2, 3, 4], (0..24).map(|i| i as f64).collect()).unwrap();
        assert_eq!(t.at(&[0, 0, 1]), 1.0);
        assert_eq!(t.at(&[0, 1, 0]), 4.0);
        assert_eq!(t.at(&[1, 0, 0]), 12.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        assert!(DenseTensor::from_vec(&[2, 2], vec![0.0; 3]).is_err());
        assert!(DenseTensor::zeros(&[4]).reshaped(&[5]).is_err());
    }
}
