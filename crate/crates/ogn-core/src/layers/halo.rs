//! Receptive-field interval arithmetic for feature propagation.
//!
//! Before training starts, each block's layer stack is walked backwards from
//! the cells that must exist at block output — the two children per axis of
//! every mixed cell — to the input cells that can influence them. The
//! resulting per-axis offset interval around a mixed cell is the propagation
//! neighborhood: a `2^3` up-convolution alone needs only the mixed cell
//! itself, while e.g. a `4^3` up-convolution followed by a `3^3` convolution
//! needs offsets `-2..=+1`, four input cells per axis.

use super::{BlockSpec, LayerKind};
use crate::error::{Error, Result};

/// Inclusive 1D index interval, applied independently per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: i64,
    pub hi: i64,
}

impl Interval {
    pub fn new(lo: i64, hi: i64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

#[inline]
fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

#[inline]
fn div_ceil(a: i64, b: i64) -> i64 {
    -(-a).div_euclid(b)
}

/// Inputs needed to produce outputs `[a, b]` of a stride-`s` convolution with
/// kernel `k` and padding `p`: `[a*s - p, b*s - p + k - 1]`.
pub fn conv_input_interval(out: Interval, kernel: usize, stride: usize, pad: usize) -> Interval {
    Interval {
        lo: out.lo * stride as i64 - pad as i64,
        hi: out.hi * stride as i64 - pad as i64 + kernel as i64 - 1,
    }
}

/// Inputs needed to produce outputs `[a, b]` of a stride-`s` transposed
/// convolution with kernel `k`: `[ceil((a - k + 1)/s), floor(b/s)]`.
pub fn upconv_input_interval(out: Interval, kernel: usize, stride: usize) -> Interval {
    Interval {
        lo: div_ceil(out.lo - kernel as i64 + 1, stride as i64),
        hi: div_floor(out.hi, stride as i64),
    }
}

/// Coordinate frame of a layer boundary inside a block: offsets relative to
/// the mixed cell `m` (previous level) or to its doubled coordinate `2m`
/// (current level, after the stride-2 up-convolution).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Parent,
    Child,
}

/// Needed-set plan for one block, computed once from the architecture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaloPlan {
    /// Offset interval of each layer's output cells, with its frame.
    /// The last entry is always `[0, 1]` in the child frame.
    pub layer_outputs: Vec<(Interval, Frame)>,
    /// Offsets of block-input cells around each mixed cell: the propagation
    /// neighborhood.
    pub input: Interval,
}

/// Walk a block's layers backwards from the children of a mixed cell and
/// record, per layer, which output offsets must be computed, ending with the
/// input offsets that must be propagated.
pub fn compute_halo(block: &BlockSpec) -> Result<HaloPlan> {
    block.validate()?;
    let mut needed = Interval::new(0, 1);
    let mut frame = Frame::Child;
    let mut layer_outputs = vec![(Interval::new(0, 0), Frame::Child); block.layers.len()];
    for (j, layer) in block.layers.iter().enumerate().rev() {
        layer_outputs[j] = (needed, frame);
        match layer.kind {
            LayerKind::Conv => {
                // Stride-1, shape-preserving padding (k - 1)/2.
                let pad = (layer.kernel - 1) / 2;
                needed = conv_input_interval(needed, layer.kernel, 1, pad);
            }
            LayerKind::Upconv => {
                if frame != Frame::Child {
                    return Err(Error::Config(
                        "second up-convolution in a block (resolution would quadruple)".into(),
                    ));
                }
                // Offsets relative to 2m transform independently of m only
                // because the stride matches the subdivision factor 2.
                needed = upconv_input_interval(needed, layer.kernel, layer.stride);
                frame = Frame::Parent;
            }
        }
    }
    if frame != Frame::Parent {
        return Err(Error::Config("block never crossed its up-convolution".into()));
    }
    Ok(HaloPlan {
        layer_outputs,
        input: needed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::LayerSpec;

    fn up(kernel: usize) -> LayerSpec {
        LayerSpec { kind: LayerKind::Upconv, kernel, stride: 2, c_in: 1, c_out: 1 }
    }

    fn conv(kernel: usize) -> LayerSpec {
        LayerSpec { kind: LayerKind::Conv, kernel, stride: 1, c_in: 1, c_out: 1 }
    }

    #[test]
    fn two_cubed_upconv_needs_only_the_parent() {
        let plan = compute_halo(&BlockSpec { layers: vec![up(2)] }).unwrap();
        assert_eq!(plan.input, Interval::new(0, 0));
        assert_eq!(plan.layer_outputs[0], (Interval::new(0, 1), Frame::Child));
    }

    #[test]
    fn four_cubed_upconv_with_conv_needs_four_cells() {
        let plan = compute_halo(&BlockSpec { layers: vec![up(4), conv(3)] }).unwrap();
        assert_eq!(plan.input, Interval::new(-2, 1));
        assert_eq!(plan.input.len(), 4);
        // The conv needs child offsets [-1, 2] to serve children [0, 1].
        assert_eq!(plan.layer_outputs[0], (Interval::new(-1, 2), Frame::Child));
    }

    #[test]
    fn two_cubed_upconv_with_conv_needs_three_cells() {
        // Oracle: walk the intervals by hand with the 1D formulas.
        // conv k3 p1: children [0,1] need [-1,2]; upconv k2 s2 on [2m-1, 2m+2]
        // needs [ceil((2m-2)/2), floor((2m+2)/2)] = [m-1, m+1].
        let mut iv = Interval::new(0, 1);
        iv = conv_input_interval(iv, 3, 1, 1);
        assert_eq!(iv, Interval::new(-1, 2));
        iv = upconv_input_interval(Interval::new(-1, 2), 2, 2);
        assert_eq!(iv, Interval::new(-1, 1));

        let plan = compute_halo(&BlockSpec { layers: vec![up(2), conv(3)] }).unwrap();
        assert_eq!(plan.input, Interval::new(-1, 1));
    }

    #[test]
    fn general_interval_formulas() {
        // Strides beyond the wired cases still obey the formulas.
        assert_eq!(
            conv_input_interval(Interval::new(2, 5), 3, 2, 1),
            Interval::new(3, 11)
        );
        assert_eq!(
            upconv_input_interval(Interval::new(0, 8), 4, 3),
            Interval::new(-1, 2)
        );
    }
}
