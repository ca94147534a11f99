//! Forward and backward execution of one octree block.
//!
//! The cells each layer must produce are derived from the current mixed set
//! and the block's halo plan, so a block computes exactly what is needed to
//! serve the children of mixed cells at its output — no more, no less.

use super::halo::{Frame, HaloPlan, Interval};
use super::sparse_conv::{ogn_conv, ogn_conv_backward, SparseConvCache};
use super::{BlockSpec, SparseFeatureMap};
use crate::error::{Error, Result};
use crate::hash::KeySet;
use crate::octree::morton::level_extent;
use crate::octree::OctreeKey;
use crate::tensor::nn::relu_slice;
use crate::tensor::DenseTensor;

/// Weight/bias pairs for each layer of a block, in layer order.
pub type BlockParams<'a> = Vec<(&'a DenseTensor, &'a DenseTensor)>;

/// Cells a layer must output: the interval box around every mixed cell, in
/// the parent frame (around `m`) or child frame (around `2m`), clipped to
/// the level grid.
pub fn needed_output_keys(
    mixed: &[OctreeKey],
    interval: Interval,
    frame: Frame,
    base: [u32; 3],
) -> Vec<OctreeKey> {
    let mut set: KeySet<OctreeKey> = KeySet::default();
    for m in mixed {
        let (mx, my, mz) = m.coords();
        let (level, cx, cy, cz) = match frame {
            Frame::Parent => (m.level, mx as i64, my as i64, mz as i64),
            Frame::Child => (m.level + 1, 2 * mx as i64, 2 * my as i64, 2 * mz as i64),
        };
        let ext = level_extent(base, level);
        for dx in interval.lo..=interval.hi {
            let x = cx + dx;
            if x < 0 || x as u32 >= ext[0] {
                continue;
            }
            for dy in interval.lo..=interval.hi {
                let y = cy + dy;
                if y < 0 || y as u32 >= ext[1] {
                    continue;
                }
                for dz in interval.lo..=interval.hi {
                    let z = cz + dz;
                    if z < 0 || z as u32 >= ext[2] {
                        continue;
                    }
                    set.insert(OctreeKey::from_coords(x as u32, y as u32, z as u32, level));
                }
            }
        }
    }
    let mut keys: Vec<OctreeKey> = set.into_iter().collect();
    keys.sort_unstable_by_key(|k| k.code);
    keys
}

/// Per-layer forward cache of a block run.
pub struct LayerTrace {
    pub input: SparseFeatureMap,
    pub conv: SparseConvCache,
    pub relu_mask: Vec<bool>,
}

pub struct BlockTrace {
    pub layers: Vec<LayerTrace>,
}

/// Run a block on the propagated features of the previous level. `mixed`
/// lists the mixed cells at the input level; the output map covers exactly
/// their children (plus nothing else).
pub fn run_block_forward(
    input: &SparseFeatureMap,
    mixed: &[OctreeKey],
    spec: &BlockSpec,
    plan: &HaloPlan,
    params: &BlockParams,
) -> Result<(SparseFeatureMap, BlockTrace)> {
    if params.len() != spec.layers.len() {
        return Err(Error::Contract(format!(
            "{} parameter pairs for {} layers",
            params.len(),
            spec.layers.len()
        )));
    }
    if mixed.iter().any(|m| m.level != input.level()) {
        return Err(Error::Contract(
            "mixed cells must sit at the block input level".into(),
        ));
    }
    let mut current = input.clone();
    let mut traces = Vec::with_capacity(spec.layers.len());
    for (j, layer) in spec.layers.iter().enumerate() {
        let (interval, frame) = plan.layer_outputs[j];
        let out_keys = needed_output_keys(mixed, interval, frame, input.base());
        let (w, b) = params[j];
        let (mut out, conv) = ogn_conv(&current, w, b, layer, out_keys)?;
        let relu_mask = relu_slice(out.data_mut());
        traces.push(LayerTrace {
            input: current,
            conv,
            relu_mask,
        });
        current = out;
    }
    Ok((current, BlockTrace { layers: traces }))
}

/// Backward through a block. `grad_out` is row-aligned with the block's
/// output map. Returns the gradient on the block's input map plus per-layer
/// (weights, bias) gradients in layer order.
pub fn run_block_backward(
    spec: &BlockSpec,
    params: &BlockParams,
    trace: &BlockTrace,
    mut grad_out: SparseFeatureMap,
) -> Result<(SparseFeatureMap, Vec<(DenseTensor, DenseTensor)>)> {
    let mut layer_grads: Vec<Option<(DenseTensor, DenseTensor)>> =
        (0..spec.layers.len()).map(|_| None).collect();
    for (j, layer) in spec.layers.iter().enumerate().rev() {
        let lt = &trace.layers[j];
        for (g, &m) in grad_out.data_mut().iter_mut().zip(&lt.relu_mask) {
            if !m {
                *g = 0.0;
            }
        }
        let (w, _) = params[j];
        let (grad_in, gw, gb) = ogn_conv_backward(&lt.input, w, layer, &lt.conv, &grad_out)?;
        layer_grads[j] = Some((gw, gb));
        grad_out = grad_in;
    }
    Ok((
        grad_out,
        layer_grads.into_iter().map(|g| g.expect("filled")).collect(),
    ))
}
