//! Feature propagation between octree blocks.
//!
//! Only mixed cells carry information the next block needs, plus whatever
//! neighbors the next block's filters reach (its halo interval). Which cells
//! count as mixed comes either from the ground-truth tree or from the
//! network's own predictions.

use super::halo::Interval;
use super::{CellPrediction, SparseFeatureMap};
use crate::error::{Error, Result};
use crate::hash::KeySet;
use crate::octree::morton::level_extent;
use crate::octree::{CellState, Octree, OctreeKey};

/// Where the subdivision decision comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PropMode {
    /// Ground-truth tree structure drives propagation.
    Known,
    /// The network's own mixed predictions drive propagation.
    Pred,
}

/// Select the features the next block needs: cells judged mixed plus every
/// existing cell within `halo` offsets (per axis) of a mixed cell. Returns
/// the filtered map and the sorted mixed cells.
pub fn propagate(
    features: &SparseFeatureMap,
    preds: &[CellPrediction],
    mode: PropMode,
    gt: Option<&Octree>,
    halo: Interval,
) -> Result<(SparseFeatureMap, Vec<OctreeKey>)> {
    let mut mixed: Vec<OctreeKey> = match mode {
        PropMode::Known => {
            let gt = gt.ok_or_else(|| {
                Error::Contract("propagate in known mode requires a ground-truth octree".into())
            })?;
            preds
                .iter()
                .map(|p| p.key)
                .filter(|&k| gt.query_key(k) == CellState::Mixed)
                .collect()
        }
        PropMode::Pred => preds
            .iter()
            .filter(|p| p.predicted_state() == CellState::Mixed)
            .map(|p| p.key)
            .collect(),
    };
    mixed.sort_unstable_by_key(|k| k.code);
    mixed.dedup();

    let ext = level_extent(features.base(), features.level());
    let mut selected: KeySet<OctreeKey> = KeySet::default();
    for m in &mixed {
        let (mx, my, mz) = m.coords();
        for dx in halo.lo..=halo.hi {
            let x = mx as i64 + dx;
            if x < 0 || x as u32 >= ext[0] {
                continue;
            }
            for dy in halo.lo..=halo.hi {
                let y = my as i64 + dy;
                if y < 0 || y as u32 >= ext[1] {
                    continue;
                }
                for dz in halo.lo..=halo.hi {
                    let z = mz as i64 + dz;
                    if z < 0 || z as u32 >= ext[2] {
                        continue;
                    }
                    let key = OctreeKey::from_coords(x as u32, y as u32, z as u32, features.level());
                    if features.contains(&key) {
                        selected.insert(key);
                    }
                }
            }
        }
    }

    let keys: Vec<OctreeKey> = selected.into_iter().collect();
    let mut out = SparseFeatureMap::zeros(
        features.level(),
        features.channels(),
        features.base(),
        keys,
    )?;
    for row in 0..out.len() {
        let key = out.keys()[row];
        let src = features.row_of(&key).expect("selected from features");
        let c = features.channels();
        out.data_mut()[row * c..(row + 1) * c].copy_from_slice(features.row(src));
    }
    Ok((out, mixed))
}

/// Route a gradient on the propagated map back onto the source map's rows
/// (identity on selected cells, zero elsewhere).
pub fn propagate_backward(
    source: &SparseFeatureMap,
    grad_propagated: &SparseFeatureMap,
) -> SparseFeatureMap {
    let mut grad = source.zeros_like();
    let c = source.channels();
    for row in 0..grad_propagated.len() {
        let key = grad_propagated.keys()[row];
        if let Some(src) = source.row_of(&key) {
            let dst = &mut grad.data_mut()[src * c..(src + 1) * c];
            for (d, g) in dst.iter_mut().zip(grad_propagated.row(row)) {
                *d += g;
            }
        }
    }
    grad
}
