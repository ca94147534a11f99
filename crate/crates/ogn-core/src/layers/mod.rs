//! Sparse decoder layers over hash-table feature maps.
//!
//! A decoder block takes the previous level's propagated features, runs one
//! stride-2 up-convolution (possibly surrounded by stride-1 convolutions),
//! classifies every produced cell as empty / filled / mixed, and hands the
//! mixed cells plus their receptive-field halo to the next block. Convolution
//! is executed by gathering hash-table rows into a feature matrix,
//! multiplying by the layer's weight matrix, and scattering back; cells
//! absent from a map act as zero vectors.

pub mod block;
pub mod halo;
pub mod loss;
pub mod prop;
pub mod sparse_conv;

use crate::error::{Error, Result};
use crate::hash::KeyMap;
use crate::octree::morton::level_extent;
use crate::octree::{CellState, OctreeKey};

/// Sparse feature map at one octree level: sorted rows of `channels` values
/// keyed by cell, with a hash index for constant-time lookup.
#[derive(Clone, Debug)]
pub struct SparseFeatureMap {
    level: u8,
    channels: usize,
    base: [u32; 3],
    keys: Vec<OctreeKey>,
    data: Vec<f64>,
    index: KeyMap<OctreeKey, usize>,
}

impl SparseFeatureMap {
    /// Zero-initialized map over the given cells. Keys are deduplicated and
    /// sorted by code; all must sit at `level` inside the level grid.
    pub fn zeros(level: u8, channels: usize, base: [u32; 3], mut keys: Vec<OctreeKey>) -> Result<Self> {
        keys.sort_unstable_by_key(|k| k.code);
        keys.dedup();
        let ext = level_extent(base, level);
        let mut index = KeyMap::default();
        for (row, key) in keys.iter().enumerate() {
            if key.level != level {
                return Err(Error::Structure(format!(
                    "key at level {} in a level-{level} feature map",
                    key.level
                )));
            }
            let (x, y, z) = key.coords();
            if x >= ext[0] || y >= ext[1] || z >= ext[2] {
                return Err(Error::Range(format!(
                    "cell ({x},{y},{z}) outside level-{level} grid"
                )));
            }
            index.insert(*key, row);
        }
        let data = vec![0.0; keys.len() * channels];
        Ok(SparseFeatureMap {
            level,
            channels,
            base,
            keys,
            data,
            index,
        })
    }

    /// Map covering every cell of the level grid (the dense/octree boundary).
    pub fn complete(level: u8, channels: usize, base: [u32; 3]) -> Result<Self> {
        let ext = level_extent(base, level);
        let mut keys = Vec::with_capacity((ext[0] * ext[1] * ext[2]) as usize);
        for x in 0..ext[0] {
            for y in 0..ext[1] {
                for z in 0..ext[2] {
                    keys.push(OctreeKey::from_coords(x, y, z, level));
                }
            }
        }
        SparseFeatureMap::zeros(level, channels, base, keys)
    }

    #[inline]
    pub fn level(&self) -> u8 {
        self.level
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn base(&self) -> [u32; 3] {
        self.base
    }

    /// Grid extents of this map's level.
    #[inline]
    pub fn resolution(&self) -> [u32; 3] {
        level_extent(self.base, self.level)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys in ascending code order; row `i` of the data belongs to `keys()[i]`.
    #[inline]
    pub fn keys(&self) -> &[OctreeKey] {
        &self.keys
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn row_of(&self, key: &OctreeKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    #[inline]
    pub fn contains(&self, key: &OctreeKey) -> bool {
        self.index.contains_key(key)
    }

    /// Feature vector of a cell, `None` when absent (semantically zero).
    pub fn get(&self, key: &OctreeKey) -> Option<&[f64]> {
        self.row_of(key)
            .map(|r| &self.data[r * self.channels..(r + 1) * self.channels])
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.channels..(row + 1) * self.channels]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.channels..(row + 1) * self.channels]
    }

    /// A zero map with the same keys, level, and channel count.
    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        out.data.fill(0.0);
        out
    }

    /// A zero map with the same keys but a different channel count.
    pub fn zeros_like_with_channels(&self, channels: usize) -> Self {
        SparseFeatureMap {
            level: self.level,
            channels,
            base: self.base,
            keys: self.keys.clone(),
            data: vec![0.0; self.keys.len() * channels],
            index: self.index.clone(),
        }
    }

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
}

/// Per-cell three-way prediction: probabilities of (empty, filled, mixed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPrediction {
    pub key: OctreeKey,
    pub probs: [f64; 3],
}

impl CellPrediction {
    /// Argmax state with deterministic tie-breaking that keeps resolution
    /// when uncertain: mixed beats filled beats empty on exact ties.
    pub fn predicted_state(&self) -> CellState {
        let mut best = CellState::Mixed;
        let mut best_p = self.probs[2];
        if self.probs[1] > best_p {
            best = CellState::Filled;
            best_p = self.probs[1];
        }
        if self.probs[0] > best_p {
            best = CellState::Empty;
        }
        best
    }
}

/// Kind of one layer inside an octree block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Upconv,
}

/// One (up-)convolutional layer of an octree block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub kernel: usize,
    pub stride: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl LayerSpec {
    /// Shape of this layer's weight tensor: `[Co, Ci, k, k, k]` for conv,
    /// `[Ci, Co, k, k, k]` for upconv.
    pub fn weight_shape(&self) -> [usize; 5] {
        match self.kind {
            LayerKind::Conv => [self.c_out, self.c_in, self.kernel, self.kernel, self.kernel],
            LayerKind::Upconv => [self.c_in, self.c_out, self.kernel, self.kernel, self.kernel],
        }
    }
}

/// Ordered layer list of one octree block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub layers: Vec<LayerSpec>,
}

impl BlockSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("octree block with no layers".into()));
        }
        let upconvs = self
            .layers
            .iter()
            .filter(|l| l.kind == LayerKind::Upconv)
            .count();
        if upconvs != 1 {
            return Err(Error::Config(format!(
                "octree block must contain exactly one up-convolution, found {upconvs}"
            )));
        }
        for layer in &self.layers {
            match layer.kind {
                LayerKind::Upconv => {
                    if layer.stride != 2 {
                        return Err(Error::Config(format!(
                            "unsupported up-convolution stride {} (blocks double resolution)",
                            layer.stride
                        )));
                    }
                    if layer.kernel < layer.stride {
                        return Err(Error::Config(
                            "up-convolution kernel smaller than stride leaves gaps".into(),
                        ));
                    }
                }
                LayerKind::Conv => {
                    if layer.stride != 1 {
                        return Err(Error::Config(format!(
                            "unsupported convolution stride {} inside an octree block",
                            layer.stride
                        )));
                    }
                    if layer.kernel % 2 == 0 {
                        return Err(Error::Config(
                            "octree-block convolutions need odd kernels (shape-preserving)".into(),
                        ));
                    }
                }
            }
        }
        for pair in self.layers.windows(2) {
            if pair[0].c_out != pair[1].c_in {
                return Err(Error::Config(format!(
                    "channel chain broken: {} out feeds {} in",
                    pair[0].c_out, pair[1].c_in
                )));
            }
        }
        Ok(())
    }

    pub fn c_in(&self) -> usize {
        self.layers.first().map(|l| l.c_in).unwrap_or(0)
    }

    pub fn c_out(&self) -> usize {
        self.layers.last().map(|l| l.c_out).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_keys_are_sorted_and_indexed() {
        let keys = vec![
            OctreeKey::from_coords(1, 1, 1, 1),
            OctreeKey::from_coords(0, 0, 0, 1),
        ];
        let m = SparseFeatureMap::zeros(1, 2, [1, 1, 1], keys).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m.keys()[0].code < m.keys()[1].code);
        assert_eq!(m.row_of(&OctreeKey::from_coords(0, 0, 0, 1)), Some(0));
        assert!(m.get(&OctreeKey::from_coords(1, 0, 0, 1)).is_none());
    }

    #[test]
    fn wrong_level_key_is_rejected() {
        let keys = vec![OctreeKey::from_coords(0, 0, 0, 2)];
        assert!(SparseFeatureMap::zeros(1, 2, [1, 1, 1], keys).is_err());
    }

    #[test]
    fn out_of_grid_key_is_rejected() {
        let keys = vec![OctreeKey::from_coords(2, 0, 0, 1)];
        assert!(SparseFeatureMap::zeros(1, 2, [1, 1, 1], keys).is_err());
    }

    #[test]
    fn tie_breaking_keeps_resolution() {
        let k = OctreeKey::from_coords(0, 0, 0, 0);
        let uniform = CellPrediction { key: k, probs: [1.0 / 3.0; 3] };
        assert_eq!(uniform.predicted_state(), CellState::Mixed);
        let fe_tie = CellPrediction { key: k, probs: [0.4, 0.4, 0.2] };
        assert_eq!(fe_tie.predicted_state(), CellState::Filled);
        let clear = CellPrediction { key: k, probs: [0.6, 0.3, 0.1] };
        assert_eq!(clear.predicted_state(), CellState::Empty);
    }

    #[test]
    fn block_spec_requires_one_stride2_upconv() {
        let conv = LayerSpec { kind: LayerKind::Conv, kernel: 3, stride: 1, c_in: 4, c_out: 4 };
        let up = LayerSpec { kind: LayerKind::Upconv, kernel: 2, stride: 2, c_in: 4, c_out: 4 };
        assert!(BlockSpec { layers: vec![up, conv] }.validate().is_ok());
        assert!(BlockSpec { layers: vec![conv] }.validate().is_err());
        assert!(BlockSpec { layers: vec![up, up] }.validate().is_err());
        let bad_stride = LayerSpec { kind: LayerKind::Upconv, kernel: 3, stride: 3, c_in: 4, c_out: 4 };
        assert!(BlockSpec { layers: vec![bad_stride] }.validate().is_err());
    }
}
