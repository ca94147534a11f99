//! Hash-table-backed binary occupancy octrees.
//!
//! An octree is stored as a flat map from [`OctreeKey`] to leaf state. The
//! subdivision process starts from an initial coarse grid (the level-0 base
//! resolution, which may be anisotropic) rather than a single root cell; each
//! base cell is an independent subdivision root. A cell is only subdivided
//! when its region mixes filled and empty voxels, so stored leaves are always
//! maximal uniform regions and conversion to and from dense voxel grids is
//! lossless.

pub mod format;
pub mod morton;

use crate::error::{Error, Result};
use crate::hash::KeyMap;
pub use morton::{morton_decode, morton_encode, OctreeKey};

/// Three-way cell state. `Mixed` marks a cell that is subdivided further and
/// therefore has no single occupancy value (the "unavailable" query outcome).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Empty,
    Filled,
    Mixed,
}

impl CellState {
    /// Serialized class index: 0 empty, 1 filled, 2 mixed.
    #[inline]
    pub fn class_index(self) -> usize {
        match self {
            CellState::Empty => 0,
            CellState::Filled => 1,
            CellState::Mixed => 2,
        }
    }

    pub fn from_class_index(idx: usize) -> Result<Self> {
        match idx {
            0 => Ok(CellState::Empty),
            1 => Ok(CellState::Filled),
            2 => Ok(CellState::Mixed),
            _ => Err(Error::Range(format!("invalid cell state index {idx}"))),
        }
    }
}

/// Dense binary occupancy grid, one bit per voxel.
#[derive(Clone, PartialEq, Eq)]
pub struct VoxelGrid {
    resolution: [u32; 3],
    bits: Vec<u64>,
}

impl std::fmt::Debug for VoxelGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "VoxelGrid({}x{}x{}, {} filled)",
            self.resolution[0],
            self.resolution[1],
            self.resolution[2],
            self.count_filled()
        )
    }
}

impl VoxelGrid {
    pub fn new(resolution: [u32; 3]) -> Self {
        let n = resolution.iter().map(|&r| r as usize).product::<usize>();
        VoxelGrid {
            resolution,
            bits: vec![0; n.div_ceil(64)],
        }
    }

    #[inline]
    pub fn resolution(&self) -> [u32; 3] {
        self.resolution
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.resolution.iter().map(|&r| r as usize).product()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    fn index(&self, x: u32, y: u32, z: u32) -> usize {
        debug_assert!(x < self.resolution[0] && y < self.resolution[1] && z < self.resolution[2]);
        ((x as usize * self.resolution[1] as usize) + y as usize) * self.resolution[2] as usize
            + z as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, z: u32) -> bool {
        let i = self.index(x, y, z);
        self.bits[i >> 6] >> (i & 63) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, z: u32, value: bool) {
        let i = self.index(x, y, z);
        if value {
            self.bits[i >> 6] |= 1 << (i & 63);
        } else {
            self.bits[i >> 6] &= !(1 << (i & 63));
        }
    }

    pub fn count_filled(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Iterate voxels in (x, y, z) row-major order (z fastest).
    pub fn iter_values(&self) -> impl Iterator<Item = bool> + '_ {
        let [rx, ry, rz] = self.resolution;
        (0..rx).flat_map(move |x| {
            (0..ry).flat_map(move |y| (0..rz).map(move |z| self.get(x, y, z)))
        })
    }
}

/// Binary occupancy octree over a (possibly anisotropic) level-0 base grid.
#[derive(Clone, Debug)]
pub struct Octree {
    base: [u32; 3],
    max_level: u8,
    cells: KeyMap<OctreeKey, CellState>,
}

impl Octree {
    pub fn new(base: [u32; 3], max_level: u8) -> Self {
        Octree {
            base,
            max_level,
            cells: KeyMap::default(),
        }
    }

    #[inline]
    pub fn base_resolution(&self) -> [u32; 3] {
        self.base
    }

    #[inline]
    pub fn max_level(&self) -> u8 {
        self.max_level
    }

    /// Level of the coarsest stored leaf (0 for an octree with no cells).
    pub fn min_level(&self) -> u8 {
        self.cells.keys().map(|k| k.level).min().unwrap_or(0)
    }

    /// Resolution of the finest level, `base * 2^max_level`.
    pub fn finest_resolution(&self) -> [u32; 3] {
        morton::level_extent(self.base, self.max_level)
    }

    #[inline]
    pub fn leaf_count(&self) -> usize {
        self.cells.len()
    }

    /// Insert a leaf. Leaves store occupancy only; `Mixed` is represented by
    /// absence plus deeper leaves, never stored.
    pub fn insert_leaf(&mut self, key: OctreeKey, state: CellState) -> Result<()> {
        if state == CellState::Mixed {
            return Err(Error::Structure(
                "mixed cells are not stored as leaves".into(),
            ));
        }
        if key.level > self.max_level {
            return Err(Error::Range(format!(
                "leaf level {} exceeds max level {}",
                key.level, self.max_level
            )));
        }
        self.cells.insert(key, state);
        Ok(())
    }

    #[inline]
    pub fn leaf(&self, key: &OctreeKey) -> Option<CellState> {
        self.cells.get(key).copied()
    }

    pub fn leaves(&self) -> impl Iterator<Item = (OctreeKey, CellState)> + '_ {
        self.cells.iter().map(|(k, v)| (*k, *v))
    }

    /// Leaves sorted by (level, code); the canonical order for serialization
    /// and any other order-sensitive output.
    pub fn sorted_leaves(&self) -> Vec<(OctreeKey, CellState)> {
        let mut v: Vec<_> = self.leaves().collect();
        v.sort_unstable_by_key(|(k, _)| (k.level, k.code));
        v
    }

    /// State of the cell `(x, y, z)` at `level`: the value stored at the cell
    /// itself or its nearest stored ancestor, or `Mixed` when the region is
    /// subdivided below the queried level.
    pub fn query(&self, x: u32, y: u32, z: u32, level: u8) -> CellState {
        let ext = morton::level_extent(self.base, level);
        debug_assert!(x < ext[0] && y < ext[1] && z < ext[2], "query out of range");
        for delta in 0..=level {
            let key = OctreeKey::from_coords(x >> delta, y >> delta, z >> delta, level - delta);
            if let Some(state) = self.cells.get(&key) {
                return *state;
            }
        }
        CellState::Mixed
    }

    #[inline]
    pub fn query_key(&self, key: OctreeKey) -> CellState {
        let (x, y, z) = key.coords();
        self.query(x, y, z, key.level)
    }

    /// Ground-truth labels for a batch of cells: element-wise [`Self::query_key`].
    pub fn gt_labels(&self, cells: &[OctreeKey]) -> Vec<CellState> {
        cells.iter().map(|&k| self.query_key(k)).collect()
    }

    /// Subdivided (internal) cells at `level`, i.e. cells whose region is
    /// split below that level. Sorted by code.
    pub fn internal_cells(&self, level: u8) -> Vec<OctreeKey> {
        let mut set = crate::hash::KeySet::default();
        for key in self.cells.keys() {
            if key.level > level {
                set.insert(key.ancestor(key.level - level));
            }
        }
        let mut v: Vec<_> = set.into_iter().collect();
        v.sort_unstable_by_key(|k| k.code);
        v
    }

    /// Stored leaves per level, ascending, levels with no leaves omitted.
    pub fn cells_per_level(&self) -> Vec<(u8, usize)> {
        let mut counts = vec![0usize; self.max_level as usize + 1];
        for key in self.cells.keys() {
            counts[key.level as usize] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(l, c)| (l as u8, c))
            .collect()
    }

    /// Convert a voxel grid to its minimal octree. The grid resolution must
    /// be `base * 2^L` on every axis for one common `L`.
    pub fn from_voxel_grid(grid: &VoxelGrid, base: [u32; 3]) -> Result<Self> {
        let res = grid.resolution();
        if base.iter().any(|&b| b == 0) {
            return Err(Error::Shape("base resolution axis of zero".into()));
        }
        let mut level_depth = None;
        for axis in 0..3 {
            let (r, b) = (res[axis], base[axis]);
            if r < b || r % b != 0 || !(r / b).is_power_of_two() {
                return Err(Error::Shape(format!(
                    "grid resolution {r} is not base {b} times a power of two"
                )));
            }
            let depth = (r / b).trailing_zeros() as u8;
            if *level_depth.get_or_insert(depth) != depth {
                return Err(Error::Shape(
                    "axes disagree on subdivision depth".into(),
                ));
            }
        }
        let max_level = level_depth.unwrap();
        let mut tree = Octree::new(base, max_level);
        for bx in 0..base[0] {
            for by in 0..base[1] {
                for bz in 0..base[2] {
                    tree.subdivide(grid, OctreeKey::from_coords(bx, by, bz, 0));
                }
            }
        }
        Ok(tree)
    }

    fn subdivide(&mut self, grid: &VoxelGrid, cell: OctreeKey) {
        match self.region_uniform(grid, cell) {
            Some(filled) => {
                let state = if filled { CellState::Filled } else { CellState::Empty };
                self.cells.insert(cell, state);
            }
            None => {
                for child in cell.children() {
                    self.subdivide(grid, child);
                }
            }
        }
    }

    /// `Some(value)` when every voxel below `cell` has the same value.
    fn region_uniform(&self, grid: &VoxelGrid, cell: OctreeKey) -> Option<bool> {
        let side = 1u32 << (self.max_level - cell.level);
        let (cx, cy, cz) = cell.coords();
        let (x0, y0, z0) = (cx * side, cy * side, cz * side);
        let first = grid.get(x0, y0, z0);
        for x in x0..x0 + side {
            for y in y0..y0 + side {
                for z in z0..z0 + side {
                    if grid.get(x, y, z) != first {
                        return None;
                    }
                }
            }
        }
        Some(first)
    }

    /// Paint every leaf onto a dense grid at the finest resolution. Fails
    /// when the leaf set does not tile the volume exactly.
    pub fn to_voxel_grid(&self) -> Result<VoxelGrid> {
        let res = self.finest_resolution();
        let mut grid = VoxelGrid::new(res);
        let mut covered = VoxelGrid::new(res);
        for (key, state) in self.leaves() {
            let side = 1u32 << (self.max_level - key.level);
            let (cx, cy, cz) = key.coords();
            let (x0, y0, z0) = (cx * side, cy * side, cz * side);
            if x0 + side > res[0] || y0 + side > res[1] || z0 + side > res[2] {
                return Err(Error::Structure(format!(
                    "leaf at level {} code {} extends outside the volume",
                    key.level, key.code
                )));
            }
            let filled = state == CellState::Filled;
            for x in x0..x0 + side {
                for y in y0..y0 + side {
                    for z in z0..z0 + side {
                        if covered.get(x, y, z) {
                            return Err(Error::Structure(
                                "overlapping leaves (stored cell has a stored ancestor)".into(),
                            ));
                        }
                        covered.set(x, y, z, true);
                        if filled {
                            grid.set(x, y, z, true);
                        }
                    }
                }
            }
        }
        if covered.count_filled() != covered.len() {
            return Err(Error::Structure(format!(
                "leaves cover {} of {} voxels",
                covered.count_filled(),
                covered.len()
            )));
        }
        Ok(grid)
    }

    /// Structural validation: every leaf in range, no leaf an ancestor of
    /// another, and leaf extents tile the volume exactly.
    pub fn validate(&self) -> Result<()> {
        let mut finest_total: u64 = 0;
        for key in self.cells.keys() {
            let ext = morton::level_extent(self.base, key.level);
            let (x, y, z) = key.coords();
            if x >= ext[0] || y >= ext[1] || z >= ext[2] {
                return Err(Error::Structure(format!(
                    "leaf code {} outside level-{} grid",
                    key.code, key.level
                )));
            }
            for delta in 1..=key.level {
                if self.cells.contains_key(&key.ancestor(delta)) {
                    return Err(Error::Structure(
                        "stored cell is an ancestor of another stored cell".into(),
                    ));
                }
            }
            finest_total += 1u64 << (3 * (self.max_level - key.level));
        }
        let res = self.finest_resolution();
        let expect = res.iter().map(|&r| r as u64).product::<u64>();
        if finest_total != expect {
            return Err(Error::Structure(format!(
                "leaf extents cover {finest_total} of {expect} finest-level voxels"
            )));
        }
        Ok(())
    }

    /// True when no eight siblings share one value (nothing left to merge).
    pub fn is_minimal(&self) -> bool {
        let mut by_parent: KeyMap<OctreeKey, (usize, usize)> = KeyMap::default();
        for (key, state) in self.leaves() {
            if key.level == 0 {
                continue;
            }
            let entry = by_parent.entry(key.ancestor(1)).or_insert((0, 0));
            entry.0 += 1;
            if state == CellState::Filled {
                entry.1 += 1;
            }
        }
        by_parent
            .values()
            .all(|&(total, filled)| total < 8 || (filled != 0 && filled != 8))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_grid(res: u32, radius: f64) -> VoxelGrid {
        let mut g = VoxelGrid::new([res; 3]);
        let c = res as f64 / 2.0;
        for x in 0..res {
            for y in 0..res {
                for z in 0..res {
                    let d = [x, y, z]
                        .iter()
                        .map(|&v| (v as f64 + 0.5 - c).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    if d <= radius {
                        g.set(x, y, z, true);
                    }
                }
            }
        }
        g
    }

    /// Reference subdivider: recursion over explicit voxel boxes, no Morton
    /// keys, no shared code with `Octree::from_voxel_grid`.
    fn reference_leaf_count(grid: &VoxelGrid, base: [u32; 3]) -> usize {
        fn count(grid: &VoxelGrid, x0: u32, y0: u32, z0: u32, side: u32) -> usize {
            let first = grid.get(x0, y0, z0);
            let mut uniform = true;
            'scan: for x in x0..x0 + side {
                for y in y0..y0 + side {
                    for z in z0..z0 + side {
                        if grid.get(x, y, z) != first {
                            uniform = false;
                            break 'scan;
                        }
                    }
                }
            }
            if uniform {
                1
            } else {
                let h = side / 2;
                let mut total = 0;
                for dx in [0, h] {
                    for dy in [0, h] {
                        for dz in [0, h] {
                            total += count(grid, x0 + dx, y0 + dy, z0 + dz, h);
                        }
                    }
                }
                total
            }
        }
        let side = grid.resolution()[0] / base[0];
        let mut total = 0;
        for bx in 0..base[0] {
            for by in 0..base[1] {
                for bz in 0..base[2] {
                    total += count(grid, bx * side, by * side, bz * side, side);
                }
            }
        }
        total
    }

    #[test]
    fn uniform_grid_collapses_to_base_cells() {
        let mut g = VoxelGrid::new([4, 4, 4]);
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    g.set(x, y, z, true);
                }
            }
        }
        let t = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();
        assert_eq!(t.leaf_count(), 1);
        assert_eq!(t.cells_per_level(), vec![(0, 1)]);
        assert_eq!(t.to_voxel_grid().unwrap(), g);

        let t4 = Octree::from_voxel_grid(&g, [4, 4, 4]).unwrap();
        assert_eq!(t4.leaf_count(), 64);
    }

    #[test]
    fn checkerboard_subdivides_fully() {
        let mut g = VoxelGrid::new([2, 2, 2]);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    g.set(x, y, z, (x + y + z) % 2 == 0);
                }
            }
        }
        let t = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();
        assert_eq!(t.cells_per_level(), vec![(1, 8)]);
        let filled = t
            .leaves()
            .filter(|&(_, s)| s == CellState::Filled)
            .count();
        assert_eq!(filled, 4);
        assert_eq!(t.to_voxel_grid().unwrap(), g);
    }

    #[test]
    fn sphere_matches_reference_subdivider() {
        let g = sphere_grid(16, 6.0);
        let t = Octree::from_voxel_grid(&g, [2, 2, 2]).unwrap();
        assert_eq!(t.leaf_count(), reference_leaf_count(&g, [2, 2, 2]));
        assert_eq!(t.to_voxel_grid().unwrap(), g);
        assert!(t.is_minimal());
        t.validate().unwrap();

        let per_level: usize = t.cells_per_level().iter().map(|&(_, c)| c).sum();
        assert_eq!(per_level, t.leaf_count());
    }

    #[test]
    fn query_returns_ancestor_value_or_mixed() {
        let mut root_filled = Octree::new([1, 1, 1], 2);
        root_filled
            .insert_leaf(OctreeKey::from_coords(0, 0, 0, 0), CellState::Filled)
            .unwrap();
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(root_filled.query(x, y, 1, 2), CellState::Filled);
            }
        }

        // One filled octant in a 4^3 grid: level-1 queries see one filled,
        // seven empty; the level-0 root is subdivided, hence mixed.
        let mut g = VoxelGrid::new([4, 4, 4]);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    g.set(x, y, z, true);
                }
            }
        }
        let t = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();
        let mut filled = 0;
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    match t.query(x, y, z, 1) {
                        CellState::Filled => filled += 1,
                        CellState::Empty => {}
                        CellState::Mixed => panic!("level-1 octants are uniform here"),
                    }
                }
            }
        }
        assert_eq!(filled, 1);
        assert_eq!(t.query(0, 0, 0, 0), CellState::Mixed);
    }

    #[test]
    fn non_power_of_two_ratio_is_rejected() {
        let g = VoxelGrid::new([6, 6, 6]);
        assert!(matches!(
            Octree::from_voxel_grid(&g, [2, 2, 2]),
            Err(Error::Shape(_))
        ));
        assert!(Octree::from_voxel_grid(&g, [6, 6, 6]).is_ok());
        assert!(Octree::from_voxel_grid(&g, [3, 3, 3]).is_ok());
    }

    #[test]
    fn to_voxel_grid_rejects_partial_cover() {
        let mut t = Octree::new([1, 1, 1], 1);
        t.insert_leaf(OctreeKey::from_coords(0, 0, 0, 1), CellState::Filled)
            .unwrap();
        assert!(matches!(t.to_voxel_grid(), Err(Error::Structure(_))));
        assert!(t.validate().is_err());
    }

    #[test]
    fn gt_labels_match_queries() {
        let g = sphere_grid(8, 3.0);
        let t = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();
        let keys = vec![
            OctreeKey::from_coords(0, 0, 0, 0),
            OctreeKey::from_coords(1, 1, 1, 1),
            OctreeKey::from_coords(3, 3, 3, 3),
        ];
        let labels = t.gt_labels(&keys);
        for (k, l) in keys.iter().zip(&labels) {
            assert_eq!(t.query_key(*k), *l);
        }
    }

    #[test]
    fn internal_cells_are_parents_of_deeper_leaves() {
        let g = sphere_grid(8, 3.0);
        let t = Octree::from_voxel_grid(&g, [2, 2, 2]).unwrap();
        for level in 0..t.max_level() {
            for key in t.internal_cells(level) {
                assert_eq!(t.query_key(key), CellState::Mixed);
            }
        }
    }
}
