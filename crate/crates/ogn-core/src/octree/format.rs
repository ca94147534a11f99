//! Binary octree file format.
//!
//! Layout (little-endian):
//! ```text
//! magic "OGN1"        4 bytes
//! d1, d2, d3          u32 each, level-0 base resolution
//! max_level           u8
//! leaf_count          u64
//! per leaf            u8 level, u64 code, u8 value (0 empty / 1 filled)
//! ```
//! Leaves are written sorted by (level, code), so serialization is a pure
//! function of the octree contents.

use super::{CellState, Octree, OctreeKey};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OGN1";

pub fn serialize(tree: &Octree) -> Vec<u8> {
    let leaves = tree.sorted_leaves();
    let mut out = Vec::with_capacity(4 + 12 + 1 + 8 + leaves.len() * 10);
    out.extend_from_slice(MAGIC);
    for &d in &tree.base_resolution() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.push(tree.max_level());
    out.extend_from_slice(&(leaves.len() as u64).to_le_bytes());
    for (key, state) in leaves {
        out.push(key.level);
        out.extend_from_slice(&key.code.to_le_bytes());
        out.push(state.class_index() as u8);
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::parse_at("unexpected end of octree data", self.pos));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn deserialize(bytes: &[u8]) -> Result<Octree> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::parse_at("bad magic, expected \"OGN1\"", 0));
    }
    let base = [cur.u32()?, cur.u32()?, cur.u32()?];
    let max_level = cur.u8()?;
    let count = cur.u64()?;
    // 10 bytes per leaf; reject counts the buffer cannot possibly hold.
    if count > (bytes.len() as u64) / 10 + 1 {
        return Err(Error::parse_at(
            format!("leaf count {count} larger than file"),
            cur.pos - 8,
        ));
    }
    let mut tree = Octree::new(base, max_level);
    for _ in 0..count {
        let at = cur.pos;
        let level = cur.u8()?;
        let code = cur.u64()?;
        let value = cur.u8()?;
        let state = CellState::from_class_index(value as usize)
            .map_err(|_| Error::parse_at(format!("invalid leaf value {value}"), at + 9))?;
        if state == CellState::Mixed {
            return Err(Error::parse_at("mixed leaf in octree file", at + 9));
        }
        tree.insert_leaf(OctreeKey::new(level, code), state)
            .map_err(|e| Error::parse_at(format!("invalid leaf: {e}"), at))?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::parse_at("trailing bytes after leaf table", cur.pos));
    }
    tree.validate()
        .map_err(|e| Error::parse(format!("octree fails validation: {e}")))?;
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::octree::VoxelGrid;

    fn example_trees() -> Vec<Octree> {
        let mut all_ones = VoxelGrid::new([4, 4, 4]);
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    all_ones.set(x, y, z, true);
                }
            }
        }
        let mut checker = VoxelGrid::new([2, 2, 2]);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    checker.set(x, y, z, (x + y + z) % 2 == 0);
                }
            }
        }
        let mut sphere = VoxelGrid::new([16, 16, 16]);
        for x in 0..16u32 {
            for y in 0..16u32 {
                for z in 0..16u32 {
                    let d: f64 = [x, y, z]
                        .iter()
                        .map(|&v| (v as f64 + 0.5 - 8.0).powi(2))
                        .sum();
                    sphere.set(x, y, z, d.sqrt() <= 6.0);
                }
            }
        }
        vec![
            Octree::from_voxel_grid(&all_ones, [1, 1, 1]).unwrap(),
            Octree::from_voxel_grid(&checker, [1, 1, 1]).unwrap(),
            Octree::from_voxel_grid(&sphere, [2, 2, 2]).unwrap(),
        ]
    }

    #[test]
    fn roundtrip_is_exact() {
        for tree in example_trees() {
            let bytes = serialize(&tree);
            let back = deserialize(&bytes).unwrap();
            assert_eq!(back.base_resolution(), tree.base_resolution());
            assert_eq!(back.max_level(), tree.max_level());
            assert_eq!(back.sorted_leaves(), tree.sorted_leaves());
            // Deterministic bytes as well.
            assert_eq!(serialize(&back), bytes);
        }
    }

    #[test]
    fn bad_magic_is_a_parse_error() {
        let mut bytes = serialize(&example_trees()[0]);
        bytes[0] = b'X';
        assert!(matches!(
            deserialize(&bytes),
            Err(Error::Parse { offset: Some(0), .. })
        ));
    }

    #[test]
    fn truncation_is_a_parse_error() {
        let bytes = serialize(&example_trees()[2]);
        for cut in [3, 10, 17, bytes.len() - 1] {
            assert!(matches!(
                deserialize(&bytes[..cut]),
                Err(Error::Parse { .. })
            ));
        }
    }

    #[test]
    fn non_tiling_leaf_set_is_rejected() {
        let mut tree = Octree::new([1, 1, 1], 1);
        tree.insert_leaf(OctreeKey::from_coords(0, 0, 0, 1), CellState::Filled)
            .unwrap();
        let bytes = serialize(&tree);
        assert!(deserialize(&bytes).is_err());
    }
}
