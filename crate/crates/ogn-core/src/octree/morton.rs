//! Z-order (Morton) linearization of octree cells.
//!
//! A cell at level `l` with grid coordinates `(x, y, z)` is addressed by the
//! integer obtained by interleaving the coordinate bits: bit `i` of `x` lands
//! in code bit `3i`, `y` in `3i+1`, `z` in `3i+2`. The interleave is done with
//! the usual parallel bit-spread, so encoding is a handful of shifts and
//! masks. Coordinates up to 21 bits per axis fit in the 64-bit code.

use crate::error::{Error, Result};

/// Maximum bits per coordinate axis representable in a 64-bit code.
pub const MAX_AXIS_BITS: u32 = 21;

/// Spread the low 21 bits of `w` so consecutive bits are 3 apart.
#[inline]
fn spread(mut w: u64) -> u64 {
    w &= 0x0000_0000_001f_ffff;
    w = (w | w << 32) & 0x001f_0000_0000_ffff;
    w = (w | w << 16) & 0x001f_0000_ff00_00ff;
    w = (w | w << 8) & 0x010f_00f0_0f00_f00f;
    w = (w | w << 4) & 0x10c3_0c30_c30c_30c3;
    w = (w | w << 2) & 0x1249_2492_4924_9249;
    w
}

/// Inverse of [`spread`]: collect every third bit back into the low 21 bits.
#[inline]
fn compact(mut w: u64) -> u64 {
    w &= 0x1249_2492_4924_9249;
    w = (w ^ (w >> 2)) & 0x10c3_0c30_c30c_30c3;
    w = (w ^ (w >> 4)) & 0x010f_00f0_0f00_f00f;
    w = (w ^ (w >> 8)) & 0x001f_0000_ff00_00ff;
    w = (w ^ (w >> 16)) & 0x001f_0000_0000_ffff;
    w = (w ^ (w >> 32)) & 0x0000_0000_001f_ffff;
    w
}

/// Interleave three coordinates into a Z-order code (x lowest slot).
#[inline]
pub fn interleave(x: u32, y: u32, z: u32) -> u64 {
    spread(x as u64) | spread(y as u64) << 1 | spread(z as u64) << 2
}

/// Recover `(x, y, z)` from a Z-order code.
#[inline]
pub fn deinterleave(code: u64) -> (u32, u32, u32) {
    (
        compact(code) as u32,
        compact(code >> 1) as u32,
        compact(code >> 2) as u32,
    )
}

/// Address of one octree cell: subdivision level plus Z-order code within
/// that level's grid. Level 0 is the coarsest stored grid; each level doubles
/// the resolution per axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OctreeKey {
    pub level: u8,
    pub code: u64,
}

impl OctreeKey {
    #[inline]
    pub fn new(level: u8, code: u64) -> Self {
        OctreeKey { level, code }
    }

    /// Build a key from grid coordinates without a range check against any
    /// particular grid (coordinates must still fit 21 bits per axis).
    #[inline]
    pub fn from_coords(x: u32, y: u32, z: u32, level: u8) -> Self {
        debug_assert!(x < 1 << MAX_AXIS_BITS && y < 1 << MAX_AXIS_BITS && z < 1 << MAX_AXIS_BITS);
        OctreeKey {
            level,
            code: interleave(x, y, z),
        }
    }

    #[inline]
    pub fn coords(self) -> (u32, u32, u32) {
        deinterleave(self.code)
    }

    /// The containing cell `delta` levels up.
    #[inline]
    pub fn ancestor(self, delta: u8) -> Self {
        debug_assert!(delta <= self.level);
        let (x, y, z) = self.coords();
        OctreeKey::from_coords(x >> delta, y >> delta, z >> delta, self.level - delta)
    }

    /// The eight children of this cell at the next level, in Z order.
    pub fn children(self) -> [OctreeKey; 8] {
        let (x, y, z) = self.coords();
        let mut out = [OctreeKey::new(0, 0); 8];
        for (i, slot) in out.iter_mut().enumerate() {
            let dx = (i & 1) as u32;
            let dy = ((i >> 1) & 1) as u32;
            let dz = ((i >> 2) & 1) as u32;
            *slot = OctreeKey::from_coords(2 * x + dx, 2 * y + dy, 2 * z + dz, self.level + 1);
        }
        out
    }
}

/// Per-axis grid extents of one octree level, derived from the level-0 base
/// resolution (subdivision below level 0 is isotropic x2).
#[inline]
pub fn level_extent(base: [u32; 3], level: u8) -> [u32; 3] {
    [base[0] << level, base[1] << level, base[2] << level]
}

/// Encode coordinates at `level` of a grid with the given level-0 base
/// resolution, checking the coordinate range.
pub fn morton_encode(x: u32, y: u32, z: u32, level: u8, base: [u32; 3]) -> Result<OctreeKey> {
    let ext = level_extent(base, level);
    if x >= ext[0] || y >= ext[1] || z >= ext[2] {
        return Err(Error::Range(format!(
            "coordinates ({x}, {y}, {z}) outside {}x{}x{} grid at level {level}",
            ext[0], ext[1], ext[2]
        )));
    }
    if ext.iter().any(|&e| e > 1 << MAX_AXIS_BITS) {
        return Err(Error::Range(format!(
            "level {level} extent exceeds {} bits per axis",
            MAX_AXIS_BITS
        )));
    }
    Ok(OctreeKey::from_coords(x, y, z, level))
}

/// Decode a key back to `(x, y, z, level)`. Exact inverse of [`morton_encode`].
#[inline]
pub fn morton_decode(key: OctreeKey) -> (u32, u32, u32, u8) {
    let (x, y, z) = key.coords();
    (x, y, z, key.level)
}
