//! Solid occupancy from surface voxelizations.

use crate::octree::VoxelGrid;

/// Mark every voxel not reachable from the boundary as filled, leaving
/// surface voxels untouched. Exterior reachability uses 6-connectivity so
/// diagonal gaps in a voxelized surface do not leak into cavities.
/// Idempotent, and never clears an already-filled voxel.
pub fn fill_interior(grid: &VoxelGrid) -> VoxelGrid {
    let [rx, ry, rz] = grid.resolution();
    let mut exterior = VoxelGrid::new([rx, ry, rz]);
    let mut queue: std::collections::VecDeque<(u32, u32, u32)> = Default::default();

    let mut seed = |g: &VoxelGrid, ext: &mut VoxelGrid, q: &mut std::collections::VecDeque<(u32, u32, u32)>, x: u32, y: u32, z: u32| {
        if !g.get(x, y, z) && !ext.get(x, y, z) {
            ext.set(x, y, z, true);
            q.push_back((x, y, z));
        }
    };
    for x in 0..rx {
        for y in 0..ry {
            seed(grid, &mut exterior, &mut queue, x, y, 0);
            seed(grid, &mut exterior, &mut queue, x, y, rz - 1);
        }
        for z in 0..rz {
            seed(grid, &mut exterior, &mut queue, x, 0, z);
            seed(grid, &mut exterior, &mut queue, x, ry - 1, z);
        }
    }
    for y in 0..ry {
        for z in 0..rz {
            seed(grid, &mut exterior, &mut queue, 0, y, z);
            seed(grid, &mut exterior, &mut queue, rx - 1, y, z);
        }
    }

    while let Some((x, y, z)) = queue.pop_front() {
        let neighbors = [
            (x.wrapping_sub(1), y, z),
            (x + 1, y, z),
            (x, y.wrapping_sub(1), z),
            (x, y + 1, z),
            (x, y, z.wrapping_sub(1)),
            (x, y, z + 1),
        ];
        for (nx, ny, nz) in neighbors {
            if nx < rx && ny < ry && nz < rz && !grid.get(nx, ny, nz) && !exterior.get(nx, ny, nz) {
                exterior.set(nx, ny, nz, true);
                queue.push_back((nx, ny, nz));
            }
        }
    }

    let mut out = VoxelGrid::new([rx, ry, rz]);
    for x in 0..rx {
        for y in 0..ry {
            for z in 0..rz {
                if !exterior.get(x, y, z) {
                    out.set(x, y, z, true);
                }
            }
        }
    }
    out
}
