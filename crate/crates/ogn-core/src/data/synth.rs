//! Procedural toy solids.
//!
//! Shapes are unions of solid primitives with parameters in normalized
//! `[0,1]^3` coordinates, voxelized by testing cell centers. The same shape
//! rendered at several resolutions is therefore consistent by construction,
//! and everything is a watertight solid (no hollow surfaces to fill). The
//! corpus ships as a generator, not data: a seed fully determines it.

use crate::octree::VoxelGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One solid primitive in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Primitive {
    Sphere { center: [f64; 3], radius: f64 },
    Box { min: [f64; 3], max: [f64; 3] },
    /// Axis-aligned (z) cylinder.
    Cylinder { center: [f64; 2], radius: f64, z: [f64; 2] },
}

impl Primitive {
    fn contains(&self, p: [f64; 3]) -> bool {
        match self {
            Primitive::Sphere { center, radius } => {
                let d2: f64 = (0..3).map(|a| (p[a] - center[a]).powi(2)).sum();
                d2 <= radius * radius
            }
            Primitive::Box { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
            Primitive::Cylinder { center, radius, z } => {
                let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
                d2 <= radius * radius && p[2] >= z[0] && p[2] <= z[1]
            }
        }
    }
}

/// Union of primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub primitives: Vec<Primitive>,
}

impl Shape {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        self.primitives.iter().any(|prim| prim.contains(p))
    }

    /// Voxelize at cubic resolution `res`, sampling voxel centers.
    pub fn voxelize(&self, res: u32) -> VoxelGrid {
        let mut grid = VoxelGrid::new([res, res, res]);
        let inv = 1.0 / res as f64;
        for x in 0..res {
            let px = (x as f64 + 0.5) * inv;
            for y in 0..res {
                let py = (y as f64 + 0.5) * inv;
                for z in 0..res {
                    let pz = (z as f64 + 0.5) * inv;
                    if self.contains([px, py, pz]) {
                        grid.set(x, y, z, true);
                    }
                }
            }
        }
        grid
    }
}

/// Shape families of the toy corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    Box,
    Cylinder,
    Union,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [
        ShapeKind::Sphere,
        ShapeKind::Box,
        ShapeKind::Cylinder,
        ShapeKind::Union,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Box => "box",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::Union => "union",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == s)
    }
}

fn range(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Deterministic shape of one family. Parameters vary smoothly with the RNG
/// stream so nearby seeds produce related but distinct solids.
pub fn synth_toy_shape(kind: ShapeKind, seed: u64) -> Shape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f37_6a23);
    let primitives = match kind {
        ShapeKind::Sphere => vec![Primitive::Sphere {
            center: [
                range(&mut rng, 0.42, 0.58),
                range(&mut rng, 0.42, 0.58),
                range(&mut rng, 0.42, 0.58),
            ],
            radius: range(&mut rng, 0.2, 0.34),
        }],
        ShapeKind::Box => {
            let c = [
                range(&mut rng, 0.42, 0.58),
                range(&mut rng, 0.42, 0.58),
                range(&mut rng, 0.42, 0.58),
            ];
            let h = [
                range(&mut rng, 0.12, 0.3),
                range(&mut rng, 0.12, 0.3),
                range(&mut rng, 0.12, 0.3),
            ];
            vec![Primitive::Box {
                min: [c[0] - h[0], c[1] - h[1], c[2] - h[2]],
                max: [c[0] + h[0], c[1] + h[1], c[2] + h[2]],
            }]
        }
        ShapeKind::Cylinder => vec![Primitive::Cylinder {
            center: [range(&mut rng, 0.42, 0.58), range(&mut rng, 0.42, 0.58)],
            radius: range(&mut rng, 0.14, 0.28),
            z: {
                let lo = range(&mut rng, 0.15, 0.3);
                let hi = range(&mut rng, 0.7, 0.85);
                [lo, hi]
            },
        }],
        ShapeKind::Union => {
            let mut prims = vec![Primitive::Sphere {
                center: [
                    range(&mut rng, 0.4, 0.6),
                    range(&mut rng, 0.4, 0.6),
                    range(&mut rng, 0.4, 0.6),
                ],
                radius: range(&mut rng, 0.16, 0.26),
            }];
            let extra = rng.gen_range(1..=2usize);
            for _ in 0..extra {
                let c = [
                    range(&mut rng, 0.35, 0.65),
                    range(&mut rng, 0.35, 0.65),
                    range(&mut rng, 0.35, 0.65),
                ];
                let h = [
                    range(&mut rng, 0.08, 0.18),
                    range(&mut rng, 0.08, 0.18),
                    range(&mut rng, 0.08, 0.18),
                ];
                prims.push(Primitive::Box {
                    min: [c[0] - h[0], c[1] - h[1], c[2] - h[2]],
                    max: [c[0] + h[0], c[1] + h[1], c[2] + h[2]],
                });
            }
            prims
        }
    };
    Shape { primitives }
}

/// The toy corpus: `count` solids cycling through the four families.
pub fn toy_corpus(count: usize, seed: u64) -> Vec<(ShapeKind, Shape)> {
    (0..count)
        .map(|i| {
            let kind = ShapeKind::ALL[i % ShapeKind::ALL.len()];
            (kind, synth_toy_shape(kind, seed.wrapping_add(i as u64 * 7919)))
        })
        .collect()
}

/// Four scene-like shapes with deliberately fine structure (thin slabs and
/// small spheres) that a halved-resolution render loses.
pub fn toy_scenes(seed: u64) -> Vec<Shape> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x00c0_ffee);
    (0..4)
        .map(|_| {
            let mut prims = Vec::new();
            // Ground slab.
            prims.push(Primitive::Box {
                min: [0.08, 0.08, 0.1],
                max: [0.92, 0.92, range(&mut rng, 0.14, 0.18)],
            });
            // A few buildings.
            for _ in 0..3 {
                let c = [range(&mut rng, 0.2, 0.8), range(&mut rng, 0.2, 0.8)];
                let h = [range(&mut rng, 0.05, 0.14), range(&mut rng, 0.05, 0.14)];
                prims.push(Primitive::Box {
                    min: [c[0] - h[0], c[1] - h[1], 0.1],
                    max: [c[0] + h[0], c[1] + h[1], range(&mut rng, 0.35, 0.75)],
                });
            }
            // Thin vertical mast: ~2 voxels wide at 128, subvoxel at 64.
            let mast = [range(&mut rng, 0.25, 0.75), range(&mut rng, 0.25, 0.75)];
            prims.push(Primitive::Cylinder {
                center: mast,
                radius: 0.012,
                z: [0.1, range(&mut rng, 0.8, 0.9)],
            });
            // Small ornaments.
            for _ in 0..2 {
                prims.push(Primitive::Sphere {
                    center: [
                        range(&mut rng, 0.25, 0.75),
                        range(&mut rng, 0.25, 0.75),
                        range(&mut rng, 0.3, 0.6),
                    ],
                    radius: range(&mut rng, 0.02, 0.045),
                });
            }
            Shape { primitives: prims }
        })
        .collect()
}

/// Centered sphere, the family used by the scaling benchmark.
pub fn benchmark_sphere(res: u32) -> VoxelGrid {
    Shape {
        primitives: vec![Primitive::Sphere {
            center: [0.5, 0.5, 0.5],
            radius: 0.38,
        }],
    }
    .voxelize(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = synth_toy_shape(ShapeKind::Union, 99);
        let b = synth_toy_shape(ShapeKind::Union, 99);
        let c = synth_toy_shape(ShapeKind::Union, 100);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.voxelize(16), b.voxelize(16));
    }

    #[test]
    fn corpus_has_all_families() {
        let corpus = toy_corpus(64, 1234);
        assert_eq!(corpus.len(), 64);
        for kind in ShapeKind::ALL {
            assert_eq!(corpus.iter().filter(|(k, _)| *k == kind).count(), 16);
        }
        for (_, shape) in &corpus {
            let g = shape.voxelize(32);
            let frac = g.count_filled() as f64 / g.len() as f64;
            assert!(frac > 0.001 && frac < 0.9, "degenerate shape: {frac}");
        }
    }

    #[test]
    fn renders_are_consistent_across_resolutions() {
        // Majority-downsampling the 64^3 render should roughly reproduce the
        // 32^3 render; only boundary cells may disagree.
        let shape = synth_toy_shape(ShapeKind::Sphere, 7);
        let hi = shape.voxelize(64);
        let lo = shape.voxelize(32);
        let mut mismatches = 0;
        for x in 0..32u32 {
            for y in 0..32u32 {
                for z in 0..32u32 {
                    let mut filled = 0;
                    for dx in 0..2 {
                        for dy in 0..2 {
                            for dz in 0..2 {
                                if hi.get(2 * x + dx, 2 * y + dy, 2 * z + dz) {
                                    filled += 1;
                                }
                            }
                        }
                    }
                    let majority = filled >= 4;
                    if majority != lo.get(x, y, z) {
                        mismatches += 1;
                    }
                }
            }
        }
        let frac = mismatches as f64 / (32.0f64).powi(3);
        assert!(frac < 0.03, "downsample mismatch fraction {frac}");
    }

    #[test]
    fn scenes_have_fine_detail_lost_at_low_resolution() {
        for scene in toy_scenes(5) {
            let hi = scene.voxelize(128);
            let lo = scene.voxelize(64);
            assert!(hi.count_filled() > 0 && lo.count_filled() > 0);
        }
    }
}
