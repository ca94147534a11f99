//! Multi-level structure loss.
//!
//! Each predicted level contributes the mean three-way cross-entropy between
//! its cell predictions and the ground-truth cell states, and the total loss
//! is the sum over levels. Gradients flow only into the logits of member
//! cells; a prediction kept around for other purposes gets zero gradient.

use super::SparseFeatureMap;
use crate::error::{Error, Result};
use crate::octree::{Octree, OctreeKey};
use crate::tensor::nn::softmax;

/// One level's classifier output: logits row-aligned with `keys`.
#[derive(Debug, Clone)]
pub struct LevelPredictions {
    pub level: u8,
    pub keys: Vec<OctreeKey>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl LevelPredictions {
    pub fn from_map(map: &SparseFeatureMap, cache: &super::sparse_conv::ClassifyCache) -> Self {
        LevelPredictions {
            level: map.level(),
            keys: map.keys().to_vec(),
            logits: cache.logits.clone(),
            probs: cache.probs.clone(),
        }
    }
}

/// Cross-entropy against the ground-truth octree, averaged within each level
/// over its member cells and summed across levels. Returns the loss and one
/// per-logit gradient buffer per level (row-aligned with that level's keys).
pub fn ogn_loss(
    preds: &[LevelPredictions],
    gt: &Octree,
    members: &[Vec<OctreeKey>],
) -> Result<(f64, Vec<Vec<f64>>)> {
    if preds.len() != members.len() {
        return Err(Error::Contract(format!(
            "{} prediction levels but {} member sets",
            preds.len(),
            members.len()
        )));
    }
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(preds.len());
    for (level_preds, member_keys) in preds.iter().zip(members) {
        let mut grad = vec![0.0; level_preds.logits.len()];
        if member_keys.is_empty() {
            grads.push(grad);
            continue;
        }
        let mut row_of = crate::hash::KeyMap::default();
        for (row, key) in level_preds.keys.iter().enumerate() {
            row_of.insert(*key, row);
        }
        let scale = 1.0 / member_keys.len() as f64;
        let mut level_loss = 0.0;
        for key in member_keys {
            let row = *row_of.get(key).ok_or_else(|| {
                Error::Contract(format!(
                    "member cell code {} has no prediction at level {}",
                    key.code, level_preds.level
                ))
            })?;
            let target = gt.query_key(*key).class_index();
            let logits = &level_preds.logits[row * 3..row * 3 + 3];
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let log_sum = logits.iter().map(|&l| (l - m).exp()).sum::<f64>().ln() + m;
            level_loss += log_sum - logits[target];
            let p = softmax(logits);
            for j in 0..3 {
                grad[row * 3 + j] = (p[j] - if j == target { 1.0 } else { 0.0 }) * scale;
            }
        }
        total += level_loss * scale;
        grads.push(grad);
    }
    Ok((total, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::octree::{CellState, VoxelGrid};

    fn single_cell_preds(logits: [f64; 3]) -> LevelPredictions {
        LevelPredictions {
            level: 0,
            keys: vec![OctreeKey::from_coords(0, 0, 0, 0)],
            probs: softmax(&logits),
            logits: logits.to_vec(),
        }
    }

    fn filled_tree() -> Octree {
        let mut g = VoxelGrid::new([1, 1, 1]);
        g.set(0, 0, 0, true);
        Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap()
    }

    #[test]
    fn uniform_prediction_costs_ln3() {
        let preds = vec![single_cell_preds([0.0; 3])];
        let members = vec![preds[0].keys.clone()];
        let (loss, grads) = ogn_loss(&preds, &filled_tree(), &members).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
        // Gradient is (softmax - one_hot) / |M|.
        assert!((grads[0][0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((grads[0][1] + 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_one_hot_prediction_costs_zero() {
        let preds = vec![single_cell_preds([-60.0, 60.0, -60.0])];
        let members = vec![preds[0].keys.clone()];
        let (loss, _) = ogn_loss(&preds, &filled_tree(), &members).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn multi_level_loss_matches_scalar_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);

        // Ground truth: one filled octant of a 4^3 grid, base 1.
        let mut g = VoxelGrid::new([4, 4, 4]);
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    g.set(x, y, z, true);
                }
            }
        }
        let gt = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();

        let level1: Vec<OctreeKey> = (0..2u32)
            .flat_map(|x| (0..1u32).map(move |y| OctreeKey::from_coords(x, y, 0, 1)))
            .collect();
        let level2: Vec<OctreeKey> = (0..4u32)
            .map(|x| OctreeKey::from_coords(x, 0, 0, 2))
            .collect();
        let make = |keys: &Vec<OctreeKey>, level: u8, rng: &mut rand_chacha::ChaCha8Rng| {
            let logits: Vec<f64> = (0..keys.len() * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let probs: Vec<f64> = logits.chunks(3).flat_map(|c| softmax(c)).collect();
            LevelPredictions { level, keys: keys.clone(), logits, probs }
        };
        let preds = vec![make(&level1, 1, &mut rng), make(&level2, 2, &mut rng)];
        let members = vec![level1.clone(), level2.clone()];
        let (loss, _) = ogn_loss(&preds, &gt, &members).unwrap();

        // Scalar oracle: softmax + negative log per cell, by hand.
        let mut expect = 0.0;
        for (lp, keys) in preds.iter().zip([&level1, &level2]) {
            let mut lsum = 0.0;
            for (row, key) in keys.iter().enumerate() {
                let target = gt.query_key(*key).class_index();
                let l = &lp.logits[row * 3..row * 3 + 3];
                let z: f64 = l.iter().map(|v| v.exp()).sum();
                lsum += -(l[target].exp() / z).ln();
            }
            expect += lsum / keys.len() as f64;
        }
        assert!((loss - expect).abs() < 1e-12, "{loss} vs {expect}");
    }

    #[test]
    fn member_without_prediction_is_a_contract_error() {
        let preds = vec![single_cell_preds([0.0; 3])];
        let members = vec![vec![OctreeKey::from_coords(0, 0, 0, 1)]];
        let mut g = VoxelGrid::new([2, 2, 2]);
        g.set(0, 0, 0, true);
        let gt = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();
        assert!(matches!(
            ogn_loss(&preds, &gt, &members),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn gradient_is_zero_outside_members() {
        let keys = vec![
            OctreeKey::from_coords(0, 0, 0, 0),
        ];
        let mut g = VoxelGrid::new([1, 1, 1]);
        g.set(0, 0, 0, true);
        let gt = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();
        let preds = vec![LevelPredictions {
            level: 0,
            keys,
            logits: vec![0.3, -0.1, 0.2],
            probs: softmax(&[0.3, -0.1, 0.2]),
        }];
        let (_, grads) = ogn_loss(&preds, &gt, &[vec![]]).unwrap();
        assert!(grads[0].iter().all(|&g| g == 0.0));
    }

    #[test]
    fn targets_come_from_octree_queries() {
        let mut g = VoxelGrid::new([2, 2, 2]);
        g.set(0, 0, 0, true);
        let gt = Octree::from_voxel_grid(&g, [1, 1, 1]).unwrap();
        assert_eq!(gt.query(0, 0, 0, 0), CellState::Mixed);
    }
}
