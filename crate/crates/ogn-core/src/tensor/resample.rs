//! Trilinear upsampling for evaluation-time resolution reconciliation.

use super::DenseTensor;
use crate::error::{Error, Result};

/// Source coordinate for a destination sample under cell-center alignment:
/// `src = (dst + 0.5) * (src_extent / dst_extent) - 0.5`, clamped to the
/// valid range. Returns the lower corner index and the interpolation weight
/// of the upper corner.
#[inline]
fn sample_axis(dst: usize, src_extent: usize, dst_extent: usize) -> (usize, usize, f64) {
    let ratio = src_extent as f64 / dst_extent as f64;
    let src = (dst as f64 + 0.5) * ratio - 0.5;
    let src = src.clamp(0.0, (src_extent - 1) as f64);
    let lo = src.floor() as usize;
    let hi = (lo + 1).min(src_extent - 1);
    (lo, hi, src - lo as f64)
}

/// Upsample a `[D, H, W]` tensor to `target`, each target extent an integer
/// multiple of the source extent.
pub fn trilinear_upsample(grid: &DenseTensor, target: [usize; 3]) -> Result<DenseTensor> {
    let shape = grid.shape();
    if shape.len() != 3 {
        return Err(Error::Shape(format!(
            "trilinear_upsample expects [D,H,W], got {shape:?}"
        )));
    }
    let src = [shape[0], shape[1], shape[2]];
    for axis in 0..3 {
        if src[axis] == 0 || target[axis] % src[axis] != 0 {
            return Err(Error::Shape(format!(
                "target {} is not a multiple of source {} on axis {axis}",
                target[axis], src[axis]
            )));
        }
    }
    let mut out = DenseTensor::zeros(&[target[0], target[1], target[2]]);
    let d = grid.data();
    let (sh, sw) = (src[1], src[2]);
    let od = out.data_mut();
    let mut idx = 0;
    for x in 0..target[0] {
        let (x0, x1, fx) = sample_axis(x, src[0], target[0]);
        for y in 0..target[1] {
            let (y0, y1, fy) = sample_axis(y, src[1], target[1]);
            for z in 0..target[2] {
                let (z0, z1, fz) = sample_axis(z, src[2], target[2]);
                let c000 = d[(x0 * sh + y0) * sw + z0];
                let c001 = d[(x0 * sh + y0) * sw + z1];
                let c010 = d[(x0 * sh + y1) * sw + z0];
                let c011 = d[(x0 * sh + y1) * sw + z1];
                let c100 = d[(x1 * sh + y0) * sw + z0];
                let c101 = d[(x1 * sh + y0) * sw + z1];
                let c110 = d[(x1 * sh + y1) * sw + z0];
                let c111 = d[(x1 * sh + y1) * sw + z1];
                let c00 = c000 + (c001 - c000) * fz;
                let c01 = c010 + (c011 - c010) * fz;
                let c10 = c100 + (c101 - c100) * fz;
                let c11 = c110 + (c111 - c110) * fz;
                let c0 = c00 + (c01 - c00) * fy;
                let c1 = c10 + (c11 - c10) * fy;
                od[idx] = c0 + (c1 - c0) * fx;
                idx += 1;
            }
        }
    }
    out.debug_assert_finite("trilinear_upsample output");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn constant_fields_stay_constant() {
        let g = DenseTensor::full(&[2, 2, 2], 0.7);
        let up = trilinear_upsample(&g, [8, 8, 8]).unwrap();
        assert!(up.data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn linear_ramp_is_preserved_at_cell_centers() {
        // f(x) = x at source cell centers; the interpolant of a linear field
        // reproduces the field wherever it does not clamp at the border.
        let mut g = DenseTensor::zeros(&[4, 1, 1]);
        for x in 0..4 {
            *g.at_mut(&[x, 0, 0]) = x as f64;
        }
        let up = trilinear_upsample(&g, [8, 1, 1]).unwrap();
        for x in 1..7 {
            // Destination centers map to src = (x + 0.5)/2 - 0.5.
            let expect = (x as f64 + 0.5) / 2.0 - 0.5;
            assert!(
                (up.at(&[x, 0, 0]) - expect).abs() < 1e-12,
                "x={x}: {} vs {expect}",
                up.at(&[x, 0, 0])
            );
        }
        // Clamped ends replicate the border value.
        assert!((up.at(&[0, 0, 0]) - 0.0).abs() < 1e-12);
        assert!((up.at(&[7, 0, 0]) - 3.0).abs() < 1e-12);
    }

    /// Direct per-voxel interpolation oracle with no shared index math.
    fn oracle_at(src: &DenseTensor, target: [usize; 3], pos: [usize; 3]) -> f64 {
        let s = src.shape();
        let mut corner = [[0usize; 2]; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let c = (pos[a] as f64 + 0.5) * (s[a] as f64 / target[a] as f64) - 0.5;
            let c = c.max(0.0).min((s[a] - 1) as f64);
            corner[a][0] = c.floor() as usize;
            corner[a][1] = (corner[a][0] + 1).min(s[a] - 1);
            frac[a] = c - corner[a][0] as f64;
        }
        let mut acc = 0.0;
        for ix in 0..2 {
            for iy in 0..2 {
                for iz in 0..2 {
                    let wx = if ix == 0 { 1.0 - frac[0] } else { frac[0] };
                    let wy = if iy == 0 { 1.0 - frac[1] } else { frac[1] };
                    let wz = if iz == 0 { 1.0 - frac[2] } else { frac[2] };
                    acc += wx * wy * wz * src.at(&[corner[0][ix], corner[1][iy], corner[2][iz]]);
                }
            }
        }
        acc
    }

    #[test]
    fn random_grid_matches_weighted_average_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let g = DenseTensor::from_vec(&[4, 4, 4], (0..64).map(|_| rng.gen::<f64>()).collect())
            .unwrap();
        let up = trilinear_upsample(&g, [8, 8, 8]).unwrap();
        for x in 0..8 {
            for y in 0..8 {
                for z in 0..8 {
                    let expect = oracle_at(&g, [8, 8, 8], [x, y, z]);
                    assert!((up.at(&[x, y, z]) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn non_multiple_target_is_rejected() {
        let g = DenseTensor::zeros(&[4, 4, 4]);
        assert!(trilinear_upsample(&g, [6, 8, 8]).is_err());
    }
}
