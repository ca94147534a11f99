//! Hash-table convolution as matrix multiplication.
//!
//! `sparse_to_matrix` gathers the receptive field of every output cell into
//! one column (rows ordered channel-major, then the three kernel offsets,
//! matching the dense weight layout). Cells missing from the input map
//! contribute zero rows. The layer is then a single weight-matrix multiply,
//! and `matrix_to_sparse` scatters columns back into a hash-table map. The
//! gather index map remembers the source row of every column element, which
//! makes the backward scatter exact.

use super::{CellPrediction, LayerKind, LayerSpec, SparseFeatureMap};
use crate::error::{Error, Result};
use crate::octree::morton::level_extent;
use crate::octree::OctreeKey;
use crate::tensor::DenseTensor;

/// Gather plan for one layer application: for every output key, the input
/// row feeding each kernel offset (`-1` when absent or out of grid).
#[derive(Debug, Clone)]
pub struct GatherPlan {
    pub out_keys: Vec<OctreeKey>,
    pub kernel: usize,
    pub src_rows: Vec<i64>,
}

impl GatherPlan {
    #[inline]
    pub fn offsets(&self) -> usize {
        self.kernel * self.kernel * self.kernel
    }
}

fn sorted_dedup(mut keys: Vec<OctreeKey>) -> Vec<OctreeKey> {
    keys.sort_unstable_by_key(|k| k.code);
    keys.dedup();
    keys
}

/// Build the gather plan of `layer` for the given output cells.
pub fn build_gather(
    input: &SparseFeatureMap,
    layer: &LayerSpec,
    output_keys: Vec<OctreeKey>,
) -> Result<GatherPlan> {
    let out_keys = sorted_dedup(output_keys);
    let k = layer.kernel;
    let k3 = k * k * k;
    let mut src_rows = vec![-1i64; out_keys.len() * k3];

    match layer.kind {
        LayerKind::Conv => {
            let pad = (k - 1) / 2;
            let ext = level_extent(input.base(), input.level());
            for (col, key) in out_keys.iter().enumerate() {
                if key.level != input.level() {
                    return Err(Error::Structure(
                        "conv output keys must stay at the input level".into(),
                    ));
                }
                let (x, y, z) = key.coords();
                let slot = &mut src_rows[col * k3..(col + 1) * k3];
                let mut o = 0;
                for kd in 0..k {
                    let sx = x as i64 + kd as i64 - pad as i64;
                    for kh in 0..k {
                        let sy = y as i64 + kh as i64 - pad as i64;
                        for kw in 0..k {
                            let sz = z as i64 + kw as i64 - pad as i64;
                            if sx >= 0
                                && sy >= 0
                                && sz >= 0
                                && (sx as u32) < ext[0]
                                && (sy as u32) < ext[1]
                                && (sz as u32) < ext[2]
                            {
                                let src = OctreeKey::from_coords(
                                    sx as u32,
                                    sy as u32,
                                    sz as u32,
                                    input.level(),
                                );
                                if let Some(row) = input.row_of(&src) {
                                    slot[o] = row as i64;
                                }
                            }
                            o += 1;
                        }
                    }
                }
            }
        }
        LayerKind::Upconv => {
            let s = layer.stride as i64;
            let ext = level_extent(input.base(), input.level());
            for (col, key) in out_keys.iter().enumerate() {
                if key.level != input.level() + 1 {
                    return Err(Error::Structure(
                        "up-convolution output keys must sit one level below the input".into(),
                    ));
                }
                let (x, y, z) = key.coords();
                let slot = &mut src_rows[col * k3..(col + 1) * k3];
                let mut o = 0;
                for kd in 0..k {
                    let nx = x as i64 - kd as i64;
                    for kh in 0..k {
                        let ny = y as i64 - kh as i64;
                        for kw in 0..k {
                            let nz = z as i64 - kw as i64;
                            if nx >= 0
                                && ny >= 0
                                && nz >= 0
                                && nx % s == 0
                                && ny % s == 0
                                && nz % s == 0
                            {
                                let (ix, iy, iz) = ((nx / s) as u32, (ny / s) as u32, (nz / s) as u32);
                                if ix < ext[0] && iy < ext[1] && iz < ext[2] {
                                    let src =
                                        OctreeKey::from_coords(ix, iy, iz, input.level());
                                    if let Some(row) = input.row_of(&src) {
                                        slot[o] = row as i64;
                                    }
                                }
                            }
                            o += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(GatherPlan {
        out_keys,
        kernel: k,
        src_rows,
    })
}

/// Materialize the feature matrix of a gather plan: `C_in * k^3` rows by one
/// column per output key; absent entries are zeros.
pub fn sparse_to_matrix(input: &SparseFeatureMap, plan: &GatherPlan) -> Vec<f64> {
    let c_in = input.channels();
    let k3 = plan.offsets();
    let cols = plan.out_keys.len();
    let mut matrix = vec![0.0; c_in * k3 * cols];
    let data = input.data();
    for col in 0..cols {
        for (o, &src) in plan.src_rows[col * k3..(col + 1) * k3].iter().enumerate() {
            if src >= 0 {
                let row_base = src as usize * c_in;
                for ci in 0..c_in {
                    matrix[(ci * k3 + o) * cols + col] = data[row_base + ci];
                }
            }
        }
    }
    matrix
}

/// Scatter a `[channels x cols]` channel-major matrix into a sparse map over
/// the plan's output keys (inverse packing of the output side).
pub fn matrix_to_sparse(
    matrix: &[f64],
    out_keys: &[OctreeKey],
    channels: usize,
    level: u8,
    base: [u32; 3],
) -> Result<SparseFeatureMap> {
    let cols = out_keys.len();
    if matrix.len() != channels * cols {
        return Err(Error::Shape(format!(
            "matrix of {} values cannot fill {cols} cells x {channels} channels",
            matrix.len()
        )));
    }
    let mut map = SparseFeatureMap::zeros(level, channels, base, out_keys.to_vec())?;
    debug_assert_eq!(map.keys(), out_keys, "out_keys must already be sorted");
    let data = map.data_mut();
    for c in 0..channels {
        for col in 0..cols {
            data[col * channels + c] = matrix[c * cols + col];
        }
    }
    Ok(map)
}

/// Forward cache of one sparse layer application.
#[derive(Debug, Clone)]
pub struct SparseConvCache {
    pub plan: GatherPlan,
    pub gathered: Vec<f64>,
    pub cols: usize,
}

/// Weight matrix `[C_out x C_in*k^3]` with rows matching the gather order.
fn weight_matrix(layer: &LayerSpec, weights: &DenseTensor) -> Result<Vec<f64>> {
    let expect = layer.weight_shape();
    if weights.shape() != expect {
        return Err(Error::Shape(format!(
            "layer weights {:?}, expected {:?}",
            weights.shape(),
            expect
        )));
    }
    let k3 = layer.kernel * layer.kernel * layer.kernel;
    let (c_in, c_out) = (layer.c_in, layer.c_out);
    let wd = weights.data();
    let mut mat = vec![0.0; c_out * c_in * k3];
    match layer.kind {
        LayerKind::Conv => mat.copy_from_slice(wd),
        LayerKind::Upconv => {
            for ci in 0..c_in {
                for co in 0..c_out {
                    let src = (ci * c_out + co) * k3;
                    let dst = (co * c_in + ci) * k3;
                    mat[dst..dst + k3].copy_from_slice(&wd[src..src + k3]);
                }
            }
        }
    }
    Ok(mat)
}

/// Scatter a weight-matrix gradient back into the layer's weight layout.
fn weight_matrix_grad_to_tensor(layer: &LayerSpec, grad_mat: &[f64]) -> DenseTensor {
    let k3 = layer.kernel * layer.kernel * layer.kernel;
    let (c_in, c_out) = (layer.c_in, layer.c_out);
    let mut out = DenseTensor::zeros(&layer.weight_shape());
    let od = out.data_mut();
    match layer.kind {
        LayerKind::Conv => od.copy_from_slice(grad_mat),
        LayerKind::Upconv => {
            for ci in 0..c_in {
                for co in 0..c_out {
                    let dst = (ci * c_out + co) * k3;
                    let src = (co * c_in + ci) * k3;
                    od[dst..dst + k3].copy_from_slice(&grad_mat[src..src + k3]);
                }
            }
        }
    }
    out
}

/// Sparse (up-)convolution: gather, multiply by the weight matrix, add bias,
/// scatter into a map over `output_keys`.
pub fn ogn_conv(
    input: &SparseFeatureMap,
    weights: &DenseTensor,
    bias: &DenseTensor,
    layer: &LayerSpec,
    output_keys: Vec<OctreeKey>,
) -> Result<(SparseFeatureMap, SparseConvCache)> {
    if input.channels() != layer.c_in {
        return Err(Error::Shape(format!(
            "feature map has {} channels, layer expects {}",
            input.channels(),
            layer.c_in
        )));
    }
    if bias.shape() != [layer.c_out] {
        return Err(Error::Shape(format!(
            "bias {:?} must be [{}]",
            bias.shape(),
            layer.c_out
        )));
    }
    let plan = build_gather(input, layer, output_keys)?;
    let gathered = sparse_to_matrix(input, &plan);
    let cols = plan.out_keys.len();
    let rows = layer.c_in * plan.offsets();
    let wmat = weight_matrix(layer, weights)?;

    let mut out_mat = vec![0.0; layer.c_out * cols];
    for co in 0..layer.c_out {
        let orow = &mut out_mat[co * cols..(co + 1) * cols];
        orow.fill(bias.data()[co]);
        for r in 0..rows {
            let w = wmat[co * rows + r];
            if w == 0.0 {
                continue;
            }
            let grow = &gathered[r * cols..(r + 1) * cols];
            for (ov, gv) in orow.iter_mut().zip(grow) {
                *ov += w * gv;
            }
        }
    }

    let out_level = match layer.kind {
        LayerKind::Conv => input.level(),
        LayerKind::Upconv => input.level() + 1,
    };
    let out = matrix_to_sparse(&out_mat, &plan.out_keys, layer.c_out, out_level, input.base())?;
    out.debug_assert_finite("ogn_conv output");
    Ok((out, SparseConvCache { plan, gathered, cols }))
}

/// Backward of [`ogn_conv`]: routes the output-map gradient into the input
/// map (via the gather index map), the weights, and the bias.
pub fn ogn_conv_backward(
    input: &SparseFeatureMap,
    weights: &DenseTensor,
    layer: &LayerSpec,
    cache: &SparseConvCache,
    grad_out: &SparseFeatureMap,
) -> Result<(SparseFeatureMap, DenseTensor, DenseTensor)> {
    let cols = cache.cols;
    let k3 = cache.plan.offsets();
    let rows = layer.c_in * k3;
    if grad_out.len() != cols || grad_out.channels() != layer.c_out {
        return Err(Error::Shape("ogn_conv backward gradient shape mismatch".into()));
    }
    let wmat = weight_matrix(layer, weights)?;

    // Output gradient, channel-major.
    let mut gout_mat = vec![0.0; layer.c_out * cols];
    for col in 0..cols {
        let row = grad_out.row(col);
        for co in 0..layer.c_out {
            gout_mat[co * cols + col] = row[co];
        }
    }

    let mut grad_b = DenseTensor::zeros(&[layer.c_out]);
    for co in 0..layer.c_out {
        grad_b.data_mut()[co] = gout_mat[co * cols..(co + 1) * cols].iter().sum();
    }

    let mut grad_wmat = vec![0.0; layer.c_out * rows];
    let mut grad_gathered = vec![0.0; rows * cols];
    for co in 0..layer.c_out {
        let grow = &gout_mat[co * cols..(co + 1) * cols];
        for r in 0..rows {
            let w = wmat[co * rows + r];
            let gath = &cache.gathered[r * cols..(r + 1) * cols];
            let gg = &mut grad_gathered[r * cols..(r + 1) * cols];
            let mut acc = 0.0;
            for n in 0..cols {
                acc += grow[n] * gath[n];
                gg[n] += grow[n] * w;
            }
            grad_wmat[co * rows + r] = acc;
        }
    }
    let grad_w = weight_matrix_grad_to_tensor(layer, &grad_wmat);

    let mut grad_in = input.zeros_like();
    let c_in = layer.c_in;
    {
        let gid = grad_in.data_mut();
        for col in 0..cols {
            for (o, &src) in cache.plan.src_rows[col * k3..(col + 1) * k3].iter().enumerate() {
                if src >= 0 {
                    let base = src as usize * c_in;
                    for ci in 0..c_in {
                        gid[base + ci] += grad_gathered[(ci * k3 + o) * cols + col];
                    }
                }
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// Cache of one classifier application.
#[derive(Debug, Clone)]
pub struct ClassifyCache {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Predict the three-way state of every stored cell with a `1^3` convolution
/// (`weights [3, C]`, `bias [3]`) followed by a softmax.
pub fn classify_cells(
    input: &SparseFeatureMap,
    weights: &DenseTensor,
    bias: &DenseTensor,
) -> Result<(Vec<CellPrediction>, ClassifyCache)> {
    if input.is_empty() {
        return Err(Error::Contract("classify_cells on an empty feature map".into()));
    }
    let c = input.channels();
    if weights.shape() != [3, c] || bias.shape() != [3] {
        return Err(Error::Shape(format!(
            "classifier weights {:?} / bias {:?} for {c} channels",
            weights.shape(),
            bias.shape()
        )));
    }
    let n = input.len();
    let wd = weights.data();
    let bd = bias.data();
    let mut logits = vec![0.0; n * 3];
    let mut probs = vec![0.0; n * 3];
    let mut preds = Vec::with_capacity(n);
    for (row, &key) in input.keys().iter().enumerate() {
        let feat = input.row(row);
        let lrow = &mut logits[row * 3..row * 3 + 3];
        for j in 0..3 {
            let wrow = &wd[j * c..(j + 1) * c];
            lrow[j] = bd[j] + wrow.iter().zip(feat).map(|(w, x)| w * x).sum::<f64>();
        }
        let p = crate::tensor::nn::softmax(lrow);
        probs[row * 3..row * 3 + 3].copy_from_slice(&p);
        preds.push(CellPrediction {
            key,
            probs: [p[0], p[1], p[2]],
        });
    }
    Ok((preds, ClassifyCache { logits, probs }))
}

/// Backward of [`classify_cells`] for a per-logit gradient `[n * 3]`.
pub fn classify_backward(
    input: &SparseFeatureMap,
    weights: &DenseTensor,
    grad_logits: &[f64],
) -> Result<(SparseFeatureMap, DenseTensor, DenseTensor)> {
    let c = input.channels();
    let n = input.len();
    if grad_logits.len() != n * 3 {
        return Err(Error::Shape("classifier gradient length mismatch".into()));
    }
    let mut grad_in = input.zeros_like();
    let mut grad_w = DenseTensor::zeros(&[3, c]);
    let mut grad_b = DenseTensor::zeros(&[3]);
    let wd = weights.data();
    let gwd = grad_w.data_mut();
    let gbd = grad_b.data_mut();
    for row in 0..n {
        let feat = input.row(row);
        let grow = &grad_logits[row * 3..row * 3 + 3];
        let gin = grad_in.row_mut(row);
        for j in 0..3 {
            let g = grow[j];
            if g == 0.0 {
                continue;
            }
            gbd[j] += g;
            let wrow = &wd[j * c..(j + 1) * c];
            let gwrow = &mut gwd[j * c..(j + 1) * c];
            for ci in 0..c {
                gwrow[ci] += g * feat[ci];
                gin[ci] += g * wrow[ci];
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}
