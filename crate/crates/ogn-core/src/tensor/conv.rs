//! Dense convolutions (cross-correlation semantics), transposed convolutions,
//! and their analytic gradients.

use super::DenseTensor;
use crate::error::{Error, Result};

#[inline]
fn out_extent(input: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if input + 2 * pad < k {
        return Err(Error::Shape(format!(
            "spatial extent {input} with pad {pad} smaller than kernel {k}"
        )));
    }
    Ok((input + 2 * pad - k) / stride + 1)
}

/// Range of output indices whose sampled input `o*s + koff - pad` is in
/// `[0, extent)`.
#[inline]
fn valid_out_range(extent: usize, out_extent: usize, koff: usize, s: usize, pad: usize) -> (usize, usize) {
    let num = pad as i64 - koff as i64;
    let lo = num.div_euclid(s as i64) + if num.rem_euclid(s as i64) != 0 { 1 } else { 0 };
    let lo = lo.max(0) as usize;
    let hi_num = extent as i64 - 1 + pad as i64 - koff as i64;
    if hi_num < 0 {
        return (1, 0);
    }
    let hi = (hi_num.div_euclid(s as i64) as usize).min(out_extent.saturating_sub(1));
    (lo, hi)
}

fn check_conv3d_shapes(
    input: &DenseTensor,
    weights: &DenseTensor,
    bias: &DenseTensor,
) -> Result<(usize, usize, [usize; 3], usize)> {
    let ishape = input.shape();
    let wshape = weights.shape();
    if ishape.len() != 4 || wshape.len() != 5 {
        return Err(Error::Shape(format!(
            "conv3d expects input [C,D,H,W] and weights [Co,Ci,k,k,k], got {ishape:?} / {wshape:?}"
        )));
    }
    let (c_in, spatial) = (ishape[0], [ishape[1], ishape[2], ishape[3]]);
    let (c_out, k) = (wshape[0], wshape[2]);
    if wshape[1] != c_in || wshape[3] != k || wshape[4] != k {
        return Err(Error::Shape(format!(
            "weights {wshape:?} incompatible with {c_in} input channels"
        )));
    }
    if bias.shape() != [c_out] {
        return Err(Error::Shape(format!(
            "bias {:?} must be [{c_out}]",
            bias.shape()
        )));
    }
    Ok((c_in, c_out, spatial, k))
}

/// 3D convolution with zero padding. Output extent per axis is
/// `(D + 2p - k) / s + 1`.
pub fn conv3d(
    input: &DenseTensor,
    weights: &DenseTensor,
    bias: &DenseTensor,
    stride: usize,
    pad: usize,
) -> Result<DenseTensor> {
    let (c_in, c_out, [d, h, w], k) = check_conv3d_shapes(input, weights, bias)?;
    let od = out_extent(d, k, stride, pad)?;
    let oh = out_extent(h, k, stride, pad)?;
    let ow = out_extent(w, k, stride, pad)?;
    let mut out = DenseTensor::zeros(&[c_out, od, oh, ow]);

    let ind = input.data();
    let wd = weights.data();
    let outd = out.data_mut();
    for co in 0..c_out {
        let b = bias.data()[co];
        outd[co * od * oh * ow..(co + 1) * od * oh * ow].fill(b);
        for ci in 0..c_in {
            for kd in 0..k {
                let (dlo, dhi) = valid_out_range(d, od, kd, stride, pad);
                for kh in 0..k {
                    let (hlo, hhi) = valid_out_range(h, oh, kh, stride, pad);
                    for kw in 0..k {
                        let (wlo, whi) = valid_out_range(w, ow, kw, stride, pad);
                        let wgt = wd[(((co * c_in + ci) * k + kd) * k + kh) * k + kw];
                        if dlo > dhi || hlo > hhi || wlo > whi {
                            continue;
                        }
                        for odi in dlo..=dhi {
                            let idi = odi * stride + kd - pad;
                            for ohi in hlo..=hhi {
                                let ihi = ohi * stride + kh - pad;
                                let irow = ((ci * d + idi) * h + ihi) * w;
                                let orow = ((co * od + odi) * oh + ohi) * ow;
                                for owi in wlo..=whi {
                                    let iwi = owi * stride + kw - pad;
                                    outd[orow + owi] += wgt * ind[irow + iwi];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.debug_assert_finite("conv3d output");
    Ok(out)
}

/// Gradients of [`conv3d`] with respect to input, weights, and bias.
pub fn conv3d_backward(
    input: &DenseTensor,
    weights: &DenseTensor,
    grad_out: &DenseTensor,
    stride: usize,
    pad: usize,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    let shape = weights.shape().to_vec();
    let (c_out, c_in, k) = (shape[0], shape[1], shape[2]);
    let [d, h, w] = [input.shape()[1], input.shape()[2], input.shape()[3]];
    let [od, oh, ow] = [grad_out.shape()[1], grad_out.shape()[2], grad_out.shape()[3]];
    if grad_out.shape()[0] != c_out || input.shape()[0] != c_in {
        return Err(Error::Shape("conv3d backward channel mismatch".into()));
    }

    let mut grad_in = DenseTensor::zeros(input.shape());
    let mut grad_w = DenseTensor::zeros(&shape);
    let mut grad_b = DenseTensor::zeros(&[c_out]);

    let ind = input.data();
    let wd = weights.data();
    let god = grad_out.data();
    {
        let gb = grad_b.data_mut();
        for co in 0..c_out {
            gb[co] = god[co * od * oh * ow..(co + 1) * od * oh * ow].iter().sum();
        }
    }
    let gid = grad_in.data_mut();
    let gwd = grad_w.data_mut();
    for co in 0..c_out {
        for ci in 0..c_in {
            for kd in 0..k {
                let (dlo, dhi) = valid_out_range(d, od, kd, stride, pad);
                for kh in 0..k {
                    let (hlo, hhi) = valid_out_range(h, oh, kh, stride, pad);
                    for kw in 0..k {
                        let (wlo, whi) = valid_out_range(w, ow, kw, stride, pad);
                        let widx = (((co * c_in + ci) * k + kd) * k + kh) * k + kw;
                        let wgt = wd[widx];
                        let mut wacc = 0.0;
                        if dlo <= dhi && hlo <= hhi && wlo <= whi {
                            for odi in dlo..=dhi {
                                let idi = odi * stride + kd - pad;
                                for ohi in hlo..=hhi {
                                    let ihi = ohi * stride + kh - pad;
                                    let irow = ((ci * d + idi) * h + ihi) * w;
                                    let orow = ((co * od + odi) * oh + ohi) * ow;
                                    for owi in wlo..=whi {
                                        let iwi = owi * stride + kw - pad;
                                        let g = god[orow + owi];
                                        wacc += g * ind[irow + iwi];
                                        gid[irow + iwi] += g * wgt;
                                    }
                                }
                            }
                        }
                        gwd[widx] += wacc;
                    }
                }
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

fn check_upconv3d_shapes(
    input: &DenseTensor,
    weights: &DenseTensor,
    bias: &DenseTensor,
) -> Result<(usize, usize, [usize; 3], usize)> {
    let ishape = input.shape();
    let wshape = weights.shape();
    if ishape.len() != 4 || wshape.len() != 5 {
        return Err(Error::Shape(format!(
            "upconv3d expects input [C,D,H,W] and weights [Ci,Co,k,k,k], got {ishape:?} / {wshape:?}"
        )));
    }
    let (c_in, spatial) = (ishape[0], [ishape[1], ishape[2], ishape[3]]);
    let (c_out, k) = (wshape[1], wshape[2]);
    if wshape[0] != c_in || wshape[3] != k || wshape[4] != k {
        return Err(Error::Shape(format!(
            "weights {wshape:?} incompatible with {c_in} input channels"
        )));
    }
    if bias.shape() != [c_out] {
        return Err(Error::Shape(format!(
            "bias {:?} must be [{c_out}]",
            bias.shape()
        )));
    }
    Ok((c_in, c_out, spatial, k))
}

/// Transposed 3D convolution: input index `i` contributes to output indices
/// `[i*s, i*s + k - 1]`; output extent is `(D - 1)*s + k` with no cropping.
pub fn upconv3d(
    input: &DenseTensor,
    weights: &DenseTensor,
    bias: &DenseTensor,
    stride: usize,
) -> Result<DenseTensor> {
    let (c_in, c_out, [d, h, w], k) = check_upconv3d_shapes(input, weights, bias)?;
    if stride == 0 || k < stride {
        return Err(Error::Shape(format!(
            "upconv3d requires 1 <= stride <= kernel, got k={k} s={stride}"
        )));
    }
    let od = (d - 1) * stride + k;
    let oh = (h - 1) * stride + k;
    let ow = (w - 1) * stride + k;
    let mut out = DenseTensor::zeros(&[c_out, od, oh, ow]);

    let ind = input.data();
    let wd = weights.data();
    let outd = out.data_mut();
    for co in 0..c_out {
        let b = bias.data()[co];
        outd[co * od * oh * ow..(co + 1) * od * oh * ow].fill(b);
    }
    for ci in 0..c_in {
        for co in 0..c_out {
            for kd in 0..k {
                for kh in 0..k {
                    for kw in 0..k {
                        let wgt = wd[(((ci * c_out + co) * k + kd) * k + kh) * k + kw];
                        for id in 0..d {
                            let odi = id * stride + kd;
                            for ih in 0..h {
                                let ohi = ih * stride + kh;
                                let irow = ((ci * d + id) * h + ih) * w;
                                let orow = ((co * od + odi) * oh + ohi) * ow + kw;
                                for iw in 0..w {
                                    outd[orow + iw * stride] += wgt * ind[irow + iw];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.debug_assert_finite("upconv3d output");
    Ok(out)
}

/// Gradients of [`upconv3d`] with respect to input, weights, and bias.
pub fn upconv3d_backward(
    input: &DenseTensor,
    weights: &DenseTensor,
    grad_out: &DenseTensor,
    stride: usize,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    let wshape = weights.shape().to_vec();
    let (c_in, c_out, k) = (wshape[0], wshape[1], wshape[2]);
    let [d, h, w] = [input.shape()[1], input.shape()[2], input.shape()[3]];
    let [od, oh, ow] = [grad_out.shape()[1], grad_out.shape()[2], grad_out.shape()[3]];
    if grad_out.shape()[0] != c_out || input.shape()[0] != c_in {
        return Err(Error::Shape("upconv3d backward channel mismatch".into()));
    }

    let mut grad_in = DenseTensor::zeros(input.shape());
    let mut grad_w = DenseTensor::zeros(&wshape);
    let mut grad_b = DenseTensor::zeros(&[c_out]);

    let ind = input.data();
    let wd = weights.data();
    let god = grad_out.data();
    {
        let gb = grad_b.data_mut();
        for co in 0..c_out {
            gb[co] = god[co * od * oh * ow..(co + 1) * od * oh * ow].iter().sum();
        }
    }
    let gid = grad_in.data_mut();
    let gwd = grad_w.data_mut();
    for ci in 0..c_in {
        for co in 0..c_out {
            for kd in 0..k {
                for kh in 0..k {
                    for kw in 0..k {
                        let widx = (((ci * c_out + co) * k + kd) * k + kh) * k + kw;
                        let wgt = wd[widx];
                        let mut wacc = 0.0;
                        for id in 0..d {
                            let odi = id * stride + kd;
                            for ih in 0..h {
                                let ohi = ih * stride + kh;
                                let irow = ((ci * d + id) * h + ih) * w;
                                let orow = ((co * od + odi) * oh + ohi) * ow + kw;
                                for iw in 0..w {
                                    let g = god[orow + iw * stride];
                                    wacc += g * ind[irow + iw];
                                    gid[irow + iw] += g * wgt;
                                }
                            }
                        }
                        gwd[widx] += wacc;
                    }
                }
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}

/// 2D convolution, same contract as [`conv3d`] one dimension down:
/// input [C,H,W], weights [Co,Ci,k,k].
pub fn conv2d(
    input: &DenseTensor,
    weights: &DenseTensor,
    bias: &DenseTensor,
    stride: usize,
    pad: usize,
) -> Result<DenseTensor> {
    let ishape = input.shape();
    let wshape = weights.shape();
    if ishape.len() != 3 || wshape.len() != 4 {
        return Err(Error::Shape(format!(
            "conv2d expects input [C,H,W] and weights [Co,Ci,k,k], got {ishape:?} / {wshape:?}"
        )));
    }
    let (c_in, h, w) = (ishape[0], ishape[1], ishape[2]);
    let (c_out, k) = (wshape[0], wshape[2]);
    if wshape[1] != c_in || wshape[3] != k || bias.shape() != [c_out] {
        return Err(Error::Shape("conv2d weight/bias shape mismatch".into()));
    }
    let oh = out_extent(h, k, stride, pad)?;
    let ow = out_extent(w, k, stride, pad)?;
    let mut out = DenseTensor::zeros(&[c_out, oh, ow]);

    let ind = input.data();
    let wd = weights.data();
    let outd = out.data_mut();
    for co in 0..c_out {
        outd[co * oh * ow..(co + 1) * oh * ow].fill(bias.data()[co]);
        for ci in 0..c_in {
            for kh in 0..k {
                let (hlo, hhi) = valid_out_range(h, oh, kh, stride, pad);
                for kw in 0..k {
                    let (wlo, whi) = valid_out_range(w, ow, kw, stride, pad);
                    let wgt = wd[((co * c_in + ci) * k + kh) * k + kw];
                    if hlo > hhi || wlo > whi {
                        continue;
                    }
                    for ohi in hlo..=hhi {
                        let ihi = ohi * stride + kh - pad;
                        let irow = (ci * h + ihi) * w;
                        let orow = (co * oh + ohi) * ow;
                        for owi in wlo..=whi {
                            let iwi = owi * stride + kw - pad;
                            outd[orow + owi] += wgt * ind[irow + iwi];
                        }
                    }
                }
            }
        }
    }
    out.debug_assert_finite("conv2d output");
    Ok(out)
}

/// Gradients of [`conv2d`].
pub fn conv2d_backward(
    input: &DenseTensor,
    weights: &DenseTensor,
    grad_out: &DenseTensor,
    stride: usize,
    pad: usize,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    let wshape = weights.shape().to_vec();
    let (c_out, c_in, k) = (wshape[0], wshape[1], wshape[2]);
    let (h, w) = (input.shape()[1], input.shape()[2]);
    let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
    if grad_out.shape()[0] != c_out || input.shape()[0] != c_in {
        return Err(Error::Shape("conv2d backward channel mismatch".into()));
    }

    let mut grad_in = DenseTensor::zeros(input.shape());
    let mut grad_w = DenseTensor::zeros(&wshape);
    let mut grad_b = DenseTensor::zeros(&[c_out]);

    let ind = input.data();
    let wd = weights.data();
    let god = grad_out.data();
    {
        let gb = grad_b.data_mut();
        for co in 0..c_out {
            gb[co] = god[co * oh * ow..(co + 1) * oh * ow].iter().sum();
        }
    }
    let gid = grad_in.data_mut();
    let gwd = grad_w.data_mut();
    for co in 0..c_out {
        for ci in 0..c_in {
            for kh in 0..k {
                let (hlo, hhi) = valid_out_range(h, oh, kh, stride, pad);
                for kw in 0..k {
                    let (wlo, whi) = valid_out_range(w, ow, kw, stride, pad);
                    let widx = ((co * c_in + ci) * k + kh) * k + kw;
                    let wgt = wd[widx];
                    let mut wacc = 0.0;
                    if hlo <= hhi && wlo <= whi {
                        for ohi in hlo..=hhi {
                            let ihi = ohi * stride + kh - pad;
                            let irow = (ci * h + ihi) * w;
                            let orow = (co * oh + ohi) * ow;
                            for owi in wlo..=whi {
                                let iwi = owi * stride + kw - pad;
                                let g = god[orow + owi];
                                wacc += g * ind[irow + iwi];
                                gid[irow + iwi] += g * wgt;
                            }
                        }
                    }
                    gwd[widx] += wacc;
                }
            }
        }
    }
    Ok((grad_in, grad_w, grad_b))
}
