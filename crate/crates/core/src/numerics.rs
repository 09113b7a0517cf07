//! Dense row-major arrays and the handful of image kernels the rest of the
//! crate is built on.
//!
//! Three-dimensional arrays are always indexed `(channel, row, col)`.

use crate::error::{dim_err, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(dim_err!("zero extent in shape {shape:?}"));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(dim_err!("shape {shape:?} needs {n} values, got {}", data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn from_fn(shape: &[usize], f: impl FnMut(usize) -> f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..n).map(f).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Extents of a 3-D array as `(channels, rows, cols)`.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [c, h, w] => Ok((c, h, w)),
            _ => Err(dim_err!("expected a C×H×W array, got {:?}", self.shape)),
        }
    }

    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        let (h, w) = (self.shape[1], self.shape[2]);
        self.data[(c * h + y) * w + x]
    }

    #[inline]
    pub fn at3_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        let (h, w) = (self.shape[1], self.shape[2]);
        &mut self.data[(c * h + y) * w + x]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.expect_shape(other.shape())?;
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.expect_shape(other.shape())?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn expect_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(dim_err!("shape {:?} does not match {:?}", self.shape, shape));
        }
        Ok(())
    }
}

/// Output extent of a strided window sweep, `None` if the window does not fit.
pub fn window_extent(input: usize, window: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if stride == 0 || window == 0 || window > padded {
        return None;
    }
    Some((padded - window) / stride + 1)
}

/// Max pooling over `k×k` windows at stride `s`.
pub fn max_pool2d(x: &DenseArray, k: usize, s: usize) -> Result<DenseArray> {
    max_pool2d_with_indices(x, k, s).map(|(y, _)| y)
}

/// Max pooling that also returns, per output element, the flat index of the
/// input element it was taken from. Ties resolve to the first in scan order.
pub fn max_pool2d_with_indices(x: &DenseArray, k: usize, s: usize) -> Result<(DenseArray, Vec<usize>)> {
    let (c, h, w) = x.dims3()?;
    let (ho, wo) = match (window_extent(h, k, s, 0), window_extent(w, k, s, 0)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(dim_err!("pool window {k} stride {s} does not fit {h}×{w}")),
    };
    let plane = ho * wo;
    let per_channel = par::map_range(c, |ch| {
        let mut vals = Vec::with_capacity(plane);
        let mut idx = Vec::with_capacity(plane);
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = usize::MAX;
                for dy in 0..k {
                    for dx in 0..k {
                        let i = (ch * h + oy * s + dy) * w + ox * s + dx;
                        if best_i == usize::MAX || x.data[i] > best {
                            best = x.data[i];
                            best_i = i;
                        }
                    }
                }
                vals.push(best);
                idx.push(best_i);
            }
        }
        (vals, idx)
    });
    let mut data = Vec::with_capacity(c * plane);
    let mut indices = Vec::with_capacity(c * plane);
    for (v, i) in per_channel {
        data.extend(v);
        indices.extend(i);
    }
    Ok((DenseArray::new(vec![c, ho, wo], data)?, indices))
}

/// Routes pooled-output cotangents back to the argmax positions.
pub fn max_pool2d_backward(dy: &DenseArray, indices: &[usize], input_shape: &[usize]) -> Result<DenseArray> {
    if dy.len() != indices.len() {
        return Err(dim_err!(
            "pool cotangent has {} values for {} indices",
            dy.len(),
            indices.len()
        ));
    }
    let mut dx = DenseArray::zeros(input_shape);
    for (&g, &i) in dy.data.iter().zip(indices) {
        dx.data[i] += g;
    }
    Ok(dx)
}

/// Mean over a `k×k` window centred on each pixel (stride 1, output the same
/// size as the input). Only in-bounds pixels are counted, so a constant input
/// maps to itself everywhere including the border. `k` must be odd.
pub fn avg_pool2d_same(x: &DenseArray, k: usize) -> Result<DenseArray> {
    let (c, h, w) = x.dims3()?;
    if k.is_multiple_of(2) {
        return Err(dim_err!("same-size average pooling needs an odd window, got {k}"));
    }
    let r = k / 2;
    // Summed-area table per channel.
    let mut out = DenseArray::zeros(&[c, h, w]);
    par::for_each_chunk_mut(&mut out.data, h * w, |ch, plane| {
        let mut sat = vec![0.0; (h + 1) * (w + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for xx in 0..w {
                row += x.data[(ch * h + y) * w + xx];
                sat[(y + 1) * (w + 1) + xx + 1] = sat[y * (w + 1) + xx + 1] + row;
            }
        }
        for y in 0..h {
            let y0 = y.saturating_sub(r);
            let y1 = (y + r + 1).min(h);
            for xx in 0..w {
                let x0 = xx.saturating_sub(r);
                let x1 = (xx + r + 1).min(w);
                let s =
                    sat[y1 * (w + 1) + x1] - sat[y0 * (w + 1) + x1] - sat[y1 * (w + 1) + x0] + sat[y0 * (w + 1) + x0];
                plane[y * w + xx] = s / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
    });
    Ok(out)
}

/// Four taps of a bilinear lookup at a border-clamped position.
#[derive(Clone, Copy, Debug)]
pub(crate) struct BilinearTaps {
    pub idx: [usize; 4],
    pub wt: [f64; 4],
}

#[inline]
pub(crate) fn bilinear_taps(h: usize, w: usize, px: f64, py: f64) -> BilinearTaps {
    let xs = px.clamp(0.0, (w - 1) as f64);
    let ys = py.clamp(0.0, (h - 1) as f64);
    let x0 = xs.floor() as usize;
    let y0 = ys.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let fx = xs - x0 as f64;
    let fy = ys - y0 as f64;
    BilinearTaps {
        idx: [y0 * w + x0, y0 * w + x1, y1 * w + x0, y1 * w + x1],
        wt: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
    }
}

/// Samples every channel of `x` at the given `(col, row)` positions.
///
/// `coords` holds one position per output pixel in row-major order over an
/// `out_h×out_w` grid. Positions outside the image are clamped to the border.
pub fn bilinear_sample(x: &DenseArray, coords: &[[f64; 2]], out_h: usize, out_w: usize) -> Result<DenseArray> {
    let (c, h, w) = x.dims3()?;
    if coords.len() != out_h * out_w {
        return Err(dim_err!(
            "{} sample positions for a {out_h}×{out_w} output",
            coords.len()
        ));
    }
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(crate::Error::NonFinite("sample coordinate".into()));
    }
    let taps: Vec<BilinearTaps> = coords.iter().map(|&[px, py]| bilinear_taps(h, w, px, py)).collect();
    let mut out = DenseArray::zeros(&[c, out_h, out_w]);
    par::for_each_chunk_mut(&mut out.data, out_h * out_w, |ch, plane| {
        let src = &x.data[ch * h * w..(ch + 1) * h * w];
        for (o, t) in plane.iter_mut().zip(&taps) {
            *o = t.wt[0] * src[t.idx[0]] + t.wt[1] * src[t.idx[1]] + t.wt[2] * src[t.idx[2]] + t.wt[3] * src[t.idx[3]];
        }
    });
    Ok(out)
}

/// 2-D cross-correlation of a `C×H×W` input with an `O×C×kh×kw` kernel.
pub fn conv2d(
    x: &DenseArray,
    weight: &DenseArray,
    bias: Option<&DenseArray>,
    stride: usize,
    padding: usize,
) -> Result<DenseArray> {
    let (c, h, w) = x.dims3()?;
    let (o, kc, kh, kw) = kernel_dims(weight)?;
    if kc != c {
        return Err(dim_err!("kernel expects {kc} input channels, input has {c}"));
    }
    if let Some(b) = bias {
        b.expect_shape(&[o])?;
    }
    let (ho, wo) = match (
        window_extent(h, kh, stride, padding),
        window_extent(w, kw, stride, padding),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(dim_err!(
                "kernel {kh}×{kw} stride {stride} padding {padding} does not fit {h}×{w}"
            ))
        }
    };
    let mut out = DenseArray::zeros(&[o, ho, wo]);
    par::for_each_chunk_mut(&mut out.data, ho * wo, |oc, plane| {
        let b = bias.map_or(0.0, |b| b.data[oc]);
        plane.iter_mut().for_each(|v| *v = b);
        for ic in 0..c {
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = weight.data[((oc * c + ic) * kh + ky) * kw + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..ho {
                        let iy = (oy * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = (ic * h + iy as usize) * w;
                        for ox in 0..wo {
                            let ix = (ox * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            plane[oy * wo + ox] += wv * x.data[row + ix as usize];
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Gradients of [`conv2d`]: `(d input, d weight, d bias)`.
pub fn conv2d_backward(
    x: &DenseArray,
    weight: &DenseArray,
    dy: &DenseArray,
    stride: usize,
    padding: usize,
) -> Result<(DenseArray, DenseArray, DenseArray)> {
    let (c, h, w) = x.dims3()?;
    let (o, _, kh, kw) = kernel_dims(weight)?;
    let (dyo, ho, wo) = dy.dims3()?;
    if dyo != o {
        return Err(dim_err!("cotangent has {dyo} channels, kernel produces {o}"));
    }
    let in_at = |oy: usize, ky: usize, ox: usize, kx: usize| -> Option<(usize, usize)> {
        let iy = (oy * stride + ky) as isize - padding as isize;
        let ix = (ox * stride + kx) as isize - padding as isize;
        (iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize).then_some((iy as usize, ix as usize))
    };

    let mut dw = DenseArray::zeros(weight.shape());
    par::for_each_chunk_mut(&mut dw.data, c * kh * kw, |oc, block| {
        let g = &dy.data[oc * ho * wo..(oc + 1) * ho * wo];
        for ic in 0..c {
            for ky in 0..kh {
                for kx in 0..kw {
                    let mut acc = 0.0;
                    for oy in 0..ho {
                        for ox in 0..wo {
                            if let Some((iy, ix)) = in_at(oy, ky, ox, kx) {
                                acc += g[oy * wo + ox] * x.data[(ic * h + iy) * w + ix];
                            }
                        }
                    }
                    block[(ic * kh + ky) * kw + kx] = acc;
                }
            }
        }
    });

    let db = DenseArray::new(
        vec![o],
        (0..o)
            .map(|oc| dy.data[oc * ho * wo..(oc + 1) * ho * wo].iter().sum())
            .collect(),
    )?;

    let mut dx = DenseArray::zeros(&[c, h, w]);
    par::for_each_chunk_mut(&mut dx.data, h * w, |ic, plane| {
        for oc in 0..o {
            let g = &dy.data[oc * ho * wo..(oc + 1) * ho * wo];
            for ky in 0..kh {
                for kx in 0..kw {
                    let wv = weight.data[((oc * c + ic) * kh + ky) * kw + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    for oy in 0..ho {
                        for ox in 0..wo {
                            if let Some((iy, ix)) = in_at(oy, ky, ox, kx) {
                                plane[iy * w + ix] += wv * g[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    });
    Ok((dx, dw, db))
}

fn kernel_dims(weight: &DenseArray) -> Result<(usize, usize, usize, usize)> {
    match weight.shape[..] {
        [o, c, kh, kw] => Ok((o, c, kh, kw)),
        _ => Err(dim_err!("expected an O×C×kh×kw kernel, got {:?}", weight.shape)),
    }
}

fn resize_taps(input: usize, output: usize) -> Vec<(usize, usize, f64)> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(input - 1);
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect()
}

/// Bilinear resize with half-pixel centres (the `align_corners = false`
/// convention).
pub fn resize_bilinear(x: &DenseArray, out_h: usize, out_w: usize) -> Result<DenseArray> {
    let (c, h, w) = x.dims3()?;
    let ty = resize_taps(h, out_h);
    let tx = resize_taps(w, out_w);
    let mut out = DenseArray::zeros(&[c, out_h, out_w]);
    par::for_each_chunk_mut(&mut out.data, out_h * out_w, |ch, plane| {
        let src = &x.data[ch * h * w..(ch + 1) * h * w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                plane[oy * out_w + ox] = (1.0 - fy) * ((1.0 - fx) * src[y0 * w + x0] + fx * src[y0 * w + x1])
                    + fy * ((1.0 - fx) * src[y1 * w + x0] + fx * src[y1 * w + x1]);
            }
        }
    });
    Ok(out)
}

/// Adjoint of [`resize_bilinear`].
pub fn resize_bilinear_backward(dy: &DenseArray, in_h: usize, in_w: usize) -> Result<DenseArray> {
    let (c, out_h, out_w) = dy.dims3()?;
    let ty = resize_taps(in_h, out_h);
    let tx = resize_taps(in_w, out_w);
    let mut dx = DenseArray::zeros(&[c, in_h, in_w]);
    par::for_each_chunk_mut(&mut dx.data, in_h * in_w, |ch, plane| {
        let g = &dy.data[ch * out_h * out_w..(ch + 1) * out_h * out_w];
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in tx.iter().enumerate() {
                let v = g[oy * out_w + ox];
                plane[y0 * in_w + x0] += (1.0 - fy) * (1.0 - fx) * v;
                plane[y0 * in_w + x1] += (1.0 - fy) * fx * v;
                plane[y1 * in_w + x0] += fy * (1.0 - fx) * v;
                plane[y1 * in_w + x1] += fy * fx * v;
            }
        }
    });
    Ok(dx)
}

/// Stacks `C_i×H×W` arrays along the channel axis.
pub fn concat_channels(parts: &[&DenseArray]) -> Result<DenseArray> {
    let (_, h, w) = parts
        .first()
        .ok_or_else(|| dim_err!("nothing to concatenate"))?
        .dims3()?;
    let mut c_total = 0;
    let mut data = Vec::new();
    for p in parts {
        let (c, ph, pw) = p.dims3()?;
        if (ph, pw) != (h, w) {
            return Err(dim_err!("cannot stack {ph}×{pw} onto {h}×{w}"));
        }
        c_total += c;
        data.extend_from_slice(&p.data);
    }
    DenseArray::new(vec![c_total, h, w], data)
}

/// Inverse of [`concat_channels`]: splits off consecutive channel groups.
pub fn split_channels(x: &DenseArray, counts: &[usize]) -> Result<Vec<DenseArray>> {
    let (c, h, w) = x.dims3()?;
    if counts.iter().sum::<usize>() != c {
        return Err(dim_err!("channel split {counts:?} does not cover {c} channels"));
    }
    let mut start = 0;
    counts
        .iter()
        .map(|&n| {
            let part = x.data[start * h * w..(start + n) * h * w].to_vec();
            start += n;
            DenseArray::new(vec![n, h, w], part)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arr3(c: usize, h: usize, w: usize, data: &[f64]) -> DenseArray {
        DenseArray::new(vec![c, h, w], data.to_vec()).unwrap()
    }

    #[test]
    fn shape_must_match_data() {
        assert!(DenseArray::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(DenseArray::new(vec![2, 0], vec![]).is_err());
    }

    #[test]
    fn max_pool_picks_window_max() {
        let x = arr3(1, 2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let y = max_pool2d(&x, 2, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[4.0]);
    }

    #[test]
    fn max_pool_constant_stays_constant() {
        let x = DenseArray::full(&[2, 7, 5], 3.5);
        for (k, s) in [(2, 2), (3, 1), (2, 3)] {
            let y = max_pool2d(&x, k, s).unwrap();
            let (_, ho, wo) = y.dims3().unwrap();
            assert_eq!(ho, (7 - k) / s + 1);
            assert_eq!(wo, (5 - k) / s + 1);
            assert!(y.data().iter().all(|&v| v == 3.5));
        }
    }

    #[test]
    fn max_pool_rejects_oversized_window() {
        let x = DenseArray::zeros(&[1, 3, 3]);
        assert!(matches!(max_pool2d(&x, 4, 1), Err(crate::Error::Dimension(_))));
        assert!(max_pool2d(&x, 2, 0).is_err());
    }

    #[test]
    fn max_pool_backward_scatters_to_argmax() {
        let x = arr3(1, 2, 4, &[1.0, 5.0, 0.0, 0.0, 2.0, 3.0, 0.0, 7.0]);
        let (y, idx) = max_pool2d_with_indices(&x, 2, 2).unwrap();
        assert_eq!(y.data(), &[5.0, 7.0]);
        let g = max_pool2d_backward(&arr3(1, 1, 2, &[10.0, 20.0]), &idx, x.shape()).unwrap();
        assert_eq!(g.data(), &[0.0, 10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 20.0]);
    }

    #[test]
    fn avg_pool_same_keeps_constants() {
        let x = DenseArray::full(&[1, 9, 6], 1.0);
        let y = avg_pool2d_same(&x, 5).unwrap();
        assert!(y.data().iter().all(|&v| (v - 1.0).abs() < 1e-15));
        assert!(avg_pool2d_same(&x, 4).is_err());
    }

    #[test]
    fn bilinear_identity_and_ramp() {
        let x = arr3(1, 2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let coords: Vec<[f64; 2]> = (0..2)
            .flat_map(|y| (0..3).map(move |xx| [xx as f64, y as f64]))
            .collect();
        assert_eq!(bilinear_sample(&x, &coords, 2, 3).unwrap(), x);

        let ramp = arr3(1, 1, 2, &[0.0, 1.0]);
        let y = bilinear_sample(&ramp, &[[0.5, 0.0]], 1, 1).unwrap();
        assert_eq!(y.data(), &[0.5]);
    }

    #[test]
    fn bilinear_clamps_out_of_bounds() {
        let x = arr3(1, 2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let y = bilinear_sample(&x, &[[-3.0, -1.0], [9.0, 0.0], [0.0, 5.0], [7.5, 7.5]], 2, 2).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn conv_identity_and_window_sum() {
        let x = arr3(1, 3, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
        let id = DenseArray::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        assert_eq!(conv2d(&x, &id, None, 1, 0).unwrap(), x);

        let ones = DenseArray::full(&[1, 1, 3, 3], 1.0);
        let y = conv2d(&DenseArray::full(&[1, 3, 3], 1.0), &ones, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[9.0]);
    }

    #[test]
    fn conv_shape_errors() {
        let x = DenseArray::zeros(&[2, 3, 3]);
        let k = DenseArray::zeros(&[1, 3, 1, 1]);
        assert!(conv2d(&x, &k, None, 1, 0).is_err());
        let big = DenseArray::zeros(&[1, 2, 5, 5]);
        assert!(conv2d(&x, &big, None, 1, 0).is_err());
        assert!(conv2d(&x, &big, None, 1, 1).is_ok());
    }

    #[test]
    fn resize_to_same_size_is_identity() {
        let x = DenseArray::from_fn(&[2, 3, 4], |i| i as f64 * 0.5);
        assert_eq!(resize_bilinear(&x, 3, 4).unwrap(), x);
    }

    #[test]
    fn concat_then_split_restores_parts() {
        let a = DenseArray::from_fn(&[2, 2, 2], |i| i as f64);
        let b = DenseArray::from_fn(&[1, 2, 2], |i| -(i as f64));
        let s = concat_channels(&[&a, &b]).unwrap();
        assert_eq!(s.shape(), &[3, 2, 2]);
        let parts = split_channels(&s, &[2, 1]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }
}
