//! Forward and backward kernels for the fixed layer vocabulary.
//!
//! Image tensors are `(batch, channels, height, width)`. Convolutions are 3x3
//! with one pixel of zero padding on every side: stride 1 keeps the spatial
//! size, stride 2 produces `ceil(size / 2)`.

use super::Tensor;
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
const PAD: usize = 1;

/// `c = op(a) * op(b) + beta * c`, all operands row-major.
///
/// `a` is stored as `a_rows x a_cols`; with `trans_a` the product uses its
/// transpose. Same for `b`. Single-threaded, so results are bit-reproducible.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    a: &[f64],
    a_rows: usize,
    a_cols: usize,
    trans_a: bool,
    b: &[f64],
    b_rows: usize,
    b_cols: usize,
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    let (m, k) = if trans_a { (a_cols, a_rows) } else { (a_rows, a_cols) };
    let (kb, n) = if trans_b { (b_cols, b_rows) } else { (b_rows, b_cols) };
    assert_eq!(k, kb, "gemm inner dimensions");
    assert_eq!(a.len(), a_rows * a_cols);
    assert_eq!(b.len(), b_rows * b_cols);
    assert_eq!(c.len(), m * n);
    let (rsa, csa) = if trans_a { (1, a_cols) } else { (a_cols, 1) };
    let (rsb, csb) = if trans_b { (1, b_cols) } else { (b_cols, 1) };
    // SAFETY: the asserts above bound every index the kernel touches:
    // op(a) is m x k, op(b) is k x n and c is m x n, all within their slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn conv_output_size(size: usize, stride: usize) -> usize {
    (size + 2 * PAD - KERNEL) / stride + 1
}

fn image_dims(x: &Tensor, context: &str) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [b, c, h, w] => Ok((b, c, h, w)),
        _ => Err(Error::shape(context, &[0, 0, 0, 0], x.shape())),
    }
}

/// Lays out the receptive fields of one sample as a `(c*9) x (ho*wo)` matrix.
fn im2col(x: &[f64], c: usize, h: usize, w: usize, stride: usize, col: &mut [f64]) {
    let ho = conv_output_size(h, stride);
    let wo = conv_output_size(w, stride);
    let n = ho * wo;
    for ch in 0..c {
        let plane = &x[ch * h * w..(ch + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ch * KERNEL + ky) * KERNEL + kx;
                let dst = &mut col[row * n..(row + 1) * n];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - PAD as isize;
                    let line = &mut dst[oy * wo..(oy + 1) * wo];
                    if iy < 0 || iy >= h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - PAD as isize;
                        *v = if ix < 0 || ix >= w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Scatter-adds a column matrix back onto the image it was taken from.
fn col2im(col: &[f64], c: usize, h: usize, w: usize, stride: usize, x: &mut [f64]) {
    let ho = conv_output_size(h, stride);
    let wo = conv_output_size(w, stride);
    let n = ho * wo;
    for ch in 0..c {
        let plane = &mut x[ch * h * w..(ch + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (ch * KERNEL + ky) * KERNEL + kx;
                let src = &col[row * n..(row + 1) * n];
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - PAD as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let base = iy as usize * w;
                    for ox in 0..wo {
                        let ix = (ox * stride + kx) as isize - PAD as isize;
                        if ix >= 0 && ix < w as isize {
                            plane[base + ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
}

/// `y = W x + b` for every batch row. `weight` is `(outputs, inputs)`.
pub fn dense_forward(weight: &Tensor, bias: &Tensor, x: &Tensor) -> Result<Tensor> {
    let (outputs, inputs) = (weight.shape()[0], weight.shape()[1]);
    if x.sample_len() != inputs {
        return Err(Error::shape("dense input", &[inputs], &[x.sample_len()]));
    }
    let batch = x.batch();
    let mut y = vec![0.0; batch * outputs];
    for row in y.chunks_mut(outputs) {
        row.copy_from_slice(bias.data());
    }
    gemm(
        x.data(),
        batch,
        inputs,
        false,
        weight.data(),
        outputs,
        inputs,
        true,
        &mut y,
        1.0,
    );
    Tensor::new(vec![batch, outputs], y)
}

/// Accumulates parameter gradients and returns the input gradient.
pub fn dense_backward(
    weight: &Tensor,
    x: &Tensor,
    grad_out: &Tensor,
    grad_weight: &mut Tensor,
    grad_bias: &mut Tensor,
) -> Result<Tensor> {
    let (outputs, inputs) = (weight.shape()[0], weight.shape()[1]);
    let batch = x.batch();
    if grad_out.shape() != [batch, outputs] {
        return Err(Error::shape("dense upstream gradient", &[batch, outputs], grad_out.shape()));
    }
    gemm(
        grad_out.data(),
        batch,
        outputs,
        true,
        x.data(),
        batch,
        inputs,
        false,
        grad_weight.data_mut(),
        1.0,
    );
    let gb = grad_bias.data_mut();
    for row in grad_out.data().chunks(outputs) {
        for (g, v) in gb.iter_mut().zip(row) {
            *g += v;
        }
    }
    let mut gx = vec![0.0; batch * inputs];
    gemm(
        grad_out.data(),
        batch,
        outputs,
        false,
        weight.data(),
        outputs,
        inputs,
        false,
        &mut gx,
        0.0,
    );
    Tensor::new(x.shape().to_vec(), gx)
}

/// 3x3 cross-correlation. `weight` is `(out_channels, in_channels, 3, 3)`.
pub fn conv2d_forward(weight: &Tensor, bias: &Tensor, x: &Tensor, stride: usize) -> Result<Tensor> {
    let (batch, c, h, w) = image_dims(x, "conv2d input")?;
    let (out_c, in_c) = (weight.shape()[0], weight.shape()[1]);
    if c != in_c {
        return Err(Error::shape("conv2d input channels", &[in_c], &[c]));
    }
    if h + 2 * PAD < KERNEL || w + 2 * PAD < KERNEL {
        return Err(Error::shape("conv2d spatial extent", &[KERNEL, KERNEL], &[h, w]));
    }
    let ho = conv_output_size(h, stride);
    let wo = conv_output_size(w, stride);
    let k = c * KERNEL * KERNEL;
    let n = ho * wo;
    let mut col = vec![0.0; k * n];
    let mut out = vec![0.0; batch * out_c * n];
    for (b, dst) in out.chunks_mut(out_c * n).enumerate() {
        im2col(x.sample(b), c, h, w, stride, &mut col);
        for (plane, &bv) in dst.chunks_mut(n).zip(bias.data()) {
            plane.fill(bv);
        }
        gemm(weight.data(), out_c, k, false, &col, k, n, false, dst, 1.0);
    }
    Tensor::new(vec![batch, out_c, ho, wo], out)
}

pub fn conv2d_backward(
    weight: &Tensor,
    x: &Tensor,
    stride: usize,
    grad_out: &Tensor,
    grad_weight: &mut Tensor,
    grad_bias: &mut Tensor,
) -> Result<Tensor> {
    let (batch, c, h, w) = image_dims(x, "conv2d input")?;
    let out_c = weight.shape()[0];
    let ho = conv_output_size(h, stride);
    let wo = conv_output_size(w, stride);
    if grad_out.shape() != [batch, out_c, ho, wo] {
        return Err(Error::shape(
            "conv2d upstream gradient",
            &[batch, out_c, ho, wo],
            grad_out.shape(),
        ));
    }
    let k = c * KERNEL * KERNEL;
    let n = ho * wo;
    let mut col = vec![0.0; k * n];
    let mut dcol = vec![0.0; k * n];
    let mut gx = Tensor::zeros(x.shape());
    for b in 0..batch {
        let dy = grad_out.sample(b);
        im2col(x.sample(b), c, h, w, stride, &mut col);
        gemm(dy, out_c, n, false, &col, k, n, true, grad_weight.data_mut(), 1.0);
        for (g, plane) in grad_bias.data_mut().iter_mut().zip(dy.chunks(n)) {
            *g += plane.iter().sum::<f64>();
        }
        gemm(weight.data(), out_c, k, true, dy, out_c, n, false, &mut dcol, 0.0);
        col2im(&dcol, c, h, w, stride, gx.sample_mut(b));
    }
    Ok(gx)
}

/// 2x2 max pooling; also returns the flat input index chosen for each output.
pub fn maxpool2x2_forward(x: &Tensor) -> Result<(Tensor, Vec<usize>)> {
    let (batch, c, h, w) = image_dims(x, "maxpool input")?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidConfig(format!(
            "maxpool2x2 needs even spatial dims, got {h}x{w}"
        )));
    }
    let (ho, wo) = (h / 2, w / 2);
    let src = x.data();
    let mut out = Vec::with_capacity(batch * c * ho * wo);
    let mut argmax = Vec::with_capacity(out.capacity());
    for plane in 0..batch * c {
        let base = plane * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + 2 * oy * w + 2 * ox;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                    if src[idx] > src[best] {
                        best = idx;
                    }
                }
                out.push(src[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(vec![batch, c, ho, wo], out)?, argmax))
}

pub fn maxpool2x2_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape("maxpool upstream gradient", &[argmax.len()], &[grad_out.len()]));
    }
    let mut gx = Tensor::zeros(input_shape);
    let dst = gx.data_mut();
    for (&idx, &g) in argmax.iter().zip(grad_out.data()) {
        dst[idx] += g;
    }
    Ok(gx)
}

/// Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.
pub fn upsample2x2_forward(x: &Tensor) -> Result<Tensor> {
    let (batch, c, h, w) = image_dims(x, "upsample input")?;
    let (ho, wo) = (2 * h, 2 * w);
    let mut out = vec![0.0; batch * c * ho * wo];
    for (plane, dst) in x.data().chunks(h * w).zip(out.chunks_mut(ho * wo)) {
        for y in 0..ho {
            for xo in 0..wo {
                dst[y * wo + xo] = plane[(y / 2) * w + xo / 2];
            }
        }
    }
    Tensor::new(vec![batch, c, ho, wo], out)
}

pub fn upsample2x2_backward(input_shape: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    let (h, w) = (input_shape[2], input_shape[3]);
    let (ho, wo) = (2 * h, 2 * w);
    let expected = [input_shape[0], input_shape[1], ho, wo];
    if grad_out.shape() != expected {
        return Err(Error::shape("upsample upstream gradient", &expected, grad_out.shape()));
    }
    let mut gx = Tensor::zeros(input_shape);
    for (src, plane) in grad_out.data().chunks(ho * wo).zip(gx.data_mut().chunks_mut(h * w)) {
        for y in 0..ho {
            for xo in 0..wo {
                plane[(y / 2) * w + xo / 2] += src[y * wo + xo];
            }
        }
    }
    Ok(gx)
}
