//! Convolution kernels: im2col lowering onto a dense GEMM.
//!
//! `conv2d` is cross-correlation (no kernel flip). `conv_transpose2d` is
//! its exact adjoint for the same geometry, so both share one lowering.

use crate::error::{Error, Result};

use super::Tensor;

/// Output extent of a strided, zero-padded correlation along one axis.
pub fn conv2d_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || input + 2 * pad < kernel {
        return None;
    }
    Some((input + 2 * pad - kernel) / stride + 1)
}

/// Output extent of a transposed convolution along one axis.
pub fn conv_transpose_output_size(
    input: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    output_padding: usize,
) -> Option<usize> {
    if stride == 0 || input == 0 || output_padding >= stride {
        return None;
    }
    ((input - 1) * stride + kernel + output_padding)
        .checked_sub(2 * pad)
        .filter(|&n| n > 0)
}

/// Geometry of one correlation between an "image" grid and a "column" grid.
///
/// For `conv2d` the image is the input; for the transposed op the image is
/// the output. Either way the column grid is `out_h × out_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    fn rows(&self) -> usize {
        self.channels * self.kh * self.kw
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    fn image_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Lowers one image to a `rows × cols` patch matrix.
    fn im2col(&self, img: &[f64], cols: &mut [f64]) {
        let ncol = self.cols();
        for c in 0..self.channels {
            let plane = &img[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let dst = &mut cols[row * ncol..(row + 1) * ncol];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        if iy < 0 || iy >= self.height as isize {
                            line.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            *v = if ix < 0 || ix >= self.width as isize {
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

    /// Scatter-adds a patch matrix back onto an image (adjoint of `im2col`).
    fn col2im(&self, cols: &[f64], img: &mut [f64]) {
        let ncol = self.cols();
        for c in 0..self.channels {
            let plane = &mut img[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ki in 0..self.kh {
                for kj in 0..self.kw {
                    let row = (c * self.kh + ki) * self.kw + kj;
                    let src = &cols[row * ncol..(row + 1) * ncol];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ki) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        let line = &src[oy * self.out_w..(oy + 1) * self.out_w];
                        for (ox, v) in line.iter().enumerate() {
                            let ix = (ox * self.stride + kj) as isize - self.pad as isize;
                            if ix >= 0 && (ix as usize) < self.width {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Row-major matrix view for [`gemm`].
#[derive(Clone, Copy)]
struct Mat<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    transposed: bool,
}

impl<'a> Mat<'a> {
    fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Mat {
            data,
            rows,
            cols,
            transposed: false,
        }
    }

    fn t(self) -> Self {
        Mat {
            transposed: !self.transposed,
            ..self
        }
    }

    fn shape(&self) -> (usize, usize) {
        if self.transposed {
            (self.cols, self.rows)
        } else {
            (self.rows, self.cols)
        }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed {
            (1, self.cols as isize)
        } else {
            (self.cols as isize, 1)
        }
    }
}

/// `c = a·b + beta·c`, all row-major.
fn gemm(a: Mat<'_>, b: Mat<'_>, beta: f64, c: &mut [f64]) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "gemm inner dimension");
    assert_eq!(c.len(), m * n, "gemm output size");
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the shapes and strides above describe in-bounds views of the
    // borrowed slices, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn check_kernel(op: &'static str, kernel: &Tensor) -> Result<(usize, usize, usize, usize)> {
    kernel
        .dims4()
        .map_err(|_| Error::shape(op, format!("kernel must be 4-d, got {:?}", kernel.shape())))
}

fn check_bias(op: &'static str, bias: &Tensor, channels: usize) -> Result<()> {
    if bias.shape() != [channels] {
        return Err(Error::shape(
            op,
            format!("bias shape {:?}, expected [{channels}]", bias.shape()),
        ));
    }
    Ok(())
}

/// Resolved geometry of a `conv2d` call.
pub(crate) fn conv2d_geometry(input: &[usize], kernel: &[usize], stride: usize, pad: usize) -> Result<ConvGeometry> {
    const OP: &str = "conv2d";
    let (&[_, cin, h, w], &[_, kcin, kh, kw]) = (input, kernel) else {
        return Err(Error::shape(OP, format!("input {input:?}, kernel {kernel:?}")));
    };
    if stride == 0 {
        return Err(Error::Config("conv2d: stride must be at least 1".into()));
    }
    if cin != kcin {
        return Err(Error::shape(
            OP,
            format!("input channels {cin} but kernel expects {kcin}"),
        ));
    }
    let out_h = conv2d_output_size(h, kh, stride, pad)
        .ok_or_else(|| Error::shape(OP, format!("kernel height {kh} exceeds padded height {}", h + 2 * pad)))?;
    let out_w = conv2d_output_size(w, kw, stride, pad)
        .ok_or_else(|| Error::shape(OP, format!("kernel width {kw} exceeds padded width {}", w + 2 * pad)))?;
    Ok(ConvGeometry {
        channels: cin,
        height: h,
        width: w,
        kh,
        kw,
        stride,
        pad,
        out_h,
        out_w,
    })
}

/// Resolved geometry of a `conv_transpose2d` call (image = output grid).
pub(crate) fn conv_transpose_geometry(
    input: &[usize],
    kernel: &[usize],
    stride: usize,
    pad: usize,
    output_padding: usize,
) -> Result<ConvGeometry> {
    const OP: &str = "conv_transpose2d";
    let (&[_, cin, h, w], &[kcin, cout, kh, kw]) = (input, kernel) else {
        return Err(Error::shape(OP, format!("input {input:?}, kernel {kernel:?}")));
    };
    if stride == 0 {
        return Err(Error::Config(format!("{OP}: stride must be at least 1")));
    }
    if cin != kcin {
        return Err(Error::shape(
            OP,
            format!("input channels {cin} but kernel expects {kcin}"),
        ));
    }
    let too = |axis: &str| {
        Error::Config(format!(
            "{OP}: {axis} geometry unachievable (stride {stride}, pad {pad}, output padding {output_padding}, kernel {kh}x{kw})"
        ))
    };
    let out_h = conv_transpose_output_size(h, kh, stride, pad, output_padding).ok_or_else(|| too("height"))?;
    let out_w = conv_transpose_output_size(w, kw, stride, pad, output_padding).ok_or_else(|| too("width"))?;
    let geom = ConvGeometry {
        channels: cout,
        height: out_h,
        width: out_w,
        kh,
        kw,
        stride,
        pad,
        out_h: h,
        out_w: w,
    };
    // the forward correlation of the output grid must land back on the input grid
    if conv2d_output_size(out_h, kh, stride, pad) != Some(h) || conv2d_output_size(out_w, kw, stride, pad) != Some(w) {
        return Err(too("inverse"));
    }
    Ok(geom)
}

pub(crate) fn conv2d_forward(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
) -> Result<Tensor> {
    let (cout, _, _, _) = check_kernel("conv2d", kernel)?;
    let g = conv2d_geometry(input.shape(), kernel.shape(), stride, pad)?;
    if let Some(b) = bias {
        check_bias("conv2d", b, cout)?;
    }
    let n = input.shape()[0];
    let (rows, ncol) = (g.rows(), g.cols());
    let mut out = vec![0.0; n * cout * ncol];
    let mut cols = vec![0.0; rows * ncol];
    let wmat = Mat::new(kernel.data(), cout, rows);
    for (x, y) in input
        .data()
        .chunks_exact(g.image_len())
        .zip(out.chunks_exact_mut(cout * ncol))
    {
        g.im2col(x, &mut cols);
        if let Some(b) = bias {
            for (plane, &bv) in y.chunks_exact_mut(ncol).zip(b.data()) {
                plane.fill(bv);
            }
        }
        gemm(wmat, Mat::new(&cols, rows, ncol), 1.0, y);
    }
    Tensor::from_vec(&[n, cout, g.out_h, g.out_w], out)
}

/// Gradients of `conv2d` with respect to input, kernel and bias.
pub(crate) fn conv2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    need_input: bool,
) -> Result<(Option<Tensor>, Tensor, Tensor)> {
    let (cout, _, _, _) = check_kernel("conv2d", kernel)?;
    let g = conv2d_geometry(input.shape(), kernel.shape(), stride, pad)?;
    let (rows, ncol) = (g.rows(), g.cols());
    let mut dx = need_input.then(|| vec![0.0; input.len()]);
    let mut dw = vec![0.0; kernel.len()];
    let mut db = vec![0.0; cout];
    let mut cols = vec![0.0; rows * ncol];
    let wmat = Mat::new(kernel.data(), cout, rows);
    for (i, dy) in grad_out.data().chunks_exact(cout * ncol).enumerate() {
        let x = &input.data()[i * g.image_len()..(i + 1) * g.image_len()];
        for (acc, plane) in db.iter_mut().zip(dy.chunks_exact(ncol)) {
            *acc += plane.iter().sum::<f64>();
        }
        g.im2col(x, &mut cols);
        let dymat = Mat::new(dy, cout, ncol);
        gemm(dymat, Mat::new(&cols, rows, ncol).t(), 1.0, &mut dw);
        if let Some(dx) = dx.as_mut() {
            gemm(wmat.t(), dymat, 0.0, &mut cols);
            g.col2im(&cols, &mut dx[i * g.image_len()..(i + 1) * g.image_len()]);
        }
    }
    Ok((
        dx.map(|d| Tensor::from_vec(input.shape(), d)).transpose()?,
        Tensor::from_vec(kernel.shape(), dw)?,
        Tensor::from_vec(&[cout], db)?,
    ))
}

pub(crate) fn conv_transpose2d_forward(
    input: &Tensor,
    kernel: &Tensor,
    bias: Option<&Tensor>,
    stride: usize,
    pad: usize,
    output_padding: usize,
) -> Result<Tensor> {
    let (cin, cout, _, _) = check_kernel("conv_transpose2d", kernel)?;
    let g = conv_transpose_geometry(input.shape(), kernel.shape(), stride, pad, output_padding)?;
    if let Some(b) = bias {
        check_bias("conv_transpose2d", b, cout)?;
    }
    let n = input.shape()[0];
    let (rows, ncol) = (g.rows(), g.cols());
    let mut out = vec![0.0; n * g.image_len()];
    let mut cols = vec![0.0; rows * ncol];
    let wmat = Mat::new(kernel.data(), cin, rows);
    for (x, y) in input
        .data()
        .chunks_exact(cin * ncol)
        .zip(out.chunks_exact_mut(g.image_len()))
    {
        gemm(wmat.t(), Mat::new(x, cin, ncol), 0.0, &mut cols);
        g.col2im(&cols, y);
        if let Some(b) = bias {
            let plane = g.height * g.width;
            for (p, &bv) in y.chunks_exact_mut(plane).zip(b.data()) {
                p.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Tensor::from_vec(&[n, cout, g.height, g.width], out)
}

pub(crate) fn conv_transpose2d_backward(
    input: &Tensor,
    kernel: &Tensor,
    grad_out: &Tensor,
    stride: usize,
    pad: usize,
    output_padding: usize,
    need_input: bool,
) -> Result<(Option<Tensor>, Tensor, Tensor)> {
    let (cin, cout, _, _) = check_kernel("conv_transpose2d", kernel)?;
    let g = conv_transpose_geometry(input.shape(), kernel.shape(), stride, pad, output_padding)?;
    let (rows, ncol) = (g.rows(), g.cols());
    let mut dx = need_input.then(|| vec![0.0; input.len()]);
    let mut dw = vec![0.0; kernel.len()];
    let mut db = vec![0.0; cout];
    let mut cols = vec![0.0; rows * ncol];
    let wmat = Mat::new(kernel.data(), cin, rows);
    let plane = g.height * g.width;
    for (i, dy) in grad_out.data().chunks_exact(g.image_len()).enumerate() {
        let x = &input.data()[i * cin * ncol..(i + 1) * cin * ncol];
        for (acc, p) in db.iter_mut().zip(dy.chunks_exact(plane)) {
            *acc += p.iter().sum::<f64>();
        }
        g.im2col(dy, &mut cols);
        let cmat = Mat::new(&cols, rows, ncol);
        gemm(Mat::new(x, cin, ncol), cmat.t(), 1.0, &mut dw);
        if let Some(dx) = dx.as_mut() {
            gemm(wmat, cmat, 0.0, &mut dx[i * cin * ncol..(i + 1) * cin * ncol]);
        }
    }
    Ok((
        dx.map(|d| Tensor::from_vec(input.shape(), d)).transpose()?,
        Tensor::from_vec(kernel.shape(), dw)?,
        Tensor::from_vec(&[cout], db)?,
    ))
}
