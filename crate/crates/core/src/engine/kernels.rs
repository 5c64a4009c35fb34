//! Raw NCHW kernels behind the tape ops. Everything here works on flat slices;
//! shape validation happens in [`super::tape`].

/// Geometry of a strided, zero-padded correlation mapping a "wide" map of
/// `in_ch × in_h × in_w` onto a "narrow" map of `out_ch × out_h × out_w`.
///
/// A transposed convolution uses the same geometry read backwards, which is
/// what makes the two ops exact adjoints of each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_ch: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad_before: usize,
}

impl ConvGeom {
    fn in_plane(&self) -> usize {
        self.in_ch * self.in_h * self.in_w
    }

    fn out_pixels(&self) -> usize {
        self.out_h * self.out_w
    }

    fn col_rows(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }
}

/// `c = alpha * op(a) * op(b) + beta * c` for row-major operands, where
/// `op(a)` is `m × k` and `op(b)` is `k × n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the slice lengths asserted above cover every index reachable
    // through the given dimensions and strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Output columns `ox` whose input column `ox * stride + kx - pad` lies
/// inside `0..in_w`.
fn valid_cols(g: &ConvGeom, kx: usize) -> std::ops::Range<usize> {
    let lo = g.pad_before.saturating_sub(kx).div_ceil(g.stride);
    let reach = g.in_w + g.pad_before;
    let hi = if reach > kx {
        ((reach - kx - 1) / g.stride + 1).min(g.out_w)
    } else {
        0
    };
    lo..hi.max(lo)
}

fn im2col(x: &[f64], g: &ConvGeom, col: &mut [f64]) {
    let k = g.kernel;
    let p = g.out_pixels();
    for ci in 0..g.in_ch {
        let plane = &x[ci * g.in_h * g.in_w..(ci + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &mut col[((ci * k + ky) * k + kx) * p..][..p];
                let cols = valid_cols(g, kx);
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad_before as isize;
                    let dst = &mut row[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= g.in_h as isize || cols.is_empty() {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    dst[..cols.start].fill(0.0);
                    dst[cols.end..].fill(0.0);
                    let first = cols.start * g.stride + kx - g.pad_before;
                    if g.stride == 1 {
                        dst[cols.clone()].copy_from_slice(&src[first..first + cols.len()]);
                    } else {
                        for (j, d) in dst[cols.clone()].iter_mut().enumerate() {
                            *d = src[first + j * g.stride];
                        }
                    }
                }
            }
        }
    }
}

fn col2im(col: &[f64], g: &ConvGeom, x: &mut [f64]) {
    let k = g.kernel;
    let p = g.out_pixels();
    for ci in 0..g.in_ch {
        let plane = &mut x[ci * g.in_h * g.in_w..(ci + 1) * g.in_h * g.in_w];
        for ky in 0..k {
            for kx in 0..k {
                let row = &col[((ci * k + ky) * k + kx) * p..][..p];
                let cols = valid_cols(g, kx);
                if cols.is_empty() {
                    continue;
                }
                let first = cols.start * g.stride + kx - g.pad_before;
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ky) as isize - g.pad_before as isize;
                    if iy < 0 || iy >= g.in_h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.in_w..(iy as usize + 1) * g.in_w];
                    let src = &row[oy * g.out_w..(oy + 1) * g.out_w][cols.clone()];
                    for (j, s) in src.iter().enumerate() {
                        dst[first + j * g.stride] += s;
                    }
                }
            }
        }
    }
}

/// Correlation: wide `x` → narrow output. `w` is `out_ch × in_ch × k × k`.
pub(crate) fn conv_forward(x: &[f64], w: &[f64], g: &ConvGeom) -> Vec<f64> {
    let p = g.out_pixels();
    let rows = g.col_rows();
    let mut col = vec![0.0; rows * p];
    let mut out = vec![0.0; g.batch * g.out_ch * p];
    for n in 0..g.batch {
        im2col(&x[n * g.in_plane()..(n + 1) * g.in_plane()], g, &mut col);
        let y = &mut out[n * g.out_ch * p..(n + 1) * g.out_ch * p];
        gemm(g.out_ch, rows, p, w, false, &col, false, 0.0, y);
    }
    out
}

/// Adjoint of [`conv_forward`] in its first argument: narrow `dy` → wide map.
pub(crate) fn conv_adjoint_input(dy: &[f64], w: &[f64], g: &ConvGeom) -> Vec<f64> {
    let p = g.out_pixels();
    let rows = g.col_rows();
    let mut col = vec![0.0; rows * p];
    let mut out = vec![0.0; g.batch * g.in_plane()];
    for n in 0..g.batch {
        let dy_n = &dy[n * g.out_ch * p..(n + 1) * g.out_ch * p];
        gemm(rows, g.out_ch, p, w, true, dy_n, false, 0.0, &mut col);
        col2im(&col, g, &mut out[n * g.in_plane()..(n + 1) * g.in_plane()]);
    }
    out
}

/// Gradient of `<dy, conv_forward(x, w)>` with respect to `w`.
pub(crate) fn conv_adjoint_weight(x: &[f64], dy: &[f64], g: &ConvGeom) -> Vec<f64> {
    let p = g.out_pixels();
    let rows = g.col_rows();
    let mut col = vec![0.0; rows * p];
    let mut dw = vec![0.0; g.out_ch * rows];
    for n in 0..g.batch {
        im2col(&x[n * g.in_plane()..(n + 1) * g.in_plane()], g, &mut col);
        let dy_n = &dy[n * g.out_ch * p..(n + 1) * g.out_ch * p];
        gemm(g.out_ch, p, rows, dy_n, false, &col, true, 1.0, &mut dw);
    }
    dw
}

pub(crate) fn add_channel_bias(y: &mut [f64], bias: &[f64], batch: usize, pixels: usize) {
    let ch = bias.len();
    for n in 0..batch {
        for (c, b) in bias.iter().enumerate() {
            y[(n * ch + c) * pixels..(n * ch + c + 1) * pixels]
                .iter_mut()
                .for_each(|v| *v += b);
        }
    }
}

pub(crate) fn channel_sums(dy: &[f64], ch: usize, batch: usize, pixels: usize) -> Vec<f64> {
    let mut out = vec![0.0; ch];
    for n in 0..batch {
        for (c, o) in out.iter_mut().enumerate() {
            *o += dy[(n * ch + c) * pixels..(n * ch + c + 1) * pixels]
                .iter()
                .sum::<f64>();
        }
    }
    out
}

/// 2×2 max pool over planes of `h × w`. Returns values and the flat index of
/// each winner; ties go to the first element in row-major order.
pub(crate) fn max_pool2(x: &[f64], planes: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(planes * oh * ow);
    let mut arg = Vec::with_capacity(planes * oh * ow);
    for pl in 0..planes {
        let base = pl * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = base + 2 * oy * w + 2 * ox;
                for idx in [
                    base + 2 * oy * w + 2 * ox + 1,
                    base + (2 * oy + 1) * w + 2 * ox,
                    base + (2 * oy + 1) * w + 2 * ox + 1,
                ] {
                    if x[idx] > x[best] {
                        best = idx;
                    }
                }
                out.push(x[best]);
                arg.push(best);
            }
        }
    }
    (out, arg)
}

pub(crate) fn upsample2(x: &[f64], planes: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; planes * oh * ow];
    for pl in 0..planes {
        for y in 0..oh {
            for xx in 0..ow {
                out[(pl * oh + y) * ow + xx] = x[(pl * h + y / 2) * w + xx / 2];
            }
        }
    }
    out
}

/// Adjoint of [`upsample2`]: sums each 2×2 block of `g` (planes of `2h × 2w`).
pub(crate) fn upsample2_adjoint(g: &[f64], planes: usize, h: usize, w: usize) -> Vec<f64> {
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![0.0; planes * h * w];
    for pl in 0..planes {
        for y in 0..oh {
            for xx in 0..ow {
                out[(pl * h + y / 2) * w + xx / 2] += g[(pl * oh + y) * ow + xx];
            }
        }
    }
    out
}
