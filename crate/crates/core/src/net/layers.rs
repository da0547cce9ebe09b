//! Per-sample convolution and pooling kernels.

use super::gemm::{gemm, Mat};
use super::tensor::Tensor4;
use crate::{Error, Result};

/// Output edge and leading zero padding of a "same" strided window.
pub(crate) fn same_padding(n: usize, k: usize, s: usize) -> (usize, usize) {
    let out = n.div_ceil(s);
    let total = ((out - 1) * s + k).saturating_sub(n);
    (out, total / 2)
}

/// Geometry of one convolution applied to a `(cin, nx, ny, nz)` input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub s: usize,
    pub n: [usize; 3],
    pub out: [usize; 3],
    pub pad: [usize; 3],
}

impl ConvGeom {
    pub fn new(input: [usize; 4], cout: usize, k: usize, s: usize) -> ConvGeom {
        let mut out = [0; 3];
        let mut pad = [0; 3];
        for a in 0..3 {
            (out[a], pad[a]) = same_padding(input[a + 1], k, s);
        }
        ConvGeom { cin: input[0], cout, k, s, n: [input[1], input[2], input[3]], out, pad }
    }

    pub fn rows(&self) -> usize {
        self.cin * self.k * self.k * self.k
    }

    pub fn positions(&self) -> usize {
        self.out.iter().product()
    }

    pub fn in_len(&self) -> usize {
        self.cin * self.n.iter().product::<usize>()
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.cout, self.out[0], self.out[1], self.out[2]]
    }

    /// Input offset along `axis` for output `o` and tap `d`, if inside.
    fn source(&self, axis: usize, o: usize, d: usize) -> Option<usize> {
        let i = (o * self.s + d) as isize - self.pad[axis] as isize;
        (i >= 0 && (i as usize) < self.n[axis]).then_some(i as usize)
    }

    /// Lowers one sample into a `rows x positions` patch matrix.
    pub fn im2col(&self, input: &[f64], col: &mut [f64]) {
        let [nx, ny, nz] = self.n;
        let [ox, oy, oz] = self.out;
        let p = self.positions();
        let k = self.k;
        for c in 0..self.cin {
            for dx in 0..k {
                for dy in 0..k {
                    for dz in 0..k {
                        let row = ((c * k + dx) * k + dy) * k + dz;
                        let dst = &mut col[row * p..(row + 1) * p];
                        let mut j = 0;
                        for x in 0..ox {
                            let sx = self.source(0, x, dx);
                            for y in 0..oy {
                                let sy = self.source(1, y, dy);
                                for z in 0..oz {
                                    dst[j] = match (sx, sy, self.source(2, z, dz)) {
                                        (Some(a), Some(b), Some(e)) => input[((c * nx + a) * ny + b) * nz + e],
                                        _ => 0.0,
                                    };
                                    j += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`im2col`](Self::im2col): scatters patch gradients back.
    pub fn col2im(&self, col: &[f64], grad_in: &mut [f64]) {
        let [nx, ny, nz] = self.n;
        let [ox, oy, oz] = self.out;
        let p = self.positions();
        let k = self.k;
        for c in 0..self.cin {
            for dx in 0..k {
                for dy in 0..k {
                    for dz in 0..k {
                        let row = ((c * k + dx) * k + dy) * k + dz;
                        let src = &col[row * p..(row + 1) * p];
                        let mut j = 0;
                        for x in 0..ox {
                            let sx = self.source(0, x, dx);
                            for y in 0..oy {
                                let sy = self.source(1, y, dy);
                                for z in 0..oz {
                                    if let (Some(a), Some(b), Some(e)) = (sx, sy, self.source(2, z, dz)) {
                                        grad_in[((c * nx + a) * ny + b) * nz + e] += src[j];
                                    }
                                    j += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// `out = W * col + b` for one sample.
    pub fn forward(&self, col: &[f64], weights: &[f64], bias: &[f64], out: &mut [f64]) {
        let p = self.positions();
        gemm(1.0, Mat::new(weights, self.cout, self.rows()), Mat::new(col, self.rows(), p), 0.0, out);
        for (o, chunk) in out.chunks_mut(p).enumerate() {
            chunk.iter_mut().for_each(|v| *v += bias[o]);
        }
    }
}

/// Same-padded strided 3D cross-correlation of a single sample.
///
/// `weights` are laid out `(out_channels, in_channels, k, k, k)`.
pub fn conv3d_forward(input: &Tensor4, weights: &[f64], bias: &[f64], k: usize, s: usize) -> Result<Tensor4> {
    if k == 0 || s == 0 {
        return Err(Error::invalid("kernel edge and stride must be >= 1"));
    }
    let cout = bias.len();
    let geom = ConvGeom::new(input.shape(), cout, k, s);
    if cout == 0 || weights.len() != cout * geom.rows() {
        return Err(Error::invalid(format!(
            "conv weights have {} values, expected {} x {}",
            weights.len(),
            cout,
            geom.rows()
        )));
    }
    let mut col = vec![0.0; geom.rows() * geom.positions()];
    geom.im2col(input.data(), &mut col);
    let mut out = vec![0.0; cout * geom.positions()];
    geom.forward(&col, weights, bias, &mut out);
    Tensor4::new(geom.out_shape(), out)
}

/// Geometry of a ceil-mode max pool with window = stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PoolGeom {
    pub c: usize,
    pub s: usize,
    pub n: [usize; 3],
    pub out: [usize; 3],
}

impl PoolGeom {
    pub fn new(input: [usize; 4], s: usize) -> PoolGeom {
        PoolGeom {
            c: input[0],
            s,
            n: [input[1], input[2], input[3]],
            out: [input[1].div_ceil(s), input[2].div_ceil(s), input[3].div_ceil(s)],
        }
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.c, self.out[0], self.out[1], self.out[2]]
    }

    pub fn out_len(&self) -> usize {
        self.c * self.out.iter().product::<usize>()
    }

    /// Writes maxima and the flat input index of each (first in scan order).
    pub fn forward(&self, input: &[f64], out: &mut [f64], argmax: &mut [u32]) {
        let [nx, ny, nz] = self.n;
        let [ox, oy, oz] = self.out;
        let s = self.s;
        let mut j = 0;
        for c in 0..self.c {
            for x in 0..ox {
                for y in 0..oy {
                    for z in 0..oz {
                        let mut best = f64::NEG_INFINITY;
                        let mut arg = usize::MAX;
                        for a in x * s..((x + 1) * s).min(nx) {
                            for b in y * s..((y + 1) * s).min(ny) {
                                for e in z * s..((z + 1) * s).min(nz) {
                                    let i = ((c * nx + a) * ny + b) * nz + e;
                                    if arg == usize::MAX || input[i] > best {
                                        best = input[i];
                                        arg = i;
                                    }
                                }
                            }
                        }
                        out[j] = best;
                        argmax[j] = arg as u32;
                        j += 1;
                    }
                }
            }
        }
    }
}

/// Max pool with window = stride `s`; partial edge windows are kept.
/// Also returns, per output, the flat index of the selected input.
pub fn maxpool3d_forward(input: &Tensor4, s: usize) -> Result<(Tensor4, Vec<u32>)> {
    if s == 0 {
        return Err(Error::invalid("pool stride must be >= 1"));
    }
    let geom = PoolGeom::new(input.shape(), s);
    let mut out = vec![0.0; geom.out_len()];
    let mut arg = vec![0; geom.out_len()];
    geom.forward(input.data(), &mut out, &mut arg);
    Ok((Tensor4::new(geom.out_shape(), out)?, arg))
}
