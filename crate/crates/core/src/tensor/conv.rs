//! Stride-1 "same" cross-correlation.
//!
//! The kernel never materialises an im2col buffer. The input is copied once
//! into a zero-padded `[Hp, Wp, Cin]` buffer; for a kernel tap `(dy, dx)` the
//! input rows feeding output pixel `p = y·Wp + x` start at `p + (dy·Wp + dx)`,
//! so each tap is a single GEMM over the padded width. Columns `x >= W` of
//! that extended output are scratch and discarded.
//!
//! Several branches that read the same input (the 3×3/4×4/5×5 stages) are
//! fused: for every tap of the union window the weights of all branches that
//! use the tap are packed side by side, and one GEMM writes their output
//! channels. Output channels are laid out in branch order, which is exactly
//! the channel concatenation of the branch outputs.

use super::gemm::{gemm, MatMut, MatRef};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Weights `[kH, kW, Cin, Cout]` and bias `[Cout]` of one convolution.
#[derive(Clone, Copy)]
pub struct ConvBranch<'a, T> {
    pub weights: &'a Tensor<T>,
    pub bias: &'a Tensor<T>,
}

/// Padding before/after along one axis for kernel extent `k`.
///
/// Even kernels put the extra row/column after: `floor((k-1)/2)` before,
/// `ceil((k-1)/2)` after.
pub(crate) fn same_padding(k: usize) -> (usize, usize) {
    let before = (k - 1) / 2;
    (before, k - 1 - before)
}

#[derive(Debug, Clone)]
struct BranchGeom {
    kh: usize,
    kw: usize,
    cout: usize,
    channel_offset: usize,
    top: usize,
    left: usize,
}

#[derive(Debug, Clone)]
struct PackedTap<T> {
    ty: usize,
    tx: usize,
    col_start: usize,
    cols: usize,
    /// `[Cin, cols]` row-major.
    weights: Vec<T>,
}

/// A group of convolutions over one input whose outputs are concatenated.
#[derive(Debug, Clone)]
pub struct MultiConv<T> {
    cin: usize,
    cout_total: usize,
    pad_top: usize,
    pad_bottom: usize,
    pad_left: usize,
    pad_right: usize,
    branches: Vec<BranchGeom>,
    taps: Vec<PackedTap<T>>,
    bias: Vec<T>,
}

/// Gradients of a fused multi-branch convolution.
#[derive(Debug, Clone)]
pub struct MultiConvGrads<T> {
    /// `None` when the caller did not ask for it.
    pub input: Option<Tensor<T>>,
    /// Per branch `(weights, bias)` gradients, in branch order.
    pub branches: Vec<(Tensor<T>, Tensor<T>)>,
}

/// Gradients of a single convolution.
#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> MultiConv<T> {
    pub fn new(branches: &[ConvBranch<'_, T>]) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::invalid("branches", "at least one convolution required"));
        }
        let mut cin = None;
        let mut geoms = Vec::with_capacity(branches.len());
        let mut bias = Vec::new();
        let mut offset = 0;
        for (i, br) in branches.iter().enumerate() {
            let &[kh, kw, c_in, cout] = br.weights.shape() else {
                return Err(Error::shape(
                    "conv2d",
                    format!("branch {i}: weights must be [kH, kW, Cin, Cout], got {:?}", br.weights.shape()),
                ));
            };
            if kh == 0 || kw == 0 {
                return Err(Error::invalid("kernel", format!("branch {i}: extents must be >= 1")));
            }
            if br.bias.shape() != [cout] {
                return Err(Error::shape(
                    "conv2d",
                    format!("branch {i}: bias {:?} does not match Cout {cout}", br.bias.shape()),
                ));
            }
            match cin {
                None => cin = Some(c_in),
                Some(c) if c != c_in => {
                    return Err(Error::shape(
                        "conv2d",
                        format!("branch {i}: Cin {c_in} differs from {c}"),
                    ))
                }
                _ => {}
            }
            let (top, _) = same_padding(kh);
            let (left, _) = same_padding(kw);
            geoms.push(BranchGeom {
                kh,
                kw,
                cout,
                channel_offset: offset,
                top,
                left,
            });
            bias.extend_from_slice(br.bias.data());
            offset += cout;
        }
        let cin = cin.unwrap_or(0);
        let pad_top = geoms.iter().map(|g| g.top).max().unwrap_or(0);
        let pad_bottom = geoms.iter().map(|g| g.kh - 1 - g.top).max().unwrap_or(0);
        let pad_left = geoms.iter().map(|g| g.left).max().unwrap_or(0);
        let pad_right = geoms.iter().map(|g| g.kw - 1 - g.left).max().unwrap_or(0);

        let mut taps = Vec::new();
        for ty in 0..=pad_top + pad_bottom {
            for tx in 0..=pad_left + pad_right {
                let dy = ty as isize - pad_top as isize;
                let dx = tx as isize - pad_left as isize;
                let active: Vec<usize> = (0..geoms.len())
                    .filter(|&b| geoms[b].covers(dy, dx))
                    .collect();
                let (Some(&first), Some(&last)) = (active.first(), active.last()) else {
                    continue;
                };
                let col_start = geoms[first].channel_offset;
                let cols = geoms[last].channel_offset + geoms[last].cout - col_start;
                let mut packed = vec![T::zero(); cin * cols];
                for &b in &active {
                    let g = &geoms[b];
                    let ky = (dy + g.top as isize) as usize;
                    let kx = (dx + g.left as isize) as usize;
                    let w = branches[b].weights.data();
                    for ci in 0..cin {
                        let src = ((ky * g.kw + kx) * cin + ci) * g.cout;
                        let dst = ci * cols + g.channel_offset - col_start;
                        packed[dst..dst + g.cout].copy_from_slice(&w[src..src + g.cout]);
                    }
                }
                taps.push(PackedTap {
                    ty,
                    tx,
                    col_start,
                    cols,
                    weights: packed,
                });
            }
        }
        Ok(Self {
            cin,
            cout_total: offset,
            pad_top,
            pad_bottom,
            pad_left,
            pad_right,
            branches: geoms,
            taps,
            bias,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.cin
    }

    pub fn out_channels(&self) -> usize {
        self.cout_total
    }

    fn padded_width(&self, w: usize) -> usize {
        w + self.pad_left + self.pad_right
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize)> {
        let (h, w, c) = input.hwc()?;
        if c != self.cin {
            return Err(Error::shape(
                "conv2d",
                format!("input has {c} channels, weights expect Cin = {}", self.cin),
            ));
        }
        Ok((h, w))
    }

    /// Copies `[H, W, Cin]` into the zero-padded scratch layout, with one
    /// extra bottom row so the last tap's GEMM stays in bounds.
    fn pad_input(&self, input: &Tensor<T>, h: usize, w: usize) -> Vec<T> {
        let wp = self.padded_width(w);
        let hp = h + self.pad_top + self.pad_bottom + 1;
        let cin = self.cin;
        let mut padded = vec![T::zero(); hp * wp * cin];
        let src = input.data();
        for y in 0..h {
            let dst = ((y + self.pad_top) * wp + self.pad_left) * cin;
            padded[dst..dst + w * cin].copy_from_slice(&src[y * w * cin..(y + 1) * w * cin]);
        }
        padded
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (h, w) = self.check_input(input)?;
        let wp = self.padded_width(w);
        let ctot = self.cout_total;
        let padded = self.pad_input(input, h, w);
        let rows = h * wp;
        let mut ext = vec![T::zero(); rows * ctot];
        for tap in &self.taps {
            gemm(
                rows,
                self.cin,
                tap.cols,
                MatRef {
                    data: &padded,
                    offset: (tap.ty * wp + tap.tx) * self.cin,
                    row_stride: self.cin,
                    col_stride: 1,
                },
                MatRef {
                    data: &tap.weights,
                    offset: 0,
                    row_stride: tap.cols,
                    col_stride: 1,
                },
                T::one(),
                MatMut {
                    data: &mut ext,
                    offset: tap.col_start,
                    row_stride: ctot,
                    col_stride: 1,
                },
            );
        }
        let mut out = Vec::with_capacity(h * w * ctot);
        for y in 0..h {
            for x in 0..w {
                let row = &ext[(y * wp + x) * ctot..(y * wp + x + 1) * ctot];
                out.extend(row.iter().zip(&self.bias).map(|(&v, &b)| v + b));
            }
        }
        Tensor::new([h, w, ctot], out)
    }

    pub fn backward(
        &self,
        input: &Tensor<T>,
        upstream: &Tensor<T>,
        need_input_grad: bool,
    ) -> Result<MultiConvGrads<T>> {
        let (h, w) = self.check_input(input)?;
        let ctot = self.cout_total;
        if upstream.shape() != [h, w, ctot] {
            return Err(Error::shape(
                "conv2d_backward",
                format!("upstream {:?}, expected {:?}", upstream.shape(), [h, w, ctot]),
            ));
        }
        let cin = self.cin;
        let wp = self.padded_width(w);
        let hp = h + self.pad_top + self.pad_bottom + 1;
        let rows = h * wp;
        let padded = self.pad_input(input, h, w);

        let up = upstream.data();
        let mut up_ext = vec![T::zero(); rows * ctot];
        let mut bias_grad = vec![T::zero(); ctot];
        for y in 0..h {
            for x in 0..w {
                let src = &up[(y * w + x) * ctot..(y * w + x + 1) * ctot];
                up_ext[(y * wp + x) * ctot..(y * wp + x + 1) * ctot].copy_from_slice(src);
                for (g, &v) in bias_grad.iter_mut().zip(src) {
                    *g += v;
                }
            }
        }

        let mut grad_padded = if need_input_grad {
            vec![T::zero(); hp * wp * cin]
        } else {
            Vec::new()
        };
        let mut weight_grads: Vec<Vec<T>> = self
            .branches
            .iter()
            .map(|g| vec![T::zero(); g.kh * g.kw * cin * g.cout])
            .collect();

        let mut tap_grad = Vec::new();
        for tap in &self.taps {
            let in_offset = (tap.ty * wp + tap.tx) * cin;
            if need_input_grad {
                // dX[p + shift, ci] += Σ_c dY[p, c] · W[ci, c]
                gemm(
                    rows,
                    tap.cols,
                    cin,
                    MatRef {
                        data: &up_ext,
                        offset: tap.col_start,
                        row_stride: ctot,
                        col_stride: 1,
                    },
                    MatRef {
                        data: &tap.weights,
                        offset: 0,
                        row_stride: 1,
                        col_stride: tap.cols,
                    },
                    T::one(),
                    MatMut {
                        data: &mut grad_padded,
                        offset: in_offset,
                        row_stride: cin,
                        col_stride: 1,
                    },
                );
            }
            // dW[ci, c] = Σ_p X[p + shift, ci] · dY[p, c]
            tap_grad.clear();
            tap_grad.resize(cin * tap.cols, T::zero());
            gemm(
                cin,
                rows,
                tap.cols,
                MatRef {
                    data: &padded,
                    offset: in_offset,
                    row_stride: 1,
                    col_stride: cin,
                },
                MatRef {
                    data: &up_ext,
                    offset: tap.col_start,
                    row_stride: ctot,
                    col_stride: 1,
                },
                T::zero(),
                MatMut {
                    data: &mut tap_grad,
                    offset: 0,
                    row_stride: tap.cols,
                    col_stride: 1,
                },
            );
            let dy = tap.ty as isize - self.pad_top as isize;
            let dx = tap.tx as isize - self.pad_left as isize;
            for (g, wg) in self.branches.iter().zip(weight_grads.iter_mut()) {
                if !g.covers(dy, dx) {
                    continue;
                }
                let ky = (dy + g.top as isize) as usize;
                let kx = (dx + g.left as isize) as usize;
                for ci in 0..cin {
                    let src = ci * tap.cols + g.channel_offset - tap.col_start;
                    let dst = ((ky * g.kw + kx) * cin + ci) * g.cout;
                    wg[dst..dst + g.cout].copy_from_slice(&tap_grad[src..src + g.cout]);
                }
            }
        }

        let input_grad = if need_input_grad {
            let mut out = Vec::with_capacity(h * w * cin);
            for y in 0..h {
                let src = ((y + self.pad_top) * wp + self.pad_left) * cin;
                out.extend_from_slice(&grad_padded[src..src + w * cin]);
            }
            Some(Tensor::new([h, w, cin], out)?)
        } else {
            None
        };

        let branches = self
            .branches
            .iter()
            .zip(weight_grads)
            .map(|(g, wg)| {
                let bg = bias_grad[g.channel_offset..g.channel_offset + g.cout].to_vec();
                Ok((
                    Tensor::new([g.kh, g.kw, cin, g.cout], wg)?,
                    Tensor::new([g.cout], bg)?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiConvGrads {
            input: input_grad,
            branches,
        })
    }
}

impl BranchGeom {
    fn covers(&self, dy: isize, dx: isize) -> bool {
        let (top, left) = (self.top as isize, self.left as isize);
        dy >= -top
            && dy <= self.kh as isize - 1 - top
            && dx >= -left
            && dx <= self.kw as isize - 1 - left
    }
}

/// Single convolution `[H, W, Cin] -> [H, W, Cout]`, stride 1, same padding.
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    MultiConv::new(&[ConvBranch { weights, bias }])?.forward(input)
}

/// Gradients of [`conv2d_forward`] given the saved input and the upstream
/// gradient of its output.
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let grads = MultiConv::new(&[ConvBranch { weights, bias }])?.backward(input, upstream, true)?;
    let (weights, bias) = grads
        .branches
        .into_iter()
        .next()
        .ok_or_else(|| Error::Internal("conv2d_backward produced no branch".into()))?;
    Ok(ConvGrads {
        input: grads
            .input
            .ok_or_else(|| Error::Internal("conv2d_backward dropped input gradient".into()))?,
        weights,
        bias,
    })
}
