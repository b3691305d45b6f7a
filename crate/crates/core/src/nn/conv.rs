//! Temporal (1D) convolution over the time axis.
//!
//! The operation is cross-correlation with same-length zero padding:
//!
//! ```text
//! y[n, t, o] = bias[o] + sum over k, i of w[k, i, o] * x[n, s*t + k - floor(c/2), i]
//! ```
//!
//! with out-of-range time indices reading as zero and output length
//! `ceil(T / s)`.

use alloc::format;

use rand::Rng;
use rand_distr::Normal;

use super::{NnError, Param, Tensor3};
use crate::math;
use crate::SeedRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_len: usize,
    pub stride: usize,
    /// Weights indexed `[k][in][out]`, flattened with `out` fastest.
    pub weight: Param,
    pub bias: Param,
}

impl Conv1d {
    /// He-normal weight init (std `sqrt(2 / fan_in)`, fan_in = `k * in`),
    /// zero bias.
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
        rng: &mut SeedRng,
    ) -> Conv1d {
        let fan_in = (kernel_len * in_channels) as f64;
        let dist = Normal::new(0.0, math::sqrt(2.0 / fan_in)).expect("finite std");
        let weight: alloc::vec::Vec<f64> = (0..kernel_len * in_channels * out_channels)
            .map(|_| rng.sample(dist))
            .collect();
        Conv1d {
            in_channels,
            out_channels,
            kernel_len,
            stride,
            weight: Param::new(weight),
            bias: Param::new(alloc::vec![0.0; out_channels]),
        }
    }

    /// Layer with explicit weights (tests, decoding).
    pub fn with_weights(
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        stride: usize,
        weight: alloc::vec::Vec<f64>,
        bias: alloc::vec::Vec<f64>,
    ) -> Result<Conv1d, NnError> {
        if weight.len() != kernel_len * in_channels * out_channels || bias.len() != out_channels {
            return Err(NnError::Shape(format!(
                "conv: weight {} / bias {} for k={} in={} out={}",
                weight.len(),
                bias.len(),
                kernel_len,
                in_channels,
                out_channels
            )));
        }
        Ok(Conv1d {
            in_channels,
            out_channels,
            kernel_len,
            stride,
            weight: Param::new(weight),
            bias: Param::new(bias),
        })
    }

    pub fn out_len(&self, t: usize) -> usize {
        t.div_ceil(self.stride)
    }

    #[inline]
    fn w_row(&self, k: usize, i: usize) -> &[f64] {
        let start = (k * self.in_channels + i) * self.out_channels;
        &self.weight.value[start..start + self.out_channels]
    }

    pub fn forward(&self, x: &Tensor3) -> Result<Tensor3, NnError> {
        let (n, t, c) = x.dims();
        if c != self.in_channels {
            return Err(NnError::Shape(format!(
                "conv forward: input has {c} channels, layer expects {}",
                self.in_channels
            )));
        }
        let t_out = self.out_len(t);
        let offset = (self.kernel_len / 2) as isize;
        let mut y = Tensor3::zeros(n, t_out, self.out_channels);
        for b in 0..n {
            for ot in 0..t_out {
                let y_row = y.row_mut(b, ot);
                y_row.copy_from_slice(&self.bias.value);
                let base = (ot * self.stride) as isize - offset;
                for k in 0..self.kernel_len {
                    let it = base + k as isize;
                    if it < 0 || it >= t as isize {
                        continue;
                    }
                    let x_row = x.row(b, it as usize);
                    for (i, &xv) in x_row.iter().enumerate() {
                        if xv == 0.0 {
                            continue;
                        }
                        for (o, &wv) in self.w_row(k, i).iter().enumerate() {
                            y_row[o] += xv * wv;
                        }
                    }
                }
            }
        }
        Ok(y)
    }

    /// Exact gradients of the forward definition. Writes the weight and bias
    /// gradients into this layer's `grad` buffers (overwriting them) and
    /// returns the gradient with respect to the input.
    pub fn backward(&mut self, x: &Tensor3, grad_out: &Tensor3) -> Result<Tensor3, NnError> {
        let (n, t, c) = x.dims();
        let (gn, gt, gc) = grad_out.dims();
        if c != self.in_channels {
            return Err(NnError::Shape(format!(
                "conv backward: input has {c} channels, layer expects {}",
                self.in_channels
            )));
        }
        if gn != n || gt != self.out_len(t) || gc != self.out_channels {
            return Err(NnError::Shape(format!(
                "conv backward: grad dims {:?}, expected ({}, {}, {})",
                grad_out.dims(),
                n,
                self.out_len(t),
                self.out_channels
            )));
        }

        let offset = (self.kernel_len / 2) as isize;
        let (in_c, out_c) = (self.in_channels, self.out_channels);
        self.weight.grad.iter_mut().for_each(|g| *g = 0.0);
        self.bias.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_x = Tensor3::zeros(n, t, c);

        for b in 0..n {
            for ot in 0..gt {
                let g_row = grad_out.row(b, ot);
                for (o, gv) in g_row.iter().enumerate() {
                    self.bias.grad[o] += gv;
                }
                let base = (ot * self.stride) as isize - offset;
                for k in 0..self.kernel_len {
                    let it = base + k as isize;
                    if it < 0 || it >= t as isize {
                        continue;
                    }
                    let x_row = x.row(b, it as usize);
                    let gx_row = grad_x.row_mut(b, it as usize);
                    for i in 0..in_c {
                        let w_start = (k * in_c + i) * out_c;
                        let w_row = &self.weight.value[w_start..w_start + out_c];
                        let gw_row = &mut self.weight.grad[w_start..w_start + out_c];
                        let xv = x_row[i];
                        let mut acc = 0.0;
                        for o in 0..out_c {
                            let gv = g_row[o];
                            gw_row[o] += xv * gv;
                            acc += w_row[o] * gv;
                        }
                        gx_row[i] += acc;
                    }
                }
            }
        }
        Ok(grad_x)
    }
}
