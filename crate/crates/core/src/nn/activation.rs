//! ReLU and inverted dropout.

use rand::Rng;

use super::{Mode, Tensor3};
use crate::SeedRng;

/// Elementwise `max(x, 0)`.
pub fn relu(x: &Tensor3) -> Tensor3 {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Gradient of [`relu`] given its input: passes grad where `x > 0`, zero
/// elsewhere (the gradient at exactly 0 is defined as 0).
pub fn relu_backward(x: &Tensor3, grad_out: &Tensor3) -> Tensor3 {
    debug_assert_eq!(x.dims(), grad_out.dims());
    let mut g = grad_out.clone();
    for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
        if *xv <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

/// Inverted dropout. In train mode each element is kept with probability
/// `1 - rate` and scaled by `1 / (1 - rate)`; inference is the identity.
/// Returns the output and the mask of applied scale factors, so the backward
/// pass is a plain elementwise product with the mask.
pub fn dropout(x: &Tensor3, rate: f64, mode: Mode, rng: &mut SeedRng) -> (Tensor3, Tensor3) {
    let (n, t, c) = x.dims();
    let mut mask = Tensor3::zeros(n, t, c);
    if mode == Mode::Infer || rate == 0.0 {
        for v in mask.data_mut() {
            *v = 1.0;
        }
        return (x.clone(), mask);
    }
    let scale = 1.0 / (1.0 - rate);
    let mut y = x.clone();
    for (yv, mv) in y.data_mut().iter_mut().zip(mask.data_mut()) {
        if rng.gen::<f64>() >= rate {
            *mv = scale;
            *yv *= scale;
        } else {
            *mv = 0.0;
            *yv = 0.0;
        }
    }
    (y, mask)
}

pub fn dropout_backward(mask: &Tensor3, grad_out: &Tensor3) -> Tensor3 {
    debug_assert_eq!(mask.dims(), grad_out.dims());
    let mut g = grad_out.clone();
    for (gv, mv) in g.data_mut().iter_mut().zip(mask.data()) {
        *gv *= mv;
    }
    g
}
