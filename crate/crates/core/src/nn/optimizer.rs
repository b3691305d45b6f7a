//! Stochastic gradient descent with Nesterov momentum.
//!
//! The update is `v <- mu*v - lr*grad(L)(w + mu*v)` followed by `w <- w + v`,
//! with the gradient evaluated at the velocity-lookahead point. Callers drive
//! it in two phases: [`sgd_nesterov_lookahead`] shifts the parameters to
//! `w + mu*v`, gradients are computed there, and [`sgd_nesterov_step`]
//! finishes the move. Since the post-update weights satisfy
//! `w_new = (w + mu*v) - lr*g`, the step works in place on the already
//! shifted values and no restore is needed.

use super::Param;

/// Phase 1: shift values to the lookahead point `w + mu*v`.
pub fn sgd_nesterov_lookahead(param: &mut Param, momentum: f64) {
    for (w, v) in param.value.iter_mut().zip(param.velocity.iter()) {
        *w += momentum * v;
    }
}

/// Phase 2, after gradients were computed at the lookahead point:
/// `v <- mu*v - lr*g` and `w <- w - lr*g` (which equals `w_orig + v_new`).
pub fn sgd_nesterov_step(param: &mut Param, learning_rate: f64, momentum: f64) {
    for ((w, v), g) in param
        .value
        .iter_mut()
        .zip(param.velocity.iter_mut())
        .zip(param.grad.iter())
    {
        *v = momentum * *v - learning_rate * g;
        *w -= learning_rate * g;
    }
}
