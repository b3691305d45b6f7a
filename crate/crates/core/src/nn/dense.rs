//! Final dense layer, softmax, and cross-entropy loss.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Normal;

use super::{Matrix, NnError, Param};
use crate::math;
use crate::SeedRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_features: usize,
    pub out_features: usize,
    /// Weights indexed `[in][out]`, flattened with `out` fastest.
    pub weight: Param,
    pub bias: Param,
}

impl Dense {
    pub fn new(in_features: usize, out_features: usize, rng: &mut SeedRng) -> Dense {
        let dist = Normal::new(0.0, math::sqrt(2.0 / in_features as f64)).expect("finite std");
        let weight: Vec<f64> = (0..in_features * out_features)
            .map(|_| rng.sample(dist))
            .collect();
        Dense {
            in_features,
            out_features,
            weight: Param::new(weight),
            bias: Param::new(alloc::vec![0.0; out_features]),
        }
    }

    /// `logits = h W + b`.
    pub fn forward(&self, h: &Matrix) -> Result<Matrix, NnError> {
        if h.cols() != self.in_features {
            return Err(NnError::Shape(format!(
                "dense forward: input has {} features, layer expects {}",
                h.cols(),
                self.in_features
            )));
        }
        let mut out = Matrix::zeros(h.rows(), self.out_features);
        for r in 0..h.rows() {
            let h_row = h.row(r);
            let out_row = out.row_mut(r);
            out_row.copy_from_slice(&self.bias.value);
            for (i, &hv) in h_row.iter().enumerate() {
                let w_row = &self.weight.value[i * self.out_features..(i + 1) * self.out_features];
                for (o, &wv) in w_row.iter().enumerate() {
                    out_row[o] += hv * wv;
                }
            }
        }
        Ok(out)
    }

    /// Writes weight/bias gradients into this layer and returns the gradient
    /// with respect to the input activations.
    pub fn backward(&mut self, h: &Matrix, grad_logits: &Matrix) -> Result<Matrix, NnError> {
        if grad_logits.rows() != h.rows() || grad_logits.cols() != self.out_features {
            return Err(NnError::Shape(format!(
                "dense backward: grad dims {}x{}, expected {}x{}",
                grad_logits.rows(),
                grad_logits.cols(),
                h.rows(),
                self.out_features
            )));
        }
        self.weight.grad.iter_mut().for_each(|g| *g = 0.0);
        self.bias.grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_h = Matrix::zeros(h.rows(), self.in_features);
        for r in 0..h.rows() {
            let g_row = grad_logits.row(r);
            for (o, gv) in g_row.iter().enumerate() {
                self.bias.grad[o] += gv;
            }
            let h_row = h.row(r);
            let gh_row = grad_h.row_mut(r);
            for i in 0..self.in_features {
                let w_start = i * self.out_features;
                let w_row = &self.weight.value[w_start..w_start + self.out_features];
                let gw_row = &mut self.weight.grad[w_start..w_start + self.out_features];
                let hv = h_row[i];
                let mut acc = 0.0;
                for o in 0..self.out_features {
                    gw_row[o] += hv * g_row[o];
                    acc += w_row[o] * g_row[o];
                }
                gh_row[i] = acc;
            }
        }
        Ok(grad_h)
    }
}

/// Row-wise log-softmax via the max-subtracted log-sum-exp, finite for any
/// finite logits.
pub fn log_softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter() {
            sum += math::exp(v - max);
        }
        let log_sum = max + math::ln(sum);
        for v in row.iter_mut() {
            *v -= log_sum;
        }
    }
    out
}

/// Row-wise softmax probabilities.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = log_softmax(logits);
    for v in out.data_mut() {
        *v = math::exp(*v);
    }
    out
}

/// Mean negative log-likelihood over the batch: `-mean log p[label]`.
/// Regularization terms live at the model level.
pub fn cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<f64, NnError> {
    if labels.len() != probs.rows() {
        return Err(NnError::Shape(format!(
            "cross entropy: {} labels for {} rows",
            labels.len(),
            probs.rows()
        )));
    }
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= probs.cols() {
            return Err(NnError::LabelOutOfRange {
                label,
                classes: probs.cols(),
            });
        }
        total -= math::ln(probs.at(r, label));
    }
    Ok(total / probs.rows() as f64)
}

/// Same value as [`cross_entropy`] computed directly from logits through
/// log-sum-exp; finite for any finite logits.
pub fn cross_entropy_from_logits(logits: &Matrix, labels: &[usize]) -> Result<f64, NnError> {
    if labels.len() != logits.rows() {
        return Err(NnError::Shape(format!(
            "cross entropy: {} labels for {} rows",
            labels.len(),
            logits.rows()
        )));
    }
    let logp = log_softmax(logits);
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        if label >= logits.cols() {
            return Err(NnError::LabelOutOfRange {
                label,
                classes: logits.cols(),
            });
        }
        total -= logp.at(r, label);
    }
    Ok(total / logits.rows() as f64)
}

/// Gradient of the mean cross-entropy with respect to the logits:
/// `(probs - onehot(label)) / N`.
pub fn softmax_cross_entropy_grad(probs: &Matrix, labels: &[usize]) -> Matrix {
    let n = probs.rows() as f64;
    let mut g = probs.clone();
    for (r, &label) in labels.iter().enumerate() {
        let row = g.row_mut(r);
        for v in row.iter_mut() {
            *v /= n;
        }
        row[label] -= 1.0 / n;
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};

    #[test]
    fn symmetric_logits_split_evenly_and_cost_ln2() {
        let logits = Matrix::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let p = softmax(&logits);
        assert!((p.at(0, 0) - 0.5).abs() < 1e-15);
        assert!((p.at(0, 1) - 0.5).abs() < 1e-15);
        for label in 0..2 {
            let loss = cross_entropy(&p, &[label]).unwrap();
            assert!((loss - core::f64::consts::LN_2).abs() < 1e-12);
        }
    }

    #[test]
    fn ln3_logit_gives_three_quarters() {
        let logits = Matrix::from_vec(1, 2, vec![3.0f64.ln(), 0.0]).unwrap();
        let p = softmax(&logits);
        assert!((p.at(0, 0) - 0.75).abs() < 1e-12);
        assert!((p.at(0, 1) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rows_sum_to_one_and_loss_stays_finite() {
        let mut rng = crate::SeedRng::seed_from_u64(13);
        for _ in 0..200 {
            let scale = 10f64.powi(rng.gen_range(0..5));
            let logits = Matrix::from_vec(
                3,
                4,
                (0..12).map(|_| rng.gen_range(-1.0..1.0) * scale).collect(),
            )
            .unwrap();
            let p = softmax(&logits);
            for r in 0..3 {
                let sum: f64 = p.row(r).iter().sum();
                assert!((sum - 1.0).abs() < 1e-12, "row sum {sum}");
            }
            let loss = cross_entropy_from_logits(&logits, &[0, 1, 2]).unwrap();
            assert!(loss.is_finite());
        }
        // Extreme spread: probabilities underflow but the logit route stays
        // finite.
        let logits = Matrix::from_vec(1, 2, vec![-1e4, 1e4]).unwrap();
        assert!(cross_entropy_from_logits(&logits, &[0]).unwrap().is_finite());
    }

    #[test]
    fn out_of_range_label_is_an_error() {
        let p = Matrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            cross_entropy(&p, &[2]),
            Err(NnError::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn dense_and_loss_gradients_match_finite_differences() {
        let step = 1e-5;
        let tol = 1e-5;
        let mut rng = crate::SeedRng::seed_from_u64(17);
        let (n, c, k) = (3, 4, 2);
        let h = Matrix::from_vec(n, c, (0..n * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap();
        let labels = [0usize, 1, 1];
        let mut layer = Dense::new(c, k, &mut rng);
        for b in layer.bias.value.iter_mut() {
            *b = rng.gen_range(-0.3..0.3);
        }

        let loss = |layer: &Dense, h: &Matrix| -> f64 {
            cross_entropy_from_logits(&layer.forward(h).unwrap(), &labels).unwrap()
        };

        let logits = layer.forward(&h).unwrap();
        let probs = softmax(&logits);
        let dlogits = softmax_cross_entropy_grad(&probs, &labels);
        let gh = layer.backward(&h, &dlogits).unwrap();

        let mut hp = h.clone();
        for idx in 0..h.data().len() {
            let orig = hp.data()[idx];
            hp.data_mut()[idx] = orig + step;
            let up = loss(&layer, &hp);
            hp.data_mut()[idx] = orig - step;
            let down = loss(&layer, &hp);
            hp.data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = gh.data()[idx];
            assert!(
                (numeric - analytic).abs() <= tol * (1.0 + numeric.abs().max(analytic.abs()))
            );
        }

        let mut pert = layer.clone();
        for idx in 0..pert.weight.value.len() {
            let orig = pert.weight.value[idx];
            pert.weight.value[idx] = orig + step;
            let up = loss(&pert, &h);
            pert.weight.value[idx] = orig - step;
            let down = loss(&pert, &h);
            pert.weight.value[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = layer.weight.grad[idx];
            assert!(
                (numeric - analytic).abs() <= tol * (1.0 + numeric.abs().max(analytic.abs()))
            );
        }
        for idx in 0..pert.bias.value.len() {
            let orig = pert.bias.value[idx];
            pert.bias.value[idx] = orig + step;
            let up = loss(&pert, &h);
            pert.bias.value[idx] = orig - step;
            let down = loss(&pert, &h);
            pert.bias.value[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            assert!((numeric - layer.bias.grad[idx]).abs() <= tol * (1.0 + numeric.abs()));
        }
    }
}
