//! Batch normalization over (batch, time) per channel.

use alloc::format;
use alloc::vec::Vec;

use super::{NnError, Param, Tensor3};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm1d {
    pub channels: usize,
    pub eps: f64,
    /// Running-statistics momentum: `running <- m*running + (1-m)*batch`.
    pub momentum: f64,
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// What the backward pass needs from a train-mode forward: the normalized
/// values and the per-channel `1 / sqrt(var + eps)`.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub x_hat: Tensor3,
    pub inv_std: Vec<f64>,
}

impl BatchNorm1d {
    pub fn new(channels: usize, eps: f64, momentum: f64) -> BatchNorm1d {
        BatchNorm1d {
            channels,
            eps,
            momentum,
            gamma: Param::new(alloc::vec![1.0; channels]),
            beta: Param::new(alloc::vec![0.0; channels]),
            running_mean: alloc::vec![0.0; channels],
            running_var: alloc::vec![1.0; channels],
        }
    }

    fn check_channels(&self, x: &Tensor3, what: &str) -> Result<(), NnError> {
        if x.channels() != self.channels {
            return Err(NnError::Shape(format!(
                "batchnorm {what}: input has {} channels, layer expects {}",
                x.channels(),
                self.channels
            )));
        }
        Ok(())
    }

    /// Train mode: normalize with this batch's statistics (biased variance
    /// over the `N*T` values of each channel), update running statistics,
    /// and return the affine output plus the cache for backward.
    pub fn forward_train(&mut self, x: &Tensor3) -> Result<(Tensor3, BnCache), NnError> {
        self.check_channels(x, "train")?;
        let (n, t, c) = x.dims();
        let m = n * t;
        if m < 2 {
            return Err(NnError::DegenerateBatch);
        }

        let mut mean = alloc::vec![0.0; c];
        for b in 0..n {
            for s in 0..t {
                for (ch, v) in x.row(b, s).iter().enumerate() {
                    mean[ch] += v;
                }
            }
        }
        for v in mean.iter_mut() {
            *v /= m as f64;
        }
        let mut var = alloc::vec![0.0; c];
        for b in 0..n {
            for s in 0..t {
                for (ch, v) in x.row(b, s).iter().enumerate() {
                    let d = v - mean[ch];
                    var[ch] += d * d;
                }
            }
        }
        for v in var.iter_mut() {
            *v /= m as f64;
        }

        let inv_std: Vec<f64> = var.iter().map(|&v| 1.0 / math::sqrt(v + self.eps)).collect();
        let mut x_hat = Tensor3::zeros(n, t, c);
        let mut y = Tensor3::zeros(n, t, c);
        for b in 0..n {
            for s in 0..t {
                let x_row = x.row(b, s);
                let xh_row = x_hat.row_mut(b, s);
                for ch in 0..c {
                    xh_row[ch] = (x_row[ch] - mean[ch]) * inv_std[ch];
                }
                let y_row = y.row_mut(b, s);
                for ch in 0..c {
                    y_row[ch] = self.gamma.value[ch] * x_hat.at(b, s, ch) + self.beta.value[ch];
                }
            }
        }

        for ch in 0..c {
            self.running_mean[ch] =
                self.momentum * self.running_mean[ch] + (1.0 - self.momentum) * mean[ch];
            self.running_var[ch] =
                self.momentum * self.running_var[ch] + (1.0 - self.momentum) * var[ch];
        }

        Ok((y, BnCache { x_hat, inv_std }))
    }

    /// Inference mode: normalize with the running statistics only. Pure.
    pub fn forward_infer(&self, x: &Tensor3) -> Result<Tensor3, NnError> {
        self.check_channels(x, "infer")?;
        let (n, t, c) = x.dims();
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|&v| 1.0 / math::sqrt(v + self.eps))
            .collect();
        let mut y = Tensor3::zeros(n, t, c);
        for b in 0..n {
            for s in 0..t {
                let x_row = x.row(b, s);
                let y_row = y.row_mut(b, s);
                for ch in 0..c {
                    y_row[ch] = self.gamma.value[ch] * (x_row[ch] - self.running_mean[ch])
                        * inv_std[ch]
                        + self.beta.value[ch];
                }
            }
        }
        Ok(y)
    }

    /// Exact train-mode gradients, including the dependence of the batch mean
    /// and variance on the input:
    ///
    /// ```text
    /// dx = gamma * inv_std * (g - mean(g) - x_hat * mean(g * x_hat))
    /// ```
    ///
    /// with the means taken per channel. Writes gamma/beta gradients into the
    /// layer and returns the input gradient.
    pub fn backward(&mut self, cache: &BnCache, grad_out: &Tensor3) -> Result<Tensor3, NnError> {
        self.check_channels(grad_out, "backward")?;
        if grad_out.dims() != cache.x_hat.dims() {
            return Err(NnError::Shape(format!(
                "batchnorm backward: grad dims {:?} vs cached {:?}",
                grad_out.dims(),
                cache.x_hat.dims()
            )));
        }
        let (n, t, c) = grad_out.dims();
        let m = (n * t) as f64;

        let mut sum_g = alloc::vec![0.0; c];
        let mut sum_gx = alloc::vec![0.0; c];
        for b in 0..n {
            for s in 0..t {
                let g_row = grad_out.row(b, s);
                let xh_row = cache.x_hat.row(b, s);
                for ch in 0..c {
                    sum_g[ch] += g_row[ch];
                    sum_gx[ch] += g_row[ch] * xh_row[ch];
                }
            }
        }
        self.beta.grad.copy_from_slice(&sum_g);
        self.gamma.grad.copy_from_slice(&sum_gx);

        let mut grad_x = Tensor3::zeros(n, t, c);
        for b in 0..n {
            for s in 0..t {
                let g_row = grad_out.row(b, s);
                let xh_row = cache.x_hat.row(b, s);
                let gx_row = grad_x.row_mut(b, s);
                for ch in 0..c {
                    gx_row[ch] = self.gamma.value[ch]
                        * cache.inv_std[ch]
                        * (g_row[ch] - sum_g[ch] / m - xh_row[ch] * sum_gx[ch] / m);
                }
            }
        }
        Ok(grad_x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};

    fn tensor(n: usize, t: usize, c: usize, data: Vec<f64>) -> Tensor3 {
        Tensor3::from_vec(n, t, c, data).unwrap()
    }

    #[test]
    fn matches_hand_evaluated_two_point_batch() {
        let mut bn = BatchNorm1d::new(1, 1e-5, 0.9);
        let x = tensor(2, 1, 1, vec![1.0, 3.0]);
        let (y, _) = bn.forward_train(&x).unwrap();
        // Hand formula: mean 2, biased var 1, (x - 2) / sqrt(1 + 1e-5).
        let expected = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((y.at(0, 0, 0) + expected).abs() < 1e-12);
        assert!((y.at(1, 0, 0) - expected).abs() < 1e-12);
        assert!((y.at(0, 0, 0) + 0.999995).abs() < 1e-5);
    }

    #[test]
    fn constant_input_normalizes_to_zero() {
        let mut bn = BatchNorm1d::new(2, 1e-5, 0.9);
        let x = tensor(1, 3, 2, vec![5.0, -1.0, 5.0, -1.0, 5.0, -1.0]);
        let (y, _) = bn.forward_train(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn affine_parameters_scale_and_shift() {
        let mut bn = BatchNorm1d::new(1, 0.0, 0.9);
        bn.gamma.value[0] = 2.0;
        bn.beta.value[0] = 1.0;
        // Values normalizing exactly to [-1, 1] (eps = 0).
        let x = tensor(2, 1, 1, vec![-1.0, 1.0]);
        let (y, _) = bn.forward_train(&x).unwrap();
        assert!((y.at(0, 0, 0) + 1.0).abs() < 1e-12);
        assert!((y.at(1, 0, 0) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_value_batches_are_degenerate() {
        let mut bn = BatchNorm1d::new(1, 1e-5, 0.9);
        let x = tensor(1, 1, 1, vec![4.0]);
        assert!(matches!(bn.forward_train(&x), Err(NnError::DegenerateBatch)));
    }

    #[test]
    fn train_mode_statistics_are_standardized() {
        let mut rng = crate::SeedRng::seed_from_u64(3);
        let (n, t, c) = (4, 7, 3);
        let data: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(-8.0..8.0)).collect();
        let x = tensor(n, t, c, data);
        let mut bn = BatchNorm1d::new(c, 1e-5, 0.9);
        let (y, _) = bn.forward_train(&x).unwrap();
        let m = (n * t) as f64;
        for ch in 0..c {
            let mut mean = 0.0;
            for b in 0..n {
                for s in 0..t {
                    mean += y.at(b, s, ch);
                }
            }
            mean /= m;
            assert!(mean.abs() < 1e-9, "channel {ch} mean {mean}");
            let mut var = 0.0;
            for b in 0..n {
                for s in 0..t {
                    var += (y.at(b, s, ch) - mean) * (y.at(b, s, ch) - mean);
                }
            }
            var /= m;
            // Unit variance up to the eps correction var/(var+eps).
            assert!((var - 1.0).abs() < 1e-4, "channel {ch} var {var}");
        }
    }

    #[test]
    fn running_stats_blend_and_drive_inference() {
        let mut bn = BatchNorm1d::new(1, 0.0, 0.5);
        let x = tensor(2, 1, 1, vec![1.0, 3.0]);
        let _ = bn.forward_train(&x).unwrap();
        // running = 0.5*init + 0.5*batch: mean 1.0, var 1.0.
        assert!((bn.running_mean[0] - 1.0).abs() < 1e-12);
        assert!((bn.running_var[0] - 1.0).abs() < 1e-12);

        let y = bn.forward_infer(&x).unwrap();
        assert!((y.at(0, 0, 0) - 0.0).abs() < 1e-12);
        assert!((y.at(1, 0, 0) - 2.0).abs() < 1e-12);
        // Inference twice is bit-identical and does not move the stats.
        let y2 = bn.forward_infer(&x).unwrap();
        assert_eq!(y.data(), y2.data());
        assert_eq!(bn.running_mean[0], 1.0);
    }

    #[test]
    fn grad_beta_is_upstream_sum_and_centered_grad_x() {
        let mut rng = crate::SeedRng::seed_from_u64(5);
        let (n, t, c) = (3, 4, 2);
        let data: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = tensor(n, t, c, data);
        let mut bn = BatchNorm1d::new(c, 1e-5, 0.9);
        let (_, cache) = bn.forward_train(&x).unwrap();

        let ones = tensor(n, t, c, vec![1.0; n * t * c]);
        let gx = bn.backward(&cache, &ones).unwrap();
        for ch in 0..c {
            assert!((bn.beta.grad[ch] - (n * t) as f64).abs() < 1e-12);
            // Constant upstream gradient: the normalization removes it, so the
            // input gradient sums to ~0 per channel.
            let mut sum = 0.0;
            for b in 0..n {
                for s in 0..t {
                    sum += gx.at(b, s, ch);
                }
            }
            assert!(sum.abs() < 1e-9, "channel {ch} grad sum {sum}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let step = 1e-5;
        let tol = 1e-5;
        let mut rng = crate::SeedRng::seed_from_u64(7);
        let (n, t, c) = (2, 3, 2);
        let data: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = tensor(n, t, c, data);
        let probe: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe = tensor(n, t, c, probe);

        let mut bn = BatchNorm1d::new(c, 1e-5, 0.9);
        for v in bn.gamma.value.iter_mut() {
            *v = rng.gen_range(0.5..1.5);
        }
        for v in bn.beta.value.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }

        // Loss through a fresh layer clone so running-stat updates of probing
        // passes cannot interact (they do not affect train output anyway).
        let loss = |bn: &BatchNorm1d, x: &Tensor3| -> f64 {
            let mut tmp = bn.clone();
            let (y, _) = tmp.forward_train(x).unwrap();
            y.data().iter().zip(probe.data().iter()).map(|(a, b)| a * b).sum()
        };

        let (_, cache) = bn.clone().forward_train(&x).unwrap();
        let mut layer = bn.clone();
        let gx = layer.backward(&cache, &probe).unwrap();

        let mut x_pert = x.clone();
        for idx in 0..x.data().len() {
            let orig = x_pert.data()[idx];
            x_pert.data_mut()[idx] = orig + step;
            let up = loss(&bn, &x_pert);
            x_pert.data_mut()[idx] = orig - step;
            let down = loss(&bn, &x_pert);
            x_pert.data_mut()[idx] = orig;
            let numeric = (up - down) / (2.0 * step);
            let analytic = gx.data()[idx];
            assert!(
                (numeric - analytic).abs() <= tol * (1.0 + numeric.abs().max(analytic.abs())),
                "grad_x[{idx}]: analytic {analytic} vs numeric {numeric}"
            );
        }

        for (name, grads) in [("gamma", &layer.gamma.grad), ("beta", &layer.beta.grad)] {
            for idx in 0..c {
                let mut pert = bn.clone();
                let slot = if name == "gamma" {
                    &mut pert.gamma.value
                } else {
                    &mut pert.beta.value
                };
                let orig = slot[idx];
                slot[idx] = orig + step;
                let up = loss(&pert, &x);
                let slot = if name == "gamma" {
                    &mut pert.gamma.value
                } else {
                    &mut pert.beta.value
                };
                slot[idx] = orig - step;
                let down = loss(&pert, &x);
                let numeric = (up - down) / (2.0 * step);
                let analytic = grads[idx];
                assert!(
                    (numeric - analytic).abs()
                        <= tol * (1.0 + numeric.abs().max(analytic.abs())),
                    "{name}[{idx}]: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }
}
