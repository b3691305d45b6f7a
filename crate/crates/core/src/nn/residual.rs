//! Pre-activation residual unit: `y = shortcut(x) + conv(dropout(relu(bn(x))))`.
//!
//! The shortcut is the identity when input and output channel counts match,
//! otherwise a trainable 1×1 stride-1 projection convolution.

use super::{
    dropout, dropout_backward, relu, relu_backward, BatchNorm1d, BnCache, Conv1d, Mode, NnError,
    Tensor3,
};
use crate::SeedRng;

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualUnit {
    pub bn: BatchNorm1d,
    pub conv: Conv1d,
    /// 1×1 projection shortcut, present only when channels change.
    pub projection: Option<Conv1d>,
    pub dropout: f64,
}

/// Intermediates one backward pass needs.
#[derive(Debug, Clone)]
pub struct UnitCache {
    /// The unit input; kept only when a projection shortcut needs it.
    x: Option<Tensor3>,
    bn: BnCache,
    bn_out: Tensor3,
    mask: Tensor3,
    conv_in: Tensor3,
}

impl ResidualUnit {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel_len: usize,
        dropout: f64,
        bn_eps: f64,
        bn_momentum: f64,
        rng: &mut SeedRng,
    ) -> ResidualUnit {
        let conv = Conv1d::new(in_channels, out_channels, kernel_len, 1, rng);
        let projection = (in_channels != out_channels)
            .then(|| Conv1d::new(in_channels, out_channels, 1, 1, rng));
        ResidualUnit {
            bn: BatchNorm1d::new(in_channels, bn_eps, bn_momentum),
            conv,
            projection,
            dropout,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.bn.channels
    }

    pub fn out_channels(&self) -> usize {
        self.conv.out_channels
    }

    pub fn forward_train(
        &mut self,
        x: &Tensor3,
        rng: &mut SeedRng,
    ) -> Result<(Tensor3, UnitCache), NnError> {
        let (bn_out, bn_cache) = self.bn.forward_train(x)?;
        let activated = relu(&bn_out);
        let (dropped, mask) = dropout(&activated, self.dropout, Mode::Train, rng);
        let branch = self.conv.forward(&dropped)?;
        let y = match &self.projection {
            Some(p) => p.forward(x)?.add(&branch)?,
            None => x.add(&branch)?,
        };
        Ok((
            y,
            UnitCache {
                x: self.projection.is_some().then(|| x.clone()),
                bn: bn_cache,
                bn_out,
                mask,
                conv_in: dropped,
            },
        ))
    }

    pub fn forward_infer(&self, x: &Tensor3) -> Result<Tensor3, NnError> {
        let activated = relu(&self.bn.forward_infer(x)?);
        let branch = self.conv.forward(&activated)?;
        match &self.projection {
            Some(p) => p.forward(x)?.add(&branch),
            None => x.add(&branch),
        }
    }

    /// Backward through both the residual branch and the shortcut; fills this
    /// unit's parameter gradients and returns the input gradient.
    pub fn backward(
        &mut self,
        cache: &UnitCache,
        grad_out: &Tensor3,
    ) -> Result<Tensor3, NnError> {
        let g = self.conv.backward(&cache.conv_in, grad_out)?;
        let g = dropout_backward(&cache.mask, &g);
        let g = relu_backward(&cache.bn_out, &g);
        let g = self.bn.backward(&cache.bn, &g)?;
        let shortcut_grad = match &mut self.projection {
            Some(p) => p.backward(cache.x.as_ref().expect("projection cache"), grad_out)?,
            None => grad_out.clone(),
        };
        g.add(&shortcut_grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};

    fn unit(in_c: usize, out_c: usize, dropout: f64, seed: u64) -> ResidualUnit {
        let mut rng = crate::SeedRng::seed_from_u64(seed);
        ResidualUnit::new(in_c, out_c, 3, dropout, 1e-5, 0.9, &mut rng)
    }

    fn random_input(n: usize, t: usize, c: usize, seed: u64) -> Tensor3 {
        let mut rng = crate::SeedRng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(-1.5..1.5)).collect();
        Tensor3::from_vec(n, t, c, data).unwrap()
    }

    #[test]
    fn zero_branch_with_identity_shortcut_passes_input() {
        let mut u = unit(3, 3, 0.0, 1);
        assert!(u.projection.is_none());
        for w in u.conv.weight.value.iter_mut() {
            *w = 0.0;
        }
        let x = random_input(2, 5, 3, 2);
        let mut rng = crate::SeedRng::seed_from_u64(3);
        let (y, _) = u.forward_train(&x, &mut rng).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn zero_branch_with_projection_is_projection_only() {
        let mut u = unit(2, 4, 0.0, 4);
        assert!(u.projection.is_some());
        for w in u.conv.weight.value.iter_mut() {
            *w = 0.0;
        }
        let x = random_input(1, 4, 2, 5);
        let mut rng = crate::SeedRng::seed_from_u64(6);
        let (y, _) = u.forward_train(&x, &mut rng).unwrap();
        let projected = u.projection.as_ref().unwrap().forward(&x).unwrap();
        assert_eq!(y.data(), projected.data());
    }

    #[test]
    fn infer_mode_is_deterministic() {
        let u = unit(3, 5, 0.5, 7);
        let x = random_input(2, 6, 3, 8);
        let a = u.forward_infer(&x).unwrap();
        let b = u.forward_infer(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    // Whole-unit finite-difference check, dropout active with a frozen mask
    // (the same RNG seed reproduces the same mask in every probe pass).
    #[test]
    fn unit_gradient_matches_finite_differences() {
        let step = 1e-5;
        let tol = 1e-5;
        for (seed, in_c, out_c) in [(11u64, 3usize, 3usize), (12, 2, 4)] {
            let u = unit(in_c, out_c, 0.4, seed);
            let x = random_input(2, 5, in_c, seed + 20);
            let probe = random_input(2, 5, out_c, seed + 30);
            let mask_seed = seed + 40;

            let loss = |u: &ResidualUnit, x: &Tensor3| -> f64 {
                let mut tmp = u.clone();
                let mut rng = crate::SeedRng::seed_from_u64(mask_seed);
                let (y, _) = tmp.forward_train(x, &mut rng).unwrap();
                y.data().iter().zip(probe.data()).map(|(a, b)| a * b).sum()
            };

            let mut trained = u.clone();
            let mut rng = crate::SeedRng::seed_from_u64(mask_seed);
            let (_, cache) = trained.forward_train(&x, &mut rng).unwrap();
            let gx = trained.backward(&cache, &probe).unwrap();

            let mut xp = x.clone();
            for idx in 0..x.data().len() {
                let orig = xp.data()[idx];
                xp.data_mut()[idx] = orig + step;
                let up = loss(&u, &xp);
                xp.data_mut()[idx] = orig - step;
                let down = loss(&u, &xp);
                xp.data_mut()[idx] = orig;
                let numeric = (up - down) / (2.0 * step);
                let analytic = gx.data()[idx];
                assert!(
                    (numeric - analytic).abs()
                        <= tol * (1.0 + numeric.abs().max(analytic.abs())),
                    "in={in_c} out={out_c} grad_x[{idx}]: {analytic} vs {numeric}"
                );
            }

            // Spot-check parameter gradients of every block through closures
            // that perturb a clone.
            let checks: [(&str, Box<dyn Fn(&mut ResidualUnit) -> &mut Vec<f64>>, Vec<f64>); 4] = [
                (
                    "conv.w",
                    Box::new(|u| &mut u.conv.weight.value),
                    trained.conv.weight.grad.clone(),
                ),
                (
                    "conv.b",
                    Box::new(|u| &mut u.conv.bias.value),
                    trained.conv.bias.grad.clone(),
                ),
                (
                    "bn.gamma",
                    Box::new(|u| &mut u.bn.gamma.value),
                    trained.bn.gamma.grad.clone(),
                ),
                (
                    "bn.beta",
                    Box::new(|u| &mut u.bn.beta.value),
                    trained.bn.beta.grad.clone(),
                ),
            ];
            for (name, access, analytic) in checks {
                for idx in 0..analytic.len() {
                    let mut pert = u.clone();
                    let orig = access(&mut pert)[idx];
                    access(&mut pert)[idx] = orig + step;
                    let up = loss(&pert, &x);
                    access(&mut pert)[idx] = orig - step;
                    let down = loss(&pert, &x);
                    let numeric = (up - down) / (2.0 * step);
                    assert!(
                        (numeric - analytic[idx]).abs()
                            <= tol * (1.0 + numeric.abs().max(analytic[idx].abs())),
                        "{name}[{idx}]: {} vs {numeric}",
                        analytic[idx]
                    );
                }
            }
            if let Some(p) = &trained.projection {
                let analytic = p.weight.grad.clone();
                for idx in 0..analytic.len() {
                    let mut pert = u.clone();
                    let orig = pert.projection.as_ref().unwrap().weight.value[idx];
                    pert.projection.as_mut().unwrap().weight.value[idx] = orig + step;
                    let up = loss(&pert, &x);
                    pert.projection.as_mut().unwrap().weight.value[idx] = orig - step;
                    let down = loss(&pert, &x);
                    let numeric = (up - down) / (2.0 * step);
                    assert!(
                        (numeric - analytic[idx]).abs()
                            <= tol * (1.0 + numeric.abs().max(analytic[idx].abs())),
                        "proj.w[{idx}]: {} vs {numeric}",
                        analytic[idx]
                    );
                }
            }
        }
    }
}
