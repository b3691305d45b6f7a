//! The residual temporal convolutional classifier.
//!
//! Stack: initial convolution (kernel 8, stride 1, 8 filters by default),
//! then a run of pre-activation residual units (default nine, filter counts
//! 64/64/64, 128/128/128, 256/256/256), then batch norm, ReLU, dropout,
//! global average pooling over time, and a dense softmax head with one output
//! per class. Dropout follows every ReLU, inside the units and after the
//! final one. The L1 penalty applies to convolution weights only (initial,
//! unit, and projection convolutions; never the dense head).

use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;

use super::{
    dropout, dropout_backward, global_avg_pool, global_avg_pool_backward, relu, relu_backward,
    softmax, softmax_cross_entropy_grad, BatchNorm1d, BnCache, Conv1d, Dense, Matrix, Mode,
    NnError, Param, ResidualUnit, Tensor3, UnitCache,
};
use crate::math;
use crate::SeedRng;

/// Everything needed to build a model deterministically.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub input_channels: usize,
    pub class_count: usize,
    /// Filter count of the initial convolution.
    pub initial_filters: usize,
    /// Kernel length shared by the initial and unit convolutions.
    pub kernel_len: usize,
    /// Output filter count of each residual unit, in order.
    pub unit_filters: Vec<usize>,
    pub dropout: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    /// Weight-initialization seed.
    pub seed: u64,
}

impl ModelConfig {
    /// Stock configuration: initial conv with 8 filters, kernel length 8,
    /// nine residual units rising through 64, 128, and 256 filters.
    pub fn new(input_channels: usize, class_count: usize) -> ModelConfig {
        ModelConfig {
            input_channels,
            class_count,
            initial_filters: 8,
            kernel_len: 8,
            unit_filters: alloc::vec![64, 64, 64, 128, 128, 128, 256, 256, 256],
            dropout: 0.5,
            bn_eps: 1e-5,
            bn_momentum: 0.9,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<(), NnError> {
        if self.input_channels == 0
            || self.class_count < 2
            || self.initial_filters == 0
            || self.kernel_len == 0
        {
            return Err(NnError::InvalidConfig(format!(
                "channels {}, classes {}, filters {}, kernel {} must all be positive (classes >= 2)",
                self.input_channels, self.class_count, self.initial_filters, self.kernel_len
            )));
        }
        if self.unit_filters.is_empty() || self.unit_filters.contains(&0) {
            return Err(NnError::InvalidConfig(
                "unit filter schedule must be non-empty and positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(NnError::InvalidConfig(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.bn_eps <= 0.0 || !(0.0..1.0).contains(&self.bn_momentum) {
            return Err(NnError::InvalidConfig(format!(
                "bn eps {} / momentum {} out of range",
                self.bn_eps, self.bn_momentum
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResTcnModel {
    pub config: ModelConfig,
    pub initial: Conv1d,
    pub units: Vec<ResidualUnit>,
    pub final_bn: BatchNorm1d,
    pub dense: Dense,
}

/// Intermediates of one train-mode forward pass, consumed by `backward`.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Tensor3,
    unit_caches: Vec<UnitCache>,
    final_bn_cache: BnCache,
    final_bn_out: Tensor3,
    final_mask: Tensor3,
    pooled: Matrix,
    pub logits: Matrix,
    pub probs: Matrix,
}

/// Build a model with weights drawn deterministically from `config.seed`.
pub fn build_res_tcn(config: &ModelConfig) -> Result<ResTcnModel, NnError> {
    config.validate()?;
    let mut rng = SeedRng::seed_from_u64(config.seed);
    let initial = Conv1d::new(
        config.input_channels,
        config.initial_filters,
        config.kernel_len,
        1,
        &mut rng,
    );
    let mut units = Vec::with_capacity(config.unit_filters.len());
    let mut channels = config.initial_filters;
    for &filters in &config.unit_filters {
        units.push(ResidualUnit::new(
            channels,
            filters,
            config.kernel_len,
            config.dropout,
            config.bn_eps,
            config.bn_momentum,
            &mut rng,
        ));
        channels = filters;
    }
    let final_bn = BatchNorm1d::new(channels, config.bn_eps, config.bn_momentum);
    let dense = Dense::new(channels, config.class_count, &mut rng);
    Ok(ResTcnModel {
        config: config.clone(),
        initial,
        units,
        final_bn,
        dense,
    })
}

impl ResTcnModel {
    fn check_input(&self, x: &Tensor3) -> Result<(), NnError> {
        if x.channels() != self.config.input_channels {
            return Err(NnError::Shape(format!(
                "model input: {} channels, configured for {}",
                x.channels(),
                self.config.input_channels
            )));
        }
        Ok(())
    }

    /// Inference forward pass: running statistics, no dropout, no state
    /// mutation. Returns class probabilities, one row per sample.
    pub fn forward_infer(&self, x: &Tensor3) -> Result<Matrix, NnError> {
        self.check_input(x)?;
        let mut h = self.initial.forward(x)?;
        for unit in &self.units {
            h = unit.forward_infer(&h)?;
        }
        let h = relu(&self.final_bn.forward_infer(&h)?);
        let pooled = global_avg_pool(&h);
        let logits = self.dense.forward(&pooled)?;
        Ok(softmax(&logits))
    }

    /// Train-mode forward pass: batch statistics (running statistics are
    /// updated) and dropout driven by `rng`. The returned trace carries the
    /// probabilities plus everything `backward` needs.
    pub fn forward_train(&mut self, x: &Tensor3, rng: &mut SeedRng) -> Result<Trace, NnError> {
        self.check_input(x)?;
        let input = x.clone();
        let mut h = self.initial.forward(x)?;
        let mut unit_caches = Vec::with_capacity(self.units.len());
        for unit in &mut self.units {
            let (next, cache) = unit.forward_train(&h, rng)?;
            unit_caches.push(cache);
            h = next;
        }
        let (bn_out_raw, final_bn_cache) = self.final_bn.forward_train(&h)?;
        let activated = relu(&bn_out_raw);
        let (dropped, final_mask) = dropout(&activated, self.config.dropout, Mode::Train, rng);
        let pooled = global_avg_pool(&dropped);
        let logits = self.dense.forward(&pooled)?;
        let probs = softmax(&logits);
        Ok(Trace {
            input,
            unit_caches,
            final_bn_cache,
            final_bn_out: bn_out_raw,
            final_mask,
            pooled,
            logits,
            probs,
        })
    }

    /// Backpropagate through the trace. Fills every parameter gradient and
    /// returns the loss: mean cross-entropy plus `l1_weight` times the sum of
    /// absolute convolution weights.
    pub fn backward(
        &mut self,
        trace: &Trace,
        labels: &[usize],
        l1_weight: f64,
    ) -> Result<f64, NnError> {
        let data_loss = super::dense::cross_entropy_from_logits(&trace.logits, labels)?;

        let dlogits = softmax_cross_entropy_grad(&trace.probs, labels);
        let grad_pooled = self.dense.backward(&trace.pooled, &dlogits)?;
        let g = global_avg_pool_backward(&grad_pooled, trace.final_bn_out.time());
        let g = dropout_backward(&trace.final_mask, &g);
        let g = relu_backward(&trace.final_bn_out, &g);
        let mut g = self.final_bn.backward(&trace.final_bn_cache, &g)?;
        for (unit, cache) in self.units.iter_mut().zip(trace.unit_caches.iter()).rev() {
            g = unit.backward(cache, &g)?;
        }
        let _ = self.initial.backward(&trace.input, &g)?;

        let mut penalty = 0.0;
        self.for_each_conv(|conv| {
            for (w, gw) in conv.weight.value.iter().zip(conv.weight.grad.iter_mut()) {
                penalty += math::abs(*w);
                // Subgradient of |w|, with sign(0) = 0.
                if *w > 0.0 {
                    *gw += l1_weight;
                } else if *w < 0.0 {
                    *gw -= l1_weight;
                }
            }
        });
        Ok(data_loss + l1_weight * penalty)
    }

    /// One Nesterov update on a mini-batch; returns the loss (including the
    /// L1 term) evaluated at the lookahead point.
    pub fn train_step(
        &mut self,
        x: &Tensor3,
        labels: &[usize],
        learning_rate: f64,
        momentum: f64,
        l1_weight: f64,
        rng: &mut SeedRng,
    ) -> Result<f64, NnError> {
        self.for_each_param(|p| super::sgd_nesterov_lookahead(p, momentum));
        let trace = self.forward_train(x, rng)?;
        let loss = self.backward(&trace, labels, l1_weight)?;
        self.for_each_param(|p| super::sgd_nesterov_step(p, learning_rate, momentum));
        Ok(loss)
    }

    /// The L1 penalty value at the current weights.
    pub fn l1_penalty(&self, l1_weight: f64) -> f64 {
        let mut total = 0.0;
        let mut add = |conv: &Conv1d| {
            total += conv.weight.value.iter().map(|w| math::abs(*w)).sum::<f64>();
        };
        add(&self.initial);
        for unit in &self.units {
            add(&unit.conv);
            if let Some(p) = &unit.projection {
                add(p);
            }
        }
        l1_weight * total
    }

    /// Visit every parameter block in a fixed order.
    pub fn for_each_param(&mut self, mut f: impl FnMut(&mut Param)) {
        f(&mut self.initial.weight);
        f(&mut self.initial.bias);
        for unit in &mut self.units {
            f(&mut unit.bn.gamma);
            f(&mut unit.bn.beta);
            f(&mut unit.conv.weight);
            f(&mut unit.conv.bias);
            if let Some(p) = &mut unit.projection {
                f(&mut p.weight);
                f(&mut p.bias);
            }
        }
        f(&mut self.final_bn.gamma);
        f(&mut self.final_bn.beta);
        f(&mut self.dense.weight);
        f(&mut self.dense.bias);
    }

    fn for_each_conv(&mut self, mut f: impl FnMut(&mut Conv1d)) {
        f(&mut self.initial);
        for unit in &mut self.units {
            f(&mut unit.conv);
            if let Some(p) = &mut unit.projection {
                f(p);
            }
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut count = 0;
        self.for_each_param(|p| count += p.len());
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::Rng;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            input_channels: 3,
            class_count: 2,
            initial_filters: 4,
            kernel_len: 4,
            unit_filters: vec![4, 6],
            dropout: 0.3,
            bn_eps: 1e-5,
            bn_momentum: 0.9,
            seed: 42,
        }
    }

    fn random_input(n: usize, t: usize, c: usize, seed: u64) -> Tensor3 {
        let mut rng = SeedRng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * t * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Tensor3::from_vec(n, t, c, data).unwrap()
    }

    #[test]
    fn stock_config_builds_nine_units_with_two_outputs() {
        let cfg = ModelConfig::new(66, 2);
        let model = build_res_tcn(&cfg).unwrap();
        assert_eq!(model.units.len(), 9);
        assert_eq!(model.dense.out_features, 2);
        let filters: Vec<usize> = model.units.iter().map(|u| u.out_channels()).collect();
        assert_eq!(filters, vec![64, 64, 64, 128, 128, 128, 256, 256, 256]);
        // Projections exactly where the channel count changes.
        let projected: Vec<bool> = model.units.iter().map(|u| u.projection.is_some()).collect();
        assert_eq!(
            projected,
            vec![true, false, false, true, false, false, true, false, false]
        );
    }

    #[test]
    fn equal_seeds_build_identical_models() {
        let cfg = tiny_config();
        let a = build_res_tcn(&cfg).unwrap();
        let b = build_res_tcn(&cfg).unwrap();
        assert_eq!(a, b);
        let c = build_res_tcn(&ModelConfig {
            seed: 43,
            ..cfg
        })
        .unwrap();
        assert_ne!(a.initial.weight.value, c.initial.weight.value);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny_config();
        cfg.dropout = 1.0;
        assert!(matches!(build_res_tcn(&cfg), Err(NnError::InvalidConfig(_))));
        let mut cfg = tiny_config();
        cfg.unit_filters.clear();
        assert!(matches!(build_res_tcn(&cfg), Err(NnError::InvalidConfig(_))));
        let mut cfg = tiny_config();
        cfg.class_count = 1;
        assert!(matches!(build_res_tcn(&cfg), Err(NnError::InvalidConfig(_))));
    }

    #[test]
    fn zero_input_yields_finite_normalized_probabilities() {
        let model = build_res_tcn(&tiny_config()).unwrap();
        let x = Tensor3::zeros(2, 5, 3);
        let probs = model.forward_infer(&x).unwrap();
        for r in 0..2 {
            let sum: f64 = probs.row(r).iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(probs.row(r).iter().all(|p| p.is_finite()));
        }
    }

    #[test]
    fn duplicate_samples_get_identical_rows() {
        let model = build_res_tcn(&tiny_config()).unwrap();
        let one = random_input(1, 5, 3, 7);
        let mut both = Tensor3::zeros(2, 5, 3);
        both.data_mut()[..15].copy_from_slice(one.data());
        both.data_mut()[15..].copy_from_slice(one.data());
        let probs = model.forward_infer(&both).unwrap();
        assert_eq!(probs.row(0), probs.row(1));
    }

    #[test]
    fn infer_is_bitwise_deterministic() {
        let model = build_res_tcn(&tiny_config()).unwrap();
        let x = random_input(3, 6, 3, 9);
        let a = model.forward_infer(&x).unwrap();
        let b = model.forward_infer(&x).unwrap();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn wrong_channel_count_is_reported() {
        let model = build_res_tcn(&tiny_config()).unwrap();
        let x = Tensor3::zeros(1, 4, 5);
        assert!(matches!(model.forward_infer(&x), Err(NnError::Shape(_))));
    }

    #[test]
    fn l1_subgradient_is_zero_at_zero_weights() {
        let cfg = tiny_config();
        let x = random_input(2, 5, 3, 11);
        let labels = [0usize, 1];

        let run = |l1: f64, zero_idx: Option<usize>| -> (Vec<f64>, f64) {
            let mut model = build_res_tcn(&cfg).unwrap();
            if let Some(i) = zero_idx {
                model.initial.weight.value[i] = 0.0;
            }
            let mut rng = SeedRng::seed_from_u64(5);
            let trace = model.forward_train(&x, &mut rng).unwrap();
            let loss = model.backward(&trace, &labels, l1).unwrap();
            (model.initial.weight.grad.clone(), loss)
        };

        let (g0, loss0) = run(0.0, Some(3));
        let (g1, loss1) = run(1e-2, Some(3));
        // At the zeroed weight the penalty contributes no gradient.
        assert_eq!(g0[3], g1[3]);
        // At nonzero weights it contributes exactly +-l1.
        let mut model = build_res_tcn(&cfg).unwrap();
        model.initial.weight.value[3] = 0.0;
        for idx in [0usize, 1, 2] {
            let w = model.initial.weight.value[idx];
            let expected = g0[idx] + 1e-2 * w.signum();
            assert!((g1[idx] - expected).abs() < 1e-12);
        }
        // Loss difference equals the penalty value.
        let penalty = model.l1_penalty(1e-2);
        assert!((loss1 - loss0 - penalty).abs() < 1e-12);
    }

    // Whole-model finite differences over every parameter and the input,
    // dropout active with a frozen mask stream.
    #[test]
    fn model_gradient_matches_finite_differences() {
        let cfg = tiny_config();
        let model = build_res_tcn(&cfg).unwrap();
        let x = random_input(2, 4, 3, 13);
        let labels = [1usize, 0];
        let l1 = 1e-3;
        let mask_seed = 99;

        let loss_of = |m: &ResTcnModel, x: &Tensor3| -> f64 {
            let mut tmp = m.clone();
            let mut rng = SeedRng::seed_from_u64(mask_seed);
            let trace = tmp.forward_train(x, &mut rng).unwrap();
            super::super::dense::cross_entropy_from_logits(&trace.logits, &labels).unwrap()
                + tmp.l1_penalty(l1)
        };

        let mut trained = model.clone();
        let mut rng = SeedRng::seed_from_u64(mask_seed);
        let trace = trained.forward_train(&x, &mut rng).unwrap();
        let reported = trained.backward(&trace, &labels, l1).unwrap();
        assert!((reported - loss_of(&model, &x)).abs() < 1e-12);

        let step = 1e-5;
        let tol = 1e-4;
        // Collect analytic grads in visiting order.
        let mut analytic: Vec<Vec<f64>> = Vec::new();
        trained.for_each_param(|p| analytic.push(p.grad.clone()));

        let blocks = analytic.len();
        for block in 0..blocks {
            for idx in 0..analytic[block].len() {
                let mut up_model = model.clone();
                let mut visit = 0;
                up_model.for_each_param(|p| {
                    if visit == block {
                        p.value[idx] += step;
                    }
                    visit += 1;
                });
                let up = loss_of(&up_model, &x);
                let mut down_model = model.clone();
                let mut visit = 0;
                down_model.for_each_param(|p| {
                    if visit == block {
                        p.value[idx] -= step;
                    }
                    visit += 1;
                });
                let down = loss_of(&down_model, &x);
                let numeric = (up - down) / (2.0 * step);
                let a = analytic[block][idx];
                assert!(
                    (numeric - a).abs() <= tol * (1.0 + numeric.abs().max(a.abs())),
                    "param block {block} index {idx}: analytic {a} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn same_seed_same_loss_trajectory() {
        let cfg = tiny_config();
        let x = random_input(4, 5, 3, 17);
        let labels = [0usize, 1, 1, 0];
        let run = || -> Vec<f64> {
            let mut model = build_res_tcn(&cfg).unwrap();
            let mut rng = SeedRng::seed_from_u64(21);
            (0..5)
                .map(|_| {
                    model
                        .train_step(&x, &labels, 0.01, 0.9, 1e-4, &mut rng)
                        .unwrap()
                })
                .collect()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert!(a.iter().all(|l| l.is_finite()));
    }
}
