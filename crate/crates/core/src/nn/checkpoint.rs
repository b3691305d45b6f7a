//! Model checkpoints: a versioned binary container holding the full config,
//! every parameter, the batch-norm running statistics, and the init seed.
//! Values are stored as little-endian IEEE 754 bits, so encode/decode round
//! trips are bit-exact.

use alloc::string::String;
use alloc::vec::Vec;

use super::{build_res_tcn, ModelConfig, NnError, ResTcnModel};

const MAGIC: &[u8; 4] = b"MGCK";
pub const CHECKPOINT_VERSION: u16 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64_slice(&mut self, vs: &[f64]) {
        for v in vs {
            self.f64(*v);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::Corrupt(truncated(what)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u16(&mut self, what: &str) -> Result<u16, NnError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }
    fn u32(&mut self, what: &str) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
    fn u64(&mut self, what: &str) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64(&mut self, what: &str) -> Result<f64, NnError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64_into(&mut self, dst: &mut [f64], what: &str) -> Result<(), NnError> {
        for v in dst.iter_mut() {
            *v = self.f64(what)?;
        }
        Ok(())
    }
}

fn truncated(what: &str) -> String {
    let mut s = String::from("truncated while reading ");
    s.push_str(what);
    s
}

impl ResTcnModel {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.u16(CHECKPOINT_VERSION);
        let cfg = &self.config;
        w.u32(cfg.input_channels as u32);
        w.u32(cfg.class_count as u32);
        w.u32(cfg.initial_filters as u32);
        w.u32(cfg.kernel_len as u32);
        w.u32(cfg.unit_filters.len() as u32);
        for &f in &cfg.unit_filters {
            w.u32(f as u32);
        }
        w.f64(cfg.dropout);
        w.f64(cfg.bn_eps);
        w.f64(cfg.bn_momentum);
        w.u64(cfg.seed);

        w.f64_slice(&self.initial.weight.value);
        w.f64_slice(&self.initial.bias.value);
        for unit in &self.units {
            w.f64_slice(&unit.bn.gamma.value);
            w.f64_slice(&unit.bn.beta.value);
            w.f64_slice(&unit.bn.running_mean);
            w.f64_slice(&unit.bn.running_var);
            w.f64_slice(&unit.conv.weight.value);
            w.f64_slice(&unit.conv.bias.value);
            if let Some(p) = &unit.projection {
                w.f64_slice(&p.weight.value);
                w.f64_slice(&p.bias.value);
            }
        }
        w.f64_slice(&self.final_bn.gamma.value);
        w.f64_slice(&self.final_bn.beta.value);
        w.f64_slice(&self.final_bn.running_mean);
        w.f64_slice(&self.final_bn.running_var);
        w.f64_slice(&self.dense.weight.value);
        w.f64_slice(&self.dense.bias.value);
        w.buf
    }

    /// Rebuild a model from checkpoint bytes. Gradients and optimizer
    /// velocities start zeroed; everything stored round-trips bit-exactly.
    pub fn decode(bytes: &[u8]) -> Result<ResTcnModel, NnError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != MAGIC {
            return Err(NnError::Corrupt("bad magic".into()));
        }
        let version = r.u16("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(NnError::Corrupt(alloc::format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let input_channels = r.u32("input channels")? as usize;
        let class_count = r.u32("class count")? as usize;
        let initial_filters = r.u32("initial filters")? as usize;
        let kernel_len = r.u32("kernel length")? as usize;
        let unit_count = r.u32("unit count")? as usize;
        if unit_count > 1 << 20 {
            return Err(NnError::Corrupt("implausible unit count".into()));
        }
        let mut unit_filters = Vec::with_capacity(unit_count);
        for _ in 0..unit_count {
            unit_filters.push(r.u32("unit filters")? as usize);
        }
        let config = ModelConfig {
            input_channels,
            class_count,
            initial_filters,
            kernel_len,
            unit_filters,
            dropout: r.f64("dropout")?,
            bn_eps: r.f64("bn eps")?,
            bn_momentum: r.f64("bn momentum")?,
            seed: r.u64("seed")?,
        };
        let mut model = build_res_tcn(&config)
            .map_err(|e| NnError::Corrupt(alloc::format!("config rejected: {e}")))?;

        r.f64_into(&mut model.initial.weight.value, "initial conv weights")?;
        r.f64_into(&mut model.initial.bias.value, "initial conv bias")?;
        for unit in &mut model.units {
            r.f64_into(&mut unit.bn.gamma.value, "unit bn gamma")?;
            r.f64_into(&mut unit.bn.beta.value, "unit bn beta")?;
            r.f64_into(&mut unit.bn.running_mean, "unit bn running mean")?;
            r.f64_into(&mut unit.bn.running_var, "unit bn running var")?;
            r.f64_into(&mut unit.conv.weight.value, "unit conv weights")?;
            r.f64_into(&mut unit.conv.bias.value, "unit conv bias")?;
            if let Some(p) = &mut unit.projection {
                r.f64_into(&mut p.weight.value, "projection weights")?;
                r.f64_into(&mut p.bias.value, "projection bias")?;
            }
        }
        r.f64_into(&mut model.final_bn.gamma.value, "final bn gamma")?;
        r.f64_into(&mut model.final_bn.beta.value, "final bn beta")?;
        r.f64_into(&mut model.final_bn.running_mean, "final bn running mean")?;
        r.f64_into(&mut model.final_bn.running_var, "final bn running var")?;
        r.f64_into(&mut model.dense.weight.value, "dense weights")?;
        r.f64_into(&mut model.dense.bias.value, "dense bias")?;
        if r.pos != bytes.len() {
            return Err(NnError::Corrupt("trailing bytes".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_res_tcn, ModelConfig, NnError, ResTcnModel, Tensor3};
    use crate::SeedRng;
    use alloc::vec;
    use alloc::vec::Vec;
    use rand::{Rng, SeedableRng};

    fn trained_tiny_model() -> ResTcnModel {
        let cfg = ModelConfig {
            input_channels: 3,
            class_count: 2,
            initial_filters: 4,
            kernel_len: 3,
            unit_filters: vec![4, 6],
            dropout: 0.2,
            bn_eps: 1e-5,
            bn_momentum: 0.9,
            seed: 77,
        };
        let mut model = build_res_tcn(&cfg).unwrap();
        let mut rng = SeedRng::seed_from_u64(3);
        let data: Vec<f64> = (0..2 * 5 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Tensor3::from_vec(2, 5, 3, data).unwrap();
        for _ in 0..3 {
            model.train_step(&x, &[0, 1], 0.05, 0.9, 1e-4, &mut rng).unwrap();
        }
        model
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = trained_tiny_model();
        let bytes = model.encode();
        let decoded = ResTcnModel::decode(&bytes).unwrap();
        assert_eq!(decoded.encode(), bytes);
        assert_eq!(decoded.config, model.config);

        // The decoded model computes the same inference outputs bit-for-bit.
        let mut rng = SeedRng::seed_from_u64(9);
        let data: Vec<f64> = (0..2 * 5 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Tensor3::from_vec(2, 5, 3, data).unwrap();
        assert_eq!(
            model.forward_infer(&x).unwrap().data(),
            decoded.forward_infer(&x).unwrap().data()
        );
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let model = trained_tiny_model();
        let mut bytes = model.encode();

        assert!(matches!(
            ResTcnModel::decode(&bytes[..bytes.len() - 1]),
            Err(NnError::Corrupt(_))
        ));

        let mut longer = bytes.clone();
        longer.push(0);
        assert!(matches!(
            ResTcnModel::decode(&longer),
            Err(NnError::Corrupt(_))
        ));

        bytes[0] = b'X';
        assert!(matches!(ResTcnModel::decode(&bytes), Err(NnError::Corrupt(_))));
    }
}
