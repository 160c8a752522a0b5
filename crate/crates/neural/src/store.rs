//! Named parameter storage with per-parameter optimizer moments.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::tape::{Gradients, Tape, Val};
use crate::tensor::Tensor;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Param {
    value: Tensor,
    m: Tensor,
    v: Tensor,
}

/// All trainable tensors of a model, keyed by name. Shapes are fixed at
/// registration; iteration order is the lexicographic name order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: u64,
}

/// Tape handles for every parameter of a store, for one forward pass.
pub type ParamBinding = BTreeMap<String, Val>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, value: Tensor) -> Result<(), Error> {
        if self.params.contains_key(name) {
            return Err(Error::DuplicateParam { name: name.into() });
        }
        let m = Tensor::zeros(&value.shape);
        let v = Tensor::zeros(&value.shape);
        self.params.insert(name.into(), Param { value, m, v });
        Ok(())
    }

    /// Register a matrix initialized uniformly in [-a, a] with
    /// a = sqrt(6 / (fan_in + fan_out)), from an rng derived from `seed` and
    /// the parameter name so the draw does not depend on registration order.
    pub fn register_uniform(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        seed: u64,
    ) -> Result<(), Error> {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ fnv1a(name.as_bytes()));
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-a..=a))
            .collect();
        self.register(name, Tensor::new(vec![rows, cols], data)?)
    }

    pub fn register_zeros(&mut self, name: &str, shape: &[usize]) -> Result<(), Error> {
        self.register(name, Tensor::zeros(shape))
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, Error> {
        self.params
            .get(name)
            .map(|p| &p.value)
            .ok_or_else(|| Error::UnknownParam { name: name.into() })
    }

    pub fn set(&mut self, name: &str, value: Tensor) -> Result<(), Error> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| Error::UnknownParam { name: name.into() })?;
        if p.value.shape != value.shape {
            return Err(Error::ShapeMismatch {
                op: "set".into(),
                detail: format!("{:?} vs {:?}", p.value.shape, value.shape),
            });
        }
        p.value = value;
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value_count(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn tensors(&self) -> BTreeMap<String, Tensor> {
        self.params
            .iter()
            .map(|(k, p)| (k.clone(), p.value.clone()))
            .collect()
    }

    /// Replace all values from a name -> tensor map; moments reset.
    pub fn load_tensors(&mut self, tensors: BTreeMap<String, Tensor>) -> Result<(), Error> {
        self.params.clear();
        self.step = 0;
        for (name, t) in tensors {
            let m = Tensor::zeros(&t.shape);
            let v = Tensor::zeros(&t.shape);
            self.params.insert(name, Param { value: t, m, v });
        }
        Ok(())
    }

    /// Put every parameter on a tape as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> ParamBinding {
        self.params
            .iter()
            .map(|(name, p)| (name.clone(), tape.leaf(p.value.clone())))
            .collect()
    }

    /// Collect gradients for all parameters of a binding; parameters the
    /// loss never touched come back as zeros.
    pub fn collect_grads(
        &self,
        tape: &Tape,
        binding: &ParamBinding,
        grads: &Gradients,
    ) -> BTreeMap<String, Tensor> {
        binding
            .iter()
            .map(|(name, val)| (name.clone(), grads.of(*val, tape.value(*val))))
            .collect()
    }

    /// One adaptive-moment update with bias correction.
    pub fn adam_step(
        &mut self,
        grads: &BTreeMap<String, Tensor>,
        cfg: AdamConfig,
    ) -> Result<(), Error> {
        for name in grads.keys() {
            if !self.params.contains_key(name) {
                return Err(Error::UnknownParam { name: name.clone() });
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        for (name, g) in grads {
            let p = self.params.get_mut(name).expect("checked above");
            if p.value.shape != g.shape {
                return Err(Error::ShapeMismatch {
                    op: "adam_step".into(),
                    detail: format!("{name}: {:?} vs {:?}", p.value.shape, g.shape),
                });
            }
            for i in 0..g.data.len() {
                let gi = g.data[i];
                p.m.data[i] = cfg.beta1 * p.m.data[i] + (1.0 - cfg.beta1) * gi;
                p.v.data[i] = cfg.beta2 * p.v.data[i] + (1.0 - cfg.beta2) * gi * gi;
                let mhat = p.m.data[i] / bc1;
                let vhat = p.v.data[i] / bc2;
                p.value.data[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
            }
            p.value.check_finite("adam_step")?;
        }
        Ok(())
    }
}

/// FNV-1a, used to derive per-parameter init streams and content hashes.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_are_rejected() {
        let mut s = ParamStore::new();
        s.register("w", Tensor::row(&[1.0])).unwrap();
        assert!(matches!(
            s.register("w", Tensor::row(&[2.0])),
            Err(Error::DuplicateParam { .. })
        ));
    }

    #[test]
    fn zero_gradient_leaves_fresh_params_unchanged() {
        let mut s = ParamStore::new();
        s.register("w", Tensor::row(&[1.5, -2.0])).unwrap();
        let grads = BTreeMap::from([("w".to_string(), Tensor::row(&[0.0, 0.0]))]);
        s.adam_step(&grads, AdamConfig::default()).unwrap();
        assert_eq!(s.get("w").unwrap().data, vec![1.5, -2.0]);
    }

    #[test]
    fn single_step_descends_on_square() {
        // f(w) = w^2 at w=1: gradient 2, so w must decrease
        let mut s = ParamStore::new();
        s.register("w", Tensor::row(&[1.0])).unwrap();
        let grads = BTreeMap::from([("w".to_string(), Tensor::row(&[2.0]))]);
        let cfg = AdamConfig {
            lr: 0.1,
            ..AdamConfig::default()
        };
        s.adam_step(&grads, cfg).unwrap();
        assert!(s.get("w").unwrap().data[0] < 1.0);
    }

    #[test]
    fn quadratic_converges_in_two_hundred_steps() {
        // f(w) = (w0 - 3)^2 + 2 (w1 + 1)^2
        let mut s = ParamStore::new();
        s.register("w", Tensor::row(&[0.0, 0.0])).unwrap();
        let cfg = AdamConfig {
            lr: 0.05,
            ..AdamConfig::default()
        };
        let mut loss = f64::MAX;
        for _ in 0..200 {
            let w = s.get("w").unwrap().data.clone();
            loss = (w[0] - 3.0).powi(2) + 2.0 * (w[1] + 1.0).powi(2);
            let g = Tensor::row(&[2.0 * (w[0] - 3.0), 4.0 * (w[1] + 1.0)]);
            s.adam_step(&BTreeMap::from([("w".to_string(), g)]), cfg)
                .unwrap();
        }
        assert!(loss < 1e-3, "final loss {loss}");
    }

    #[test]
    fn unknown_gradient_name_is_rejected() {
        let mut s = ParamStore::new();
        s.register("w", Tensor::row(&[1.0])).unwrap();
        let grads = BTreeMap::from([("nope".to_string(), Tensor::row(&[1.0]))]);
        assert!(matches!(
            s.adam_step(&grads, AdamConfig::default()),
            Err(Error::UnknownParam { .. })
        ));
    }

    #[test]
    fn uniform_init_is_name_seeded() {
        let mut a = ParamStore::new();
        a.register_uniform("x", 3, 4, 7).unwrap();
        a.register_uniform("y", 3, 4, 7).unwrap();
        let mut b = ParamStore::new();
        b.register_uniform("y", 3, 4, 7).unwrap();
        b.register_uniform("x", 3, 4, 7).unwrap();
        assert_eq!(a.get("x").unwrap(), b.get("x").unwrap());
        assert_ne!(a.get("x").unwrap(), a.get("y").unwrap());
    }
}
