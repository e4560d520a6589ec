use std::collections::HashMap;

use ndarray::Zip;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PolicyError, Result};
use crate::graph::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameter arrays with shapes fixed at registration.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new array; names must be unique.
    pub fn register(&mut self, name: &str, value: Tensor) -> ParamId {
        assert!(!self.by_name.contains_key(name), "duplicate parameter {name}");
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.values.push(value);
        self.by_name.insert(name.to_string(), id);
        id
    }

    /// Registers a `[rows x cols]` array of `N(0, std^2)` draws.
    pub fn register_normal(&mut self, name: &str, rows: usize, cols: usize, std: f64, rng: &mut impl Rng) -> ParamId {
        let value = Tensor::from_shape_simple_fn((rows, cols), || std * rng.sample::<f64, _>(StandardNormal));
        self.register(name, value)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// Replaces the array `name`, keeping its shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| PolicyError::Checkpoint(format!("unknown parameter {name}")))?;
        if self.values[id.0].dim() != value.dim() {
            return Err(PolicyError::Shape(format!(
                "parameter {name} is {:?}, got {:?}",
                self.values[id.0].dim(),
                value.dim()
            )));
        }
        self.values[id.0] = value;
        Ok(())
    }
}

/// Euclidean norm over a set of gradient arrays.
pub fn global_norm(grads: &[Tensor]) -> f64 {
    grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt()
}

/// Adaptive-moment optimizer state.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global norm exceeds this; `None` disables.
    pub clip_norm: Option<f64>,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Tensor> = store.ids().map(|id| Tensor::zeros(store.get(id).dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, store: &mut ParamStore, grads: &[Tensor]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(PolicyError::Shape(format!("{} gradients for {} parameters", grads.len(), store.len())));
        }
        let norm = global_norm(grads);
        if !norm.is_finite() {
            return Err(PolicyError::NonFinite("gradient norm".into()));
        }
        let scale = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.eps, self.lr);
        for (i, id) in store.ids().collect::<Vec<_>>().into_iter().enumerate() {
            let p = store.get_mut(id);
            Zip::from(p)
                .and(&mut self.m[i])
                .and(&mut self.v[i])
                .and(&grads[i])
                .for_each(|p, m, v, &g| {
                    let g = g * scale;
                    *m = b1 * *m + (1.0 - b1) * g;
                    *v = b2 * *v + (1.0 - b2) * g * g;
                    *p -= lr * (*m / bc1) / ((*v / bc2).sqrt() + eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let id = store.register("x", Tensor::from_elem((1, 2), 3.0));
        let mut opt = Adam::new(&store, 0.1);
        for _ in 0..500 {
            let g = store.get(id).mapv(|x| 2.0 * (x - 1.0));
            opt.apply(&mut store, &[g]).unwrap();
        }
        assert!(store.get(id).iter().all(|x| (x - 1.0).abs() < 1e-3));
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let id = store.register("x", Tensor::zeros((1, 3)));
        let mut opt = Adam::new(&store, 0.01);
        let g = Tensor::from_shape_vec((1, 3), vec![5.0, -0.2, 0.0]).unwrap();
        opt.apply(&mut store, &[g]).unwrap();
        let p = store.get(id);
        assert!((p[[0, 0]] + 0.01).abs() < 1e-8);
        assert!((p[[0, 1]] - 0.01).abs() < 1e-8);
        assert_eq!(p[[0, 2]], 0.0);
    }

    #[test]
    fn set_rejects_shape_change() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        store.register_normal("w", 2, 3, 1.0, &mut rng);
        assert!(store.set("w", Tensor::zeros((3, 2))).is_err());
        assert!(store.set("w", Tensor::zeros((2, 3))).is_ok());
        assert!(store.set("nope", Tensor::zeros((2, 3))).is_err());
    }
}
