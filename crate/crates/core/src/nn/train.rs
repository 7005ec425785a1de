use super::graph::{Gradients, ParamStore};
use crate::error::{Error, Result};

/// Hyper-parameters of plain SGD with exponential learning-rate decay.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub decay: f64,
    /// 1-based epoch from which decay applies.
    pub decay_start: usize,
    /// Global-norm clip; 0 disables clipping.
    pub clip: f64,
    pub epochs: usize,
    pub seed: u64,
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.25, decay: 0.92, decay_start: 10, clip: 5.0, epochs: 10, seed: 1, dropout: 0.0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::invalid(format!("decay must be in (0, 1], got {}", self.decay)));
        }
        if self.clip < 0.0 || !self.clip.is_finite() {
            return Err(Error::invalid(format!("clip must be non-negative, got {}", self.clip)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }

    /// Learning rate for a 0-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let k = (epoch + 1).saturating_sub(self.decay_start);
        self.lr * self.decay.powi(k as i32)
    }
}

/// Rescales gradients so their global norm is at most `clip`. Returns the norm before clipping.
pub fn clip_gradients(grads: &mut Gradients, clip: f64) -> f64 {
    let norm = grads.global_norm();
    if clip > 0.0 && norm > clip {
        grads.scale(clip / norm);
    }
    norm
}

/// `p <- p - lr(epoch) * clip(g)`. Parameters are left untouched if any update is non-finite.
pub fn sgd_step(params: &mut ParamStore, grads: &Gradients, cfg: &TrainConfig, epoch: usize) -> Result<()> {
    if grads.tensors.len() != params.len() {
        return Err(Error::Shape(format!("{} gradients for {} parameters", grads.tensors.len(), params.len())));
    }
    for (i, g) in grads.tensors.iter().enumerate() {
        if g.shape() != params.get(i).shape() {
            return Err(Error::Shape(format!(
                "gradient {:?} for parameter {} of shape {:?}",
                g.shape(),
                params.name(i),
                params.get(i).shape()
            )));
        }
    }
    let mut grads = grads.clone();
    clip_gradients(&mut grads, cfg.clip);
    let lr = cfg.lr_at(epoch);
    let updated: Vec<Vec<f64>> = grads
        .tensors
        .iter()
        .enumerate()
        .map(|(i, g)| params.get(i).data().iter().zip(g.data()).map(|(p, g)| p - lr * g).collect())
        .collect();
    if updated.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite parameter update"));
    }
    for (t, new) in params.tensors_mut().iter_mut().zip(updated) {
        t.data_mut().copy_from_slice(&new);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn decay_schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(0), 0.25);
        assert_eq!(cfg.lr_at(9), 0.25);
        assert!((cfg.lr_at(10) - 0.23).abs() < 1e-15);
        assert!((cfg.lr_at(11) - 0.2116).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::vector(vec![1.0, -2.0]));
        let before = store.clone();
        let grads = Gradients::zeros_like(&store);
        sgd_step(&mut store, &grads, &TrainConfig::default(), 0).unwrap();
        assert_eq!(store, before);
    }

    #[test]
    fn clipping_halves_norm_ten() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::vector(vec![0.0, 0.0]));
        let grads = Gradients { tensors: vec![Tensor::vector(vec![6.0, 8.0])] };
        let cfg = TrainConfig { lr: 1.0, ..TrainConfig::default() };
        sgd_step(&mut store, &grads, &cfg, 0).unwrap();
        assert_eq!(store.get(0).data(), &[-3.0, -4.0]);
    }

    #[test]
    fn non_finite_update_is_rejected() {
        let mut store = ParamStore::new();
        store.add("w", Tensor::vector(vec![f64::MAX]));
        let grads = Gradients { tensors: vec![Tensor::vector(vec![-1.0])] };
        let cfg = TrainConfig { lr: f64::MAX, clip: 0.0, ..TrainConfig::default() };
        let err = sgd_step(&mut store, &grads, &cfg, 0).unwrap_err();
        assert!(err.is_numerical());
        assert_eq!(store.get(0).data(), &[f64::MAX]);
    }
}
