//! Adam with bias correction, and the joint cover/secret reconstruction loss.
//!
//! The update is
//!
//! ```text
//! p ← β₁·p + (1 − β₁)·g
//! q ← β₂·q + (1 − β₂)·g²
//! p̂ = p / (1 − β₁ᵗ),  q̂ = q / (1 − β₂ᵗ)
//! θ ← θ − η · p̂ / √(q̂ + ε)
//! ```
//!
//! Note that ε sits inside the square root.

use crate::error::{Error, Result};
use crate::net::{Checkpoint, ParameterSet};
use crate::tensor::{mse_and_grad, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::invalid("beta1", format!("{} not in [0, 1)", self.beta1)));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("beta2", format!("{} not in [0, 1)", self.beta2)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("epsilon", format!("{} must be > 0", self.epsilon)));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::invalid(
                "learning_rate",
                format!("{} must be finite and > 0", self.learning_rate),
            ));
        }
        Ok(())
    }
}

/// First/second moment accumulators per parameter plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T = f32> {
    p: Vec<Vec<T>>,
    q: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParameterSet<T>) -> Self {
        let p: Vec<Vec<T>> = params.iter().map(|(_, t)| vec![T::zero(); t.len()]).collect();
        let q = p.clone();
        Self { p, q, step: 0 }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &[T] {
        &self.p[i]
    }

    pub fn second_moment(&self, i: usize) -> &[T] {
        &self.q[i]
    }

    /// Appends `adam.p.<name>` / `adam.q.<name>` tensors to a checkpoint.
    pub fn export(&self, params: &ParameterSet<T>, ck: &mut Checkpoint) -> Result<()> {
        for (i, (name, t)) in params.iter().enumerate() {
            let shape = t.shape().to_vec();
            let to_f32 = |v: &[T]| v.iter().map(|x| x.as_f64() as f32).collect::<Vec<_>>();
            ck.tensors
                .push((format!("adam.p.{name}"), Tensor::new(shape.clone(), to_f32(&self.p[i]))?));
            ck.tensors
                .push((format!("adam.q.{name}"), Tensor::new(shape, to_f32(&self.q[i]))?));
        }
        ck.step = self.step;
        Ok(())
    }

    /// Restores moments saved by [`AdamState::export`].
    pub fn import(params: &ParameterSet<T>, ck: &Checkpoint) -> Result<Self> {
        let mut state = Self::new(params);
        for (i, (name, t)) in params.iter().enumerate() {
            for (prefix, slot) in [("adam.p.", &mut state.p[i]), ("adam.q.", &mut state.q[i])] {
                let key = format!("{prefix}{name}");
                let src = ck
                    .get(&key)
                    .ok_or_else(|| Error::format("SGN1", 0, format!("checkpoint lacks `{key}`")))?;
                if src.shape() != t.shape() {
                    return Err(Error::shape("adam import", format!("`{key}` shape mismatch")));
                }
                *slot = src.data().iter().map(|&v| T::from_f64_lossy(v as f64)).collect();
            }
        }
        state.step = ck.step;
        Ok(state)
    }
}

/// One Adam update using the gradients stored in the parameters' gradient
/// slots. Fails without touching anything if any slot is empty.
pub fn adam_step<T: Scalar>(
    params: &mut ParameterSet<T>,
    state: &mut AdamState<T>,
    config: &AdamConfig,
) -> Result<()> {
    config.validate()?;
    if state.p.len() != params.len() {
        return Err(Error::Internal(format!(
            "optimizer state tracks {} parameters, set has {}",
            state.p.len(),
            params.len()
        )));
    }
    for (name, t) in params.iter() {
        if t.grad().is_none() {
            return Err(Error::MissingGradient(name.to_string()));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (config.beta1, config.beta2);
    let bc1 = 1.0 - b1.powf(t);
    let bc2 = 1.0 - b2.powf(t);
    for (i, (_, tensor)) in params.iter_mut().enumerate() {
        let grad = tensor.take_grad().expect("checked above");
        let (p, q) = (&mut state.p[i], &mut state.q[i]);
        for (j, theta) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad[j].as_f64();
            let pj = b1 * p[j].as_f64() + (1.0 - b1) * g;
            let qj = b2 * q[j].as_f64() + (1.0 - b2) * g * g;
            p[j] = T::from_f64_lossy(pj);
            q[j] = T::from_f64_lossy(qj);
            let p_hat = pj / bc1;
            let q_hat = qj / bc2;
            let update = config.learning_rate * p_hat / (q_hat + config.epsilon).sqrt();
            *theta = T::from_f64_lossy(theta.as_f64() - update);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the secret reconstruction term.
    pub beta: f64,
}

impl LossConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid("beta", format!("{beta} must be finite and >= 0")));
        }
        Ok(Self { beta })
    }
}

/// Value and gradients of `MSE(c, c′) + β·MSE(s, s′)`.
#[derive(Debug, Clone)]
pub struct JointLoss<T = f32> {
    pub total: f64,
    pub cover_mse: f64,
    pub secret_mse: f64,
    pub container_grad: Tensor<T>,
    pub revealed_grad: Tensor<T>,
}

pub fn joint_loss<T: Scalar>(
    cover: &Tensor<T>,
    container: &Tensor<T>,
    secret: &Tensor<T>,
    revealed: &Tensor<T>,
    config: &LossConfig,
) -> Result<JointLoss<T>> {
    let (cover_mse, container_grad) = mse_and_grad(container, cover)?;
    let (secret_mse, mut revealed_grad) = mse_and_grad(revealed, secret)?;
    revealed_grad.scale(T::from_f64_lossy(config.beta));
    Ok(JointLoss {
        total: cover_mse + config.beta * secret_mse,
        cover_mse,
        secret_mse,
        container_grad,
        revealed_grad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> ParameterSet<f64> {
        let mut p = ParameterSet::new();
        p.insert("theta", Tensor::new([1], vec![v]).unwrap()).unwrap();
        p
    }

    fn set_grad(p: &mut ParameterSet<f64>, g: f64) {
        p.get_mut("theta").unwrap().set_grad(vec![g]).unwrap();
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = scalar_param(0.3);
        let mut s = AdamState::new(&p);
        set_grad(&mut p, 0.0);
        adam_step(&mut p, &mut s, &AdamConfig::default()).unwrap();
        assert_eq!(p.get("theta").unwrap().data(), &[0.3]);
        assert_eq!(s.step(), 1);
    }

    #[test]
    fn first_step_is_learning_rate_sized() {
        let mut p = scalar_param(0.0);
        let mut s = AdamState::new(&p);
        set_grad(&mut p, 1.0);
        let cfg = AdamConfig::default();
        adam_step(&mut p, &mut s, &cfg).unwrap();
        let expected = -0.001 / (1.0f64 + 1e-8).sqrt();
        assert!((p.get("theta").unwrap().data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_rejected_atomically() {
        let mut p = scalar_param(1.0);
        p.insert("other", Tensor::zeros([2])).unwrap();
        let mut s = AdamState::new(&p);
        set_grad(&mut p, 1.0);
        let err = adam_step(&mut p, &mut s, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingGradient(ref n) if n == "other"));
        assert_eq!(s.step(), 0);
        assert_eq!(p.get("theta").unwrap().data(), &[1.0]);
    }

    #[test]
    fn config_domain() {
        let bad = [
            AdamConfig { beta1: 1.0, ..Default::default() },
            AdamConfig { beta2: -0.1, ..Default::default() },
            AdamConfig { epsilon: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert!(AdamConfig { beta1: 0.0, beta2: 0.0, ..Default::default() }.validate().is_ok());
        assert!(LossConfig::new(-1.0).is_err());
    }

    #[test]
    fn joint_loss_values() {
        let t = |v: f64| Tensor::new([1], vec![v]).unwrap();
        let l = joint_loss(&t(0.0), &t(1.0), &t(0.0), &t(2.0), &LossConfig { beta: 0.75 }).unwrap();
        assert_eq!(l.total, 4.0);
        assert_eq!(l.container_grad.data(), &[2.0]);
        assert_eq!(l.revealed_grad.data(), &[0.75 * 4.0]);
        let l0 = joint_loss(&t(0.0), &t(1.0), &t(0.0), &t(2.0), &LossConfig { beta: 0.0 }).unwrap();
        assert_eq!(l0.total, 1.0);
        let same = joint_loss(&t(0.4), &t(0.4), &t(0.1), &t(0.1), &LossConfig { beta: 1.0 }).unwrap();
        assert_eq!(same.total, 0.0);
    }

    #[test]
    fn joint_loss_shape_mismatch() {
        let a = Tensor::<f32>::zeros([2]);
        let b = Tensor::<f32>::zeros([3]);
        assert!(joint_loss(&a, &b, &a, &a, &LossConfig { beta: 1.0 }).is_err());
        assert!(joint_loss(&a, &a, &a, &b, &LossConfig { beta: 1.0 }).is_err());
    }

    #[test]
    fn state_export_import() {
        let mut p = ParameterSet::<f32>::new();
        p.insert("w", Tensor::new([2], vec![1.0, 2.0]).unwrap()).unwrap();
        let mut s = AdamState::new(&p);
        p.get_mut("w").unwrap().set_grad(vec![0.5, -0.5]).unwrap();
        adam_step(&mut p, &mut s, &AdamConfig::default()).unwrap();
        let mut ck = Checkpoint { tensors: vec![], step: 0 };
        s.export(&p, &mut ck).unwrap();
        assert_eq!(ck.step, 1);
        assert!(ck.get("adam.p.w").is_some() && ck.get("adam.q.w").is_some());
        assert_eq!(AdamState::import(&p, &ck).unwrap(), s);
    }
}
