use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Named parameter tensors in registration order.
#[derive(Debug, Clone)]
pub struct ParameterSet<T = f32> {
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> Default for ParameterSet<T> {
    fn default() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }
}

impl<T: Scalar> ParameterSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<usize> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid("parameter", format!("duplicate name `{name}`")));
        }
        self.index.insert(name.clone(), self.entries.len());
        self.entries.push((name, tensor));
        Ok(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn total_count(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    /// Scalar count of all parameters whose name starts with `prefix`.
    pub fn count_with_prefix(&self, prefix: &str) -> usize {
        self.entries
            .iter()
            .filter(|(n, _)| n.starts_with(prefix))
            .map(|(_, t)| t.len())
            .sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.index_of(name).map(|i| &self.entries[i].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.index_of(name).map(move |i| &mut self.entries[i].1)
    }

    pub(crate) fn require(&self, name: &str) -> Result<(usize, &Tensor<T>)> {
        let i = self
            .index_of(name)
            .ok_or_else(|| Error::invalid("parameter", format!("`{name}` is not registered")))?;
        Ok((i, &self.entries[i].1))
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn tensor(&self, i: usize) -> &Tensor<T> {
        &self.entries[i].1
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.entries[i].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.entries.iter_mut().map(|(n, t)| (n.as_str(), t))
    }

    /// Appends every parameter of `other`; names must stay unique.
    pub fn extend(&mut self, other: ParameterSet<T>) -> Result<()> {
        for (name, t) in other.entries {
            self.insert(name, t)?;
        }
        Ok(())
    }

    /// Glorot-uniform weights (`limit = sqrt(6 / (fan_in + fan_out))` with
    /// the kernel's receptive field folded into both fans) and zero biases.
    pub fn init_glorot<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for (_, t) in &mut self.entries {
            match *t.shape() {
                [kh, kw, cin, cout] => {
                    let field = (kh * kw) as f64;
                    let limit = (6.0 / (field * cin as f64 + field * cout as f64)).sqrt();
                    for v in t.data_mut() {
                        *v = T::from_f64_lossy(rng.random_range(-limit..limit));
                    }
                }
                _ => t.data_mut().fill(T::zero()),
            }
        }
    }

    /// Moves a reduced gradient set into the tensors' gradient slots.
    pub fn set_grads(&mut self, grads: GradientSet<T>) -> Result<()> {
        if grads.entries.len() != self.entries.len() {
            return Err(Error::Internal(format!(
                "gradient set has {} entries for {} parameters",
                grads.entries.len(),
                self.entries.len()
            )));
        }
        for ((_, t), g) in self.entries.iter_mut().zip(grads.entries) {
            match g {
                Some(g) => t.set_grad(g)?,
                None => t.clear_grad(),
            }
        }
        Ok(())
    }

    pub fn clear_grads(&mut self) {
        for (_, t) in &mut self.entries {
            t.clear_grad();
        }
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            entries: self
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), t.cast()))
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Per-parameter gradient accumulators aligned with a [`ParameterSet`].
/// Entries stay `None` until some backward pass reaches the parameter.
#[derive(Debug, Clone)]
pub struct GradientSet<T = f32> {
    entries: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> GradientSet<T> {
    pub fn for_params(params: &ParameterSet<T>) -> Self {
        Self {
            entries: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&[T]> {
        self.entries.get(i).and_then(|e| e.as_deref())
    }

    pub fn accumulate(&mut self, i: usize, grad: &[T]) -> Result<()> {
        let slot = self
            .entries
            .get_mut(i)
            .ok_or_else(|| Error::Internal(format!("no gradient slot {i}")))?;
        match slot {
            Some(acc) => {
                if acc.len() != grad.len() {
                    return Err(Error::Internal(format!(
                        "gradient {i}: length {} vs {}",
                        acc.len(),
                        grad.len()
                    )));
                }
                for (a, &g) in acc.iter_mut().zip(grad) {
                    *a += g;
                }
            }
            None => *slot = Some(grad.to_vec()),
        }
        Ok(())
    }

    /// Adds `other` entry-wise; used to reduce per-item gradients in a fixed
    /// order.
    pub fn merge(&mut self, other: &GradientSet<T>) -> Result<()> {
        if other.entries.len() != self.entries.len() {
            return Err(Error::Internal("gradient sets of different sizes".into()));
        }
        for (i, g) in other.entries.iter().enumerate() {
            if let Some(g) = g {
                self.accumulate(i, g)?;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for g in self.entries.iter_mut().flatten() {
            for v in g {
                *v *= factor;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn duplicate_names_rejected() {
        let mut p = ParameterSet::<f32>::new();
        p.insert("a", Tensor::zeros([2])).unwrap();
        assert!(p.insert("a", Tensor::zeros([2])).is_err());
        assert_eq!(p.total_count(), 2);
    }

    #[test]
    fn glorot_respects_limit_and_zeroes_bias() {
        let mut p = ParameterSet::<f32>::new();
        p.insert("w", Tensor::zeros([3, 3, 4, 5])).unwrap();
        p.insert("b", Tensor::full([5], 1.0)).unwrap();
        p.init_glorot(&mut ChaCha8Rng::seed_from_u64(1));
        let limit = (6.0f64 / (36.0 + 45.0)).sqrt() as f32;
        let w = p.get("w").unwrap();
        assert!(w.data().iter().all(|v| v.abs() <= limit));
        assert!(w.data().iter().any(|&v| v != 0.0));
        assert!(p.get("b").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_accumulation() {
        let mut p = ParameterSet::<f32>::new();
        p.insert("w", Tensor::zeros([2])).unwrap();
        p.insert("v", Tensor::zeros([1])).unwrap();
        let mut g = GradientSet::for_params(&p);
        g.accumulate(0, &[1.0, 2.0]).unwrap();
        let mut h = GradientSet::for_params(&p);
        h.accumulate(0, &[0.5, 0.5]).unwrap();
        g.merge(&h).unwrap();
        g.scale(2.0);
        assert_eq!(g.get(0).unwrap(), &[3.0, 5.0]);
        assert!(g.get(1).is_none());
        p.set_grads(g).unwrap();
        assert_eq!(p.get("w").unwrap().grad().unwrap(), &[3.0, 5.0]);
        assert!(p.get("v").unwrap().grad().is_none());
    }
}
