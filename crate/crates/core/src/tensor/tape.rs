use super::{ConvBranch, MultiConv, MultiConvGrads, Scalar, Tensor};
use crate::error::{Error, Result};

/// One convolution inside a (possibly fused) convolution node.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvSpec {
    pub kernel: (usize, usize),
    pub out_channels: usize,
    pub weight: String,
    pub bias: String,
}

/// Operation recorded by a tape node.
#[derive(Debug, Clone, PartialEq)]
pub enum OpKind {
    /// Named graph input.
    Input(String),
    /// Parallel same-padded convolutions over one input, outputs concatenated
    /// in branch order. A plain convolution is the one-branch case.
    Conv(Vec<ConvSpec>),
    Relu,
    /// Channel concatenation of all inputs in order.
    Concat,
    GaussianNoise { stddev: f64 },
}

/// A recorded operation with its output value.
#[derive(Debug, Clone)]
pub struct TapeNode<T> {
    pub op: OpKind,
    pub inputs: Vec<usize>,
    value: Option<Tensor<T>>,
}

impl<T: Scalar> TapeNode<T> {
    pub fn value(&self) -> Option<&Tensor<T>> {
        self.value.as_ref()
    }
}

/// Forward-ordered record of a computation; backward walks it in reverse.
#[derive(Debug, Clone, Default)]
pub struct Tape<T> {
    nodes: Vec<TapeNode<T>>,
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    /// Records a node. Inputs must already be on the tape.
    pub fn push(&mut self, op: OpKind, inputs: Vec<usize>, value: Tensor<T>) -> Result<usize> {
        if let Some(&bad) = inputs.iter().find(|&&i| i >= self.nodes.len()) {
            return Err(Error::Internal(format!(
                "tape node {} references future node {bad}",
                self.nodes.len()
            )));
        }
        self.nodes.push(TapeNode {
            op,
            inputs,
            value: Some(value),
        });
        Ok(self.nodes.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: usize) -> Result<&TapeNode<T>> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::Internal(format!("no tape node {id}")))
    }

    pub fn nodes(&self) -> &[TapeNode<T>] {
        &self.nodes
    }

    /// Saved output of node `id`.
    pub fn value(&self, id: usize) -> Result<&Tensor<T>> {
        self.node(id)?
            .value
            .as_ref()
            .ok_or_else(|| Error::Internal(format!("activation of tape node {id} was released")))
    }

    /// Drops a saved activation; later backward passes through it fail.
    pub fn release(&mut self, id: usize) {
        if let Some(n) = self.nodes.get_mut(id) {
            n.value = None;
        }
    }

    pub fn take_value(&mut self, id: usize) -> Result<Tensor<T>> {
        self.nodes
            .get_mut(id)
            .and_then(|n| n.value.take())
            .ok_or_else(|| Error::Internal(format!("activation of tape node {id} unavailable")))
    }

    /// Backward rule of a recorded convolution node. `params` supplies the
    /// `(weights, bias)` of each branch in order.
    pub fn conv2d_backward(
        &self,
        id: usize,
        params: &[(&Tensor<T>, &Tensor<T>)],
        upstream: &Tensor<T>,
        need_input_grad: bool,
    ) -> Result<MultiConvGrads<T>> {
        let node = self.node(id)?;
        let OpKind::Conv(specs) = &node.op else {
            return Err(Error::Internal(format!("tape node {id} is not a convolution")));
        };
        if specs.len() != params.len() || node.inputs.len() != 1 {
            return Err(Error::Internal(format!(
                "convolution node {id} has {} branches and {} inputs, got {} parameter pairs",
                specs.len(),
                node.inputs.len(),
                params.len()
            )));
        }
        let input = self.value(node.inputs[0])?;
        let branches: Vec<_> = params
            .iter()
            .map(|&(weights, bias)| ConvBranch { weights, bias })
            .collect();
        MultiConv::new(&branches)?.backward(input, upstream, need_input_grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_forward_references() {
        let mut tape = Tape::<f32>::new();
        assert!(tape.push(OpKind::Relu, vec![0], Tensor::zeros([1])).is_err());
        let a = tape.push(OpKind::Input("x".into()), vec![], Tensor::zeros([1])).unwrap();
        assert_eq!(tape.push(OpKind::Relu, vec![a], Tensor::zeros([1])).unwrap(), 1);
    }

    #[test]
    fn released_activation_blocks_backward() {
        let mut tape = Tape::<f64>::new();
        let x = tape
            .push(OpKind::Input("x".into()), vec![], Tensor::full([2, 2, 1], 1.0))
            .unwrap();
        let spec = ConvSpec {
            kernel: (1, 1),
            out_channels: 1,
            weight: "w".into(),
            bias: "b".into(),
        };
        let c = tape
            .push(OpKind::Conv(vec![spec]), vec![x], Tensor::zeros([2, 2, 1]))
            .unwrap();
        let w = Tensor::full([1, 1, 1, 1], 2.0);
        let b = Tensor::zeros([1]);
        let up = Tensor::full([2, 2, 1], 1.0);
        assert!(tape.conv2d_backward(c, &[(&w, &b)], &up, true).is_ok());
        tape.release(x);
        let err = tape.conv2d_backward(c, &[(&w, &b)], &up, true).unwrap_err();
        assert!(matches!(err, Error::Internal(_)));
    }
}
