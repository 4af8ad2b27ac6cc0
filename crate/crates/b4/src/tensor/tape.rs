use super::ops::Op;
use super::Tensor;
use crate::error::TensorError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

pub(crate) struct Node {
    pub value: Tensor,
    pub op: Op,
    pub requires_grad: bool,
    pub grad: Option<Vec<f64>>,
}

/// Records a forward computation and replays it backwards for gradients.
///
/// Append-only, so node index order is a topological order of the graph.
/// Single-threaded by construction; independent tapes may live on
/// separate threads.
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf: gradients accumulate here.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A constant input: never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub(crate) fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn scalar_value(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0]
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    /// Reverse pass from a scalar loss. Each node is visited exactly once
    /// in reverse topological order; gradients are deterministic.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        let value = &self.nodes[loss.0].value;
        if !value.is_scalar() {
            return Err(TensorError::NotScalar {
                op: "backward",
                shape: value.shape.clone(),
            });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if self.nodes[i].grad.is_none() || !self.nodes[i].requires_grad {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let upstream = self.nodes[i].grad.clone().expect("grad present");
            op.accumulate(self, i, &upstream)?;
        }
        Ok(())
    }

    pub(crate) fn add_grad(&mut self, target: usize, delta: &[f64]) {
        if !self.nodes[target].requires_grad {
            return;
        }
        let numel = self.nodes[target].value.numel();
        let grad = self.nodes[target]
            .grad
            .get_or_insert_with(|| vec![0.0; numel]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_by_hand() {
        let mut tape = Tape::new();
        let theta = tape.leaf(Tensor::new(vec![1, 3], vec![1.0, -2.0, 3.0]).unwrap());
        let sq = tape.mul(theta, theta).unwrap();
        let loss = tape.sum_all(sq).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(theta).unwrap(), &[2.0, -4.0, 6.0]);
    }

    #[test]
    fn loss_independent_of_leaf_gives_no_gradient() {
        let mut tape = Tape::new();
        let theta = tape.leaf(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        let other = tape.leaf(Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap());
        let loss = tape.sum_all(other).unwrap();
        tape.backward(loss).unwrap();
        assert!(tape.grad(theta).is_none() || tape.grad(theta).unwrap().iter().all(|&g| g == 0.0));
        assert_eq!(tape.grad(other).unwrap(), &[1.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        assert!(tape.backward(x).is_err());
    }

    #[test]
    fn constants_accumulate_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        let x = tape.leaf(Tensor::new(vec![1, 2], vec![3.0, 4.0]).unwrap());
        let prod = tape.mul(c, x).unwrap();
        let loss = tape.sum_all(prod).unwrap();
        tape.backward(loss).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn repeated_backward_resets_accumulators() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap());
        let loss = tape.sum_all(x).unwrap();
        tape.backward(loss).unwrap();
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 1.0]);
    }
}
