use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::{Real, Tensor};

/// Computes parent gradients from the output gradient.
///
/// The second argument flags which parents actually need a gradient; entries
/// for the others may be `None`.
pub type BackwardFn<T> = Box<dyn Fn(&Tensor<T>, &[bool]) -> Vec<Option<Tensor<T>>>>;

struct Node<T: Real> {
    value: Arc<Tensor<T>>,
    parents: Vec<usize>,
    backward: Option<BackwardFn<T>>,
    requires_grad: bool,
}

/// A define-by-run tape. Every op appends a node; [`Graph::backward`] walks
/// the nodes in reverse insertion order, which is a valid topological order.
pub struct Graph<T: Real = f32> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g, T: Real = f32> {
    graph: &'g Graph<T>,
    id: usize,
}

impl<T: Real> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: RefCell::new(Vec::new()) }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, node: Node<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var { graph: self, id: nodes.len() - 1 }
    }

    /// Leaf that receives a gradient.
    pub fn param(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf_shared(Arc::new(value), true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var<'_, T> {
        self.leaf_shared(Arc::new(value), false)
    }

    pub fn leaf_shared(&self, value: Arc<Tensor<T>>, requires_grad: bool) -> Var<'_, T> {
        self.push(Node { value, parents: Vec::new(), backward: None, requires_grad })
    }

    pub fn scalar(&self, value: T) -> Var<'_, T> {
        self.constant(Tensor::scalar(value))
    }

    /// Records an op. `make_backward` is only invoked when some parent needs
    /// a gradient, so closures capturing large inputs are not built for
    /// constant sub-graphs.
    pub fn record<'g>(
        &'g self,
        parents: &[Var<'g, T>],
        value: impl Into<Arc<Tensor<T>>>,
        make_backward: impl FnOnce() -> BackwardFn<T>,
    ) -> Var<'g, T> {
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let backward = if requires_grad { Some(make_backward()) } else { None };
        self.push(Node {
            value: value.into(),
            parents: parents.iter().map(|p| p.id).collect(),
            backward,
            requires_grad,
        })
    }

    fn value_of(&self, id: usize) -> Arc<Tensor<T>> {
        self.nodes.borrow()[id].value.clone()
    }

    /// Reverse-mode sweep from a scalar output.
    pub fn backward(&self, output: Var<'_, T>) -> Gradients<T> {
        let seed = {
            let nodes = self.nodes.borrow();
            let v = &nodes[output.id].value;
            assert_eq!(v.len(), 1, "backward() needs a scalar output, got {:?}", v.shape());
            Tensor::ones(v.shape().to_vec())
        };
        self.backward_with(output, seed)
    }

    /// Reverse-mode sweep with an explicit output cotangent.
    pub fn backward_with(&self, output: Var<'_, T>, seed: Tensor<T>) -> Gradients<T> {
        let nodes = self.nodes.borrow();
        assert!(std::ptr::eq(output.graph, self), "variable from another graph");
        assert_eq!(nodes[output.id].value.shape(), seed.shape(), "seed shape");
        let mut grads: Vec<Option<Tensor<T>>> = Vec::new();
        grads.resize_with(output.id + 1, || None);
        grads[output.id] = Some(seed);
        let mut leaves = HashMap::new();
        for id in (0..=output.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                grads[id] = None;
                continue;
            }
            let Some(grad) = grads[id].take() else { continue };
            match &node.backward {
                None => {
                    leaves.insert(id, grad);
                }
                Some(backward) => {
                    let needs: Vec<bool> =
                        node.parents.iter().map(|&p| nodes[p].requires_grad).collect();
                    let parent_grads = backward(&grad, &needs);
                    debug_assert_eq!(parent_grads.len(), node.parents.len());
                    for ((&p, g), need) in node.parents.iter().zip(parent_grads).zip(needs) {
                        let Some(g) = g else { continue };
                        if !need {
                            continue;
                        }
                        debug_assert_eq!(g.shape(), nodes[p].value.shape(), "grad shape");
                        match &mut grads[p] {
                            Some(acc) => acc.add_assign(&g),
                            slot @ None => *slot = Some(g),
                        }
                    }
                }
            }
        }
        Gradients { leaves }
    }
}

/// Gradients of the leaves that required one.
pub struct Gradients<T: Real = f32> {
    leaves: HashMap<usize, Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, var: Var<'_, T>) -> Option<&Tensor<T>> {
        self.leaves.get(&var.id)
    }

    pub fn take(&mut self, var: Var<'_, T>) -> Option<Tensor<T>> {
        self.leaves.remove(&var.id)
    }

    /// Gradient or zeros of the leaf's shape (for leaves the output does not depend on).
    pub fn get_or_zeros(&self, var: Var<'_, T>) -> Tensor<T> {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(var.shape()))
    }
}

impl<'g, T: Real> Var<'g, T> {
    pub fn graph(&self) -> &'g Graph<T> {
        self.graph
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Arc<Tensor<T>> {
        self.graph.value_of(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.graph.nodes.borrow()[self.id].value.shape()[axis]
    }

    pub fn len(&self) -> usize {
        self.graph.nodes.borrow()[self.id].value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes.borrow()[self.id].requires_grad
    }

    pub fn item(&self) -> T {
        self.value().item()
    }

    /// Same value, cut from the tape.
    pub fn detach(&self) -> Var<'g, T> {
        self.graph.leaf_shared(self.value(), false)
    }
}
