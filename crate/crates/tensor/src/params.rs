use std::cell::RefCell;
use std::sync::Arc;

use indexmap::IndexMap;

use crate::{Gradients, Graph, Tensor, Var};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Ordered, named `f32` parameters. Insertion order is the serialization order.
#[derive(Clone, Default)]
pub struct ParamStore {
    entries: IndexMap<String, Arc<Tensor<f32>>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<f32>) -> ParamId {
        let name = name.into();
        let (index, previous) = self.entries.insert_full(name.clone(), Arc::new(value));
        assert!(previous.is_none(), "duplicate parameter name {name}");
        ParamId(index)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.entries.get_index_of(name).map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Arc<Tensor<f32>> {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<f32> {
        Arc::make_mut(&mut self.entries[id.0])
    }

    pub fn name(&self, id: ParamId) -> &str {
        self.entries.get_index(id.0).map(|(k, _)| k.as_str()).expect("valid id")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<f32>)> {
        self.entries.iter().enumerate().map(|(i, (k, v))| (ParamId(i), k.as_str(), v.as_ref()))
    }

    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.iter().filter(|(_, n, _)| n.starts_with(prefix)).map(|(id, _, _)| id).collect()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.values().map(|t| t.len()).sum()
    }
}

/// Per-parameter gradient accumulator aligned with a [`ParamStore`].
#[derive(Clone, Default)]
pub struct GradBuffer {
    grads: Vec<Option<Tensor<f32>>>,
}

impl GradBuffer {
    pub fn new(store: &ParamStore) -> Self {
        Self { grads: vec![None; store.len()] }
    }

    pub fn accumulate(&mut self, id: ParamId, grad: &Tensor<f32>, scale: f32) {
        if id.0 >= self.grads.len() {
            self.grads.resize(id.0 + 1, None);
        }
        match &mut self.grads[id.0] {
            Some(acc) => acc.add_scaled_assign(grad, scale),
            slot @ None => *slot = Some(grad.map(|v| v * scale)),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<f32>> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    pub fn clear(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn is_empty(&self) -> bool {
        self.grads.iter().all(|g| g.is_none())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor<f32>)> {
        self.grads.iter().enumerate().filter_map(|(i, g)| g.as_ref().map(|g| (ParamId(i), g)))
    }
}

/// Lazily lifts store parameters into a graph, as trainable leaves or constants.
pub struct Binding<'g> {
    graph: &'g Graph<f32>,
    store: &'g ParamStore,
    trainable: Vec<bool>,
    vars: RefCell<Vec<Option<Var<'g, f32>>>>,
}

impl<'g> Binding<'g> {
    /// Every parameter enters as a constant.
    pub fn frozen(graph: &'g Graph<f32>, store: &'g ParamStore) -> Self {
        Self::with_trainable(graph, store, |_| false)
    }

    pub fn with_trainable(
        graph: &'g Graph<f32>,
        store: &'g ParamStore,
        trainable: impl Fn(&str) -> bool,
    ) -> Self {
        let trainable = store.iter().map(|(_, name, _)| trainable(name)).collect();
        Self { graph, store, trainable, vars: RefCell::new(vec![None; store.len()]) }
    }

    pub fn graph(&self) -> &'g Graph<f32> {
        self.graph
    }

    pub fn store(&self) -> &'g ParamStore {
        self.store
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.trainable[id.0]
    }

    pub fn var(&self, id: ParamId) -> Var<'g, f32> {
        if let Some(v) = self.vars.borrow()[id.0] {
            return v;
        }
        let v = self.graph.leaf_shared(self.store.get(id).clone(), self.trainable[id.0]);
        self.vars.borrow_mut()[id.0] = Some(v);
        v
    }

    /// Adds `scale * dL/dp` for every trainable parameter used in the graph.
    pub fn accumulate_grads(&self, grads: &Gradients<f32>, buffer: &mut GradBuffer, scale: f32) {
        for (i, v) in self.vars.borrow().iter().enumerate() {
            let Some(v) = v else { continue };
            if !self.trainable[i] {
                continue;
            }
            if let Some(g) = grads.get(*v) {
                buffer.accumulate(ParamId(i), g, scale);
            }
        }
    }
}
