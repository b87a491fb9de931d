use crate::{GradBuffer, ParamId, ParamStore};

/// Adam moment estimates for one flat parameter vector.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f32>,
    v: Vec<f32>,
    steps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], steps: 0 }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn update(&mut self, cfg: &AdamConfig, param: &mut [f32], grad: &[f32], lr: f64) {
        assert_eq!(param.len(), self.m.len(), "adam state length");
        assert_eq!(grad.len(), self.m.len(), "adam grad length");
        self.steps += 1;
        let t = self.steps as i32;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        let step = lr * bc2.sqrt() / bc1;
        let (b1f, b2f) = (b1 as f32, b2 as f32);
        let eps = (cfg.eps * bc2.sqrt()) as f32;
        for ((p, &g), (m, v)) in param.iter_mut().zip(grad).zip(self.m.iter_mut().zip(&mut self.v)) {
            *m = b1f * *m + (1.0 - b1f) * g;
            *v = b2f * *v + (1.0 - b2f) * g * g;
            *p -= (step as f32) * *m / (v.sqrt() + eps);
        }
    }
}

/// Adam over a [`ParamStore`]; moments are created on a parameter's first update.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    states: Vec<Option<AdamState>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, states: Vec::new() }
    }

    /// Applies one update to every parameter that has a gradient in `grads`
    /// and passes `filter`. Returns the number of parameters touched.
    pub fn step(
        &mut self,
        store: &mut ParamStore,
        grads: &GradBuffer,
        lr: f64,
        filter: impl Fn(ParamId) -> bool,
    ) -> usize {
        if self.states.len() < store.len() {
            self.states.resize(store.len(), None);
        }
        let mut touched = 0;
        for (id, g) in grads.iter() {
            if !filter(id) {
                continue;
            }
            let p = store.get_mut(id);
            let state = self.states[id.0].get_or_insert_with(|| AdamState::new(p.len()));
            state.update(&self.config, p.data_mut(), g.data(), lr);
            touched += 1;
        }
        touched
    }
}
