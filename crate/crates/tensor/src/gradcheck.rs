//! Central finite differences against the tape, in `f64`.

use crate::{Graph, Tensor, Var};

/// Outcome of comparing analytic and numeric gradients for one input.
#[derive(Clone, Debug)]
pub struct GradReport {
    pub analytic: Tensor<f64>,
    pub numeric: Tensor<f64>,
}

impl GradReport {
    /// `||a - n|| / max(||a||, ||n||)`, or the absolute difference norm when
    /// both gradients are (numerically) zero.
    pub fn rel_error(&self) -> f64 {
        let norm = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff: Vec<f64> =
            self.analytic.data().iter().zip(self.numeric.data()).map(|(a, n)| a - n).collect();
        let scale = norm(self.analytic.data()).max(norm(self.numeric.data()));
        if scale < 1e-12 {
            norm(&diff)
        } else {
            norm(&diff) / scale
        }
    }
}

/// Evaluates the scalar `f` on `inputs`, returning one report per input.
pub fn check<F>(inputs: &[Tensor<f64>], eps: f64, f: F) -> Vec<GradReport>
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Var<'g, f64>,
{
    let eval = |xs: &[Tensor<f64>]| {
        let g = Graph::new();
        let vars: Vec<_> = xs.iter().map(|x| g.constant(x.clone())).collect();
        f(&g, &vars).item()
    };
    let g = Graph::new();
    let vars: Vec<_> = inputs.iter().map(|x| g.param(x.clone())).collect();
    let out = f(&g, &vars);
    let grads = g.backward(out);
    let mut reports = Vec::with_capacity(inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[i]);
        let mut numeric = Tensor::zeros(x.shape().to_vec());
        let mut work = inputs.to_vec();
        for j in 0..x.len() {
            let orig = x.data()[j];
            work[i].data_mut()[j] = orig + eps;
            let up = eval(&work);
            work[i].data_mut()[j] = orig - eps;
            let down = eval(&work);
            work[i].data_mut()[j] = orig;
            numeric.data_mut()[j] = (up - down) / (2.0 * eps);
        }
        reports.push(GradReport { analytic, numeric });
    }
    reports
}
