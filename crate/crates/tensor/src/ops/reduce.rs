use crate::{Real, Tensor, Var};

/// Splits `shape` around `axis` into (outer, axis length, inner) extents.
pub(crate) fn axis_extents(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    assert!(axis < shape.len(), "axis {axis} out of range for {shape:?}");
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

pub fn sum_axis_tensor<T: Real>(x: &Tensor<T>, axis: usize, keepdim: bool) -> Tensor<T> {
    let (outer, n, inner) = axis_extents(x.shape(), axis);
    let mut out = vec![T::zero(); outer * inner];
    let d = x.data();
    for o in 0..outer {
        let dst = &mut out[o * inner..(o + 1) * inner];
        for k in 0..n {
            let src = &d[(o * n + k) * inner..(o * n + k + 1) * inner];
            dst.iter_mut().zip(src).for_each(|(a, &b)| *a = *a + b);
        }
    }
    let mut shape = x.shape().to_vec();
    if keepdim {
        shape[axis] = 1;
    } else {
        shape.remove(axis);
    }
    Tensor::new(shape, out)
}

/// Repeats `g` (shape with `axis` removed or kept as 1) `n` times along `axis`.
fn expand_axis<T: Real>(g: &Tensor<T>, full: &[usize], axis: usize) -> Tensor<T> {
    let (outer, n, inner) = axis_extents(full, axis);
    let gd = g.data();
    let mut out = Vec::with_capacity(outer * n * inner);
    for o in 0..outer {
        for _ in 0..n {
            out.extend_from_slice(&gd[o * inner..(o + 1) * inner]);
        }
    }
    Tensor::new(full.to_vec(), out)
}

impl<'g, T: Real> Var<'g, T> {
    pub fn sum_all(self) -> Var<'g, T> {
        let x = self.value();
        let shape = x.shape().to_vec();
        self.graph().record(&[self], Tensor::scalar(x.sum()), move || {
            Box::new(move |g, _| vec![Some(Tensor::full(shape.clone(), g.item()))])
        })
    }

    pub fn mean_all(self) -> Var<'g, T> {
        let n = T::from_usize(self.len()).expect("count fits");
        self.sum_all().scale(T::one() / n)
    }

    pub fn sum_axis(self, axis: usize, keepdim: bool) -> Var<'g, T> {
        let x = self.value();
        let full = x.shape().to_vec();
        let y = sum_axis_tensor(&x, axis, keepdim);
        self.graph().record(&[self], y, move || {
            Box::new(move |g, _| vec![Some(expand_axis(g, &full, axis))])
        })
    }

    pub fn mean_axis(self, axis: usize, keepdim: bool) -> Var<'g, T> {
        let n = T::from_usize(self.dim(axis)).expect("count fits");
        self.sum_axis(axis, keepdim).scale(T::one() / n)
    }

    /// Inclusive prefix sum along `axis`.
    pub fn cumsum(self, axis: usize) -> Var<'g, T> {
        let x = self.value();
        let shape = x.shape().to_vec();
        let (outer, n, inner) = axis_extents(&shape, axis);
        let mut y = x.as_ref().clone();
        {
            let d = y.data_mut();
            for o in 0..outer {
                for k in 1..n {
                    for i in 0..inner {
                        let prev = d[(o * n + k - 1) * inner + i];
                        d[(o * n + k) * inner + i] = d[(o * n + k) * inner + i] + prev;
                    }
                }
            }
        }
        self.graph().record(&[self], y, move || {
            Box::new(move |g, _| {
                // reverse cumulative sum
                let mut dx = g.clone();
                let d = dx.data_mut();
                for o in 0..outer {
                    for k in (0..n.saturating_sub(1)).rev() {
                        for i in 0..inner {
                            let next = d[(o * n + k + 1) * inner + i];
                            d[(o * n + k) * inner + i] = d[(o * n + k) * inner + i] + next;
                        }
                    }
                }
                vec![Some(dx)]
            })
        })
    }
}
