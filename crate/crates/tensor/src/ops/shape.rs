use crate::ops::reduce::axis_extents;
use crate::{Real, Tensor, Var};

impl<'g, T: Real> Var<'g, T> {
    pub fn reshape(self, shape: impl Into<Vec<usize>>) -> Var<'g, T> {
        let shape = shape.into();
        let x = self.value();
        let old = x.shape().to_vec();
        let y = x.as_ref().clone().reshape(shape);
        self.graph().record(&[self], y, move || {
            Box::new(move |g, _| vec![Some(g.clone().reshape(old.clone()))])
        })
    }

    /// Transpose of a rank-2 tensor.
    pub fn t(self) -> Var<'g, T> {
        let x = self.value();
        let y = transpose2d(&x);
        self.graph().record(&[self], y, || Box::new(|g, _| vec![Some(transpose2d(g))]))
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(parts: &[Var<'g, T>], axis: usize) -> Var<'g, T> {
        assert!(!parts.is_empty(), "concat of nothing");
        let graph = parts[0].graph();
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let base = values[0].shape().to_vec();
        for v in &values {
            assert_eq!(v.rank(), base.len(), "concat rank mismatch");
            for (d, (&a, &b)) in v.shape().iter().zip(&base).enumerate() {
                assert!(d == axis || a == b, "concat extent mismatch on axis {d}");
            }
        }
        let sizes: Vec<usize> = values.iter().map(|v| v.shape()[axis]).collect();
        let total: usize = sizes.iter().sum();
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_extents(&shape, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for (v, &n) in values.iter().zip(&sizes) {
                data.extend_from_slice(&v.data()[o * n * inner..(o + 1) * n * inner]);
            }
        }
        let y = Tensor::new(shape.clone(), data);
        graph.record(parts, y, move || {
            Box::new(move |g, need| {
                let gd = g.data();
                let mut start = 0;
                sizes
                    .iter()
                    .enumerate()
                    .map(|(i, &n)| {
                        let s = start;
                        start += n;
                        need[i].then(|| {
                            let mut d = Vec::with_capacity(outer * n * inner);
                            for o in 0..outer {
                                let base = (o * total + s) * inner;
                                d.extend_from_slice(&gd[base..base + n * inner]);
                            }
                            let mut sh = shape.clone();
                            sh[axis] = n;
                            Tensor::new(sh, d)
                        })
                    })
                    .collect()
            })
        })
    }

    /// `len` entries of `axis` starting at `start`.
    pub fn narrow(self, axis: usize, start: usize, len: usize) -> Var<'g, T> {
        let x = self.value();
        let full = x.shape().to_vec();
        let (outer, n, inner) = axis_extents(&full, axis);
        assert!(start + len <= n, "narrow out of range");
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + start) * inner;
            data.extend_from_slice(&x.data()[base..base + len * inner]);
        }
        let mut shape = full.clone();
        shape[axis] = len;
        self.graph().record(&[self], Tensor::new(shape, data), move || {
            Box::new(move |g, _| {
                let mut dx = Tensor::zeros(full.clone());
                let d = dx.data_mut();
                let gd = g.data();
                for o in 0..outer {
                    let base = (o * n + start) * inner;
                    d[base..base + len * inner]
                        .copy_from_slice(&gd[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(dx)]
            })
        })
    }
}

pub fn transpose2d<T: Real>(x: &Tensor<T>) -> Tensor<T> {
    assert_eq!(x.rank(), 2, "transpose2d needs rank 2, got {:?}", x.shape());
    let (r, c) = (x.dim(0), x.dim(1));
    let d = x.data();
    let mut out = vec![T::zero(); r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = d[i * c + j];
        }
    }
    Tensor::new(vec![c, r], out)
}
