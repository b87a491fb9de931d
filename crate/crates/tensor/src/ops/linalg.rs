use crate::real::gemm;
use crate::{Real, Tensor, Var};

/// `a (m x k) * b (k x n)`, or `a * b^T` when `b_transposed` (b stored `n x k`).
pub fn matmul_tensor<T: Real>(a: &Tensor<T>, b: &Tensor<T>, b_transposed: bool) -> Tensor<T> {
    assert_eq!(a.rank(), 2, "matmul lhs must be rank 2, got {:?}", a.shape());
    assert_eq!(b.rank(), 2, "matmul rhs must be rank 2, got {:?}", b.shape());
    let (m, k) = (a.dim(0), a.dim(1));
    let (kb, n) = if b_transposed { (b.dim(1), b.dim(0)) } else { (b.dim(0), b.dim(1)) };
    assert_eq!(k, kb, "matmul inner dims {:?} x {:?}", a.shape(), b.shape());
    let mut out = vec![T::zero(); m * n];
    gemm(m, k, n, a.data(), false, b.data(), b_transposed, &mut out, false);
    Tensor::new(vec![m, n], out)
}

impl<'g, T: Real> Var<'g, T> {
    /// Matrix product of two rank-2 tensors.
    pub fn matmul(self, other: Var<'g, T>) -> Var<'g, T> {
        let (a, b) = (self.value(), other.value());
        let y = matmul_tensor(&a, &b, false);
        self.graph().record(&[self, other], y, move || {
            Box::new(move |g, need| {
                let (m, k, n) = (a.dim(0), a.dim(1), b.dim(1));
                vec![
                    need[0].then(|| {
                        // dA = dC * B^T
                        let mut d = vec![T::zero(); m * k];
                        gemm(m, n, k, g.data(), false, b.data(), true, &mut d, false);
                        Tensor::new(vec![m, k], d)
                    }),
                    need[1].then(|| {
                        // dB = A^T * dC
                        let mut d = vec![T::zero(); k * n];
                        gemm(k, m, n, a.data(), true, g.data(), false, &mut d, false);
                        Tensor::new(vec![k, n], d)
                    }),
                ]
            })
        })
    }

    /// `self * other^T`, with `other` stored `n x k`; the usual layout for
    /// `x * W^T` with `W` of shape `(out, in)`.
    pub fn matmul_t(self, other: Var<'g, T>) -> Var<'g, T> {
        let (a, b) = (self.value(), other.value());
        let y = matmul_tensor(&a, &b, true);
        self.graph().record(&[self, other], y, move || {
            Box::new(move |g, need| {
                let (m, k, n) = (a.dim(0), a.dim(1), b.dim(0));
                vec![
                    need[0].then(|| {
                        // dA = dC * B
                        let mut d = vec![T::zero(); m * k];
                        gemm(m, n, k, g.data(), false, b.data(), false, &mut d, false);
                        Tensor::new(vec![m, k], d)
                    }),
                    need[1].then(|| {
                        // dB = dC^T * A
                        let mut d = vec![T::zero(); n * k];
                        gemm(n, m, k, g.data(), true, a.data(), false, &mut d, false);
                        Tensor::new(vec![n, k], d)
                    }),
                ]
            })
        })
    }
}
