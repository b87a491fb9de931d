use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::{Real, Tensor, Var};

/// Numpy-style broadcast of two shapes (aligned at the trailing axis).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    let rank = a.len().max(b.len());
    (0..rank)
        .map(|i| {
            let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
            let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
            match (da, db) {
                (x, y) if x == y => x,
                (1, y) => y,
                (x, 1) => x,
                _ => panic!("shapes {a:?} and {b:?} do not broadcast"),
            }
        })
        .collect()
}

/// Strides of `shape` viewed inside `out` (zero on broadcast axes).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let o = i + rank - shape.len();
        strides[o] = if shape[i] == 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Visits every output element with the flat offsets of both operands.
fn for_each_broadcast(
    out: &[usize],
    sa: &[usize],
    sb: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let total: usize = out.iter().product();
    if total == 0 {
        return;
    }
    if out.is_empty() {
        f(0, 0, 0);
        return;
    }
    let rank = out.len();
    let inner = out[rank - 1];
    let (ia_step, ib_step) = (sa[rank - 1], sb[rank - 1]);
    let mut idx = vec![0usize; rank - 1];
    let mut o = 0;
    loop {
        let mut ia = 0;
        let mut ib = 0;
        for d in 0..rank - 1 {
            ia += idx[d] * sa[d];
            ib += idx[d] * sb[d];
        }
        for _ in 0..inner {
            f(o, ia, ib);
            o += 1;
            ia += ia_step;
            ib += ib_step;
        }
        // odometer over the outer axes
        let mut d = rank - 1;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Sums `grad` (shaped like the broadcast output) down to `shape`.
pub fn sum_to_shape<T: Real>(grad: &Tensor<T>, shape: &[usize]) -> Tensor<T> {
    if grad.shape() == shape {
        return grad.clone();
    }
    let out = grad.shape();
    let strides = broadcast_strides(shape, out);
    let mut acc = Tensor::zeros(shape.to_vec());
    let g = grad.data();
    let a = acc.data_mut();
    for_each_broadcast(out, &strides, &strides, |o, ia, _| a[ia] = a[ia] + g[o]);
    acc
}

/// Elementwise binary op with broadcasting.
pub fn broadcast_binary<T: Real>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Tensor<T> {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    let out = broadcast_shape(a.shape(), b.shape());
    let sa = broadcast_strides(a.shape(), &out);
    let sb = broadcast_strides(b.shape(), &out);
    let mut data = vec![T::zero(); out.iter().product()];
    let (ad, bd) = (a.data(), b.data());
    for_each_broadcast(&out, &sa, &sb, |o, ia, ib| data[o] = f(ad[ia], bd[ib]));
    Tensor::new(out, data)
}

impl<'g, T: Real> Var<'g, T> {
    /// Elementwise map with derivative `df(x, y)`.
    pub fn unary(
        self,
        f: impl Fn(T) -> T,
        df: impl Fn(T, T) -> T + 'static,
    ) -> Var<'g, T> {
        let x = self.value();
        let out = Arc::new(x.map(f));
        self.graph().record(&[self], out.clone(), move || {
            Box::new(move |g, _| {
                let data = g
                    .data()
                    .iter()
                    .zip(x.data())
                    .zip(out.data())
                    .map(|((&g, &x), &y)| g * df(x, y))
                    .collect();
                vec![Some(Tensor::new(g.shape().to_vec(), data))]
            })
        })
    }

    pub fn add(self, other: Var<'g, T>) -> Var<'g, T> {
        let (a, b) = (self.value(), other.value());
        let y = broadcast_binary(&a, &b, |x, y| x + y);
        let (sa, sb) = (a.shape().to_vec(), b.shape().to_vec());
        self.graph().record(&[self, other], y, move || {
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| sum_to_shape(g, &sa)),
                    need[1].then(|| sum_to_shape(g, &sb)),
                ]
            })
        })
    }

    pub fn sub(self, other: Var<'g, T>) -> Var<'g, T> {
        let (a, b) = (self.value(), other.value());
        let y = broadcast_binary(&a, &b, |x, y| x - y);
        let (sa, sb) = (a.shape().to_vec(), b.shape().to_vec());
        self.graph().record(&[self, other], y, move || {
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| sum_to_shape(g, &sa)),
                    need[1].then(|| sum_to_shape(&g.map(|v| -v), &sb)),
                ]
            })
        })
    }

    pub fn mul(self, other: Var<'g, T>) -> Var<'g, T> {
        let (a, b) = (self.value(), other.value());
        let y = broadcast_binary(&a, &b, |x, y| x * y);
        self.graph().record(&[self, other], y, move || {
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| {
                        sum_to_shape(&broadcast_binary(g, &b, |g, b| g * b), a.shape())
                    }),
                    need[1].then(|| {
                        sum_to_shape(&broadcast_binary(g, &a, |g, a| g * a), b.shape())
                    }),
                ]
            })
        })
    }

    pub fn div(self, other: Var<'g, T>) -> Var<'g, T> {
        let (a, b) = (self.value(), other.value());
        let y = broadcast_binary(&a, &b, |x, y| x / y);
        self.graph().record(&[self, other], y, move || {
            Box::new(move |g, need| {
                vec![
                    need[0].then(|| {
                        sum_to_shape(&broadcast_binary(g, &b, |g, b| g / b), a.shape())
                    }),
                    need[1].then(|| {
                        let ga = broadcast_binary(g, &a, |g, a| g * a);
                        let full = broadcast_binary(&ga, &b, |ga, b| -ga / (b * b));
                        sum_to_shape(&full, b.shape())
                    }),
                ]
            })
        })
    }

    pub fn scale(self, c: T) -> Var<'g, T> {
        self.unary(|x| x * c, move |_, _| c)
    }

    pub fn add_scalar(self, c: T) -> Var<'g, T> {
        self.unary(|x| x + c, |_, _| T::one())
    }

    pub fn neg(self) -> Var<'g, T> {
        self.scale(-T::one())
    }

    pub fn square(self) -> Var<'g, T> {
        self.unary(|x| x * x, |x, _| x + x)
    }

    pub fn sqrt(self) -> Var<'g, T> {
        self.unary(|x| x.sqrt(), |_, y| T::lit(0.5) / y)
    }

    /// `1 / sqrt(x)`.
    pub fn rsqrt(self) -> Var<'g, T> {
        self.unary(|x| x.sqrt().recip(), |x, y| T::lit(-0.5) * y / x)
    }

    pub fn exp(self) -> Var<'g, T> {
        self.unary(|x| x.exp(), |_, y| y)
    }

    pub fn ln(self) -> Var<'g, T> {
        self.unary(|x| x.ln(), |x, _| x.recip())
    }

    pub fn sin(self) -> Var<'g, T> {
        self.unary(|x| x.sin(), |x, _| x.cos())
    }

    /// `sin(omega * x)`, fused so the scaled pre-activation is not stored.
    pub fn sin_scaled(self, omega: T) -> Var<'g, T> {
        self.unary(move |x| (omega * x).sin(), move |x, _| omega * (omega * x).cos())
    }

    pub fn abs(self) -> Var<'g, T> {
        self.unary(
            |x| x.abs(),
            |x, _| {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn relu(self) -> Var<'g, T> {
        self.leaky_relu(T::zero())
    }

    pub fn leaky_relu(self, slope: T) -> Var<'g, T> {
        self.unary(
            move |x| if x >= T::zero() { x } else { x * slope },
            move |x, _| if x >= T::zero() { T::one() } else { slope },
        )
    }

    /// `ln(1 + e^x)`, evaluated stably for large |x|.
    pub fn softplus(self) -> Var<'g, T> {
        self.unary(softplus, |x, _| sigmoid(x))
    }

    pub fn sigmoid(self) -> Var<'g, T> {
        self.unary(sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn tanh(self) -> Var<'g, T> {
        self.unary(|x| x.tanh(), |_, y| T::one() - y * y)
    }

    /// Multiplies by a constant tensor (broadcast), e.g. a mask.
    pub fn mul_const(self, c: &Tensor<T>) -> Var<'g, T> {
        let k = self.graph().constant(c.clone());
        self.mul(k)
    }
}

pub fn softplus<T: Real>(x: T) -> T {
    // max(x, 0) + ln(1 + e^{-|x|})
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<'g, T: Real> Add for Var<'g, T> {
    type Output = Var<'g, T>;
    fn add(self, rhs: Self) -> Self::Output {
        Var::add(self, rhs)
    }
}

impl<'g, T: Real> Sub for Var<'g, T> {
    type Output = Var<'g, T>;
    fn sub(self, rhs: Self) -> Self::Output {
        Var::sub(self, rhs)
    }
}

impl<'g, T: Real> Mul for Var<'g, T> {
    type Output = Var<'g, T>;
    fn mul(self, rhs: Self) -> Self::Output {
        Var::mul(self, rhs)
    }
}

impl<'g, T: Real> Neg for Var<'g, T> {
    type Output = Var<'g, T>;
    fn neg(self) -> Self::Output {
        Var::neg(self)
    }
}
