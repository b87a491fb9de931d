use morpheus_tensor::gradcheck::check;
use morpheus_tensor::{Graph, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect())
}

/// Contracts an arbitrary output with a fixed random weighting so every
/// output element contributes to the checked scalar.
fn weigh<'g>(g: &'g Graph<f64>, y: Var<'g, f64>, seed: u64) -> Var<'g, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rand_tensor(&mut rng, &y.shape(), -1.0, 1.0);
    y.mul(g.constant(w)).sum_all()
}

fn assert_close<F>(inputs: &[Tensor<f64>], f: F)
where
    F: for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> Var<'g, f64>,
{
    for (i, r) in check(inputs, 1e-6, f).iter().enumerate() {
        let e = r.rel_error();
        assert!(e < 1e-6, "input {i}: rel error {e}\n{:?}\n{:?}", r.analytic, r.numeric);
    }
}

#[test]
fn broadcast_binary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = rand_tensor(&mut rng, &[3, 4], -2.0, 2.0);
    let b = rand_tensor(&mut rng, &[1, 4], 0.5, 2.0);
    let c = rand_tensor(&mut rng, &[3, 1], 0.5, 2.0);
    assert_close(&[a.clone(), b.clone(), c.clone()], |g, v| {
        let y = v[0].add(v[1]).mul(v[2]).sub(v[1]).div(v[2].add(v[1]));
        weigh(g, y, 7)
    });
    assert_close(&[a, Tensor::new(vec![4], b.data().to_vec())], |g, v| weigh(g, v[0].mul(v[1]), 8));
}

#[test]
fn unary_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = rand_tensor(&mut rng, &[5, 3], 0.3, 2.0);
    let y = rand_tensor(&mut rng, &[5, 3], -2.0, 2.0);
    assert_close(&[x.clone()], |g, v| {
        let a = v[0];
        let y = a.sqrt().add(a.rsqrt()).add(a.ln()).add(a.square().scale(0.3));
        weigh(g, y, 3)
    });
    assert_close(&[y.clone()], |g, v| {
        let a = v[0];
        let y = a.exp().scale(0.1).add(a.sin_scaled(3.0)).add(a.softplus()).add(a.sigmoid());
        let y = y.add(a.tanh()).add(a.neg().add_scalar(0.5)).add(a.sin());
        weigh(g, y, 4)
    });
    // piecewise-linear ops away from their kinks
    let z = y.map(|v| if v.abs() < 0.05 { v + 0.2 } else { v });
    assert_close(&[z], |g, v| {
        let a = v[0];
        weigh(g, a.relu().add(a.leaky_relu(0.2)).add(a.abs()), 5)
    });
}

#[test]
fn mul_const_and_reductions() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = rand_tensor(&mut rng, &[2, 3, 4], -1.0, 1.0);
    let c = rand_tensor(&mut rng, &[2, 3, 4], -1.0, 1.0);
    assert_close(&[x.clone()], move |g, v| weigh(g, v[0].mul_const(&c), 1));
    for axis in 0..3 {
        assert_close(&[x.clone()], move |g, v| weigh(g, v[0].sum_axis(axis, false), 2));
        assert_close(&[x.clone()], move |g, v| weigh(g, v[0].mean_axis(axis, true), 2));
        assert_close(&[x.clone()], move |g, v| weigh(g, v[0].cumsum(axis), 2));
    }
    assert_close(&[x.clone()], |_, v| v[0].square().mean_all());
}

#[test]
fn shape_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = rand_tensor(&mut rng, &[2, 3, 2], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[2, 1, 2], -1.0, 1.0);
    assert_close(&[a.clone(), b.clone()], |g, v| {
        let y = Var::concat(&[v[0], v[1], v[0]], 1);
        weigh(g, y.narrow(1, 2, 3).reshape(vec![6, 2]).t(), 9)
    });
    assert_close(&[a], |g, v| weigh(g, v[0].narrow(2, 1, 1), 10));
}

#[test]
fn matmul_variants() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = rand_tensor(&mut rng, &[4, 3], -1.0, 1.0);
    let b = rand_tensor(&mut rng, &[3, 5], -1.0, 1.0);
    let bt = rand_tensor(&mut rng, &[5, 3], -1.0, 1.0);
    assert_close(&[a.clone(), b], |g, v| weigh(g, v[0].matmul(v[1]), 11));
    assert_close(&[a, bt], |g, v| weigh(g, v[0].matmul_t(v[1]), 12));
}

#[test]
fn conv_and_its_transpose() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for &(h, w, cin, cout, k, stride, pad) in
        &[(5, 6, 2, 3, 3, 1, 1), (6, 6, 3, 2, 3, 2, 1), (4, 5, 2, 2, 1, 1, 0), (8, 8, 1, 2, 4, 2, 1)]
    {
        let x = rand_tensor(&mut rng, &[h, w, cin], -1.0, 1.0);
        let wt = rand_tensor(&mut rng, &[k, k, cin, cout], -1.0, 1.0);
        assert_close(&[x.clone(), wt.clone()], move |g, v| weigh(g, v[0].conv2d(v[1], stride, pad), 13));
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (w + 2 * pad - k) / stride + 1;
        let gy = rand_tensor(&mut rng, &[oh, ow, cout], -1.0, 1.0);
        assert_close(&[gy, wt], move |g, v| {
            weigh(g, v[0].conv2d_transpose(v[1], (h, w), stride, pad), 14)
        });
    }
}

#[test]
fn conv_transpose_is_the_input_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = rand_tensor(&mut rng, &[6, 5, 2], -1.0, 1.0);
    let wt = rand_tensor(&mut rng, &[3, 3, 2, 4], -1.0, 1.0);
    let g = Graph::new();
    let xv = g.param(x);
    let wv = g.constant(wt.clone());
    let y = xv.conv2d(wv, 2, 1);
    let seed = rand_tensor(&mut rng, &y.shape(), -1.0, 1.0);
    let dx = g.backward_with(y, seed.clone()).get(xv).unwrap().clone();
    let g2 = Graph::new();
    let z = g2.constant(seed).conv2d_transpose(g2.constant(wt), (6, 5), 2, 1);
    assert!(z.value().max_abs_diff(&dx) < 1e-12);
}

#[test]
fn image_ops() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = rand_tensor(&mut rng, &[3, 4, 8], -1.0, 1.0);
    assert_close(&[x.clone()], |g, v| weigh(g, v[0].pixel_shuffle(2), 15));
    let taps = [0.125, 0.375, 0.375, 0.125];
    let img = rand_tensor(&mut rng, &[5, 7, 2], -1.0, 1.0);
    assert_close(&[img.clone()], move |g, v| weigh(g, v[0].blur(&taps), 16));
    for &(oh, ow) in &[(10, 14), (2, 3), (5, 14), (8, 4)] {
        assert_close(&[img.clone()], move |g, v| weigh(g, v[0].resize_bilinear(oh, ow), 17));
    }
}

#[test]
fn shared_subexpressions_accumulate() {
    let g = Graph::<f64>::new();
    let x = g.param(Tensor::scalar(3.0));
    let y = x.mul(x).add(x);
    let grads = g.backward(y);
    assert_eq!(grads.get(x).unwrap().item(), 7.0);
}
