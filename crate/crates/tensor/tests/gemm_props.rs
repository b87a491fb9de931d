use morpheus_tensor::gemm;
use proptest::prelude::*;

fn naive(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool) -> Vec<f64> {
    let at = |i: usize, p: usize| if ta { a[p * m + i] } else { a[i * k + p] };
    let bt = |p: usize, j: usize| if tb { b[j * k + p] } else { b[p * n + j] };
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            c[i * n + j] = (0..k).map(|p| at(i, p) * bt(p, j)).sum();
        }
    }
    c
}

proptest! {
    #[test]
    fn gemm_matches_naive(
        m in 1usize..7, k in 1usize..7, n in 1usize..7,
        ta: bool, tb: bool, acc: bool, seed in any::<u64>()
    ) {
        let gen = |len: usize, s: u64| -> Vec<f64> {
            (0..len).map(|i| (((i as u64 + 1) * 2654435761 ^ s) % 1000) as f64 / 500.0 - 1.0).collect()
        };
        let a = gen(m * k, seed);
        let b = gen(k * n, seed.rotate_left(17));
        let mut c = gen(m * n, seed.rotate_left(33));
        let c0 = c.clone();
        gemm(m, k, n, &a, ta, &b, tb, &mut c, acc);
        let want = naive(m, k, n, &a, ta, &b, tb);
        for i in 0..m * n {
            let expect = want[i] + if acc { c0[i] } else { 0.0 };
            prop_assert!((c[i] - expect).abs() < 1e-12);
        }
    }
}
