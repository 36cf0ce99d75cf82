#![allow(dead_code)]

use ctbn_core::compose::{ConditionalFamily, CtbnModel};
use ctbn_core::generators::{Generator, ProbabilityVector};
use ctbn_core::linalg::Matrix;
use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use ctbn_core::simulate::replication_rng as rng_for;

pub fn rng(seed: u64) -> ChaCha8Rng {
    rng_for(seed, 0)
}

/// Generator with independent off-diagonal rates uniform on `[lo, hi)`.
pub fn random_generator(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Generator<f64> {
    let off = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random_range(lo..hi) });
    Generator::from_off_diagonal(off).unwrap()
}

pub fn random_family(rng: &mut impl Rng, base: usize, cond: usize, lo: f64, hi: f64) -> ConditionalFamily<f64> {
    ConditionalFamily::new((0..cond).map(|_| random_generator(rng, base, lo, hi)).collect()).unwrap()
}

pub fn random_model(rng: &mut impl Rng, nx: usize, ny: usize) -> CtbnModel<f64> {
    CtbnModel::new(random_family(rng, nx, ny, 0.05, 3.0), random_family(rng, ny, nx, 0.05, 3.0)).unwrap()
}

pub fn random_probability(rng: &mut impl Rng, n: usize) -> ProbabilityVector<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    ProbabilityVector::new(raw.into_iter().map(|v| v / total).collect()).unwrap()
}

/// Strategy for an `n x n` generator; roughly a fifth of the rates are zero.
pub fn arb_generator(n: usize) -> impl Strategy<Value = Generator<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.01f64..4.0], n * n).prop_map(move |v| {
        Generator::from_off_diagonal(Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { v[i * n + j] })).unwrap()
    })
}

/// Generator with every off-diagonal rate positive.
pub fn arb_positive_generator(n: usize) -> impl Strategy<Value = Generator<f64>> {
    prop::collection::vec(0.05f64..3.0, n * n).prop_map(move |v| {
        Generator::from_off_diagonal(Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { v[i * n + j] })).unwrap()
    })
}

pub fn arb_probability(n: usize) -> impl Strategy<Value = ProbabilityVector<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        ProbabilityVector::new(raw.into_iter().map(|v| v / total).collect()).unwrap()
    })
}

pub fn arb_family(base: usize, cond: usize) -> impl Strategy<Value = ConditionalFamily<f64>> {
    prop::collection::vec(arb_positive_generator(base), cond).prop_map(|m| ConditionalFamily::new(m).unwrap())
}

/// Model with `nx, ny` in `1..=max` and positive rates.
pub fn arb_model(max: usize) -> impl Strategy<Value = CtbnModel<f64>> {
    (1..=max, 1..=max).prop_flat_map(|(nx, ny)| {
        (arb_family(nx, ny), arb_family(ny, nx)).prop_map(|(a, b)| CtbnModel::new(a, b).unwrap())
    })
}

/// `∫₀^T p0 exp(Qs) ds` by RK4 on the forward equation with trapezoidal
/// quadrature of the solution, `steps` equal steps.
pub fn occupation_by_quadrature(q: &Generator<f64>, p0: &[f64], horizon: f64, steps: usize) -> Vec<f64> {
    let n = q.dim();
    let rates = q.rates();
    let h = horizon / steps as f64;
    let apply = |p: &[f64], out: &mut [f64]| {
        for j in 0..n {
            out[j] = 0.0;
        }
        for i in 0..n {
            let pi = p[i];
            if pi != 0.0 {
                let row = rates.row(i);
                for j in 0..n {
                    out[j] += pi * row[j];
                }
            }
        }
    };
    let mut p = p0.to_vec();
    let mut acc: Vec<f64> = p.iter().map(|v| 0.5 * v).collect();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        apply(&p, &mut k1);
        for j in 0..n {
            tmp[j] = p[j] + 0.5 * h * k1[j];
        }
        apply(&tmp, &mut k2);
        for j in 0..n {
            tmp[j] = p[j] + 0.5 * h * k2[j];
        }
        apply(&tmp, &mut k3);
        for j in 0..n {
            tmp[j] = p[j] + h * k3[j];
        }
        apply(&tmp, &mut k4);
        for j in 0..n {
            p[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        let weight = if step + 1 == steps { 0.5 } else { 1.0 };
        for j in 0..n {
            acc[j] += weight * p[j];
        }
    }
    acc.into_iter().map(|v| v * h).collect()
}

/// `p0 exp(Q T)` by classical RK4 on the forward equation with `steps` equal steps.
pub fn transient_by_rk4(q: &Generator<f64>, p0: &[f64], horizon: f64, steps: usize) -> Vec<f64> {
    let n = q.dim();
    let h = horizon / steps as f64;
    let apply = |p: &[f64]| q.rates().left_mul(p);
    let mut p = p0.to_vec();
    for _ in 0..steps {
        let k1 = apply(&p);
        let k2 = apply(&(0..n).map(|j| p[j] + 0.5 * h * k1[j]).collect::<Vec<_>>());
        let k3 = apply(&(0..n).map(|j| p[j] + 0.5 * h * k2[j]).collect::<Vec<_>>());
        let k4 = apply(&(0..n).map(|j| p[j] + h * k3[j]).collect::<Vec<_>>());
        for j in 0..n {
            p[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    p
}

/// `KL(Be(p) || Be(q))` evaluated term by term.
pub fn bernoulli_kl<T: num_traits::Float>(p: T, q: T) -> T {
    let one = T::one();
    p * (p / q).ln() + (one - p) * ((one - p) / (one - q)).ln()
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Empirical quantile with linear interpolation.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}
