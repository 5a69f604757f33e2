//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmkl::data::ItemSeries;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Series of `m` random items of dimension `k` at random second offsets.
pub fn random_series(rng: &mut ChaCha8Rng, user: &str, m: usize, k: usize) -> ItemSeries {
    let items = (0..m)
        .map(|_| {
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            (v, rng.random_range(0..10 * 86_400))
        })
        .collect();
    ItemSeries::from_items(user, k, items).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let mut d = 0.0;
    for i in 0..a.len() {
        d += (a[i] - b[i]).powi(2);
    }
    (-gamma * d).exp()
}

/// Plain double loop; `gamma_time` adds the RBF factor on day differences.
pub fn conv_oracle(a: &ItemSeries, b: &ItemSeries, item_gamma: Option<f64>, gamma_time: Option<f64>) -> f64 {
    let mut total = 0.0;
    for (x, tx) in a.items() {
        for (z, tz) in b.items() {
            let base = match item_gamma {
                None => dot(x, z),
                Some(g) => rbf(x, z, g),
            };
            let w = match gamma_time {
                None => 1.0,
                Some(g) => {
                    let days = (tx - tz) as f64 / 86_400.0;
                    (-g * days * days).exp()
                }
            };
            total += base * w;
        }
    }
    total / (a.len() * b.len()) as f64
}

/// Random PSD matrix `A A'` of size `n` from `r` random factors.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Vec<f64> {
    let a: Vec<f64> = (0..n * r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            k[i * n + j] = dot(&a[i * r..(i + 1) * r], &a[j * r..(j + 1) * r]);
        }
    }
    k
}

pub fn balanced_labels(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// Dual value `sum a - 1/2 a'Qa` with `Q_ij = y_i y_j K_ij`.
pub fn dual_value(k: &[f64], y: &[f64], a: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += a[i] * a[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Euclidean projection onto `{0 <= a <= c, y'a = 0}` by bisection on the
/// multiplier of the equality.
fn project(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> { v.iter().zip(y).map(|(vi, yi)| (vi - lam * yi).clamp(0.0, c)).collect() };
    let balance = |a: &[f64]| -> f64 { a.iter().zip(y).map(|(ai, yi)| ai * yi).sum() };
    let (mut lo, mut hi) = (-1e6, 1e6);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        // balance is non-increasing in lambda
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

/// Accelerated projected gradient ascent on the SVM dual.
pub fn qp_oracle(k: &[f64], y: &[f64], c: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = y.len();
    let q: Vec<f64> = (0..n * n).map(|t| y[t / n] * y[t % n] * k[t]).collect();
    // Gershgorin bound on the largest eigenvalue
    let l = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let mut a = vec![0.0; n];
    let mut z = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let grad: Vec<f64> = (0..n).map(|i| 1.0 - dot(&q[i * n..(i + 1) * n], &z)).collect();
        let step: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi + g / l).collect();
        let next = project(&step, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = next.iter().zip(&a).map(|(n1, a0)| n1 + (t - 1.0) / t_next * (n1 - a0)).collect();
        a = next;
        t = t_next;
    }
    let v = dual_value(k, y, &a);
    (a, v)
}

/// Dataset shell with no events, announcing at day 10 (UTC).
pub fn empty_dataset(horizon_days: usize) -> tmkl::data::Dataset {
    tmkl::data::Dataset {
        tweets: Vec::new(),
        retweets: Vec::new(),
        labels: Default::default(),
        test_labels: Default::default(),
        seeds: Default::default(),
        announcement_ts: 10 * 86_400,
        horizon_days,
        utc_offset_hours: 0,
        d_text: 2,
        until_ts: None,
    }
}

/// A small generator setting that keeps end-to-end tests quick.
pub fn small_gen(seed: u64) -> tmkl::synth::GenConfig {
    tmkl::synth::GenConfig {
        seed,
        n_train_yes: 30,
        n_train_no: 30,
        n_test_yes: 20,
        n_test_no: 20,
        days: 4,
        d_text: 8,
        ..Default::default()
    }
}
