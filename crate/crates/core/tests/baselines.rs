mod common;

use common::rng;
use rand::Rng;
use tmkl::baselines::{logreg_fit, logreg_gradient, logreg_objective};
use tmkl::data::Stance;

#[test]
fn gradient_matches_finite_differences_and_vanishes_at_optimum() {
    let mut r = rng(31);
    let x: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<Stance> = (0..10).map(|i| if i % 3 == 0 { Stance::Yes } else { Stance::No }).collect();
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let lambda = 0.1;
    let theta: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let g = logreg_gradient(&x, &ys, lambda, &theta);
    let h = 1e-6;
    for k in 0..4 {
        let mut up = theta.clone();
        let mut down = theta.clone();
        up[k] += h;
        down[k] -= h;
        let fd = (logreg_objective(&x, &ys, lambda, &up) - logreg_objective(&x, &ys, lambda, &down)) / (2.0 * h);
        assert!((fd - g[k]).abs() < 1e-7, "coordinate {k}: {fd} vs {}", g[k]);
    }
    let m = logreg_fit(&x, &y, lambda).unwrap();
    assert!(m.converged);
    let opt: Vec<f64> = m.weights.iter().copied().chain([m.bias]).collect();
    let norm = logreg_gradient(&x, &ys, lambda, &opt).iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm < 1e-6, "{norm}");
}
