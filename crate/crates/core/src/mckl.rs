//! Multiple convolution kernel learning by semi-infinite linear programming.
//!
//! Alternates between an SVM on the current weighted kernel sum and a small
//! restricted master LP over the weights. For a dual vector `a` each kernel
//! contributes `S_s(a) = 1/2 a'Q_s a - sum a`; the master maximises `theta`
//! subject to `sum_s w_s S_s(a_t) >= theta` for every stored `a_t`, with
//! `w` on the simplex. `theta` can only fall as constraints accumulate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Stance;
use crate::error::{Error, Result};
use crate::kernels::{weighted_cross_sum, CrossKernel, KernelMatrix, KernelTag};
use crate::lp::{solve, LinearProgram};
use crate::svm::{model_from, signs, smo_solve_from, svm_predict, Prediction, SmoConfig, SmoSolution, SvmModel};

/// Smallest weight the master LP may assign.
pub const WEIGHT_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SilpConfig {
    /// Stop once `|1 - S/theta| <= eps`.
    pub eps: f64,
    pub max_iters: usize,
    pub smo: SmoConfig,
}

impl Default for SilpConfig {
    fn default() -> Self {
        SilpConfig {
            eps: 1e-3,
            max_iters: 50,
            smo: SmoConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub theta: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McklModel {
    pub tags: Vec<KernelTag>,
    pub weights: Vec<f64>,
    pub svm: SvmModel,
    pub trace: Vec<TracePoint>,
    pub converged: bool,
}

/// Raw result over index-free kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SilpSolution {
    pub weights: Vec<f64>,
    pub svm: SmoSolution,
    pub trace: Vec<TracePoint>,
    pub converged: bool,
}

fn combine(ks: &[&[f64]], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; ks[0].len()];
    for (k, &wk) in ks.iter().zip(w) {
        for (o, v) in out.iter_mut().zip(k.iter()) {
            *o += wk * v;
        }
    }
    out
}

/// `1/2 a'Q_s a - sum a` for each kernel.
fn per_kernel_terms(ks: &[&[f64]], y: &[f64], alphas: &[f64]) -> Vec<f64> {
    let n = y.len();
    let sv: Vec<usize> = (0..n).filter(|&i| alphas[i] > 0.0).collect();
    let coef: Vec<f64> = sv.iter().map(|&i| alphas[i] * y[i]).collect();
    let asum: f64 = alphas.iter().sum();
    ks.par_iter()
        .map(|k| {
            let mut quad = 0.0;
            for (p, &i) in sv.iter().enumerate() {
                let row = &k[i * n..(i + 1) * n];
                let mut acc = 0.0;
                for (q, &j) in sv.iter().enumerate() {
                    acc += coef[q] * row[j];
                }
                quad += coef[p] * acc;
            }
            0.5 * quad - asum
        })
        .collect()
}

/// Restricted master: variables `x_s = w_s - floor >= 0`, `theta = t+ - t-`.
fn master(constraints: &[Vec<f64>], s: usize) -> Result<(f64, Vec<f64>)> {
    let n = s + 2;
    let mut c = vec![0.0; n];
    c[s] = 1.0;
    c[s + 1] = -1.0;
    let mut a_ub = Vec::with_capacity(constraints.len());
    let mut b_ub = Vec::with_capacity(constraints.len());
    for terms in constraints {
        // theta - sum_s (floor + x_s) S_s <= 0
        let mut row: Vec<f64> = terms.iter().map(|t| -t).collect();
        row.push(1.0);
        row.push(-1.0);
        a_ub.push(row);
        b_ub.push(WEIGHT_FLOOR * terms.iter().sum::<f64>());
    }
    let mut eq = vec![1.0; s];
    eq.extend([0.0, 0.0]);
    let sol = solve(&LinearProgram {
        c,
        a_ub,
        b_ub,
        a_eq: vec![eq],
        b_eq: vec![1.0 - s as f64 * WEIGHT_FLOOR],
    })?;
    let mut w: Vec<f64> = sol.x[..s].iter().map(|x| x + WEIGHT_FLOOR).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok((sol.objective, w))
}

/// SILP on dense row-major kernels sharing one training order.
pub fn silp_solve(ks: &[&[f64]], y: &[f64], c: f64, cfg: &SilpConfig) -> Result<SilpSolution> {
    silp_solve_from(ks, y, c, cfg, None)
}

/// [`silp_solve`] with the first SVM started from the feasible dual point
/// `init`. Later SVMs start from the previous iterate.
pub fn silp_solve_from(ks: &[&[f64]], y: &[f64], c: f64, cfg: &SilpConfig, init: Option<&[f64]>) -> Result<SilpSolution> {
    let s = ks.len();
    if s == 0 {
        return Err(Error::invalid("at least one kernel is required"));
    }
    if ks.iter().any(|k| k.len() != ks[0].len()) {
        return Err(Error::IndexMismatch("kernels differ in size".into()));
    }
    if s == 1 {
        let svm = smo_solve_from(ks[0], y, c, &cfg.smo, init)?;
        let theta = per_kernel_terms(ks, y, &svm.alphas)[0];
        return Ok(SilpSolution {
            weights: vec![1.0],
            svm,
            trace: vec![TracePoint {
                theta,
                weights: vec![1.0],
            }],
            converged: true,
        });
    }
    let mut weights = vec![1.0 / s as f64; s];
    let mut constraints: Vec<Vec<f64>> = Vec::new();
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut converged = false;
    let mut iter = 0;
    let mut start: Option<Vec<f64>> = init.map(<[f64]>::to_vec);
    let svm = loop {
        let combined = combine(ks, &weights);
        let svm = smo_solve_from(&combined, y, c, &cfg.smo, start.as_deref())?;
        start = Some(svm.alphas.clone());
        let terms = per_kernel_terms(ks, y, &svm.alphas);
        let value: f64 = terms.iter().zip(&weights).map(|(t, w)| t * w).sum();
        if let Some(last) = trace.last() {
            let gap = if last.theta != 0.0 { (1.0 - value / last.theta).abs() } else { value.abs() };
            if gap <= cfg.eps {
                converged = true;
                break svm;
            }
        }
        if iter == cfg.max_iters {
            break svm;
        }
        constraints.push(terms);
        let (theta, w) = master(&constraints, s)?;
        trace.push(TracePoint {
            theta,
            weights: w.clone(),
        });
        weights = w;
        iter += 1;
    };
    if !converged {
        log::warn!("SILP stopped after {} iterations without meeting eps {}", cfg.max_iters, cfg.eps);
    }
    Ok(SilpSolution {
        weights,
        svm,
        trace,
        converged,
    })
}

/// Learns kernel weights and the SVM on their weighted sum.
pub fn silp_train(ks: &[KernelMatrix], y: &[Stance], c: f64, cfg: &SilpConfig) -> Result<McklModel> {
    let first = ks.first().ok_or_else(|| Error::invalid("at least one kernel is required"))?;
    for k in ks {
        if k.user_index != first.user_index {
            return Err(Error::IndexMismatch(format!(
                "kernel `{}` and `{}` are over different users",
                first.tag, k.tag
            )));
        }
    }
    if y.len() != first.n() {
        return Err(Error::DimensionMismatch {
            expected: first.n(),
            found: y.len(),
        });
    }
    let slices: Vec<&[f64]> = ks.iter().map(|k| k.values()).collect();
    let sol = silp_solve(&slices, &signs(y), c, cfg)?;
    Ok(McklModel {
        tags: ks.iter().map(|k| k.tag).collect(),
        weights: sol.weights,
        svm: model_from(sol.svm, first.user_index.clone(), y.to_vec(), c),
        trace: sol.trace,
        converged: sol.converged,
    })
}

/// Predicts from one test-by-train block per kernel, in training order.
pub fn mckl_predict(model: &McklModel, blocks: &[CrossKernel]) -> Result<Prediction> {
    if blocks.len() != model.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: model.weights.len(),
            found: blocks.len(),
        });
    }
    svm_predict(&model.svm, &weighted_cross_sum(blocks, &model.weights)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(n: usize) -> Vec<f64> {
        (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect()
    }

    #[test]
    fn single_kernel_has_unit_weight() {
        let k = eye(2);
        let sol = silp_solve(&[&k], &[1.0, -1.0], 1.0, &SilpConfig::default()).unwrap();
        assert_eq!(sol.weights, vec![1.0]);
        assert_eq!(sol.svm.alphas, vec![1.0, 1.0]);
    }

    #[test]
    fn weights_stay_on_simplex() {
        let y = [1.0, 1.0, -1.0, -1.0];
        let aligned: Vec<f64> = (0..16).map(|i| y[i / 4] * y[i % 4]).map(|v| 0.5 + 0.5 * v).collect();
        let k = eye(4);
        let sol = silp_solve(&[&aligned, &k], &y, 1.0, &SilpConfig::default()).unwrap();
        assert!((sol.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(sol.weights.iter().all(|&w| w > 0.0));
        for w in sol.trace.windows(2) {
            assert!(w[1].theta <= w[0].theta + 1e-8);
        }
    }
}
