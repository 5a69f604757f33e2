//! Dual soft-margin SVM over precomputed kernels.
//!
//! The solver is SMO with second-order working-set selection: the first
//! index is the maximal KKT violator and the second maximises the decrease
//! of the dual objective.

use serde::{Deserialize, Serialize};

use crate::data::Stance;
use crate::error::{Error, Result};
use crate::kernels::{CrossKernel, KernelMatrix};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

/// Raw solver output over an index-free kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// Dual objective `sum a - 1/2 a'Qa`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SmoSolution {
    /// `sum_i a_i y_i k(x, x_i) + b` for one kernel row against the training set.
    pub fn decision(&self, y: &[f64], row: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((a, yi), k) in self.alphas.iter().zip(y).zip(row) {
            if *a != 0.0 {
                s += a * yi * k;
            }
        }
        s + self.bias
    }
}

fn check_labels(y: &[f64]) -> Result<()> {
    let pos = y.iter().any(|&v| v > 0.0);
    let neg = y.iter().any(|&v| v < 0.0);
    if !(pos && neg) {
        return Err(Error::MissingClass("SVM training needs both YES and NO examples".into()));
    }
    Ok(())
}

/// Solves the dual on a dense row-major `n x n` kernel with labels in {+1, -1}.
pub fn smo_solve(k: &[f64], y: &[f64], c: f64, cfg: &SmoConfig) -> Result<SmoSolution> {
    smo_solve_from(k, y, c, cfg, None)
}

/// Rescales a dual solution found at `c_old` into a feasible start at
/// `c_new`. Points at the upper bound stay at the upper bound.
pub fn rescale_alphas(alphas: &[f64], c_old: f64, c_new: f64) -> Vec<f64> {
    let r = c_new / c_old;
    alphas
        .iter()
        .map(|&a| if a >= c_old { c_new } else { (a * r).min(c_new) })
        .collect()
}

/// [`smo_solve`] started from a feasible dual point `init`.
///
/// `init` must satisfy `0 <= a <= c` and `sum a_i y_i = 0`; the optimum does
/// not depend on it, only the number of iterations does.
pub fn smo_solve_from(k: &[f64], y: &[f64], c: f64, cfg: &SmoConfig, init: Option<&[f64]>) -> Result<SmoSolution> {
    let n = y.len();
    if k.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            found: k.len(),
        });
    }
    if !(c > 0.0) {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    check_labels(y)?;
    let kd: Vec<f64> = (0..n).map(|i| k[i * n + i]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    if let Some(init) = init {
        if init.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: init.len(),
            });
        }
        if init.iter().any(|a| !(*a >= 0.0 && *a <= c)) {
            return Err(Error::invalid("initial dual point lies outside [0, C]"));
        }
        let balance: f64 = init.iter().zip(y).map(|(a, yi)| a * yi).sum();
        if balance.abs() > 1e-8 * c.max(1.0) * n as f64 {
            return Err(Error::invalid("initial dual point violates sum a_i y_i = 0"));
        }
        alpha.copy_from_slice(init);
        for (j, &aj) in alpha.iter().enumerate() {
            if aj != 0.0 {
                let kj = &k[j * n..(j + 1) * n];
                for t in 0..n {
                    grad[t] += y[t] * y[j] * aj * kj[t];
                }
            }
        }
    }
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;
    // g_bar[t] = sum over upper-bounded j of C * Q_tj, used to rebuild
    // gradients of shrunk variables
    let mut g_bar = vec![0.0; n];
    for j in (0..n).filter(|&j| upper(alpha[j])) {
        let kj = &k[j * n..(j + 1) * n];
        for t in 0..n {
            g_bar[t] += c * y[t] * y[j] * kj[t];
        }
    }
    let mut active: Vec<usize> = (0..n).collect();
    let mut unshrunk = false;
    let mut counter = n.min(1000) + 1;
    let mut iterations = 0;
    let mut converged = false;
    let reconstruct = |active: &[usize], alpha: &[f64], grad: &mut [f64], g_bar: &[f64]| {
        if active.len() == n {
            return;
        }
        let mut is_active = vec![false; n];
        active.iter().for_each(|&t| is_active[t] = true);
        let free: Vec<usize> = (0..n).filter(|&j| !upper(alpha[j]) && !lower(alpha[j])).collect();
        for t in (0..n).filter(|&t| !is_active[t]) {
            let kt = &k[t * n..(t + 1) * n];
            let mut g = g_bar[t] - 1.0;
            for &j in &free {
                g += y[t] * y[j] * alpha[j] * kt[j];
            }
            grad[t] = g;
        }
    };
    while iterations < cfg.max_iter {
        counter -= 1;
        if counter == 0 {
            counter = n.min(1000);
            let (mut g1, mut g2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &t in &active {
                let (up, down) = if y[t] > 0.0 {
                    (!upper(alpha[t]), !lower(alpha[t]))
                } else {
                    (!lower(alpha[t]), !upper(alpha[t]))
                };
                let yg = y[t] * grad[t];
                if up {
                    g1 = g1.max(-yg);
                }
                if down {
                    g2 = g2.max(yg);
                }
            }
            if !unshrunk && g1 + g2 <= cfg.tol * 10.0 {
                unshrunk = true;
                reconstruct(&active, &alpha, &mut grad, &g_bar);
                active = (0..n).collect();
            }
            active.retain(|&t| {
                let yg = y[t] * grad[t];
                let at_up = if y[t] > 0.0 { upper(alpha[t]) } else { lower(alpha[t]) };
                let at_down = if y[t] > 0.0 { lower(alpha[t]) } else { upper(alpha[t]) };
                !((at_up && -yg > g1) || (at_down && yg > g2))
            });
        }
        // first index: maximal violator in I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for &t in &active {
            let v = -y[t] * grad[t];
            let ok = if y[t] > 0.0 { !upper(alpha[t]) } else { !lower(alpha[t]) };
            if ok && v >= gmax {
                gmax = v;
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        if i != usize::MAX {
            let ki = &k[i * n..(i + 1) * n];
            for &t in &active {
                let ok = if y[t] > 0.0 { !lower(alpha[t]) } else { !upper(alpha[t]) };
                if !ok {
                    continue;
                }
                let v = y[t] * grad[t];
                if v >= gmax2 {
                    gmax2 = v;
                }
                let diff = gmax + v;
                if diff > 0.0 {
                    let quad = kd[i] + kd[t] - 2.0 * ki[t];
                    let obj = -(diff * diff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        if gmax + gmax2 < cfg.tol || j == usize::MAX {
            if active.len() == n {
                converged = true;
                break;
            }
            // optimal on the shrunk problem; check again on the full one
            reconstruct(&active, &alpha, &mut grad, &g_bar);
            active = (0..n).collect();
            // select once on the full set before shrinking again
            counter = 2;
            continue;
        }
        iterations += 1;

        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let kij = k[i * n + j];
        if y[i] != y[j] {
            let quad = (kd[i] + kd[j] - 2.0 * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (kd[i] + kd[j] - 2.0 * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        let (ki, kj) = (&k[i * n..(i + 1) * n], &k[j * n..(j + 1) * n]);
        let (ci, cj) = (y[i] * di, y[j] * dj);
        for &t in &active {
            grad[t] += y[t] * (ci * ki[t] + cj * kj[t]);
        }
        for (idx, old, row) in [(i, ai_old, ki), (j, aj_old, kj)] {
            let (was, is) = (upper(old), upper(alpha[idx]));
            if was != is {
                let f = if is { c } else { -c } * y[idx];
                for t in 0..n {
                    g_bar[t] += f * y[t] * row[t];
                }
            }
        }
    }
    if !converged {
        // leave the gradient consistent for the bias and objective below
        reconstruct(&active, &alpha, &mut grad, &g_bar);
    }
    if !converged {
        log::debug!("SMO stopped after {iterations} iterations without meeting tolerance {}", cfg.tol);
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };
    let objective = alpha.iter().sum::<f64>() - 0.5 * alpha.iter().zip(&grad).map(|(a, g)| a * (g + 1.0)).sum::<f64>();
    Ok(SmoSolution {
        alphas: alpha,
        // adding zero turns a negative zero into a positive one
        bias: -rho + 0.0,
        objective,
        iterations,
        converged,
    })
}

/// Trained SVM over a named training index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub labels: Vec<Stance>,
    pub bias: f64,
    pub support: Vec<usize>,
    pub user_index: Vec<String>,
    #[serde(rename = "C")]
    pub c: f64,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
}

impl SvmModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    fn signed(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.sign()).collect()
    }

    /// Decision value for one row of kernel values against the training users.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let y = self.signed();
        let mut s = 0.0;
        for &i in &self.support {
            s += self.alphas[i] * y[i] * row[i];
        }
        s + self.bias
    }
}

pub(crate) fn signs(y: &[Stance]) -> Vec<f64> {
    y.iter().map(|l| l.sign()).collect()
}

/// Trains on a full train-by-train kernel.
pub fn smo_train(k: &KernelMatrix, y: &[Stance], c: f64, cfg: &SmoConfig) -> Result<SvmModel> {
    if y.len() != k.n() {
        return Err(Error::DimensionMismatch {
            expected: k.n(),
            found: y.len(),
        });
    }
    let sol = smo_solve(k.values(), &signs(y), c, cfg)?;
    Ok(model_from(sol, k.user_index.clone(), y.to_vec(), c))
}

pub(crate) fn model_from(sol: SmoSolution, user_index: Vec<String>, labels: Vec<Stance>, c: f64) -> SvmModel {
    let support = (0..sol.alphas.len()).filter(|&i| sol.alphas[i] > 0.0).collect();
    SvmModel {
        alphas: sol.alphas,
        labels,
        bias: sol.bias,
        support,
        user_index,
        c,
        converged: sol.converged,
        iterations: sol.iterations,
        objective: sol.objective,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<Stance>,
    pub margins: Vec<f64>,
}

impl Prediction {
    pub fn from_margins(margins: Vec<f64>) -> Self {
        Prediction {
            labels: margins.iter().map(|&m| Stance::from_margin(m)).collect(),
            margins,
        }
    }
}

/// Predicts test users from a test-by-train block whose columns follow the
/// model's training index.
pub fn svm_predict(model: &SvmModel, cross: &CrossKernel) -> Result<Prediction> {
    if cross.col_index != model.user_index {
        return Err(Error::IndexMismatch(
            "kernel block columns differ from the model's training users".into(),
        ));
    }
    let margins = (0..cross.rows()).map(|r| model.decision(cross.row(r))).collect();
    Ok(Prediction::from_margins(margins))
}
