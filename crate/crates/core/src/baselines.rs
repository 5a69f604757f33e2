//! Feature-aggregate baselines: L2 logistic regression and aggregate-feature
//! features for the kernel SVM.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ItemSeries, Stance};
use crate::error::{Error, Result};
use crate::graph::TickState;
use crate::harness::{macro_f1, stratified_folds};
use crate::text::user_text_aggregate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FeatureMode {
    Text,
    Network,
    Both,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Text => "TEXT",
            FeatureMode::Network => "NETWORK",
            FeatureMode::Both => "BOTH",
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TEXT" => Ok(FeatureMode::Text),
            "NETWORK" => Ok(FeatureMode::Network),
            "BOTH" => Ok(FeatureMode::Both),
            _ => Err(Error::invalid(format!("unknown feature mode `{s}`"))),
        }
    }
}

/// One feature row per user.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateFeatures {
    pub mode: FeatureMode,
    pub users: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl AggregateFeatures {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }
}

/// TEXT is the mean tweet vector; NETWORK is the latest class-median score
/// followed by the latest vertex vector; BOTH concatenates the two.
pub fn aggregate_features(
    text: &BTreeMap<String, ItemSeries>,
    network: Option<&TickState>,
    users: &[String],
    mode: FeatureMode,
) -> Result<AggregateFeatures> {
    let needs_net = mode != FeatureMode::Text;
    let tick = match (needs_net, network) {
        (true, None) => return Err(Error::invalid("network features need at least one usable snapshot")),
        (_, t) => t,
    };
    let rows = users
        .iter()
        .map(|u| {
            let mut row = Vec::new();
            if mode != FeatureMode::Network {
                let s = text.get(u).ok_or_else(|| Error::EmptySeries(u.clone()))?;
                row.extend(user_text_aggregate(s)?);
            }
            if let (true, Some(t)) = (needs_net, tick) {
                row.push(t.medians.score(&t.embedding, u));
                row.extend_from_slice(t.medians.representation(&t.embedding, u));
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AggregateFeatures {
        mode,
        users: users.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
}

impl LogRegModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<Stance> {
        rows.iter().map(|x| Stance::from_margin(self.margin(x))).collect()
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean logistic loss plus `lambda/2 |w|^2`; the bias is not penalised.
/// `theta` holds the weights followed by the bias.
pub fn logreg_objective(x: &[Vec<f64>], y: &[f64], lambda: f64, theta: &[f64]) -> f64 {
    let d = theta.len() - 1;
    let n = x.len() as f64;
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, yi)| {
            let m = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[d];
            softplus(-yi * m)
        })
        .sum::<f64>()
        / n;
    loss + 0.5 * lambda * theta[..d].iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logreg_objective`].
pub fn logreg_gradient(x: &[Vec<f64>], y: &[f64], lambda: f64, theta: &[f64]) -> Vec<f64> {
    let d = theta.len() - 1;
    let n = x.len() as f64;
    let mut g = vec![0.0; d + 1];
    for (row, yi) in x.iter().zip(y) {
        let m = row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() + theta[d];
        let r = -yi * sigmoid(-yi * m) / n;
        for (gk, v) in g.iter_mut().zip(row) {
            *gk += r * v;
        }
        g[d] += r;
    }
    for k in 0..d {
        g[k] += lambda * theta[k];
    }
    g
}

const GRAD_TOL: f64 = 1e-6;

/// Newton's method with backtracking line search, run until the gradient
/// norm drops below `1e-6`.
pub fn logreg_fit(x: &[Vec<f64>], y: &[Stance], lambda: f64) -> Result<LogRegModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: x.len(),
        });
    }
    if !(y.contains(&Stance::Yes) && y.contains(&Stance::No)) {
        return Err(Error::MissingClass("logistic regression needs both classes".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::invalid(format!("lambda must be positive, got {lambda}")));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("feature rows differ in length"));
    }
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let n = x.len() as f64;
    let mut theta = vec![0.0; d + 1];
    let mut f = logreg_objective(x, &ys, lambda, &theta);
    let mut iterations = 0;
    let mut g = logreg_gradient(x, &ys, lambda, &theta);
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    while norm(&g) >= GRAD_TOL && iterations < 100 {
        iterations += 1;
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        for row in x {
            let m = row.iter().zip(&theta).map(|(a, b)| a * b).sum::<f64>() + theta[d];
            let p = sigmoid(m);
            let w = p * (1.0 - p) / n;
            let xt: Vec<f64> = row.iter().copied().chain(std::iter::once(1.0)).collect();
            for i in 0..=d {
                let wi = w * xt[i];
                for j in i..=d {
                    h[(i, j)] += wi * xt[j];
                }
            }
        }
        for i in 0..=d {
            for j in 0..i {
                h[(i, j)] = h[(j, i)];
            }
            if i < d {
                h[(i, i)] += lambda;
            }
        }
        let rhs = -DVector::from_column_slice(&g);
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => {
                let mut hr = h;
                for i in 0..=d {
                    hr[(i, i)] += 1e-10;
                }
                hr.lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::invalid("singular Hessian in logistic regression"))?
            }
        };
        let slope: f64 = g.iter().zip(step.iter()).map(|(a, b)| a * b).sum();
        let mut t = 1.0;
        let mut next;
        loop {
            next = theta.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect::<Vec<_>>();
            let fn_ = logreg_objective(x, &ys, lambda, &next);
            if fn_ <= f + 1e-4 * t * slope || t < 1e-10 {
                f = fn_;
                break;
            }
            t *= 0.5;
        }
        theta = next;
        g = logreg_gradient(x, &ys, lambda, &theta);
    }
    let grad_norm = norm(&g);
    let converged = grad_norm < GRAD_TOL;
    if !converged {
        log::warn!("logistic regression stopped with gradient norm {grad_norm:e}");
    }
    Ok(LogRegModel {
        weights: theta[..d].to_vec(),
        bias: theta[d],
        lambda,
        converged,
        iterations,
        grad_norm,
    })
}

/// Pooled cross-validated macro-F1 of each lambda, in grid order.
pub fn logreg_cv(x: &[Vec<f64>], y: &[Stance], lambdas: &[f64], folds: usize, seed: u64) -> Result<Vec<f64>> {
    let fold_of = stratified_folds(y, folds, seed)?;
    lambdas
        .par_iter()
        .map(|&lambda| {
            let mut pred = vec![Stance::No; y.len()];
            for f in 0..folds {
                let (tr, va): (Vec<usize>, Vec<usize>) = (0..y.len()).partition(|&i| fold_of[i] != f);
                if va.is_empty() {
                    continue;
                }
                let xt: Vec<Vec<f64>> = tr.iter().map(|&i| x[i].clone()).collect();
                let yt: Vec<Stance> = tr.iter().map(|&i| y[i]).collect();
                let m = logreg_fit(&xt, &yt, lambda)?;
                for &i in &va {
                    pred[i] = Stance::from_margin(m.margin(&x[i]));
                }
            }
            Ok(macro_f1(&pred, y)?.macro_f1)
        })
        .collect()
}

/// Selects lambda by cross-validated macro-F1 (ties go to the earlier grid
/// value) and refits on all rows.
pub fn logreg_train(
    x: &[Vec<f64>],
    y: &[Stance],
    lambdas: &[f64],
    folds: usize,
    seed: u64,
) -> Result<(LogRegModel, f64)> {
    if lambdas.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    let scores = logreg_cv(x, y, lambdas, folds, seed)?;
    let best = argmax_first(&scores);
    Ok((logreg_fit(x, y, lambdas[best])?, scores[best]))
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_direction() {
        let x: Vec<Vec<f64>> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&v| vec![v]).collect();
        let y = [Stance::No, Stance::No, Stance::Yes, Stance::Yes];
        let m = logreg_fit(&x, &y, 0.1).unwrap();
        assert!(m.converged);
        assert!(m.weights[0] > 0.0);
        assert_eq!(m.predict(&x), y.to_vec());
    }

    #[test]
    fn duplicated_column_gets_equal_weights() {
        let x: Vec<Vec<f64>> = [-1.5, -0.2, 0.3, 0.7, 1.1, -0.9].iter().map(|&v| vec![v, v]).collect();
        let y = [Stance::No, Stance::Yes, Stance::No, Stance::Yes, Stance::Yes, Stance::No];
        let m = logreg_fit(&x, &y, 0.01).unwrap();
        assert!((m.weights[0] - m.weights[1]).abs() < 1e-4);
    }

    #[test]
    fn mode_round_trip() {
        for m in [FeatureMode::Text, FeatureMode::Network, FeatureMode::Both] {
            assert_eq!(m.as_str().parse::<FeatureMode>().unwrap(), m);
        }
        assert!("graph".parse::<FeatureMode>().is_err());
    }
}
