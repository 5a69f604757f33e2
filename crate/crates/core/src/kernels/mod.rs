//! Convolution kernels over item series.
//!
//! A convolution kernel compares two users by averaging a sub-kernel over
//! every pair of their items. The temporal variant multiplies each pair's
//! item similarity by an RBF kernel on the items' time difference, measured
//! in fractional days.

mod cache;

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{ItemSeries, SECONDS_PER_DAY};
use crate::error::{Error, Result};

pub use cache::{read_ckrn, series_digest, write_ckrn, KernelCache};

/// Item-level kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SubKernel {
    Linear,
    Rbf { gamma: f64 },
}

impl SubKernel {
    pub fn rbf(gamma: f64) -> Result<Self> {
        let k = SubKernel::Rbf { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SubKernel::Rbf { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                Err(Error::invalid(format!("RBF gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the kernel without checking dimensions.
    #[inline]
    pub(crate) fn eval_raw(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            SubKernel::Linear => dot(x, y),
            SubKernel::Rbf { gamma } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn sub_kernel(spec: SubKernel, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(spec.eval_raw(x, y))
}

/// Which representation a Gram matrix was built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelTag {
    W,
    Wt,
    N,
    Nt,
    Sum,
    Noise,
    /// Plain kernel over aggregate feature vectors.
    Feature,
}

impl KernelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelTag::W => "w",
            KernelTag::Wt => "wt",
            KernelTag::N => "n",
            KernelTag::Nt => "nt",
            KernelTag::Sum => "sum",
            KernelTag::Noise => "noise",
            KernelTag::Feature => "feature",
        }
    }
}

impl fmt::Display for KernelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_pair(a: &ItemSeries, b: &ItemSeries) -> Result<()> {
    for s in [a, b] {
        if s.is_empty() {
            return Err(Error::EmptySeries(s.user_id.clone()));
        }
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Orders a pair canonically so that `k(a, b)` and `k(b, a)` run the same loop.
fn canonical<'a>(a: &'a ItemSeries, b: &'a ItemSeries) -> (&'a ItemSeries, &'a ItemSeries) {
    let key = |s: &ItemSeries| (s.len(), s.timestamps().to_vec());
    let ord = key(a).cmp(&key(b)).then_with(|| {
        let bits = |s: &'a ItemSeries| s.values().iter().map(|v| v.to_bits());
        bits(a).cmp(bits(b))
    });
    if ord == std::cmp::Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    }
}

#[inline]
fn days_between(t1: i64, t2: i64) -> f64 {
    (t1 - t2) as f64 / SECONDS_PER_DAY as f64
}

/// Mean of the sub-kernel over all item pairs.
pub fn conv_kernel(a: &ItemSeries, b: &ItemSeries, spec: SubKernel) -> Result<f64> {
    spec.validate()?;
    check_pair(a, b)?;
    let (a, b) = canonical(a, b);
    let mut acc = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            acc += spec.eval_raw(a.item(i), b.item(j));
        }
    }
    Ok(acc / (a.len() * b.len()) as f64)
}

/// Mean over item pairs of the item kernel times an RBF kernel on the time
/// difference in days.
pub fn temporal_conv_kernel(a: &ItemSeries, b: &ItemSeries, items: SubKernel, time: SubKernel) -> Result<f64> {
    items.validate()?;
    time.validate()?;
    let SubKernel::Rbf { gamma } = time else {
        return Err(Error::invalid("time kernel must be RBF"));
    };
    check_pair(a, b)?;
    let (a, b) = canonical(a, b);
    let mut acc = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            let dt = days_between(a.ts(i), b.ts(j));
            acc += items.eval_raw(a.item(i), b.item(j)) * (-gamma * dt * dt).exp();
        }
    }
    Ok(acc / (a.len() * b.len()) as f64)
}

/// Symmetric Gram matrix over a user index, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub tag: KernelTag,
    pub user_index: Vec<String>,
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn from_values(tag: KernelTag, user_index: Vec<String>, values: Vec<f64>) -> Result<Self> {
        let n = user_index.len();
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: values.len(),
            });
        }
        Ok(KernelMatrix {
            tag,
            user_index,
            n,
            values,
        })
    }

    pub fn zeros(tag: KernelTag, user_index: Vec<String>) -> Self {
        let n = user_index.len();
        KernelMatrix {
            tag,
            user_index,
            n,
            values: vec![0.0; n * n],
        }
    }

    pub fn with_tag(mut self, tag: KernelTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn position(&self, user: &str) -> Option<usize> {
        self.user_index.iter().position(|u| u == user)
    }

    /// Principal sub-matrix on `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> KernelMatrix {
        let mut values = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            let row = self.row(i);
            values.extend(idx.iter().map(|&j| row[j]));
        }
        KernelMatrix {
            tag: self.tag,
            user_index: idx.iter().map(|&i| self.user_index[i].clone()).collect(),
            n: idx.len(),
            values,
        }
    }

    /// Off-diagonal block with rows `rows` and columns `cols`.
    pub fn cross(&self, rows: &[usize], cols: &[usize]) -> CrossKernel {
        let mut values = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            let row = self.row(i);
            values.extend(cols.iter().map(|&j| row[j]));
        }
        CrossKernel {
            row_index: rows.iter().map(|&i| self.user_index[i].clone()).collect(),
            col_index: cols.iter().map(|&j| self.user_index[j].clone()).collect(),
            values,
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    /// Smallest eigenvalue of the symmetrised matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = self.to_dmatrix();
        let sym = (&m + m.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.min()
    }

    pub fn scaled(&self, factor: f64) -> KernelMatrix {
        KernelMatrix {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Rectangular block `K(rows, cols)`, e.g. test users against training users.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossKernel {
    pub row_index: Vec<String>,
    pub col_index: Vec<String>,
    values: Vec<f64>,
}

impl CrossKernel {
    pub fn from_values(row_index: Vec<String>, col_index: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != row_index.len() * col_index.len() {
            return Err(Error::DimensionMismatch {
                expected: row_index.len() * col_index.len(),
                found: values.len(),
            });
        }
        Ok(CrossKernel {
            row_index,
            col_index,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.row_index.len()
    }

    pub fn cols(&self) -> usize {
        self.col_index.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_series(series: &[ItemSeries]) -> Result<usize> {
    let dim = series.first().map(|s| s.dim()).unwrap_or(0);
    for s in series {
        if s.is_empty() {
            return Err(Error::EmptySeries(s.user_id.clone()));
        }
        if s.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.dim(),
            });
        }
    }
    Ok(dim)
}

fn user_index(series: &[ItemSeries]) -> Vec<String> {
    series.iter().map(|s| s.user_id.clone()).collect()
}

/// Fills a symmetric matrix from upper-triangle rows computed in parallel.
/// Each entry is computed independently, so the result does not depend on
/// the number of worker threads.
fn fill_upper<F>(n: usize, count: usize, entry: F) -> Vec<Vec<f64>>
where
    F: Fn(usize, usize, &mut [f64]) + Sync,
{
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![0.0; (n - i) * count];
            for j in i..n {
                entry(i, j, &mut row[(j - i) * count..(j - i + 1) * count]);
            }
            row
        })
        .collect();
    (0..count)
        .map(|c| {
            let mut m = vec![0.0; n * n];
            for (i, row) in rows.iter().enumerate() {
                for j in i..n {
                    let v = row[(j - i) * count + c];
                    m[i * n + j] = v;
                    m[j * n + i] = v;
                }
            }
            m
        })
        .collect()
}

/// Gram matrix of the (temporal) convolution kernel over all user pairs.
///
/// Only the upper triangle is computed; the lower one is mirrored. Tagged
/// `W` without a time kernel and `WT` with one; use [`KernelMatrix::with_tag`]
/// for network kernels.
pub fn gram(series: &[ItemSeries], item: SubKernel, time: Option<SubKernel>) -> Result<KernelMatrix> {
    item.validate()?;
    match time {
        None => {
            check_series(series)?;
            let n = series.len();
            let values = if item == SubKernel::Linear {
                // the linear convolution kernel is the dot product of item means
                let means: Vec<Vec<f64>> = series.iter().map(mean_item).collect();
                fill_upper(n, 1, |i, j, out| out[0] = dot(&means[i], &means[j]))
            } else {
                fill_upper(n, 1, |i, j, out| {
                    out[0] = conv_kernel(&series[i], &series[j], item).expect("validated")
                })
            };
            KernelMatrix::from_values(KernelTag::W, user_index(series), values.into_iter().next().unwrap())
        }
        Some(SubKernel::Rbf { gamma }) => {
            let mut ks = gram_temporal(series, item, &[gamma])?;
            Ok(ks.pop().expect("one gamma"))
        }
        Some(SubKernel::Linear) => Err(Error::invalid("time kernel must be RBF")),
    }
}

fn mean_item(s: &ItemSeries) -> Vec<f64> {
    let mut m = vec![0.0; s.dim()];
    for (v, _) in s.items() {
        for (a, x) in m.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = s.len() as f64;
    m.iter_mut().for_each(|a| *a /= n);
    m
}

/// Temporal convolution Gram matrices for several time-kernel widths at once.
///
/// Item similarities and time differences are computed once per user pair
/// and reused for every gamma.
pub fn gram_temporal(series: &[ItemSeries], item: SubKernel, gammas: &[f64]) -> Result<Vec<KernelMatrix>> {
    item.validate()?;
    for &g in gammas {
        SubKernel::rbf(g)?;
    }
    check_series(series)?;
    let n = series.len();
    let aligned = series.windows(2).all(|w| w[0].timestamps() == w[1].timestamps());
    let matrices = if aligned && item == SubKernel::Linear && n > 0 {
        gram_temporal_aligned(series, gammas)
    } else {
        fill_upper(n, gammas.len(), |i, j, out| {
            let (a, b) = (&series[i], &series[j]);
            let (m, k) = (a.len(), b.len());
            let mut sim = Vec::with_capacity(m * k);
            let mut dt2 = Vec::with_capacity(m * k);
            for p in 0..m {
                for q in 0..k {
                    sim.push(item.eval_raw(a.item(p), b.item(q)));
                    let dt = days_between(a.ts(p), b.ts(q));
                    dt2.push(dt * dt);
                }
            }
            let norm = (m * k) as f64;
            for (o, &g) in out.iter_mut().zip(gammas) {
                let mut acc = 0.0;
                for (s, d) in sim.iter().zip(&dt2) {
                    let arg = g * d;
                    if arg < 745.0 {
                        acc += s * (-arg).exp();
                    }
                }
                *o = acc / norm;
            }
        })
    };
    matrices
        .into_iter()
        .map(|v| KernelMatrix::from_values(KernelTag::Wt, user_index(series), v))
        .collect()
}

/// Linear items on a shared timestamp grid: `K(a, b) = sum_i x_a,i . (T x_b)_i / M^2`
/// with `T_ij = exp(-gamma dt_ij^2)`.
fn gram_temporal_aligned(series: &[ItemSeries], gammas: &[f64]) -> Vec<Vec<f64>> {
    let n = series.len();
    let ts = series[0].timestamps();
    let m = ts.len();
    let dim = series[0].dim();
    let norm = (m * m) as f64;
    // smoothed[g][user] = T_g X_user, flattened m x dim
    let smoothed: Vec<Vec<Vec<f64>>> = gammas
        .iter()
        .map(|&g| {
            let t: Vec<f64> = (0..m * m)
                .map(|idx| {
                    let dt = days_between(ts[idx / m], ts[idx % m]);
                    (-g * dt * dt).exp()
                })
                .collect();
            series
                .par_iter()
                .map(|s| {
                    let mut out = vec![0.0; m * dim];
                    for p in 0..m {
                        for q in 0..m {
                            let w = t[p * m + q];
                            let x = s.item(q);
                            for d in 0..dim {
                                out[p * dim + d] += w * x[d];
                            }
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();
    fill_upper(n, gammas.len(), |i, j, out| {
        for (o, sm) in out.iter_mut().zip(&smoothed) {
            *o = dot(series[i].values(), &sm[j]) / norm;
        }
    })
}

/// Cross block between two sets of series (rows against columns).
pub fn cross_gram(
    rows: &[ItemSeries],
    cols: &[ItemSeries],
    item: SubKernel,
    time: Option<SubKernel>,
) -> Result<CrossKernel> {
    check_series(rows)?;
    check_series(cols)?;
    let values: Vec<f64> = rows
        .par_iter()
        .map(|a| {
            cols.iter()
                .map(|b| match time {
                    None => conv_kernel(a, b, item),
                    Some(t) => temporal_conv_kernel(a, b, item, t),
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?
        .into_iter()
        .flatten()
        .collect();
    CrossKernel::from_values(user_index(rows), user_index(cols), values)
}

/// Divides every entry by `sqrt(K_ii K_jj)`; the diagonal becomes exactly 1.
pub fn normalize(k: &KernelMatrix) -> Result<KernelMatrix> {
    let diag = k.diagonal();
    if let Some((index, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::NonPositiveDiagonal { index, value });
    }
    let roots: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    let n = k.n();
    let mut values = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            values.push(if i == j { 1.0 } else { k.get(i, j) / (roots[i] * roots[j]) });
        }
    }
    Ok(KernelMatrix { values, ..k.clone() })
}

fn check_same_index(ks: &[&KernelMatrix]) -> Result<()> {
    let first = ks.first().ok_or_else(|| Error::invalid("no kernels given"))?;
    for k in &ks[1..] {
        if k.user_index != first.user_index {
            return Err(Error::IndexMismatch(format!(
                "kernel `{}` and `{}` are over different users",
                first.tag, k.tag
            )));
        }
    }
    Ok(())
}

/// Entrywise sum, tagged `SUM`.
pub fn sum_kernels(ks: &[KernelMatrix]) -> Result<KernelMatrix> {
    let weights = vec![1.0; ks.len()];
    Ok(weighted_sum(ks, &weights)?.with_tag(KernelTag::Sum))
}

/// `sum_s w_s K_s`; the tag of the first kernel is kept when `S = 1`.
pub fn weighted_sum(ks: &[KernelMatrix], weights: &[f64]) -> Result<KernelMatrix> {
    let refs: Vec<&KernelMatrix> = ks.iter().collect();
    check_same_index(&refs)?;
    if weights.len() != ks.len() {
        return Err(Error::DimensionMismatch {
            expected: ks.len(),
            found: weights.len(),
        });
    }
    let mut values = vec![0.0; ks[0].values.len()];
    for (k, &w) in ks.iter().zip(weights) {
        for (acc, v) in values.iter_mut().zip(&k.values) {
            *acc += w * v;
        }
    }
    let tag = if ks.len() == 1 { ks[0].tag } else { KernelTag::Sum };
    Ok(KernelMatrix {
        values,
        ..ks[0].clone()
    }
    .with_tag(tag))
}

/// Weighted sum of cross blocks with identical indices.
pub fn weighted_cross_sum(blocks: &[CrossKernel], weights: &[f64]) -> Result<CrossKernel> {
    let first = blocks.first().ok_or_else(|| Error::invalid("no kernel blocks given"))?;
    if weights.len() != blocks.len() {
        return Err(Error::DimensionMismatch {
            expected: weights.len(),
            found: blocks.len(),
        });
    }
    let mut values = vec![0.0; first.values.len()];
    for (b, &w) in blocks.iter().zip(weights) {
        if b.row_index != first.row_index || b.col_index != first.col_index {
            return Err(Error::IndexMismatch("cross blocks over different users".into()));
        }
        for (acc, v) in values.iter_mut().zip(&b.values) {
            *acc += w * v;
        }
    }
    Ok(CrossKernel {
        values,
        ..first.clone()
    })
}

/// Linear kernel over dense feature rows.
pub fn linear_feature_kernel(users: Vec<String>, rows: &[Vec<f64>]) -> Result<KernelMatrix> {
    let n = rows.len();
    let v = fill_upper(n, 1, |i, j, out| out[0] = dot(&rows[i], &rows[j]));
    KernelMatrix::from_values(KernelTag::Feature, users, v.into_iter().next().unwrap())
}

/// RBF kernel over dense feature rows.
pub fn rbf_feature_kernel(users: Vec<String>, rows: &[Vec<f64>], gamma: f64) -> Result<KernelMatrix> {
    let spec = SubKernel::rbf(gamma)?;
    let n = rows.len();
    let v = fill_upper(n, 1, |i, j, out| out[0] = spec.eval_raw(&rows[i], &rows[j]));
    KernelMatrix::from_values(KernelTag::Feature, users, v.into_iter().next().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(user: &str, items: &[(&[f64], i64)]) -> ItemSeries {
        ItemSeries::from_items(user, items[0].0.len(), items.iter().map(|(v, t)| (v.to_vec(), *t)).collect()).unwrap()
    }

    #[test]
    fn sub_kernel_values() {
        assert_eq!(sub_kernel(SubKernel::rbf(0.5).unwrap(), &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(sub_kernel(SubKernel::Linear, &[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let v = sub_kernel(SubKernel::rbf(1.0).unwrap(), &[0.0], &[1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);
        assert!(sub_kernel(SubKernel::Linear, &[1.0], &[1.0, 2.0]).is_err());
        assert!(SubKernel::rbf(0.0).is_err());
    }

    #[test]
    fn conv_kernel_examples() {
        let unit = series("a", &[(&[1.0, 0.0], 1)]);
        assert_eq!(conv_kernel(&unit, &unit, SubKernel::Linear).unwrap(), 1.0);
        let a = series("a", &[(&[1.0, 0.0], 1), (&[0.0, 1.0], 2)]);
        let b = series("b", &[(&[1.0, 1.0], 1)]);
        assert_eq!(conv_kernel(&a, &b, SubKernel::Linear).unwrap(), 1.0);
        assert!(matches!(
            conv_kernel(&a, &ItemSeries::new("e", 2), SubKernel::Linear),
            Err(Error::EmptySeries(u)) if u == "e"
        ));
    }

    #[test]
    fn temporal_kernel_examples() {
        let a = series("a", &[(&[1.0], 0), (&[1.0], SECONDS_PER_DAY)]);
        let b = series("b", &[(&[1.0], 0)]);
        let v = temporal_conv_kernel(&a, &b, SubKernel::Linear, SubKernel::rbf(1.0).unwrap()).unwrap();
        assert!((v - (1.0 + (-1.0f64).exp()) / 2.0).abs() < 1e-15);
        assert!((v - 0.683940).abs() < 1e-6);

        let s = series("s", &[(&[0.3, 0.4], 100)]);
        let plain = conv_kernel(&s, &s, SubKernel::Linear).unwrap();
        let timed = temporal_conv_kernel(&s, &s, SubKernel::Linear, SubKernel::rbf(5.0).unwrap()).unwrap();
        assert_eq!(plain, timed);
        assert!(temporal_conv_kernel(&s, &s, SubKernel::Linear, SubKernel::Linear).is_err());
    }

    #[test]
    fn normalize_examples() {
        let k = KernelMatrix::from_values(KernelTag::W, vec!["a".into(), "b".into()], vec![4.0, 2.0, 2.0, 1.0]).unwrap();
        let n = normalize(&k).unwrap();
        assert_eq!(n.values(), &[1.0, 1.0, 1.0, 1.0]);
        let again = normalize(&n).unwrap();
        assert_eq!(again.values(), n.values());
        let bad = KernelMatrix::from_values(KernelTag::W, vec!["a".into(), "b".into()], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(normalize(&bad), Err(Error::NonPositiveDiagonal { index: 1, .. })));
    }

    #[test]
    fn sum_examples() {
        let idx = vec!["a".to_string(), "b".to_string()];
        let ones = KernelMatrix::from_values(KernelTag::W, idx.clone(), vec![1.0; 4]).unwrap();
        let s = sum_kernels(&[ones.clone(), ones.clone()]).unwrap();
        assert_eq!(s.values(), &[2.0; 4]);
        assert_eq!(s.tag, KernelTag::Sum);
        assert_eq!(sum_kernels(&[ones.clone()]).unwrap().values(), ones.values());
        let other = KernelMatrix::from_values(KernelTag::N, vec!["b".into(), "a".into()], vec![1.0; 4]).unwrap();
        assert!(matches!(sum_kernels(&[ones, other]), Err(Error::IndexMismatch(_))));
    }

    #[test]
    fn gram_single_user_and_empty() {
        let s = series("a", &[(&[2.0], 5)]);
        let k = gram(std::slice::from_ref(&s), SubKernel::Linear, None).unwrap();
        assert_eq!(k.n(), 1);
        assert_eq!(k.get(0, 0), 4.0);
        let err = gram(&[s, ItemSeries::new("ghost", 1)], SubKernel::Linear, None).unwrap_err();
        assert!(matches!(err, Error::EmptySeries(u) if u == "ghost"));
    }
}
