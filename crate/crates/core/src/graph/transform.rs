use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{train_embedding, EmbeddingConfig, NodeEmbedding, SnapshotGraph};
use crate::data::{ItemSeries, Stance};
use crate::error::{Error, Result};

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn coordinate_median(vectors: &[&[f64]], dim: usize) -> Vec<f64> {
    let mut col = Vec::with_capacity(vectors.len());
    (0..dim)
        .map(|d| {
            col.clear();
            col.extend(vectors.iter().map(|v| v[d]));
            col.sort_by(f64::total_cmp);
            let n = col.len();
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

/// Per-class coordinate-wise medians of training users at one tick.
///
/// A user's score is `d(median_YES, u) - d(median_NO, u)` with Euclidean `d`:
/// negative scores sit closer to the YES median.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMedians {
    pub yes: Vec<f64>,
    pub no: Vec<f64>,
    /// Stand-in vector for users missing from the graph.
    pub fallback: Vec<f64>,
}

impl ClassMedians {
    pub fn fit(emb: &NodeEmbedding, train_labels: &BTreeMap<String, Stance>) -> Result<Self> {
        let mut yes = Vec::new();
        let mut no = Vec::new();
        for (u, l) in train_labels {
            if let Some(v) = emb.vertex(u) {
                match l {
                    Stance::Yes => yes.push(v),
                    Stance::No => no.push(v),
                }
            }
        }
        for (class, members) in [(Stance::Yes, &yes), (Stance::No, &no)] {
            if members.is_empty() {
                return Err(Error::MissingClass(format!(
                    "no embedded {class} training users at tick {}",
                    emb.tick_ts
                )));
            }
        }
        Self::from_members(&yes, &no, emb.mean_vertex())
    }

    /// Medians of explicit member vectors, all of the fallback's dimension.
    pub fn from_members(yes: &[&[f64]], no: &[&[f64]], fallback: Vec<f64>) -> Result<Self> {
        let dim = fallback.len();
        for (class, members) in [(Stance::Yes, yes), (Stance::No, no)] {
            if members.is_empty() {
                return Err(Error::MissingClass(format!("no {class} members")));
            }
            if let Some(v) = members.iter().find(|v| v.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
        }
        Ok(ClassMedians {
            yes: coordinate_median(yes, dim),
            no: coordinate_median(no, dim),
            fallback,
        })
    }

    pub fn score_vector(&self, v: &[f64]) -> f64 {
        euclidean(&self.yes, v) - euclidean(&self.no, v)
    }

    pub fn score(&self, emb: &NodeEmbedding, user: &str) -> f64 {
        self.score_vector(emb.vertex(user).unwrap_or(&self.fallback))
    }

    /// The user's vertex vector, or the fallback mean when absent.
    pub fn representation<'a>(&'a self, emb: &'a NodeEmbedding, user: &str) -> &'a [f64] {
        emb.vertex(user).unwrap_or(&self.fallback)
    }
}

/// Scalar class-median score for each of `users`.
pub fn class_median_transform(
    emb: &NodeEmbedding,
    train_labels: &BTreeMap<String, Stance>,
    users: &[String],
) -> Result<BTreeMap<String, f64>> {
    let medians = ClassMedians::fit(emb, train_labels)?;
    Ok(users.iter().map(|u| (u.clone(), medians.score(emb, u))).collect())
}

/// Embedding and medians for one usable tick.
#[derive(Debug, Clone)]
pub struct TickState {
    pub tick_ts: i64,
    pub embedding: NodeEmbedding,
    pub medians: ClassMedians,
}

/// Embeddings of all usable ticks. Ticks without edges, or without embedded
/// training users of both classes, are skipped.
#[derive(Debug, Clone)]
pub struct NetworkTimeline {
    pub ticks: Vec<TickState>,
    pub skipped: Vec<i64>,
}

/// Per-tick seed, independent of which other ticks are trained.
pub(crate) fn tick_seed(seed: u64, tick_ts: i64) -> u64 {
    let mut z = seed ^ (tick_ts as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl NetworkTimeline {
    pub fn build(ticks: &[SnapshotGraph], train_labels: &BTreeMap<String, Stance>, cfg: &EmbeddingConfig) -> Result<Self> {
        if ticks.is_empty() {
            return Err(Error::invalid("no snapshot ticks"));
        }
        let states: Vec<Result<Option<TickState>>> = ticks
            .par_iter()
            .map(|g| {
                if g.edges.is_empty() {
                    return Ok(None);
                }
                let tick_cfg = EmbeddingConfig {
                    seed: tick_seed(cfg.seed, g.tick_ts),
                    ..*cfg
                };
                let embedding = train_embedding(g, &tick_cfg)?;
                match ClassMedians::fit(&embedding, train_labels) {
                    Ok(medians) => Ok(Some(TickState {
                        tick_ts: g.tick_ts,
                        embedding,
                        medians,
                    })),
                    Err(Error::MissingClass(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect();
        let mut out = NetworkTimeline {
            ticks: Vec::new(),
            skipped: Vec::new(),
        };
        for (g, s) in ticks.iter().zip(states) {
            match s? {
                Some(state) => out.ticks.push(state),
                None => out.skipped.push(g.tick_ts),
            }
        }
        Ok(out)
    }

    /// One-dimensional score series per user over ticks `<= until`.
    pub fn series(&self, users: &[String], until: i64) -> BTreeMap<String, ItemSeries> {
        users
            .iter()
            .map(|u| {
                let mut s = ItemSeries::new(u.clone(), 1);
                for t in self.ticks.iter().take_while(|t| t.tick_ts <= until) {
                    s.push(&[t.medians.score(&t.embedding, u)], t.tick_ts)
                        .expect("ticks are ordered");
                }
                (u.clone(), s)
            })
            .collect()
    }

    /// The most recent usable tick at or before `until`.
    pub fn latest(&self, until: i64) -> Option<&TickState> {
        self.ticks.iter().rev().find(|t| t.tick_ts <= until)
    }
}

/// Scalar class-median items for every user, one per usable tick.
pub fn network_item_series(
    ticks: &[SnapshotGraph],
    train_labels: &BTreeMap<String, Stance>,
    users: &[String],
    cfg: &EmbeddingConfig,
) -> Result<BTreeMap<String, ItemSeries>> {
    let timeline = NetworkTimeline::build(ticks, train_labels, cfg)?;
    if timeline.ticks.is_empty() {
        return Err(Error::invalid("no tick has edges and embedded users of both classes"));
    }
    Ok(timeline.series(users, i64::MAX))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarityMode {
    Cumulative,
    Sliding { window_days: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarityPoint {
    pub tick_ts: i64,
    pub class: Stance,
    pub score: f64,
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        crate::kernels::dot(a, b) / (na * nb)
    }
}

fn class_mean(emb: &NodeEmbedding, labels: &BTreeMap<String, Stance>, class: Stance) -> Option<Vec<f64>> {
    let members: Vec<&[f64]> = labels
        .iter()
        .filter(|(_, l)| **l == class)
        .filter_map(|(u, _)| emb.vertex(u))
        .collect();
    if members.is_empty() {
        return None;
    }
    let mut m = vec![0.0; emb.dim];
    for v in &members {
        for (a, x) in m.iter_mut().zip(*v) {
            *a += x;
        }
    }
    m.iter_mut().for_each(|a| *a /= members.len() as f64);
    Some(m)
}

/// Class-mean network polarity of test users per tick, shifted so both
/// classes start at zero.
///
/// A test user's raw score is `cos(u, avg_YES) - cos(u, avg_NO)` where the
/// averages run over embedded training users. Ticks where either training
/// class is absent are skipped.
pub fn polarity_timeseries(
    ticks: &[SnapshotGraph],
    train_labels: &BTreeMap<String, Stance>,
    test_labels: &BTreeMap<String, Stance>,
    cfg: &EmbeddingConfig,
) -> Result<Vec<PolarityPoint>> {
    for class in [Stance::Yes, Stance::No] {
        if !test_labels.values().any(|l| *l == class) {
            return Err(Error::MissingClass(format!("no {class} test users")));
        }
        if !train_labels.values().any(|l| *l == class) {
            return Err(Error::MissingClass(format!("no {class} training users")));
        }
    }
    let raw: Vec<Option<(i64, f64, f64)>> = ticks
        .par_iter()
        .map(|g| -> Result<Option<(i64, f64, f64)>> {
            if g.edges.is_empty() {
                return Ok(None);
            }
            let emb = train_embedding(
                g,
                &EmbeddingConfig {
                    seed: tick_seed(cfg.seed, g.tick_ts),
                    ..*cfg
                },
            )?;
            let (Some(avg_y), Some(avg_n)) = (
                class_mean(&emb, train_labels, Stance::Yes),
                class_mean(&emb, train_labels, Stance::No),
            ) else {
                return Ok(None);
            };
            let fallback = emb.mean_vertex();
            let mut sums = [(0.0, 0usize); 2];
            for (u, l) in test_labels {
                let v = emb.vertex(u).unwrap_or(&fallback);
                let s = cosine(v, &avg_y) - cosine(v, &avg_n);
                let slot = &mut sums[usize::from(*l == Stance::No)];
                slot.0 += s;
                slot.1 += 1;
            }
            Ok(Some((g.tick_ts, sums[0].0 / sums[0].1 as f64, sums[1].0 / sums[1].1 as f64)))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<(i64, f64, f64)> = raw.into_iter().flatten().collect();
    let Some(&(_, y0, n0)) = rows.first() else {
        return Err(Error::invalid("no tick has embedded training users of both classes"));
    };
    Ok(rows
        .into_iter()
        .flat_map(|(ts, y, n)| {
            [
                PolarityPoint {
                    tick_ts: ts,
                    class: Stance::Yes,
                    score: y - y0,
                },
                PolarityPoint {
                    tick_ts: ts,
                    class: Stance::No,
                    score: n - n0,
                },
            ]
        })
        .collect())
}

/// `tick_ts,class,score` CSV.
pub fn polarity_csv(points: &[PolarityPoint]) -> String {
    let mut s = String::from("tick_ts,class,score\n");
    for p in points {
        s.push_str(&format!("{},{},{}\n", p.tick_ts, p.class, p.score));
    }
    s
}
