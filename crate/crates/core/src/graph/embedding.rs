//! Second-order proximity node embeddings trained with negative sampling.
//!
//! Every node owns a vertex vector and a context vector. For an edge `i -> j`
//! sampled proportionally to its weight, SGD increases `log s(c_j . v_i)` and
//! `log s(-c_k . v_i)` for noise nodes `k` drawn proportionally to
//! out-degree^0.75. Nodes retweeting the same accounts end up close.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::SnapshotGraph;
use crate::error::{Error, Result};
use crate::kernels::dot;

const SIGMOID_BOUND: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub dim: usize,
    /// Total SGD samples are `samples_per_edge * edge_count`.
    pub samples_per_edge: usize,
    pub negatives: usize,
    pub seed: u64,
    pub initial_lr: f64,
    pub final_lr: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            dim: 50,
            samples_per_edge: 200,
            negatives: 5,
            seed: 0,
            initial_lr: 0.025,
            final_lr: 1e-4,
        }
    }
}

/// Vertex and context vectors for every node of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeEmbedding {
    pub tick_ts: i64,
    pub dim: usize,
    pub nodes: Vec<String>,
    index: HashMap<String, usize>,
    vertex: Vec<f64>,
    context: Vec<f64>,
}

impl NodeEmbedding {
    pub fn vertex(&self, user: &str) -> Option<&[f64]> {
        self.index.get(user).map(|&i| self.vertex_at(i))
    }

    pub fn context(&self, user: &str) -> Option<&[f64]> {
        self.index
            .get(user)
            .map(|&i| &self.context[i * self.dim..(i + 1) * self.dim])
    }

    pub fn vertex_at(&self, i: usize) -> &[f64] {
        &self.vertex[i * self.dim..(i + 1) * self.dim]
    }

    pub fn contains(&self, user: &str) -> bool {
        self.index.contains_key(user)
    }

    /// Mean vertex vector over all nodes.
    pub fn mean_vertex(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.nodes.len() {
            for (a, x) in m.iter_mut().zip(self.vertex_at(i)) {
                *a += x;
            }
        }
        let n = self.nodes.len().max(1) as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// `user<TAB>floats` lines in node order.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (i, u) in self.nodes.iter().enumerate() {
            s.push_str(u);
            for v in self.vertex_at(i) {
                s.push('\t');
                s.push_str(&v.to_string());
            }
            s.push('\n');
        }
        s
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x > SIGMOID_BOUND {
        1.0
    } else if x < -SIGMOID_BOUND {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

struct Trainer {
    dim: usize,
    edges: Vec<(usize, usize)>,
    edge_dist: WeightedAliasIndex<f64>,
    noise_dist: WeightedAliasIndex<f64>,
    noise_nodes: Vec<usize>,
}

impl Trainer {
    fn new(g: &SnapshotGraph, nodes: &[String], index: &HashMap<String, usize>, dim: usize) -> Result<Self> {
        if g.edges.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut edges = Vec::with_capacity(g.edges.len());
        let mut weights = Vec::with_capacity(g.edges.len());
        let mut out_degree = vec![0.0; nodes.len()];
        for ((s, d), &w) in &g.edges {
            let (si, di) = (index[s], index[d]);
            edges.push((si, di));
            weights.push(w as f64);
            out_degree[si] += w as f64;
        }
        let noise_nodes: Vec<usize> = (0..nodes.len()).filter(|&i| out_degree[i] > 0.0).collect();
        let noise_weights: Vec<f64> = noise_nodes.iter().map(|&i| out_degree[i].powf(0.75)).collect();
        let bad = |e: rand_distr::weighted::Error| Error::invalid(format!("sampling table: {e}"));
        Ok(Trainer {
            dim,
            edges,
            edge_dist: WeightedAliasIndex::new(weights).map_err(bad)?,
            noise_dist: WeightedAliasIndex::new(noise_weights).map_err(bad)?,
            noise_nodes,
        })
    }

    fn noise(&self, rng: &mut ChaCha8Rng) -> usize {
        self.noise_nodes[self.noise_dist.sample(rng)]
    }

    fn step(&self, vertex: &mut [f64], context: &mut [f64], edge: (usize, usize), noise: &[usize], lr: f64, err: &mut [f64]) {
        let dim = self.dim;
        let (u, v) = edge;
        err.iter_mut().for_each(|e| *e = 0.0);
        let vu = u * dim..(u + 1) * dim;
        let targets = std::iter::once((v, 1.0)).chain(noise.iter().map(|&k| (k, 0.0)));
        for (t, label) in targets {
            let ct = t * dim..(t + 1) * dim;
            let f = dot(&vertex[vu.clone()], &context[ct.clone()]);
            let g = (label - sigmoid(f)) * lr;
            for d in 0..dim {
                err[d] += g * context[ct.start + d];
                context[ct.start + d] += g * vertex[vu.start + d];
            }
        }
        for d in 0..dim {
            vertex[vu.start + d] += err[d];
        }
    }
}

/// Negative log-likelihood of fixed probe edges with fixed noise nodes.
fn probe_loss(vertex: &[f64], context: &[f64], dim: usize, probes: &[((usize, usize), Vec<usize>)]) -> f64 {
    let ln_sig = |x: f64| -> f64 { -(1.0 + (-x).exp()).ln() };
    let mut total = 0.0;
    for ((u, v), noise) in probes {
        let vu = &vertex[u * dim..(u + 1) * dim];
        total -= ln_sig(dot(vu, &context[v * dim..(v + 1) * dim]));
        for &k in noise {
            total -= ln_sig(-dot(vu, &context[k * dim..(k + 1) * dim]));
        }
    }
    total / probes.len().max(1) as f64
}

/// Trains an embedding for `g`; deterministic for a given config seed.
pub fn train_embedding(g: &SnapshotGraph, cfg: &EmbeddingConfig) -> Result<NodeEmbedding> {
    train_inner(g, cfg, 0).map(|(e, _)| e)
}

/// Like [`train_embedding`], also returning the probe-edge loss measured at
/// `checkpoints` evenly spaced points during training.
pub fn train_embedding_traced(g: &SnapshotGraph, cfg: &EmbeddingConfig, checkpoints: usize) -> Result<(NodeEmbedding, Vec<f64>)> {
    train_inner(g, cfg, checkpoints)
}

fn train_inner(g: &SnapshotGraph, cfg: &EmbeddingConfig, checkpoints: usize) -> Result<(NodeEmbedding, Vec<f64>)> {
    if cfg.dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let nodes: Vec<String> = g.nodes.iter().cloned().collect();
    let index: HashMap<String, usize> = nodes.iter().enumerate().map(|(i, u)| (u.clone(), i)).collect();
    let trainer = Trainer::new(g, &nodes, &index, cfg.dim)?;
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let half = 0.5 / dim as f64;
    let mut vertex: Vec<f64> = (0..nodes.len() * dim).map(|_| rng.random_range(-half..half)).collect();
    let mut context = vec![0.0; nodes.len() * dim];

    let mut probe_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_0F_9E0B);
    let probes: Vec<((usize, usize), Vec<usize>)> = if checkpoints > 0 {
        (0..256)
            .map(|_| {
                let e = trainer.edges[trainer.edge_dist.sample(&mut probe_rng)];
                let noise = (0..cfg.negatives).map(|_| trainer.noise(&mut probe_rng)).collect();
                (e, noise)
            })
            .collect()
    } else {
        Vec::new()
    };

    let total = cfg.samples_per_edge.max(1) * trainer.edges.len();
    let every = if checkpoints > 0 { (total / checkpoints).max(1) } else { usize::MAX };
    let mut losses = Vec::new();
    let mut err = vec![0.0; dim];
    let mut noise = Vec::with_capacity(cfg.negatives);
    for step in 0..total {
        let lr = cfg.initial_lr - (cfg.initial_lr - cfg.final_lr) * step as f64 / total as f64;
        let edge = trainer.edges[trainer.edge_dist.sample(&mut rng)];
        noise.clear();
        for _ in 0..cfg.negatives {
            let k = trainer.noise(&mut rng);
            if k != edge.1 {
                noise.push(k);
            }
        }
        trainer.step(&mut vertex, &mut context, edge, &noise, lr, &mut err);
        if checkpoints > 0 && (step + 1) % every == 0 && losses.len() < checkpoints {
            losses.push(probe_loss(&vertex, &context, dim, &probes));
        }
    }
    Ok((
        NodeEmbedding {
            tick_ts: g.tick_ts,
            dim,
            nodes,
            index,
            vertex,
            context,
        },
        losses,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_graph_is_rejected() {
        let g = SnapshotGraph::new(0);
        assert!(matches!(train_embedding(&g, &EmbeddingConfig::default()), Err(Error::EmptyGraph)));
    }

    #[test]
    fn single_edge_trains_finite_and_deterministic() {
        let mut g = SnapshotGraph::new(5);
        g.add_retweet("a", "b");
        let cfg = EmbeddingConfig {
            dim: 8,
            seed: 3,
            ..Default::default()
        };
        let e1 = train_embedding(&g, &cfg).unwrap();
        let e2 = train_embedding(&g, &cfg).unwrap();
        assert_eq!(e1, e2);
        assert!(e1.vertex("a").unwrap().iter().all(|v| v.is_finite()));
        assert!(e1.context("b").unwrap().iter().all(|v| v.is_finite()));
        assert_eq!(e1.to_tsv().lines().count(), 2);
    }
}
