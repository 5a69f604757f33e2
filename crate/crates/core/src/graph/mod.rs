//! Retweet-graph snapshots, node embeddings and the per-tick class-median score.

mod embedding;
mod transform;

use std::collections::{BTreeMap, BTreeSet};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use embedding::{train_embedding, train_embedding_traced, EmbeddingConfig, NodeEmbedding};
pub use transform::{
    class_median_transform, network_item_series, polarity_csv, polarity_timeseries, ClassMedians, NetworkTimeline,
    PolarityMode, PolarityPoint, TickState,
};

/// Directed weighted retweet graph observed up to `tick_ts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotGraph {
    pub tick_ts: i64,
    pub nodes: BTreeSet<String>,
    /// `(src, dst) -> number of retweets`.
    pub edges: BTreeMap<(String, String), u32>,
}

impl SnapshotGraph {
    pub fn new(tick_ts: i64) -> Self {
        SnapshotGraph {
            tick_ts,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn add_retweet(&mut self, src: &str, dst: &str) {
        self.nodes.insert(src.to_string());
        self.nodes.insert(dst.to_string());
        *self.edges.entry((src.to_string(), dst.to_string())).or_insert(0) += 1;
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn weight(&self, src: &str, dst: &str) -> u32 {
        self.edges
            .get(&(src.to_string(), dst.to_string()))
            .copied()
            .unwrap_or(0)
    }
}

/// Tick timestamps `day_boundary(0) + j * tick` covering the dataset's events
/// up to its end.
pub fn tick_times(ds: &Dataset, tick_hours: u32) -> Result<Vec<i64>> {
    if tick_hours == 0 {
        return Err(Error::invalid("tick_hours must be positive"));
    }
    let tick = tick_hours as i64 * 3600;
    let anchor = ds.day_boundary(0);
    let end = ds.end_ts();
    let first = ds
        .tweets
        .iter()
        .map(|t| t.ts)
        .chain(ds.retweets.iter().map(|r| r.ts))
        .min()
        .unwrap_or(end)
        .min(end);
    let j_first = (first - anchor).div_euclid(tick) + i64::from((first - anchor).rem_euclid(tick) != 0);
    let j_last = (end - anchor).div_euclid(tick);
    let j_first = j_first.min(j_last);
    Ok((j_first..=j_last).map(|j| anchor + j * tick).collect())
}

/// Cumulative graphs, one per tick; edge weights count all retweets up to the tick.
pub fn build_snapshots(ds: &Dataset, tick_hours: u32) -> Result<Vec<SnapshotGraph>> {
    let ticks = tick_times(ds, tick_hours)?;
    let mut events: Vec<_> = ds.retweets.iter().collect();
    events.sort_by_key(|r| r.ts);
    let mut out = Vec::with_capacity(ticks.len());
    let mut g = SnapshotGraph::new(0);
    let mut next = 0;
    for tick in ticks {
        while next < events.len() && events[next].ts <= tick {
            g.add_retweet(&events[next].src, &events[next].dst);
            next += 1;
        }
        g.tick_ts = tick;
        out.push(g.clone());
    }
    Ok(out)
}

/// Graphs over the retweets in the trailing `window_days` before each tick.
pub fn build_window_snapshots(ds: &Dataset, tick_hours: u32, window_days: u32) -> Result<Vec<SnapshotGraph>> {
    if window_days == 0 {
        return Err(Error::invalid("window_days must be positive"));
    }
    let window = window_days as i64 * crate::data::SECONDS_PER_DAY;
    Ok(tick_times(ds, tick_hours)?
        .into_iter()
        .map(|tick| {
            let mut g = SnapshotGraph::new(tick);
            for r in ds.retweets.iter().filter(|r| r.ts <= tick && r.ts > tick - window) {
                g.add_retweet(&r.src, &r.dst);
            }
            g
        })
        .collect())
}
