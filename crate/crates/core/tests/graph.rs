mod common;

use std::collections::BTreeMap;

use common::{empty_dataset, rng, small_gen};
use rand::Rng;
use tmkl::data::{RetweetEvent, Stance};
use tmkl::graph::{
    build_snapshots, class_median_transform, polarity_timeseries, train_embedding, train_embedding_traced,
    EmbeddingConfig, NetworkTimeline, SnapshotGraph,
};
use tmkl::synth::{generate, GenConfig};

#[test]
fn snapshot_weights_match_event_counts() {
    let mut r = rng(3);
    let users = ["a", "b", "c", "d", "e", "f"];
    let mut ds = empty_dataset(3);
    for _ in 0..100 {
        let src = users[r.random_range(0..users.len())];
        let dst = users[r.random_range(0..users.len())];
        let ts = r.random_range(8 * 86_400..12 * 86_400);
        ds.retweets.push(RetweetEvent { ts, src: src.into(), dst: dst.into() });
    }
    let snaps = build_snapshots(&ds, 12).unwrap();
    for g in &snaps {
        for s in users {
            for d in users {
                let expected = ds.retweets.iter().filter(|e| e.src == s && e.dst == d && e.ts <= g.tick_ts).count();
                assert_eq!(g.weight(s, d) as usize, expected, "{s}->{d} at {}", g.tick_ts);
            }
        }
    }
    for w in snaps.windows(2) {
        assert!(w[0].edges.iter().all(|(e, &c)| w[1].edges[e] >= c));
    }
}

fn two_cliques() -> SnapshotGraph {
    let mut g = SnapshotGraph::new(0);
    for block in ["a", "b"] {
        for i in 0..10 {
            for j in 0..10 {
                if i != j {
                    g.add_retweet(&format!("{block}{i}"), &format!("{block}{j}"));
                }
            }
        }
    }
    g
}

fn nearest_neighbour_accuracy(emb: &tmkl::graph::NodeEmbedding) -> f64 {
    let cos = |a: &[f64], b: &[f64]| {
        let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (n(a) * n(b))
    };
    let nodes = &emb.nodes;
    let hits = nodes
        .iter()
        .filter(|u| {
            let v = emb.vertex(u).unwrap();
            let best = nodes
                .iter()
                .filter(|w| w != u)
                .max_by(|p, q| cos(v, emb.vertex(p).unwrap()).total_cmp(&cos(v, emb.vertex(q).unwrap())))
                .unwrap();
            best[..1] == u[..1]
        })
        .count();
    hits as f64 / nodes.len() as f64
}

#[test]
fn planted_cliques_are_recovered() {
    let g = two_cliques();
    for seed in 0..5 {
        let cfg = EmbeddingConfig { dim: 16, seed, ..Default::default() };
        let emb = train_embedding(&g, &cfg).unwrap();
        let acc = nearest_neighbour_accuracy(&emb);
        assert!(acc >= 0.9, "seed {seed}: accuracy {acc}");
    }
}

#[test]
fn embedding_is_deterministic_and_probe_loss_falls() {
    let g = two_cliques();
    let cfg = EmbeddingConfig { dim: 16, seed: 9, ..Default::default() };
    let a = train_embedding(&g, &cfg).unwrap();
    let b = train_embedding(&g, &cfg).unwrap();
    assert_eq!(a, b);
    let (_, loss) = train_embedding_traced(&g, &cfg, 8).unwrap();
    assert_eq!(loss.len(), 8);
    let first: f64 = loss[..2].iter().sum();
    let last: f64 = loss[6..].iter().sum();
    assert!(last < first, "{loss:?}");
}

fn labels(pairs: &[(&str, Stance)]) -> BTreeMap<String, Stance> {
    pairs.iter().map(|(u, l)| (u.to_string(), *l)).collect()
}

#[test]
fn class_median_score_is_antisymmetric_and_order_free() {
    let g = two_cliques();
    let emb = train_embedding(&g, &EmbeddingConfig { dim: 8, ..Default::default() }).unwrap();
    let train = labels(&[("a0", Stance::Yes), ("a1", Stance::Yes), ("a2", Stance::Yes), ("b0", Stance::No), ("b1", Stance::No)]);
    let swapped: BTreeMap<String, Stance> = train.iter().map(|(u, l)| (u.clone(), l.flip())).collect();
    let users: Vec<String> = emb.nodes.iter().cloned().chain(["ghost".to_string()]).collect();
    let s = class_median_transform(&emb, &train, &users).unwrap();
    let t = class_median_transform(&emb, &swapped, &users).unwrap();
    for u in &users {
        assert_eq!(s[u], -t[u]);
    }
    // same members, listed under different ids, give the same medians
    let relabeled = labels(&[("a2", Stance::Yes), ("a0", Stance::Yes), ("a1", Stance::Yes), ("b1", Stance::No), ("b0", Stance::No)]);
    assert_eq!(s, class_median_transform(&emb, &relabeled, &users).unwrap());
    assert!(s["a5"] < 0.0 && s["b5"] > 0.0);
    let only_yes = labels(&[("a0", Stance::Yes)]);
    assert!(class_median_transform(&emb, &only_yes, &users).is_err());
}

#[test]
fn homophily_ramp_separates_network_scores() {
    let ds = generate(&GenConfig { days: 9, ..small_gen(1) }).unwrap();
    let ticks = build_snapshots(&ds, 12).unwrap();
    let cfg = EmbeddingConfig { dim: 16, samples_per_edge: 100, ..Default::default() };
    let timeline = NetworkTimeline::build(&ticks, &ds.labels, &cfg).unwrap();
    let test: Vec<String> = ds.test_labels.keys().cloned().collect();
    let series = timeline.series(&test, i64::MAX);
    let n_ticks = timeline.ticks.len();
    assert!(series.values().all(|s| s.len() == n_ticks));
    let gap = |tick: usize| {
        let mean = |class: Stance| {
            let v: Vec<f64> = test.iter().filter(|u| ds.test_labels[*u] == class).map(|u| series[u].item(tick)[0]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        mean(Stance::No) - mean(Stance::Yes)
    };
    let at_announcement = timeline.ticks.iter().position(|t| t.tick_ts >= ds.announcement_ts).unwrap();
    assert!(gap(n_ticks - 1) > gap(at_announcement) + 0.05, "{} vs {}", gap(n_ticks - 1), gap(at_announcement));
}

#[test]
fn polarity_starts_at_zero_and_diverges() {
    let ds = generate(&GenConfig { days: 9, ..small_gen(2) }).unwrap();
    let ticks = build_snapshots(&ds, 12).unwrap();
    let cfg = EmbeddingConfig { dim: 16, samples_per_edge: 100, ..Default::default() };
    let points = polarity_timeseries(&ticks, &ds.labels, &ds.test_labels, &cfg).unwrap();
    assert_eq!(points[0].score, 0.0);
    assert_eq!(points[1].score, 0.0);
    let last = &points[points.len() - 2..];
    let yes = last.iter().find(|p| p.class == Stance::Yes).unwrap().score;
    let no = last.iter().find(|p| p.class == Stance::No).unwrap().score;
    assert!(yes > 0.0 && no < 0.0, "yes {yes}, no {no}");
}
