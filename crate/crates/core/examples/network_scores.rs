//! Embeds retweet snapshots of a synthetic dataset and prints how far apart
//! the classes' mean class-median scores drift over time.

use tmkl::data::Stance;
use tmkl::graph::{build_snapshots, EmbeddingConfig, NetworkTimeline};
use tmkl::synth::{generate, GenConfig};

fn main() -> tmkl::Result<()> {
    let ds = generate(&GenConfig { n_train_yes: 60, n_train_no: 60, n_test_yes: 40, n_test_no: 40, ..GenConfig::default() })?;
    let ticks = build_snapshots(&ds, 12)?;
    let timeline = NetworkTimeline::build(&ticks, &ds.labels, &EmbeddingConfig::default())?;
    let users: Vec<String> = ds.test_labels.keys().cloned().collect();
    let series = timeline.series(&users, i64::MAX);
    println!("tick_ts,mean_yes,mean_no");
    for (t, tick) in timeline.ticks.iter().enumerate() {
        let mean = |class: Stance| {
            let v: Vec<f64> = users.iter().filter(|u| ds.test_labels[*u] == class).map(|u| series[u].item(t)[0]).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        println!("{},{:.4},{:.4}", tick.tick_ts, mean(Stance::Yes), mean(Stance::No));
    }
    Ok(())
}
