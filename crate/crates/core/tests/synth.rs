use tmkl::data::{Dataset, Stance, SECONDS_PER_DAY};
use tmkl::synth::{generate, GenConfig};

/// Distance between YES and NO mean tweet vectors over `(lo, hi]`.
fn class_gap(ds: &Dataset, lo: i64, hi: i64) -> f64 {
    let label = |u: &str| ds.labels.get(u).or_else(|| ds.test_labels.get(u)).copied();
    let mut sums = [vec![0.0; ds.d_text], vec![0.0; ds.d_text]];
    let mut counts = [0usize; 2];
    for t in ds.tweets.iter().filter(|t| t.ts > lo && t.ts <= hi) {
        let Some(class) = label(&t.user) else { continue };
        let slot = usize::from(class == Stance::No);
        for (a, x) in sums[slot].iter_mut().zip(t.vector.as_ref().unwrap()) {
            *a += x;
        }
        counts[slot] += 1;
    }
    let mut d = 0.0;
    for k in 0..ds.d_text {
        d += (sums[0][k] / counts[0] as f64 - sums[1][k] / counts[1] as f64).powi(2);
    }
    d.sqrt()
}

#[test]
fn text_classes_separate_after_announcement() {
    let ds = generate(&GenConfig::default()).unwrap();
    let day = |d: usize| ds.day_boundary(d);
    let before = class_gap(&ds, day(0) - SECONDS_PER_DAY, day(0));
    let last = class_gap(&ds, day(7), day(8));
    assert!(last > before + 0.5, "day 0 gap {before}, day 8 gap {last}");
}

#[test]
fn config_round_trips_through_json() {
    let cfg = GenConfig { seed: 3, days: 5, ..GenConfig::default() };
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<GenConfig>(&text).unwrap(), cfg);
}
