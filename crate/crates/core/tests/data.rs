mod common;

use common::small_gen;
use tmkl::data::{load_dataset_dir, SECONDS_PER_DAY};
use tmkl::synth::{generate, GenConfig};

#[test]
fn slice_matches_brute_force_filter() {
    let ds = generate(&GenConfig { days: 9, ..small_gen(4) }).unwrap();
    // the generator announces at a local midnight
    let end = ds.announcement_ts + 4 * SECONDS_PER_DAY;
    let sliced = ds.slice_until(4).unwrap();
    assert_eq!(sliced.tweets.len(), ds.tweets.iter().filter(|t| t.ts <= end).count());
    assert_eq!(sliced.retweets.len(), ds.retweets.iter().filter(|r| r.ts <= end).count());
    assert!(sliced.tweets.len() < ds.tweets.len());
    assert_eq!(sliced.labels, ds.labels);
    assert!(ds.slice_until(9).is_err());
}

#[test]
fn training_set_is_constant_across_days() {
    let ds = generate(&GenConfig { days: 9, ..small_gen(5) }).unwrap();
    for day in 0..9 {
        let text = ds.text_series(ds.day_boundary(day));
        assert!(ds.labels.keys().all(|u| text.contains_key(u)), "day {day}");
    }
}

#[test]
fn written_dataset_loads_back_identically() {
    let ds = generate(&small_gen(6)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    ds.write_dir(dir.path()).unwrap();
    let (back, report) = load_dataset_dir(dir.path(), &Default::default()).unwrap();
    assert_eq!(back, ds);
    assert_eq!(report.tweets, ds.tweets.len());
}
