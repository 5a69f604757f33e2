//! Generates the default synthetic dataset and writes it to a directory.
//!
//! Usage: synth_dataset [OUT_DIR] [SEED]

use std::path::PathBuf;

use tmkl::synth::{generate, GenConfig};

fn main() -> tmkl::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let seed = args.next().map(|s| s.parse().expect("SEED must be an integer")).unwrap_or(0);
    let ds = generate(&GenConfig { seed, ..GenConfig::default() })?;
    ds.write_dir(&out)?;
    println!(
        "{} tweets, {} retweets, {} training and {} test users in {}",
        ds.tweets.len(),
        ds.retweets.len(),
        ds.labels.len(),
        ds.test_labels.len(),
        out.display()
    );
    Ok(())
}
