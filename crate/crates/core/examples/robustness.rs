//! Change in macro-F1 when random dimensions are appended to every user.

use tmkl::harness::{robustness_experiment, HarnessConfig, RobustnessConfig};
use tmkl::synth::{generate, GenConfig};

fn main() -> tmkl::Result<()> {
    let ds = generate(&GenConfig { n_train_yes: 80, n_train_no: 80, n_test_yes: 40, n_test_no: 60, days: 5, ..GenConfig::default() })?;
    let rep = robustness_experiment(&ds, &HarnessConfig::default(), &RobustnessConfig { runs: 5, ..Default::default() })?;
    for s in &rep.summary {
        println!("{:18} mean {:+.4}  std {:.4}", s.model, s.mean_delta_f1, s.std_delta_f1);
    }
    Ok(())
}
