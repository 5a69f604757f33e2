//! Daily nowcast of MCKL and the temporal text kernel on a small synthetic
//! dataset.

use tmkl::harness::{rolling_nowcast_many, HarnessConfig, ModelKind, ModelSpec};
use tmkl::synth::{generate, GenConfig};

fn main() -> tmkl::Result<()> {
    let ds = generate(&GenConfig { n_train_yes: 80, n_train_no: 80, n_test_yes: 40, n_test_no: 60, ..GenConfig::default() })?;
    let specs = [ModelSpec::new(ModelKind::SvmWt, None)?, ModelSpec::new(ModelKind::Mckl, None)?];
    let out = rolling_nowcast_many(&ds, &specs, &HarnessConfig::default())?;
    for r in &out.reports {
        let f1: Vec<String> = r.days.iter().map(|d| format!("{:.3}", d.macro_f1)).collect();
        println!("{:8} {}", r.model, f1.join(" "));
    }
    if let Some(w) = out.reports[1].days.last().and_then(|d| d.kernel_weights.as_ref()) {
        println!("final MCKL weights {w:?}");
    }
    Ok(())
}
