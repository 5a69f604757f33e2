//! Seed-averaged daily macro-F1 of the kernel models and the aggregate
//! baselines on synthetic data.
//!
//! Usage: replication [SEEDS] [KEY=VALUE ...]
//! where each KEY=VALUE overrides a generator setting.

use std::time::Instant;

use tmkl::baselines::FeatureMode;
use tmkl::harness::{rolling_nowcast_many, HarnessConfig, ModelKind, ModelSpec};
use tmkl::synth::{generate, GenConfig};

fn main() -> tmkl::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map(|s| s.parse().expect("SEEDS must be an integer")).unwrap_or(5);
    let mut gen = serde_json::to_value(GenConfig::default()).expect("serialisable");
    for kv in args {
        let (k, v) = kv.split_once('=').expect("overrides look like KEY=VALUE");
        gen[k] = serde_json::from_str(v).expect("override values are JSON");
    }
    let specs = vec![
        ModelSpec::new(ModelKind::SvmW, None)?,
        ModelSpec::new(ModelKind::SvmWt, None)?,
        ModelSpec::new(ModelKind::SvmN, None)?,
        ModelSpec::new(ModelKind::SvmNt, None)?,
        ModelSpec::new(ModelKind::Mckl, None)?,
        ModelSpec::new(ModelKind::BaselineSvm, Some(FeatureMode::Text))?,
        ModelSpec::new(ModelKind::BaselineSvm, Some(FeatureMode::Network))?,
    ];
    let start = Instant::now();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for seed in 0..seeds {
        gen["seed"] = seed.into();
        let cfg: GenConfig = serde_json::from_value(gen.clone()).expect("valid generator settings");
        let ds = generate(&cfg)?;
        let h = HarnessConfig { seed, ..HarnessConfig::default() };
        let out = rolling_nowcast_many(&ds, &specs, &h)?;
        for (i, r) in out.reports.iter().enumerate() {
            let f1: Vec<f64> = r.days.iter().map(|d| d.macro_f1).collect();
            if sums.len() <= i {
                sums.push(vec![0.0; f1.len()]);
            }
            sums[i].iter_mut().zip(&f1).for_each(|(s, v)| *s += v);
        }
        eprintln!("seed {seed} done after {:.0?}", start.elapsed());
    }
    for (spec, s) in specs.iter().zip(&sums) {
        let days: Vec<f64> = s.iter().map(|v| v / seeds as f64).collect();
        let mean = days.iter().sum::<f64>() / days.len() as f64;
        let cells: Vec<String> = days.iter().map(|v| format!("{v:.3}")).collect();
        println!("{:22} mean {mean:.3} | {}", spec.name(), cells.join(" "));
    }
    Ok(())
}
