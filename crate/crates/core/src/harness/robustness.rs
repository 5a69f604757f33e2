use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::metrics::macro_f1;
use super::nowcast::{
    feature_kernel_candidates, fit_kernels, fit_margins, HarnessConfig, ModelKind, ModelSpec, RunReport, Session,
};
use crate::baselines::FeatureMode;
use crate::data::{ItemSeries, Stance};
use crate::error::{Error, Result};
use crate::kernels::{gram, normalize, KernelMatrix, KernelTag, SubKernel};
use crate::svm::signs;

/// SILP tolerance for the paired clean and noisy refits, so that deltas are
/// not dominated by where the column generation happened to stop.
const REFIT_SILP_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Noise dimensions per user.
    pub k: usize,
    pub runs: usize,
    pub seed: u64,
    /// Replace the Gaussian draws by zeros.
    pub zero_noise: bool,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            k: 25,
            runs: 20,
            seed: 0,
            zero_noise: false,
        }
    }
}

/// Mean change of macro-F1 over evaluation days for one noisy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRun {
    pub run: usize,
    pub model: String,
    pub delta_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessSummary {
    pub model: String,
    pub mean_delta_f1: f64,
    /// Sample standard deviation across runs.
    pub std_delta_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub k: usize,
    pub runs: usize,
    pub seed: u64,
    pub note: String,
    pub summary: Vec<RobustnessSummary>,
    pub deltas: Vec<RobustnessRun>,
    pub clean: Vec<RunReport>,
}

impl RobustnessReport {
    /// `run,model,delta_f1`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("run,model,delta_f1\n");
        for r in &self.deltas {
            s.push_str(&format!("{},{},{}\n", r.run, r.model, r.delta_f1));
        }
        s
    }

    pub fn summary_for(&self, model: &str) -> Option<&RobustnessSummary> {
        self.summary.iter().find(|s| s.model == model)
    }
}

fn noise_vectors(users: &[String], cfg: &RobustnessConfig, run: usize) -> BTreeMap<String, Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (run as u64).wrapping_mul(0xA076_1D64_78BD_642F));
    users
        .iter()
        .map(|u| {
            let v = (0..cfg.k)
                .map(|_| if cfg.zero_noise { 0.0 } else { StandardNormal.sample(&mut rng) })
                .collect();
            (u.clone(), v)
        })
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Adds `k` standard-normal dimensions per user and measures the change in
/// macro-F1 against the clean run, for MCKL (as an extra convolution kernel)
/// and for the aggregate SVM on BOTH features (as extra columns).
///
/// Each day keeps the hyperparameters chosen on clean data.
pub fn robustness_experiment(ds: &crate::data::Dataset, cfg: &HarnessConfig, rcfg: &RobustnessConfig) -> Result<RobustnessReport> {
    if rcfg.runs == 0 {
        return Err(Error::invalid("runs must be positive"));
    }
    let session = Session::new(ds, cfg, true)?;
    let mckl = ModelSpec::new(ModelKind::Mckl, None)?;
    let base = ModelSpec::new(ModelKind::BaselineSvm, Some(FeatureMode::Both))?;
    let models = [mckl, base];
    let hash = cfg.hash();
    let mut clean: Vec<RunReport> = models
        .iter()
        .map(|s| RunReport {
            model: s.name(),
            kind: s.kind,
            mode: s.mode,
            seed: cfg.seed,
            config_hash: hash.clone(),
            notes: Vec::new(),
            days: Vec::new(),
        })
        .collect();
    let everyone: Vec<String> = ds
        .labels
        .keys()
        .chain(ds.test_labels.keys())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .cloned()
        .collect();
    let noise: Vec<BTreeMap<String, Vec<f64>>> = (0..rcfg.runs).map(|r| noise_vectors(&everyone, rcfg, r)).collect();
    // deltas[model][run] summed over days
    let mut sums = vec![vec![0.0; rcfg.runs]; 2];
    let mut days_used = 0usize;
    for d in 0..session.horizon() {
        let Some(mut day) = session.day(d)? else {
            continue;
        };
        days_used += 1;
        let (sel_m, rep_m) = day.evaluate(&session, mckl)?;
        let (sel_b, rep_b) = day.evaluate(&session, base)?;
        clean[0].days.push(rep_m.clone());
        clean[1].days.push(rep_b.clone());
        if rcfg.k == 0 {
            continue;
        }
        let tr = day.train_idx();
        let te = day.test_idx();
        let ys = signs(&day.y);
        let test_y = day.test_y.clone();
        let f1 = |margins: Vec<f64>| -> Result<f64> {
            let pred: Vec<Stance> = margins.iter().map(|&m| Stance::from_margin(m)).collect();
            Ok(macro_f1(&pred, &test_y)?.macro_f1)
        };
        let base_rows = day.features(&session, FeatureMode::Both)?.rows.clone();
        day.prepare(&session, mckl)?;
        let mut tight = cfg.clone();
        tight.silp.eps = cfg.silp.eps.min(REFIT_SILP_EPS);
        let clean_ks: Vec<&KernelMatrix> = day.combined();
        let fit = fit_kernels(&clean_ks, &tr, &ys, sel_m.c, &tight, None)?;
        let clean_m = f1(fit_margins(&fit, &clean_ks, &tr, &te))?;
        for (r, vectors) in noise.iter().enumerate() {
            let series: Vec<ItemSeries> = day
                .all
                .iter()
                .map(|u| ItemSeries::from_items(u.clone(), rcfg.k, vec![(vectors[u].clone(), 0)]))
                .collect::<Result<_>>()?;
            let raw = gram(&series, SubKernel::Linear, None)?;
            let noise_k = if cfg.normalize { normalize(&raw)? } else { raw }.with_tag(KernelTag::Noise);
            let mut ks: Vec<&KernelMatrix> = day.combined();
            ks.push(&noise_k);
            let fit = fit_kernels(&ks, &tr, &ys, sel_m.c, &tight, None)?;
            let delta = f1(fit_margins(&fit, &ks, &tr, &te))? - clean_m;
            log::debug!("day {d} run {r}: noise weight {:.3}, delta {delta:.4}", fit.weights.last().copied().unwrap_or(0.0));
            sums[0][r] += delta;

            let rows: Vec<Vec<f64>> = base_rows
                .iter()
                .zip(&day.all)
                .map(|(row, u)| row.iter().chain(&vectors[u]).copied().collect())
                .collect();
            let gamma = [cfg.grid.gamma[sel_b.cand.max(1) - 1]];
            let cands = feature_kernel_candidates(day.all.clone(), &rows, if sel_b.cand == 0 { &[] } else { &gamma })?;
            let k = &cands.last().expect("one kernel").1;
            let fit = fit_kernels(&[k], &tr, &ys, sel_b.c, cfg, None)?;
            sums[1][r] += f1(fit_margins(&fit, &[k], &tr, &te))? - rep_b.macro_f1;
        }
    }
    if days_used == 0 {
        return Err(Error::invalid("no evaluation day has test users"));
    }
    let mut deltas = Vec::new();
    let mut summary = Vec::new();
    for (m, spec) in models.iter().enumerate() {
        let per_run: Vec<f64> = sums[m].iter().map(|s| s / days_used as f64).collect();
        for (run, &delta_f1) in per_run.iter().enumerate() {
            deltas.push(RobustnessRun {
                run,
                model: spec.name(),
                delta_f1,
            });
        }
        let (mean, std) = mean_std(&per_run);
        summary.push(RobustnessSummary {
            model: spec.name(),
            mean_delta_f1: mean,
            std_delta_f1: std,
        });
    }
    Ok(RobustnessReport {
        k: rcfg.k,
        runs: rcfg.runs,
        seed: rcfg.seed,
        note: "baseline is the aggregate-feature SVM on BOTH features; noise enters MCKL as an extra kernel and the baseline as extra columns".into(),
        summary,
        deltas,
        clean,
    })
}
