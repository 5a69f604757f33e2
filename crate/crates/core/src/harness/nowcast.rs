use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::cv::stratified_folds;
use super::metrics::{macro_f1, ClassMetrics};
use crate::baselines::{aggregate_features, argmax_first, logreg_train, AggregateFeatures, FeatureMode};
use crate::data::{Dataset, ItemSeries, Stance};
use crate::error::{Error, Result};
use crate::graph::{build_snapshots, EmbeddingConfig, NetworkTimeline};
use crate::kernels::{
    gram, gram_temporal, linear_feature_kernel, normalize, rbf_feature_kernel, series_digest, sum_kernels, KernelCache,
    KernelMatrix, KernelTag, SubKernel,
};
use crate::mckl::{silp_solve_from, SilpConfig};
use crate::svm::{rescale_alphas, signs, smo_solve_from, SmoConfig};

/// `10^-3 .. 10^3`, one value per decade.
pub const DEFAULT_GRID: [f64; 7] = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SvmW,
    SvmWt,
    SvmN,
    SvmNt,
    SvmSum,
    Mckl,
    BaselineLr,
    BaselineSvm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] = [
        ModelKind::SvmW,
        ModelKind::SvmWt,
        ModelKind::SvmN,
        ModelKind::SvmNt,
        ModelKind::SvmSum,
        ModelKind::Mckl,
        ModelKind::BaselineLr,
        ModelKind::BaselineSvm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::SvmW => "svm_w",
            ModelKind::SvmWt => "svm_wt",
            ModelKind::SvmN => "svm_n",
            ModelKind::SvmNt => "svm_nt",
            ModelKind::SvmSum => "svm_sum",
            ModelKind::Mckl => "mckl",
            ModelKind::BaselineLr => "baseline_lr",
            ModelKind::BaselineSvm => "baseline_svm",
        }
    }

    /// The only mode a kernel model accepts, or `None` for baselines.
    pub fn fixed_mode(self) -> Option<FeatureMode> {
        match self {
            ModelKind::SvmW | ModelKind::SvmWt => Some(FeatureMode::Text),
            ModelKind::SvmN | ModelKind::SvmNt => Some(FeatureMode::Network),
            ModelKind::SvmSum | ModelKind::Mckl => Some(FeatureMode::Both),
            ModelKind::BaselineLr | ModelKind::BaselineSvm => None,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub mode: FeatureMode,
}

impl ModelSpec {
    /// Checks the model/mode combination; `mode = None` picks the model's
    /// own mode, or BOTH for baselines.
    pub fn new(kind: ModelKind, mode: Option<FeatureMode>) -> Result<Self> {
        let mode = match (kind.fixed_mode(), mode) {
            (Some(fixed), Some(m)) if fixed != m => {
                return Err(Error::invalid(format!("model {kind} requires mode {fixed}, got {m}")))
            }
            (Some(fixed), _) => fixed,
            (None, m) => m.unwrap_or(FeatureMode::Both),
        };
        Ok(ModelSpec { kind, mode })
    }

    pub fn name(&self) -> String {
        match self.kind.fixed_mode() {
            Some(_) => self.kind.to_string(),
            None => format!("{}_{}", self.kind, self.mode.as_str().to_lowercase()),
        }
    }

    fn uses_text_kernels(&self) -> bool {
        matches!(self.kind, ModelKind::SvmW | ModelKind::SvmWt | ModelKind::SvmSum | ModelKind::Mckl)
    }

    fn uses_network(&self) -> bool {
        self.mode != FeatureMode::Text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub c: Vec<f64>,
    /// Widths of the time kernel and of the RBF feature kernel.
    pub gamma: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            c: DEFAULT_GRID.to_vec(),
            gamma: DEFAULT_GRID.to_vec(),
            lambda: DEFAULT_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub seed: u64,
    pub folds: usize,
    pub tick_hours: u32,
    pub embedding: EmbeddingConfig,
    /// Normalise each convolution kernel before training or combining.
    pub normalize: bool,
    pub smo: SmoConfig,
    pub silp: SilpConfig,
    /// SMO iteration cap for fits made during cross-validation only.
    pub cv_max_iter: usize,
    pub grid: Grid,
    /// Evaluate only the first `horizon` days.
    pub horizon: Option<usize>,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 0,
            folds: 5,
            tick_hours: 12,
            embedding: EmbeddingConfig::default(),
            normalize: true,
            smo: SmoConfig::default(),
            silp: SilpConfig::default(),
            cv_max_iter: 100_000,
            grid: Grid::default(),
            horizon: None,
            cache_dir: None,
        }
    }
}

impl HarnessConfig {
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serialisable");
        hex::encode(&Sha256::digest(&bytes)[..8])
    }

    fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::invalid("folds must be at least 2"));
        }
        if self.grid.c.is_empty() || self.grid.gamma.is_empty() || self.grid.lambda.is_empty() {
            return Err(Error::invalid("hyperparameter grids must be non-empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayReport {
    pub day: usize,
    pub until_ts: i64,
    pub n_train: usize,
    pub n_test: usize,
    pub macro_f1: f64,
    pub yes: ClassMetrics,
    pub no: ClassMetrics,
    /// Pooled cross-validated macro-F1 of the chosen hyperparameters.
    pub cv_macro_f1: f64,
    pub hyperparameters: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel_weights: Option<BTreeMap<String, f64>>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub kind: ModelKind,
    pub mode: FeatureMode,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub days: Vec<DayReport>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// `day,n_test,macro_f1,f1_yes,f1_no`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("day,n_test,macro_f1,f1_yes,f1_no\n");
        for d in &self.days {
            s.push_str(&format!("{},{},{},{},{}\n", d.day, d.n_test, d.macro_f1, d.yes.f1, d.no.f1));
        }
        s
    }

    pub fn mean_macro_f1(&self) -> f64 {
        self.days.iter().map(|d| d.macro_f1).sum::<f64>() / self.days.len().max(1) as f64
    }
}

/// Wall-clock time of one model on one day; kept out of the report so
/// reports stay byte-identical across reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub model: String,
    pub day: usize,
    pub seconds: f64,
}

pub fn timings_csv(t: &[Timing]) -> String {
    let mut s = String::from("model,day,seconds\n");
    for x in t {
        s.push_str(&format!("{},{},{:.6}\n", x.model, x.day, x.seconds));
    }
    s
}

/// Pooled CV winner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Selected {
    pub cand: usize,
    pub c: f64,
    pub cv: f64,
}

/// A trained kernel model over training rows of a shared matrix.
pub(crate) struct Fit {
    pub alphas: Vec<f64>,
    coef: Vec<f64>,
    bias: f64,
    pub weights: Vec<f64>,
    pub converged: bool,
}

fn sub_block(k: &KernelMatrix, rows: &[usize], cols: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &i in rows {
        let row = k.row(i);
        out.extend(cols.iter().map(|&j| row[j]));
    }
    out
}

/// Trains on the rows `tr` of `ks`, optionally from a feasible dual start.
pub(crate) fn fit_kernels(
    ks: &[&KernelMatrix],
    tr: &[usize],
    y: &[f64],
    c: f64,
    cfg: &HarnessConfig,
    init: Option<&[f64]>,
) -> Result<Fit> {
    let blocks: Vec<Vec<f64>> = ks.iter().map(|k| sub_block(k, tr, tr)).collect();
    let (sol, weights, converged) = if blocks.len() == 1 {
        let sol = smo_solve_from(&blocks[0], y, c, &cfg.smo, init)?;
        let conv = sol.converged;
        (sol, vec![1.0], conv)
    } else {
        let refs: Vec<&[f64]> = blocks.iter().map(|b| b.as_slice()).collect();
        let s = silp_solve_from(&refs, y, c, &cfg.silp, init)?;
        let conv = s.converged && s.svm.converged;
        (s.svm, s.weights, conv)
    };
    Ok(Fit {
        coef: sol.alphas.iter().zip(y).map(|(a, yi)| a * yi).collect(),
        alphas: sol.alphas,
        bias: sol.bias,
        weights,
        converged,
    })
}

pub(crate) fn fit_margins(fit: &Fit, ks: &[&KernelMatrix], tr: &[usize], rows: &[usize]) -> Vec<f64> {
    let support: Vec<usize> = (0..tr.len()).filter(|&j| fit.coef[j] != 0.0).collect();
    rows.iter()
        .map(|&r| {
            let mut m = 0.0;
            for (k, w) in ks.iter().zip(&fit.weights) {
                let row = k.row(r);
                let mut s = 0.0;
                for &j in &support {
                    s += fit.coef[j] * row[tr[j]];
                }
                m += w * s;
            }
            m + fit.bias
        })
        .collect()
}

/// Grid search over candidate kernel sets and C by pooled k-fold macro-F1.
/// Ties go to the earliest candidate, then the smallest C.
pub(crate) fn cv_select(
    cands: &[Vec<&KernelMatrix>],
    y: &[Stance],
    cs: &[f64],
    cfg: &HarnessConfig,
) -> Result<Selected> {
    let fold_of = stratified_folds(y, cfg.folds, cfg.seed)?;
    let ys = signs(y);
    let mut capped = cfg.clone();
    capped.smo.max_iter = cfg.smo.max_iter.min(cfg.cv_max_iter);
    capped.silp.smo.max_iter = cfg.silp.smo.max_iter.min(cfg.cv_max_iter);
    let cfg = &capped;
    let tasks: Vec<(usize, usize)> = (0..cands.len())
        .flat_map(|a| (0..cfg.folds).map(move |f| (a, f)))
        .collect();
    let results: Vec<Vec<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(a, f)| {
            let tr: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != f).collect();
            let va: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == f).collect();
            let ytr: Vec<f64> = tr.iter().map(|&i| ys[i]).collect();
            // each C starts from the rescaled solution of the previous one
            let mut prev: Option<(Vec<f64>, f64)> = None;
            cs.iter()
                .map(|&c| {
                    if va.is_empty() {
                        return Ok(Vec::new());
                    }
                    let init = prev.as_ref().map(|(a, c0)| rescale_alphas(a, *c0, c));
                    let fit = fit_kernels(&cands[a], &tr, &ytr, c, cfg, init.as_deref())?;
                    let margins = fit_margins(&fit, &cands[a], &tr, &va);
                    prev = Some((fit.alphas, c));
                    Ok(margins)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let mut scores = Vec::with_capacity(cands.len() * cs.len());
    for a in 0..cands.len() {
        for ci in 0..cs.len() {
            let mut pred = vec![Stance::No; y.len()];
            for f in 0..cfg.folds {
                let margins = &results[a * cfg.folds + f][ci];
                let va = (0..y.len()).filter(|&i| fold_of[i] == f);
                for (i, m) in va.zip(margins) {
                    pred[i] = Stance::from_margin(*m);
                }
            }
            scores.push(macro_f1(&pred, y)?.macro_f1);
        }
    }
    let best = argmax_first(&scores);
    Ok(Selected {
        cand: best / cs.len(),
        c: cs[best % cs.len()],
        cv: scores[best],
    })
}

/// Dataset-level state shared by every day and model.
pub(crate) struct Session<'a> {
    pub ds: &'a Dataset,
    pub cfg: &'a HarnessConfig,
    pub timeline: Option<NetworkTimeline>,
    cache: Option<KernelCache>,
}

impl<'a> Session<'a> {
    pub fn new(ds: &'a Dataset, cfg: &'a HarnessConfig, needs_network: bool) -> Result<Self> {
        cfg.validate()?;
        ds.validate()?;
        let timeline = if needs_network {
            let ticks = build_snapshots(ds, cfg.tick_hours)?;
            let emb = EmbeddingConfig {
                seed: cfg.seed,
                ..cfg.embedding
            };
            let t = NetworkTimeline::build(&ticks, &ds.labels, &emb)?;
            log::info!("embedded {} snapshots ({} skipped)", t.ticks.len(), t.skipped.len());
            Some(t)
        } else {
            None
        };
        let cache = cfg.cache_dir.as_ref().map(KernelCache::new).transpose()?;
        Ok(Session {
            ds,
            cfg,
            timeline,
            cache,
        })
    }

    pub fn horizon(&self) -> usize {
        self.cfg
            .horizon
            .unwrap_or(self.ds.horizon_days)
            .min(self.ds.horizon_days)
    }

    /// Plain and temporal Gram matrices of `series`, cached by content hash.
    fn conv_grams(
        &self,
        series: &[ItemSeries],
        plain: bool,
        gammas: &[f64],
        tags: (KernelTag, KernelTag),
    ) -> Result<(Option<KernelMatrix>, Vec<KernelMatrix>)> {
        let norm = self.cfg.normalize;
        let finish = |k: KernelMatrix, tag: KernelTag| -> Result<KernelMatrix> {
            let k = if norm { normalize(&k)? } else { k };
            Ok(k.with_tag(tag))
        };
        let lookup = |time: Option<SubKernel>, tag: KernelTag| -> (String, Option<KernelMatrix>) {
            let key = series_digest(series, SubKernel::Linear, time, norm);
            let hit = self.cache.as_ref().and_then(|c| c.get(&key, tag));
            (key, hit)
        };
        let store = |key: &str, k: &KernelMatrix| -> Result<()> {
            match &self.cache {
                Some(c) => c.put(key, k),
                None => Ok(()),
            }
        };
        let w = if plain {
            let (key, hit) = lookup(None, tags.0);
            Some(match hit {
                Some(k) => k,
                None => {
                    let k = finish(gram(series, SubKernel::Linear, None)?, tags.0)?;
                    store(&key, &k)?;
                    k
                }
            })
        } else {
            None
        };
        let looked: Vec<(String, Option<KernelMatrix>)> = gammas
            .iter()
            .map(|&g| lookup(Some(SubKernel::Rbf { gamma: g }), tags.1))
            .collect();
        let wt = if looked.iter().all(|(_, h)| h.is_some()) {
            looked.into_iter().map(|(_, h)| h.expect("checked")).collect()
        } else {
            let raw = gram_temporal(series, SubKernel::Linear, gammas)?;
            let mut out = Vec::with_capacity(raw.len());
            for (k, (key, _)) in raw.into_iter().zip(&looked) {
                let k = finish(k, tags.1)?;
                store(key, &k)?;
                out.push(k);
            }
            out
        };
        Ok((w, wt))
    }

    /// Eligible users and their series for `day`, or `None` when no test
    /// user has tweeted yet.
    pub fn day(&self, day: usize) -> Result<Option<Day>> {
        let until = self.ds.day_boundary(day);
        let text = self.ds.text_series(until);
        let train: Vec<String> = self.ds.labels.keys().filter(|u| text.contains_key(*u)).cloned().collect();
        let test: Vec<String> = self
            .ds
            .test_labels
            .keys()
            .filter(|u| text.contains_key(*u))
            .cloned()
            .collect();
        if test.is_empty() {
            return Ok(None);
        }
        let y: Vec<Stance> = train.iter().map(|u| self.ds.labels[u]).collect();
        if !(y.contains(&Stance::Yes) && y.contains(&Stance::No)) {
            return Err(Error::MissingClass(format!("training users on day {day}")));
        }
        let test_y = test.iter().map(|u| self.ds.test_labels[u]).collect();
        let all: Vec<String> = train.iter().chain(&test).cloned().collect();
        Ok(Some(Day {
            day,
            until,
            train,
            y,
            test,
            test_y,
            all,
            text,
            w: None,
            wt: None,
            n: None,
            nt: None,
            sum: None,
            features: BTreeMap::new(),
            feature_kernels: BTreeMap::new(),
            selected: BTreeMap::new(),
        }))
    }
}

pub(crate) type FeatureKernels = Vec<(BTreeMap<String, Value>, KernelMatrix)>;

/// Users, representations and kernels of one evaluation day.
pub(crate) struct Day {
    pub day: usize,
    pub until: i64,
    pub train: Vec<String>,
    pub y: Vec<Stance>,
    pub test: Vec<String>,
    pub test_y: Vec<Stance>,
    /// Training users followed by test users; the row order of every kernel.
    pub all: Vec<String>,
    text: BTreeMap<String, ItemSeries>,
    w: Option<KernelMatrix>,
    wt: Option<Vec<KernelMatrix>>,
    n: Option<KernelMatrix>,
    nt: Option<Vec<KernelMatrix>>,
    sum: Option<KernelMatrix>,
    features: BTreeMap<FeatureMode, AggregateFeatures>,
    feature_kernels: BTreeMap<FeatureMode, FeatureKernels>,
    selected: BTreeMap<ModelSpec, (Selected, DayReport)>,
}

fn hyper(pairs: &[(&str, Value)]) -> BTreeMap<String, Value> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl Day {
    pub fn train_idx(&self) -> Vec<usize> {
        (0..self.train.len()).collect()
    }

    pub fn test_idx(&self) -> Vec<usize> {
        (self.train.len()..self.all.len()).collect()
    }

    fn ensure_text(&mut self, s: &Session) -> Result<()> {
        if self.w.is_none() {
            let start = Instant::now();
            let series: Vec<ItemSeries> = self.all.iter().map(|u| self.text[u].clone()).collect();
            let (w, wt) = s.conv_grams(&series, true, &s.cfg.grid.gamma, (KernelTag::W, KernelTag::Wt))?;
            log::debug!("day {}: text kernels in {:.2?}", self.day, start.elapsed());
            self.w = w;
            self.wt = Some(wt);
        }
        Ok(())
    }

    fn ensure_network(&mut self, s: &Session) -> Result<()> {
        if self.n.is_none() {
            let tl = s.timeline.as_ref().expect("session built with network");
            let series: Vec<ItemSeries> = tl.series(&self.all, self.until).into_values().collect();
            // series come back keyed by user; restore kernel row order
            let by_user: BTreeMap<String, ItemSeries> = series.into_iter().map(|x| (x.user_id.clone(), x)).collect();
            let series: Vec<ItemSeries> = self.all.iter().map(|u| by_user[u].clone()).collect();
            if series.first().is_some_and(|x| x.is_empty()) {
                return Err(Error::invalid(format!(
                    "no usable retweet snapshot by day {} (needs edges and embedded users of both classes)",
                    self.day
                )));
            }
            let start = Instant::now();
            let (n, nt) = s.conv_grams(&series, true, &s.cfg.grid.gamma, (KernelTag::N, KernelTag::Nt))?;
            log::debug!("day {}: network kernels in {:.2?}", self.day, start.elapsed());
            self.n = n;
            self.nt = Some(nt);
        }
        Ok(())
    }

    pub fn features(&mut self, s: &Session, mode: FeatureMode) -> Result<&AggregateFeatures> {
        if !self.features.contains_key(&mode) {
            let tick = match mode {
                FeatureMode::Text => None,
                _ => s.timeline.as_ref().and_then(|t| t.latest(self.until)),
            };
            let f = aggregate_features(&self.text, tick, &self.all, mode)?;
            self.features.insert(mode, f);
        }
        Ok(&self.features[&mode])
    }

    fn ensure_feature_kernels(&mut self, s: &Session, mode: FeatureMode) -> Result<()> {
        if !self.feature_kernels.contains_key(&mode) {
            let users = self.all.clone();
            let rows = self.features(s, mode)?.rows.clone();
            let ks = feature_kernel_candidates(users, &rows, &s.cfg.grid.gamma)?;
            self.feature_kernels.insert(mode, ks);
        }
        Ok(())
    }

    /// Chosen hyperparameters and clean report of `spec`, evaluated once.
    pub fn evaluate(&mut self, s: &Session, spec: ModelSpec) -> Result<(Selected, DayReport)> {
        if let Some(r) = self.selected.get(&spec) {
            return Ok(r.clone());
        }
        let cfg = s.cfg;
        let tr = self.train_idx();
        let te = self.test_idx();
        let ys = signs(&self.y);
        let out = match spec.kind {
            ModelKind::BaselineLr => {
                let rows = self.features(s, spec.mode)?.rows.clone();
                let xtr = &rows[..tr.len()];
                let (model, cv) = logreg_train(xtr, &self.y, &cfg.grid.lambda, cfg.folds, cfg.seed)?;
                let margins: Vec<f64> = rows[tr.len()..].iter().map(|x| model.margin(x)).collect();
                let sel = Selected {
                    cand: cfg.grid.lambda.iter().position(|&l| l == model.lambda).unwrap_or(0),
                    c: model.lambda,
                    cv,
                };
                let rep = self.report(
                    margins,
                    cv,
                    hyper(&[("lambda", model.lambda.into())]),
                    None,
                    model.converged,
                )?;
                (sel, rep)
            }
            _ => {
                self.prepare(s, spec)?;
                let (cands, labels, tags) = self.candidates(s, spec)?;
                let start = Instant::now();
                let sel = cv_select(&cands, &self.y, &cfg.grid.c, cfg)?;
                log::debug!("day {}: {} selection over {} candidates in {:.2?}", self.day, spec.name(), cands.len(), start.elapsed());
                let ks = &cands[sel.cand];
                let fit = fit_kernels(ks, &tr, &ys, sel.c, cfg, None)?;
                let margins = fit_margins(&fit, ks, &tr, &te);
                let mut hp = labels[sel.cand].clone();
                hp.insert("C".into(), sel.c.into());
                let weights = (spec.kind == ModelKind::Mckl)
                    .then(|| tags.iter().map(|t| t.to_string()).zip(fit.weights.iter().copied()).collect());
                let rep = self.report(margins, sel.cv, hp, weights, fit.converged)?;
                (sel, rep)
            }
        };
        self.selected.insert(spec, out.clone());
        Ok(out)
    }

    /// Computes whatever `spec` needs before [`Day::candidates`].
    pub fn prepare(&mut self, s: &Session, spec: ModelSpec) -> Result<()> {
        match spec.kind {
            ModelKind::SvmW | ModelKind::SvmWt => self.ensure_text(s)?,
            ModelKind::SvmN | ModelKind::SvmNt => self.ensure_network(s)?,
            ModelKind::SvmSum | ModelKind::Mckl => {
                self.ensure_text(s)?;
                self.ensure_network(s)?;
                // time widths come from the single-kernel searches of the same day
                for k in [ModelKind::SvmWt, ModelKind::SvmNt] {
                    self.evaluate(s, ModelSpec::new(k, None)?)?;
                }
                if spec.kind == ModelKind::SvmSum && self.sum.is_none() {
                    let owned: Vec<KernelMatrix> = self.combined().into_iter().cloned().collect();
                    self.sum = Some(sum_kernels(&owned)?);
                }
            }
            ModelKind::BaselineSvm => self.ensure_feature_kernels(s, spec.mode)?,
            ModelKind::BaselineLr => return Err(Error::invalid("logistic regression has no kernel")),
        }
        Ok(())
    }

    /// Candidate kernel sets with their hyperparameter labels.
    #[allow(clippy::type_complexity)]
    pub fn candidates(
        &self,
        s: &Session,
        spec: ModelSpec,
    ) -> Result<(Vec<Vec<&KernelMatrix>>, Vec<BTreeMap<String, Value>>, Vec<KernelTag>)> {
        let gammas = &s.cfg.grid.gamma;
        let gamma_labels = |key: &str| -> Vec<BTreeMap<String, Value>> {
            gammas.iter().map(|&g| hyper(&[(key, g.into())])).collect()
        };
        Ok(match spec.kind {
            ModelKind::SvmW => (vec![vec![self.w.as_ref().unwrap()]], vec![BTreeMap::new()], vec![KernelTag::W]),
            ModelKind::SvmN => (vec![vec![self.n.as_ref().unwrap()]], vec![BTreeMap::new()], vec![KernelTag::N]),
            ModelKind::SvmWt => (
                self.wt.as_ref().unwrap().iter().map(|k| vec![k]).collect(),
                gamma_labels("gamma_time"),
                vec![KernelTag::Wt],
            ),
            ModelKind::SvmNt => (
                self.nt.as_ref().unwrap().iter().map(|k| vec![k]).collect(),
                gamma_labels("gamma_time"),
                vec![KernelTag::Nt],
            ),
            ModelKind::SvmSum | ModelKind::Mckl => {
                let (gw, gn) = self.time_choice();
                let label = hyper(&[
                    ("gamma_time_text", gammas[gw].into()),
                    ("gamma_time_network", gammas[gn].into()),
                ]);
                if spec.kind == ModelKind::Mckl {
                    (
                        vec![self.combined()],
                        vec![label],
                        vec![KernelTag::W, KernelTag::Wt, KernelTag::N, KernelTag::Nt],
                    )
                } else {
                    (vec![vec![self.sum.as_ref().unwrap()]], vec![label], vec![KernelTag::Sum])
                }
            }
            ModelKind::BaselineSvm => {
                let ks = &self.feature_kernels[&spec.mode];
                (
                    ks.iter().map(|(_, k)| vec![k]).collect(),
                    ks.iter().map(|(l, _)| l.clone()).collect(),
                    vec![KernelTag::Feature],
                )
            }
            ModelKind::BaselineLr => return Err(Error::invalid("logistic regression has no kernel")),
        })
    }

    /// Grid indices of the time widths chosen for the text and network kernels.
    fn time_choice(&self) -> (usize, usize) {
        let pick = |k: ModelKind| self.selected[&ModelSpec::new(k, None).expect("fixed mode")].0.cand;
        (pick(ModelKind::SvmWt), pick(ModelKind::SvmNt))
    }

    /// `K_w, K_wt, K_n, K_nt` at the chosen time widths.
    pub fn combined(&self) -> Vec<&KernelMatrix> {
        let (gw, gn) = self.time_choice();
        vec![
            self.w.as_ref().unwrap(),
            &self.wt.as_ref().unwrap()[gw],
            self.n.as_ref().unwrap(),
            &self.nt.as_ref().unwrap()[gn],
        ]
    }

    fn report(
        &self,
        margins: Vec<f64>,
        cv: f64,
        hyperparameters: BTreeMap<String, Value>,
        kernel_weights: Option<BTreeMap<String, f64>>,
        converged: bool,
    ) -> Result<DayReport> {
        let pred: Vec<Stance> = margins.iter().map(|&m| Stance::from_margin(m)).collect();
        let f = macro_f1(&pred, &self.test_y)?;
        Ok(DayReport {
            day: self.day,
            until_ts: self.until,
            n_train: self.train.len(),
            n_test: self.test.len(),
            macro_f1: f.macro_f1,
            yes: f.yes,
            no: f.no,
            cv_macro_f1: cv,
            hyperparameters,
            kernel_weights,
            converged,
        })
    }
}

/// Linear kernel, then one RBF kernel per gamma.
pub(crate) fn feature_kernel_candidates(users: Vec<String>, rows: &[Vec<f64>], gammas: &[f64]) -> Result<FeatureKernels> {
    let mut out = vec![(
        hyper(&[("kernel", "linear".into())]),
        linear_feature_kernel(users.clone(), rows)?,
    )];
    for &g in gammas {
        out.push((
            hyper(&[("kernel", "rbf".into()), ("gamma", g.into())]),
            rbf_feature_kernel(users.clone(), rows, g)?,
        ));
    }
    Ok(out)
}

/// Output of [`rolling_nowcast_many`].
#[derive(Debug, Clone, PartialEq)]
pub struct NowcastOutput {
    pub reports: Vec<RunReport>,
    pub timings: Vec<Timing>,
}

/// Runs several models over the same days, sharing representations and
/// kernels between them.
pub fn rolling_nowcast_many(ds: &Dataset, specs: &[ModelSpec], cfg: &HarnessConfig) -> Result<NowcastOutput> {
    if specs.is_empty() {
        return Err(Error::invalid("no models requested"));
    }
    let session = Session::new(ds, cfg, specs.iter().any(|s| s.uses_network()))?;
    let hash = cfg.hash();
    let mut reports: Vec<RunReport> = specs
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
    let mut timings = Vec::new();
    for d in 0..session.horizon() {
        let Some(mut day) = session.day(d)? else {
            for r in &mut reports {
                r.notes.push(format!("day {d} skipped: no test user has tweeted yet"));
            }
            continue;
        };
        log::info!("day {d}: {} train, {} test users", day.train.len(), day.test.len());
        // text kernels first so their cost is not charged to whichever model comes first
        if specs.iter().any(|s| s.uses_text_kernels()) {
            day.ensure_text(&session)?;
        }
        for (spec, report) in specs.iter().zip(&mut reports) {
            let start = Instant::now();
            let (_, rep) = day.evaluate(&session, *spec)?;
            timings.push(Timing {
                model: spec.name(),
                day: d,
                seconds: start.elapsed().as_secs_f64(),
            });
            report.days.push(rep);
        }
    }
    Ok(NowcastOutput { reports, timings })
}

/// Daily retraining and evaluation of one model.
pub fn rolling_nowcast(ds: &Dataset, spec: ModelSpec, cfg: &HarnessConfig) -> Result<RunReport> {
    Ok(rolling_nowcast_many(ds, &[spec], cfg)?.reports.remove(0))
}
