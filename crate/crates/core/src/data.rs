//! Domain types, dataset loading and temporal slicing.
//!
//! A [`Dataset`] holds every tweet and retweet event together with the
//! train/test/seed label maps. Evaluation happens at local midnights; the
//! boundary for day `d` is the last local midnight at or before the
//! announcement, shifted by `d` days.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::EmbeddingTable;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// Binary stance. Solvers use `YES -> +1`, `NO -> -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stance {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl Stance {
    pub fn sign(self) -> f64 {
        match self {
            Stance::Yes => 1.0,
            Stance::No => -1.0,
        }
    }

    pub fn flip(self) -> Stance {
        match self {
            Stance::Yes => Stance::No,
            Stance::No => Stance::Yes,
        }
    }

    /// Sign of a decision value. Zero maps to NO, the majority class.
    pub fn from_margin(margin: f64) -> Stance {
        if margin > 0.0 {
            Stance::Yes
        } else {
            Stance::No
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Yes => "YES",
            Stance::No => "NO",
        }
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "YES" => Ok(Stance::Yes),
            "NO" => Ok(Stance::No),
            other => Err(Error::invalid(format!("unknown stance label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetEvent {
    pub user: String,
    pub ts: i64,
    /// Raw tokens, when the tweet arrived as text.
    pub tokens: Option<Vec<String>>,
    /// Dense representation; resolved from tokens when an embedding table is given.
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetweetEvent {
    pub ts: i64,
    /// The retweeting user.
    pub src: String,
    /// The retweeted account.
    pub dst: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tweets: Vec<TweetEvent>,
    pub retweets: Vec<RetweetEvent>,
    pub labels: BTreeMap<String, Stance>,
    pub test_labels: BTreeMap<String, Stance>,
    pub seeds: BTreeMap<String, Stance>,
    pub announcement_ts: i64,
    pub horizon_days: usize,
    pub utc_offset_hours: i32,
    pub d_text: usize,
    /// Inclusive end of the observation window when this is a slice.
    pub until_ts: Option<i64>,
}

/// Ordered `(vector, timestamp)` items of one user, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSeries {
    pub user_id: String,
    dim: usize,
    values: Vec<f64>,
    timestamps: Vec<i64>,
}

impl ItemSeries {
    pub fn new(user_id: impl Into<String>, dim: usize) -> Self {
        ItemSeries {
            user_id: user_id.into(),
            dim,
            values: Vec::new(),
            timestamps: Vec::new(),
        }
    }

    /// Builds a series from unordered items; items are stably sorted by timestamp.
    pub fn from_items(user_id: impl Into<String>, dim: usize, mut items: Vec<(Vec<f64>, i64)>) -> Result<Self> {
        items.sort_by_key(|(_, ts)| *ts);
        let mut s = ItemSeries::new(user_id, dim);
        for (v, ts) in items {
            s.push(&v, ts)?;
        }
        Ok(s)
    }

    pub fn push(&mut self, vector: &[f64], ts: i64) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        if let Some(&last) = self.timestamps.last() {
            if ts < last {
                return Err(Error::invalid(format!(
                    "items of `{}` must be pushed in timestamp order",
                    self.user_id
                )));
            }
        }
        self.values.extend_from_slice(vector);
        self.timestamps.push(ts);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn item(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn ts(&self, i: usize) -> i64 {
        self.timestamps[i]
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn items(&self) -> impl Iterator<Item = (&[f64], i64)> + '_ {
        (0..self.len()).map(move |i| (self.item(i), self.ts(i)))
    }

    /// Prefix of the series with timestamps `<= until`.
    pub fn truncated(&self, until: i64) -> ItemSeries {
        let keep = self.timestamps.partition_point(|&t| t <= until);
        ItemSeries {
            user_id: self.user_id.clone(),
            dim: self.dim,
            values: self.values[..keep * self.dim].to_vec(),
            timestamps: self.timestamps[..keep].to_vec(),
        }
    }
}

/// Input file locations. Only `tweets` is mandatory.
#[derive(Debug, Clone, Default)]
pub struct DatasetPaths {
    pub tweets: PathBuf,
    pub retweets: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

impl DatasetPaths {
    /// Standard file names inside `dir`; optional files are used only if present.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        DatasetPaths {
            tweets: dir.join("tweets.jsonl"),
            retweets: opt("retweets.csv"),
            labels: opt("labels.csv"),
            test_labels: opt("test_labels.csv"),
            seeds: opt("seeds.csv"),
            embeddings: opt("embeddings.tsv"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub tweets: usize,
    pub retweets: usize,
    pub skipped_tokens: usize,
    /// Users whose tweets contained no token found in the embedding table.
    pub flagged_users: BTreeSet<String>,
}

#[derive(Deserialize)]
struct RawTweet {
    user: String,
    ts: i64,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    vec: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct TokenTweetOut<'a> {
    user: &'a str,
    ts: i64,
    tokens: &'a [String],
}

#[derive(Serialize)]
struct VecTweetOut<'a> {
    user: &'a str,
    ts: i64,
    vec: &'a [f64],
}

fn config_value<T: FromStr>(config: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match config.get(key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("config key `{key}` has invalid value `{v}`"))),
    }
}

/// Loads and validates a dataset.
///
/// Recognised config keys: `announcement_ts` (required), `horizon_days`
/// (default 9), `utc_offset_hours` (default 3), `d_text`.
pub fn load_dataset(paths: &DatasetPaths, config: &BTreeMap<String, String>) -> Result<(Dataset, LoadReport)> {
    let announcement_ts: i64 = config_value(config, "announcement_ts")?
        .ok_or_else(|| Error::invalid("config key `announcement_ts` is required"))?;
    let horizon_days: usize = config_value(config, "horizon_days")?.unwrap_or(9);
    let utc_offset_hours: i32 = config_value(config, "utc_offset_hours")?.unwrap_or(3);

    let table = match &paths.embeddings {
        Some(p) => Some(EmbeddingTable::load_tsv(p)?),
        None => None,
    };
    let mut d_text: Option<usize> = config_value(config, "d_text")?;
    if let (Some(d), Some(t)) = (d_text, &table) {
        if d != t.dim() {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: t.dim(),
            });
        }
    }
    if d_text.is_none() {
        d_text = table.as_ref().map(|t| t.dim());
    }

    let mut report = LoadReport::default();
    let file_name = paths.tweets.display().to_string();
    let content = fs::read_to_string(&paths.tweets).map_err(|e| Error::io(&paths.tweets, e))?;
    let mut tweets = Vec::new();
    // users -> (tweets, tweets with at least one resolved token)
    let mut resolution: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (lineno, line) in content.lines().enumerate() {
        let line_no = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            file: file_name.clone(),
            line: line_no,
            message,
        };
        let raw: RawTweet = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if raw.ts <= 0 {
            return Err(parse_err(format!("timestamp must be positive, got {}", raw.ts)));
        }
        let vector = match (&raw.tokens, raw.vec) {
            (None, None) => return Err(parse_err("tweet needs `tokens` or `vec`".into())),
            (_, Some(v)) => {
                let d = *d_text.get_or_insert(v.len());
                if v.len() != d {
                    return Err(parse_err(format!("vector has dimension {}, expected {d}", v.len())));
                }
                Some(v)
            }
            (Some(tokens), None) => table.as_ref().map(|t| {
                let (v, found, missing) = t.tweet_vector_counted(tokens);
                report.skipped_tokens += missing;
                let entry = resolution.entry(raw.user.clone()).or_default();
                entry.0 += 1;
                if found > 0 {
                    entry.1 += 1;
                }
                v
            }),
        };
        tweets.push(TweetEvent {
            user: raw.user,
            ts: raw.ts,
            tokens: raw.tokens,
            vector,
        });
    }
    report.flagged_users = resolution
        .into_iter()
        .filter(|(_, (_, ok))| *ok == 0)
        .map(|(u, _)| u)
        .collect();
    tweets.sort_by_key(|t| t.ts);

    let mut retweets = match &paths.retweets {
        Some(p) => read_retweets(p)?,
        None => Vec::new(),
    };
    retweets.sort_by_key(|r| r.ts);

    let read_opt = |p: &Option<PathBuf>| -> Result<BTreeMap<String, Stance>> {
        match p {
            Some(p) => read_labels(p),
            None => Ok(BTreeMap::new()),
        }
    };
    report.tweets = tweets.len();
    report.retweets = retweets.len();
    let ds = Dataset {
        tweets,
        retweets,
        labels: read_opt(&paths.labels)?,
        test_labels: read_opt(&paths.test_labels)?,
        seeds: read_opt(&paths.seeds)?,
        announcement_ts,
        horizon_days,
        utc_offset_hours,
        d_text: d_text.unwrap_or(50),
        until_ts: None,
    };
    ds.validate()?;
    Ok((ds, report))
}

fn csv_reader(path: &Path) -> Result<(csv::Reader<fs::File>, csv::StringRecord)> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(path, e))?
        .clone();
    Ok((rdr, headers))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: e.to_string(),
    }
}

fn column(headers: &csv::StringRecord, path: &Path, name: &str) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Parse {
        file: path.display().to_string(),
        line: 1,
        message: format!("missing column `{name}`"),
    })
}

pub fn read_retweets(path: &Path) -> Result<Vec<RetweetEvent>> {
    let (mut rdr, headers) = csv_reader(path)?;
    let (c_ts, c_src, c_dst) = (
        column(&headers, path, "ts")?,
        column(&headers, path, "src")?,
        column(&headers, path, "dst")?,
    );
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::Parse {
            file: path.display().to_string(),
            line,
            message,
        };
        let get = |c: usize| rec.get(c).ok_or_else(|| bad(format!("missing field {c}")));
        let ts: i64 = get(c_ts)?
            .trim()
            .parse()
            .map_err(|_| bad("timestamp is not an integer".into()))?;
        let src = get(c_src)?.trim().to_string();
        let dst = get(c_dst)?.trim().to_string();
        if src == dst {
            return Err(bad(format!("self-retweet by `{src}`")));
        }
        out.push(RetweetEvent { ts, src, dst });
    }
    Ok(out)
}

pub fn read_labels(path: &Path) -> Result<BTreeMap<String, Stance>> {
    let (mut rdr, headers) = csv_reader(path)?;
    let (c_id, c_label) = (column(&headers, path, "id")?, column(&headers, path, "label")?);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let bad = |message: String| Error::Parse {
            file: path.display().to_string(),
            line,
            message,
        };
        let id = rec.get(c_id).ok_or_else(|| bad("missing id".into()))?.trim().to_string();
        let label: Stance = rec
            .get(c_label)
            .ok_or_else(|| bad("missing label".into()))?
            .parse()
            .map_err(|e: Error| bad(e.to_string()))?;
        out.insert(id, label);
    }
    Ok(out)
}

pub fn labels_csv(labels: &BTreeMap<String, Stance>) -> String {
    let mut s = String::from("id,label\n");
    for (id, l) in labels {
        s.push_str(&format!("{id},{l}\n"));
    }
    s
}

/// Writes `bytes` to a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// The on-disk representation of a dataset, one string per file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFiles {
    pub tweets_jsonl: String,
    pub retweets_csv: String,
    pub labels_csv: String,
    pub test_labels_csv: String,
    pub seeds_csv: String,
    /// Flat `key=value` metadata consumed by [`load_dataset`].
    pub dataset_conf: String,
}

impl DatasetFiles {
    pub fn entries(&self) -> [(&'static str, &str); 6] {
        [
            ("tweets.jsonl", &self.tweets_jsonl),
            ("retweets.csv", &self.retweets_csv),
            ("labels.csv", &self.labels_csv),
            ("test_labels.csv", &self.test_labels_csv),
            ("seeds.csv", &self.seeds_csv),
            ("dataset.conf", &self.dataset_conf),
        ]
    }
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_days == 0 {
            return Err(Error::invalid("horizon_days must be at least 1"));
        }
        if let Some(u) = self.labels.keys().find(|u| self.test_labels.contains_key(*u)) {
            return Err(Error::invalid(format!("user `{u}` appears in both train and test labels")));
        }
        for t in &self.tweets {
            if t.ts <= 0 {
                return Err(Error::invalid(format!("non-positive timestamp for `{}`", t.user)));
            }
            if let Some(v) = &t.vector {
                if v.len() != self.d_text {
                    return Err(Error::DimensionMismatch {
                        expected: self.d_text,
                        found: v.len(),
                    });
                }
            }
        }
        if let Some(r) = self.retweets.iter().find(|r| r.src == r.dst) {
            return Err(Error::invalid(format!("self-retweet by `{}`", r.src)));
        }
        let ts = self.tweets.iter().map(|t| t.ts).chain(self.retweets.iter().map(|r| r.ts));
        let (lo, hi) = ts.fold((i64::MAX, i64::MIN), |(lo, hi), t| (lo.min(t), hi.max(t)));
        if lo <= hi && self.until_ts.is_none() && !(lo <= self.announcement_ts && self.announcement_ts <= hi) {
            return Err(Error::invalid(format!(
                "announcement_ts {} outside event range [{lo}, {hi}]",
                self.announcement_ts
            )));
        }
        Ok(())
    }

    fn offset_seconds(&self) -> i64 {
        self.utc_offset_hours as i64 * 3600
    }

    /// Last local midnight at or before `ts`.
    pub fn local_midnight_floor(&self, ts: i64) -> i64 {
        let off = self.offset_seconds();
        (ts + off).div_euclid(SECONDS_PER_DAY) * SECONDS_PER_DAY - off
    }

    /// Inclusive end timestamp of evaluation day `day`.
    pub fn day_boundary(&self, day: usize) -> i64 {
        self.local_midnight_floor(self.announcement_ts) + day as i64 * SECONDS_PER_DAY
    }

    /// End of the observation window: the slice end, or the last evaluation day.
    pub fn end_ts(&self) -> i64 {
        self.until_ts
            .unwrap_or_else(|| self.day_boundary(self.horizon_days - 1))
    }

    /// Events up to the midnight boundary of `day`; labels are unchanged.
    pub fn slice_until(&self, day: usize) -> Result<Dataset> {
        if day >= self.horizon_days {
            return Err(Error::invalid(format!(
                "day {day} outside horizon 0..{}",
                self.horizon_days
            )));
        }
        let end = self.day_boundary(day);
        Ok(Dataset {
            tweets: self.tweets.iter().filter(|t| t.ts <= end).cloned().collect(),
            retweets: self.retweets.iter().filter(|r| r.ts <= end).cloned().collect(),
            until_ts: Some(end),
            ..self.clone_meta()
        })
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            tweets: Vec::new(),
            retweets: Vec::new(),
            labels: self.labels.clone(),
            test_labels: self.test_labels.clone(),
            seeds: self.seeds.clone(),
            announcement_ts: self.announcement_ts,
            horizon_days: self.horizon_days,
            utc_offset_hours: self.utc_offset_hours,
            d_text: self.d_text,
            until_ts: self.until_ts,
        }
    }

    /// Per-user text item series over tweets with `ts <= until`.
    ///
    /// Tweets without a resolved vector contribute a zero vector so item
    /// counts stay aligned with timestamps.
    pub fn text_series(&self, until: i64) -> BTreeMap<String, ItemSeries> {
        let zero = vec![0.0; self.d_text];
        let mut out: BTreeMap<String, ItemSeries> = BTreeMap::new();
        // tweets are kept sorted by ts, so pushes are in order
        let mut sorted: Vec<&TweetEvent> = self.tweets.iter().filter(|t| t.ts <= until).collect();
        sorted.sort_by_key(|t| t.ts);
        for t in sorted {
            let s = out
                .entry(t.user.clone())
                .or_insert_with(|| ItemSeries::new(t.user.clone(), self.d_text));
            let v = t.vector.as_deref().unwrap_or(&zero);
            s.push(v, t.ts).expect("validated dimension and sorted timestamps");
        }
        out
    }

    /// Per-user token lists (one entry per tweet) for tweets with `ts <= until`.
    pub fn user_tokens(&self, until: i64) -> BTreeMap<String, Vec<Vec<String>>> {
        let mut out: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
        for t in self.tweets.iter().filter(|t| t.ts <= until) {
            if let Some(tokens) = &t.tokens {
                out.entry(t.user.clone()).or_default().push(tokens.clone());
            }
        }
        out
    }

    pub fn to_files(&self) -> Result<DatasetFiles> {
        let mut tweets_jsonl = String::new();
        for t in &self.tweets {
            let line = match (&t.tokens, &t.vector) {
                (Some(tokens), _) => serde_json::to_string(&TokenTweetOut {
                    user: &t.user,
                    ts: t.ts,
                    tokens,
                })?,
                (None, Some(vec)) => serde_json::to_string(&VecTweetOut {
                    user: &t.user,
                    ts: t.ts,
                    vec,
                })?,
                (None, None) => return Err(Error::invalid(format!("tweet of `{}` has no payload", t.user))),
            };
            tweets_jsonl.push_str(&line);
            tweets_jsonl.push('\n');
        }
        let mut retweets_csv = String::from("ts,src,dst\n");
        for r in &self.retweets {
            retweets_csv.push_str(&format!("{},{},{}\n", r.ts, r.src, r.dst));
        }
        let dataset_conf = format!(
            "announcement_ts={}\nhorizon_days={}\nutc_offset_hours={}\nd_text={}\n",
            self.announcement_ts, self.horizon_days, self.utc_offset_hours, self.d_text
        );
        Ok(DatasetFiles {
            tweets_jsonl,
            retweets_csv,
            labels_csv: labels_csv(&self.labels),
            test_labels_csv: labels_csv(&self.test_labels),
            seeds_csv: labels_csv(&self.seeds),
            dataset_conf,
        })
    }

    /// Writes all dataset files into `dir` (created if missing), each atomically.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let files = self.to_files()?;
        for (name, body) in files.entries() {
            write_atomic(&dir.join(name), body.as_bytes())?;
        }
        Ok(())
    }
}

/// Parses flat `key=value` text. Blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            file: "config".into(),
            line: i + 1,
            message: format!("expected key=value, got `{line}`"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Loads a dataset directory, merging its `dataset.conf` under `overrides`.
pub fn load_dataset_dir(dir: &Path, overrides: &BTreeMap<String, String>) -> Result<(Dataset, LoadReport)> {
    let conf_path = dir.join("dataset.conf");
    let mut config = if conf_path.exists() {
        let text = fs::read_to_string(&conf_path).map_err(|e| Error::io(&conf_path, e))?;
        parse_key_values(&text)?
    } else {
        BTreeMap::new()
    };
    config.extend(overrides.iter().map(|(k, v)| (k.clone(), v.clone())));
    load_dataset(&DatasetPaths::in_dir(dir), &config)
}
