//! Tweet and user text representations, and n-gram polarity scores.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use crate::data::{ItemSeries, Stance};
use crate::error::{Error, Result};

/// Additive smoothing for PMI probabilities.
pub const PMI_EPSILON: f64 = 1e-9;

/// Word embeddings keyed by token.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.entries.insert(token.into(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// Reads `token<TAB>f1<TAB>f2...`; floats may also be space separated.
    pub fn load_tsv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut table: Option<EmbeddingTable> = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |message: String| Error::Parse {
                file: path.display().to_string(),
                line: i + 1,
                message,
            };
            let (token, rest) = line
                .split_once('\t')
                .ok_or_else(|| bad("expected token<TAB>floats".into()))?;
            let vector = rest
                .split(|c: char| c == '\t' || c == ' ')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad float `{s}`"))))
                .collect::<Result<Vec<f64>>>()?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
            t.insert(token, vector).map_err(|e| bad(e.to_string()))?;
        }
        Ok(table.unwrap_or_else(|| EmbeddingTable::new(0)))
    }

    /// Mean of the found token vectors plus `(found, missing)` counts.
    pub fn tweet_vector_counted(&self, tokens: &[String]) -> (Vec<f64>, usize, usize) {
        let mut acc = vec![0.0; self.dim];
        let mut found = 0;
        for tok in tokens {
            if let Some(v) = self.get(tok) {
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
                found += 1;
            }
        }
        if found > 0 {
            let inv = 1.0 / found as f64;
            acc.iter_mut().for_each(|a| *a *= inv);
        }
        (acc, found, tokens.len() - found)
    }
}

/// Mean embedding of the tokens present in `table`; zero vector if none are.
pub fn tweet_vector(tokens: &[String], table: &EmbeddingTable) -> Vec<f64> {
    table.tweet_vector_counted(tokens).0
}

/// Dimension-wise mean over a user's tweet vectors.
pub fn user_text_aggregate(series: &ItemSeries) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptySeries(series.user_id.clone()));
    }
    let mut acc = vec![0.0; series.dim()];
    for (v, _) in series.items() {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = series.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramScore {
    pub ngram: String,
    pub score: f64,
}

fn ngrams_of(tokens: &[String], n: usize, out: &mut HashMap<String, f64>) {
    if tokens.len() < n {
        return;
    }
    for w in tokens.windows(n) {
        *out.entry(w.join(" ")).or_insert(0.0) += 1.0;
    }
}

/// PMI(n, YES) - PMI(n, NO) for every n-gram, computed over per-user tf-idf mass.
///
/// Each user's tweets form one document; n-grams never cross tweet
/// boundaries. `tf` is the raw count and `idf = ln(N / df)` over the labeled
/// users. Probabilities are tf-idf masses normalised by the total mass, with
/// [`PMI_EPSILON`] added to numerator and denominator, log base 2.
/// Positive scores mark YES-associated n-grams. Sorted by descending score.
pub fn ngram_polarity_scores(
    users: &[(String, Vec<Vec<String>>)],
    labels: &BTreeMap<String, Stance>,
    n_range: std::ops::RangeInclusive<usize>,
) -> Result<Vec<NgramScore>> {
    if *n_range.start() == 0 {
        return Err(Error::invalid("n-gram order starts at 1"));
    }
    let labeled: Vec<(Stance, HashMap<String, f64>)> = users
        .iter()
        .filter_map(|(u, tweets)| labels.get(u).map(|l| (*l, tweets)))
        .map(|(l, tweets)| {
            let mut tf = HashMap::new();
            for n in n_range.clone() {
                for t in tweets {
                    ngrams_of(t, n, &mut tf);
                }
            }
            (l, tf)
        })
        .collect();
    for class in [Stance::Yes, Stance::No] {
        if !labeled.iter().any(|(l, _)| *l == class) {
            return Err(Error::MissingClass(format!("no labeled {class} users")));
        }
    }

    let n_users = labeled.len() as f64;
    let mut df: HashMap<&str, f64> = HashMap::new();
    for (_, tf) in &labeled {
        for g in tf.keys() {
            *df.entry(g.as_str()).or_insert(0.0) += 1.0;
        }
    }

    // mass[g] = (YES mass, NO mass); accumulated in user order so that a
    // label swap exchanges the two sums exactly
    let mut mass: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    let (mut class_yes, mut class_no) = (0.0, 0.0);
    for (label, tf) in &labeled {
        let mut grams: Vec<(&String, &f64)> = tf.iter().collect();
        grams.sort_by(|a, b| a.0.cmp(b.0));
        for (g, count) in grams {
            let w = count * (n_users / df[g.as_str()]).ln();
            let e = mass.entry(g.as_str()).or_insert((0.0, 0.0));
            match label {
                Stance::Yes => {
                    e.0 += w;
                    class_yes += w;
                }
                Stance::No => {
                    e.1 += w;
                    class_no += w;
                }
            }
        }
    }
    let total = class_yes + class_no;
    let pmi = |joint: f64, marginal: f64, prior: f64| {
        if total <= 0.0 {
            return 0.0;
        }
        let p_joint = joint / total;
        let p_n = marginal / total;
        let p_c = prior / total;
        ((p_joint + PMI_EPSILON) / (p_n * p_c + PMI_EPSILON)).log2()
    };
    let mut out: Vec<NgramScore> = mass
        .into_iter()
        .map(|(g, (y, n))| {
            let marginal = y + n;
            NgramScore {
                ngram: g.to_string(),
                score: pmi(y, marginal, class_yes) - pmi(n, marginal, class_no),
            }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.ngram.cmp(&b.ngram)));
    Ok(out)
}

/// `ngram,score` CSV, rows in the given order.
pub fn ngram_scores_csv(scores: &[NgramScore]) -> String {
    let mut s = String::from("ngram,score\n");
    for sc in scores {
        s.push_str(&format!("{},{}\n", csv_field(&sc.ngram), sc.score));
    }
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn table() -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2);
        t.insert("a", vec![1.0, 0.0]).unwrap();
        t.insert("b", vec![0.0, 3.0]).unwrap();
        t
    }

    #[test]
    fn single_token_is_verbatim() {
        assert_eq!(tweet_vector(&toks("b"), &table()), vec![0.0, 3.0]);
    }

    #[test]
    fn unknown_tokens_give_zero_vector() {
        assert_eq!(tweet_vector(&toks("x y"), &table()), vec![0.0, 0.0]);
    }

    #[test]
    fn oov_tokens_excluded_from_denominator() {
        let (v, found, missing) = table().tweet_vector_counted(&toks("a b c"));
        assert_eq!(v, vec![0.5, 1.5]);
        assert_eq!((found, missing), (2, 1));
    }

    #[test]
    fn aggregate_of_two_tweets() {
        let s = ItemSeries::from_items("u", 2, vec![(vec![1.0, 0.0], 1), (vec![0.0, 1.0], 2)]).unwrap();
        assert_eq!(user_text_aggregate(&s).unwrap(), vec![0.5, 0.5]);
        assert!(user_text_aggregate(&ItemSeries::new("e", 2)).is_err());
    }

    #[test]
    fn single_class_is_rejected() {
        let users = vec![("u".to_string(), vec![toks("a")])];
        let labels = BTreeMap::from([("u".to_string(), Stance::Yes)]);
        assert!(matches!(
            ngram_polarity_scores(&users, &labels, 1..=1),
            Err(Error::MissingClass(_))
        ));
    }

    #[test]
    fn yes_only_ngram_is_positive_and_shared_is_zero() {
        let users = vec![
            ("y".to_string(), vec![toks("shared yesword")]),
            ("n".to_string(), vec![toks("shared noword")]),
            ("m".to_string(), vec![toks("other")]),
        ];
        let labels = BTreeMap::from([
            ("y".to_string(), Stance::Yes),
            ("n".to_string(), Stance::No),
            ("m".to_string(), Stance::No),
        ]);
        let scores = ngram_polarity_scores(&users, &labels, 1..=2).unwrap();
        let get = |g: &str| scores.iter().find(|s| s.ngram == g).unwrap().score;
        assert!(get("yesword") > 0.0);
        assert!(get("noword") < 0.0);
        assert!(get("shared yesword") > 0.0);
    }
}
