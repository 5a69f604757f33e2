//! Seed expansion by pointwise mutual information over seed retweets.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{RetweetEvent, Stance};
use crate::error::{Error, Result};
use crate::text::PMI_EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub user_id: String,
    /// `PMI(u, YES) - PMI(u, NO)`.
    pub score: f64,
    pub assigned: Option<Stance>,
}

fn pmi(joint: f64, p_user: f64, p_class: f64) -> f64 {
    ((joint + PMI_EPSILON) / (p_user * p_class + PMI_EPSILON)).log2()
}

/// Scores every user with at least one seed retweet at or before `until_ts`.
///
/// Probabilities come from retweet event counts: `p(u, c)` is the share of
/// seed retweets made by `u` towards class `c`.
pub fn pmi_scores(retweets: &[RetweetEvent], seeds: &BTreeMap<String, Stance>, until_ts: i64) -> Result<Vec<SeedScore>> {
    let mut counts: BTreeMap<&str, [u64; 2]> = BTreeMap::new();
    let mut class_totals = [0u64; 2];
    for r in retweets.iter().filter(|r| r.ts <= until_ts) {
        if let Some(&c) = seeds.get(&r.dst) {
            let slot = usize::from(c == Stance::No);
            counts.entry(r.src.as_str()).or_default()[slot] += 1;
            class_totals[slot] += 1;
        }
    }
    for (class, total) in [(Stance::Yes, class_totals[0]), (Stance::No, class_totals[1])] {
        if total == 0 {
            return Err(Error::MissingClass(format!("no retweets of {class} seeds")));
        }
    }
    let total = (class_totals[0] + class_totals[1]) as f64;
    let p_yes = class_totals[0] as f64 / total;
    let p_no = class_totals[1] as f64 / total;
    Ok(counts
        .into_iter()
        .map(|(u, [y, n])| {
            let p_u = (y + n) as f64 / total;
            let score = pmi(y as f64 / total, p_u, p_yes) - pmi(n as f64 / total, p_u, p_no);
            SeedScore {
                user_id: u.to_string(),
                score,
                assigned: None,
            }
        })
        .collect())
}

/// The threshold `n * max|score|`.
pub fn threshold(scores: &[SeedScore], n: f64) -> f64 {
    n * scores.iter().map(|s| s.score.abs()).fold(0.0, f64::max)
}

/// Fills `assigned` on each score: YES above the threshold, NO below its
/// negation, nothing in between.
pub fn assign(scores: &mut [SeedScore], n: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&n) {
        return Err(Error::invalid(format!("threshold factor must lie in [0, 1], got {n}")));
    }
    let tr = threshold(scores, n);
    for s in scores.iter_mut() {
        s.assigned = if s.score > tr {
            Some(Stance::Yes)
        } else if s.score < -tr {
            Some(Stance::No)
        } else {
            None
        };
    }
    Ok(tr)
}

/// Training labels from scored users plus the seed accounts themselves.
/// A seed's own label wins over its score.
pub fn expand_seeds(scores: &[SeedScore], n: f64, seeds: &BTreeMap<String, Stance>) -> Result<BTreeMap<String, Stance>> {
    if scores.is_empty() {
        return Err(Error::invalid("no scored users to expand"));
    }
    let mut scored = scores.to_vec();
    assign(&mut scored, n)?;
    let mut out: BTreeMap<String, Stance> = scored
        .into_iter()
        .filter_map(|s| s.assigned.map(|l| (s.user_id, l)))
        .collect();
    out.extend(seeds.iter().map(|(k, v)| (k.clone(), *v)));
    Ok(out)
}

/// `id,label,score` rows for labeled users; seeds without a score get an
/// empty score field.
pub fn expanded_labels_csv(labels: &BTreeMap<String, Stance>, scores: &[SeedScore]) -> String {
    let by_user: BTreeMap<&str, f64> = scores.iter().map(|s| (s.user_id.as_str(), s.score)).collect();
    let mut out = String::from("id,label,score\n");
    for (u, l) in labels {
        match by_user.get(u.as_str()) {
            Some(s) => out.push_str(&format!("{u},{l},{s}\n")),
            None => out.push_str(&format!("{u},{l},\n")),
        }
    }
    out
}
