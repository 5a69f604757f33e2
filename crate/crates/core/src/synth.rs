//! Deterministic two-class social network with a regime shift at the
//! announcement.
//!
//! Before the announcement tweets carry no class signal and retweets ignore
//! class. Afterwards the class mean of tweet vectors separates along a
//! direction that rotates over the evaluation window, and retweets become
//! increasingly homophilous. Users differ in how much they tweet and how
//! much they retweet, so text and network evidence are complementary.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, LogNormal, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, RetweetEvent, Stance, TweetEvent, SECONDS_PER_DAY};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub n_train_yes: usize,
    pub n_train_no: usize,
    pub n_test_yes: usize,
    pub n_test_no: usize,
    /// Evaluation days, the first ending at the announcement.
    pub days: usize,
    /// Days of activity before the announcement.
    pub pre_days: usize,
    /// A local midnight in `utc_offset_hours`.
    pub announcement_ts: i64,
    pub utc_offset_hours: i32,
    pub d_text: usize,
    /// Mean tweets per user per day.
    pub tweet_rate: f64,
    /// Mean retweets per user per day.
    pub retweet_rate: f64,
    /// Log-normal sigma of per-user activity multipliers.
    pub activity_sigma: f64,
    /// Final half-distance between class means of tweet vectors.
    pub delta_max: f64,
    /// Days after the announcement until `delta_max` is reached.
    pub delta_ramp_days: f64,
    /// Total rotation of the class direction over the evaluation window, radians.
    pub rotation: f64,
    pub tweet_noise: f64,
    /// Standard deviation of each user's fixed topical offset.
    pub user_bias: f64,
    /// Final probability that a retweet stays within the class.
    pub p_in_max: f64,
    pub homophily_ramp_days: f64,
    /// Seed accounts per class.
    pub seeds_per_class: usize,
    /// Probability that a retweet targets a seed account.
    pub p_seed: f64,
    /// Share of test users active before the announcement; the rest join later.
    pub test_early_fraction: f64,
    /// Share of training labels flipped.
    pub label_noise: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            n_train_yes: 182,
            n_train_no: 218,
            n_test_yes: 46,
            n_test_no: 154,
            days: 9,
            pre_days: 2,
            // 2015-06-27 00:00 at UTC+3
            announcement_ts: 1_435_352_400,
            utc_offset_hours: 3,
            d_text: 50,
            tweet_rate: 1.0,
            retweet_rate: 1.5,
            activity_sigma: 0.75,
            delta_max: 0.6,
            delta_ramp_days: 3.0,
            rotation: std::f64::consts::PI,
            tweet_noise: 1.0,
            user_bias: 0.3,
            p_in_max: 0.95,
            homophily_ramp_days: 2.0,
            seeds_per_class: 5,
            p_seed: 0.5,
            test_early_fraction: 0.4,
            label_noise: 0.05,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        if self.n_train_yes + self.n_train_no == 0 || self.n_test_yes + self.n_test_no == 0 {
            return bad("need at least one training and one test user".into());
        }
        if self.d_text < 2 {
            return bad("d_text must be at least 2".into());
        }
        if self.seeds_per_class == 0 {
            return bad("seeds_per_class must be positive".into());
        }
        for (name, p) in [
            ("p_in_max", self.p_in_max),
            ("p_seed", self.p_seed),
            ("test_early_fraction", self.test_early_fraction),
            ("label_noise", self.label_noise),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        for (name, v) in [
            ("tweet_rate", self.tweet_rate),
            ("retweet_rate", self.retweet_rate),
            ("activity_sigma", self.activity_sigma),
            ("delta_max", self.delta_max),
            ("tweet_noise", self.tweet_noise),
            ("user_bias", self.user_bias),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        for (name, v) in [
            ("delta_ramp_days", self.delta_ramp_days),
            ("homophily_ramp_days", self.homophily_ramp_days),
        ] {
            if !(v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.announcement_ts <= self.pre_days as i64 * SECONDS_PER_DAY {
            return bad("announcement_ts leaves no room for the pre-announcement period".into());
        }
        Ok(())
    }

    fn ramp(t_days: f64, ramp: f64) -> f64 {
        if t_days <= 0.0 {
            0.0
        } else {
            (t_days / ramp).min(1.0)
        }
    }

    /// Class-mean half-separation at `t_days` after the announcement.
    pub fn delta(&self, t_days: f64) -> f64 {
        self.delta_max * Self::ramp(t_days, self.delta_ramp_days)
    }

    /// Within-class retweet probability at `t_days` after the announcement.
    pub fn p_in(&self, t_days: f64) -> f64 {
        0.5 + (self.p_in_max - 0.5) * Self::ramp(t_days, self.homophily_ramp_days)
    }

    fn angle(&self, t_days: f64) -> f64 {
        let span = (self.days.max(2) - 1) as f64;
        self.rotation * (t_days / span).clamp(0.0, 1.0)
    }
}

struct User {
    id: String,
    class: Stance,
    train: bool,
    join_ts: i64,
    tweet_mult: f64,
    retweet_mult: f64,
    popularity: f64,
    bias: Vec<f64>,
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Unit vector of a random direction.
fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Generates a dataset; identical configs give identical datasets.
pub fn generate(cfg: &GenConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.d_text;
    let start = cfg.announcement_ts - cfg.pre_days as i64 * SECONDS_PER_DAY;
    let end = cfg.announcement_ts + (cfg.days as i64 - 1) * SECONDS_PER_DAY;

    // orthonormal plane in which the class direction rotates
    let a = unit(&mut rng, d);
    let mut b = unit(&mut rng, d);
    let proj: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    b.iter_mut().zip(&a).for_each(|(y, x)| *y -= proj * x);
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    b.iter_mut().for_each(|y| *y /= nb);

    let activity = LogNormal::new(-0.5 * cfg.activity_sigma * cfg.activity_sigma, cfg.activity_sigma)
        .map_err(|e| Error::invalid(format!("activity_sigma: {e}")))?;
    let popularity = LogNormal::new(0.0, 1.0).expect("valid");
    let bias_dist = Normal::new(0.0, cfg.user_bias).map_err(|e| Error::invalid(format!("user_bias: {e}")))?;

    let roles: Vec<(Stance, bool)> = [
        (Stance::Yes, true, cfg.n_train_yes),
        (Stance::No, true, cfg.n_train_no),
        (Stance::Yes, false, cfg.n_test_yes),
        (Stance::No, false, cfg.n_test_no),
    ]
    .iter()
    .flat_map(|&(c, tr, n)| std::iter::repeat_n((c, tr), n))
    .collect();
    let mut order: Vec<usize> = (0..roles.len()).collect();
    order.shuffle(&mut rng);
    let width = roles.len().to_string().len().max(4);
    let mut users: Vec<User> = Vec::with_capacity(roles.len());
    for (slot, &r) in order.iter().enumerate() {
        let (class, train) = roles[r];
        let join_ts = if train || rng.random::<f64>() < cfg.test_early_fraction {
            start
        } else {
            rng.random_range(cfg.announcement_ts..end)
        };
        users.push(User {
            id: format!("u{slot:0width$}"),
            class,
            train,
            join_ts,
            tweet_mult: activity.sample(&mut rng),
            retweet_mult: activity.sample(&mut rng),
            popularity: popularity.sample(&mut rng),
            bias: (0..d).map(|_| bias_dist.sample(&mut rng)).collect(),
        });
    }

    let seed_ids: BTreeMap<Stance, Vec<String>> = [Stance::Yes, Stance::No]
        .into_iter()
        .map(|c| {
            let tag = c.as_str().to_lowercase();
            (c, (0..cfg.seeds_per_class).map(|i| format!("seed_{tag}_{i}")).collect())
        })
        .collect();
    let class_users: BTreeMap<Stance, Vec<usize>> = [Stance::Yes, Stance::No]
        .into_iter()
        .map(|c| (c, (0..users.len()).filter(|&i| users[i].class == c).collect()))
        .collect();
    let popularity_table: BTreeMap<Stance, Option<WeightedAliasIndex<f64>>> = class_users
        .iter()
        .map(|(c, idx)| (*c, WeightedAliasIndex::new(idx.iter().map(|&i| users[i].popularity).collect()).ok()))
        .collect();

    let noise = Normal::new(0.0, cfg.tweet_noise).map_err(|e| Error::invalid(format!("tweet_noise: {e}")))?;
    let mut tweets = Vec::new();
    let mut retweets = Vec::new();
    let days_since = |ts: i64| (ts - cfg.announcement_ts) as f64 / SECONDS_PER_DAY as f64;
    for (ui, u) in users.iter().enumerate() {
        let mut day_start = start;
        let mut first = true;
        while day_start < end {
            let day_end = (day_start + SECONDS_PER_DAY).min(end);
            let lo = u.join_ts.max(day_start);
            if lo < day_end {
                let frac = (day_end - lo) as f64 / SECONDS_PER_DAY as f64;
                let n_tweets = poisson(&mut rng, cfg.tweet_rate * u.tweet_mult * frac);
                // every user posts at least once in the day they join
                let n_tweets = if first { n_tweets.max(1) } else { n_tweets };
                first = false;
                for _ in 0..n_tweets {
                    let ts = rng.random_range(lo..day_end);
                    let t = days_since(ts);
                    let (s, c) = cfg.angle(t).sin_cos();
                    let m = u.class.sign() * cfg.delta(t);
                    let vec = (0..d)
                        .map(|k| round6(m * (c * a[k] + s * b[k]) + u.bias[k] + noise.sample(&mut rng)))
                        .collect();
                    tweets.push(TweetEvent {
                        user: u.id.clone(),
                        ts,
                        tokens: None,
                        vector: Some(vec),
                    });
                }
                let n_rt = poisson(&mut rng, cfg.retweet_rate * u.retweet_mult * frac);
                for _ in 0..n_rt {
                    let ts = rng.random_range(lo..day_end);
                    let same = rng.random::<f64>() < cfg.p_in(days_since(ts));
                    let target_class = if same { u.class } else { u.class.flip() };
                    let dst = if rng.random::<f64>() < cfg.p_seed {
                        let seeds = &seed_ids[&target_class];
                        seeds[rng.random_range(0..seeds.len())].clone()
                    } else {
                        let Some(table) = &popularity_table[&target_class] else {
                            continue;
                        };
                        let v = class_users[&target_class][table.sample(&mut rng)];
                        if v == ui {
                            continue;
                        }
                        users[v].id.clone()
                    };
                    retweets.push(RetweetEvent {
                        ts,
                        src: u.id.clone(),
                        dst,
                    });
                }
            }
            day_start = day_end;
        }
    }
    tweets.sort_by(|x, y| (x.ts, &x.user).cmp(&(y.ts, &y.user)));
    retweets.sort_by(|x, y| (x.ts, &x.src, &x.dst).cmp(&(y.ts, &y.src, &y.dst)));

    let mut labels = BTreeMap::new();
    let mut test_labels = BTreeMap::new();
    for u in &users {
        if u.train {
            let flip = rng.random::<f64>() < cfg.label_noise;
            labels.insert(u.id.clone(), if flip { u.class.flip() } else { u.class });
        } else {
            test_labels.insert(u.id.clone(), u.class);
        }
    }
    let seeds = seed_ids
        .iter()
        .flat_map(|(c, ids)| ids.iter().map(move |i| (i.clone(), *c)))
        .collect();
    let ds = Dataset {
        tweets,
        retweets,
        labels,
        test_labels,
        seeds,
        announcement_ts: cfg.announcement_ts,
        horizon_days: cfg.days,
        utc_offset_hours: cfg.utc_offset_hours,
        d_text: d,
        until_ts: None,
    };
    ds.validate()?;
    Ok(ds)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenConfig {
        GenConfig {
            n_train_yes: 10,
            n_train_no: 12,
            n_test_yes: 3,
            n_test_no: 7,
            d_text: 4,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_and_balanced() {
        let cfg = small();
        let a = generate(&cfg).unwrap();
        assert_eq!(a, generate(&cfg).unwrap());
        assert_eq!(a.labels.len(), 22);
        assert_eq!(a.test_labels.values().filter(|l| **l == Stance::Yes).count(), 3);
        assert_eq!(a.seeds.len(), 10);
        assert!(a.tweets.windows(2).all(|w| w[0].ts <= w[1].ts));
        let other = generate(&GenConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn training_users_tweet_before_announcement() {
        let ds = generate(&small()).unwrap();
        let early = ds.text_series(ds.announcement_ts);
        assert!(ds.labels.keys().all(|u| early.contains_key(u)));
    }

    #[test]
    fn rejects_zero_days() {
        assert!(generate(&GenConfig { days: 0, ..small() }).unwrap_err().is_validation());
        assert!(generate(&GenConfig { p_seed: 1.5, ..small() }).is_err());
    }
}
