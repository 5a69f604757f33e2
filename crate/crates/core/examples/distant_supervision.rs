//! Expands seed accounts into training labels from retweet behaviour.

use std::collections::BTreeMap;

use tmkl::data::{RetweetEvent, Stance};
use tmkl::distant::{expand_seeds, pmi_scores};

fn main() -> tmkl::Result<()> {
    let seeds: BTreeMap<String, Stance> =
        [("yes_party", Stance::Yes), ("no_party", Stance::No)].map(|(u, l)| (u.to_string(), l)).into();
    let mut retweets = Vec::new();
    for (user, yes, no) in [("alice", 5, 0), ("bob", 1, 4), ("carol", 2, 2), ("dave", 3, 1)] {
        for (dst, n) in [("yes_party", yes), ("no_party", no)] {
            for ts in 0..n {
                retweets.push(RetweetEvent { ts, src: user.into(), dst: dst.into() });
            }
        }
    }
    let scores = pmi_scores(&retweets, &seeds, i64::MAX)?;
    for s in &scores {
        println!("{:>6} {:+.3}", s.user_id, s.score);
    }
    for (user, label) in expand_seeds(&scores, 0.5, &seeds)? {
        println!("{user}: {label}");
    }
    Ok(())
}
