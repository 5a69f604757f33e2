use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Stance;
use crate::error::{Error, Result};

/// Fold id of every sample. Each class is shuffled with `seed` and dealt
/// round-robin, so fold class proportions differ by at most one member.
pub fn stratified_folds(y: &[Stance], k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; y.len()];
    let mut offset = 0;
    for class in [Stance::Yes, Stance::No] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if idx.len() < 2 {
            return Err(Error::MissingClass(format!(
                "{class} has {} training users; every training fold needs both classes",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng);
        for (p, i) in idx.into_iter().enumerate() {
            fold[i] = (p + offset) % k;
        }
        // keep small classes from always starting in fold 0
        offset += 1;
    }
    Ok(fold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_stratified_and_cover_everyone() {
        let y: Vec<Stance> = (0..23).map(|i| if i % 3 == 0 { Stance::Yes } else { Stance::No }).collect();
        let f = stratified_folds(&y, 5, 9).unwrap();
        assert_eq!(f, stratified_folds(&y, 5, 9).unwrap());
        for k in 0..5 {
            let yes = (0..23).filter(|&i| f[i] == k && y[i] == Stance::Yes).count();
            assert!((1..=2).contains(&yes));
            let train_classes: Vec<Stance> = (0..23).filter(|&i| f[i] != k).map(|i| y[i]).collect();
            assert!(train_classes.contains(&Stance::Yes) && train_classes.contains(&Stance::No));
        }
        assert!(stratified_folds(&[Stance::Yes, Stance::No, Stance::No], 2, 0).is_err());
    }
}
