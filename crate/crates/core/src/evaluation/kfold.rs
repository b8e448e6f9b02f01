use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::rng;

/// Fold index for every row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] == f).collect()
    }

    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] != f).collect()
    }

    /// `counts[f][c]`: rows of class `c` in fold `f`.
    pub fn class_counts(&self, y: &[u8]) -> Vec<[usize; 2]> {
        let mut counts = vec![[0usize; 2]; self.k];
        for (&f, &c) in self.fold.iter().zip(y) {
            counts[f][usize::from(c)] += 1;
        }
        counts
    }
}

/// Shuffle each class with its own seeded stream, then deal its rows to
/// folds round-robin. The dealing position carries over from class 0 to
/// class 1 so fold sizes stay within one of each other.
pub fn stratified_kfold(y: &[u8], k: usize, seed: u64) -> Result<FoldAssignment, EvalError> {
    if k < 2 {
        return Err(EvalError::BadK(k));
    }
    if let Some(&b) = y.iter().find(|&&v| v > 1) {
        return Err(EvalError::BadLabel(b));
    }
    let mut fold = vec![0usize; y.len()];
    let mut next = 0usize;
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        if members.len() < k {
            return Err(EvalError::ClassTooSmall { class, count: members.len(), k });
        }
        members.shuffle(&mut rng::substream(seed, "kfold", u64::from(class)));
        for i in members {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(FoldAssignment { k, fold })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_division() {
        let y: Vec<u8> = (0..20).map(|i| (i % 2) as u8).collect();
        let f = stratified_kfold(&y, 10, 3).unwrap();
        assert!(f.class_counts(&y).iter().all(|c| *c == [1, 1]));
    }

    #[test]
    fn one_extra_positive() {
        let y: Vec<u8> = (0..21).map(|i| u8::from(i < 11)).collect();
        let f = stratified_kfold(&y, 10, 3).unwrap();
        let counts = f.class_counts(&y);
        assert!(counts.iter().all(|c| c[0] == 1));
        let mut pos: Vec<usize> = counts.iter().map(|c| c[1]).collect();
        pos.sort();
        assert_eq!(pos, [1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);
    }

    #[test]
    fn small_class_rejected() {
        let y = [0, 0, 0, 0, 1, 1];
        assert!(matches!(stratified_kfold(&y, 3, 0), Err(EvalError::ClassTooSmall { class: 1, count: 2, k: 3 })));
        assert!(matches!(stratified_kfold(&y, 1, 0), Err(EvalError::BadK(1))));
    }

    #[test]
    fn seeded() {
        let y: Vec<u8> = (0..100).map(|i| (i % 3 == 0) as u8).collect();
        assert_eq!(stratified_kfold(&y, 5, 9).unwrap(), stratified_kfold(&y, 5, 9).unwrap());
        assert_ne!(stratified_kfold(&y, 5, 9).unwrap(), stratified_kfold(&y, 5, 10).unwrap());
    }
}
