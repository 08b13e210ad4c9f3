//! Stratified k-fold partitioning.

use crate::data::{DatasetManifest, Rng};
use crate::error::{Error, Result};

/// `k` disjoint validation sets covering every manifest index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldSplit {
    folds: Vec<Vec<usize>>,
    total: usize,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn validation(&self, fold: usize) -> &[usize] {
        &self.folds[fold]
    }

    /// Every index not in `fold`, ascending.
    pub fn training(&self, fold: usize) -> Vec<usize> {
        let mut held = vec![false; self.total];
        for &i in &self.folds[fold] {
            held[i] = true;
        }
        (0..self.total).filter(|&i| !held[i]).collect()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.folds
    }
}

/// Shuffles each class with the seeded generator and deals its members
/// round-robin across the folds. The dealing position carries over from one
/// class to the next so fold sizes also stay within one of each other.
pub fn kfold_split(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<FoldSplit> {
    stratified_kfold(&manifest.labels(), k, seed)
}

pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Argument(format!("k = {k}; need at least 2 folds")));
    }
    if k > labels.len() {
        return Err(Error::Argument(format!("k = {k} exceeds {} samples", labels.len())));
    }
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &c) in labels.iter().enumerate() {
        by_class[c].push(i);
    }
    let mut rng = Rng::new(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in &mut by_class {
        rng.shuffle(members);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldSplit {
        folds,
        total: labels.len(),
    })
}
