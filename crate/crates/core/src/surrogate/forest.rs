use rand::Rng;
use rayon::prelude::*;

use super::tree::{RegressionTree, TrainingSet, TreeOptions};
use super::{InverseModel, TargetVector, TARGET_COUNT};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::hydro::Requirement;
use crate::space::seeded_rng;

pub const DEFAULT_TREE_COUNT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestOptions {
    pub tree: TreeOptions,
    /// Draw a with-replacement resample per tree. Disabling it trains every
    /// tree on the full dataset.
    pub bootstrap: bool,
}

impl Default for ForestOptions {
    fn default() -> Self {
        Self {
            tree: TreeOptions::default(),
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
    /// Seed of each tree's bootstrap stream.
    pub bootstrap_seeds: Vec<u64>,
    pub output_scales: [f64; TARGET_COUNT],
}

impl RandomForest {
    /// Component-wise arithmetic mean of the per-tree predictions.
    pub fn predict(&self, req: &Requirement) -> TargetVector {
        let n = self.trees.len() as f64;
        let mut sum = [0.0; TARGET_COUNT];
        for tree in &self.trees {
            for (s, v) in sum.iter_mut().zip(tree.predict(req).0) {
                *s += v;
            }
        }
        TargetVector(sum.map(|s| s / n))
    }
}

impl InverseModel for RandomForest {
    fn predict(&self, req: &Requirement) -> TargetVector {
        RandomForest::predict(self, req)
    }
}

pub fn predict_forest(model: &RandomForest, req: &Requirement) -> TargetVector {
    model.predict(req)
}

/// Bagged ensemble: tree `i` is grown on a size-`n` resample drawn from its own seeded stream.
pub fn fit_forest(
    data: &Dataset,
    tree_count: usize,
    seed: u64,
    options: &ForestOptions,
) -> Result<RandomForest> {
    if tree_count == 0 {
        return Err(Error::Training("tree_count must be at least 1".into()));
    }
    if data.len() < 2 {
        return Err(Error::Training(format!(
            "a forest needs at least 2 records, got {}",
            data.len()
        )));
    }
    let set = TrainingSet::new(data)?;
    let mut master = seeded_rng(seed, 0);
    let bootstrap_seeds: Vec<u64> = (0..tree_count).map(|_| master.gen()).collect();
    let n = data.len();
    let trees = bootstrap_seeds
        .par_iter()
        .map(|&tree_seed| {
            let sample = if options.bootstrap {
                let mut rng = seeded_rng(tree_seed, 0);
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            set.grow(sample, &options.tree)
        })
        .collect();
    Ok(RandomForest {
        trees,
        bootstrap_seeds,
        output_scales: set.scales,
    })
}
