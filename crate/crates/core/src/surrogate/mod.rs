//! Inverse surrogate mapping a requirement to `(geometry, efficiency)`.
//!
//! Two models share one tree implementation: a single regression tree grown to
//! purity on the whole corpus, which acts as a lookup of the designs seen near a
//! requirement, and a bagged forest of such trees, which interpolates between
//! requirements.

mod forest;
mod metrics;
mod model_file;
mod tree;

pub use forest::{fit_forest, predict_forest, ForestOptions, RandomForest, DEFAULT_TREE_COUNT};
pub use metrics::{accuracy, evaluate_model, residual, EvalReport, ACCEPTABLE_RESIDUAL};
pub use model_file::{load_forest, load_tree, save_forest, save_tree, MODEL_FORMAT_VERSION};
pub use tree::{fit_tree, leaf_records, RegressionTree, TreeNode, TreeOptions};

use crate::dataset::DesignRecord;
use crate::hydro::{BladeGeometry, Requirement};
use crate::space::{decode, DesignSpaceConfig, Genome};

pub const FEATURE_COUNT: usize = 3;
pub const TARGET_COUNT: usize = 6;

/// Index of efficiency within a [`TargetVector`].
pub const EFFICIENCY: usize = 5;

/// `(diameter, hub_ratio, chord_root, taper_exp, blade_count, efficiency)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVector(pub [f64; TARGET_COUNT]);

impl TargetVector {
    pub fn from_record(rec: &DesignRecord) -> Self {
        let g = &rec.geometry;
        Self([
            g.diameter,
            g.hub_ratio(),
            g.chord_root,
            g.taper_exp,
            f64::from(g.blade_count),
            rec.efficiency,
        ])
    }

    pub fn efficiency(&self) -> f64 {
        self.0[EFFICIENCY]
    }

    /// Geometry part, with the blade count rounded to the nearest allowed value
    /// and the continuous genes clamped into the configured ranges.
    pub fn geometry(&self, cfg: &DesignSpaceConfig) -> BladeGeometry {
        let z = self.0[4];
        let blade_index = cfg
            .blade_counts
            .iter()
            .enumerate()
            .min_by(|(_, a), (_, b)| {
                (f64::from(**a) - z)
                    .abs()
                    .total_cmp(&(f64::from(**b) - z).abs())
            })
            .map_or(0, |(i, _)| i);
        decode(
            &Genome {
                values: [self.0[0], self.0[1], self.0[2], self.0[3]],
                blade_index,
            },
            cfg,
        )
    }
}

pub(crate) fn features(req: &Requirement) -> [f64; FEATURE_COUNT] {
    req.as_array()
}

/// Anything that predicts a target vector from a requirement.
pub trait InverseModel {
    fn predict(&self, req: &Requirement) -> TargetVector;
}
