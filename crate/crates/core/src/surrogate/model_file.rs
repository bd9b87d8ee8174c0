//! JSON model files.
//!
//! ```text
//! {
//!   "format": "propsao-inverse-model",
//!   "version": 1,
//!   "kind": "forest" | "tree",
//!   "output_scales": [6 reals],
//!   "bootstrap_seeds": [u64, ...],          // one per tree; empty for a lone tree
//!   "trees": [
//!     { "training_fingerprint": "<sha256 hex>",
//!       "nodes": [ {"feature", "threshold", "left", "right"}
//!                | {"mean_target": [6 reals], "member_ids": [usize, ...]} ] }
//!   ]
//! }
//! ```
//!
//! Node 0 is the root and children always follow their parent.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::forest::RandomForest;
use super::tree::{RegressionTree, TreeNode};
use super::TARGET_COUNT;
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "propsao-inverse-model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Forest,
    Tree,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeEntry {
    training_fingerprint: String,
    nodes: Vec<TreeNode>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    kind: ModelKind,
    output_scales: [f64; TARGET_COUNT],
    bootstrap_seeds: Vec<u64>,
    trees: Vec<TreeEntry>,
}

fn entry(tree: &RegressionTree) -> TreeEntry {
    TreeEntry {
        training_fingerprint: tree.training_fingerprint.clone(),
        nodes: tree.nodes.clone(),
    }
}

fn write_model(file: &ModelFile, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, file)
        .map_err(|e| Error::ModelFormat(format!("{}: {e}", path.display())))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn read_model(path: &Path, expected: ModelKind) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    let header: Header = serde_json::from_str(&text).map_err(|e| {
        Error::ModelFormat(format!("{}: unreadable model file: {e}", path.display()))
    })?;
    if header.format != FORMAT_TAG {
        return Err(Error::ModelFormat(format!(
            "{}: not a model file (format {:?})",
            path.display(),
            header.format
        )));
    }
    if header.version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "{}: version {} unsupported, expected {MODEL_FORMAT_VERSION}",
            path.display(),
            header.version
        )));
    }
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if file.kind != expected {
        return Err(Error::ModelFormat(format!(
            "{}: holds a {:?}, expected a {expected:?}",
            path.display(),
            file.kind
        )));
    }
    if file.trees.is_empty() {
        return Err(Error::Schema(format!(
            "{}: model has no trees",
            path.display()
        )));
    }
    Ok(file)
}

fn into_tree(entry: TreeEntry, scales: [f64; TARGET_COUNT]) -> Result<RegressionTree> {
    let tree = RegressionTree {
        nodes: entry.nodes,
        training_fingerprint: entry.training_fingerprint,
        output_scales: scales,
    };
    tree.validate()?;
    Ok(tree)
}

pub fn save_forest(forest: &RandomForest, path: &Path) -> Result<()> {
    write_model(
        &ModelFile {
            format: FORMAT_TAG.into(),
            version: MODEL_FORMAT_VERSION,
            kind: ModelKind::Forest,
            output_scales: forest.output_scales,
            bootstrap_seeds: forest.bootstrap_seeds.clone(),
            trees: forest.trees.iter().map(entry).collect(),
        },
        path,
    )
}

pub fn load_forest(path: &Path) -> Result<RandomForest> {
    let file = read_model(path, ModelKind::Forest)?;
    if file.bootstrap_seeds.len() != file.trees.len() {
        return Err(Error::Schema(format!(
            "{}: {} bootstrap seeds for {} trees",
            path.display(),
            file.bootstrap_seeds.len(),
            file.trees.len()
        )));
    }
    let scales = file.output_scales;
    let trees = file
        .trees
        .into_iter()
        .map(|t| into_tree(t, scales))
        .collect::<Result<_>>()?;
    Ok(RandomForest {
        trees,
        bootstrap_seeds: file.bootstrap_seeds,
        output_scales: scales,
    })
}

pub fn save_tree(tree: &RegressionTree, path: &Path) -> Result<()> {
    write_model(
        &ModelFile {
            format: FORMAT_TAG.into(),
            version: MODEL_FORMAT_VERSION,
            kind: ModelKind::Tree,
            output_scales: tree.output_scales,
            bootstrap_seeds: Vec::new(),
            trees: vec![entry(tree)],
        },
        path,
    )
}

pub fn load_tree(path: &Path) -> Result<RegressionTree> {
    let mut file = read_model(path, ModelKind::Tree)?;
    if file.trees.len() != 1 {
        return Err(Error::Schema(format!(
            "{}: a tree file holds exactly one tree, found {}",
            path.display(),
            file.trees.len()
        )));
    }
    into_tree(file.trees.remove(0), file.output_scales)
}
