//! Canonical JSON model files.
//!
//! Field order is fixed by the structs below and floats are written in the
//! shortest form that parses back to the same value, so a file that is loaded
//! and saved again reproduces the same bytes.
//!
//! Trees are stored as flat node arrays in pre-order. A split node carries
//! `feature`, `threshold`, `left` and `right` (node indices); a leaf carries
//! its weighted class `counts`. Leaf distributions are recomputed on load.

use serde::{Deserialize, Serialize};

use crate::domain::GrammageClass;
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::learners::{
    BoostModel, BoostParams, BoostStage, ForestModel, ForestParams, KnnModel, LearnerSpec, Scaler, TrainedModel,
    TreeModel, TreeNode, TreeParams,
};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u64 = 1;

/// A trained model plus the provenance stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel<T> {
    pub model: TrainedModel<T>,
    pub seed: u64,
    pub metrics: Option<MetricsReport>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    left: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    right: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord<T> {
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    nodes: Vec<NodeRecord<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StageRecord<T> {
    weight: T,
    weighted_error: T,
    trees: Vec<TreeRecord<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KnnRecord<T> {
    mean: [T; 3],
    std: [T; 3],
    rows: Vec<[T; 3]>,
    labels: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile<T> {
    schema_version: u64,
    kind: String,
    scalar: String,
    classes: Vec<GrammageClass>,
    params: LearnerSpec,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trees: Option<Vec<TreeRecord<T>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stages: Option<Vec<StageRecord<T>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    knn: Option<KnnRecord<T>>,
    metrics: Option<MetricsReport>,
    warnings: Vec<String>,
}

/// Only the version is read first, so newer layouts fail with a version
/// error rather than a field error.
#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u64,
}

fn tree_record<T: Scalar>(tree: &TreeModel<T>, seed: Option<u64>) -> TreeRecord<T> {
    let nodes = tree
        .nodes
        .iter()
        .map(|n| match n {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => NodeRecord {
                feature: Some(*feature),
                threshold: Some(*threshold),
                left: Some(*left),
                right: Some(*right),
                counts: None,
            },
            TreeNode::Leaf { counts, .. } => NodeRecord {
                feature: None,
                threshold: None,
                left: None,
                right: None,
                counts: Some(counts.clone()),
            },
        })
        .collect();
    TreeRecord { seed, nodes }
}

fn forest_trees<T: Scalar>(f: &ForestModel<T>) -> Vec<TreeRecord<T>> {
    f.trees
        .iter()
        .zip(&f.tree_seeds)
        .map(|(t, &s)| tree_record(t, Some(s)))
        .collect()
}

fn spec_of<T>(model: &TrainedModel<T>) -> LearnerSpec {
    match model {
        TrainedModel::Tree(m) => LearnerSpec::Tree(m.params),
        TrainedModel::Forest(m) => LearnerSpec::Forest(m.params),
        TrainedModel::Boost(m) => LearnerSpec::Adaboost(m.params),
        TrainedModel::Knn(m) => LearnerSpec::Knn { k: m.k },
    }
}

pub fn save_model<T: Scalar>(saved: &SavedModel<T>) -> Result<Vec<u8>> {
    let model = &saved.model;
    let mut file = ModelFile {
        schema_version: SCHEMA_VERSION,
        kind: model.kind().to_string(),
        scalar: T::NAME.to_string(),
        classes: crate::learners::Classifier::classes(model).to_vec(),
        params: spec_of(model),
        seed: saved.seed,
        trees: None,
        stages: None,
        knn: None,
        metrics: saved.metrics.clone(),
        warnings: Vec::new(),
    };
    match model {
        TrainedModel::Tree(t) => file.trees = Some(vec![tree_record(t, None)]),
        TrainedModel::Forest(f) => file.trees = Some(forest_trees(f)),
        TrainedModel::Boost(b) => {
            file.stages = Some(
                b.stages
                    .iter()
                    .map(|s| StageRecord {
                        weight: s.weight,
                        weighted_error: s.weighted_error,
                        trees: forest_trees(&s.forest),
                    })
                    .collect(),
            );
            file.warnings = b.warnings.clone();
        }
        TrainedModel::Knn(k) => {
            file.knn = Some(KnnRecord {
                mean: k.scaler.mean,
                std: k.scaler.std,
                rows: k.rows.clone(),
                labels: k.labels.clone(),
            })
        }
    }
    let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| Error::Model(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn json_error(e: serde_json::Error) -> Error {
    if e.is_eof() {
        Error::Truncated
    } else {
        Error::Model(e.to_string())
    }
}

fn missing(what: &str) -> Error {
    Error::Model(format!("missing {what}"))
}

fn load_tree<T: Scalar>(rec: TreeRecord<T>, classes: &[GrammageClass], params: TreeParams) -> Result<TreeModel<T>> {
    let n = rec.nodes.len();
    if n == 0 {
        return Err(Error::Model("tree has no nodes".into()));
    }
    let nodes = rec
        .nodes
        .into_iter()
        .enumerate()
        .map(|(i, node)| match node {
            NodeRecord {
                feature: Some(feature),
                threshold: Some(threshold),
                left: Some(left),
                right: Some(right),
                counts: None,
            } => {
                if feature >= 3 {
                    return Err(Error::Model(format!("node {i}: feature {feature} out of range")));
                }
                // Pre-order: children come after their parent, which rules out cycles.
                if left <= i || right <= i || left >= n || right >= n {
                    return Err(Error::Model(format!("node {i}: bad child index")));
                }
                Ok(TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                })
            }
            NodeRecord {
                feature: None,
                threshold: None,
                left: None,
                right: None,
                counts: Some(counts),
            } => {
                if counts.len() != classes.len() {
                    return Err(Error::ClassMismatch(format!(
                        "node {i} has {} counts for {} classes",
                        counts.len(),
                        classes.len()
                    )));
                }
                if counts.iter().any(|c| !(*c >= T::zero()) || !c.is_finite()) {
                    return Err(Error::Model(format!("node {i}: invalid leaf counts")));
                }
                TreeNode::leaf(counts).ok_or_else(|| Error::Model(format!("node {i}: empty leaf")))
            }
            _ => Err(Error::Model(format!("node {i} is neither a split nor a leaf"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeModel {
        nodes,
        classes: classes.to_vec(),
        params,
    })
}

fn load_forest<T: Scalar>(
    trees: Vec<TreeRecord<T>>,
    classes: &[GrammageClass],
    params: ForestParams,
) -> Result<ForestModel<T>> {
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        features_per_split: params.features_per_split,
    };
    let mut seeds = Vec::with_capacity(trees.len());
    let mut models = Vec::with_capacity(trees.len());
    for rec in trees {
        seeds.push(rec.seed.ok_or_else(|| missing("forest tree seed"))?);
        models.push(load_tree(rec, classes, tree_params)?);
    }
    if models.is_empty() {
        return Err(Error::Model("forest has no trees".into()));
    }
    Ok(ForestModel {
        trees: models,
        tree_seeds: seeds,
        params,
        classes: classes.to_vec(),
    })
}

pub fn load_model<T: Scalar>(bytes: &[u8]) -> Result<SavedModel<T>> {
    let probe: VersionProbe = serde_json::from_slice(bytes).map_err(json_error)?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(Error::SchemaVersion(probe.schema_version));
    }
    let file: ModelFile<T> = serde_json::from_slice(bytes).map_err(json_error)?;
    if file.scalar != T::NAME {
        return Err(Error::Model(format!(
            "file holds {} values, expected {}",
            file.scalar,
            T::NAME
        )));
    }
    let classes = file.classes;
    if classes.is_empty() || classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ClassMismatch("classes must be non-empty and strictly ascending".into()));
    }
    if file.kind != file.params.name() {
        return Err(Error::Model(format!(
            "kind {} does not match parameters for {}",
            file.kind,
            file.params.name()
        )));
    }
    let model = match file.params {
        LearnerSpec::Tree(p) => {
            let mut trees = file.trees.ok_or_else(|| missing("trees"))?;
            if trees.len() != 1 {
                return Err(Error::Model(format!("tree model holds {} trees", trees.len())));
            }
            TrainedModel::Tree(load_tree(trees.remove(0), &classes, p)?)
        }
        LearnerSpec::Forest(p) => TrainedModel::Forest(load_forest(file.trees.ok_or_else(|| missing("trees"))?, &classes, p)?),
        LearnerSpec::Adaboost(p) => {
            let stages = file
                .stages
                .ok_or_else(|| missing("stages"))?
                .into_iter()
                .map(|s| {
                    Ok(BoostStage {
                        forest: load_forest(s.trees, &classes, p.base)?,
                        weight: s.weight,
                        weighted_error: s.weighted_error,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if stages.is_empty() {
                return Err(Error::Model("boost model has no stages".into()));
            }
            TrainedModel::Boost(BoostModel {
                stages,
                params: BoostParams { ..p },
                classes: classes.clone(),
                warnings: file.warnings,
            })
        }
        LearnerSpec::Knn { k } => {
            let rec = file.knn.ok_or_else(|| missing("knn"))?;
            if rec.rows.len() != rec.labels.len() || rec.rows.is_empty() {
                return Err(Error::Model("knn rows and labels disagree".into()));
            }
            if let Some(&l) = rec.labels.iter().find(|&&l| l >= classes.len()) {
                return Err(Error::ClassMismatch(format!("label index {l} for {} classes", classes.len())));
            }
            TrainedModel::Knn(KnnModel {
                k,
                scaler: Scaler {
                    mean: rec.mean,
                    std: rec.std,
                },
                rows: rec.rows,
                labels: rec.labels,
                classes: classes.clone(),
            })
        }
    };
    Ok(SavedModel {
        model,
        seed: file.seed,
        metrics: file.metrics,
    })
}
