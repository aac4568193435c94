use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::argmax;
use crate::ml::tree::{Tree, TreeParams, TreeTarget};
use crate::ml::PredictionOracle;
use crate::model::{ColumnData, Frame};

/// Decision tree mimicking an oracle's labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTree {
    pub tree: Tree,
    pub feature_names: Vec<String>,
    /// Vocabulary of categorical features (thresholds compare codes).
    pub vocabularies: Vec<Option<Vec<String>>>,
    pub class_labels: Vec<String>,
    pub max_leaf_nodes: usize,
    /// Share of rows where the surrogate label equals the oracle label.
    pub fidelity: f64,
    pub n_rows: usize,
}

/// Portable nested form of a fitted tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NestedNode {
    Split {
        feature: String,
        /// `x <= threshold` and missing values take the left branch.
        threshold: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        categories_left: Option<Vec<String>>,
        samples: usize,
        value: Vec<f64>,
        left: Box<NestedNode>,
        right: Box<NestedNode>,
    },
    Leaf {
        samples: usize,
        value: Vec<f64>,
        class: String,
    },
}

/// CART on `(features, oracle labels)` grown best-first up to
/// `max_leaf_nodes` leaves. Fidelity is measured on the same rows.
pub fn global_surrogate(
    oracle: &dyn PredictionOracle,
    data: &Frame,
    class_labels: &[String],
    max_leaf_nodes: usize,
) -> Result<SurrogateTree> {
    if max_leaf_nodes < 2 {
        return Err(Error::Contract("max_leaf_nodes must be at least 2".into()));
    }
    let labels = oracle.predict(data)?;
    let n = data.n_rows();
    let p = data.n_cols();
    let x = data.to_matrix();
    let rows: Vec<usize> = (0..n).collect();
    let params = TreeParams {
        max_leaf_nodes: Some(max_leaf_nodes),
        ..TreeParams::new()
    };
    let k = oracle.n_classes();
    let tree = Tree::fit(&x, p, &rows, TreeTarget::Classes { y: &labels, n_classes: k }, params, None);
    let agree = (0..n)
        .filter(|&r| argmax(tree.predict(&x[r * p..(r + 1) * p])) == labels[r])
        .count();
    Ok(SurrogateTree {
        tree,
        feature_names: data.names().into_iter().map(String::from).collect(),
        vocabularies: data
            .columns
            .iter()
            .map(|c| match &c.data {
                ColumnData::Categorical { vocabulary, .. } => Some(vocabulary.clone()),
                ColumnData::Numeric(_) => None,
            })
            .collect(),
        class_labels: class_labels.to_vec(),
        max_leaf_nodes,
        fidelity: if n == 0 { 1.0 } else { agree as f64 / n as f64 },
        n_rows: n,
    })
}

impl SurrogateTree {
    pub fn n_leaves(&self) -> usize {
        self.tree.n_leaves()
    }

    pub fn to_nested(&self) -> NestedNode {
        self.nested(0)
    }

    fn nested(&self, i: usize) -> NestedNode {
        let node = &self.tree.nodes[i];
        match node.feature {
            None => NestedNode::Leaf {
                samples: node.n_samples,
                value: node.value.clone(),
                class: self
                    .class_labels
                    .get(argmax(&node.value))
                    .cloned()
                    .unwrap_or_default(),
            },
            Some(f) => NestedNode::Split {
                feature: self.feature_names[f].clone(),
                threshold: node.threshold,
                categories_left: self.vocabularies[f].as_ref().map(|v| {
                    v.iter()
                        .enumerate()
                        .filter(|(code, _)| (*code as f64) <= node.threshold)
                        .map(|(_, s)| s.clone())
                        .collect()
                }),
                samples: node.n_samples,
                value: node.value.clone(),
                left: Box::new(self.nested(node.left)),
                right: Box::new(self.nested(node.right)),
            },
        }
    }
}

/// Self-contained export of a surrogate: the nested tree plus what is needed
/// to read rows back in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortableTree {
    pub feature_names: Vec<String>,
    pub class_labels: Vec<String>,
    pub max_leaf_nodes: usize,
    pub fidelity: f64,
    pub root: NestedNode,
}

impl SurrogateTree {
    pub fn to_portable(&self) -> PortableTree {
        PortableTree {
            feature_names: self.feature_names.clone(),
            class_labels: self.class_labels.clone(),
            max_leaf_nodes: self.max_leaf_nodes,
            fidelity: self.fidelity,
            root: self.to_nested(),
        }
    }
}

impl PortableTree {
    /// Class label per row of `data`, which must hold every feature.
    pub fn predict(&self, data: &Frame) -> Result<Vec<String>> {
        let cols = data.select_columns(&self.feature_names)?;
        (0..cols.n_rows())
            .map(|r| {
                let mut node = &self.root;
                loop {
                    match node {
                        NestedNode::Leaf { class, .. } => return Ok(class.clone()),
                        NestedNode::Split {
                            feature,
                            threshold,
                            categories_left,
                            left,
                            right,
                            ..
                        } => {
                            let j = self.feature_names.iter().position(|f| f == feature).ok_or_else(|| {
                                Error::Contract(alloc::format!("split on unknown feature `{feature}`"))
                            })?;
                            let go_left = match (&cols.columns[j].data, categories_left) {
                                (ColumnData::Categorical { vocabulary, codes }, Some(cats)) => {
                                    codes[r].is_none_or(|c| cats.contains(&vocabulary[c as usize]))
                                }
                                (data, _) => crate::ml::tree::goes_left(data.encoded(r), *threshold),
                            };
                            node = if go_left { left } else { right };
                        }
                    }
                }
            })
            .collect()
    }
}
