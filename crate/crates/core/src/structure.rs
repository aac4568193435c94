//! Structure search graph: all candidate pipelines merged into one DAG.
//!
//! Merging follows an edit-distance style matching. A square cost matrix
//! holds node substitutions between the graph built so far and the next
//! pipeline, padded with unit-cost additions/deletions; the Hungarian
//! method picks the cheapest mapping; every selected substitution with
//! cost exactly zero (same primitive on the same topological layer) turns
//! into a compound node. Everything else is added as new nodes.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::assignment::hungarian;
use crate::model::{layers, Candidate, PipelineGraph, RunHistory};

/// Cost of substituting two nodes with different primitives.
pub const PRIMITIVE_MISMATCH_COST: f64 = 1.0;
/// Added per topological layer separating the two nodes.
pub const LAYER_PENALTY: f64 = 0.5;
/// Cost of adding or deleting a node (dummy rows/columns).
pub const INDEL_COST: f64 = 1.0;

/// Square cost matrix; the first `rows × cols` block holds substitutions,
/// the remaining entries are dummy additions/deletions.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<Vec<f64>>,
}

impl CostMatrix {
    pub fn size(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row][col]
    }

    pub fn is_substitution(&self, row: usize, col: usize) -> bool {
        row < self.rows && col < self.cols
    }

    fn from_nodes(left: &[(&str, usize)], right: &[(&str, usize)]) -> Self {
        let size = left.len().max(right.len());
        let mut entries = vec![vec![INDEL_COST; size]; size];
        for (i, (p1, l1)) in left.iter().enumerate() {
            for (j, (p2, l2)) in right.iter().enumerate() {
                let mismatch = if p1 == p2 { 0.0 } else { PRIMITIVE_MISMATCH_COST };
                entries[i][j] = mismatch + LAYER_PENALTY * l1.abs_diff(*l2) as f64;
            }
        }
        CostMatrix {
            rows: left.len(),
            cols: right.len(),
            entries,
        }
    }
}

/// Cost matrix between the nodes of two pipelines.
pub fn build_cost_matrix(g1: &PipelineGraph, g2: &PipelineGraph) -> CostMatrix {
    let (l1, l2) = (g1.layers(), g2.layers());
    let left: Vec<(&str, usize)> = g1
        .nodes
        .iter()
        .zip(&l1)
        .map(|(n, &l)| (n.primitive.as_str(), l))
        .collect();
    let right: Vec<(&str, usize)> = g2
        .nodes
        .iter()
        .zip(&l2)
        .map(|(n, &l)| (n.primitive.as_str(), l))
        .collect();
    CostMatrix::from_nodes(&left, &right)
}

/// A pipeline node folded into a merged node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub candidate: String,
    pub node: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedNode {
    pub id: usize,
    pub primitive: String,
    pub members: Vec<NodeRef>,
}

impl MergedNode {
    /// Number of distinct candidates sharing this node.
    pub fn occurrences(&self) -> usize {
        self.members
            .iter()
            .map(|m| m.candidate.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn contains(&self, candidate: &str) -> bool {
        self.members.iter().any(|m| m.candidate == candidate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedEdge {
    pub from: usize,
    pub to: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    /// Candidates whose pipelines contain this edge.
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MergedGraph {
    pub nodes: Vec<MergedNode>,
    pub edges: Vec<MergedEdge>,
    /// Candidates folded in so far, in merge order.
    pub candidates: Vec<String>,
}

impl MergedGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.from, e.to)).collect()
    }

    /// Longest-path layer per merged node (roots at layer 0).
    pub fn layers(&self) -> Vec<usize> {
        layers(self.nodes.len(), &self.edge_pairs())
    }

    pub fn is_acyclic(&self) -> bool {
        crate::model::topo_order(self.nodes.len(), &self.edge_pairs()).is_some()
    }

    /// Nodes on the longest path.
    pub fn longest_path(&self) -> usize {
        self.layers().into_iter().max().map_or(0, |l| l + 1)
    }

    pub fn out_degree(&self, id: usize) -> usize {
        self.edges.iter().filter(|e| e.from == id).count()
    }

    /// Merged node holding `node` of `candidate`.
    pub fn locate(&self, candidate: &str, node: &str) -> Option<usize> {
        self.nodes.iter().position(|n| {
            n.members
                .iter()
                .any(|m| m.candidate == candidate && m.node == node)
        })
    }

    pub fn total_members(&self) -> usize {
        self.nodes.iter().map(|n| n.members.len()).sum()
    }
}

/// Result of one merge step.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    pub graph: MergedGraph,
    /// `(pipeline node index, merged node id)` for every compound node formed.
    pub matches: Vec<(usize, usize)>,
}

/// Folds one candidate pipeline into `merged`.
pub fn merge(merged: &MergedGraph, candidate_id: &str, pipeline: &PipelineGraph) -> MergedGraph {
    merge_step(merged, candidate_id, pipeline).graph
}

pub fn merge_step(merged: &MergedGraph, candidate_id: &str, pipeline: &PipelineGraph) -> MergeStep {
    let merged_layers = merged.layers();
    let left: Vec<(&str, usize)> = merged
        .nodes
        .iter()
        .zip(&merged_layers)
        .map(|(n, &l)| (n.primitive.as_str(), l))
        .collect();
    let pipe_layers = pipeline.layers();
    let right: Vec<(&str, usize)> = pipeline
        .nodes
        .iter()
        .zip(&pipe_layers)
        .map(|(n, &l)| (n.primitive.as_str(), l))
        .collect();
    let costs = CostMatrix::from_nodes(&left, &right);
    let assignment = hungarian(&costs.entries).expect("cost matrix is square and finite");

    let mut target: Vec<Option<usize>> = vec![None; pipeline.len()];
    let mut matches = Vec::new();
    for (row, &col) in assignment.row_to_col.iter().enumerate() {
        if costs.is_substitution(row, col) && costs.get(row, col) == 0.0 {
            target[col] = Some(row);
            matches.push((col, row));
        }
    }
    matches.sort_unstable();

    let mut graph = merged.clone();
    for (j, node) in pipeline.nodes.iter().enumerate() {
        let member = NodeRef {
            candidate: candidate_id.into(),
            node: node.id.clone(),
        };
        match target[j] {
            Some(id) => graph.nodes[id].members.push(member),
            None => {
                let id = graph.nodes.len();
                graph.nodes.push(MergedNode {
                    id,
                    primitive: node.primitive.clone(),
                    members: vec![member],
                });
                target[j] = Some(id);
            }
        }
    }
    for e in &pipeline.edges {
        let (Some(f), Some(t)) = (pipeline.index_of(&e.from), pipeline.index_of(&e.to)) else {
            continue;
        };
        let (from, to) = (target[f].unwrap_or(0), target[t].unwrap_or(0));
        match graph
            .edges
            .iter_mut()
            .find(|x| x.from == from && x.to == to && x.columns == e.columns)
        {
            Some(existing) => existing.candidates.push(candidate_id.into()),
            None => graph.edges.push(MergedEdge {
                from,
                to,
                columns: e.columns.clone(),
                candidates: vec![candidate_id.into()],
            }),
        }
    }
    graph.candidates.push(candidate_id.into());
    MergeStep { graph, matches }
}

/// Left fold of [`merge`] over `candidates` in the given order.
pub fn merge_all<'a>(candidates: impl IntoIterator<Item = &'a Candidate>) -> MergedGraph {
    candidates
        .into_iter()
        .fold(MergedGraph::default(), |g, c| merge(&g, &c.id, &c.pipeline))
}

/// Structure graph of every candidate with `timestamp <= t`, merged in
/// timestamp order (ties by candidate id).
pub fn snapshot(history: &RunHistory, t: f64) -> MergedGraph {
    merge_all(
        history
            .ordered_candidates()
            .into_iter()
            .filter(|c| c.timestamp <= t),
    )
}

/// Structure graph of the first `count` candidates in merge order.
pub fn snapshot_after(history: &RunHistory, count: usize) -> MergedGraph {
    merge_all(history.ordered_candidates().into_iter().take(count))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(p: &[&str]) -> PipelineGraph {
        let ids: Vec<String> = (0..p.len()).map(|i| alloc::format!("n{i}")).collect();
        let steps: Vec<(&str, &str)> = ids.iter().map(|s| s.as_str()).zip(p.iter().copied()).collect();
        PipelineGraph::chain(&steps)
    }

    #[test]
    fn identical_graphs_have_zero_diagonal() {
        let g = chain(&["A", "B"]);
        let m = build_cost_matrix(&g, &g);
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn substitution_costs_by_rule() {
        let m = build_cost_matrix(&chain(&["A", "B"]), &chain(&["A", "C"]));
        assert_eq!(m.get(0, 0), 0.0);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(0, 1), 1.5);
    }

    #[test]
    fn unequal_sizes_are_padded() {
        let m = build_cost_matrix(&chain(&["A"]), &chain(&["B", "A"]));
        assert_eq!(m.size(), 2);
        assert_eq!((m.rows, m.cols), (1, 2));
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(0, 1), 0.5);
        assert_eq!(m.entries[1], vec![INDEL_COST, INDEL_COST]);
    }

    #[test]
    fn identity_merge() {
        let g = merge(&MergedGraph::default(), "c1", &chain(&["A", "B"]));
        let g = merge(&g, "c2", &chain(&["A", "B"]));
        assert_eq!(g.len(), 2);
        assert!(g.nodes.iter().all(|n| n.members.len() == 2));
        assert_eq!(g.edges.len(), 1);
    }

    #[test]
    fn diverging_merge() {
        let g = merge(&MergedGraph::default(), "c1", &chain(&["A", "B"]));
        let step = merge_step(&g, "c2", &chain(&["A", "C"]));
        let g = step.graph;
        assert_eq!(g.len(), 3);
        assert_eq!(g.nodes[0].primitive, "A");
        assert_eq!(g.nodes[0].occurrences(), 2);
        let mut e: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.from, e.to)).collect();
        e.sort_unstable();
        assert_eq!(e, vec![(0, 1), (0, 2)]);
        assert_eq!(step.matches, vec![(0, 0)]);
    }

    #[test]
    fn layer_shift_prevents_compound_node() {
        let g = merge(&MergedGraph::default(), "c1", &chain(&["A"]));
        let g = merge(&g, "c2", &chain(&["B", "A"]));
        assert_eq!(g.len(), 3);
        assert!(g.is_acyclic());
    }
}
