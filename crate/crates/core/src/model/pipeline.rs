//! Pipeline structures: DAGs of ML primitives with optional column routing.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineNode {
    pub id: String,
    pub primitive: String,
    /// Prefix shared by the config keys that parameterize this node.
    #[serde(default)]
    pub config_prefix: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineEdge {
    pub from: String,
    pub to: String,
    /// Columns routed along this edge; only on edges leaving a split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineGraph {
    pub nodes: Vec<PipelineNode>,
    #[serde(default)]
    pub edges: Vec<PipelineEdge>,
}

impl PipelineGraph {
    /// Linear chain `steps[0] → steps[1] → …`, each step given as
    /// `(node_id, primitive)`. The node id doubles as config prefix.
    pub fn chain(steps: &[(&str, &str)]) -> Self {
        let nodes = steps
            .iter()
            .map(|(id, prim)| PipelineNode {
                id: (*id).into(),
                primitive: (*prim).into(),
                config_prefix: format!("{id}:"),
            })
            .collect();
        let edges = steps
            .windows(2)
            .map(|w| PipelineEdge {
                from: w[0].0.into(),
                to: w[1].0.into(),
                columns: None,
            })
            .collect();
        PipelineGraph { nodes, edges }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&PipelineNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Indices of edges entering node `i`, in declaration order.
    pub fn incoming(&self, i: usize) -> impl Iterator<Item = &PipelineEdge> + '_ {
        let id = &self.nodes[i].id;
        self.edges.iter().filter(move |e| &e.to == id)
    }

    pub fn out_degree(&self, i: usize) -> usize {
        let id = &self.nodes[i].id;
        self.edges.iter().filter(|e| &e.from == id).count()
    }

    fn edge_indices(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter_map(|e| Some((self.index_of(&e.from)?, self.index_of(&e.to)?)))
            .collect()
    }

    /// Kahn topological order; among ready nodes the earliest declared goes
    /// first. `None` if the graph has a cycle.
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        topo_order(self.nodes.len(), &self.edge_indices())
    }

    /// Longest-path layer of every node (sources are layer 0).
    pub fn layers(&self) -> Vec<usize> {
        let edges = self.edge_indices();
        layers(self.nodes.len(), &edges)
    }

    pub fn source(&self) -> usize {
        let edges = self.edge_indices();
        (0..self.nodes.len())
            .find(|&i| !edges.iter().any(|&(_, t)| t == i))
            .unwrap_or(0)
    }

    pub fn sink(&self) -> usize {
        let edges = self.edge_indices();
        (0..self.nodes.len())
            .find(|&i| !edges.iter().any(|&(f, _)| f == i))
            .unwrap_or(0)
    }

    /// Number of nodes on the longest source-to-sink path.
    pub fn longest_path(&self) -> usize {
        self.layers().into_iter().max().map_or(0, |l| l + 1)
    }

    pub fn validate(&self, context: &str) -> Result<()> {
        let ctx = || format!("{context} pipeline");
        if self.nodes.is_empty() {
            return Err(validation(ctx(), "pipeline has no nodes"));
        }
        let mut ids = BTreeSet::new();
        for n in &self.nodes {
            if n.id.is_empty() || n.primitive.is_empty() {
                return Err(validation(ctx(), "node id and primitive must be non-empty"));
            }
            if !ids.insert(n.id.as_str()) {
                return Err(validation(ctx(), format!("duplicate node id `{}`", n.id)));
            }
        }
        let mut pairs = BTreeSet::new();
        for e in &self.edges {
            if self.index_of(&e.from).is_none() || self.index_of(&e.to).is_none() {
                return Err(validation(
                    ctx(),
                    format!("edge {} -> {} references an unknown node", e.from, e.to),
                ));
            }
            if e.from == e.to {
                return Err(validation(ctx(), format!("self loop on `{}`", e.from)));
            }
            if !pairs.insert((e.from.as_str(), e.to.as_str(), e.columns.clone())) {
                return Err(validation(
                    ctx(),
                    format!("duplicate edge {} -> {}", e.from, e.to),
                ));
            }
        }
        if self.topo_order().is_none() {
            return Err(validation(ctx(), "pipeline graph contains a cycle"));
        }
        let edges = self.edge_indices();
        let sources = (0..self.len())
            .filter(|&i| !edges.iter().any(|&(_, t)| t == i))
            .count();
        let sinks = (0..self.len())
            .filter(|&i| !edges.iter().any(|&(f, _)| f == i))
            .count();
        if sources != 1 || sinks != 1 {
            return Err(validation(
                ctx(),
                format!("expected a single source and sink, found {sources} and {sinks}"),
            ));
        }
        for e in &self.edges {
            if e.columns.is_some() {
                let from = self.index_of(&e.from).unwrap_or(0);
                if self.out_degree(from) < 2 {
                    return Err(validation(
                        ctx(),
                        format!(
                            "edge {} -> {} carries columns but `{}` does not split",
                            e.from, e.to, e.from
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Primitive names along the topological order; used to group candidates
    /// sharing one structure.
    pub fn signature(&self) -> String {
        let order = self.topo_order().unwrap_or_default();
        let mut out = String::new();
        for (k, i) in order.iter().enumerate() {
            if k > 0 {
                out.push('|');
            }
            out.push_str(&self.nodes[*i].id);
            out.push('=');
            out.push_str(&self.nodes[*i].primitive);
        }
        for e in &self.edges {
            out.push_str(&format!(";{}>{}", e.from, e.to));
        }
        out
    }
}

pub(crate) fn topo_order(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    for &(_, t) in edges {
        indeg[t] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &(f, t) in edges {
            if f == i {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.insert(t);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

pub(crate) fn layers(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut layer = vec![0usize; n];
    if let Some(order) = topo_order(n, edges) {
        for i in order {
            for &(f, t) in edges {
                if f == i {
                    layer[t] = layer[t].max(layer[i] + 1);
                }
            }
        }
    }
    layer
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> PipelineGraph {
        PipelineGraph {
            nodes: vec![
                PipelineNode { id: "imp".into(), primitive: "mean-imputer".into(), config_prefix: String::new() },
                PipelineNode { id: "sc".into(), primitive: "standard-scaler".into(), config_prefix: String::new() },
                PipelineNode { id: "oh".into(), primitive: "one-hot-encoder".into(), config_prefix: String::new() },
                PipelineNode { id: "clf".into(), primitive: "decision-tree".into(), config_prefix: String::new() },
            ],
            edges: vec![
                PipelineEdge { from: "imp".into(), to: "sc".into(), columns: Some(vec!["x".into()]) },
                PipelineEdge { from: "imp".into(), to: "oh".into(), columns: Some(vec!["c".into()]) },
                PipelineEdge { from: "sc".into(), to: "clf".into(), columns: None },
                PipelineEdge { from: "oh".into(), to: "clf".into(), columns: None },
            ],
        }
    }

    #[test]
    fn diamond_is_valid_with_layers() {
        let g = diamond();
        g.validate("c").unwrap();
        assert_eq!(g.layers(), vec![0, 1, 1, 2]);
        assert_eq!(g.source(), 0);
        assert_eq!(g.sink(), 3);
        assert_eq!(g.longest_path(), 3);
    }

    #[test]
    fn rejects_cycles_and_bad_labels() {
        let mut g = PipelineGraph::chain(&[("a", "pca"), ("b", "decision-tree")]);
        g.validate("c").unwrap();
        g.edges[0].columns = Some(vec!["x".into()]);
        assert!(g.validate("c").is_err());
        g.edges[0].columns = None;
        g.edges.push(PipelineEdge { from: "b".into(), to: "a".into(), columns: None });
        assert!(g.validate("c").is_err());
    }

    #[test]
    fn rejects_two_sources() {
        let mut g = diamond();
        g.edges.remove(0);
        assert!(g.validate("c").is_err());
    }
}
