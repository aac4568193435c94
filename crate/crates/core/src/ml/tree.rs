//! CART with best-first growth. Shared by the classifier zoo, surrogates and
//! the hyperparameter-importance forest.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fit target: class indices (Gini) or real values (squared error).
#[derive(Debug, Clone, Copy)]
pub enum TreeTarget<'a> {
    Classes { y: &'a [usize], n_classes: usize },
    Values(&'a [f64]),
}

impl TreeTarget<'_> {
    fn width(&self) -> usize {
        match self {
            TreeTarget::Classes { n_classes, .. } => *n_classes,
            TreeTarget::Values(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_leaf_nodes: Option<usize>,
    /// Features considered per split; all when `None`.
    pub max_features: Option<usize>,
}

impl TreeParams {
    pub fn new() -> Self {
        TreeParams {
            min_samples_leaf: 1,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// `None` for leaves.
    pub feature: Option<usize>,
    /// Rows with `x <= threshold` or a missing value go left.
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub n_samples: usize,
    pub impurity: f64,
    /// Class proportions, or a single mean for value targets.
    pub value: Vec<f64>,
    pub depth: usize,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Grower<'a> {
    x: &'a [f64],
    p: usize,
    target: TreeTarget<'a>,
    params: TreeParams,
}

#[inline]
pub fn goes_left(v: f64, threshold: f64) -> bool {
    v.is_nan() || v <= threshold
}

impl Grower<'_> {
    fn at(&self, row: usize, f: usize) -> f64 {
        self.x[row * self.p + f]
    }

    fn summary(&self, rows: &[usize]) -> (Vec<f64>, f64) {
        let n = rows.len() as f64;
        match self.target {
            TreeTarget::Classes { y, n_classes } => {
                let mut counts = vec![0.0; n_classes];
                for &r in rows {
                    counts[y[r]] += 1.0;
                }
                let gini = 1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>();
                (counts.iter().map(|c| c / n).collect(), gini.max(0.0))
            }
            TreeTarget::Values(y) => {
                let mean = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
                let var = rows.iter().map(|&r| (y[r] - mean) * (y[r] - mean)).sum::<f64>() / n;
                (vec![mean], var)
            }
        }
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<Split> {
        let msl = self.params.min_samples_leaf.max(1);
        let n = rows.len();
        if n < 2 * msl {
            return None;
        }
        let mut best: Option<Split> = None;
        let mut sorted = rows.to_vec();
        for &f in features {
            sorted.sort_by(|&a, &b| {
                let (va, vb) = (self.at(a, f), self.at(b, f));
                match (va.is_nan(), vb.is_nan()) {
                    (true, true) => core::cmp::Ordering::Equal,
                    (true, false) => core::cmp::Ordering::Less,
                    (false, true) => core::cmp::Ordering::Greater,
                    _ => va.total_cmp(&vb),
                }
                .then(a.cmp(&b))
            });
            let candidate = match self.target {
                TreeTarget::Classes { y, n_classes } => {
                    let mut right = vec![0usize; n_classes];
                    for &r in &sorted {
                        right[y[r]] += 1;
                    }
                    let total_sq: f64 = right.iter().map(|&c| (c * c) as f64).sum();
                    let mut left = vec![0usize; n_classes];
                    let (mut sq_l, mut sq_r) = (0.0, total_sq);
                    let parent = total_sq / n as f64;
                    self.sweep(&sorted, f, msl, |i| {
                        let c = y[sorted[i]];
                        sq_l += (2 * left[c] + 1) as f64;
                        sq_r -= (2 * right[c] - 1) as f64;
                        left[c] += 1;
                        right[c] -= 1;
                        let nl = (i + 1) as f64;
                        let nr = (n - i - 1) as f64;
                        sq_l / nl + sq_r / nr - parent
                    })
                }
                TreeTarget::Values(y) => {
                    let total: f64 = sorted.iter().map(|&r| y[r]).sum();
                    let parent = total * total / n as f64;
                    let mut sum_l = 0.0;
                    self.sweep(&sorted, f, msl, |i| {
                        sum_l += y[sorted[i]];
                        let sum_r = total - sum_l;
                        let nl = (i + 1) as f64;
                        let nr = (n - i - 1) as f64;
                        sum_l * sum_l / nl + sum_r * sum_r / nr - parent
                    })
                }
            };
            if let Some(c) = candidate {
                if best.is_none_or(|b| c.gain > b.gain + 1e-12 * (1.0 + b.gain.abs())) {
                    best = Some(c);
                }
            }
        }
        best
    }

    /// Walks split positions of `sorted` along feature `f`; `gain_after(i)`
    /// is called for every prefix end `i` in order and must return the gain
    /// of putting `sorted[..=i]` on the left.
    fn sweep(
        &self,
        sorted: &[usize],
        f: usize,
        msl: usize,
        mut gain_after: impl FnMut(usize) -> f64,
    ) -> Option<Split> {
        let n = sorted.len();
        let mut best: Option<Split> = None;
        for i in 0..n - 1 {
            let gain = gain_after(i);
            if i + 1 < msl || n - i - 1 < msl {
                continue;
            }
            let (a, b) = (self.at(sorted[i], f), self.at(sorted[i + 1], f));
            let threshold = match (a.is_nan(), b.is_nan()) {
                (true, true) => continue,
                (true, false) => (b - 1.0).min(b.next_down()),
                _ if a == b => continue,
                _ => {
                    let mid = a + (b - a) / 2.0;
                    if mid >= b {
                        a
                    } else {
                        mid
                    }
                }
            };
            if best.is_none_or(|s| gain > s.gain + 1e-12 * (1.0 + s.gain.abs())) {
                best = Some(Split {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
        best
    }
}

impl Tree {
    /// Grows a tree on `rows` of the row-major matrix `x` (`p` columns).
    /// `rows` may repeat indices (bootstrap samples).
    pub fn fit(
        x: &[f64],
        p: usize,
        rows: &[usize],
        target: TreeTarget<'_>,
        params: TreeParams,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Tree {
        let g = Grower {
            x,
            p,
            target,
            params,
        };
        if rows.is_empty() {
            return Tree {
                nodes: vec![TreeNode {
                    feature: None,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    n_samples: 0,
                    impurity: 0.0,
                    value: vec![1.0 / target.width() as f64; target.width()],
                    depth: 0,
                }],
                n_features: p,
            };
        }
        let all: Vec<usize> = (0..p).collect();
        let pick = |rng: &mut Option<&mut ChaCha8Rng>| -> Vec<usize> {
            match (params.max_features, rng.as_deref_mut()) {
                (Some(k), Some(r)) if k < p => {
                    let mut f = sample(r, p, k.max(1)).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => all.clone(),
            }
        };
        let (value, impurity) = g.summary(rows);
        let mut nodes = vec![TreeNode {
            feature: None,
            threshold: 0.0,
            left: 0,
            right: 0,
            n_samples: rows.len(),
            impurity,
            value,
            depth: 0,
        }];
        let mut node_rows: Vec<Vec<usize>> = vec![rows.to_vec()];
        let splittable = |node: &TreeNode| {
            node.impurity > 1e-14 && params.max_depth.is_none_or(|d| node.depth < d)
        };
        // Frontier of leaves with their best split.
        let mut frontier: Vec<(usize, Split)> = Vec::new();
        let first = if splittable(&nodes[0]) {
            g.best_split(&node_rows[0], &pick(&mut rng))
        } else {
            None
        };
        if let Some(s) = first {
            frontier.push((0, s));
        }
        let mut leaves = 1usize;
        while !frontier.is_empty() {
            if params.max_leaf_nodes.is_some_and(|m| leaves >= m) {
                break;
            }
            let k = if params.max_leaf_nodes.is_some() {
                let mut k = 0;
                for i in 1..frontier.len() {
                    let (gi, gk) = (frontier[i].1.gain, frontier[k].1.gain);
                    if gi > gk + 1e-12 * (1.0 + gk.abs()) {
                        k = i;
                    }
                }
                k
            } else {
                frontier.len() - 1
            };
            let (id, split) = frontier.remove(k);
            let rows = core::mem::take(&mut node_rows[id]);
            let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&r| goes_left(g.at(r, split.feature), split.threshold));
            let depth = nodes[id].depth + 1;
            let mut children = [0usize; 2];
            for (slot, child_rows) in [l_rows, r_rows].into_iter().enumerate() {
                let (value, impurity) = g.summary(&child_rows);
                let cid = nodes.len();
                nodes.push(TreeNode {
                    feature: None,
                    threshold: 0.0,
                    left: 0,
                    right: 0,
                    n_samples: child_rows.len(),
                    impurity,
                    value,
                    depth,
                });
                node_rows.push(child_rows);
                children[slot] = cid;
            }
            let n = &mut nodes[id];
            n.feature = Some(split.feature);
            n.threshold = split.threshold;
            n.left = children[0];
            n.right = children[1];
            leaves += 1;
            // Right child first so that depth-first expansion pops left first.
            for &cid in children.iter().rev() {
                if splittable(&nodes[cid]) {
                    if let Some(s) = g.best_split(&node_rows[cid], &pick(&mut rng)) {
                        frontier.push((cid, s));
                    }
                }
            }
        }
        Tree {
            nodes,
            n_features: p,
        }
    }

    pub fn leaf(&self, row: &[f64]) -> usize {
        let mut i = 0;
        while let Some(f) = self.nodes[i].feature {
            i = if goes_left(row[f], self.nodes[i].threshold) {
                self.nodes[i].left
            } else {
                self.nodes[i].right
            };
        }
        i
    }

    pub fn predict(&self, row: &[f64]) -> &[f64] {
        &self.nodes[self.leaf(row)].value
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}
