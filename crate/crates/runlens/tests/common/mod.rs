//! Helpers shared by integration test targets.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use runlens::interchange::{load_run_history, LoadedRun};
use runlens_core::model::{PipelineGraph, RunHistory};
use serde::{Deserialize, Serialize};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

pub fn load(name: &str) -> LoadedRun {
    load_run_history(&data_dir().join(name)).expect("golden run loads")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub nodes: usize,
    pub edges: usize,
    pub longest_path: usize,
}

/// Longest-path layering, recomputed independently.
fn layering(n: usize, edges: &BTreeSet<(usize, usize)>) -> Vec<usize> {
    let mut layer = vec![0usize; n];
    // Bellman-style relaxation; n rounds suffice on a DAG.
    for _ in 0..n {
        for &(f, t) in edges {
            layer[t] = layer[t].max(layer[f] + 1);
        }
    }
    layer
}

/// Minimum total cost over all perfect matchings of a square matrix, found
/// by exhaustive subset dynamic programming, together with the smallest and
/// largest number of zero-cost substitutions among the optimal matchings and
/// one optimal matching maximizing that number.
fn exhaustive_assignment(cost: &[Vec<f64>], is_zero_sub: &dyn Fn(usize, usize) -> bool) -> (usize, usize, Vec<usize>) {
    let n = cost.len();
    let full = 1usize << n;
    // best[mask] = (cost, max zeros, min zeros) for rows 0..popcount(mask).
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; full];
    let mut choice: Vec<usize> = vec![usize::MAX; full];
    best[0] = Some((0.0, 0, 0));
    for mask in 0..full {
        let Some((c, zmax, zmin)) = best[mask] else { continue };
        let row = mask.count_ones() as usize;
        if row == n {
            continue;
        }
        for col in 0..n {
            if mask & (1 << col) != 0 {
                continue;
            }
            let z = usize::from(is_zero_sub(row, col));
            let next = mask | (1 << col);
            let cand = (c + cost[row][col], zmax + z, zmin + z);
            best[next] = Some(match best[next] {
                None => {
                    choice[next] = col;
                    cand
                }
                Some(old) if (cand.0 - old.0).abs() < 1e-12 => {
                    if cand.1 > old.1 {
                        choice[next] = col;
                    }
                    (old.0, old.1.max(cand.1), old.2.min(cand.2))
                }
                Some(old) if cand.0 < old.0 => {
                    choice[next] = col;
                    cand
                }
                Some(old) => old,
            });
        }
    }
    let (_, zmax, zmin) = best[full - 1].expect("square matrix has a matching");
    let mut row_to_col = vec![0; n];
    let mut mask = full - 1;
    while mask != 0 {
        let col = choice[mask];
        let row = mask.count_ones() as usize - 1;
        row_to_col[row] = col;
        mask &= !(1 << col);
    }
    (zmin, zmax, row_to_col)
}

/// Structure-graph node/edge counts after each candidate, rebuilt from
/// scratch with an exhaustive optimal node mapping. Panics if two optimal
/// mappings would form a different number of compound nodes, since the
/// expected counts would then be ambiguous.
pub fn oracle_frames(history: &RunHistory) -> Vec<FrameCounts> {
    let mut prims: Vec<String> = Vec::new();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut frames = Vec::new();
    for c in history.ordered_candidates() {
        let p: &PipelineGraph = &c.pipeline;
        let merged_layers = layering(prims.len(), &edges);
        let pidx = |id: &str| p.nodes.iter().position(|n| n.id == id).unwrap();
        let pedges: BTreeSet<(usize, usize)> = p.edges.iter().map(|e| (pidx(&e.from), pidx(&e.to))).collect();
        let pipe_layers = layering(p.nodes.len(), &pedges);
        let n = prims.len().max(p.nodes.len());
        let mut cost = vec![vec![1.0; n]; n];
        for i in 0..prims.len() {
            for j in 0..p.nodes.len() {
                let mismatch = if prims[i] == p.nodes[j].primitive { 0.0 } else { 1.0 };
                cost[i][j] = mismatch + 0.5 * merged_layers[i].abs_diff(pipe_layers[j]) as f64;
            }
        }
        let m = prims.len();
        let q = p.nodes.len();
        let cost_ref = &cost;
        let zero = move |r: usize, c: usize| r < m && c < q && cost_ref[r][c] == 0.0;
        let (zmin, zmax, row_to_col) = exhaustive_assignment(&cost, &zero);
        assert_eq!(zmin, zmax, "ambiguous optimal mapping for candidate {}", c.id);
        let mut target: Vec<Option<usize>> = vec![None; q];
        for (r, &col) in row_to_col.iter().enumerate() {
            if zero(r, col) {
                target[col] = Some(r);
            }
        }
        for j in 0..q {
            if target[j].is_none() {
                prims.push(p.nodes[j].primitive.clone());
                target[j] = Some(prims.len() - 1);
            }
        }
        for &(f, t) in &pedges {
            edges.insert((target[f].unwrap(), target[t].unwrap()));
        }
        let layers = layering(prims.len(), &edges);
        frames.push(FrameCounts {
            nodes: prims.len(),
            edges: edges.len(),
            longest_path: layers.iter().max().map_or(0, |l| l + 1),
        });
    }
    frames
}

/// Counts as produced by the library for the first `k` candidates.
pub fn library_frames(history: &RunHistory) -> Vec<FrameCounts> {
    (1..=history.candidates.len())
        .map(|k| {
            let g = runlens_core::structure::snapshot_after(history, k);
            FrameCounts {
                nodes: g.nodes.len(),
                edges: g.edges.len(),
                longest_path: g.longest_path(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpectedFrames {
    pub frames: Vec<FrameCounts>,
}

pub fn expected_frames(name: &str) -> Vec<FrameCounts> {
    let path = data_dir().join("expected").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).expect("expected counts file");
    serde_json::from_str::<ExpectedFrames>(&text).expect("expected counts parse").frames
}
