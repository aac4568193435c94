use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::round;

/// Share of each class held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.25;

fn by_class(labels: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        groups[y].push(i);
    }
    groups
}

/// Seeded stratified split into `(train, validation)` row indices, both
/// sorted. Each class contributes `round(n_c * fraction)` rows to
/// validation but always keeps at least one in training.
pub fn stratified_split(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut valid) = (Vec::new(), Vec::new());
    for mut group in by_class(labels, n_classes) {
        group.shuffle(&mut rng);
        let take = (round(group.len() as f64 * fraction) as usize).min(group.len().saturating_sub(1));
        valid.extend_from_slice(&group[..take]);
        train.extend_from_slice(&group[take..]);
    }
    train.sort_unstable();
    valid.sort_unstable();
    (train, valid)
}

/// Seeded stratified subsample of at most `cap` rows, sorted. Class quotas
/// follow the largest-remainder rule; every present class keeps at least one
/// row when `cap` allows.
pub fn stratified_sample(labels: &[usize], n_classes: usize, cap: usize, seed: u64) -> Vec<usize> {
    let n = labels.len();
    if n <= cap {
        return (0..n).collect();
    }
    let groups = by_class(labels, n_classes);
    let exact: Vec<f64> = groups.iter().map(|g| g.len() as f64 * cap as f64 / n as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| *e as usize).collect();
    let mut order: Vec<usize> = (0..n_classes).collect();
    order.sort_by(|&a, &b| (exact[b] - quota[b] as f64).total_cmp(&(exact[a] - quota[a] as f64)).then(a.cmp(&b)));
    let mut left = cap - quota.iter().sum::<usize>();
    for &c in &order {
        if left == 0 {
            break;
        }
        if quota[c] < groups[c].len() {
            quota[c] += 1;
            left -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(cap);
    for (mut g, q) in groups.into_iter().zip(quota) {
        g.shuffle(&mut rng);
        out.extend_from_slice(&g[..q.min(g.len())]);
    }
    out.sort_unstable();
    out
}
