//! Label propagation over a pairwise-probability graph.
//!
//! Nodes start in singleton communities; asynchronous majority sweeps in a
//! seeded random order run to a fixed point. Deterministic for a fixed seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

const MAX_SWEEPS: usize = 10_000;

/// Connects nodes whose probability clears `threshold`, then propagates.
/// Returns one community label per node (labels are node indices).
pub fn label_propagation(
    n_nodes: usize,
    edges: &[(usize, usize, f64)],
    threshold: f64,
    seed: u64,
) -> Vec<usize> {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for &(a, b, p) in edges {
        assert!(a < n_nodes && b < n_nodes && a != b, "bad edge ({a}, {b})");
        if p >= threshold {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
    }

    let mut labels: Vec<usize> = (0..n_nodes).collect();
    let mut order: Vec<usize> = (0..n_nodes).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_SWEEPS {
        order.shuffle(&mut rng);
        if sweep(&mut labels, &adjacency, &order) == 0 {
            break;
        }
    }
    labels
}

/// One asynchronous pass; returns how many nodes changed label.
fn sweep(labels: &mut [usize], adjacency: &[Vec<usize>], order: &[usize]) -> usize {
    let mut changes = 0;
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &node in order {
        if adjacency[node].is_empty() {
            continue;
        }
        counts.clear();
        for &nb in &adjacency[node] {
            *counts.entry(labels[nb]).or_insert(0) += 1;
        }
        let best = counts.values().copied().max().unwrap();
        let current = labels[node];
        if counts.get(&current) == Some(&best) {
            continue; // keep the current label when it ties for the majority
        }
        let new = counts
            .iter()
            .filter(|(_, &c)| c == best)
            .map(|(&l, _)| l)
            .min()
            .unwrap();
        if new != current {
            labels[node] = new;
            changes += 1;
        }
    }
    changes
}
