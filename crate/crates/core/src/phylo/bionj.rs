//! Distance-based tree inference by neighbor joining with variance-weighted
//! matrix reduction.
//!
//! Pair selection and branch lengths follow plain NJ; when two nodes are
//! merged, the distances to the remaining nodes are combined with a weight
//! lambda chosen to minimize the variance of the reduced entries (lambda is
//! clamped to [0,1]; zero-variance steps fall back to 0.5, which is the
//! plain NJ average).

use super::{PhyloError, Tree};
use crate::lexdist::DistanceMatrix;

/// Builds an unrooted tree from a complete distance matrix.
pub fn bionj(matrix: &DistanceMatrix) -> Result<Tree, PhyloError> {
    let n = matrix.len();
    if n < 3 {
        return Err(PhyloError::TooFewTaxa(n));
    }
    if !matrix.is_complete() {
        return Err(PhyloError::MissingEntries);
    }

    let mut d = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            d[i][j] = matrix.get(i, j).unwrap();
        }
    }
    // Initial variances equal the distances.
    let mut v = d.clone();

    let mut tree = Tree::new();
    // Active cluster -> tree node id. Leaves are created up front; the root
    // arena node becomes the final center.
    let mut nodes: Vec<usize> = (0..n)
        .map(|i| tree.add_node(tree.root, Some(matrix.ids[i].clone()), 0.0))
        .collect();
    // Detach them again: attachment happens as clusters merge.
    tree.nodes[tree.root].children.clear();
    for &id in &nodes {
        tree.nodes[id].parent = None;
    }

    let mut active: Vec<usize> = (0..n).collect(); // rows into d/v
    while active.len() > 3 {
        let r = active.len();
        let sums: Vec<f64> = active
            .iter()
            .map(|&i| active.iter().map(|&k| d[i][k]).sum())
            .collect();
        // Q-criterion pair selection; first minimal pair in row order.
        let mut best = (0usize, 1usize);
        let mut best_q = f64::INFINITY;
        for ai in 0..r {
            for aj in (ai + 1)..r {
                let q = (r as f64 - 2.0) * d[active[ai]][active[aj]] - sums[ai] - sums[aj];
                if q < best_q {
                    best_q = q;
                    best = (ai, aj);
                }
            }
        }
        let (ai, aj) = best;
        let (i, j) = (active[ai], active[aj]);

        let dij = d[i][j];
        let mut bi = 0.5 * dij + (sums[ai] - sums[aj]) / (2.0 * (r as f64 - 2.0));
        bi = bi.clamp(0.0, dij.max(0.0));
        let bj = (dij - bi).max(0.0);

        // Variance-weighted reduction weight.
        let mut lambda = 0.5;
        if v[i][j] > 0.0 && r > 2 {
            let mut acc = 0.0;
            for &k in &active {
                if k != i && k != j {
                    acc += v[j][k] - v[i][k];
                }
            }
            lambda = 0.5 + acc / (2.0 * (r as f64 - 2.0) * v[i][j]);
            lambda = lambda.clamp(0.0, 1.0);
        }

        // New cluster u replaces row i; row j retires.
        let u = tree.nodes.len();
        tree.nodes.push(super::Node {
            parent: None,
            children: Vec::new(),
            label: None,
            length: 0.0,
        });
        let (ni, nj) = (nodes[i], nodes[j]);
        tree.nodes[ni].parent = Some(u);
        tree.nodes[ni].length = bi;
        tree.nodes[nj].parent = Some(u);
        tree.nodes[nj].length = bj;
        tree.nodes[u].children.push(ni);
        tree.nodes[u].children.push(nj);

        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let duk = lambda * d[i][k] + (1.0 - lambda) * d[j][k] - lambda * bi
                - (1.0 - lambda) * bj;
            d[i][k] = duk;
            d[k][i] = duk;
            let vuk = lambda * v[i][k] + (1.0 - lambda) * v[j][k]
                - lambda * (1.0 - lambda) * v[i][j];
            v[i][k] = vuk;
            v[k][i] = vuk;
        }
        d[i][i] = 0.0;
        v[i][i] = 0.0;
        nodes[i] = u;
        active.remove(aj);
    }

    // Join the last three clusters on a center node.
    let (x, y, z) = (active[0], active[1], active[2]);
    let bx = 0.5 * (d[x][y] + d[x][z] - d[y][z]);
    let by = 0.5 * (d[x][y] + d[y][z] - d[x][z]);
    let bz = 0.5 * (d[x][z] + d[y][z] - d[x][y]);
    let center = tree.root;
    for (row, len) in [(x, bx), (y, by), (z, bz)] {
        let id = nodes[row];
        tree.nodes[id].parent = Some(center);
        tree.nodes[id].length = len.max(0.0);
        tree.nodes[center].children.push(id);
    }
    tree.rooted = false;
    Ok(tree)
}
