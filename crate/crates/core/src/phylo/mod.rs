//! Tree data model, Newick I/O, distance-based inference, outgroup rooting,
//! quartet-distance comparison, and root-to-tip path statistics.

mod bionj;
mod gqd;
mod newick;

pub use bionj::bionj;
pub use gqd::{gqd, GqdOptions, GqdResult};
pub use newick::{parse_newick, write_newick, ParsedNewick};

use std::collections::{BTreeSet, HashMap, HashSet};

use thiserror::Error;

use crate::lexdist::DistanceMatrix;

#[derive(Debug, Error)]
pub enum PhyloError {
    #[error("newick syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("duplicate leaf label {0:?}")]
    DuplicateLeaf(String),
    #[error("distance matrix has missing entries")]
    MissingEntries,
    #[error("need at least 3 taxa, got {0}")]
    TooFewTaxa(usize),
    #[error("leaf {0:?} not found")]
    LeafNotFound(String),
    #[error("no outgroup candidate with distances to every family member")]
    NoCandidate,
    #[error("reference tree has no resolved quartets")]
    NoResolvedQuartets,
    #[error("operation requires a rooted tree")]
    UnrootedTree,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One tree node. `length` is the branch to the parent (0 at the root).
#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub label: Option<String>,
    pub length: f64,
}

/// Arena-allocated tree. An unrooted tree is stored the same way, anchored
/// at an arbitrary internal node (typically of degree 3); the `rooted` flag
/// records which semantics apply.
#[derive(Debug, Clone)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub root: usize,
    pub rooted: bool,
}

impl Tree {
    pub fn new() -> Tree {
        Tree {
            nodes: vec![Node {
                parent: None,
                children: Vec::new(),
                label: None,
                length: 0.0,
            }],
            root: 0,
            rooted: false,
        }
    }

    /// Adds a child under `parent` and returns its id.
    pub fn add_node(&mut self, parent: usize, label: Option<String>, length: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            parent: Some(parent),
            children: Vec::new(),
            label,
            length,
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Leaf ids in depth-first order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            if self.is_leaf(id) {
                out.push(id);
            } else {
                stack.extend(self.nodes[id].children.iter().rev());
            }
        }
        out
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        self.leaves()
            .into_iter()
            .filter_map(|id| self.nodes[id].label.clone())
            .collect()
    }

    pub fn find_leaf(&self, label: &str) -> Option<usize> {
        self.leaves()
            .into_iter()
            .find(|&id| self.nodes[id].label.as_deref() == Some(label))
    }

    /// Number of neighbors in the unrooted sense.
    pub fn degree(&self, id: usize) -> usize {
        self.nodes[id].children.len() + usize::from(self.nodes[id].parent.is_some())
    }

    /// Ids in depth-first pre-order from the root.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            out.push(id);
            stack.extend(self.nodes[id].children.iter().rev());
        }
        out
    }

    /// Sum of branch lengths from the root down to `id`.
    pub fn root_path_length(&self, id: usize) -> f64 {
        let mut total = 0.0;
        let mut cur = id;
        while let Some(p) = self.nodes[cur].parent {
            total += self.nodes[cur].length;
            cur = p;
        }
        total
    }

    /// Most recent common ancestor of two nodes.
    pub fn mrca(&self, a: usize, b: usize) -> usize {
        let mut seen = HashSet::new();
        let mut cur = Some(a);
        while let Some(id) = cur {
            seen.insert(id);
            cur = self.nodes[id].parent;
        }
        let mut cur = b;
        loop {
            if seen.contains(&cur) {
                return cur;
            }
            cur = self.nodes[cur].parent.expect("nodes share the root");
        }
    }

    /// Pairwise leaf-to-leaf path lengths. With `unit_lengths` every branch
    /// counts 1 (topological distance); otherwise stored lengths are summed.
    /// Returns labels in sorted order with the matching matrix.
    pub fn leaf_distance_matrix(&self, unit_lengths: bool) -> (Vec<String>, Vec<Vec<f64>>) {
        let mut leaf_ids: Vec<usize> = self.leaves();
        leaf_ids.sort_by(|&a, &b| self.nodes[a].label.cmp(&self.nodes[b].label));
        let labels: Vec<String> = leaf_ids
            .iter()
            .map(|&id| self.nodes[id].label.clone().unwrap_or_default())
            .collect();
        // Adjacency over the arena, lengths on both directions.
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.nodes.len()];
        for (id, node) in self.nodes.iter().enumerate() {
            if let Some(p) = node.parent {
                let w = if unit_lengths { 1.0 } else { node.length };
                adj[id].push((p, w));
                adj[p].push((id, w));
            }
        }
        let n = leaf_ids.len();
        let mut m = vec![vec![0.0; n]; n];
        for (row, &start) in leaf_ids.iter().enumerate() {
            // Single-source traversal; trees have unique paths.
            let mut dist: Vec<Option<f64>> = vec![None; self.nodes.len()];
            dist[start] = Some(0.0);
            let mut stack = vec![start];
            while let Some(u) = stack.pop() {
                let du = dist[u].unwrap();
                for &(v, w) in &adj[u] {
                    if dist[v].is_none() {
                        dist[v] = Some(du + w);
                        stack.push(v);
                    }
                }
            }
            for (col, &other) in leaf_ids.iter().enumerate() {
                m[row][col] = dist[other].unwrap();
            }
        }
        (labels, m)
    }

    /// Non-trivial bipartitions of the leaf set (both sides >= 2), each
    /// canonicalized to the side not containing the smallest leaf label.
    pub fn nontrivial_splits(&self) -> BTreeSet<BTreeSet<String>> {
        let all: BTreeSet<String> = self.leaf_labels().into_iter().collect();
        let smallest = match all.iter().next() {
            Some(s) => s.clone(),
            None => return BTreeSet::new(),
        };
        let mut below: HashMap<usize, BTreeSet<String>> = HashMap::new();
        // Post-order accumulation of leaf sets.
        let order = self.preorder();
        for &id in order.iter().rev() {
            let mut set = BTreeSet::new();
            if self.is_leaf(id) {
                if let Some(l) = &self.nodes[id].label {
                    set.insert(l.clone());
                }
            } else {
                for &c in &self.nodes[id].children {
                    set.extend(below[&c].iter().cloned());
                }
            }
            below.insert(id, set);
        }
        let mut splits = BTreeSet::new();
        for id in order {
            if id == self.root {
                continue;
            }
            let side = &below[&id];
            if side.len() < 2 || all.len() - side.len() < 2 {
                continue;
            }
            let canonical = if side.contains(&smallest) {
                all.difference(side).cloned().collect()
            } else {
                side.clone()
            };
            splits.insert(canonical);
        }
        splits
    }

    /// Structural equality: same shape, labels, and lengths, with children
    /// compared in stored order. Node ids are irrelevant.
    pub fn structurally_equal(&self, other: &Tree) -> bool {
        fn eq(a: &Tree, an: usize, b: &Tree, bn: usize) -> bool {
            let (x, y) = (&a.nodes[an], &b.nodes[bn]);
            x.label == y.label
                && x.length == y.length
                && x.children.len() == y.children.len()
                && x.children
                    .iter()
                    .zip(&y.children)
                    .all(|(&ca, &cb)| eq(a, ca, b, cb))
        }
        self.rooted == other.rooted && eq(self, self.root, other, other.root)
    }

    /// Tree restricted to the given leaf labels: other leaves are pruned,
    /// childless internals dropped, and single-child internals spliced with
    /// branch lengths summed.
    pub fn restricted_to(&self, keep: &HashSet<&str>) -> Tree {
        #[derive(Clone)]
        enum Built {
            Empty,
            // A single surviving node with the length accumulated up to its
            // (eventual) attachment point.
            Chain(Box<BuiltNode>, f64),
        }
        #[derive(Clone)]
        struct BuiltNode {
            label: Option<String>,
            children: Vec<(BuiltNode, f64)>,
        }
        fn build(t: &Tree, id: usize, keep: &HashSet<&str>) -> Built {
            if t.is_leaf(id) {
                let kept = t.nodes[id]
                    .label
                    .as_deref()
                    .is_some_and(|l| keep.contains(l));
                if kept {
                    Built::Chain(
                        Box::new(BuiltNode {
                            label: t.nodes[id].label.clone(),
                            children: Vec::new(),
                        }),
                        t.nodes[id].length,
                    )
                } else {
                    Built::Empty
                }
            } else {
                let mut survivors: Vec<(BuiltNode, f64)> = Vec::new();
                for &c in &t.nodes[id].children {
                    match build(t, c, keep) {
                        Built::Empty => {}
                        Built::Chain(node, len) => survivors.push((*node, len)),
                    }
                }
                match survivors.len() {
                    0 => Built::Empty,
                    1 => {
                        // Splice this internal node out of the path.
                        let (node, len) = survivors.into_iter().next().unwrap();
                        Built::Chain(Box::new(node), len + t.nodes[id].length)
                    }
                    _ => Built::Chain(
                        Box::new(BuiltNode {
                            label: t.nodes[id].label.clone(),
                            children: survivors,
                        }),
                        t.nodes[id].length,
                    ),
                }
            }
        }
        let mut tree = Tree::new();
        tree.rooted = self.rooted;
        match build(self, self.root, keep) {
            Built::Empty => tree,
            Built::Chain(node, _) => {
                fn emit(tree: &mut Tree, parent: usize, node: &BuiltNode, length: f64) {
                    let id = tree.add_node(parent, node.label.clone(), length);
                    for (child, len) in &node.children {
                        emit(tree, id, child, *len);
                    }
                }
                tree.nodes[tree.root].label = node.label.clone();
                for (child, len) in &node.children {
                    emit(&mut tree, 0, child, *len);
                }
                tree
            }
        }
    }
}

impl Default for Tree {
    fn default() -> Self {
        Tree::new()
    }
}

/// Re-roots at the neighbor of the given outgroup leaf, prunes the leaf,
/// and suppresses any degree-2 node this creates (branch lengths summed).
pub fn root_with_outgroup(tree: &Tree, outgroup: &str) -> Result<Tree, PhyloError> {
    let o = tree
        .find_leaf(outgroup)
        .ok_or_else(|| PhyloError::LeafNotFound(outgroup.to_string()))?;
    // Adjacency with per-edge lengths.
    let n = tree.nodes.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (id, node) in tree.nodes.iter().enumerate() {
        if let Some(p) = node.parent {
            adj[id].push((p, node.length));
            adj[p].push((id, node.length));
        }
    }
    if adj[o].len() != 1 {
        return Err(PhyloError::LeafNotFound(outgroup.to_string()));
    }
    let anchor = adj[o][0].0;

    // Rebuild the arena rooted at the anchor, skipping the outgroup.
    let mut out = Tree::new();
    out.rooted = true;
    out.nodes[0].label = tree.nodes[anchor].label.clone();
    fn attach(
        adj: &[Vec<(usize, f64)>],
        labels: &[Option<String>],
        out: &mut Tree,
        out_parent: usize,
        from: usize,
        node: usize,
        skip: usize,
        length: f64,
    ) {
        let id = out.add_node(out_parent, labels[node].clone(), length);
        for &(next, w) in &adj[node] {
            if next != from && next != skip {
                attach(adj, labels, out, id, node, next, skip, w);
            }
        }
    }
    let labels: Vec<Option<String>> = tree.nodes.iter().map(|x| x.label.clone()).collect();
    for &(next, w) in &adj[anchor] {
        if next != o {
            attach(&adj, &labels, &mut out, 0, anchor, next, o, w);
        }
    }
    Ok(suppress_unary(&out))
}

/// Splices out internal nodes with exactly one child, summing branch
/// lengths; a unary root is replaced by its child.
fn suppress_unary(tree: &Tree) -> Tree {
    fn copy(src: &Tree, id: usize, dst: &mut Tree, parent: usize, extra: f64) {
        let node = &src.nodes[id];
        if node.children.len() == 1 && !src.is_leaf(id) {
            copy(src, node.children[0], dst, parent, extra + node.length);
        } else {
            let nid = dst.add_node(parent, node.label.clone(), node.length + extra);
            for &c in &node.children {
                copy(src, c, dst, nid, 0.0);
            }
        }
    }
    let mut root = tree.root;
    while tree.nodes[root].children.len() == 1 {
        root = tree.nodes[root].children[0];
    }
    let mut out = Tree::new();
    out.rooted = tree.rooted;
    out.nodes[0].label = tree.nodes[root].label.clone();
    for &c in &tree.nodes[root].children {
        copy(tree, c, &mut out, 0, 0.0);
    }
    out
}

/// Picks the taxon outside the family minimizing the mean distance to the
/// family members; candidates missing any family distance are skipped; ties
/// go to the lexicographically smallest id.
pub fn select_outgroup(
    family: &[String],
    distances: &DistanceMatrix,
) -> Result<String, PhyloError> {
    let family_set: HashSet<&str> = family.iter().map(|s| s.as_str()).collect();
    let family_idx: Vec<usize> = distances
        .ids
        .iter()
        .enumerate()
        .filter(|(_, id)| family_set.contains(id.as_str()))
        .map(|(i, _)| i)
        .collect();
    if family_idx.is_empty() {
        return Err(PhyloError::NoCandidate);
    }
    let mut best: Option<(f64, &str)> = None;
    for (i, id) in distances.ids.iter().enumerate() {
        if family_set.contains(id.as_str()) {
            continue;
        }
        let mut sum = 0.0;
        let mut ok = true;
        for &f in &family_idx {
            match distances.get(i, f) {
                Some(v) => sum += v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        let mean = sum / family_idx.len() as f64;
        let better = match best {
            None => true,
            Some((bm, bid)) => mean < bm || (mean == bm && id.as_str() < bid),
        };
        if better {
            best = Some((mean, id));
        }
    }
    best.map(|(_, id)| id.to_string())
        .ok_or(PhyloError::NoCandidate)
}

/// Root-to-tip summary for one leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct PathStats {
    pub leaf: String,
    pub length: f64,
    /// Branching (>= 2 children) internal nodes on the root-to-leaf path,
    /// root included when it branches, leaf excluded.
    pub branching_nodes: usize,
}

/// Computes root-to-tip path length and branching-node count per leaf, in
/// sorted leaf-label order.
pub fn path_stats(tree: &Tree) -> Result<Vec<PathStats>, PhyloError> {
    if !tree.rooted {
        return Err(PhyloError::UnrootedTree);
    }
    let mut out = Vec::new();
    let mut leaf_ids = tree.leaves();
    leaf_ids.sort_by(|&a, &b| tree.nodes[a].label.cmp(&tree.nodes[b].label));
    for id in leaf_ids {
        let mut length = 0.0;
        let mut branching = 0usize;
        let mut cur = id;
        while let Some(p) = tree.nodes[cur].parent {
            length += tree.nodes[cur].length;
            if tree.nodes[p].children.len() >= 2 {
                branching += 1;
            }
            cur = p;
        }
        out.push(PathStats {
            leaf: tree.nodes[id].label.clone().unwrap_or_default(),
            length,
            branching_nodes: branching,
        });
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;

    /// Random tree grown by attaching leaves to random edges (binary) or,
    /// with small probability, to random internal nodes (multifurcation).
    pub fn random_tree(
        rng: &mut impl Rng,
        n_leaves: usize,
        multifurcate: bool,
        rooted: bool,
    ) -> Tree {
        let mut t = Tree::new();
        t.rooted = rooted;
        if rooted {
            t.add_node(0, Some("L0".into()), round_len(rng.gen_range(0.1..2.0)));
            t.add_node(0, Some("L1".into()), round_len(rng.gen_range(0.1..2.0)));
        } else {
            for k in 0..3 {
                t.add_node(0, Some(format!("L{k}")), round_len(rng.gen_range(0.1..2.0)));
            }
        }
        let start = if rooted { 2 } else { 3 };
        for k in start..n_leaves {
            let label = format!("L{k}");
            if multifurcate && rng.gen_bool(0.2) {
                let internals: Vec<usize> = (0..t.nodes.len())
                    .filter(|&id| !t.is_leaf(id))
                    .collect();
                let host = internals[rng.gen_range(0..internals.len())];
                t.add_node(host, Some(label), round_len(rng.gen_range(0.1..2.0)));
            } else {
                // Subdivide the edge above a random non-root node.
                let candidates: Vec<usize> =
                    (0..t.nodes.len()).filter(|&id| id != t.root).collect();
                let below = candidates[rng.gen_range(0..candidates.len())];
                let parent = t.nodes[below].parent.unwrap();
                let old_len = t.nodes[below].length;
                let split = round_len(rng.gen_range(0.05..0.95) * old_len);
                let mid = t.nodes.len();
                t.nodes.push(Node {
                    parent: Some(parent),
                    children: vec![below],
                    label: None,
                    length: round_len(old_len - split),
                });
                let pos = t.nodes[parent]
                    .children
                    .iter()
                    .position(|&c| c == below)
                    .unwrap();
                t.nodes[parent].children[pos] = mid;
                t.nodes[below].parent = Some(mid);
                t.nodes[below].length = split;
                t.add_node(mid, Some(label), round_len(rng.gen_range(0.1..2.0)));
            }
        }
        t
    }

    /// Keeps generated lengths short in decimal form so newick text stays
    /// readable; exactness is preserved because the writer round-trips f64.
    fn round_len(v: f64) -> f64 {
        (v * 1e4).round() / 1e4
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;

    #[test]
    fn root_with_outgroup_three_leaves() {
        let t = parse_newick("(A:1,B:2,C:4);").unwrap().tree;
        let rooted = root_with_outgroup(&t, "A").unwrap();
        assert!(rooted.rooted);
        let labels = rooted.leaf_labels();
        assert_eq!(labels, vec!["B".to_string(), "C".to_string()]);
        assert_eq!(rooted.nodes[rooted.root].children.len(), 2);
        let (ls, m) = rooted.leaf_distance_matrix(false);
        assert_eq!(ls, vec!["B".to_string(), "C".to_string()]);
        assert_abs_diff_eq!(m[0][1], 6.0, epsilon = 1e-12);
    }

    #[test]
    fn rooting_preserves_leaf_path_lengths() {
        let t = parse_newick("((A:1,B:2):0.5,(C:3,D:1):0.25,E:2);")
            .unwrap()
            .tree;
        let rooted = root_with_outgroup(&t, "E").unwrap();
        let (labels0, m0) = t.leaf_distance_matrix(false);
        let (labels1, m1) = rooted.leaf_distance_matrix(false);
        for (i1, a) in labels1.iter().enumerate() {
            for (j1, b) in labels1.iter().enumerate() {
                let i0 = labels0.iter().position(|x| x == a).unwrap();
                let j0 = labels0.iter().position(|x| x == b).unwrap();
                assert_abs_diff_eq!(m1[i1][j1], m0[i0][j0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rooting_preserves_splits() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let t = testutil::random_tree(&mut rng, 8, false, false);
            let rooted = root_with_outgroup(&t, "L3").unwrap();
            let labels = rooted.leaf_labels();
            let keep: HashSet<&str> = labels.iter().map(|s| s.as_str()).collect();
            let pruned = t.restricted_to(&keep);
            assert_eq!(
                rooted.nontrivial_splits(),
                pruned.nontrivial_splits(),
                "rooting must not change the unrooted topology"
            );
        }
    }

    #[test]
    fn rooting_missing_leaf_errors() {
        let t = parse_newick("(A:1,B:2,C:4);").unwrap().tree;
        assert!(matches!(
            root_with_outgroup(&t, "Z"),
            Err(PhyloError::LeafNotFound(_))
        ));
    }

    #[test]
    fn select_outgroup_hand_matrix() {
        let mut m = DistanceMatrix::new(vec![
            "f1".into(),
            "f2".into(),
            "f3".into(),
            "x".into(),
            "y".into(),
        ]);
        // Means to family {f1,f2,f3}: x -> 0.5, y -> 0.4
        m.set(0, 3, 0.6);
        m.set(1, 3, 0.5);
        m.set(2, 3, 0.4);
        m.set(0, 4, 0.4);
        m.set(1, 4, 0.4);
        m.set(2, 4, 0.4);
        let family = vec!["f1".to_string(), "f2".to_string(), "f3".to_string()];
        assert_eq!(select_outgroup(&family, &m).unwrap(), "y");
    }

    #[test]
    fn select_outgroup_tie_prefers_smaller_id() {
        let mut m = DistanceMatrix::new(vec!["f".into(), "b".into(), "a".into()]);
        m.set(0, 1, 0.5);
        m.set(0, 2, 0.5);
        m.set(1, 2, 0.1);
        assert_eq!(select_outgroup(&["f".to_string()], &m).unwrap(), "a");
    }

    #[test]
    fn select_outgroup_single_candidate_and_missing() {
        let mut m = DistanceMatrix::new(vec!["f1".into(), "f2".into(), "x".into(), "y".into()]);
        m.set(0, 2, 0.9);
        m.set(1, 2, 0.7);
        m.set(0, 3, 0.1);
        // y is missing its distance to f2, so x is the only candidate.
        assert_eq!(
            select_outgroup(&["f1".to_string(), "f2".to_string()], &m).unwrap(),
            "x"
        );
        let empty = DistanceMatrix::new(vec!["f1".into()]);
        assert!(matches!(
            select_outgroup(&["f1".to_string()], &empty),
            Err(PhyloError::NoCandidate)
        ));
    }

    #[test]
    fn path_stats_caterpillar() {
        let mut parsed = parse_newick("((A:1,B:1):1,C:2);").unwrap();
        parsed.tree.rooted = true;
        let stats = path_stats(&parsed.tree).unwrap();
        let get = |leaf: &str| stats.iter().find(|s| s.leaf == leaf).unwrap().clone();
        assert_eq!(get("A"), PathStats { leaf: "A".into(), length: 2.0, branching_nodes: 2 });
        assert_eq!(get("B").branching_nodes, 2);
        assert_eq!(get("C"), PathStats { leaf: "C".into(), length: 2.0, branching_nodes: 1 });
    }

    #[test]
    fn path_stats_star_counts_single_node() {
        let mut parsed = parse_newick("(A:1,B:2,C:3,D:1);").unwrap();
        parsed.tree.rooted = true;
        let stats = path_stats(&parsed.tree).unwrap();
        assert!(stats.iter().all(|s| s.branching_nodes == 1));
    }

    #[test]
    fn path_stats_scaling() {
        let text = "((A:1,B:3):2,(C:1,D:4):1);";
        let mut t = parse_newick(text).unwrap().tree;
        t.rooted = true;
        let base = path_stats(&t).unwrap();
        let mut scaled = t.clone();
        for n in scaled.nodes.iter_mut() {
            n.length *= 3.0;
        }
        let after = path_stats(&scaled).unwrap();
        for (b, a) in base.iter().zip(&after) {
            assert_abs_diff_eq!(a.length, 3.0 * b.length, epsilon = 1e-12);
            assert_eq!(a.branching_nodes, b.branching_nodes);
        }
    }

    #[test]
    fn path_stats_requires_rooted() {
        let t = parse_newick("(A:1,B:2,C:3);").unwrap().tree;
        assert!(!t.rooted);
        assert!(matches!(path_stats(&t), Err(PhyloError::UnrootedTree)));
    }

    #[test]
    fn restriction_drops_and_splices() {
        let t = parse_newick("((A:1,B:2):3,(C:4,D:5):6,E:7);").unwrap().tree;
        let keep: HashSet<&str> = ["A", "C", "E"].into_iter().collect();
        let r = t.restricted_to(&keep);
        assert_eq!(r.leaf_labels(), vec!["A", "C", "E"]);
        // B pruned: A's path to the center is 1 + 3; C's is 4 + 6.
        let (labels, m) = r.leaf_distance_matrix(false);
        let idx = |l: &str| labels.iter().position(|x| x == l).unwrap();
        assert_abs_diff_eq!(m[idx("A")][idx("E")], 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m[idx("A")][idx("C")], 14.0, epsilon = 1e-12);
    }

    #[test]
    fn mrca_and_root_paths() {
        let t = parse_newick("((A:1,B:2):3,C:4);").unwrap().tree;
        let a = t.find_leaf("A").unwrap();
        let b = t.find_leaf("B").unwrap();
        let c = t.find_leaf("C").unwrap();
        let ab = t.mrca(a, b);
        assert_eq!(t.nodes[ab].parent, Some(t.root));
        assert_eq!(t.mrca(a, c), t.root);
        assert_abs_diff_eq!(t.root_path_length(a), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(t.root_path_length(ab), 3.0, epsilon = 1e-12);
    }
}
