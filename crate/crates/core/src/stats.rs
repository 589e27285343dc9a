//! Validation statistics: great-circle geography, cosine distances over
//! character vectors, Mantel tests and correlograms, phylogenetic
//! generalized least squares, Holm-Bonferroni correction, and the
//! punctuated-evolution regression workflow.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::chars::CharacterMatrix;
use crate::corpus::Corpus;
use crate::lexdist::DistanceMatrix;
use crate::phylo::{bionj, path_stats, root_with_outgroup, select_outgroup, PhyloError, Tree};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("coordinate out of range: ({0}, {1})")]
    OutOfRange(f64, f64),
    #[error("taxa {0:?} and {1:?} share no usable characters")]
    ZeroVector(String, String),
    #[error("matrix size mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("matrix has no variance; correlation undefined")]
    ConstantMatrix,
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { got: usize, needed: usize },
    #[error("bin edges must be strictly increasing, with at least two")]
    InvalidBins,
    #[error("covariance matrix is singular")]
    SingularCovariance,
    #[error("family {0:?} has no members in the corpus")]
    EmptyFamily(String),
    #[error(transparent)]
    Phylo(#[from] PhyloError),
}

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Haversine distance in kilometers. Latitudes must lie in [-90, 90] and
/// longitudes in [-180, 180].
pub fn great_circle(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> Result<f64, StatsError> {
    for &(lat, lon) in &[(lat1, lon1), (lat2, lon2)] {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(StatsError::OutOfRange(lat, lon));
        }
    }
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = (lat2 - lat1).to_radians();
    let dl = (lon2 - lon1).to_radians();
    // Rounding can push `a` a hair past 1 for antipodes.
    let a = ((dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2))
        .clamp(0.0, 1.0);
    let c = 2.0 * a.sqrt().atan2((1.0 - a).sqrt());
    Ok(EARTH_RADIUS_KM * c)
}

/// Pairwise great-circle distances in kilometers. Symmetric with a zero
/// diagonal; no entry can exceed half the great circle (about 20,015 km).
#[derive(Debug, Clone, PartialEq)]
pub struct GeoMatrix {
    pub ids: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl GeoMatrix {
    pub fn from_coordinates(points: &[(String, f64, f64)]) -> Result<GeoMatrix, StatsError> {
        let n = points.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = great_circle(points[i].1, points[i].2, points[j].1, points[j].2)?;
                rows[i][j] = d;
                rows[j][i] = d;
            }
        }
        Ok(GeoMatrix { ids: points.iter().map(|p| p.0.clone()).collect(), rows })
    }

    /// Doculects without coordinates are left out.
    pub fn from_corpus(corpus: &Corpus) -> Result<GeoMatrix, StatsError> {
        let points: Vec<(String, f64, f64)> = corpus
            .doculects
            .iter()
            .filter_map(|d| match (d.latitude, d.longitude) {
                (Some(lat), Some(lon)) => Some((d.id.clone(), lat, lon)),
                _ => None,
            })
            .collect();
        GeoMatrix::from_coordinates(&points)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// 1 minus the cosine of the angle between two taxa's 0/1 character
/// vectors, restricted to characters defined for both. Errors unless the
/// restriction leaves both sides with at least one 1.
pub fn cosine_character_distance(
    matrix: &CharacterMatrix,
    t1: usize,
    t2: usize,
) -> Result<f64, StatsError> {
    let (mut both, mut n1, mut n2) = (0u64, 0u64, 0u64);
    for c in 0..matrix.nchars() {
        if let (Some(a), Some(b)) = (matrix.get(t1, c), matrix.get(t2, c)) {
            n1 += u64::from(a);
            n2 += u64::from(b);
            both += u64::from(a && b);
        }
    }
    if n1 == 0 || n2 == 0 {
        return Err(StatsError::ZeroVector(
            matrix.taxa[t1].clone(),
            matrix.taxa[t2].clone(),
        ));
    }
    Ok(1.0 - both as f64 / ((n1 as f64).sqrt() * (n2 as f64).sqrt()))
}

/// Upper-triangle value vectors, validated square and mutually sized.
fn triangle_pair(
    d_a: &[Vec<f64>],
    d_b: &[Vec<f64>],
) -> Result<(usize, Vec<f64>, Vec<f64>), StatsError> {
    let n = d_a.len();
    if d_b.len() != n {
        return Err(StatsError::SizeMismatch(n, d_b.len()));
    }
    for m in [d_a, d_b] {
        for (i, r) in m.iter().enumerate() {
            if r.len() != n {
                return Err(StatsError::NotSquare { row: i, len: r.len(), n });
            }
        }
    }
    let mut a = Vec::with_capacity(n * (n - 1) / 2);
    let mut b = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            a.push(d_a[i][j]);
            b.push(d_b[i][j]);
        }
    }
    Ok((n, a, b))
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Stream seed for the k-th parallel draw of a seeded procedure.
fn stream_seed(seed: u64, index: u64) -> u64 {
    seed ^ (index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MantelResult {
    pub r: f64,
    pub p: f64,
}

/// Mantel test between two symmetric distance matrices: Pearson correlation
/// over upper-triangle entries, with a one-sided permutation p-value from
/// jointly permuting rows and columns of `d_b`. Only the upper triangles
/// are read. Permutations run in parallel on per-permutation seeds, so the
/// result does not depend on the worker count.
pub fn mantel(
    d_a: &[Vec<f64>],
    d_b: &[Vec<f64>],
    permutations: usize,
    seed: u64,
) -> Result<MantelResult, StatsError> {
    let (n, a_vals, _) = triangle_pair(d_a, d_b)?;
    let (mean_a, sd_a) = mean_sd(&a_vals);
    let b_vals: Vec<f64> = (0..n).flat_map(|i| (i + 1..n).map(move |j| d_b[i][j])).collect();
    let (mean_b, sd_b) = mean_sd(&b_vals);
    if sd_a == 0.0 || sd_b == 0.0 {
        return Err(StatsError::ConstantMatrix);
    }
    let centered_a: Vec<f64> = a_vals.iter().map(|v| v - mean_a).collect();
    let m = centered_a.len() as f64;
    let r_of = |order: &[usize]| {
        let mut sum = 0.0;
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                sum += centered_a[k] * (d_b[order[i]][order[j]] - mean_b);
                k += 1;
            }
        }
        sum / (m * sd_a * sd_b)
    };
    let identity: Vec<usize> = (0..n).collect();
    let r_obs = r_of(&identity);
    let hits: u64 = (0..permutations as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, k));
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            u64::from(r_of(&order) >= r_obs)
        })
        .sum();
    let p = (1 + hits) as f64 / (permutations + 1) as f64;
    Ok(MantelResult { r: r_obs, p })
}

/// One distance class of a correlogram. `r` and `p` are absent when the
/// class was excluded (no pairs, or an indicator without variance).
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelogramBin {
    pub lower: f64,
    pub upper: f64,
    pub n_pairs: usize,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub significant: bool,
    pub excluded: bool,
}

/// Default distance classes: ten 1,000 km bins from 0 to 10,000 km.
pub fn default_correlogram_bins() -> Vec<f64> {
    (0..=10).map(|k| 1000.0 * k as f64).collect()
}

const CORRELOGRAM_ALPHA: f64 = 0.05;

/// Mantel correlogram: per distance class, the membership indicator matrix
/// (1 for pairs whose geographic distance falls in the class) is tested
/// against `d_ling`, permuting `d_ling` jointly. The correlation sign is
/// flipped so that low linguistic distance at short range reads as positive
/// autocorrelation. p-values are two-sided; significance is p < 0.05.
/// Pairs beyond the last edge belong to no class but still contribute
/// zeros to every indicator.
pub fn mantel_correlogram(
    d_geo: &GeoMatrix,
    d_ling: &[Vec<f64>],
    bins: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<Vec<CorrelogramBin>, StatsError> {
    if bins.len() < 2 || bins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(StatsError::InvalidBins);
    }
    let (n, geo_vals, ling_vals) = triangle_pair(d_geo.rows(), d_ling)?;
    let (mean_l, sd_l) = mean_sd(&ling_vals);
    if sd_l == 0.0 {
        return Err(StatsError::ConstantMatrix);
    }
    let mut out = Vec::with_capacity(bins.len() - 1);
    for (bi, w) in bins.windows(2).enumerate() {
        let (lower, upper) = (w[0], w[1]);
        let in_bin = |d: f64| d >= lower && d < upper;
        let indicator: Vec<f64> = geo_vals.iter().map(|&d| f64::from(in_bin(d))).collect();
        let n_pairs = indicator.iter().filter(|&&v| v > 0.0).count();
        let (mean_i, sd_i) = mean_sd(&indicator);
        if n_pairs == 0 || sd_i == 0.0 {
            out.push(CorrelogramBin {
                lower,
                upper,
                n_pairs,
                r: None,
                p: None,
                significant: false,
                excluded: true,
            });
            continue;
        }
        let centered_i: Vec<f64> = indicator.iter().map(|v| v - mean_i).collect();
        let m = centered_i.len() as f64;
        let r_of = |order: &[usize]| {
            let mut sum = 0.0;
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    sum += centered_i[k] * (d_ling[order[i]][order[j]] - mean_l);
                    k += 1;
                }
            }
            -sum / (m * sd_i * sd_l)
        };
        let identity: Vec<usize> = (0..n).collect();
        let r_obs = r_of(&identity);
        let (hi, lo) = (0..permutations as u64)
            .into_par_iter()
            .map(|k| {
                let stream = ((bi as u64) << 32) | k;
                let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, stream));
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut rng);
                let r = r_of(&order);
                (u64::from(r >= r_obs), u64::from(r <= r_obs))
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1));
        let denom = (permutations + 1) as f64;
        let p_hi = (1 + hi) as f64 / denom;
        let p_lo = (1 + lo) as f64 / denom;
        let p = (2.0 * p_hi.min(p_lo)).min(1.0);
        out.push(CorrelogramBin {
            lower,
            upper,
            n_pairs,
            r: Some(r_obs),
            p: Some(p),
            significant: p < CORRELOGRAM_ALPHA,
            excluded: false,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub p_value: f64,
    pub n_taxa: usize,
}

/// In-place lower Cholesky factor; fails on a non-positive-definite input.
fn cholesky(v: &mut [Vec<f64>]) -> Result<(), StatsError> {
    let n = v.len();
    let scale = v.iter().enumerate().map(|(i, r)| r[i].abs()).fold(0.0f64, f64::max);
    let tiny = 1e-12 * scale.max(1.0);
    for j in 0..n {
        let mut d = v[j][j];
        for k in 0..j {
            d -= v[j][k] * v[j][k];
        }
        if d <= tiny {
            return Err(StatsError::SingularCovariance);
        }
        let l = d.sqrt();
        v[j][j] = l;
        for i in j + 1..n {
            let mut s = v[i][j];
            for k in 0..j {
                s -= v[i][k] * v[j][k];
            }
            v[i][j] = s / l;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            v[i][j] = 0.0;
        }
    }
    Ok(())
}

fn forward_solve(l: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i][k] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

/// Generalized least squares of `y` on `x` under Brownian covariance along
/// the tree: V[i][j] is the root-to-MRCA path length of leaves i and j.
/// `x` and `y` follow sorted leaf-label order (the order `path_stats`
/// reports). The slope's two-sided t-test uses n-2 degrees of freedom.
pub fn pgls(tree: &Tree, x: &[f64], y: &[f64]) -> Result<RegressionResult, StatsError> {
    if !tree.rooted {
        return Err(StatsError::Phylo(PhyloError::UnrootedTree));
    }
    let mut leaf_ids = tree.leaves();
    leaf_ids.sort_by(|&a, &b| tree.nodes[a].label.cmp(&tree.nodes[b].label));
    let n = leaf_ids.len();
    if x.len() != n || y.len() != n {
        return Err(StatsError::SizeMismatch(x.len().max(y.len()), n));
    }
    if n < 3 {
        return Err(StatsError::TooFewObservations { got: n, needed: 3 });
    }

    // Root-to-node path lengths, then per-leaf ancestor chains (root first);
    // the MRCA of two leaves is the last shared chain element.
    let mut depth = vec![0.0; tree.nodes.len()];
    for id in tree.preorder() {
        if let Some(p) = tree.nodes[id].parent {
            depth[id] = depth[p] + tree.nodes[id].length;
        }
    }
    let chains: Vec<Vec<usize>> = leaf_ids
        .iter()
        .map(|&leaf| {
            let mut chain = vec![leaf];
            let mut cur = leaf;
            while let Some(p) = tree.nodes[cur].parent {
                chain.push(p);
                cur = p;
            }
            chain.reverse();
            chain
        })
        .collect();
    let mut v = vec![vec![0.0; n]; n];
    for i in 0..n {
        v[i][i] = depth[leaf_ids[i]];
        for j in i + 1..n {
            let (a, b) = (&chains[i], &chains[j]);
            let mut mrca = a[0];
            for k in 1..a.len().min(b.len()) {
                if a[k] != b[k] {
                    break;
                }
                mrca = a[k];
            }
            v[i][j] = depth[mrca];
            v[j][i] = depth[mrca];
        }
    }

    cholesky(&mut v)?;
    let ones = vec![1.0; n];
    let w0 = forward_solve(&v, &ones);
    let w1 = forward_solve(&v, x);
    let z = forward_solve(&v, y);

    // 2x2 normal equations for [intercept, slope].
    let s00: f64 = w0.iter().map(|a| a * a).sum();
    let s01: f64 = w0.iter().zip(&w1).map(|(a, b)| a * b).sum();
    let s11: f64 = w1.iter().map(|a| a * a).sum();
    let t0: f64 = w0.iter().zip(&z).map(|(a, b)| a * b).sum();
    let t1: f64 = w1.iter().zip(&z).map(|(a, b)| a * b).sum();
    let det = s00 * s11 - s01 * s01;
    if det.abs() <= 1e-12 * (s00 * s11).abs().max(1.0) {
        return Err(StatsError::SingularCovariance);
    }
    let intercept = (s11 * t0 - s01 * t1) / det;
    let slope = (s00 * t1 - s01 * t0) / det;

    let rss: f64 = w0
        .iter()
        .zip(&w1)
        .zip(&z)
        .map(|((a, b), c)| {
            let fit = intercept * a + slope * b;
            (c - fit) * (c - fit)
        })
        .sum();
    let df = (n - 2) as f64;
    let sigma2 = (rss / df).max(0.0);
    let var_slope = sigma2 * s00 / det;
    let p_value = if var_slope <= 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let t = slope / var_slope.sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
    };
    Ok(RegressionResult { slope, intercept, p_value, n_taxa: n })
}

/// Step-down Holm-Bonferroni at level `alpha`: p-values are ranked
/// ascending and rejected while p ranked k-th (1-based) stays at or below
/// alpha / (m - k + 1); the first failure stops the walk. Ties keep input
/// order. All p must lie in [0, 1].
pub fn holm_bonferroni(p: &[f64], alpha: f64) -> Vec<bool> {
    assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)), "p-values must lie in [0,1]");
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let mut flags = vec![false; m];
    for (rank, &idx) in order.iter().enumerate() {
        if p[idx] <= alpha / (m - rank) as f64 {
            flags[idx] = true;
        } else {
            break;
        }
    }
    flags
}

/// One row of the punctuation table.
#[derive(Debug, Clone, PartialEq)]
pub struct PunctuationRow {
    pub family: String,
    pub slope: f64,
    pub intercept: f64,
    pub p_value: f64,
    pub n_taxa: usize,
    pub significant: bool,
}

/// Regression of root-to-tip branching-node counts on root-to-tip path
/// lengths, per family, with Holm-Bonferroni across families.
///
/// `delta_flags` names the families under study; `true` marks a positive
/// node-density test, which excludes the family. A family without an entry
/// in `trees` gets a fallback tree: neighbor joining over the family's
/// distances plus the closest outside doculect, rooted there, the outgroup
/// pruned. Supplied trees are used as-is and must be rooted with any
/// outgroup already removed. Rows are ordered by p-value, then family.
pub fn punctuation_analysis(
    corpus: &Corpus,
    dmatrix: &DistanceMatrix,
    trees: &BTreeMap<String, Tree>,
    delta_flags: &BTreeMap<String, bool>,
    alpha: f64,
) -> Result<Vec<PunctuationRow>, StatsError> {
    let mut rows = Vec::new();
    for (family, &delta_positive) in delta_flags {
        if delta_positive {
            continue;
        }
        let tree = match trees.get(family) {
            Some(t) => t.clone(),
            None => fallback_family_tree(corpus, dmatrix, family)?,
        };
        let stats = path_stats(&tree)?;
        let x: Vec<f64> = stats.iter().map(|s| s.length).collect();
        let y: Vec<f64> = stats.iter().map(|s| s.branching_nodes as f64).collect();
        let fit = pgls(&tree, &x, &y)?;
        rows.push(PunctuationRow {
            family: family.clone(),
            slope: fit.slope,
            intercept: fit.intercept,
            p_value: fit.p_value,
            n_taxa: fit.n_taxa,
            significant: false,
        });
    }
    let p: Vec<f64> = rows.iter().map(|r| r.p_value).collect();
    for (row, flag) in rows.iter_mut().zip(holm_bonferroni(&p, alpha)) {
        row.significant = flag;
    }
    rows.sort_by(|a, b| {
        a.p_value.partial_cmp(&b.p_value).unwrap().then_with(|| a.family.cmp(&b.family))
    });
    Ok(rows)
}

/// Neighbor joining over the family plus its nearest outside doculect,
/// rooted at that outgroup and pruned of it.
fn fallback_family_tree(
    corpus: &Corpus,
    dmatrix: &DistanceMatrix,
    family: &str,
) -> Result<Tree, StatsError> {
    let members: Vec<String> = corpus
        .doculects
        .iter()
        .filter(|d| d.family == family)
        .map(|d| d.id.clone())
        .collect();
    if members.is_empty() {
        return Err(StatsError::EmptyFamily(family.to_string()));
    }
    let outgroup = select_outgroup(&members, dmatrix)?;
    let mut ids = members.clone();
    ids.push(outgroup.clone());
    let mut sub = DistanceMatrix::new(ids.clone());
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let (gi, gj) = (
                dmatrix.index_of(&ids[i]).expect("id from this matrix"),
                dmatrix.index_of(&ids[j]).expect("id from this matrix"),
            );
            if let Some(v) = dmatrix.get(gi, gj) {
                sub.set(i, j, v);
            }
        }
    }
    let unrooted = bionj(&sub)?;
    Ok(root_with_outgroup(&unrooted, &outgroup)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chars::{CharKind, Character};
    use crate::phylo::parse_newick;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    #[test]
    fn great_circle_matches_known_arcs() {
        assert_abs_diff_eq!(great_circle(12.0, 34.0, 12.0, 34.0).unwrap(), 0.0);
        assert_abs_diff_eq!(great_circle(0.0, 0.0, 0.0, 180.0).unwrap(), 20015.1, epsilon = 0.1);
        assert_abs_diff_eq!(great_circle(0.0, 0.0, 0.0, 90.0).unwrap(), 10007.5, epsilon = 0.1);
        assert_abs_diff_eq!(great_circle(90.0, 0.0, -90.0, 0.0).unwrap(), 20015.1, epsilon = 0.1);
    }

    #[test]
    fn great_circle_rejects_bad_coordinates() {
        assert!(matches!(great_circle(91.0, 0.0, 0.0, 0.0), Err(StatsError::OutOfRange(..))));
        assert!(matches!(great_circle(0.0, 0.0, 0.0, -181.0), Err(StatsError::OutOfRange(..))));
    }

    #[test]
    fn geo_matrix_is_symmetric_zero_diagonal_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let points: Vec<(String, f64, f64)> = (0..12)
            .map(|k| {
                (format!("p{k}"), rng.gen_range(-90.0..90.0), rng.gen_range(-180.0..180.0))
            })
            .collect();
        let geo = GeoMatrix::from_coordinates(&points).unwrap();
        for i in 0..geo.len() {
            assert_eq!(geo.get(i, i), 0.0);
            for j in 0..geo.len() {
                assert_eq!(geo.get(i, j), geo.get(j, i));
                assert!(geo.get(i, j) <= 20_038.0);
            }
        }
    }

    #[test]
    fn geo_matrix_skips_doculects_without_coordinates() {
        let mut corpus_docs = Vec::new();
        for (id, lat) in [("a", Some(10.0)), ("b", None), ("c", Some(-20.0))] {
            let mut d = crate::corpus::Doculect::new(id, id, "fam");
            d.latitude = lat;
            d.longitude = lat.map(|v| v / 2.0);
            corpus_docs.push(d);
        }
        let corpus = Corpus::from_doculects(corpus_docs);
        let geo = GeoMatrix::from_corpus(&corpus).unwrap();
        assert_eq!(geo.ids, vec!["a".to_string(), "c".to_string()]);
    }

    fn char_matrix(rows: &[(&str, &[Option<bool>])]) -> CharacterMatrix {
        let nchars = rows[0].1.len();
        let characters: Vec<Character> = (0..nchars)
            .map(|k| Character { id: format!("ch{k}"), kind: CharKind::Cc })
            .collect();
        let taxa: Vec<String> = rows.iter().map(|r| r.0.to_string()).collect();
        let mut m = CharacterMatrix::new(taxa, characters);
        for (t, row) in rows.iter().enumerate() {
            for (c, &v) in row.1.iter().enumerate() {
                m.set(t, c, v);
            }
        }
        m
    }

    #[test]
    fn cosine_distance_hand_values() {
        let t = Some(true);
        let f = Some(false);
        let m = char_matrix(&[
            ("x", &[t, t, f]),
            ("y", &[t, f, t]),
            ("same", &[t, t, f]),
            ("disjoint", &[f, f, t]),
        ]);
        assert_abs_diff_eq!(cosine_character_distance(&m, 0, 2).unwrap(), 0.0);
        assert_abs_diff_eq!(cosine_character_distance(&m, 0, 3).unwrap(), 1.0);
        assert_abs_diff_eq!(cosine_character_distance(&m, 0, 1).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cosine_distance_rejects_empty_joint_support() {
        let t = Some(true);
        let f = Some(false);
        let m = char_matrix(&[
            ("x", &[t, None, f]),
            ("y", &[None, t, f]),
            ("z", &[f, f, f]),
        ]);
        assert!(matches!(
            cosine_character_distance(&m, 0, 1),
            Err(StatsError::ZeroVector(..))
        ));
        assert!(matches!(
            cosine_character_distance(&m, 0, 2),
            Err(StatsError::ZeroVector(..))
        ));
    }

    #[test]
    fn cosine_distance_ignores_masked_characters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let nchars = rng.gen_range(3..10);
            let gen_row = |rng: &mut ChaCha8Rng| -> Vec<Option<bool>> {
                (0..nchars)
                    .map(|_| match rng.gen_range(0..3) {
                        0 => None,
                        1 => Some(false),
                        _ => Some(true),
                    })
                    .collect()
            };
            let (ra, rb) = (gen_row(&mut rng), gen_row(&mut rng));
            let m = char_matrix(&[("a", &ra), ("b", &rb)]);
            let base = cosine_character_distance(&m, 0, 1);
            // Append a character undefined for one side; the result is
            // unchanged.
            let mut ra2 = ra.clone();
            let mut rb2 = rb.clone();
            ra2.push(None);
            rb2.push(Some(rng.gen_bool(0.5)));
            let m2 = char_matrix(&[("a", &ra2), ("b", &rb2)]);
            let extended = cosine_character_distance(&m2, 0, 1);
            match (base, extended) {
                (Ok(x), Ok(y)) => assert_abs_diff_eq!(x, y, epsilon = 1e-15),
                (Err(StatsError::ZeroVector(..)), Err(StatsError::ZeroVector(..))) => {}
                other => panic!("masking changed the outcome: {other:?}"),
            }
        }
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = rng.gen_range(0.0..1.0);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        m
    }

    #[test]
    fn mantel_identical_matrices_hit_the_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_symmetric(&mut rng, 10);
        let res = mantel(&a, &a, 999, 42).unwrap();
        assert_abs_diff_eq!(res.r, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(res.p, 0.001, epsilon = 1e-15);
    }

    #[test]
    fn mantel_r_is_invariant_under_joint_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let n = 9;
        let a = random_symmetric(&mut rng, n);
        let b = random_symmetric(&mut rng, n);
        let base = mantel(&a, &b, 99, 5).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let relabel = |m: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| m[order[i]][order[j]]).collect()).collect()
        };
        let moved = mantel(&relabel(&a), &relabel(&b), 99, 5).unwrap();
        assert_abs_diff_eq!(base.r, moved.r, epsilon = 1e-12);
        // Same call twice: identical output.
        let again = mantel(&a, &b, 99, 5).unwrap();
        assert_eq!(base, again);
    }

    #[test]
    fn mantel_p_is_uniform_under_independence() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let replicates = 200;
        let mut ps = Vec::with_capacity(replicates);
        for _ in 0..replicates {
            let a = random_symmetric(&mut rng, 30);
            let b = random_symmetric(&mut rng, 30);
            ps.push(mantel(&a, &b, 199, rng.gen()).unwrap().p);
        }
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = ps.len() as f64;
        let mut d = 0.0f64;
        for (i, &p) in ps.iter().enumerate() {
            d = d.max((i + 1) as f64 / n - p).max(p - i as f64 / n);
        }
        // Kolmogorov-Smirnov critical value at alpha = 0.01.
        assert!(d < 1.628 / n.sqrt(), "KS statistic {d} rejects uniformity");
    }

    #[test]
    fn mantel_rejects_mismatched_and_constant_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_symmetric(&mut rng, 5);
        let b = random_symmetric(&mut rng, 6);
        assert!(matches!(mantel(&a, &b, 9, 0), Err(StatsError::SizeMismatch(5, 6))));
        let flat = vec![vec![0.5; 5]; 5];
        assert!(matches!(mantel(&a, &flat, 9, 0), Err(StatsError::ConstantMatrix)));
    }

    /// Two tight clusters about 8,000 km apart: within-cluster pairs land in
    /// the first bin, and with d_ling = d_geo the first class must show
    /// significant positive autocorrelation.
    #[test]
    fn correlogram_flags_short_range_signal() {
        let mut points = Vec::new();
        for k in 0..6 {
            points.push((format!("a{k}"), 0.1 * k as f64, 0.1 * k as f64));
        }
        for k in 0..6 {
            points.push((format!("b{k}"), 50.0 + 0.1 * k as f64, 70.0 + 0.1 * k as f64));
        }
        let geo = GeoMatrix::from_coordinates(&points).unwrap();
        let ling: Vec<Vec<f64>> = geo.rows().to_vec();
        let bins = default_correlogram_bins();
        let out = mantel_correlogram(&geo, &ling, &bins, 999, 4).unwrap();
        let first = &out[0];
        assert!(!first.excluded);
        assert!(first.n_pairs >= 15);
        assert!(first.r.unwrap() > 0.0);
        assert!(first.significant, "first bin p = {:?}", first.p);
    }

    #[test]
    fn correlogram_calibrates_near_the_nominal_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let bins = default_correlogram_bins();
        let mut tested = 0usize;
        let mut significant = 0usize;
        for _ in 0..60 {
            let points: Vec<(String, f64, f64)> = (0..16)
                .map(|k| {
                    (format!("p{k}"), rng.gen_range(-60.0..60.0), rng.gen_range(-180.0..180.0))
                })
                .collect();
            let geo = GeoMatrix::from_coordinates(&points).unwrap();
            let ling = random_symmetric(&mut rng, 16);
            for bin in mantel_correlogram(&geo, &ling, &bins, 99, rng.gen()).unwrap() {
                if !bin.excluded {
                    tested += 1;
                    significant += usize::from(bin.significant);
                }
            }
        }
        assert!(tested >= 300, "too few usable bins: {tested}");
        let rate = significant as f64 / tested as f64;
        assert!((0.005..=0.11).contains(&rate), "false positive rate {rate} ({significant}/{tested})");
    }

    #[test]
    fn correlogram_flags_empty_bins_and_checks_edges() {
        let points = vec![
            ("a".to_string(), 0.0, 0.0),
            ("b".to_string(), 0.001, 0.0),
            ("c".to_string(), 0.0, 0.001),
            ("d".to_string(), 0.001, 0.001),
            // One far-away point whose pairs fall beyond every bin edge.
            ("e".to_string(), 0.0, 179.0),
        ];
        let geo = GeoMatrix::from_coordinates(&points).unwrap();
        let ling = {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            random_symmetric(&mut rng, 5)
        };
        let bins = vec![0.0, 1.0, 5000.0, 6000.0];
        let out = mantel_correlogram(&geo, &ling, &bins, 99, 0).unwrap();
        assert_eq!(out.len(), 3);
        assert!(!out[0].excluded, "near pairs populate the first bin");
        assert!(out[1].excluded && out[1].n_pairs == 0);
        assert!(out[2].excluded && out[2].r.is_none() && !out[2].significant);

        assert!(matches!(
            mantel_correlogram(&geo, &ling, &[1000.0], 9, 0),
            Err(StatsError::InvalidBins)
        ));
        assert!(matches!(
            mantel_correlogram(&geo, &ling, &[0.0, 0.0, 10.0], 9, 0),
            Err(StatsError::InvalidBins)
        ));
    }

    /// Star tree with unit branches: V = I, so the fit must agree with
    /// ordinary least squares to machine precision.
    #[test]
    fn pgls_on_a_star_tree_is_ordinary_least_squares() {
        let mut t = Tree::new();
        t.rooted = true;
        let n = 8;
        for k in 0..n {
            t.add_node(0, Some(format!("L{k}")), 1.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 * v + rng.gen_range(-0.5..0.5)).collect();
        let fit = pgls(&t, &x, &y).unwrap();

        let nf = n as f64;
        let mx = x.iter().sum::<f64>() / nf;
        let my = y.iter().sum::<f64>() / nf;
        let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        assert_abs_diff_eq!(fit.slope, slope, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.intercept, intercept, epsilon = 1e-10);
        let rss: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - intercept - slope * a) * (b - intercept - slope * a))
            .sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let tstat = slope / se;
        let dist = StudentsT::new(0.0, 1.0, nf - 2.0).unwrap();
        assert_abs_diff_eq!(fit.p_value, 2.0 * dist.sf(tstat.abs()), epsilon = 1e-10);
    }

    #[test]
    fn pgls_perfect_fit_has_vanishing_p() {
        let tree = {
            let mut parsed = parse_newick("((A:1,B:2):1,(C:1,D:3):2);").unwrap();
            parsed.tree.rooted = true;
            parsed.tree
        };
        let stats = path_stats(&tree).unwrap();
        let x: Vec<f64> = stats.iter().map(|s| s.length).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let fit = pgls(&tree, &x, &y).unwrap();
        assert_abs_diff_eq!(fit.slope, 2.0, epsilon = 1e-9);
        assert!(fit.p_value < 1e-6, "p = {}", fit.p_value);
    }

    /// Dense oracle: invert V by Gauss-Jordan and apply the textbook GLS
    /// formulas directly.
    #[test]
    fn pgls_matches_a_dense_solver_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let tree = {
            let mut t = crate::phylo::testutil::random_tree(&mut rng, 10, false, true);
            t.rooted = true;
            t
        };
        let mut leaf_ids = tree.leaves();
        leaf_ids.sort_by(|&a, &b| tree.nodes[a].label.cmp(&tree.nodes[b].label));
        let n = leaf_ids.len();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.7 * v + rng.gen_range(-1.0..1.0)).collect();
        let fit = pgls(&tree, &x, &y).unwrap();

        // V via per-pair MRCA lookups on the public tree API.
        let mut v = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let m = tree.mrca(leaf_ids[i], leaf_ids[j]);
                v[i][j] = tree.root_path_length(m);
            }
        }
        let vinv = gauss_jordan_inverse(&v);
        // beta = (Xt Vi X)^-1 Xt Vi y with X = [1 x].
        let xt = [vec![1.0; n], x.clone()];
        let mut xtvx = [[0.0; 2]; 2];
        let mut xtvy = [0.0; 2];
        for a in 0..2 {
            for b in 0..2 {
                for i in 0..n {
                    for j in 0..n {
                        xtvx[a][b] += xt[a][i] * vinv[i][j] * xt[b][j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    xtvy[a] += xt[a][i] * vinv[i][j] * y[j];
                }
            }
        }
        let det = xtvx[0][0] * xtvx[1][1] - xtvx[0][1] * xtvx[1][0];
        let intercept = (xtvx[1][1] * xtvy[0] - xtvx[0][1] * xtvy[1]) / det;
        let slope = (xtvx[0][0] * xtvy[1] - xtvx[1][0] * xtvy[0]) / det;
        assert_abs_diff_eq!(fit.intercept, intercept, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.slope, slope, epsilon = 1e-8);

        let mut rss = 0.0;
        let resid: Vec<f64> =
            (0..n).map(|i| y[i] - intercept - slope * x[i]).collect();
        for i in 0..n {
            for j in 0..n {
                rss += resid[i] * vinv[i][j] * resid[j];
            }
        }
        let sigma2 = rss / (n as f64 - 2.0);
        let se = (sigma2 * xtvx[0][0] / det).sqrt();
        let dist = StudentsT::new(0.0, 1.0, n as f64 - 2.0).unwrap();
        let p = 2.0 * dist.sf((slope / se).abs());
        assert_abs_diff_eq!(fit.p_value, p, epsilon = 1e-8);
    }

    fn gauss_jordan_inverse(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = v.len();
        let mut a: Vec<Vec<f64>> = v
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| f64::from(u8::from(i == j))));
                r
            })
            .collect();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())
                .unwrap();
            a.swap(col, pivot);
            let scale = a[col][col];
            for x in a[col].iter_mut() {
                *x /= scale;
            }
            for row in 0..n {
                if row != col {
                    let f = a[row][col];
                    for k in 0..2 * n {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        a.into_iter().map(|row| row[n..].to_vec()).collect()
    }

    #[test]
    fn pgls_rejects_degenerate_input() {
        let tree = {
            let mut parsed = parse_newick("((A:0,B:0):1,C:1);").unwrap();
            parsed.tree.rooted = true;
            parsed.tree
        };
        // A and B have identical covariance rows.
        let r = pgls(&tree, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!(matches!(r, Err(StatsError::SingularCovariance)));

        let mut star = Tree::new();
        star.rooted = true;
        for k in 0..4 {
            star.add_node(0, Some(format!("L{k}")), 1.0);
        }
        // Constant predictor.
        let r = pgls(&star, &[2.0; 4], &[1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(r, Err(StatsError::SingularCovariance)));
        let r = pgls(&star, &[1.0, 2.0], &[1.0, 2.0]);
        assert!(matches!(r, Err(StatsError::SizeMismatch(..))));
        let unrooted = parse_newick("(A:1,B:1,C:1);").unwrap().tree;
        let r = pgls(&unrooted, &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        assert!(matches!(r, Err(StatsError::Phylo(PhyloError::UnrootedTree))));
    }

    #[test]
    fn holm_bonferroni_hand_cases() {
        assert_eq!(holm_bonferroni(&[0.01, 0.04], 0.05), vec![true, true]);
        assert_eq!(holm_bonferroni(&[0.03, 0.04], 0.05), vec![false, false]);
        assert_eq!(holm_bonferroni(&[], 0.05), Vec::<bool>::new());
        // The step-down walk stops at the first failure even when a later
        // p would pass its own threshold.
        assert_eq!(
            holm_bonferroni(&[0.04, 0.012, 0.2], 0.05),
            vec![false, true, false]
        );
    }

    #[test]
    fn holm_bonferroni_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let m = rng.gen_range(1..8);
            let p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            let base = holm_bonferroni(&p, 0.05);
            let mut lowered = p.clone();
            let k = rng.gen_range(0..m);
            lowered[k] *= rng.gen_range(0.0..1.0);
            let after = holm_bonferroni(&lowered, 0.05);
            for i in 0..m {
                assert!(
                    !base[i] || after[i],
                    "lowering p[{k}] turned {i} non-significant: {p:?} -> {lowered:?}"
                );
            }
        }
    }

    /// Caterpillar with unit branches: node count equals path length on
    /// every leaf, so the slope is exactly 1 with a vanishing p-value.
    #[test]
    fn punctuation_detects_a_perfect_clock() {
        let tree = {
            let mut parsed = parse_newick("((((A:1,B:1):1,C:1):1,D:1):1,E:1);").unwrap();
            parsed.tree.rooted = true;
            parsed.tree
        };
        let corpus = Corpus::from_doculects(vec![]);
        let dmatrix = DistanceMatrix::new(vec![]);
        let trees = BTreeMap::from([("fam".to_string(), tree)]);
        let flags = BTreeMap::from([("fam".to_string(), false)]);
        let rows = punctuation_analysis(&corpus, &dmatrix, &trees, &flags, 0.05).unwrap();
        assert_eq!(rows.len(), 1);
        assert_abs_diff_eq!(rows[0].slope, 1.0, epsilon = 1e-9);
        assert_eq!(rows[0].n_taxa, 5);
        assert!(rows[0].significant);
    }

    #[test]
    fn punctuation_excludes_delta_positive_families() {
        let tree = {
            let mut parsed = parse_newick("((((A:1,B:1):1,C:1):1,D:1):1,E:1);").unwrap();
            parsed.tree.rooted = true;
            parsed.tree
        };
        let corpus = Corpus::from_doculects(vec![]);
        let dmatrix = DistanceMatrix::new(vec![]);
        let trees = BTreeMap::from([
            ("kept".to_string(), tree.clone()),
            ("artifact".to_string(), tree),
        ]);
        let flags =
            BTreeMap::from([("kept".to_string(), false), ("artifact".to_string(), true)]);
        let rows = punctuation_analysis(&corpus, &dmatrix, &trees, &flags, 0.05).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].family, "kept");
    }

    /// Forward simulation: every split adds a fixed burst to each branch on
    /// top of uniform gradual noise, so node count drives path length and
    /// the regression recovers a significantly positive slope.
    #[test]
    fn punctuation_recovers_simulated_bursts() {
        let mut hits = 0;
        for rep in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + rep);
            let tree = burst_tree(&mut rng, 20, 1.0, 0.4);
            let trees = BTreeMap::from([("sim".to_string(), tree)]);
            let flags = BTreeMap::from([("sim".to_string(), false)]);
            let corpus = Corpus::from_doculects(vec![]);
            let dmatrix = DistanceMatrix::new(vec![]);
            let rows =
                punctuation_analysis(&corpus, &dmatrix, &trees, &flags, 0.05).unwrap();
            if rows[0].slope > 0.0 && rows[0].significant {
                hits += 1;
            }
        }
        assert!(hits >= 95, "recovered bursts in only {hits}/100 replicates");
    }

    /// Random binary topology by repeatedly splitting a random leaf; each
    /// branch is one burst plus uniform gradual change.
    fn burst_tree(rng: &mut ChaCha8Rng, n_leaves: usize, burst: f64, gradual: f64) -> Tree {
        let mut t = Tree::new();
        t.rooted = true;
        let len = |rng: &mut ChaCha8Rng| burst + rng.gen_range(0.0..gradual);
        let a = t.add_node(0, None, len(rng));
        let b = t.add_node(0, None, len(rng));
        let mut leaves = vec![a, b];
        while leaves.len() < n_leaves {
            let pick = rng.gen_range(0..leaves.len());
            let host = leaves.swap_remove(pick);
            let c1 = t.add_node(host, None, len(rng));
            let c2 = t.add_node(host, None, len(rng));
            leaves.push(c1);
            leaves.push(c2);
        }
        for (k, id) in leaves.into_iter().enumerate() {
            t.nodes[id].label = Some(format!("L{k}"));
        }
        t
    }

    /// No tree supplied: the family tree comes from neighbor joining over
    /// the family plus its nearest outside doculect, rooted there.
    #[test]
    fn punctuation_falls_back_to_distance_trees() {
        let mut docs = Vec::new();
        for id in ["m1", "m2", "m3", "m4"] {
            docs.push(crate::corpus::Doculect::new(id, id, "fam"));
        }
        docs.push(crate::corpus::Doculect::new("out", "out", "other"));
        let corpus = Corpus::from_doculects(docs);
        let ids: Vec<String> =
            ["m1", "m2", "m3", "m4", "out"].iter().map(|s| s.to_string()).collect();
        let mut dmatrix = DistanceMatrix::new(ids);
        // Additive distances from a caterpillar with distinct depths.
        let tree = parse_newick("((((m1:1,m2:2):1,m3:4):1,m4:7):1,out:9);").unwrap().tree;
        let (labels, m) = tree.leaf_distance_matrix(false);
        for i in 0..labels.len() {
            for j in i + 1..labels.len() {
                let a = dmatrix.index_of(&labels[i]).unwrap();
                let b = dmatrix.index_of(&labels[j]).unwrap();
                dmatrix.set(a, b, m[i][j]);
            }
        }
        let flags = BTreeMap::from([("fam".to_string(), false)]);
        let rows =
            punctuation_analysis(&corpus, &dmatrix, &BTreeMap::new(), &flags, 0.05).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].n_taxa, 4);
        assert!(rows[0].p_value.is_finite());
    }

    #[test]
    fn punctuation_rows_sort_by_p_then_family() {
        let strong = {
            let mut parsed = parse_newick("((((A:1,B:1):1,C:1):1,D:1):1,E:1);").unwrap();
            parsed.tree.rooted = true;
            parsed.tree
        };
        let weak = {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            // Pure gradual noise: no burst signal.
            burst_tree(&mut rng, 8, 0.0, 1.0)
        };
        let trees = BTreeMap::from([
            ("zzz".to_string(), strong.clone()),
            ("aaa".to_string(), weak),
            ("mmm".to_string(), strong),
        ]);
        let flags = BTreeMap::from([
            ("zzz".to_string(), false),
            ("aaa".to_string(), false),
            ("mmm".to_string(), false),
        ]);
        let corpus = Corpus::from_doculects(vec![]);
        let dmatrix = DistanceMatrix::new(vec![]);
        let rows = punctuation_analysis(&corpus, &dmatrix, &trees, &flags, 0.05).unwrap();
        assert_eq!(rows.len(), 3);
        // The two perfect-fit families tie at p = 0 and sort by name.
        assert_eq!(rows[0].family, "mmm");
        assert_eq!(rows[1].family, "zzz");
        assert_eq!(rows[2].family, "aaa");
        assert!(rows[0].p_value <= rows[2].p_value);
    }

    #[test]
    fn punctuation_propagates_family_errors() {
        let corpus = Corpus::from_doculects(vec![]);
        let dmatrix = DistanceMatrix::new(vec![]);
        let flags = BTreeMap::from([("ghost".to_string(), false)]);
        let r = punctuation_analysis(&corpus, &dmatrix, &BTreeMap::new(), &flags, 0.05);
        assert!(matches!(r, Err(StatsError::EmptyFamily(_))));

        let unrooted = parse_newick("(A:1,B:1,C:1);").unwrap().tree;
        let trees = BTreeMap::from([("fam".to_string(), unrooted)]);
        let flags = BTreeMap::from([("fam".to_string(), false)]);
        let r = punctuation_analysis(&corpus, &dmatrix, &trees, &flags, 0.05);
        assert!(matches!(r, Err(StatsError::Phylo(PhyloError::UnrootedTree))));
    }
}
