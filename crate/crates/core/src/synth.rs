//! Seeded synthetic corpora. Each family evolves a proto word list down a
//! random binary tree; cognate classes track word lineages, so the output
//! doubles as gold data for clustering and tree-recovery benchmarks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    Corpus, Doculect, Form, GoldRecord, GoldStandard, SoundClass, CONCEPT_COUNT,
    SOUND_CLASS_COUNT,
};
use crate::phylo::{Node, Tree};

/// Evolution parameters. Rates are per unit branch length.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    /// Inclusive bounds on generated word lengths.
    pub word_length: (usize, usize),
    /// Branch lengths are drawn uniformly from this range.
    pub branch_length: (f64, f64),
    /// Expected segment edits per word per unit branch length.
    pub edit_rate: f64,
    /// Hazard of wholesale lexical replacement per unit branch length.
    pub replace_rate: f64,
}

impl Default for SynthOptions {
    fn default() -> SynthOptions {
        SynthOptions {
            word_length: (3, 6),
            branch_length: (0.5, 1.5),
            edit_rate: 0.7,
            replace_rate: 0.15,
        }
    }
}

/// One generated family: its doculects, the generating tree (leaf labels are
/// doculect ids), and per-form gold cognate classes.
#[derive(Debug, Clone)]
pub struct SynthFamily {
    pub doculects: Vec<Doculect>,
    pub tree: Tree,
    pub records: Vec<GoldRecord>,
}

fn random_symbol(rng: &mut impl Rng) -> SoundClass {
    SoundClass::from_index(rng.gen_range(0..SOUND_CLASS_COUNT))
}

fn random_word(rng: &mut impl Rng, options: &SynthOptions) -> Vec<SoundClass> {
    let (lo, hi) = options.word_length;
    let len = rng.gen_range(lo..=hi);
    (0..len).map(|_| random_symbol(rng)).collect()
}

// Knuth's product method; fine for the small rates used here.
fn poisson(rng: &mut impl Rng, lambda: f64) -> usize {
    let floor = (-lambda).exp();
    let mut k = 0;
    let mut p = 1.0;
    loop {
        p *= rng.gen::<f64>();
        if p <= floor {
            return k;
        }
        k += 1;
    }
}

/// One segment edit: substitution 0.7, insertion 0.15, deletion 0.15.
/// Deletion never empties a word and insertion stops at twice the maximum
/// generated length; blocked moves fall back to substitution.
fn mutate(rng: &mut impl Rng, word: &mut Vec<SoundClass>, options: &SynthOptions) {
    let roll = rng.gen::<f64>();
    let cap = options.word_length.1 * 2;
    let insert = roll >= 0.70 && roll < 0.85 && word.len() < cap;
    let delete = roll >= 0.85 && word.len() > 1;
    if insert {
        let pos = rng.gen_range(0..=word.len());
        word.insert(pos, random_symbol(rng));
    } else if delete {
        let pos = rng.gen_range(0..word.len());
        word.remove(pos);
    } else {
        let pos = rng.gen_range(0..word.len());
        let old = word[pos].index();
        let offset = rng.gen_range(1..SOUND_CLASS_COUNT);
        word[pos] = SoundClass::from_index((old + offset) % SOUND_CLASS_COUNT);
    }
}

/// Word-lineage state per concept: current segments and cognate class.
type LineageState = Vec<(Vec<SoundClass>, u32)>;

fn evolve_edge(
    rng: &mut impl Rng,
    parent: &LineageState,
    length: f64,
    counters: &mut [u32],
    options: &SynthOptions,
) -> LineageState {
    let replace_p = 1.0 - (-options.replace_rate * length).exp();
    parent
        .iter()
        .enumerate()
        .map(|(ci, (word, class))| {
            if rng.gen::<f64>() < replace_p {
                counters[ci] += 1;
                (random_word(rng, options), counters[ci])
            } else {
                let mut word = word.clone();
                for _ in 0..poisson(rng, options.edit_rate * length) {
                    mutate(rng, &mut word, options);
                }
                (word, *class)
            }
        })
        .collect()
}

/// Generates one family of `n_doculects` leaves named `{family}_{k:02}`.
/// Topology grows by splitting a uniformly chosen extant lineage until the
/// leaf count is reached, so shapes range from caterpillars to balanced.
pub fn synth_family(
    rng: &mut impl Rng,
    family: &str,
    n_doculects: usize,
    options: &SynthOptions,
) -> SynthFamily {
    assert!(n_doculects >= 1, "a family needs at least one doculect");
    let mut tree = Tree {
        nodes: vec![Node {
            parent: None,
            children: Vec::new(),
            label: None,
            length: 0.0,
        }],
        root: 0,
        rooted: true,
    };
    let mut tips = vec![0usize];
    while tips.len() < n_doculects {
        let i = rng.gen_range(0..tips.len());
        let parent = tips[i];
        let split = |tree: &mut Tree, rng: &mut dyn rand::RngCore| {
            let (lo, hi) = options.branch_length;
            let idx = tree.nodes.len();
            tree.nodes.push(Node {
                parent: Some(parent),
                children: Vec::new(),
                label: None,
                length: rng.gen_range(lo..=hi),
            });
            tree.nodes[parent].children.push(idx);
            idx
        };
        tips[i] = split(&mut tree, rng);
        let sibling = split(&mut tree, rng);
        tips.push(sibling);
    }
    for (k, &tip) in tips.iter().enumerate() {
        tree.nodes[tip].label = Some(format!("{family}_{k:02}"));
    }

    let proto: LineageState = (0..CONCEPT_COUNT)
        .map(|_| (random_word(rng, options), 0))
        .collect();
    let mut counters = vec![0u32; CONCEPT_COUNT];
    let mut states: Vec<Option<LineageState>> = vec![None; tree.nodes.len()];
    let mut stack = vec![tree.root];
    states[tree.root] = Some(proto);
    while let Some(v) = stack.pop() {
        let children = tree.nodes[v].children.clone();
        for c in children {
            let parent_state = states[v].as_ref().expect("parent evolved before child");
            let state = evolve_edge(rng, parent_state, tree.nodes[c].length, &mut counters, options);
            states[c] = Some(state);
            stack.push(c);
        }
    }

    let mut doculects = Vec::with_capacity(n_doculects);
    let mut records = Vec::new();
    for &tip in &tips {
        let id = tree.nodes[tip].label.clone().expect("tips are labeled");
        let state = states[tip].as_ref().expect("every tip evolved");
        let mut doculect = Doculect::new(id.clone(), id.clone(), family);
        for (ci, (word, class)) in state.iter().enumerate() {
            let form = Form::from_segments(word.clone());
            doculect.entries[ci].push(form.clone());
            // Concept-qualified so labels never collide across concepts.
            records.push(GoldRecord {
                family: family.to_string(),
                doculect_id: id.clone(),
                concept: ci,
                form,
                cognate_class: format!("c{ci}:{class}"),
            });
        }
        doculects.push(doculect);
    }
    SynthFamily {
        doculects,
        tree,
        records,
    }
}

/// Attaches the given rooted trees under a fresh common root (unit-length
/// join edges). Leaf labels must already be globally unique.
pub fn join_trees(trees: &[Tree]) -> Tree {
    let mut joined = Tree {
        nodes: vec![Node {
            parent: None,
            children: Vec::new(),
            label: None,
            length: 0.0,
        }],
        root: 0,
        rooted: true,
    };
    for tree in trees {
        let offset = joined.nodes.len();
        for (i, node) in tree.nodes.iter().enumerate() {
            let mut copy = node.clone();
            copy.parent = copy.parent.map(|p| p + offset);
            copy.children = copy.children.iter().map(|c| c + offset).collect();
            if i == tree.root {
                copy.parent = Some(joined.root);
                copy.length = 1.0;
            }
            joined.nodes.push(copy);
        }
        let root_copy = tree.root + offset;
        joined.nodes[joined.root].children.push(root_copy);
    }
    joined
}

/// Generates a multi-family corpus. Families draw from independent streams
/// derived from `seed`, so a family's content depends only on the seed, its
/// position, and its size.
pub fn synth_corpus(
    seed: u64,
    families: &[(&str, usize)],
    options: &SynthOptions,
) -> (Corpus, GoldStandard, Vec<Tree>) {
    let mut doculects = Vec::new();
    let mut records = Vec::new();
    let mut trees = Vec::new();
    for (fi, &(name, size)) in families.iter().enumerate() {
        let stream = seed ^ (fi as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let family = synth_family(&mut rng, name, size, options);
        doculects.extend(family.doculects);
        records.extend(family.records);
        trees.push(family.tree);
    }
    (
        Corpus::from_doculects(doculects),
        GoldStandard { records },
        trees,
    )
}
