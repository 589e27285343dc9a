//! PMI-based lexical distances, cognate clustering, character matrices, and
//! distance-based phylogenetics for sound-class word lists.

pub mod align;
pub mod chars;
pub mod cogclust;
pub mod corpus;
pub mod lexdist;
pub mod phylo;
pub mod pmi_train;
pub mod stats;
pub mod synth;
