//! `lexiphylo`: word lists to trees from the command line.

mod config;
mod error;
mod ops;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(
    name = "lexiphylo",
    version,
    about = "Lexical distances, cognate clustering, and phylogenies from 40-concept word lists"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate PMI alignment scores from a word-list corpus
    TrainPmi {
        #[arg(long)]
        corpus: PathBuf,
        /// Output CSV for the 41x41 score table
        #[arg(long)]
        scores: PathBuf,
        /// Output CSV for the gap penalties
        #[arg(long)]
        gaps: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compute the calibrated doculect distance matrix
    Distances {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        gaps: PathBuf,
        #[arg(long)]
        out_csv: PathBuf,
        /// Also write the matrix as a NEXUS distances block
        #[arg(long)]
        out_nexus: Option<PathBuf>,
    },
    /// Cluster synonymous words into cognate classes
    Cluster {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        gaps: PathBuf,
        /// Distance matrix CSV from the distances step
        #[arg(long)]
        dist: PathBuf,
        /// Gold-standard cognate judgments for classifier training
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Edge probability below which pairs are never linked
        #[arg(long, default_value_t = 0.25)]
        threshold: f64,
        /// Feature subset bitmask (1..=127)
        #[arg(long, default_value_t = 0b0010100)]
        mask: u8,
        /// SVM soft-margin parameter
        #[arg(long, default_value_t = 1.0)]
        svm_c: f64,
        /// Training pair budget
        #[arg(long, default_value_t = 7000)]
        max_pairs: usize,
    },
    /// Export binary character matrices (cognate classes + sound classes)
    Chars {
        #[arg(long)]
        corpus: PathBuf,
        /// Cognate partition CSV from the cluster step
        #[arg(long)]
        cognates: PathBuf,
        #[arg(long)]
        out_phylip: PathBuf,
        #[arg(long)]
        out_partition: PathBuf,
    },
    /// Build a BIONJ tree from a distance matrix
    Bionj {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generalized quartet distance between two Newick trees
    Gqd {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Sample size used above the exact-enumeration bound
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Mantel test of linguistic against geographic distances
    Mantel {
        /// Coordinates CSV with header id,latitude,longitude
        #[arg(long)]
        geo: PathBuf,
        /// Linguistic distance matrix CSV
        #[arg(long)]
        ling: PathBuf,
        #[arg(long, default_value_t = 999)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-distance-class correlogram instead of one global test
        #[arg(long)]
        correlogram: bool,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regress branching-node counts on root-to-tip path lengths per family
    Punctuation {
        #[arg(long)]
        corpus: PathBuf,
        /// Distance matrix CSV, used for families without a tree file
        #[arg(long)]
        dist: PathBuf,
        /// Directory of per-family Newick trees named <family>.tre
        #[arg(long)]
        trees: Option<PathBuf>,
        /// CSV with header family,delta marking delta-score-positive families
        #[arg(long)]
        delta: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run the configured stages end to end with caching and a manifest
    Pipeline {
        /// Flat key=value config file
        config: PathBuf,
        /// Override the configured output directory
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::TrainPmi { corpus, scores, gaps, seed } => {
            ops::train_pmi(&corpus, &scores, &gaps, seed)
        }
        Command::Distances { corpus, scores, gaps, out_csv, out_nexus } => {
            ops::distances(&corpus, &scores, &gaps, &out_csv, out_nexus.as_deref())
        }
        Command::Cluster {
            corpus,
            scores,
            gaps,
            dist,
            gold,
            out,
            seed,
            threshold,
            mask,
            svm_c,
            max_pairs,
        } => {
            if mask == 0 || mask > 127 {
                return Err(CliError::Usage("--mask must be in 1..=127".into()));
            }
            ops::cluster(
                &corpus, &scores, &gaps, &dist, &gold, &out, seed, threshold, mask, svm_c,
                max_pairs,
            )
        }
        Command::Chars { corpus, cognates, out_phylip, out_partition } => {
            ops::chars(&corpus, &cognates, &out_phylip, &out_partition)
        }
        Command::Bionj { dist, out } => ops::bionj_cmd(&dist, &out),
        Command::Gqd { tree, reference, samples, seed } => {
            ops::gqd_cmd(&tree, &reference, samples, seed)
        }
        Command::Mantel { geo, ling, permutations, seed, correlogram, out } => {
            ops::mantel_cmd(&geo, &ling, permutations, seed, correlogram, out.as_deref())
        }
        Command::Punctuation { corpus, dist, trees, delta, out, alpha } => {
            ops::punctuation_cmd(&corpus, &dist, trees.as_deref(), &delta, out.as_deref(), alpha)
        }
        Command::Pipeline { config, out_dir } => ops::pipeline_cmd(&config, out_dir.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes; anything else is a
            // usage error.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => ExitCode::from(0),
                _ => ExitCode::from(1),
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::from(0),
        Err(e) => {
            eprintln!("{}", e.report());
            e.exit_code()
        }
    }
}
