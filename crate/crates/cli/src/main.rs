//! `bforge`: analyze bipartite unitary/permutation operators, compute cost
//! bounds, simulate the LOCC implementation protocols, maximize entangling
//! power, synthesize classical circuits, and emit reproduction reports.
//!
//! Exit codes: 0 success, 2 verification failure, 3 input error.

mod cmds;
mod emit;
mod report;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bforge", version, about = "Bipartite operator analysis and LOCC protocol toolbox")]
pub struct Cli {
    /// Tolerance override for rank and verification decisions.
    #[arg(long, global = true, default_value_t = 1e-8)]
    pub tol: f64,

    /// Seed for randomized components.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    /// Write the primary JSON artifact to this path instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,

    /// Output format.
    #[arg(long, global = true, default_value = "json", value_parser = ["json", "text"])]
    pub format: String,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Structural report: Schmidt rank, blocks, controlled/direct-sum forms,
    /// type partitions, partial-transpose check.
    Analyze {
        /// Operator JSON file (dense "matrix" or sparse "perm" format).
        #[arg(long)]
        input: std::path::PathBuf,
    },
    /// Cost bounds from the closed-form theorems.
    Bound {
        /// Analyze this operator and recommend the cheapest protocol.
        #[arg(long)]
        input: Option<std::path::PathBuf>,
        /// Permutation-unitary bound by Schmidt rank.
        #[arg(long)]
        permutation_rank: Option<usize>,
        /// Rank-3 controlled bound for dimensions dA,dB.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        rank3: Option<Vec<usize>>,
        /// Basic controlled-protocol bound by term count.
        #[arg(long)]
        controlled_terms: Option<usize>,
        /// Classical nonlocal-CNOT bound by rank (with --restore).
        #[arg(long)]
        classical_rank: Option<usize>,
        #[arg(long, default_value_t = false)]
        restore: bool,
    },
    /// Run one of the implementation protocols and verify the channel.
    Simulate {
        #[arg(long, value_parser = ["ct", "ct-ext", "two-level", "group", "ptl2", "ptl3"])]
        protocol: String,
        /// Named fixture (see `fixtures --list`).
        #[arg(long)]
        fixture: Option<String>,
        /// Operator JSON file.
        #[arg(long)]
        input: Option<std::path::PathBuf>,
        /// Fixture parameters as a JSON object.
        #[arg(long, default_value = "{}")]
        params: String,
        /// Group choice for the group protocol.
        #[arg(long, value_parser = ["pauli", "klein", "dihedral", "trivial"], default_value = "pauli")]
        group: String,
        /// Pad the controlled form with this many zero terms (ct-ext).
        #[arg(long, default_value_t = 1)]
        pad: usize,
        /// Return nonzero exit status on channel mismatch.
        #[arg(long, default_value_t = false)]
        verify: bool,
        /// Branch handling: enumerate all outcomes or sample one path.
        #[arg(long, value_parser = ["enumerate", "sample"], default_value = "enumerate")]
        mode: String,
    },
    /// Maximize the entangling power over ancilla-assisted product inputs.
    Entpower {
        #[arg(long)]
        input: std::path::PathBuf,
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        /// Ancilla dimensions dRA,dRB (defaults to the system dimensions).
        #[arg(long, value_delimiter = ',', num_args = 2)]
        ancilla_dims: Option<Vec<usize>>,
    },
    /// Synthesize a bipartite classical reversible map into local gates plus
    /// counted nonlocal CNOTs.
    Synthesize {
        /// Truth-table file: one `<in-bits> <out-bits>` line per input.
        #[arg(long)]
        truth_table: std::path::PathBuf,
        /// Bit split n,m (A bits, B bits).
        #[arg(long, value_delimiter = ',', num_args = 2)]
        bits: Vec<usize>,
        #[arg(long, value_parser = ["restore", "no-restore"], default_value = "no-restore")]
        regime: String,
    },
    /// Emit a named operator fixture as JSON.
    Fixtures {
        #[arg(long)]
        name: String,
        /// Rank parameter for families that take one.
        #[arg(long)]
        r: Option<usize>,
        /// Additional parameters as a JSON object.
        #[arg(long, default_value = "{}")]
        params: String,
        /// Emit the sparse permutation format.
        #[arg(long, default_value_t = false)]
        sparse: bool,
    },
    /// Run the full reproduction table and print one line per criterion.
    Report,
}

fn main() {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("BFORGE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }
    let code = match cmds::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cmds::exit_code_for(&e)
        }
    };
    std::process::exit(code);
}
