use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::game::AdversaryKind;
use crate::lab::{AttackKind, Distribution};
use crate::targets::Target;

#[derive(Debug, Parser)]
#[command(name = "eseds", version, about = "Encrypted range index: client, server and lab")]
pub struct Cli {
    /// Server address; defaults to 127.0.0.1 on $ESEDS_PORT (7487).
    #[arg(long, global = true, env = "ESEDS_ADDR")]
    pub addr: Option<String>,

    /// Open the store file in-process instead of connecting to a server.
    #[arg(long, global = true)]
    pub embedded: bool,

    /// Store file.
    #[arg(long, global = true, default_value = "eseds.store")]
    pub store: PathBuf,

    /// Client key file; defaults to the store path with `.key` appended.
    #[arg(long, global = true)]
    pub key: Option<PathBuf>,

    /// Seed for every random choice made by this process.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Plaintexts are integers below 2^bits.
    #[arg(long, global = true)]
    pub domain_bits: Option<u32>,

    /// Also write results as CSV to this file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create an empty store file and a fresh key file.
    Init(InitArgs),
    /// Insert plaintexts.
    Insert {
        #[arg(required = true, value_delimiter = ',')]
        values: Vec<u64>,
    },
    /// Cells with plaintexts in [A, B]; A > B wraps around the domain.
    Query { a: u64, b: u64 },
    /// The K smallest plaintexts.
    Topk { k: usize },
    /// Time range and top-k queries on an embedded store.
    Bench(BenchArgs),
    /// Run a plaintext-guessing attack on a freshly built target.
    Attack(AttackArgs),
    /// Play the indistinguishability game.
    Game(GameArgs),
    /// Serve the store file over TCP.
    Serve(ServeArgs),
    /// Run a complete rebalancing pass on a decoupled store.
    Rebalance {
        /// Cells per step; 0 runs the whole pass at once.
        #[arg(long, default_value_t = 0)]
        batch: u32,
    },
}

#[derive(Debug, Args)]
pub struct InitArgs {
    /// Address cells by sparse index instead of dense rank.
    #[arg(long)]
    pub decoupled: bool,
    /// Width of sparse indices, a multiple of 8.
    #[arg(long, default_value_t = 64)]
    pub index_bits: u16,
    /// Key length in bits (128 or 256).
    #[arg(long, default_value_t = 256)]
    pub security: u32,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [100_000usize, 200_000, 300_000, 400_000, 500_000, 600_000, 700_000, 800_000, 900_000, 1_000_000])]
    pub db_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20, 30, 40, 50, 60, 70, 80, 90, 100])]
    pub range_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20, 30, 40, 50, 60, 70, 80, 90, 100])]
    pub k_values: Vec<usize>,
    #[arg(long, default_value_t = 30)]
    pub repeats: usize,
    #[arg(long, default_value_t = 10)]
    pub warmup: usize,
    /// Queries timed together per repetition.
    #[arg(long, default_value_t = 20)]
    pub queries: usize,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    #[arg(long, value_enum)]
    pub attack: AttackKind,
    /// Number of plaintexts.
    #[arg(short, long, default_value_t = 1000)]
    pub n: usize,
    /// Domain size N; defaults to 2^domain-bits, or 64.
    #[arg(long = "domain-size")]
    pub domain_size: Option<u64>,
    #[arg(long, value_enum, default_value_t = Distribution::Uniform)]
    pub distribution: Distribution,
    /// Independent instances to average over.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Norm order for the lp and cumulative attacks.
    #[arg(long, default_value_t = 1)]
    pub norm: u32,
}

#[derive(Debug, Args)]
pub struct GameArgs {
    #[arg(long, value_enum)]
    pub target: Target,
    #[arg(long, value_enum, default_value_t = AdversaryKind::PositionGuesser)]
    pub adversary: AdversaryKind,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Run a rebalancing step this often on decoupled stores.
    #[arg(long)]
    pub rebalance_interval_ms: Option<u64>,
    /// Cells per background rebalancing step.
    #[arg(long, default_value_t = 256)]
    pub rebalance_batch: usize,
}
