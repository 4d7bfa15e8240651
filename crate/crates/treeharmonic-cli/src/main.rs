//! `treeharmonic`: solve nonlinear Dirichlet problems on directed m-ary
//! trees, check harmonic-measure bounds, build unique-continuation
//! counterexamples and estimate boundary dimensions from the command line.
//!
//! Exit codes: 0 — the run finished and every requested check held;
//! 1 — usage, input or I/O problem; 2 — a check ran to completion and
//! reported a violated bound or invariant.

mod cmds;
mod output;

use clap::{Args, Parser, Subcommand};
use output::Format;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "treeharmonic",
    version,
    about = "Nonlinear averaging operators and harmonic functions on directed m-ary trees",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the Dirichlet problem at depth n and report the root value.
    Solve(SolveArgs),
    /// F-harmonic measure of a union of m-adic cells, seen from the root.
    Measure(MeasureArgs),
    /// Check the upper bounds on the root gap caused by bumping data on cells.
    Bound(BoundArgs),
    /// Check the lower bound c(|I|/2m)^θ on the same root gap.
    LowerBound(BoundArgs),
    /// Boundary-comparison contract: perturb data on I, require gap < eps.
    Bcp(BcpArgs),
    /// Unique-continuation profiles, verdicts and explicit counterexamples.
    #[command(subcommand)]
    Ucp(UcpCmd),
    /// Minimize Σ e^{x_j} subject to F(x) = 0; report dim = log_m τ.
    Tau(TauArgs),
    /// Fuzz the averaging-operator axioms with random inputs.
    Axioms(AxiomsArgs),
    /// Deterministic end-to-end battery; byte-identical output per seed.
    ReproduceAll(ReproduceArgs),
}

/// Output destination and format, shared by every subcommand.
#[derive(Args)]
struct OutArgs {
    /// Write the report to this file instead of stdout (any --format).
    #[arg(long = "csv", value_name = "PATH", global = false)]
    csv: Option<PathBuf>,
    /// Tabular output format.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    /// Branching factor m ≥ 3.
    #[arg(long)]
    m: usize,
    /// Operator spec: F0:alpha=A | F1:alpha=A | F2:alpha=A | Fp:p=P.
    #[arg(long)]
    op: String,
    /// Boundary data: id | const=V | sine=F | ind=N:K0..K1,h=H | table=PATH,
    /// optionally BASE+C@N:K0..K1 for base plus a bump of height C on cells.
    #[arg(long)]
    f: String,
    /// Truncation depth n ≥ 1.
    #[arg(long)]
    n: u32,
    /// Emit one row per vertex (level,index,psi,value) instead of a summary.
    #[arg(long)]
    dump: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(long)]
    m: usize,
    /// Operator spec (see `solve --help`).
    #[arg(long)]
    op: String,
    /// Union of m-adic cells at one level: N:K0..K1 (e.g. 2:0..0).
    #[arg(long)]
    cells: String,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    op: String,
    /// Base boundary data; defaults to const=0 (the bounds are data-uniform).
    #[arg(long)]
    f: Option<String>,
    /// Single target union N:K0..K1 (alternative to --sweep-depths).
    #[arg(long)]
    cells: Option<String>,
    /// Inclusive depth range LO..HI: every single cell and adjacent pair.
    #[arg(long = "sweep-depths", value_name = "LO..HI")]
    sweep_depths: Option<String>,
    /// Bump heights, comma separated (decimals or fractions like 1/2).
    #[arg(long, default_value = "1")]
    c: String,
    /// Exponent override for lower-bound (may only exceed −log_m η).
    #[arg(long)]
    theta: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct BcpArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    op: String,
    /// Perturbation support: union of m-adic cells N:K0..K1.
    #[arg(long)]
    cells: String,
    /// Norm budget M with ‖f‖ + ‖g‖ ≤ M; data differ by M exactly on cells.
    #[arg(long = "m-bound", default_value_t = 1.0)]
    m_bound: f64,
    /// Target root gap ε.
    #[arg(long)]
    eps: f64,
    /// Number of random base data sets to try.
    #[arg(long, default_value_t = 20)]
    trials: usize,
    /// Seed for the random data.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Subcommand)]
enum UcpCmd {
    /// Extract the depth-gap profile ρ of a vertex set and check (P0)–(P2).
    Extract(UcpExtractArgs),
    /// Build the explicit bounded harmonic function vanishing on the
    /// canonical realization of a profile while staying 1 at the root.
    Counterexample(UcpCounterArgs),
}

#[derive(Args)]
struct UcpExtractArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    op: String,
    /// File with one vertex per line: comma-separated digits ("0,2,1");
    /// blank lines and lines starting with # are skipped.
    #[arg(long = "set-file", value_name = "PATH")]
    set_file: PathBuf,
    /// Stop exploring below this level.
    #[arg(long = "max-depth")]
    max_depth: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct UcpCounterArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    op: String,
    /// Stage gaps ρ_1,ρ_2,…, comma separated (e.g. 2,2,2).
    #[arg(long)]
    rho: String,
    /// Levels to build; must reach at least η_K = Σ ρ_k.
    #[arg(long)]
    depth: u32,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct TauArgs {
    /// Operator family: F0 | F1 | F2 | Fp.
    #[arg(long)]
    family: String,
    /// Branching factors: one value or an inclusive range LO..HI.
    #[arg(long)]
    m: String,
    /// α values for F0/F1/F2, comma separated.
    #[arg(long, default_value = "0.5")]
    alpha: String,
    /// Exponent for the Fp family.
    #[arg(long)]
    p: Option<f64>,
    /// Multistart count for the minimizer.
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    /// Simplex convergence tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct AxiomsArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    op: String,
    /// Random samples per axiom.
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// RNG seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Residual tolerance; defaults to 1e-9 (1e-7 for the implicit Fp roots).
    #[arg(long)]
    tol: Option<f64>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Seed driving every randomized step of the battery.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let informational = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if informational { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    init_thread_pool();
    let outcome = match &cli.cmd {
        Cmd::Solve(a) => cmds::solve(a),
        Cmd::Measure(a) => cmds::measure(a),
        Cmd::Bound(a) => cmds::bound(a, false),
        Cmd::LowerBound(a) => cmds::bound(a, true),
        Cmd::Bcp(a) => cmds::bcp(a),
        Cmd::Ucp(UcpCmd::Extract(a)) => cmds::ucp_extract(a),
        Cmd::Ucp(UcpCmd::Counterexample(a)) => cmds::ucp_counterexample(a),
        Cmd::Tau(a) => cmds::tau(a),
        Cmd::Axioms(a) => cmds::axioms(a),
        Cmd::ReproduceAll(a) => cmds::reproduce_all(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// TREEHARMONIC_THREADS caps the rayon pool before any parallel work starts.
fn init_thread_pool() {
    #[cfg(feature = "parallel")]
    if let Ok(v) = std::env::var("TREEHARMONIC_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => eprintln!("warning: ignoring TREEHARMONIC_THREADS={v:?} (want a positive integer)"),
        }
    }
}
