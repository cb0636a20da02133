//! `shiftadd`: optimize, emit, benchmark and verify multiplierless constant
//! matrix-vector multipliers.
//!
//! Exit codes: 0 success, 1 bad input or usage, 2 verification mismatch,
//! 3 infeasible depth budget.

mod matrix_file;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand};
use shiftadd::bench::{run_suite, summaries_csv, summaries_json, SuiteConfig};
use shiftadd::codegen::{emit_json, emit_testbench, emit_verilog, parse_json, VerilogOptions};
use shiftadd::verify::{check_exhaustive, check_random, oracle, sample_inputs, Report, DEFAULT_EXHAUSTIVE_LIMIT};
use shiftadd::{solve_with, AdderGraph, BitWidthSpec, Error, Matrix, QInterval, Selection, SolveOptions};

#[derive(Parser)]
#[command(name = "shiftadd", version, about = "Multiplierless constant matrix-vector multiplication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a constant matrix into an adder graph.
    Optimize(OptimizeArgs),
    /// Emit Verilog (and optionally a testbench) from a graph JSON file.
    Emit(EmitArgs),
    /// Benchmark random matrices.
    Bench(BenchArgs),
    /// Check a graph against its matrix.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Total bits of every input.
    #[arg(long, default_value_t = 8)]
    input_bits: u32,
    /// Integer bits of every input (defaults to --input-bits).
    #[arg(long, allow_negative_numbers = true)]
    input_int_bits: Option<i32>,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    input_signed: bool,
    /// Most fractional bits accepted in matrix literals.
    #[arg(long, default_value_t = 32)]
    frac_bits: u32,
}

impl InputArgs {
    fn qints(&self, n: usize) -> Vec<QInterval> {
        let spec = BitWidthSpec::new(self.input_signed, self.input_bits, self.input_int_bits.unwrap_or(self.input_bits as i32));
        vec![spec.to_qint(); n]
    }
}

#[derive(Args)]
struct OptimizeArgs {
    matrix: PathBuf,
    /// Extra adder depth over the minimum; -1 for unconstrained.
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    dc: i32,
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, conflicts_with = "unweighted")]
    weighted: bool,
    #[arg(long)]
    unweighted: bool,
    /// Write the graph as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
    /// Random verification vectors.
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EmitArgs {
    graph: PathBuf,
    #[arg(long)]
    verilog: PathBuf,
    /// Register boundary every k adder levels; 0 for combinational.
    #[arg(long, default_value_t = 0)]
    pipeline_every: u32,
    #[arg(long, default_value = "cmvm")]
    module: String,
    /// Also write a self-checking testbench.
    #[arg(long)]
    testbench: Option<PathBuf>,
    /// Matrix for the testbench's expected outputs (defaults to the graph's
    /// own evaluation).
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    vectors: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    frac_bits: u32,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 8)]
    bw: u32,
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    dc: i32,
    #[arg(long, default_value_t = 25)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, env = "CMVM_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    matrix: PathBuf,
    graph: PathBuf,
    #[arg(long, conflicts_with = "trials")]
    exhaustive: bool,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EXHAUSTIVE_LIMIT)]
    limit: u64,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    #[arg(long, default_value_t = 32)]
    frac_bits: u32,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::BudgetInfeasible { .. }) => 3,
            _ => 1,
        };
        Failure { code, err }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn mismatch(report: &Report) -> Failure {
    Failure { code: 2, err: anyhow::anyhow!("verification failed\n{report}") }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_graph(path: &Path) -> Result<AdderGraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn optimize(args: OptimizeArgs) -> Result<(), Failure> {
    let m = matrix_file::read(&args.matrix, args.input.frac_bits)?;
    let qints = args.input.qints(m.rows());
    let selection = if args.unweighted { Selection::Unweighted } else { Selection::Weighted };
    let opts = SolveOptions { dc: args.dc, selection, ..SolveOptions::default() };
    let sol = solve_with(&m, &qints, &vec![0; m.rows()], &opts)?;
    let report = verify_auto(&sol.graph, &m, args.trials, args.seed)?;
    println!("adders: {}", sol.stats.adders);
    println!("depth: {}", sol.stats.depth);
    println!("cost: {}", sol.stats.cost);
    println!("runtime_ms: {:.3}", sol.elapsed.as_secs_f64() * 1e3);
    print!("verify: {report}");
    if let Some(path) = &args.out_json {
        write(path, &emit_json(&sol.graph))?;
    }
    if !report.is_equivalent() {
        return Err(mismatch(&report));
    }
    Ok(())
}

/// Exhaustive when small, random otherwise.
fn verify_auto(g: &AdderGraph, m: &Matrix, trials: u64, seed: u64) -> Result<Report, Error> {
    match check_exhaustive(g, m, DEFAULT_EXHAUSTIVE_LIMIT) {
        Err(Error::SpaceTooLarge { .. }) => check_random(g, m, trials, seed),
        r => r,
    }
}

fn emit(args: EmitArgs) -> Result<(), Failure> {
    let g = read_graph(&args.graph)?;
    let opts = VerilogOptions { module_name: &args.module, pipeline_every: args.pipeline_every, latency: None };
    write(&args.verilog, &emit_verilog(&g, &opts)?)?;
    if let Some(tb) = &args.testbench {
        let xs = sample_inputs(&g.input_qints(), args.vectors, args.seed);
        let m = args.matrix.as_deref().map(|p| matrix_file::read(p, args.frac_bits)).transpose()?;
        let vectors = xs
            .into_iter()
            .map(|x| {
                let y = match &m {
                    Some(m) => oracle(m, &x)?,
                    None => g.evaluate(&x)?,
                };
                Ok((x, y))
            })
            .collect::<Result<Vec<_>, Error>>()?;
        write(tb, &emit_testbench(&g, &opts, &vectors)?)?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    }
    let selection = if args.unweighted { Selection::Unweighted } else { Selection::Weighted };
    let cfg = SuiteConfig {
        sizes: args.sizes,
        bw: args.bw,
        opts: SolveOptions { dc: args.dc, selection, ..SolveOptions::default() },
        trials: args.trials,
        seed: args.seed,
    };
    let rows = run_suite(&cfg)?;
    let csv = summaries_csv(&rows);
    print!("{csv}");
    if let Some(p) = &args.csv {
        write(p, &csv)?;
    }
    if let Some(p) = &args.json {
        write(p, &summaries_json(&rows))?;
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let m = matrix_file::read(&args.matrix, args.frac_bits)?;
    let g = read_graph(&args.graph)?;
    let report = if args.exhaustive {
        check_exhaustive(&g, &m, args.limit)?
    } else if let Some(n) = args.trials {
        check_random(&g, &m, n, args.seed)?
    } else {
        verify_auto(&g, &m, 10_000, args.seed)?
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report.to_json()).expect("plain json"));
    } else {
        print!("{report}");
    }
    if !report.is_equivalent() {
        return Err(mismatch(&report));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Optimize(a) => optimize(a),
        Command::Emit(a) => emit(a),
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
