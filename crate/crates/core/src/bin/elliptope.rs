use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use elliptope::bench::{self, BenchConfig, BenchEntry};
use elliptope::io::{Corm1Writer, CsvMatrixWriter, MatrixFormat};
use elliptope::row::{RowChainConfig, DEFAULT_BURN_IN, DEFAULT_SIGMA_EPS};
use elliptope::sampler::{ChainMode, Method};
use elliptope::stats::{self, SweepConfig, DESK_SWEEP_DIM, LARGE_SWEEP_DIM};
use elliptope::verify::{self, VerifyOptions};
use elliptope::Result;

const OUT_DIR_ENV: &str = "ELLIPTOPE_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "elliptope",
    version,
    about = "Uniform sampling of correlation matrices"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate correlation matrices.
    Generate(GenerateArgs),
    /// Time every method over a range of sizes.
    Bench(BenchArgs),
    /// Acceptance-ratio sweep of the row chains.
    Diagnose(DiagnoseArgs),
    /// Statistical self-check against exact laws.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Chol,
    Vine,
    Onion,
    Polar,
}

impl MethodArg {
    fn method(self) -> Method {
        use elliptope::baselines::BaselineMethod::*;
        match self {
            MethodArg::Chol => Method::Chol,
            MethodArg::Vine => Method::Baseline(Vine),
            MethodArg::Onion => Method::Baseline(Onion),
            MethodArg::Polar => Method::Baseline(Polar),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    ChainReuse,
    Restart,
}

impl From<ModeArg> for ChainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ChainReuse => ChainMode::ChainReuse,
            ModeArg::Restart => ChainMode::RestartPerMatrix,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Corm1,
    Csv,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Corm1 => MatrixFormat::Corm1,
            FormatArg::Csv => MatrixFormat::Csv,
        }
    }
}

#[derive(Args)]
struct ChainArgs {
    /// Proposal scale.
    #[arg(long, default_value_t = DEFAULT_SIGMA_EPS)]
    sigma_eps: f64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: u64,
    #[arg(long, default_value_t = 1)]
    thin: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "chain-reuse")]
    mode: ModeArg,
}

impl ChainArgs {
    fn row_config(&self) -> Result<RowChainConfig> {
        RowChainConfig::new(self.sigma_eps, self.burn_in, self.thin, self.seed)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "chol")]
    method: MethodArg,
    /// Matrix size p.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, value_enum, default_value = "corm1")]
    format: FormatArg,
    /// Output file; `-` writes to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Matrix sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20, 30, 40, 50, 60, 70, 80, 90, 100])]
    dims: Vec<usize>,
    #[arg(long, default_value_t = 5000)]
    count: usize,
    /// Timed runs per cell; the median is reported.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["chol", "vine", "onion", "polar"])]
    methods: Vec<MethodArg>,
    /// Also time chol with a fresh chain per matrix.
    #[arg(long)]
    include_restart: bool,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, default_value_t = DESK_SWEEP_DIM)]
    dim: usize,
    /// Sweep at p = 1000.
    #[arg(long, conflicts_with = "dim")]
    paper_scale: bool,
    /// Rows to sweep (1-based); defaults to five evenly spread rows.
    #[arg(long, value_delimiter = ',')]
    rows: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Smaller samples.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, hide = true, default_value_t = 0, allow_hyphen_values = true)]
    exponent_shift: i64,
}

fn resolve_output(explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    explicit.unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(default_name)
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let method = args.method.method();
    let dim = args.dim as usize;
    let format = MatrixFormat::from(args.format);
    let row_config = args.chain.row_config()?;
    let path = resolve_output(args.output, &format!("matrices.{}", format.extension()));
    let out: Box<dyn Write> = if path.as_os_str() == "-" {
        Box::new(BufWriter::new(io::stdout().lock()))
    } else {
        Box::new(create(&path)?)
    };

    let start = Instant::now();
    let stream = method.stream(dim, args.count, row_config, args.chain.mode.into())?;
    match format {
        MatrixFormat::Corm1 => {
            let mut w = Corm1Writer::new(out, dim, args.count as u64)?;
            for m in stream {
                w.write(&m?)?;
            }
            w.finish()?.flush()?;
        }
        MatrixFormat::Csv => {
            let mut w = CsvMatrixWriter::new(out);
            for m in stream {
                w.write(&m?)?;
            }
            w.finish()?.flush()?;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    eprintln!(
        "method={} p={} n={} seconds={:.3} matrices_per_sec={:.1} seed={}",
        method.label(),
        dim,
        args.count,
        secs,
        args.count as f64 / secs,
        args.chain.seed
    );
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: BenchArgs, threads: usize) -> Result<ExitCode> {
    let row_config = args.chain.row_config()?;
    let mode: ChainMode = args.chain.mode.into();
    let mut entries: Vec<BenchEntry> = args
        .methods
        .iter()
        .map(|m| BenchEntry {
            method: m.method(),
            mode,
        })
        .collect();
    if args.include_restart && !entries.iter().any(|e| e.label() == "chol-restart") {
        entries.push(BenchEntry {
            method: Method::Chol,
            mode: ChainMode::RestartPerMatrix,
        });
    }
    let config = BenchConfig {
        entries,
        dims: args.dims,
        count: args.count,
        repeats: args.repeats,
        row_config,
    };
    let records = bench::run_bench(&config, |r| {
        eprintln!(
            "{:>14} p={:<4} {:.3}s ({:.1}/s)",
            r.label,
            r.dim,
            r.seconds,
            r.throughput()
        );
    })?;
    let path = resolve_output(args.output, "bench.csv");
    let mut out = create(&path)?;
    writeln!(
        out,
        "# seed={} threads={} repeats={}",
        args.chain.seed, threads, args.repeats
    )?;
    bench::write_bench_csv(&records, &mut out)?;
    out.flush()?;
    eprintln!("wrote {}", path.display());
    if !records.is_empty() && records.iter().all(|r| r.seconds.is_nan()) {
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn diagnose(args: DiagnoseArgs) -> Result<ExitCode> {
    let dim = if args.paper_scale {
        LARGE_SWEEP_DIM
    } else {
        args.dim
    };
    let mut config = SweepConfig::default_grid(dim, args.seed);
    if let Some(rows) = args.rows {
        config.rows = rows;
    }
    if let Some(sigmas) = args.sigmas {
        config.sigmas = sigmas;
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    if let Some(burn_in) = args.burn_in {
        config.burn_in = burn_in;
    }
    let grid = stats::acceptance_sweep(&config)?;
    let path = resolve_output(args.output, "acceptance.csv");
    let mut out = create(&path)?;
    writeln!(out, "# seed={}", args.seed)?;
    grid.write_csv(&mut out)?;
    out.flush()?;

    for (row, residual) in grid.monotone_residuals() {
        let verdict = if residual < 0.05 { "pass" } else { "fail" };
        println!("row {row}: monotone trend {verdict} (isotonic residual {residual:.4})");
    }
    eprintln!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn run_verify(args: VerifyArgs) -> Result<ExitCode> {
    let report = verify::run(&VerifyOptions {
        seed: args.seed,
        quick: args.quick,
        exponent_shift: args.exponent_shift,
    })?;
    for gate in &report.gates {
        for r in &gate.records {
            let verdict = if r.result.passes(verify::LEVEL) {
                "pass"
            } else {
                "FAIL"
            };
            println!(
                "{:<22} {:<28} p={:<4} D={:.5} p_value={:.4} {verdict}",
                gate.name, r.method, r.dim, r.result.statistic, r.result.p_value
            );
        }
    }
    let path = resolve_output(args.output, "ks.csv");
    let mut out = create(&path)?;
    writeln!(out, "# seed={}", args.seed)?;
    stats::write_ks_csv(&report.records(), &mut out)?;
    out.flush()?;
    let failing = report.failing();
    if failing.is_empty() {
        println!("verify: all gates passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("verify: failed gates: {}", failing.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    let threads = pool.current_num_threads();

    let result = pool.install(|| match cli.command {
        Command::Generate(a) => generate(a),
        Command::Bench(a) => run_bench(a, threads),
        Command::Diagnose(a) => diagnose(a),
        Command::Verify(a) => run_verify(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
