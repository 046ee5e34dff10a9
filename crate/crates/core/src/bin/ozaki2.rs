//! Command-line harness: matrix generation, emulation, accuracy sweeps and
//! the performance model.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ozaki2::bench::{self, AnyMatrix, GenSpec, SweepSpec};
use ozaki2::emulate::default_num_moduli;
use ozaki2::io::{read_matrix, write_matrix};
use ozaki2::perf::{self, Axis, PerfParams, DEFAULT_B_AXIS, DEFAULT_P_AXIS};
use ozaki2::{ComplexMatrix, ComplexStrategy, Domain, EmuConfig, EmuError, Matrix, Mode, Precision};

#[derive(Parser)]
#[command(name = "ozaki2", version, about = "Int8 CRT emulation of real and complex GEMM")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiply two OZ2M matrix files.
    Emulate(EmulateArgs),
    /// Accuracy sweep over moduli counts, phi values and seeds (CSV).
    Accuracy(AccuracyArgs),
    /// Predicted time and throughput for one configuration.
    Perfmodel(PerfArgs),
    /// Predicted throughput over a bandwidth x int8-throughput grid (CSV).
    Heatmap(HeatmapArgs),
    /// Write a generated matrix to an OZ2M file.
    Gen(GenArgs),
}

#[derive(Args)]
struct Tuning {
    /// Scaling mode: fast or accurate.
    #[arg(long, default_value = "accurate")]
    mode: Mode,
    /// Number of moduli (default depends on domain, precision and mode).
    #[arg(short = 'N', long = "num-moduli")]
    num_moduli: Option<usize>,
    /// Output-column block width.
    #[arg(long, default_value_t = ozaki2::int8::DEFAULT_N_BLOCK)]
    block: usize,
    /// Complex kernel: karatsuba, expand-rows or expand-cols.
    #[arg(long, default_value = "karatsuba")]
    strategy: ComplexStrategy,
}

#[derive(Args)]
struct EmulateArgs {
    a: PathBuf,
    b: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AccuracyArgs {
    #[arg(long, default_value = "double")]
    precision: Precision,
    #[arg(long, default_value = "complex")]
    domain: Domain,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(short = 'm', default_value_t = bench::DEFAULT_SWEEP_DIMS.0)]
    m: usize,
    #[arg(short = 'n', default_value_t = bench::DEFAULT_SWEEP_DIMS.1)]
    n: usize,
    #[arg(short = 'k', default_value_t = bench::DEFAULT_SWEEP_DIMS.2)]
    k: usize,
    /// Comma-separated moduli counts (overrides -N).
    #[arg(long = "moduli-list", value_delimiter = ',')]
    moduli_list: Vec<usize>,
    /// Comma-separated phi values.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    phi: Vec<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    /// CSV destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerfArgs {
    #[arg(long, default_value = "double")]
    precision: Precision,
    #[arg(long, default_value = "accurate")]
    mode: Mode,
    #[arg(short = 'm', default_value_t = 16384)]
    m: usize,
    #[arg(short = 'n', default_value_t = 16384)]
    n: usize,
    #[arg(short = 'k', default_value_t = 16384)]
    k: usize,
    /// Number of moduli (default depends on precision and mode).
    #[arg(short = 'N', long = "num-moduli")]
    num_moduli: Option<usize>,
    /// Correction term (default: the number of moduli).
    #[arg(short = 'c')]
    c: Option<f64>,
    /// Memory bandwidth in bytes per second.
    #[arg(short = 'b', default_value_t = 4e12)]
    b: f64,
    /// Int8 throughput in operations per second.
    #[arg(short = 'p', default_value_t = 1.5e15)]
    p: f64,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long, default_value = "double")]
    precision: Precision,
    #[arg(long, default_value = "accurate")]
    mode: Mode,
    #[arg(short = 'm', default_value_t = 16384)]
    m: usize,
    #[arg(short = 'n', default_value_t = 16384)]
    n: usize,
    #[arg(short = 'k', default_value_t = 16384)]
    k: usize,
    #[arg(short = 'N', long = "num-moduli")]
    num_moduli: Option<usize>,
    #[arg(short = 'c')]
    c: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_B_AXIS.min)]
    b_min: f64,
    #[arg(long, default_value_t = DEFAULT_B_AXIS.max)]
    b_max: f64,
    #[arg(long, default_value_t = DEFAULT_B_AXIS.steps)]
    b_steps: usize,
    #[arg(long, default_value_t = DEFAULT_P_AXIS.min)]
    p_min: f64,
    #[arg(long, default_value_t = DEFAULT_P_AXIS.max)]
    p_max: f64,
    #[arg(long, default_value_t = DEFAULT_P_AXIS.steps)]
    p_steps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value = "double")]
    precision: Precision,
    #[arg(long, default_value = "complex")]
    domain: Domain,
    /// Rows.
    #[arg(short = 'm')]
    m: usize,
    /// Columns.
    #[arg(short = 'n')]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator stream; 0 and 1 give the A and B operands of a sweep.
    #[arg(long, default_value_t = 0)]
    stream: u64,
    /// Write the (rectangular) identity instead of random data.
    #[arg(long)]
    identity: bool,
    #[arg(long)]
    out: PathBuf,
}

impl Tuning {
    fn config(&self, threads: usize) -> EmuConfig {
        let mut cfg = EmuConfig::default()
            .with_mode(self.mode)
            .with_n_block(self.block)
            .with_strategy(self.strategy)
            .with_threads(threads);
        cfg.num_moduli = self.num_moduli;
        cfg
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, EmuError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| EmuError::Io {
            path: p.to_path_buf(),
            source,
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn io_err(path: Option<&Path>) -> impl Fn(io::Error) -> EmuError + '_ {
    move |source| EmuError::Io {
        path: path.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    }
}

fn emulate(args: &EmulateArgs) -> Result<(), EmuError> {
    let a = read_matrix(&args.a)?;
    let b = read_matrix(&args.b)?;
    let c = bench::emulate_any(&a, &b, &args.tuning.config(args.threads))?;
    write_matrix(&args.out, &c)
}

fn accuracy(args: &AccuracyArgs) -> Result<(), EmuError> {
    let t = &args.tuning;
    let mut spec = SweepSpec::new(args.precision, args.domain, t.mode);
    spec.dims = (args.m, args.n, args.k);
    spec.num_moduli = if !args.moduli_list.is_empty() {
        args.moduli_list.clone()
    } else {
        vec![t
            .num_moduli
            .unwrap_or_else(|| default_num_moduli(args.domain, args.precision, t.mode))]
    };
    spec.phis = args.phi.clone();
    spec.seeds = args.seed.clone();
    spec.strategy = t.strategy;
    spec.n_block = t.block;
    let rows = bench::run_accuracy_sweep(&spec)?;
    let out = args.out.as_deref();
    let mut w = output(out)?;
    bench::write_sweep_csv(&rows, &mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))
}

fn perf_params(
    precision: Precision,
    mode: Mode,
    dims: (usize, usize, usize),
    n: Option<usize>,
    c: Option<f64>,
) -> PerfParams {
    let n = n.unwrap_or_else(|| default_num_moduli(Domain::Complex, precision, mode));
    let pp = PerfParams::new(precision, mode, dims, n, 1.0, 1.0);
    match c {
        Some(c) => pp.with_c(c),
        None => pp,
    }
}

fn perfmodel(args: &PerfArgs) -> Result<(), EmuError> {
    let pp = PerfParams {
        b: args.b,
        p: args.p,
        ..perf_params(
            args.precision,
            args.mode,
            (args.m, args.n, args.k),
            args.num_moduli,
            args.c,
        )
    };
    pp.validate()?;
    println!("time_s={}", perf::predict_time(&pp));
    println!("tflops={}", perf::predicted_tflops(&pp));
    println!("compute_bound_tflops={}", perf::compute_bound_tflops(&pp));
    Ok(())
}

fn heatmap(args: &HeatmapArgs) -> Result<(), EmuError> {
    let tpl = perf_params(
        args.precision,
        args.mode,
        (args.m, args.n, args.k),
        args.num_moduli,
        args.c,
    );
    let cells = perf::heatmap_grid(
        Axis::new(args.b_min, args.b_max, args.b_steps),
        Axis::new(args.p_min, args.p_max, args.p_steps),
        &tpl,
    )?;
    let out = args.out.as_deref();
    let mut w = output(out)?;
    perf::write_heatmap_csv(&cells, &mut w).map_err(io_err(out))?;
    w.flush().map_err(io_err(out))
}

fn identity(args: &GenArgs) -> AnyMatrix {
    let eye = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let (m, n) = (args.m, args.n);
    match (args.domain, args.precision) {
        (Domain::Real, Precision::Single) => AnyMatrix::F32(Matrix::from_fn(m, n, |i, j| eye(i, j) as f32)),
        (Domain::Real, Precision::Double) => AnyMatrix::F64(Matrix::from_fn(m, n, eye)),
        (Domain::Complex, Precision::Single) => AnyMatrix::C32(
            ComplexMatrix::new(Matrix::from_fn(m, n, |i, j| eye(i, j) as f32), Matrix::zeros(m, n))
                .expect("same shape"),
        ),
        (Domain::Complex, Precision::Double) => {
            AnyMatrix::C64(ComplexMatrix::new(Matrix::from_fn(m, n, eye), Matrix::zeros(m, n)).expect("same shape"))
        }
    }
}

fn gen(args: &GenArgs) -> Result<(), EmuError> {
    let m = if args.identity {
        identity(args)
    } else {
        bench::gen_matrix(&GenSpec {
            rows: args.m,
            cols: args.n,
            phi: args.phi,
            seed: args.seed,
            stream: args.stream,
            precision: args.precision,
            domain: args.domain,
        })
    };
    write_matrix(&args.out, &m)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Usage errors exit with status 2; --help and --version with 0.
        Err(e) => e.exit(),
    };
    let res = match &cli.cmd {
        Command::Emulate(a) => emulate(a),
        Command::Accuracy(a) => accuracy(a),
        Command::Perfmodel(a) => perfmodel(a),
        Command::Heatmap(a) => heatmap(a),
        Command::Gen(a) => gen(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
