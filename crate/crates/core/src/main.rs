use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use moddit::bench::{bench_csv, run_bench, BenchConfig};
use moddit::io::{format_intensities, read_intensities, read_matrix, write_atomic, write_matrix};
use moddit::sim::{run_denoising, SimConfig};
use moddit::{
    attention_to_sparsity, block_diag_decision, build_block_mask, ensure_row_coverage, nae, solve_intensities,
    topk_patterns, AttentionMap, Error, GridLayout, Matrix, SelectionDirection, SolverConfig, SparsityMap,
};

/// Block-sparse attention masks from structured sparsity-map decomposition.
#[derive(Parser)]
#[command(name = "mod", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Attention map (N x N) to block sparsity map (n x n).
    Sparsify(SparsifyArgs),
    /// Fit pattern intensities to a sparsity map.
    Decompose(DecomposeArgs),
    /// Build a block mask from fitted intensities.
    Mask(MaskArgs),
    /// Run the synthetic denoising loop from a config file.
    Simulate(SimulateArgs),
    /// Time structured versus materialized solves over a size sweep.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SparsifyArgs {
    /// Attention matrix (.csv or .bin).
    #[arg(long = "in")]
    input: PathBuf,
    /// Tokens per block side.
    #[arg(long)]
    block: usize,
    /// Entries strictly below this count as sparse.
    #[arg(long, default_value_t = 1e-4)]
    eta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Sparsity map (.csv or .bin).
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of frame squares on the diagonal; must divide the grid side.
    #[arg(long, default_value_t = 1)]
    frames: usize,
    #[arg(long, default_value_t = 1e-8)]
    lambda: f64,
    /// Intensity table (`family,index,offset,intensity`, plus an `nae` row).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaskArgs {
    /// Intensity table as written by `decompose`.
    #[arg(long)]
    intensities: PathBuf,
    /// Earlier intensity table; frame squares are kept only if both exceed `--tau-e`.
    #[arg(long)]
    prev: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    topk: usize,
    #[arg(long = "tau-e", default_value_t = 0.5)]
    tau_e: f64,
    #[arg(long, default_value_t = 1)]
    frames: usize,
    #[arg(long, default_value = "ascending")]
    direction: SelectionDirection,
    /// Open the diagonal block of any block row left without a pass block.
    #[arg(long)]
    cover_rows: bool,
    /// 0/1 block mask.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for trace.csv, summary.csv and config.csv.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the trajectory seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the head count.
    #[arg(long)]
    heads: Option<usize>,
    /// Also write every sparse-phase block mask.
    #[arg(long)]
    dump_masks: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Grid sides to time.
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 4)]
    frames: usize,
    /// Samples per measurement; medians are reported.
    #[arg(long, default_value_t = 5)]
    reps: usize,
    /// Minimum duration of one sample in milliseconds.
    #[arg(long, default_value_t = 20)]
    min_sample_ms: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time only the structured path.
    #[arg(long)]
    skip_oracle: bool,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}

fn configure_threads() {
    let threads = std::env::var("MOD_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    if threads > 0 {
        // Fails only if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
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
    configure_threads();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                if !msg.contains(&s.to_string()) {
                    msg.push_str(&format!(": {s}"));
                }
                src = s.source();
            }
            eprintln!("mod: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(cmd: Command) -> moddit::Result<()> {
    match cmd {
        Command::Sparsify(a) => {
            let values = read_matrix(&a.input)?;
            if !values.is_square() {
                return Err(Error::InvalidArgument(format!(
                    "{}: attention map must be square, got {}x{}",
                    a.input.display(),
                    values.rows(),
                    values.cols()
                )));
            }
            let layout = GridLayout::new(values.rows(), a.block, 1)?;
            let map = attention_to_sparsity(&AttentionMap::new(values, 0)?, &layout, a.eta)?;
            write_matrix(&a.out, &map.values)
        }
        Command::Decompose(a) => {
            let map = SparsityMap::new(read_matrix(&a.input)?, 0)?;
            let layout = GridLayout::from_grid(map.side(), a.frames)?;
            let cfg = SolverConfig {
                lambda: a.lambda,
                ..SolverConfig::default()
            };
            let fit = solve_intensities(&map, &layout, &cfg)?;
            let err = nae(&map, &fit.intensities, &layout)?;
            write_atomic(&a.out, format_intensities(&fit.intensities, &layout, Some(err)).as_bytes())?;
            println!("nae {err}");
            println!("path {}", fit.path.name());
            Ok(())
        }
        Command::Mask(a) => {
            let (curr, _) = read_intensities(&a.intensities)?;
            let prev = match &a.prev {
                Some(p) => read_intensities(p)?.0,
                None => curr.clone(),
            };
            let layout = GridLayout::from_grid(curr.d.len(), a.frames)?;
            curr.check_layout(&layout)?;
            prev.check_layout(&layout)?;
            if a.topk == 0 {
                return Err(Error::InvalidArgument("--topk must be at least 1".into()));
            }
            let preserve = block_diag_decision(&prev.e, &curr.e, a.tau_e)?;
            let selected = topk_patterns(&curr.c, &curr.d, a.topk, a.direction);
            let mut mask = build_block_mask(&selected, &preserve, &layout, 0, 0)?;
            if a.cover_rows {
                ensure_row_coverage(&mut mask);
            }
            let n = mask.side();
            let bits = Matrix::from_fn(n, n, |i, j| f64::from(u8::from(mask.get(i, j))));
            write_matrix(&a.out, &bits)?;
            println!("sparsity_ratio {}", moddit::sparsity_ratio(&mask));
            Ok(())
        }
        Command::Simulate(a) => {
            let mut cfg = SimConfig::load(&a.config)?;
            if let Some(seed) = a.seed {
                cfg.trajectory.seed = seed;
            }
            if let Some(h) = a.heads {
                cfg.run.heads = h;
            }
            cfg.run.dump_masks |= a.dump_masks;
            let report = run_denoising(&cfg.schedule, &cfg.layout, &cfg.solver, &cfg.trajectory, &cfg.run)?;
            report.write_to(&a.out)?;
            print!("{}", report.summary_csv());
            Ok(())
        }
        Command::Bench(a) => {
            let cfg = BenchConfig {
                sizes: a.sizes,
                frames: a.frames,
                repetitions: a.reps,
                min_sample: Duration::from_millis(a.min_sample_ms),
                seed: a.seed,
                skip_oracle: a.skip_oracle,
                ..BenchConfig::default()
            };
            let csv = bench_csv(&run_bench(&cfg)?);
            match a.out {
                Some(path) => write_atomic(&path, csv.as_bytes()),
                None => {
                    print!("{csv}");
                    Ok(())
                }
            }
        }
    }
}
