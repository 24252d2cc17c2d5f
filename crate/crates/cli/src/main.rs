//! `spikecsp`: compile finite-domain CSPs into spiking winner-take-all
//! networks, sample them, and analyze the resulting spike streams.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};

use spikecsp::csp::CspProblem;
use spikecsp::sim::SimParams;
use spikecsp_cli::{
    analyze_one, load_manifest, parse_emit_list, parse_schedule_arg, parse_seed_range,
    read_json_file, run_seeds, solve_config_from_manifest, solve_one, write_run_dir, AnalyzeConfig,
    ArtifactKind, Manifest, ProblemSource, RunConfig, RunSummary, SeedLayout,
};

#[derive(Parser)]
#[command(name = "spikecsp", version, about = "Spiking winner-take-all CSP sampler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a problem, run the sampler, and write artifacts.
    Solve(SolveArgs),
    /// Re-score a stored spike stream without re-simulating.
    Analyze(AnalyzeArgs),
    /// List every solution by exhaustive search, one JSON array per line.
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// Constraint problem JSON file.
    #[arg(long, value_name = "FILE", conflicts_with = "sudoku")]
    problem: Option<PathBuf>,
    /// Square grid puzzle of the given order (2 means a 4x4 grid).
    #[arg(long, value_name = "K")]
    sudoku: Option<u32>,
    /// Clue file for --sudoku: {"order": K, "clues": [[row, col, value], ...]}.
    #[arg(long, value_name = "FILE", requires = "sudoku")]
    clues: Option<PathBuf>,
    /// Rerun the exact configuration stored in a manifest.
    #[arg(
        long,
        value_name = "FILE",
        conflicts_with_all = [
            "problem", "sudoku", "clues", "tau_ref", "tau_inh", "jitter",
            "drive", "t_end", "bin", "seed", "seeds", "anneal",
        ]
    )]
    from_manifest: Option<PathBuf>,
    /// Mean refractory duration in ms.
    #[arg(long, value_name = "MS")]
    tau_ref: Option<f64>,
    /// Mean inhibitory pulse duration in ms.
    #[arg(long, value_name = "MS")]
    tau_inh: Option<f64>,
    /// Duration jitter (Gaussian sigma) in ms.
    #[arg(long, value_name = "MS")]
    jitter: Option<f64>,
    /// Mean drive delay in ms.
    #[arg(long, value_name = "MS")]
    drive: Option<f64>,
    /// Simulated span in ms.
    #[arg(long, value_name = "MS")]
    t_end: Option<f64>,
    /// Bin width in ms for spike-to-state conversion.
    #[arg(long, value_name = "MS")]
    bin: Option<f64>,
    /// RNG seed for a single run.
    #[arg(long, value_name = "N", conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Half-open seed range A..B, one independent run per seed.
    #[arg(long, value_name = "A..B")]
    seeds: Option<String>,
    /// Worker threads for --seeds (default: available cores).
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Annealing schedule: inline JSON or a path to a JSON file.
    #[arg(long, value_name = "JSON")]
    anneal: Option<String>,
    /// Output directory; without it only the summary is printed.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated artifacts to write (default: all):
    /// spikes,states,trace,histograms,fits,solutions.
    #[arg(long, value_name = "LIST")]
    emit: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Spike stream (JSONL) to score.
    #[arg(long, value_name = "FILE")]
    spikes: PathBuf,
    /// Constraint problem JSON file the stream was recorded against.
    #[arg(long, value_name = "FILE", conflicts_with = "sudoku")]
    problem: Option<PathBuf>,
    /// Square grid puzzle of the given order.
    #[arg(long, value_name = "K")]
    sudoku: Option<u32>,
    /// Bin width in ms.
    #[arg(long, value_name = "MS")]
    bin: Option<f64>,
    /// Stream span in ms; defaults to just past the last spike.
    #[arg(long, value_name = "MS")]
    t_end: Option<f64>,
    /// Output directory; without it only the summary is printed.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated artifacts to write (default: all but spikes).
    #[arg(long, value_name = "LIST")]
    emit: Option<String>,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Constraint problem JSON file.
    #[arg(long, value_name = "FILE", conflicts_with = "sudoku")]
    problem: Option<PathBuf>,
    /// Square grid puzzle of the given order.
    #[arg(long, value_name = "K")]
    sudoku: Option<u32>,
    /// Stop after this many solutions.
    #[arg(long, value_name = "N")]
    cap: Option<usize>,
    /// Write solutions here instead of stdout.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version are successes; anything else is a usage
            // error and all errors here are exit code 1.
            let code = if e.exit_code() == 0 { 0 } else { 1 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Enumerate(args) => cmd_enumerate(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

/// Loads the problem source shared by all subcommands.
fn problem_source(
    problem: &Option<PathBuf>,
    sudoku: Option<u32>,
    clues: &Option<PathBuf>,
) -> Result<ProblemSource> {
    match (problem, sudoku) {
        (Some(path), None) => {
            let problem: CspProblem = read_json_file(path, "problem file")?;
            Ok(ProblemSource::Problem { problem })
        }
        (None, Some(order)) => {
            let clues = match clues {
                Some(path) => {
                    let file: spikecsp::csp::SudokuClues = read_json_file(path, "clue file")?;
                    ensure!(
                        file.order == order,
                        "clue file is for order {} but --sudoku {order} was given",
                        file.order
                    );
                    file.clues
                }
                None => Vec::new(),
            };
            Ok(ProblemSource::Sudoku { order, clues })
        }
        (None, None) => bail!("specify a problem source: --problem FILE or --sudoku K"),
        (Some(_), Some(_)) => unreachable!("clap rejects --problem with --sudoku"),
    }
}

fn default_workers(num_seeds: usize) -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(num_seeds)
}

fn cmd_solve(args: SolveArgs) -> Result<i32> {
    if let Some(manifest_path) = &args.from_manifest {
        return rerun_from_manifest(&args, manifest_path.clone());
    }

    let mut params = SimParams::default();
    if let Some(v) = args.tau_ref {
        params.tau_ref = v;
    }
    if let Some(v) = args.tau_inh {
        params.tau_inh = v;
    }
    if let Some(v) = args.jitter {
        params.jitter_sigma = v;
    }
    if let Some(v) = args.drive {
        params.drive_delay = v;
    }
    if let Some(v) = args.t_end {
        params.t_end = v;
    }
    params.seed = args.seed.unwrap_or(0);

    let config = RunConfig {
        problem: problem_source(&args.problem, args.sudoku, &args.clues)?,
        params,
        schedule: args.anneal.as_deref().map(parse_schedule_arg).transpose()?,
        bin_width: args.bin.unwrap_or(100.0),
        emit: emit_or_all(&args.emit)?,
    };

    let (seeds, layout) = match &args.seeds {
        Some(range) => (parse_seed_range(range)?, SeedLayout::Keyed),
        None => (vec![config.params.seed], SeedLayout::Root),
    };
    let workers = args.workers.unwrap_or_else(|| default_workers(seeds.len()));
    ensure!(workers > 0, "--workers must be at least 1");

    let out = args.out.as_deref().map(|dir| (dir, layout));
    let summaries = run_seeds(&config, &seeds, workers, out)?;
    for summary in &summaries {
        println!("{}", summary_line(summary));
    }
    let solved = summaries.iter().filter(|s| s.solved()).count();
    if seeds.len() > 1 {
        println!("solutions in {solved}/{} seeds", seeds.len());
    }
    Ok(if solved > 0 { 0 } else { 2 })
}

fn rerun_from_manifest(args: &SolveArgs, manifest_path: PathBuf) -> Result<i32> {
    let stored = load_manifest(&manifest_path)?;
    let mut config = solve_config_from_manifest(&stored)?;
    if let Some(emit) = &args.emit {
        config.emit = parse_emit_list(emit)?;
    }
    let output = solve_one(&config)?;
    println!("{}", summary_line(&output.summary));
    if let Some(dir) = &args.out {
        let fresh = write_run_dir(dir, "solve", &config, &output.summary, &output.artifacts)?;
        report_reproduction(&stored, &fresh);
    }
    Ok(if output.summary.solved() { 0 } else { 2 })
}

/// Compares artifact hashes of a rerun against the stored manifest.
fn report_reproduction(stored: &Manifest, fresh: &Manifest) {
    let mut matched = 0usize;
    let mut compared = 0usize;
    for (name, hash) in &fresh.artifacts {
        let Some(old) = stored.artifacts.get(name) else {
            continue;
        };
        compared += 1;
        if old == hash {
            matched += 1;
        } else {
            println!("MISMATCH {name}: stored {old}, rerun {hash}");
        }
    }
    println!("reproduced {matched}/{compared} stored artifacts byte-identically");
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let emit = match &args.emit {
        Some(list) => parse_emit_list(list)?,
        None => ArtifactKind::ALL
            .into_iter()
            .filter(|k| *k != ArtifactKind::Spikes)
            .collect(),
    };
    let config = AnalyzeConfig {
        spikes: args.spikes.clone(),
        problem: problem_source(&args.problem, args.sudoku, &None)?,
        bin_width: args.bin.unwrap_or(100.0),
        t_end: args.t_end,
        emit,
    };
    let output = analyze_one(&config)?;
    println!("{}", summary_line(&output.summary).trim_start_matches("seed 0: "));
    if let Some(dir) = &args.out {
        write_run_dir(dir, "analyze", &config, &output.summary, &output.artifacts)?;
    }
    Ok(0)
}

fn cmd_enumerate(args: EnumerateArgs) -> Result<i32> {
    let source = problem_source(&args.problem, args.sudoku, &None)?;
    let (problem, _) = source.resolve()?;
    let solutions = problem.enumerate_solutions(args.cap.unwrap_or(usize::MAX))?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    for assignment in &solutions {
        serde_json::to_writer(&mut out, &assignment.values)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    eprintln!("{} solutions", solutions.len());
    Ok(0)
}

fn emit_or_all(emit: &Option<String>) -> Result<BTreeSet<ArtifactKind>> {
    match emit {
        Some(list) => parse_emit_list(list),
        None => Ok(ArtifactKind::ALL.into_iter().collect()),
    }
}

fn summary_line(s: &RunSummary) -> String {
    let min = s.min_energy.map_or("-".to_string(), |e| e.to_string());
    let first = s
        .first_solution_ms
        .map_or("-".to_string(), |t| format!("{t} ms"));
    format!(
        "seed {}: {} spikes, {} bins, min energy {}, {} solution bins, first solution {}",
        s.seed, s.num_spikes, s.num_bins, min, s.num_solution_bins, first
    )
}
