//! Plumbing behind the `spikecsp` binary: run configuration, artifact
//! construction, manifests with content hashes, and the multi-seed fan-out.
//!
//! Everything here is deterministic given the configuration. Artifacts are
//! built as byte buffers first so that hashing, writing, and testing all see
//! exactly the same bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{ensure, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use spikecsp::analysis::{
    bin_spikes, energy_histogram, energy_trace, find_solutions, fit_energy_model, histogram_points,
    jump_histogram, write_histogram_csv, write_states_csv, write_trace_csv, EnergyTrace, FitModel,
    FitResult,
};
use spikecsp::anneal::{run_annealed, Schedule};
use spikecsp::csp::{build_sudoku, Assignment, CspProblem, SudokuClues};
use spikecsp::net::compile;
use spikecsp::sim::{run, SimParams, SpikeRecord};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Guard against `--seeds` ranges that could never finish.
pub const MAX_SEED_FANOUT: u64 = 100_000;

// --- Configuration ----------------------------------------------------------

/// Where the problem comes from. File-based problems are embedded at load
/// time so a stored manifest replays without the original file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    Problem { problem: CspProblem },
    Sudoku {
        order: u32,
        /// `(row, col, printed value)` clue triples, clamped in the network.
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        clues: Vec<(u32, u32, u32)>,
    },
}

impl ProblemSource {
    /// Builds the problem and resolves clues to `(cell variable, value)`.
    pub fn resolve(&self) -> Result<(CspProblem, Vec<(u32, u32)>)> {
        match self {
            ProblemSource::Problem { problem } => Ok((problem.clone(), Vec::new())),
            ProblemSource::Sudoku { order, clues } => {
                let problem = build_sudoku(*order)?;
                let cells = SudokuClues {
                    order: *order,
                    clues: clues.clone(),
                }
                .to_cell_clues()?;
                Ok((problem, cells))
            }
        }
    }
}

/// Which artifacts a run writes. `Histograms` covers both the energy and the
/// jump histogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Spikes,
    States,
    Trace,
    Histograms,
    Fits,
    Solutions,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 6] = [
        ArtifactKind::Spikes,
        ArtifactKind::States,
        ArtifactKind::Trace,
        ArtifactKind::Histograms,
        ArtifactKind::Fits,
        ArtifactKind::Solutions,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArtifactKind::Spikes => "spikes",
            ArtifactKind::States => "states",
            ArtifactKind::Trace => "trace",
            ArtifactKind::Histograms => "histograms",
            ArtifactKind::Fits => "fits",
            ArtifactKind::Solutions => "solutions",
        }
    }
}

/// Parses a comma-separated `--emit` list.
pub fn parse_emit_list(s: &str) -> Result<BTreeSet<ArtifactKind>> {
    let mut set = BTreeSet::new();
    for part in s.split(',') {
        let part = part.trim();
        let kind = ArtifactKind::ALL
            .into_iter()
            .find(|k| k.name() == part)
            .with_context(|| {
                let names: Vec<_> = ArtifactKind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown artifact {part:?}; expected one of {}", names.join(", "))
            })?;
        set.insert(kind);
    }
    ensure!(!set.is_empty(), "empty --emit list");
    Ok(set)
}

/// One full solve run: problem, knobs, optional schedule, binning, artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub params: SimParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    pub bin_width: f64,
    pub emit: BTreeSet<ArtifactKind>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        ensure!(
            self.bin_width.is_finite() && self.bin_width > 0.0,
            "bin width must be positive, got {}",
            self.bin_width
        );
        if let Some(s) = &self.schedule {
            s.validate()?;
        }
        Ok(())
    }
}

/// Re-analysis of a stored spike stream; no simulation involved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub spikes: PathBuf,
    pub problem: ProblemSource,
    pub bin_width: f64,
    /// Overrides the inferred stream span (needed when trailing bins are
    /// empty, since the stream itself only shows the last spike).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    pub emit: BTreeSet<ArtifactKind>,
}

// --- Summaries ---------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub num_spikes: usize,
    pub num_bins: usize,
    pub min_energy: Option<u32>,
    pub num_solution_bins: usize,
    pub first_solution_ms: Option<f64>,
}

impl RunSummary {
    pub fn solved(&self) -> bool {
        self.num_solution_bins > 0
    }
}

// --- Artifact construction ---------------------------------------------------

/// A record scored against its problem: trace plus derived solution bins.
pub struct Scored {
    pub record: SpikeRecord,
    pub trace: EnergyTrace,
    pub solutions: Vec<(usize, Assignment)>,
}

impl Scored {
    pub fn new(problem: &CspProblem, record: SpikeRecord, bin_width: f64) -> Result<Self> {
        let states = bin_spikes(&record, problem, bin_width)?;
        let trace = energy_trace(problem, states, bin_width)?;
        let solutions = find_solutions(problem, &trace)?;
        Ok(Scored {
            record,
            trace,
            solutions,
        })
    }

    pub fn min_energy(&self) -> Option<u32> {
        self.trace.energies.iter().copied().min()
    }

    pub fn first_solution_ms(&self) -> Option<f64> {
        self.solutions.first().map(|(bin, _)| *bin as f64 * self.trace.bin_width)
    }
}

#[derive(Serialize)]
struct SolutionRow<'a> {
    bin: usize,
    t_ms: f64,
    values: &'a [u32],
}

/// Both decay-model fits of the energy histogram; a model that cannot be
/// fitted (too few populated levels) is stored as null.
#[derive(Debug, Serialize, Deserialize)]
pub struct FitsFile {
    pub exponential: Option<FitResult>,
    pub double_exponential: Option<FitResult>,
}

fn fit_or_none(points: &[(f64, f64)], model: FitModel) -> Result<Option<FitResult>> {
    match fit_energy_model(points, model) {
        Ok(fit) => Ok(Some(fit)),
        Err(spikecsp::Error::InsufficientData(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Renders every requested artifact as bytes, keyed by file name.
pub fn build_artifacts(
    scored: &Scored,
    emit: &BTreeSet<ArtifactKind>,
) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    let mut put = |name: &str, bytes: Vec<u8>| out.insert(name.to_string(), bytes);
    for kind in emit {
        match kind {
            ArtifactKind::Spikes => {
                let mut buf = Vec::new();
                scored.record.write_jsonl(&mut buf)?;
                put("spikes.jsonl", buf);
            }
            ArtifactKind::States => {
                let mut buf = Vec::new();
                write_states_csv(&scored.trace, &mut buf)?;
                put("states.csv", buf);
            }
            ArtifactKind::Trace => {
                let mut buf = Vec::new();
                write_trace_csv(&scored.trace, &mut buf)?;
                put("trace.csv", buf);
            }
            ArtifactKind::Histograms => {
                let mut buf = Vec::new();
                write_histogram_csv(&energy_histogram(&scored.trace), "energy", &mut buf)?;
                put("energy_hist.csv", buf);
                let jumps = if scored.trace.len() < 2 {
                    BTreeMap::new()
                } else {
                    jump_histogram(&scored.trace)?
                };
                let mut buf = Vec::new();
                write_histogram_csv(&jumps, "jump", &mut buf)?;
                put("jump_hist.csv", buf);
            }
            ArtifactKind::Fits => {
                let points = histogram_points(&energy_histogram(&scored.trace));
                let fits = FitsFile {
                    exponential: fit_or_none(&points, FitModel::Exponential)?,
                    double_exponential: fit_or_none(&points, FitModel::DoubleExponential)?,
                };
                put("fits.json", pretty_json(&fits)?);
            }
            ArtifactKind::Solutions => {
                let rows: Vec<SolutionRow> = scored
                    .solutions
                    .iter()
                    .map(|(bin, a)| SolutionRow {
                        bin: *bin,
                        t_ms: *bin as f64 * scored.trace.bin_width,
                        values: &a.values,
                    })
                    .collect();
                put("solutions.json", pretty_json(&rows)?);
            }
        }
    }
    Ok(out)
}

fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

// --- Running -----------------------------------------------------------------

pub struct RunOutput {
    pub summary: RunSummary,
    pub artifacts: BTreeMap<String, Vec<u8>>,
}

/// Compiles, runs, scores, and renders one seed's artifacts in memory.
pub fn solve_one(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let (problem, clues) = config.problem.resolve()?;
    let mut network = compile(&problem, &config.params.compile_params())?;
    if !clues.is_empty() {
        network = network.clamp_clues(&clues)?;
    }
    let scored = match &config.schedule {
        Some(schedule) => {
            let (record, trace) =
                run_annealed(&problem, &network, &config.params, schedule, config.bin_width)?;
            let solutions = find_solutions(&problem, &trace)?;
            Scored {
                record,
                trace,
                solutions,
            }
        }
        None => {
            let record = run(&network, &config.params)?;
            Scored::new(&problem, record, config.bin_width)?
        }
    };
    let summary = RunSummary {
        seed: config.params.seed,
        num_spikes: scored.record.events.len(),
        num_bins: scored.trace.len(),
        min_energy: scored.min_energy(),
        num_solution_bins: scored.solutions.len(),
        first_solution_ms: scored.first_solution_ms(),
    };
    let artifacts = build_artifacts(&scored, &config.emit)?;
    Ok(RunOutput { summary, artifacts })
}

/// Rescores a stored spike stream without re-simulating.
pub fn analyze_one(config: &AnalyzeConfig) -> Result<RunOutput> {
    ensure!(
        config.bin_width.is_finite() && config.bin_width > 0.0,
        "bin width must be positive, got {}",
        config.bin_width
    );
    let (problem, _) = config.problem.resolve()?;
    let file = fs::File::open(&config.spikes)
        .with_context(|| format!("opening spike file {}", config.spikes.display()))?;
    let mut record = SpikeRecord::read_jsonl(BufReader::new(file))
        .with_context(|| format!("spike file {}", config.spikes.display()))?;
    if let Some(t_end) = config.t_end {
        ensure!(
            t_end.is_finite() && t_end >= 0.0,
            "t-end must be non-negative, got {t_end}"
        );
        if let Some(last) = record.events.last() {
            ensure!(
                last.t < t_end,
                "t-end {t_end} ms is not past the last spike at {} ms",
                last.t
            );
        }
        record.t_end = t_end;
    }
    let scored = Scored::new(&problem, record, config.bin_width)?;
    let summary = RunSummary {
        seed: 0,
        num_spikes: scored.record.events.len(),
        num_bins: scored.trace.len(),
        min_energy: scored.min_energy(),
        num_solution_bins: scored.solutions.len(),
        first_solution_ms: scored.first_solution_ms(),
    };
    let artifacts = build_artifacts(&scored, &config.emit)?;
    Ok(RunOutput { summary, artifacts })
}

// --- Manifests ---------------------------------------------------------------

/// `manifest.json`: the full configuration plus a SHA-256 of every artifact
/// the run wrote. Re-running the stored config must reproduce these hashes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub command: String,
    pub config: serde_json::Value,
    pub artifacts: BTreeMap<String, String>,
    pub summary: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Writes all artifacts plus the manifest into `dir` (created if missing).
/// Only fixed file names are used, so nothing lands outside `dir`.
pub fn write_run_dir<C: Serialize, S: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    summary: &S,
    artifacts: &BTreeMap<String, Vec<u8>>,
) -> Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut hashes = BTreeMap::new();
    for (name, bytes) in artifacts {
        fs::write(dir.join(name), bytes)
            .with_context(|| format!("writing {}", dir.join(name).display()))?;
        hashes.insert(name.clone(), sha256_hex(bytes));
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        command: command.to_string(),
        config: serde_json::to_value(config)?,
        artifacts: hashes,
        summary: serde_json::to_value(summary)?,
    };
    fs::write(dir.join(MANIFEST_FILE), pretty_json(&manifest)?)
        .with_context(|| format!("writing {}", dir.join(MANIFEST_FILE).display()))?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest> {
    read_json_file(path, "manifest")
}

/// Extracts the solve configuration a manifest was written with.
pub fn solve_config_from_manifest(manifest: &Manifest) -> Result<RunConfig> {
    ensure!(
        manifest.command == "solve",
        "manifest records a {:?} run; only solve manifests can be rerun",
        manifest.command
    );
    ensure!(
        manifest.version == MANIFEST_VERSION,
        "manifest version {} is not supported (expected {MANIFEST_VERSION})",
        manifest.version
    );
    serde_path_to_error::deserialize(manifest.config.clone()).context("manifest config")
}

// --- Seed fan-out ------------------------------------------------------------

/// How a multi-run maps onto the output directory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedLayout {
    /// Artifacts directly in the output directory; single seed only.
    Root,
    /// One `seed-N` subdirectory per seed.
    Keyed,
}

/// Runs one chain per seed across `workers` threads. Chains share nothing,
/// so artifact bytes do not depend on the worker count. Summaries come back
/// in seed order; the first failure aborts the remaining queue.
pub fn run_seeds(
    base: &RunConfig,
    seeds: &[u64],
    workers: usize,
    out: Option<(&Path, SeedLayout)>,
) -> Result<Vec<RunSummary>> {
    ensure!(!seeds.is_empty(), "empty seed list");
    if let Some((_, SeedLayout::Root)) = out {
        ensure!(seeds.len() == 1, "root layout requires a single seed");
    }
    let workers = workers.clamp(1, seeds.len());
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let results: Vec<Mutex<Option<RunSummary>>> =
        seeds.iter().map(|_| Mutex::new(None)).collect();
    let first_error: Mutex<Option<anyhow::Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let mut config = base.clone();
                config.params.seed = seeds[i];
                let outcome = solve_one(&config).and_then(|output| {
                    if let Some((dir, layout)) = out {
                        let run_dir = match layout {
                            SeedLayout::Root => dir.to_path_buf(),
                            SeedLayout::Keyed => dir.join(format!("seed-{}", seeds[i])),
                        };
                        write_run_dir(&run_dir, "solve", &config, &output.summary, &output.artifacts)?;
                    }
                    Ok(output.summary)
                });
                match outcome {
                    Ok(summary) => *results[i].lock().unwrap() = Some(summary),
                    Err(e) => {
                        failed.store(true, Ordering::Relaxed);
                        first_error.lock().unwrap().get_or_insert(e);
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("all seeds completed"))
        .collect())
}

/// Parses a half-open `A..B` seed range.
pub fn parse_seed_range(s: &str) -> Result<Vec<u64>> {
    let (a, b) = s
        .split_once("..")
        .with_context(|| format!("seed range {s:?} is not of the form A..B"))?;
    let a: u64 = a.trim().parse().with_context(|| format!("seed range start {a:?}"))?;
    let b: u64 = b.trim().parse().with_context(|| format!("seed range end {b:?}"))?;
    ensure!(a < b, "seed range {s:?} is empty (half-open, so A < B)");
    ensure!(
        b - a <= MAX_SEED_FANOUT,
        "seed range {s:?} spans {} runs; the limit is {MAX_SEED_FANOUT}",
        b - a
    );
    Ok((a..b).collect())
}

// --- File parsing ------------------------------------------------------------

/// Reads a JSON file, reporting parse errors with the path of the offending
/// field (for example `constraints[0].a: invalid type`).
pub fn read_json_file<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {what} {}", path.display()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de)
        .with_context(|| format!("{what} {}", path.display()))
}

/// `--anneal` accepts inline JSON (first non-blank byte `{`) or a file path.
pub fn parse_schedule_arg(s: &str) -> Result<Schedule> {
    if s.trim_start().starts_with('{') {
        let mut de = serde_json::Deserializer::from_str(s);
        serde_path_to_error::deserialize(&mut de).context("--anneal schedule")
    } else {
        read_json_file(Path::new(s), "schedule file")
    }
}
