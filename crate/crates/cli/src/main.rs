//! Command-line front end: validate line-delimited datasets, build sketch
//! index files, answer diff/count queries against them, and run the
//! statistical bench and selftest loops.
//!
//! All randomness flows from `--seed` (or `SDRQ_SEED`): same inputs, same
//! flags, same seed — same output, except wall-clock timing fields.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 selftest failure.

mod bench;
mod ranges;
mod records;
mod selftest;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sdrq::container;
use sdrq::{
    query_count, query_diff, CanonicalStructure, DataItem, SdDiffAnswer, SdIndex, SketchMode,
    StructureKind,
};

/// A command abort, split by exit code: flag/syntax problems (1) versus bad
/// data, files, or query failures (2).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
}

impl From<sdrq::Error> for Failure {
    fn from(e: sdrq::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "sdrq",
    version,
    about = "Set-difference range queries over sketch-indexed datasets"
)]
struct Cli {
    /// Master seed; every hash family and trial stream derives from it.
    #[arg(long, global = true, env = "SDRQ_SEED", default_value_t = 42)]
    seed: u64,
    /// Emit results as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and validate a line-delimited dataset without building anything.
    ///
    /// One JSON object per line: {"set": name, "id": n, ...geometry}, where
    /// the geometry fields are x (tree1d), x+y (tree2d), lo+hi (segtree),
    /// i (grid1d) or i+j (grid2d).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        structure: StructureArg,
        /// Quantization for float coordinates: stored value = round(x * scale).
        /// Without it, coordinates must be integers.
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Build a serialized index from one dataset in the input.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        structure: StructureArg,
        #[arg(long)]
        mode: ModeArg,
        /// Dataset name to index (needed when the input holds several).
        #[arg(long)]
        set: Option<String>,
        /// Decode capacity, required for --mode fixed.
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.25)]
        delta: f64,
        /// Id universe width for --mode count-strata.
        #[arg(long, default_value_t = 48)]
        universe_bits: u32,
        /// Quantization for float coordinates, recorded in the index.
        #[arg(long)]
        scale: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exact symmetric difference between two indexed ranges.
    Diff {
        #[arg(long)]
        index_a: PathBuf,
        #[arg(long)]
        index_b: PathBuf,
        /// Closed range, e.g. "x:[0,100]", "x:[0,3],y:[2,9]", "x:7" (stab),
        /// "(0)-(5)" or "(0,0)-(3,4)" (grid).
        #[arg(long)]
        range_a: String,
        /// Range on side B; defaults to --range-a.
        #[arg(long)]
        range_b: Option<String>,
    },
    /// Estimated symmetric-difference cardinality between two indexed ranges.
    Count {
        #[arg(long)]
        index_a: PathBuf,
        #[arg(long)]
        index_b: PathBuf,
        #[arg(long)]
        range_a: String,
        #[arg(long)]
        range_b: Option<String>,
    },
    /// Seeded trial loops against the naive oracle; emits a report and,
    /// with --plot, CSV rows for figures.
    Bench {
        #[arg(long)]
        suite: SuiteArg,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        /// Suite-specific size: planted difference (count suites), points per
        /// side (e2e), or top of the size sweep (scaling).
        #[arg(long)]
        n: Option<usize>,
        /// Write plot data (CSV with a header row) to this path.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Fast invariant suite at small sizes; exits 3 when any check fails.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum StructureArg {
    Tree1d,
    Tree2d,
    Segtree,
    Grid1d,
    Grid2d,
}

impl From<StructureArg> for StructureKind {
    fn from(s: StructureArg) -> StructureKind {
        match s {
            StructureArg::Tree1d => StructureKind::Tree1d,
            StructureArg::Tree2d => StructureKind::Tree2d,
            StructureArg::Segtree => StructureKind::SegTree,
            StructureArg::Grid1d => StructureKind::Grid1d,
            StructureArg::Grid2d => StructureKind::Grid2d,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fixed,
    Variable,
    CountF2,
    CountStrata,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SuiteArg {
    Decode,
    CountAccuracy,
    StrataAccuracy,
    E2e,
    Scaling,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version land here as non-error "failures"
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(&cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            1
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Cmd::Ingest {
            input,
            structure,
            scale,
        } => cmd_ingest(cli, input, (*structure).into(), *scale),
        Cmd::Build {
            input,
            structure,
            mode,
            set,
            m,
            epsilon,
            delta,
            universe_bits,
            scale,
            out,
        } => cmd_build(
            cli,
            input,
            (*structure).into(),
            *mode,
            set.as_deref(),
            *m,
            *epsilon,
            *delta,
            *universe_bits,
            *scale,
            out,
        ),
        Cmd::Diff {
            index_a,
            index_b,
            range_a,
            range_b,
        } => cmd_diff(cli, index_a, index_b, range_a, range_b.as_deref()),
        Cmd::Count {
            index_a,
            index_b,
            range_a,
            range_b,
        } => cmd_count(cli, index_a, index_b, range_a, range_b.as_deref()),
        Cmd::Bench {
            suite,
            trials,
            m,
            epsilon,
            delta,
            n,
            plot,
        } => bench::cmd_bench(
            cli.json,
            cli.seed,
            *suite,
            *trials,
            *m,
            *epsilon,
            *delta,
            *n,
            plot.as_deref(),
        ),
        Cmd::Selftest => selftest::cmd_selftest(cli.json, cli.seed),
    }
}

fn emit<T: Serialize>(v: &T) -> Result<(), Failure> {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn cmd_ingest(
    cli: &Cli,
    input: &Path,
    kind: StructureKind,
    scale: Option<f64>,
) -> Result<i32, Failure> {
    let sets = records::load_datasets(input, kind, scale)?;
    let total: usize = sets.values().map(Vec::len).sum();
    if cli.json {
        #[derive(Serialize)]
        struct Out<'a> {
            records: usize,
            structure: &'a str,
            scale: f64,
            sets: BTreeMap<&'a String, usize>,
        }
        emit(&Out {
            records: total,
            structure: kind.as_str(),
            scale: scale.unwrap_or(1.0),
            sets: sets.iter().map(|(k, v)| (k, v.len())).collect(),
        })?;
    } else {
        println!(
            "ok: {total} record(s), structure {kind}, scale {}",
            scale.unwrap_or(1.0)
        );
        for (name, items) in &sets {
            println!("  set {name:?}: {} item(s)", items.len());
        }
    }
    Ok(0)
}

fn pick_set(
    mut sets: BTreeMap<String, Vec<DataItem>>,
    want: Option<&str>,
) -> Result<(String, Vec<DataItem>), Failure> {
    let names = sets.keys().cloned().collect::<Vec<_>>().join(", ");
    match want {
        Some(name) => sets
            .remove_entry(name)
            .ok_or_else(|| Failure::Data(format!("no set {name:?} in input (present: {names})"))),
        None if sets.len() == 1 => Ok(sets.pop_first().expect("nonempty")),
        None => Err(Failure::Usage(format!(
            "input holds {} sets ({names}); pick one with --set",
            sets.len()
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_build(
    cli: &Cli,
    input: &Path,
    kind: StructureKind,
    mode_arg: ModeArg,
    set: Option<&str>,
    m: Option<usize>,
    epsilon: f64,
    delta: f64,
    universe_bits: u32,
    scale: Option<f64>,
    out: &Path,
) -> Result<i32, Failure> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Failure::Usage(format!(
            "--epsilon {epsilon} outside (0, 1)"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Failure::Usage(format!("--delta {delta} outside (0, 1]")));
    }
    if !(1..=63).contains(&universe_bits) {
        return Err(Failure::Usage(format!(
            "--universe-bits {universe_bits} outside 1..=63"
        )));
    }
    let sets = records::load_datasets(input, kind, scale)?;
    let (name, items) = pick_set(sets, set)?;
    let mode = match mode_arg {
        ModeArg::Fixed => {
            let m = m.ok_or_else(|| Failure::Usage("--mode fixed needs --m".into()))?;
            if m == 0 {
                return Err(Failure::Usage("--m must be at least 1".into()));
            }
            SketchMode::fixed(m, epsilon)
        }
        ModeArg::Variable => SketchMode::variable_for(items.len(), epsilon)?,
        ModeArg::CountF2 => SketchMode::count_f2(delta, epsilon),
        ModeArg::CountStrata => SketchMode::count_strata(delta, epsilon, 1u64 << universe_bits)?,
    };
    let n = items.len();
    let mut idx = SdIndex::build(kind, items, mode, cli.seed, &name)?;
    if let Some(s) = scale {
        idx.set_coord_scale(s);
    }
    container::save_index(&idx, out)?;
    let bytes = std::fs::metadata(out)?.len();

    if cli.json {
        #[derive(Serialize)]
        struct Out<'a> {
            out: String,
            set: &'a str,
            structure: &'a str,
            mode: &'a str,
            seed: u64,
            scale: f64,
            items: usize,
            canonical_sets: usize,
            sketch_cells: u64,
            bytes: u64,
        }
        emit(&Out {
            out: out.display().to_string(),
            set: &name,
            structure: idx.kind().as_str(),
            mode: idx.mode().label(),
            seed: cli.seed,
            scale: idx.coord_scale(),
            items: n,
            canonical_sets: idx.structure().set_count(),
            sketch_cells: idx.total_sketch_cells(),
            bytes,
        })?;
    } else {
        println!(
            "built {}: set {name:?}, {}, mode {}, seed {:#x}",
            out.display(),
            idx.kind(),
            idx.mode(),
            cli.seed
        );
        println!(
            "  {} item(s), {} canonical set(s), {} sketch cell(s), {bytes} bytes",
            n,
            idx.structure().set_count(),
            idx.total_sketch_cells()
        );
    }
    Ok(0)
}

fn load_pair(index_a: &Path, index_b: &Path) -> Result<(SdIndex, SdIndex), Failure> {
    let a = container::load_index(index_a)
        .map_err(|e| Failure::Data(format!("{}: {e}", index_a.display())))?;
    let b = container::load_index(index_b)
        .map_err(|e| Failure::Data(format!("{}: {e}", index_b.display())))?;
    Ok((a, b))
}

fn cmd_diff(
    cli: &Cli,
    index_a: &Path,
    index_b: &Path,
    range_a: &str,
    range_b: Option<&str>,
) -> Result<i32, Failure> {
    let (a, b) = load_pair(index_a, index_b)?;
    let ra = ranges::parse(range_a, a.kind(), a.coord_scale())?;
    let rb = match range_b {
        Some(s) => ranges::parse(s, a.kind(), a.coord_scale())?,
        None => ra,
    };
    let t0 = Instant::now();
    let ans = query_diff(&a, &ra, &b, &rb)?;
    let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;

    let empty: &[u64] = &[];
    let (status, only_in_a, only_in_b, level_used) = match &ans {
        SdDiffAnswer::Diff {
            only_in_a,
            only_in_b,
            level_used,
        } => (
            "diff",
            only_in_a.as_slice(),
            only_in_b.as_slice(),
            *level_used,
        ),
        SdDiffAnswer::TooLarge => ("too-large", empty, empty, None),
        SdDiffAnswer::DecodeFailed => ("decode-failed", empty, empty, None),
    };

    if cli.json {
        #[derive(Serialize)]
        struct Out<'a> {
            command: &'static str,
            dataset_a: &'a str,
            dataset_b: &'a str,
            range_a: &'a str,
            range_b: &'a str,
            status: &'static str,
            only_in_a: &'a [u64],
            only_in_b: &'a [u64],
            level_used: Option<u32>,
            elapsed_ms: f64,
        }
        emit(&Out {
            command: "diff",
            dataset_a: a.dataset(),
            dataset_b: b.dataset(),
            range_a,
            range_b: range_b.unwrap_or(range_a),
            status,
            only_in_a,
            only_in_b,
            level_used,
            elapsed_ms,
        })?;
    } else {
        let lvl = level_used.map_or("-".to_string(), |j| j.to_string());
        println!(
            "status={status} onlyInA={only_in_a:?} onlyInB={only_in_b:?} levelUsed={lvl} elapsed={elapsed_ms:.3}ms"
        );
    }
    Ok(0)
}

fn cmd_count(
    cli: &Cli,
    index_a: &Path,
    index_b: &Path,
    range_a: &str,
    range_b: Option<&str>,
) -> Result<i32, Failure> {
    let (a, b) = load_pair(index_a, index_b)?;
    let ra = ranges::parse(range_a, a.kind(), a.coord_scale())?;
    let rb = match range_b {
        Some(s) => ranges::parse(s, a.kind(), a.coord_scale())?,
        None => ra,
    };
    let t0 = Instant::now();
    let ans = query_count(&a, &ra, &b, &rb)?;
    let elapsed_ms = t0.elapsed().as_secs_f64() * 1e3;

    if cli.json {
        #[derive(Serialize)]
        struct Out<'a> {
            command: &'static str,
            dataset_a: &'a str,
            dataset_b: &'a str,
            range_a: &'a str,
            range_b: &'a str,
            status: &'static str,
            estimate: f64,
            delta: f64,
            epsilon: f64,
            method: &'static str,
            elapsed_ms: f64,
        }
        emit(&Out {
            command: "count",
            dataset_a: a.dataset(),
            dataset_b: b.dataset(),
            range_a,
            range_b: range_b.unwrap_or(range_a),
            status: "estimate",
            estimate: ans.estimate,
            delta: ans.delta,
            epsilon: ans.epsilon,
            method: ans.method,
            elapsed_ms,
        })?;
    } else {
        println!(
            "estimate={:.1} (within 1±{} with prob ≥ {}, method {}) elapsed={elapsed_ms:.3}ms",
            ans.estimate,
            ans.delta,
            1.0 - ans.epsilon,
            ans.method
        );
    }
    Ok(0)
}
