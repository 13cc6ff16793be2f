//! `spinlattice`: runs one experiment per config file and writes one
//! artifact plus `manifest.json`.
//!
//! Exit status: 0 success, 1 i/o failure, 2 config or input error, 3 numeric
//! guard, 4 invariant failure or failed check.

mod config;
mod experiments;
mod failure;
mod output;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig, StateSpec};
use crate::failure::Failure;
use crate::output::{manifest_path, sha256_hex, to_json, write_atomic, Manifest, Num};

#[derive(Parser)]
#[command(name = "spinlattice", version, about = "Finite-volume quantum spin system experiments")]
struct Cli {
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true, env = "SPINLATTICE_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Directory that relative output paths resolve against.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run any experiment config.
    Run(RunArgs),
    /// KMS residuals of Gibbs states.
    KmsCheck(RunArgs),
    /// Commutator norms against the Lieb-Robinson bounds (CSV or JSON).
    LrSweep(RunArgs),
    /// Empirical front velocity against the bound velocity.
    Velocity(RunArgs),
    /// Ground-state correlation decay.
    Clustering(RunArgs),
    /// Free-energy identity on random states.
    FreeEnergy(RunArgs),
    /// Ground-state criterion on random local operators.
    GroundCheck(RunArgs),
    /// Passivity of Gibbs states under local unitaries.
    Passivity(RunArgs),
    /// Finite-volume convergence of the dynamics.
    Convergence(RunArgs),
    /// GNS representation of a single-matrix-algebra state.
    Gns(GnsArgs),
    /// Toric code degeneracy and ground-state expectations.
    Toric(ToricArgs),
}

#[derive(Args)]
struct GnsArgs {
    /// Experiment config; without it the result is printed to stdout.
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Diagonal state weights, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["config", "random_dim"])]
    weights: Option<Vec<f64>>,
    /// Dimension of a seeded random state.
    #[arg(long, conflicts_with = "config")]
    random_dim: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ToricArgs {
    /// Experiment config; without it the result is printed to stdout.
    #[arg(conflicts_with_all = ["l", "query", "degeneracy"])]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Torus side length.
    #[arg(long = "L", id = "l")]
    l: Option<usize>,
    /// Pauli string such as `X@(h,0,1)*Z@(v,1,1)`; repeatable.
    #[arg(long)]
    query: Vec<String>,
    /// Print the ground-space degeneracy.
    #[arg(long)]
    degeneracy: bool,
}

/// Single-line JSON with a space after every `:` and `,`.
struct Spaced;

impl serde_json::ser::Formatter for Spaced {
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        w.write_all(b": ")
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        if first {
            Ok(())
        } else {
            w.write_all(b", ")
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Failure> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Spaced);
    value.serialize(&mut ser).map_err(|e| Failure::Io(e.to_string()))?;
    println!("{}", String::from_utf8_lossy(&buf));
    Ok(())
}

fn run_config(path: &Path, out_dir: Option<&Path>, expected: Option<Experiment>, jobs: usize) -> Result<(), Failure> {
    let start = Instant::now();
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| Failure::Schema("config is not UTF-8".into()))?;
    let config = ExperimentConfig::parse(&text)?;
    if let Some(e) = expected.filter(|e| *e != config.experiment) {
        return Err(Failure::Schema(format!("subcommand {} given a {} config", e.name(), config.experiment.name())));
    }
    let artifact_path = match out_dir {
        Some(dir) => dir.join(&config.output.path),
        None => config.output.path.clone(),
    };
    let artifact = experiments::run(&config)?;
    write_atomic(&artifact_path, artifact.contents.as_bytes())?;
    let manifest = Manifest {
        experiment: config.experiment.name(),
        artifact: artifact_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        config_sha256: sha256_hex(&bytes),
        library_version: spinlattice::VERSION,
        seed: config.seed,
        jobs,
        wall_time_seconds: Num(start.elapsed().as_secs_f64()),
    };
    write_atomic(&manifest_path(&artifact_path), to_json(&manifest)?.as_bytes())?;
    eprintln!("wrote {}", artifact_path.display());
    match artifact.violation {
        Some(why) => Err(Failure::Invariant(why)),
        None => Ok(()),
    }
}

fn gns_stdout(args: &GnsArgs) -> Result<(), Failure> {
    let state = match (&args.weights, args.random_dim) {
        (Some(w), None) => StateSpec::Diag(w.clone()),
        (None, Some(dim)) => StateSpec::Random { dim },
        _ => return Err(Failure::Schema("gns needs a config, --weights or --random-dim".into())),
    };
    print_json(&experiments::gns_report(&state, args.seed)?)
}

fn toric_stdout(args: &ToricArgs) -> Result<(), Failure> {
    let l = args.l.ok_or_else(|| Failure::Schema("toric needs a config or --L".into()))?;
    let everything = !args.degeneracy && args.query.is_empty();
    let report = experiments::ToricReport {
        l: None,
        degeneracy: if args.degeneracy || everything { Some(experiments::toric_degeneracy(l)?) } else { None },
        queries: if args.query.is_empty() { None } else { Some(experiments::toric_queries(l, &args.query)?) },
    };
    print_json(&report)
}

fn dispatch(cli: Cli, jobs: usize) -> Result<(), Failure> {
    let (args, expected) = match cli.command {
        Command::Run(a) => (a, None),
        Command::KmsCheck(a) => (a, Some(Experiment::KmsCheck)),
        Command::LrSweep(a) => (a, Some(Experiment::LrSweep)),
        Command::Velocity(a) => (a, Some(Experiment::Velocity)),
        Command::Clustering(a) => (a, Some(Experiment::Clustering)),
        Command::FreeEnergy(a) => (a, Some(Experiment::FreeEnergy)),
        Command::GroundCheck(a) => (a, Some(Experiment::GroundCheck)),
        Command::Passivity(a) => (a, Some(Experiment::Passivity)),
        Command::Convergence(a) => (a, Some(Experiment::Convergence)),
        Command::Gns(a) => match a.config {
            Some(config) => (RunArgs { config, out_dir: a.out_dir }, Some(Experiment::Gns)),
            None => return gns_stdout(&a),
        },
        Command::Toric(a) => match a.config {
            Some(config) => (RunArgs { config, out_dir: a.out_dir }, Some(Experiment::Toric)),
            None => return toric_stdout(&a),
        },
    };
    run_config(&args.config, args.out_dir.as_deref(), expected, jobs)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let jobs = cli.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        eprintln!("error: --jobs must be positive");
        return ExitCode::from(2);
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    spinlattice::use_sequential_kernels();
    match dispatch(cli, jobs) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
