use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ris_codesign::codesign::CodesignConfig;
use ris_codesign::harness::{
    default_grid, emit_beampattern, first_subproblem, run_convergence_comparison, run_experiment, run_oracle, run_trial,
    write_comparison_csv, write_file, ExperimentSpec, Mode, SceneConfig,
};
use ris_codesign::scene::{ArrayGeometry, ChannelMatrix, Scene};
use ris_codesign::uqp::SolverKind;
use ris_codesign::{Error, Result};

#[derive(Parser)]
#[command(name = "ris-codesign", version, about = "Joint transmit/receive/RIS beamformer design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one codesign and write its trace, summary and beampattern.
    Codesign(RunArgs),
    /// Monte Carlo sweep described by an experiment file.
    Sweep(SweepArgs),
    /// Run the codesign loop with every inner solver and compare iteration counts.
    CompareSolvers(RunArgs),
    /// Exhaustive phase-grid minimum of the first RIS subproblem vs. the Newton solver.
    Oracle(OracleArgs),
    /// Beampattern of the codesigned beamformers.
    Beampattern(RunArgs),
}

#[derive(Args)]
struct Common {
    /// Scene (or experiment) JSON file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = CliSolver::Rnm)]
    solver: CliSolver,
    #[arg(long, value_enum, default_value_t = CliMode::Ris)]
    mode: CliMode,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the experiment's base seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the experiment's solver.
    #[arg(long, value_enum)]
    solver: Option<CliSolver>,
    /// Restricts the sweep to one mode.
    #[arg(long, value_enum)]
    mode: Option<CliMode>,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 16)]
    phases: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CliSolver {
    Rnm,
    Rcg,
    Rgd,
}

impl From<CliSolver> for SolverKind {
    fn from(s: CliSolver) -> Self {
        match s {
            CliSolver::Rnm => SolverKind::Rnm,
            CliSolver::Rcg => SolverKind::Rcg,
            CliSolver::Rgd => SolverKind::Rgd,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CliMode {
    Ris,
    Rris,
    Free,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Ris => Mode::Ris,
            CliMode::Rris => Mode::Rris,
            CliMode::Free => Mode::Free,
        }
    }
}

enum Failure {
    Config(Error),
    Runtime(Error),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Json(_) | Error::InvalidGeometry(_) | Error::InvalidScene(_) => Failure::Config(e),
            other => Failure::Runtime(other),
        }
    }
}

fn load_scene(path: Option<&Path>) -> Result<Scene> {
    match path {
        Some(p) => SceneConfig::load(p)?.build(),
        None => SceneConfig::default().build(),
    }
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |w| Ok(serde_json::to_writer_pretty(w, value)?))
}

fn channel_for(scene: &Scene, mode: Mode, seed: u64) -> Result<(Scene, ChannelMatrix)> {
    if mode == Mode::Free {
        let mut free = scene.clone();
        let geo = &scene.geometry;
        free.geometry = ArrayGeometry::new(geo.n_radar, 0, geo.spacing_radar, geo.spacing_ris)?;
        let g = ChannelMatrix::empty(geo.n_radar);
        Ok((free, g))
    } else {
        Ok((scene.clone(), scene.draw_channel(seed)?))
    }
}

fn cmd_codesign(args: &RunArgs, with_trace: bool) -> std::result::Result<(), Failure> {
    let c = &args.common;
    let scene = load_scene(c.config.as_deref())?;
    prepare_out(&c.out)?;
    let mode = Mode::from(args.mode);
    let cfg = CodesignConfig {
        solver: args.solver.into(),
        ..CodesignConfig::default()
    };
    let trial = run_trial(&scene, mode, c.seed, &cfg)?;
    let stem = format!("{}_{}_seed{}", mode.name(), args.solver_name(), c.seed);
    if with_trace {
        write_file(&c.out.join(format!("codesign_{stem}.csv")), |w| trial.report.write_csv(w))?;
        write_file(&c.out.join(format!("codesign_{stem}_timing.csv")), |w| trial.report.write_timing_csv(w))?;
        write_json(&c.out.join(format!("codesign_{stem}.json")), &trial.report.summary())?;
    }
    let (s, g) = channel_for(&scene, mode, c.seed)?;
    emit_beampattern(&s, &g, &trial.report.final_state, &default_grid(), &c.out.join(format!("beampattern_{stem}.csv")))?;
    println!("final SINR {:.4} dB after {} outer iterations", trial.report.final_sinr_db(), trial.report.outer_iterations());
    Ok(())
}

impl RunArgs {
    fn solver_name(&self) -> &'static str {
        SolverKind::from(self.solver).name()
    }
}

fn cmd_sweep(args: &SweepArgs) -> std::result::Result<(), Failure> {
    let mut spec = ExperimentSpec::load(&args.config)?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(s) = args.solver {
        spec.solver = s.into();
    }
    if let Some(m) = args.mode {
        spec.modes = vec![m.into()];
    }
    spec.validate()?;
    prepare_out(&args.out)?;
    let table = run_experiment(&spec)?;
    let stem = format!("sweep_{}_seed{}", spec.sweep.name(), spec.seed);
    write_file(&args.out.join(format!("{stem}.csv")), |w| table.write_csv(w))?;
    write_file(&args.out.join(format!("{stem}_timing.csv")), |w| table.write_timing_csv(w))?;
    for row in &table.rows {
        let name = format!("sweep_{}_{}_{}_seed{}.json", spec.sweep.name(), row.value, row.mode.name(), spec.seed);
        write_json(&args.out.join(name), row)?;
    }
    for row in &table.rows {
        for (trial, message) in &row.errors {
            eprintln!("{}={} {} trial {trial}: {message}", spec.sweep.name(), row.value, row.mode.name());
        }
        println!(
            "{}={} {}: {:.3} dB ({} failures)",
            spec.sweep.name(),
            row.value,
            row.mode.name(),
            row.mean_sinr_db,
            row.failures
        );
    }
    match table.total_failures() {
        0 => Ok(()),
        n => Err(Failure::Partial(n)),
    }
}

fn cmd_compare(args: &RunArgs) -> std::result::Result<(), Failure> {
    let c = &args.common;
    let scene = load_scene(c.config.as_deref())?;
    prepare_out(&c.out)?;
    let g = scene.draw_channel(c.seed)?;
    let results = run_convergence_comparison(&scene, &g, &SolverKind::ALL, &CodesignConfig::default())?;
    let path = c.out.join(format!("compare_seed{}.csv", c.seed));
    let timing = c.out.join(format!("compare_seed{}_timing.csv", c.seed));
    let timing_file = std::fs::File::create(&timing).map_err(|e| Error::io(&timing, e))?;
    write_file(&path, |w| write_comparison_csv(&results, w, std::io::BufWriter::new(timing_file)))?;
    for r in &results {
        println!(
            "{}: first update {} iterations, first subproblem {}, final SINR {:.4} dB",
            r.solver.name(),
            r.first_update_iterations(),
            r.first_subproblem_iterations,
            r.final_sinr_db()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    phases: usize,
    oracle_f: f64,
    neighbor_gap: f64,
    rnm_f: f64,
    slack: f64,
    within_slack: bool,
}

fn cmd_oracle(args: &OracleArgs) -> std::result::Result<(), Failure> {
    let c = &args.common;
    let scene = load_scene(c.config.as_deref())?;
    prepare_out(&c.out)?;
    let g = scene.draw_channel(c.seed)?;
    let (p, v0) = first_subproblem(&scene, &g)?;
    let oracle = run_oracle(&p, args.phases)?;
    let (v, _) = SolverKind::Rnm.solve(&p, &v0, &CodesignConfig::default().rnm)?;
    let rnm_f = p.reduced_objective(v.as_vector());
    let slack = oracle.neighbor_gap.max(1e-9 * (1.0 + oracle.best_f.abs()));
    let report = OracleReport {
        phases: args.phases,
        oracle_f: oracle.best_f,
        neighbor_gap: oracle.neighbor_gap,
        rnm_f,
        slack,
        within_slack: rnm_f <= oracle.best_f + slack,
    };
    write_json(&c.out.join(format!("oracle_m{}_seed{}.json", p.dim(), c.seed)), &report)?;
    println!(
        "oracle {:.9} (gap {:.3e}), newton {:.9}, within slack: {}",
        report.oracle_f, report.neighbor_gap, report.rnm_f, report.within_slack
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Codesign(a) => cmd_codesign(a, true),
        Command::Beampattern(a) => cmd_codesign(a, false),
        Command::Sweep(a) => cmd_sweep(a),
        Command::CompareSolvers(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Partial(n)) => {
            eprintln!("{n} trial(s) failed");
            ExitCode::from(2)
        }
        Err(Failure::Config(e)) | Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
