use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ee_trajectory::experiment::{
    format_table, read_trajectory_csv, run_case, run_sweep, write_convergence, write_csv_rows, write_plot_data,
    write_trajectory_csv, JammerBox, LabelledRun, MetricsRow, PlotKind, StartPolicy, SweepAxis, SweepSpec,
    SOURCE_EXCLUSION_M,
};
use ee_trajectory::optimizer::read_convergence_csv;
use ee_trajectory::sca::DistanceForm;
use ee_trajectory::scenario::{
    load_document, preset_case, save_document, ScenarioDocument, SolverSettings, DEFAULT_TX_POWER,
};
use ee_trajectory::solver::write_trace_csv;
use ee_trajectory::{line_init, AlgoOptions, Mode, Vec2};

/// Horizon used for preset cases and sweeps unless `--full` is given.
const DESK_DURATION: f64 = 60.0;
const DESK_SWEEP_DURATIONS: [f64; 2] = [60.0, 100.0];
const FULL_SWEEP_DURATIONS: [f64; 5] = [100.0, 150.0, 200.0, 250.0, 300.0];
const FULL_M_SWEEP_DURATION: f64 = 200.0;

#[derive(Parser)]
#[command(name = "ee-traj", version, about = "Energy-efficient UAV trajectory planning under jamming")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise one scenario with one or more algorithms.
    RunCase(RunCaseArgs),
    /// Average over random jammer layouts while varying M or T.
    RunSweep(SweepArgs),
    /// Turn a run-case output directory into plotting data.
    PlotData(PlotArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    MaxEe,
    MaxThroughput,
    MaxEeNojam,
    All,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::MaxEe => vec![Mode::MaxEe],
            ModeArg::MaxThroughput => vec![Mode::MaxThroughput],
            ModeArg::MaxEeNojam => vec![Mode::MaxEeNoJam],
            ModeArg::All => Mode::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct ScenarioArgs {
    /// Reference case 1-4.
    #[arg(long, conflicts_with = "scenario", value_parser = clap::value_parser!(u32).range(1..=4))]
    case: Option<u32>,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Use the full reference horizon of a preset case instead of the 60 s desk horizon.
    #[arg(long)]
    full: bool,
    /// Override the flight time in seconds.
    #[arg(long)]
    duration: Option<f64>,
    /// UAV mass in kg for the kinetic-energy term.
    #[arg(long)]
    mass: Option<f64>,
    /// Linearise the horizontal distance only, without the altitude term.
    #[arg(long)]
    horizontal_distance: bool,
    /// Start the EE optimizer only from the shared initial trajectory, not
    /// also from the benchmark results.
    #[arg(long)]
    single_start: bool,
}

impl ScenarioArgs {
    fn policy(&self) -> StartPolicy {
        if self.single_start {
            StartPolicy::Shared
        } else {
            StartPolicy::RestartFromBenchmarks
        }
    }
}

#[derive(Args)]
struct RunCaseArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "all")]
    mode: ModeArg,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write the Newton trace of the last convex solve.
    #[arg(long)]
    trace: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variable {
    M,
    T,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "m")]
    variable: Variable,
    /// Comma-separated values (jammer counts or seconds).
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Random jammers per layout when sweeping T.
    #[arg(long, default_value_t = 1)]
    jammers: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "all")]
    mode: ModeArg,
    /// Jammer transmit power in watts.
    #[arg(long, default_value_t = DEFAULT_TX_POWER)]
    jammer_power: f64,
    /// Jammer region as xmin,ymin,xmax,ymax.
    #[arg(long, value_delimiter = ',', num_args = 4)]
    jammer_box: Option<Vec<f64>>,
    /// Minimum distance between a random jammer and the source, in metres.
    #[arg(long, default_value_t = SOURCE_EXCLUSION_M)]
    exclusion: f64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    /// Directory written by run-case.
    #[arg(long)]
    from: PathBuf,
    /// trajectory_xy, speed_profile, ee_bars or convergence.
    #[arg(long)]
    kind: String,
    /// Label used in the first column; defaults to the directory name.
    #[arg(long)]
    label: Option<String>,
    /// Output file; defaults to <from>/<kind>.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::RunCase(a) => cmd_run_case(a),
        Command::RunSweep(a) => cmd_run_sweep(a),
        Command::PlotData(a) => cmd_plot_data(a),
    }
}

/// Resolves the scenario flags into a document and a display label.
fn load(args: &ScenarioArgs, preset_duration: impl Fn(f64) -> f64) -> Result<(ScenarioDocument, String)> {
    let (mut doc, label) = match (&args.scenario, args.case) {
        (Some(path), _) => {
            let doc = load_document(path).with_context(|| format!("loading {}", path.display()))?;
            let label = path.file_stem().map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
            (doc, label)
        }
        (None, case) => {
            let id = case.unwrap_or(1);
            let sc = preset_case(id)?;
            let duration = preset_duration(sc.horizon.duration());
            let sc = sc.with_duration(duration)?;
            (ScenarioDocument { scenario: sc, solver: SolverSettings::default() }, format!("case{id}"))
        }
    };
    if let Some(t) = args.duration {
        doc.scenario = doc.scenario.with_duration(t)?;
    }
    if let Some(m) = args.mass {
        doc.scenario.energy.mass = m;
    }
    doc.scenario.validate()?;
    Ok((doc, label))
}

fn options(doc: &ScenarioDocument, args: &ScenarioArgs) -> AlgoOptions {
    let mut opts = AlgoOptions::from_settings(&doc.solver);
    if args.horizontal_distance {
        opts.distance_form = DistanceForm::Horizontal;
    }
    opts
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cmd_run_case(args: RunCaseArgs) -> Result<()> {
    let full = args.scenario.full;
    let (doc, label) = load(&args.scenario, |t| if full { t } else { DESK_DURATION })?;
    let mut opts = options(&doc, &args.scenario);
    opts.solver.record_trace = args.trace;
    let sc = &doc.scenario;
    fs::create_dir_all(&args.out)?;
    save_document(&doc, args.out.join("scenario.json"))?;
    write_trajectory_csv(&line_init(sc)?, sc, create(&args.out.join("initial.csv"))?)?;

    let reports = run_case(sc, &args.mode.modes(), &opts, args.scenario.policy())?;
    let mut rows = Vec::new();
    for r in &reports {
        let dir = args.out.join(r.mode.name());
        fs::create_dir_all(&dir)?;
        write_trajectory_csv(&r.trajectory, sc, create(&dir.join("trajectory.csv"))?)?;
        write_convergence(r, create(&dir.join("convergence.csv"))?)?;
        if args.trace {
            write_trace_csv(&r.last_trace, create(&dir.join("newton_trace.csv"))?)?;
        }
        rows.push(MetricsRow::new(&label, r));
    }
    write_csv_rows(&rows, create(&args.out.join("metrics.csv"))?)?;
    print!("{}", format_table(&rows));
    Ok(())
}

fn cmd_run_sweep(args: SweepArgs) -> Result<()> {
    let full = args.scenario.full;
    let m_duration = if full { FULL_M_SWEEP_DURATION } else { DESK_DURATION };
    let (doc, _) = load(&args.scenario, |_| m_duration)?;
    let opts = options(&doc, &args.scenario);
    let axis = match args.variable {
        Variable::M => {
            let counts = if args.values.is_empty() { vec![1.0, 2.0, 3.0, 4.0] } else { args.values.clone() };
            if counts.iter().any(|c| c.fract() != 0.0 || *c < 1.0) {
                bail!("jammer counts must be positive integers");
            }
            SweepAxis::Jammers(counts.iter().map(|&c| c as usize).collect())
        }
        Variable::T => {
            let seconds = if !args.values.is_empty() {
                args.values.clone()
            } else if full {
                FULL_SWEEP_DURATIONS.to_vec()
            } else {
                DESK_SWEEP_DURATIONS.to_vec()
            };
            SweepAxis::Duration { seconds, jammers: args.jammers }
        }
    };
    let region = match args.jammer_box.as_deref() {
        Some(&[x0, y0, x1, y1]) => JammerBox { min: Vec2::new(x0, y0), max: Vec2::new(x1, y1) },
        Some(_) => bail!("--jammer-box takes four numbers"),
        None => JammerBox::default(),
    };
    let spec = SweepSpec {
        base: doc.scenario.clone(),
        axis,
        trials: args.trials,
        seed: args.seed,
        modes: args.mode.modes(),
        jammer_power: args.jammer_power,
        region,
        policy: args.scenario.policy(),
        source_exclusion: args.exclusion,
    };
    let (rows, summary) = run_sweep(&spec, &opts)?;
    fs::create_dir_all(&args.out)?;
    write_csv_rows(&rows, create(&args.out.join("sweep_runs.csv"))?)?;
    write_csv_rows(&summary, create(&args.out.join("sweep_summary.csv"))?)?;
    println!("{:>8} {:<16} {:>6} {:>6} {:>10}", spec.axis.name(), "mode", "ok", "failed", "EE kbit/J");
    for s in &summary {
        println!(
            "{:>8} {:<16} {:>6} {:>6} {:>10.3}",
            s.value, s.mode, s.trials_ok, s.trials_failed, s.mean_ee_kbits_per_j
        );
    }
    let failed: usize = summary.iter().map(|s| s.trials_failed).sum();
    if failed > 0 {
        eprintln!("warning: {failed} runs failed; see sweep_runs.csv");
    }
    Ok(())
}

fn cmd_plot_data(args: PlotArgs) -> Result<()> {
    let kind: PlotKind = args.kind.parse()?;
    let doc = load_document(args.from.join("scenario.json"))
        .with_context(|| format!("{} is not a run-case output directory", args.from.display()))?;
    let label =
        args.label.unwrap_or_else(|| args.from.file_name().map_or("run".into(), |s| s.to_string_lossy().into_owned()));
    let mut loaded = Vec::new();
    for mode in Mode::ALL {
        let dir = args.from.join(mode.name());
        let traj_path = dir.join("trajectory.csv");
        if !traj_path.exists() {
            continue;
        }
        let traj =
            read_trajectory_csv(File::open(&traj_path)?).with_context(|| format!("reading {}", traj_path.display()))?;
        let conv_path = dir.join("convergence.csv");
        let records = read_convergence_csv(File::open(&conv_path)?)
            .with_context(|| format!("reading {}", conv_path.display()))?;
        loaded.push((mode, traj, records));
    }
    if loaded.is_empty() {
        bail!("no trajectories found under {}", args.from.display());
    }
    let runs: Vec<LabelledRun<'_>> = loaded
        .iter()
        .map(|(mode, traj, records)| LabelledRun {
            label: &label,
            scenario: &doc.scenario,
            mode: *mode,
            trajectory: traj,
            records,
        })
        .collect();
    let out = args.out.unwrap_or_else(|| args.from.join(format!("{}.csv", kind.name())));
    write_plot_data(kind, &runs, create(&out)?)?;
    println!("{}", out.display());
    Ok(())
}
