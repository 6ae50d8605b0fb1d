//! Case runs, random jammer sweeps and the CSV files consumed by plotting
//! scripts.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::init::line_init;
use crate::optimizer::{
    metrics, optimize_from, write_convergence_csv, AlgoOptions, IterationRecord, Metrics, Mode, RunReport, Start,
    Termination,
};
use crate::physics::{kinematic_residuals, propulsion_power, slot_rate, Residual, Trajectory};
use crate::scenario::{GroundNode, Jammer, Scenario};

/// How the EE optimizer is started when benchmarks are run alongside it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StartPolicy {
    /// Every mode starts from the shared initial trajectory.
    Shared,
    /// The EE optimizer is also restarted from each benchmark's result and
    /// the best of its runs is kept.
    #[default]
    RestartFromBenchmarks,
}

/// Runs every mode in `modes` from the same initial trajectory and returns
/// one result per requested mode, in order.
pub fn run_modes(
    sc: &Scenario,
    modes: &[Mode],
    init: &Trajectory,
    opts: &AlgoOptions,
    policy: StartPolicy,
) -> Vec<(Mode, Result<RunReport>)> {
    let wants_ee = modes.contains(&Mode::MaxEe);
    let restart = wants_ee && policy == StartPolicy::RestartFromBenchmarks;
    let benchmarks: Vec<Mode> =
        Mode::ALL.into_iter().filter(|m| *m != Mode::MaxEe && (restart || modes.contains(m))).collect();
    let mut done: Vec<(Mode, Result<RunReport>)> =
        benchmarks.par_iter().map(|&m| (m, optimize_from(sc, m, init.clone(), opts))).collect();

    if wants_ee {
        let mut starts = vec![(Start::Initial, init.clone())];
        if restart {
            starts.extend(
                done.iter().filter_map(|(m, r)| r.as_ref().ok().map(|r| (Start::From(*m), r.trajectory.clone()))),
            );
        }
        let runs: Vec<Result<RunReport>> = starts
            .into_par_iter()
            .map(|(start, t)| {
                optimize_from(sc, Mode::MaxEe, t, opts).map(|mut r| {
                    r.start = start;
                    r.initial = init.clone();
                    r
                })
            })
            .collect();
        done.push((Mode::MaxEe, best_run(runs)));
    }
    modes
        .iter()
        .map(|m| {
            let k = done.iter().position(|(d, _)| d == m).expect("every requested mode was run");
            done.swap_remove(k)
        })
        .collect()
}

/// The run with the highest EE; the first error if every run failed.
fn best_run(runs: Vec<Result<RunReport>>) -> Result<RunReport> {
    let mut best: Option<RunReport> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.metrics.ee_kbits_per_j > b.metrics.ee_kbits_per_j) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one run"))
}

/// Runs every mode in `modes` for one scenario; fails if any mode fails.
pub fn run_case(sc: &Scenario, modes: &[Mode], opts: &AlgoOptions, policy: StartPolicy) -> Result<Vec<RunReport>> {
    sc.validate()?;
    let init = line_init(sc)?;
    run_modes(sc, modes, &init, opts, policy).into_iter().map(|(_, r)| r).collect()
}

/// Quantity varied by a sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    /// Number of randomly placed jammers.
    Jammers(Vec<usize>),
    /// Flight time in seconds, with a fixed number of random jammers.
    Duration { seconds: Vec<f64>, jammers: usize },
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Jammers(_) => "M",
            SweepAxis::Duration { .. } => "T",
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            SweepAxis::Jammers(v) => v.iter().map(|&m| m as f64).collect(),
            SweepAxis::Duration { seconds, .. } => seconds.clone(),
        }
    }
}

/// Axis-aligned region jammers are drawn from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JammerBox {
    pub min: Vec2,
    pub max: Vec2,
}

impl Default for JammerBox {
    fn default() -> Self {
        Self { min: Vec2::new(-500.0, 0.0), max: Vec2::new(500.0, 1000.0) }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: SweepAxis,
    pub trials: usize,
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub jammer_power: f64,
    pub region: JammerBox,
    pub policy: StartPolicy,
    /// Samples closer than this to the source are redrawn.
    pub source_exclusion: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(format!("sweep: {msg}")));
        let values = self.axis.values();
        if values.is_empty() {
            return bad("no values");
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("values must be positive");
        }
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.modes.is_empty() {
            return bad("no modes");
        }
        if !(self.jammer_power > 0.0 && self.jammer_power.is_finite()) {
            return bad("jammer power must be positive");
        }
        let (lo, hi) = (self.region.min, self.region.max);
        if !(lo.is_finite() && hi.is_finite() && lo.x < hi.x && lo.y < hi.y) {
            return bad("jammer box corners must satisfy min < max");
        }
        let far = [lo, hi, Vec2::new(lo.x, hi.y), Vec2::new(hi.x, lo.y)]
            .iter()
            .map(|c| (*c - self.base.source.xy()).norm())
            .fold(0.0, f64::max);
        if !(self.source_exclusion >= 0.0) || self.source_exclusion >= far {
            return bad("source exclusion radius covers the whole box");
        }
        self.base.validate()
    }
}

pub const SOURCE_EXCLUSION_M: f64 = 50.0;

/// Random jammer layout for one `(count, trial)` pair; identical for every
/// mode and horizon, and independent of thread scheduling.
pub fn sweep_layout(spec: &SweepSpec, count: usize, trial: usize) -> Vec<Jammer> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(((count as u64) << 32) | trial as u64);
    let src = spec.base.source.xy();
    let (lo, hi) = (spec.region.min, spec.region.max);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let p = Vec2::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
        if (p - src).norm() >= spec.source_exclusion {
            out.push(Jammer { node: GroundNode::new(p.x, p.y), power: spec.jammer_power });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: String,
    pub value: f64,
    pub trial: usize,
    pub mode: String,
    pub ok: bool,
    pub avg_speed_mps: f64,
    pub sum_throughput_kbits: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
    #[serde(rename = "ee_kbits_per_J")]
    pub ee_kbits_per_j: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub variable: String,
    pub value: f64,
    pub mode: String,
    pub trials_ok: usize,
    pub trials_failed: usize,
    pub mean_avg_speed_mps: f64,
    pub mean_sum_throughput_kbits: f64,
    #[serde(rename = "mean_energy_J")]
    pub mean_energy_j: f64,
    #[serde(rename = "mean_ee_kbits_per_J")]
    pub mean_ee_kbits_per_j: f64,
}

/// Runs the sweep. Failed runs are reported as rows with `ok = false`.
pub fn run_sweep(spec: &SweepSpec, opts: &AlgoOptions) -> Result<(Vec<SweepRow>, Vec<SweepSummary>)> {
    spec.validate()?;
    let values = spec.axis.values();
    let cells: Vec<(f64, usize)> = values.iter().flat_map(|&v| (0..spec.trials).map(move |t| (v, t))).collect();
    let rows: Vec<SweepRow> = cells
        .par_iter()
        .flat_map_iter(|&(value, trial)| {
            let scenario = match &spec.axis {
                SweepAxis::Jammers(_) => Ok((spec.base.clone(), value as usize)),
                SweepAxis::Duration { jammers, .. } => spec.base.clone().with_duration(value).map(|s| (s, *jammers)),
            }
            .map(|(mut sc, count)| {
                sc.jammers = sweep_layout(spec, count, trial);
                sc
            });
            let results = match scenario.and_then(|sc| line_init(&sc).map(|t| (sc, t))) {
                Ok((sc, init)) => run_modes(&sc, &spec.modes, &init, opts, spec.policy),
                Err(e) => {
                    let msg = e.to_string();
                    spec.modes.iter().map(|&m| (m, Err(Error::InfeasibleInit(msg.clone())))).collect()
                }
            };
            results
                .into_iter()
                .map(|(mode, res)| sweep_row(spec.axis.name(), value, trial, mode, res.map(|r| r.metrics)))
                .collect::<Vec<_>>()
        })
        .collect();
    let summary = summarize(spec, &values, &rows);
    Ok((rows, summary))
}

fn sweep_row(variable: &str, value: f64, trial: usize, mode: Mode, res: Result<Metrics>) -> SweepRow {
    let (ok, m, error) = match res {
        Ok(m) => (true, m, String::new()),
        Err(e) => {
            let nan = Metrics {
                avg_speed_mps: f64::NAN,
                sum_throughput_kbits: f64::NAN,
                delivered_kbits: f64::NAN,
                energy_j: f64::NAN,
                ee_kbits_per_j: f64::NAN,
            };
            (false, nan, e.to_string())
        }
    };
    SweepRow {
        variable: variable.into(),
        value,
        trial,
        mode: mode.name().into(),
        ok,
        avg_speed_mps: m.avg_speed_mps,
        sum_throughput_kbits: m.sum_throughput_kbits,
        energy_j: m.energy_j,
        ee_kbits_per_j: m.ee_kbits_per_j,
        error,
    }
}

fn summarize(spec: &SweepSpec, values: &[f64], rows: &[SweepRow]) -> Vec<SweepSummary> {
    let mut out = Vec::new();
    for &value in values {
        for mode in &spec.modes {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.value == value && r.mode == mode.name()).collect();
            let ok: Vec<&&SweepRow> = sel.iter().filter(|r| r.ok).collect();
            let mean = |f: fn(&SweepRow) -> f64| {
                if ok.is_empty() {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64
                }
            };
            out.push(SweepSummary {
                variable: spec.axis.name().into(),
                value,
                mode: mode.name().into(),
                trials_ok: ok.len(),
                trials_failed: sel.len() - ok.len(),
                mean_avg_speed_mps: mean(|r| r.avg_speed_mps),
                mean_sum_throughput_kbits: mean(|r| r.sum_throughput_kbits),
                mean_energy_j: mean(|r| r.energy_j),
                mean_ee_kbits_per_j: mean(|r| r.ee_kbits_per_j),
            });
        }
    }
    out
}

/// One row of the per-case metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub case: String,
    pub mode: String,
    pub avg_speed_mps: f64,
    pub sum_throughput_kbits: f64,
    pub delivered_kbits: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
    #[serde(rename = "ee_kbits_per_J")]
    pub ee_kbits_per_j: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub start: String,
}

impl MetricsRow {
    pub fn new(case: &str, report: &RunReport) -> Self {
        let m = &report.metrics;
        Self {
            case: case.into(),
            mode: report.mode.name().into(),
            avg_speed_mps: m.avg_speed_mps,
            sum_throughput_kbits: m.sum_throughput_kbits,
            delivered_kbits: m.delivered_kbits,
            energy_j: m.energy_j,
            ee_kbits_per_j: m.ee_kbits_per_j,
            outer_iterations: report.outer_iterations,
            converged: report.termination == Termination::Converged,
            start: report.start.to_string(),
        }
    }
}

/// Fixed-width table with the same columns as [`MetricsRow`].
pub fn format_table(rows: &[MetricsRow]) -> String {
    let mut s = format!(
        "{:<8} {:<16} {:>10} {:>16} {:>12} {:>10}  {}\n",
        "case", "mode", "speed m/s", "throughput kbit", "energy J", "EE kbit/J", "start"
    );
    for r in rows {
        s += &format!(
            "{:<8} {:<16} {:>10.2} {:>16.0} {:>12.0} {:>10.3}  {}\n",
            r.case, r.mode, r.avg_speed_mps, r.sum_throughput_kbits, r.energy_j, r.ee_kbits_per_j, r.start
        );
    }
    s
}

pub fn write_csv_rows<T: Serialize>(rows: &[T], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct TrajectoryRow {
    n: usize,
    t_s: f64,
    x_m: f64,
    y_m: f64,
    vx: f64,
    vy: f64,
    ax: f64,
    ay: f64,
    speed_mps: f64,
    rate_bps: f64,
    #[serde(rename = "power_W")]
    power_w: f64,
}

/// Largest kinematic residual a trajectory may have to be written out.
pub const WRITE_RESIDUAL_LIMIT: f64 = 1e-6;

/// One row per slot; `t_s` is the end time of the slot. Trajectories that
/// violate the motion constraints by more than [`WRITE_RESIDUAL_LIMIT`] are
/// rejected.
pub fn write_trajectory_csv(traj: &Trajectory, sc: &Scenario, w: impl Write) -> Result<()> {
    let dt = sc.horizon.dt();
    if traj.len() != sc.horizon.slots() {
        return Err(Error::Malformed {
            what: "trajectory",
            reason: format!("{} slots for a {}-slot horizon", traj.len(), sc.horizon.slots()),
        });
    }
    let rep = kinematic_residuals(traj, &sc.uav, &sc.horizon);
    if !(rep.max() <= WRITE_RESIDUAL_LIMIT) {
        let (family, r) =
            rep.families()
                .into_iter()
                .fold(("", Residual::default()), |acc, f| if f.1.max > acc.1.max { f } else { acc });
        return Err(Error::Malformed {
            what: "trajectory",
            reason: format!("{family} residual {:.3e} at slot {}", r.max, r.slot),
        });
    }
    let mut wtr = csv::Writer::from_writer(w);
    for k in 0..traj.len() {
        let (q, v, a) = (traj.q[k], traj.v[k], traj.a[k]);
        wtr.serialize(TrajectoryRow {
            n: k,
            t_s: (k + 1) as f64 * dt,
            x_m: q.x,
            y_m: q.y,
            vx: v.x,
            vy: v.y,
            ax: a.x,
            ay: a.y,
            speed_mps: v.norm(),
            rate_bps: slot_rate(q, sc),
            power_w: propulsion_power(v, a, &sc.energy).map_err(|_| Error::ZeroSpeed { slot: k })?,
        })?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads the position, velocity and acceleration columns back. Derived
/// columns are ignored; rows must be numbered 0, 1, 2, …
pub fn read_trajectory_csv(r: impl Read) -> Result<Trajectory> {
    let mut rdr = csv::Reader::from_reader(r);
    let (mut q, mut v, mut a) = (Vec::new(), Vec::new(), Vec::new());
    for (i, row) in rdr.deserialize::<TrajectoryRow>().enumerate() {
        let row = row?;
        if row.n != i {
            return Err(Error::Malformed { what: "trajectory csv", reason: format!("row {i} is numbered {}", row.n) });
        }
        q.push(Vec2::new(row.x_m, row.y_m));
        v.push(Vec2::new(row.vx, row.vy));
        a.push(Vec2::new(row.ax, row.ay));
    }
    if q.is_empty() {
        return Err(Error::Malformed { what: "trajectory csv", reason: "no rows".into() });
    }
    Trajectory::new(q, v, a)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    TrajectoryXy,
    SpeedProfile,
    EeBars,
    Convergence,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] =
        [PlotKind::TrajectoryXy, PlotKind::SpeedProfile, PlotKind::EeBars, PlotKind::Convergence];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::TrajectoryXy => "trajectory_xy",
            PlotKind::SpeedProfile => "speed_profile",
            PlotKind::EeBars => "ee_bars",
            PlotKind::Convergence => "convergence",
        }
    }
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::Unknown { what: "plot kind", value: s.to_string() })
    }
}

/// A finished run labelled for plotting.
pub struct LabelledRun<'a> {
    pub label: &'a str,
    pub scenario: &'a Scenario,
    pub mode: Mode,
    pub trajectory: &'a Trajectory,
    pub records: &'a [IterationRecord],
}

impl<'a> LabelledRun<'a> {
    pub fn new(label: &'a str, scenario: &'a Scenario, report: &'a RunReport) -> Self {
        Self { label, scenario, mode: report.mode, trajectory: &report.trajectory, records: &report.records }
    }
}

/// Long-format CSV for one kind of figure.
pub fn write_plot_data(kind: PlotKind, runs: &[LabelledRun<'_>], w: impl Write) -> Result<()> {
    if kind == PlotKind::Convergence {
        return write_convergence_plot(runs, w);
    }
    let mut wtr = csv::Writer::from_writer(w);
    match kind {
        PlotKind::TrajectoryXy => {
            wtr.write_record(["label", "kind", "n", "x_m", "y_m"])?;
            for r in runs {
                let sc = r.scenario;
                let markers = std::iter::once(("source", sc.source.xy()))
                    .chain(sc.jammers.iter().map(|j| ("jammer", j.node.xy())))
                    .chain([("start", sc.uav.start), ("end", sc.uav.end)]);
                for (k, (kind, p)) in markers.enumerate() {
                    wtr.write_record([r.label, kind, &k.to_string(), &p.x.to_string(), &p.y.to_string()])?;
                }
                for (k, q) in r.trajectory.q.iter().enumerate() {
                    wtr.write_record([r.label, r.mode.name(), &k.to_string(), &q.x.to_string(), &q.y.to_string()])?;
                }
            }
        }
        PlotKind::SpeedProfile => {
            wtr.write_record(["label", "mode", "t_s", "speed_mps"])?;
            for r in runs {
                let dt = r.scenario.horizon.dt();
                for (k, s) in r.trajectory.speeds().enumerate() {
                    wtr.write_record([r.label, r.mode.name(), &((k + 1) as f64 * dt).to_string(), &s.to_string()])?;
                }
            }
        }
        PlotKind::EeBars => {
            wtr.write_record(["label", "mode", "ee_kbits_per_J", "sum_throughput_kbits", "energy_J", "avg_speed_mps"])?;
            for r in runs {
                let m = metrics(r.trajectory, r.scenario)?;
                wtr.write_record([
                    r.label,
                    r.mode.name(),
                    &m.ee_kbits_per_j.to_string(),
                    &m.sum_throughput_kbits.to_string(),
                    &m.energy_j.to_string(),
                    &m.avg_speed_mps.to_string(),
                ])?;
            }
        }
        PlotKind::Convergence => unreachable!(),
    }
    wtr.flush()?;
    Ok(())
}

fn write_convergence_plot(runs: &[LabelledRun<'_>], mut w: impl Write) -> Result<()> {
    writeln!(w, "label,mode,outer_iter,inner_iter,exact_EE,lambda")?;
    for r in runs {
        for rec in r.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.label,
                r.mode.name(),
                rec.outer_iter,
                rec.inner_iter,
                rec.exact_ee,
                rec.lambda
            )?;
        }
    }
    Ok(())
}

/// Writes the per-iteration log of one run.
pub fn write_convergence(report: &RunReport, w: impl Write) -> Result<()> {
    write_convergence_csv(&report.records, w)
}
