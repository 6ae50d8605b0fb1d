//! Successive convex approximation with an inner Dinkelbach loop, plus the
//! throughput-maximising and jamming-unaware benchmarks.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::line_init;
use crate::physics::{rate_sum, throughput_bits, trajectory_energy, Trajectory};
use crate::sca::{build_subproblem, model_rate_sum, DistanceForm, Subproblem, SurrogateOptions};
use crate::scenario::{Scenario, SolverSettings};
use crate::solver::{solve, KktResiduals, SolverOptions, Status, TraceRow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Maximise Σ R / E against the actual jammers.
    MaxEe,
    /// Maximise Σ R, ignoring energy.
    MaxThroughput,
    /// Maximise Σ R / E as if there were no jammers; scored against the actual ones.
    MaxEeNoJam,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::MaxEe, Mode::MaxThroughput, Mode::MaxEeNoJam];

    pub fn name(self) -> &'static str {
        match self {
            Mode::MaxEe => "max_ee",
            Mode::MaxThroughput => "max_throughput",
            Mode::MaxEeNoJam => "max_ee_nojam",
        }
    }

    fn with_energy(self) -> bool {
        self != Mode::MaxThroughput
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "max_ee" => Ok(Mode::MaxEe),
            "max_throughput" => Ok(Mode::MaxThroughput),
            "max_ee_nojam" => Ok(Mode::MaxEeNoJam),
            _ => Err(Error::Unknown { what: "mode", value: s.to_string() }),
        }
    }
}

/// When the inner loop accepts the current λ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InnerStop {
    /// |F(λ)| ≤ value, in rate-sum units (bits/s summed over slots).
    Absolute(f64),
    /// |F(λ)| ≤ value · Σ R̃.
    Relative(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgoOptions {
    pub outer_tolerance: f64,
    pub inner_stop: InnerStop,
    pub max_outer: usize,
    pub max_inner: usize,
    pub distance_form: DistanceForm,
    pub solver: SolverOptions,
    /// Relative drop of the outer objective tolerated before failing.
    pub monotone_tolerance: f64,
}

impl Default for AlgoOptions {
    fn default() -> Self {
        Self::from_settings(&SolverSettings::default())
    }
}

impl AlgoOptions {
    pub fn from_settings(s: &SolverSettings) -> Self {
        Self {
            outer_tolerance: s.outer_tolerance,
            inner_stop: match s.inner_relative_tolerance {
                Some(r) => InnerStop::Relative(r),
                None => InnerStop::Absolute(s.inner_tolerance),
            },
            max_outer: s.max_outer_iterations,
            max_inner: s.max_inner_iterations,
            distance_form: DistanceForm::Slant,
            solver: SolverOptions {
                tolerance: s.kkt_tolerance,
                max_iterations: s.max_newton_iterations,
                ..SolverOptions::default()
            },
            monotone_tolerance: 1e-6,
        }
    }
}

/// One row of the convergence log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub outer_iter: usize,
    pub inner_iter: usize,
    pub lambda: f64,
    #[serde(rename = "F_lambda")]
    pub f_lambda: f64,
    /// Surrogate ratio (or surrogate rate sum for throughput maximisation).
    pub surrogate_obj: f64,
    pub exact_throughput_bits: f64,
    #[serde(rename = "exact_energy_J")]
    pub exact_energy_j: f64,
    #[serde(rename = "exact_EE")]
    pub exact_ee: f64,
    pub solver_iters: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxOuterIterations,
}

/// Headline numbers for a trajectory, in reporting units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub avg_speed_mps: f64,
    /// Σ R / 1000.
    pub sum_throughput_kbits: f64,
    /// dt · Σ R / 1000.
    pub delivered_kbits: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
    /// Σ R / E / 1000.
    #[serde(rename = "ee_kbits_per_J")]
    pub ee_kbits_per_j: f64,
}

pub fn metrics(traj: &Trajectory, sc: &Scenario) -> Result<Metrics> {
    let sum = rate_sum(traj, sc);
    let energy = trajectory_energy(traj, &sc.energy, sc.horizon.dt())?;
    Ok(Metrics {
        avg_speed_mps: traj.average_speed(),
        sum_throughput_kbits: sum / 1e3,
        delivered_kbits: throughput_bits(traj, sc) / 1e3,
        energy_j: energy,
        ee_kbits_per_j: sum / energy / 1e3,
    })
}

/// Where a run's starting trajectory came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Start {
    /// The shared initial trajectory of the scenario.
    Initial,
    /// The final trajectory of another run.
    From(Mode),
}

impl fmt::Display for Start {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Start::Initial => f.write_str("initial"),
            Start::From(m) => write!(f, "from_{m}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub mode: Mode,
    pub trajectory: Trajectory,
    pub initial: Trajectory,
    pub start: Start,
    pub records: Vec<IterationRecord>,
    pub termination: Termination,
    pub outer_iterations: usize,
    /// KKT residuals of the last convex solve.
    pub last_residuals: KktResiduals,
    /// Newton trace of the last convex solve, if requested.
    pub last_trace: Vec<TraceRow>,
    /// Metrics under the actual jammers.
    pub metrics: Metrics,
}

/// Runs `mode` from the default initial trajectory.
pub fn optimize(sc: &Scenario, mode: Mode, opts: &AlgoOptions) -> Result<RunReport> {
    sc.validate()?;
    let init = line_init(sc)?;
    optimize_from(sc, mode, init, opts)
}

/// Runs `mode` from a given feasible trajectory.
pub fn optimize_from(sc: &Scenario, mode: Mode, init: Trajectory, opts: &AlgoOptions) -> Result<RunReport> {
    let design = match mode {
        Mode::MaxEeNoJam => sc.without_jammers(),
        _ => sc.clone(),
    };
    let sopts = SurrogateOptions { distance_form: opts.distance_form, with_energy: mode.with_energy() };
    let objective = |t: &Trajectory| -> Result<f64> {
        let r = model_rate_sum(t, &design, opts.distance_form);
        Ok(if mode.with_energy() { r / trajectory_energy(t, &design.energy, design.horizon.dt())? } else { r })
    };

    let mut traj = init.clone();
    let mut current = objective(&traj)?;
    let mut records = Vec::new();
    let mut termination = Termination::MaxOuterIterations;
    let mut outer_iterations = 0;
    let mut last_residuals = KktResiduals::default();
    let mut last_trace = Vec::new();

    for outer in 1..=opts.max_outer {
        outer_iterations = outer;
        let lambda0 = if mode.with_energy() { current } else { 0.0 };
        let mut sub = build_subproblem(&traj, Some(&init), &design, lambda0, &sopts)?;
        let x = inner_loop(&mut sub, &design, outer, opts, &mut records, &mut last_residuals, &mut last_trace)?;
        let next = sub.trajectory(&x)?;
        let value = objective(&next)?;
        if value < current * (1.0 - opts.monotone_tolerance) {
            return Err(Error::NonMonotone { outer, drop: (current - value) / current });
        }
        let gain = (value - current) / current.abs();
        traj = next;
        current = value;
        if gain < opts.outer_tolerance {
            termination = Termination::Converged;
            break;
        }
    }

    Ok(RunReport {
        mode,
        metrics: metrics(&traj, sc)?,
        trajectory: traj,
        initial: init,
        start: Start::Initial,
        records,
        termination,
        outer_iterations,
        last_residuals,
        last_trace,
    })
}

/// Relative amount by which the surrogate rate sum may exceed the exact one
/// before a run is aborted.
const SURROGATE_SLACK: f64 = 1e-9;

/// Dinkelbach iterations on one subproblem; returns the accepted solution.
fn inner_loop(
    sub: &mut Subproblem,
    sc: &Scenario,
    outer: usize,
    opts: &AlgoOptions,
    records: &mut Vec<IterationRecord>,
    last_residuals: &mut KktResiduals,
    last_trace: &mut Vec<TraceRow>,
) -> Result<Vec<f64>> {
    let mut lambda = sub.lambda;
    for inner in 1..=opts.max_inner {
        let clock = Instant::now();
        let sol = solve(&sub.program, None, &opts.solver)?;
        if sol.status != Status::Optimal {
            return Err(Error::Solver { status: sol.status, outer, inner });
        }
        *last_residuals = sol.residuals;
        *last_trace = sol.trace;
        let num = sub.surrogate_rate_sum(&sol.x);
        let den = sub.surrogate_energy(&sol.x);
        let f = num - lambda * den.unwrap_or(0.0);
        let traj = sub.trajectory(&sol.x)?;
        let model = model_rate_sum(&traj, sc, opts.distance_form);
        if num > model * (1.0 + SURROGATE_SLACK) {
            return Err(Error::SurrogateAboveExact { outer, inner, surrogate: num, exact: model });
        }
        let exact_sum = rate_sum(&traj, sc);
        let energy = trajectory_energy(&traj, &sc.energy, sc.horizon.dt())?;
        records.push(IterationRecord {
            outer_iter: outer,
            inner_iter: inner,
            lambda,
            f_lambda: f,
            surrogate_obj: den.map_or(num, |d| num / d),
            exact_throughput_bits: throughput_bits(&traj, sc),
            exact_energy_j: energy,
            exact_ee: exact_sum / energy,
            solver_iters: sol.iterations,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        });
        let Some(den) = den else {
            return Ok(sol.x);
        };
        let done = match opts.inner_stop {
            InnerStop::Absolute(eta) => f.abs() <= eta,
            InnerStop::Relative(r) => f.abs() <= r * num.abs(),
        };
        let next = num / den;
        if next < lambda * (1.0 - opts.monotone_tolerance) {
            return Err(Error::LambdaDecrease { outer, inner, from: lambda, to: next });
        }
        lambda = next;
        if done || inner == opts.max_inner {
            return Ok(sol.x);
        }
        sub.set_lambda(lambda);
    }
    unreachable!("max_inner is at least one")
}

pub fn write_convergence_csv(records: &[IterationRecord], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(r)?;
    }
    if records.is_empty() {
        wtr.write_record([
            "outer_iter",
            "inner_iter",
            "lambda",
            "F_lambda",
            "surrogate_obj",
            "exact_throughput_bits",
            "exact_energy_J",
            "exact_EE",
            "solver_iters",
            "wall_ms",
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a convergence log; every numeric field must be finite.
pub fn read_convergence_csv(r: impl Read) -> Result<Vec<IterationRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize().enumerate() {
        let rec: IterationRecord = row?;
        let values = [
            rec.lambda,
            rec.f_lambda,
            rec.surrogate_obj,
            rec.exact_throughput_bits,
            rec.exact_energy_j,
            rec.exact_ee,
            rec.wall_ms,
        ];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed {
                what: "convergence csv",
                reason: format!("row {i} has a non-finite value"),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
