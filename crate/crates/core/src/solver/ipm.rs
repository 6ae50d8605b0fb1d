//! Feasible-start primal-dual interior-point method.
//!
//! Inequalities `g(x) ≤ 0` must hold strictly at the starting point and stay
//! strict along the iterates; equalities may start infeasible. Each Newton
//! step solves the reduced KKT system
//!
//! ```text
//! [ H + Σ (zᵢ/sᵢ) ∇gᵢ∇gᵢᵀ   Aᵀ ] [dx]   [ -(∇f + Aᵀν + Σ ∇gᵢ/(t·sᵢ)) ]
//! [ A                      0  ] [dν] = [ -(Ax - b)                  ]
//! ```
//!
//! with `sᵢ = -gᵢ(x)` and `t = μ·m/η̂`, followed by a backtracking search on
//! the norm of the centred residual.

use std::io::Write;

use super::linalg::{Factorization, KktPattern, KktSystem};
use super::program::ConvexProgram;
use super::terms::merge_sorted;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Bound on stationarity, primal infeasibility and total duality gap,
    /// all measured in the program's scaled units.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Ratio between the duality gap and the next centring target.
    pub centering: f64,
    /// Sufficient-decrease constant of the residual line search.
    pub armijo: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    /// Initial complementarity zᵢ·sᵢ; `None` picks one from the objective gradient.
    pub initial_mu: Option<f64>,
    /// Steps may not take any zᵢ·sᵢ below this fraction of the mean.
    pub neighborhood: f64,
    pub factorization: Factorization,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200,
            centering: 3.0,
            armijo: 0.01,
            backtrack: 0.5,
            initial_mu: None,
            neighborhood: 0.1,
            factorization: Factorization::Banded,
            record_trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    MaxIter,
    NumericalFailure,
}

/// KKT residual norms in scaled units.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal: f64,
    /// Largest negative part of an inequality multiplier.
    pub dual: f64,
    /// max |zᵢ·gᵢ|.
    pub complementarity: f64,
    /// Σ zᵢ·sᵢ.
    pub gap: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity).max(self.gap)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    /// 1/t, the centring target for zᵢ·sᵢ.
    pub barrier: f64,
    pub stationarity: f64,
    pub primal: f64,
    pub gap: f64,
    pub merit_before: f64,
    pub merit_after: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    /// Multipliers of the inequalities as written (before scaling).
    pub inequality_duals: Vec<f64>,
    /// Multipliers of the equalities as written.
    pub equality_duals: Vec<f64>,
    /// Unscaled objective value.
    pub objective: f64,
    pub residuals: KktResiduals,
    pub iterations: usize,
    pub status: Status,
    pub trace: Vec<TraceRow>,
}

/// Program with the solver's variable and row scaling applied.
struct Scaled<'a> {
    p: &'a ConvexProgram,
    /// Row-normalised equalities over scaled variables.
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
    row_norm: Vec<f64>,
    pattern: KktPattern,
}

struct Eval {
    grad: Vec<f64>,
    /// Scaled inequality values gᵢ (negative when strictly feasible).
    g: Vec<f64>,
    jac: Vec<Vec<(usize, f64)>>,
}

impl<'a> Scaled<'a> {
    fn new(p: &'a ConvexProgram) -> Self {
        let s = &p.var_scale;
        let mut rows = Vec::with_capacity(p.equalities.len());
        let mut rhs = Vec::with_capacity(p.equalities.len());
        let mut row_norm = Vec::with_capacity(p.equalities.len());
        for e in &p.equalities {
            let r: Vec<(usize, f64)> = merge_sorted(e.coeffs.iter().map(|&(i, c)| (i, c * s[i])).collect());
            let nrm = r.iter().fold(0.0f64, |m, (_, c)| m.max(c.abs())).max(f64::MIN_POSITIVE);
            rows.push(r.into_iter().map(|(i, c)| (i, c / nrm)).collect());
            rhs.push(e.rhs / nrm);
            row_norm.push(nrm);
        }
        let eq_rows: Vec<(Vec<usize>, usize)> = rows
            .iter()
            .zip(&p.equalities)
            .map(|(r, e): (&Vec<(usize, f64)>, _)| (r.iter().map(|x| x.0).collect(), e.order))
            .collect();
        let groups = p
            .objective
            .terms
            .iter()
            .filter(|t| !t.is_linear())
            .map(|t| t.vars())
            .chain(p.inequalities.iter().map(|c| c.func.support()));
        let pattern = KktPattern::new(&p.var_order, &eq_rows, groups);
        Self { p, rows, rhs, row_norm, pattern }
    }

    fn unscale(&self, xh: &[f64]) -> Vec<f64> {
        xh.iter().zip(&self.p.var_scale).map(|(x, s)| x * s).collect()
    }

    fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.p.inequalities.iter().map(|c| c.scale * c.func.value(x)).collect()
    }

    fn evaluate(&self, x: &[f64]) -> Eval {
        let s = &self.p.var_scale;
        let os = self.p.objective_scale;
        let mut grad = vec![0.0; self.p.num_vars];
        for (i, g) in self.p.objective.sparse_gradient(x) {
            grad[i] += os * g * s[i];
        }
        let g = self.constraint_values(x);
        let jac = self
            .p
            .inequalities
            .iter()
            .map(|c| c.func.sparse_gradient(x).into_iter().map(|(i, v)| (i, c.scale * v * s[i])).collect())
            .collect();
        Eval { grad, g, jac }
    }

    fn primal_residual(&self, xh: &[f64]) -> Vec<f64> {
        self.rows.iter().zip(&self.rhs).map(|(r, b)| r.iter().map(|&(i, c)| c * xh[i]).sum::<f64>() - b).collect()
    }

    fn dual_residual(&self, ev: &Eval, z: &[f64], nu: &[f64]) -> Vec<f64> {
        let mut r = ev.grad.clone();
        for (zi, row) in z.iter().zip(&ev.jac) {
            for &(i, v) in row {
                r[i] += zi * v;
            }
        }
        for (nj, row) in nu.iter().zip(&self.rows) {
            for &(i, c) in row {
                r[i] += nj * c;
            }
        }
        r
    }

    fn residuals(&self, ev: &Eval, xh: &[f64], z: &[f64], nu: &[f64]) -> KktResiduals {
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let ineq_violation = ev.g.iter().fold(0.0f64, |m, &g| m.max(g));
        KktResiduals {
            stationarity: inf(&self.dual_residual(ev, z, nu)),
            primal: inf(&self.primal_residual(xh)).max(ineq_violation),
            dual: z.iter().fold(0.0f64, |m, &zi| m.max(-zi)),
            complementarity: z.iter().zip(&ev.g).fold(0.0f64, |m, (zi, gi)| m.max((zi * gi).abs())),
            gap: z.iter().zip(&ev.g).map(|(zi, gi)| -zi * gi).sum(),
        }
    }

    fn merit(&self, ev: &Eval, xh: &[f64], z: &[f64], nu: &[f64], inv_t: f64) -> f64 {
        let rd = self.dual_residual(ev, z, nu);
        let rp = self.primal_residual(xh);
        let rc = z.iter().zip(&ev.g).map(|(zi, gi)| -zi * gi - inv_t);
        (rd.iter().map(|v| v * v).sum::<f64>() + rp.iter().map(|v| v * v).sum::<f64>() + rc.map(|v| v * v).sum::<f64>())
            .sqrt()
    }

    fn physical_duals(&self, z: &[f64], nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let os = self.p.objective_scale;
        let zp = z.iter().zip(&self.p.inequalities).map(|(zi, c)| zi * c.scale / os).collect();
        let np = nu.iter().zip(&self.row_norm).map(|(n, r)| n / (r * os)).collect();
        (zp, np)
    }

    fn scaled_duals(&self, z: &[f64], nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let os = self.p.objective_scale;
        let zs = z.iter().zip(&self.p.inequalities).map(|(zi, c)| zi * os / c.scale).collect();
        let ns = nu.iter().zip(&self.row_norm).map(|(n, r)| n * r * os).collect();
        (zs, ns)
    }
}

/// KKT residuals of `x` with physical multipliers, in the solver's scaled units.
pub fn kkt_residuals(
    program: &ConvexProgram,
    x: &[f64],
    inequality_duals: &[f64],
    equality_duals: &[f64],
) -> KktResiduals {
    assert_eq!(x.len(), program.num_vars, "point dimension");
    assert_eq!(inequality_duals.len(), program.inequalities.len(), "inequality dual dimension");
    assert_eq!(equality_duals.len(), program.equalities.len(), "equality dual dimension");
    let sc = Scaled::new(program);
    let (z, nu) = sc.scaled_duals(inequality_duals, equality_duals);
    let xh: Vec<f64> = x.iter().zip(&program.var_scale).map(|(x, s)| x / s).collect();
    let ev = sc.evaluate(x);
    sc.residuals(&ev, &xh, &z, &nu)
}

/// Smallest zᵢ·sᵢ relative to the mean; 1 on the central path.
fn centrality(z: &[f64], g: &[f64]) -> f64 {
    if z.is_empty() {
        return 1.0;
    }
    let (mut lo, mut sum) = (f64::INFINITY, 0.0);
    for (zk, gk) in z.iter().zip(g) {
        let p = -zk * gk;
        lo = lo.min(p);
        sum += p;
    }
    lo / (sum / z.len() as f64)
}

const REG_START: f64 = 1e-9;
const REG_MAX: f64 = 1e-3;

pub fn solve(program: &ConvexProgram, warm_start: Option<&[f64]>, opts: &SolverOptions) -> Result<Solution> {
    let p = program;
    let n = p.num_vars;
    let start = warm_start
        .map(<[f64]>::to_vec)
        .or_else(|| p.initial.clone())
        .ok_or_else(|| Error::InfeasibleStart("no starting point supplied".into()))?;
    if start.len() != n {
        return Err(Error::InfeasibleStart(format!("start has {} entries, expected {n}", start.len())));
    }
    let sc = Scaled::new(p);
    let mut xh: Vec<f64> = start.iter().zip(&p.var_scale).map(|(x, s)| x / s).collect();
    let m = p.inequalities.len();
    let neq = p.equalities.len();

    let mut ev = sc.evaluate(&start);
    if let Some((k, g)) = ev.g.iter().enumerate().find(|(_, g)| !(**g < 0.0)) {
        return Err(Error::InfeasibleStart(format!("inequality {k} [{}] has value {g:e}", p.inequalities[k].label)));
    }
    let mu0 = opts.initial_mu.unwrap_or_else(|| {
        let gmax = ev.grad.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        (0.1 * gmax).max(1e-6)
    });
    let mut z: Vec<f64> = ev.g.iter().map(|g| mu0 / -g).collect();
    let mut nu = vec![0.0; neq];
    let mut trace = Vec::new();
    let mut kkt = KktSystem::new(&sc.pattern);
    let mut status = Status::MaxIter;
    let mut iterations = 0;
    let mut reg = REG_START;
    let mut last_step = 1.0f64;

    for it in 0..opts.max_iterations {
        let x = sc.unscale(&xh);
        let res = sc.residuals(&ev, &xh, &z, &nu);
        if res.stationarity <= opts.tolerance && res.primal <= opts.tolerance && res.gap <= opts.tolerance {
            status = Status::Optimal;
            break;
        }
        iterations = it + 1;
        let sigma = if last_step < 0.5 { 1.0 } else { 1.0 / opts.centering };
        let inv_t = if m > 0 { sigma * res.gap / m as f64 } else { 0.0 };
        let slack: Vec<f64> = ev.g.iter().map(|g| -g).collect();

        // Assemble the reduced KKT matrix.
        kkt.clear();
        let s = &p.var_scale;
        let os = p.objective_scale;
        p.objective.hessian_entries(&x, os, |i, j, v| kkt.add(i, j, v * s[i] * s[j]));
        for (k, c) in p.inequalities.iter().enumerate() {
            let w = z[k] * c.scale;
            if !c.func.is_affine() {
                c.func.hessian_entries(&x, w, |i, j, v| kkt.add(i, j, v * s[i] * s[j]));
            }
            let d = z[k] / slack[k];
            let row = &ev.jac[k];
            for &(i, gi) in row {
                for &(j, gj) in row {
                    kkt.add(i, j, d * gi * gj);
                }
            }
        }
        for (r, row) in sc.rows.iter().enumerate() {
            for &(i, c) in row {
                kkt.add(n + r, i, c);
                kkt.add(i, n + r, c);
            }
        }
        let mut rhs = vec![0.0; n + neq];
        let rd = sc.dual_residual(&ev, &vec![0.0; m], &nu);
        for i in 0..n {
            rhs[i] = -rd[i];
        }
        if m > 0 {
            for (k, row) in ev.jac.iter().enumerate() {
                let w = inv_t / slack[k];
                for &(i, gi) in row {
                    rhs[i] -= w * gi;
                }
            }
        }
        for (r, v) in sc.primal_residual(&xh).into_iter().enumerate() {
            rhs[n + r] = -v;
        }

        let step_dir = loop {
            match kkt.solve(&rhs, reg, opts.factorization) {
                Ok(d) => break Some(d),
                Err(_) if reg < REG_MAX => reg *= 10.0,
                Err(_) => break None,
            }
        };
        let Some(dir) = step_dir else {
            status = Status::NumericalFailure;
            break;
        };
        let (dx, dnu) = dir.split_at(n);
        let dz: Vec<f64> = (0..m)
            .map(|k| {
                let jdx: f64 = ev.jac[k].iter().map(|&(i, g)| g * dx[i]).sum();
                -z[k] + inv_t / slack[k] + z[k] / slack[k] * jdx
            })
            .collect();

        // Line search: keep z > 0 and g(x) < 0, then require residual decrease.
        let mut step = 1.0f64;
        for k in 0..m {
            if dz[k] < 0.0 {
                step = step.min(-z[k] / dz[k]);
            }
        }
        step *= 0.99;
        let merit_before = sc.merit(&ev, &xh, &z, &nu, inv_t);
        let centrality_now = centrality(&z, &ev.g);
        let mut accepted = None;
        while step > 1e-14 {
            let xt: Vec<f64> = xh.iter().zip(dx).map(|(a, d)| a + step * d).collect();
            let xp = sc.unscale(&xt);
            let g = sc.constraint_values(&xp);
            if g.iter().all(|v| *v < 0.0) {
                let zt: Vec<f64> = z.iter().zip(&dz).map(|(a, d)| a + step * d).collect();
                if centrality(&zt, &g) < opts.neighborhood.min(centrality_now) {
                    step *= opts.backtrack;
                    continue;
                }
                let nt: Vec<f64> = nu.iter().zip(dnu).map(|(a, d)| a + step * d).collect();
                let evt = sc.evaluate(&xp);
                let merit_after = sc.merit(&evt, &xt, &zt, &nt, inv_t);
                if merit_after.is_finite() && merit_after <= (1.0 - opts.armijo * step) * merit_before {
                    accepted = Some((xt, zt, nt, evt, merit_after));
                    break;
                }
            }
            step *= opts.backtrack;
        }
        let Some((xt, zt, nt, evt, merit_after)) = accepted else {
            status = Status::NumericalFailure;
            break;
        };
        if opts.record_trace {
            trace.push(TraceRow {
                iteration: it,
                barrier: inv_t,
                stationarity: res.stationarity,
                primal: res.primal,
                gap: res.gap,
                merit_before,
                merit_after,
                step,
            });
        }
        xh = xt;
        z = zt;
        nu = nt;
        ev = evt;
        reg = (reg * 0.1).max(REG_START);
        last_step = step;
    }

    let x = sc.unscale(&xh);
    let residuals = sc.residuals(&ev, &xh, &z, &nu);
    if status == Status::MaxIter
        && residuals.stationarity <= opts.tolerance
        && residuals.primal <= opts.tolerance
        && residuals.gap <= opts.tolerance
    {
        status = Status::Optimal;
    }
    let (inequality_duals, equality_duals) = sc.physical_duals(&z, &nu);
    Ok(Solution {
        objective: p.objective.value(&x),
        x,
        inequality_duals,
        equality_duals,
        residuals,
        iterations,
        status,
        trace,
    })
}

/// Writes a solver trace as CSV.
pub fn write_trace_csv(trace: &[TraceRow], w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["iteration", "barrier", "stationarity", "primal", "gap", "merit_before", "merit_after", "step"])?;
    for r in trace {
        wtr.write_record([
            r.iteration.to_string(),
            format!("{:e}", r.barrier),
            format!("{:e}", r.stationarity),
            format!("{:e}", r.primal),
            format!("{:e}", r.gap),
            format!("{:e}", r.merit_before),
            format!("{:e}", r.merit_after),
            format!("{:e}", r.step),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
