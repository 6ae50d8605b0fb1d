//! Convex surrogates and the convex subproblem solved at every iteration.
//!
//! Around an expansion point the nonconvex pieces of the problem are
//! replaced as follows:
//!
//! - the per-slot rate, written as `B·log2(1 + 1/(L·I))` with
//!   `L ≥ 1/(P_s·g_s)` and `I ≥ interference + noise`, is jointly convex in
//!   `(L, I)` and is bounded below by its tangent plane;
//! - `‖v‖²` is bounded below by its tangent, which supports both the speed
//!   floor and the slack `τ ≤ ‖v‖` used in the induced-power term;
//! - the squared jammer distance is bounded below by its tangent, giving a
//!   convex upper bound on the received jamming power.
//!
//! All three bounds are tight at the expansion point, so the surrogate
//! objective there equals the exact objective.

use std::f64::consts::LOG2_E;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::init::{slack_init_with, SlackSet};
use crate::physics::Trajectory;
use crate::scenario::Scenario;
use crate::solver::{ConvexProgram, SmoothFn, Term};

/// Squared UAV-to-jammer distance used by the interference model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DistanceForm {
    /// 3-D distance, including the altitude.
    #[default]
    Slant,
    /// Horizontal distance only. Over-estimates the jamming power.
    Horizontal,
}

impl DistanceForm {
    pub fn distance_sq(self, q: Vec2, jammer: Vec2, altitude: f64) -> f64 {
        let horizontal = (q - jammer).norm_sq();
        match self {
            DistanceForm::Slant => horizontal + altitude * altitude,
            DistanceForm::Horizontal => horizontal,
        }
    }
}

/// Tangent plane `constant + coef_l·(L − L_f) + coef_i·(I − I_f)` of
/// `B·log2(1 + 1/(L·I))` at `(L_f, I_f)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateBound {
    pub l_f: f64,
    pub i_f: f64,
    pub constant: f64,
    pub coef_l: f64,
    pub coef_i: f64,
}

impl RateBound {
    pub fn new(bandwidth: f64, l_f: f64, i_f: f64) -> Self {
        Self {
            l_f,
            i_f,
            constant: bandwidth * (1.0 / (l_f * i_f)).ln_1p() * LOG2_E,
            coef_l: -bandwidth * LOG2_E / (l_f + l_f * l_f * i_f),
            coef_i: -bandwidth * LOG2_E / (i_f + i_f * i_f * l_f),
        }
    }

    pub fn value(&self, l: f64, i: f64) -> f64 {
        self.constant + self.coef_l * (l - self.l_f) + self.coef_i * (i - self.i_f)
    }
}

/// Exact `B·log2(1 + 1/(L·I))`.
pub fn slack_rate(bandwidth: f64, l: f64, i: f64) -> f64 {
    bandwidth * (1.0 / (l * i)).ln_1p() * LOG2_E
}

/// Affine function `constant + Σ coef·x` of a 2-vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineBound {
    pub constant: f64,
    pub coef: Vec2,
}

impl AffineBound {
    pub fn value(&self, x: Vec2) -> f64 {
        self.constant + self.coef.dot(x)
    }
}

/// Tangent lower bound of `‖v‖²` at `v_f`.
pub fn speed_sq_bound(v_f: Vec2) -> AffineBound {
    AffineBound { constant: -v_f.norm_sq(), coef: v_f * 2.0 }
}

/// Tangent lower bound of the squared distance from `q` to `jammer` at `q_f`.
pub fn dist_sq_bound(q_f: Vec2, jammer: Vec2, altitude: f64, form: DistanceForm) -> AffineBound {
    let r = q_f - jammer;
    AffineBound { constant: form.distance_sq(q_f, jammer, altitude) - 2.0 * r.dot(q_f), coef: r * 2.0 }
}

/// Sum of slot rates under the given distance form. With
/// [`DistanceForm::Slant`] this is the exact rate sum.
pub fn model_rate_sum(traj: &Trajectory, sc: &Scenario, form: DistanceForm) -> f64 {
    let s = slack_init_with(traj, sc, form);
    s.inv_signal.iter().zip(&s.interference).map(|(l, i)| slack_rate(sc.channel.bandwidth, *l, *i)).sum()
}

/// Position of each variable of one slot inside the flat variable vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarLayout {
    pub slots: usize,
    pub jammers: usize,
    pub with_tau: bool,
}

impl VarLayout {
    pub fn per_slot(&self) -> usize {
        6 + usize::from(self.with_tau) + 2 + self.jammers
    }

    pub fn len(&self) -> usize {
        self.slots * self.per_slot()
    }

    pub fn is_empty(&self) -> bool {
        self.slots == 0
    }

    fn base(&self, n: usize) -> usize {
        n * self.per_slot()
    }

    pub fn q(&self, n: usize) -> [usize; 2] {
        let b = self.base(n);
        [b, b + 1]
    }

    pub fn v(&self, n: usize) -> [usize; 2] {
        let b = self.base(n);
        [b + 2, b + 3]
    }

    pub fn a(&self, n: usize) -> [usize; 2] {
        let b = self.base(n);
        [b + 4, b + 5]
    }

    pub fn tau(&self, n: usize) -> Option<usize> {
        self.with_tau.then(|| self.base(n) + 6)
    }

    pub fn inv_signal(&self, n: usize) -> usize {
        self.base(n) + 6 + usize::from(self.with_tau)
    }

    pub fn interference(&self, n: usize) -> usize {
        self.inv_signal(n) + 1
    }

    pub fn dist_sq(&self, n: usize, m: usize) -> usize {
        self.interference(n) + 1 + m
    }
}

/// Lower bound on jammer distance slacks.
pub const DIST_FLOOR: f64 = 1e-6;
/// Relative amount by which slack variables are moved into the interior
/// when building the solver's starting point.
const START_MARGIN: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurrogateOptions {
    pub distance_form: DistanceForm,
    /// Include the energy denominator (and the `τ` slacks it needs).
    pub with_energy: bool,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self { distance_form: DistanceForm::Slant, with_energy: true }
    }
}

/// Convex subproblem at one expansion point.
///
/// `numerator` is the surrogate rate sum (concave, affine here) and
/// `denominator` the surrogate energy (convex); the program minimises
/// `−numerator + λ·denominator`.
#[derive(Clone, Debug)]
pub struct Subproblem {
    pub program: ConvexProgram,
    pub layout: VarLayout,
    pub numerator: SmoothFn,
    pub denominator: Option<SmoothFn>,
    /// Strictly feasible point next to the expansion point.
    pub start: Vec<f64>,
    /// Expansion trajectory and its tight slacks.
    pub expansion: Trajectory,
    pub expansion_slacks: SlackSet,
    pub lambda: f64,
}

impl Subproblem {
    pub fn set_lambda(&mut self, lambda: f64) {
        self.lambda = lambda;
        let neg_rate = self.numerator.scaled(-1.0);
        self.program.objective = match &self.denominator {
            Some(d) => neg_rate.plus(&d.scaled(lambda)),
            None => neg_rate,
        };
    }

    pub fn surrogate_rate_sum(&self, x: &[f64]) -> f64 {
        self.numerator.value(x)
    }

    pub fn surrogate_energy(&self, x: &[f64]) -> Option<f64> {
        self.denominator.as_ref().map(|d| d.value(x))
    }

    pub fn trajectory(&self, x: &[f64]) -> Result<Trajectory> {
        let l = &self.layout;
        let get = |ix: [usize; 2]| Vec2::new(x[ix[0]], x[ix[1]]);
        let n = l.slots;
        Trajectory::new(
            (0..n).map(|k| get(l.q(k))).collect(),
            (0..n).map(|k| get(l.v(k))).collect(),
            (0..n).map(|k| get(l.a(k))).collect(),
        )
    }

    pub fn slacks(&self, x: &[f64]) -> SlackSet {
        let l = &self.layout;
        let n = l.slots;
        SlackSet {
            tau: (0..n).map(|k| l.tau(k).map_or(f64::NAN, |i| x[i])).collect(),
            inv_signal: (0..n).map(|k| x[l.inv_signal(k)]).collect(),
            interference: (0..n).map(|k| x[l.interference(k)]).collect(),
            dist_sq: (0..l.jammers).map(|m| (0..n).map(|k| x[l.dist_sq(k, m)]).collect()).collect(),
        }
    }
}

/// Builds the convex subproblem around `expansion` for the jammers in `sc`.
///
/// The solver's starting point blends the expansion point with `anchor`
/// (any kinematically feasible trajectory strictly inside the speed and
/// acceleration limits, typically the initial one) so that it does not sit
/// on constraints that were active in the previous solution.
pub fn build_subproblem(
    expansion: &Trajectory,
    anchor: Option<&Trajectory>,
    sc: &Scenario,
    lambda: f64,
    opts: &SurrogateOptions,
) -> Result<Subproblem> {
    let n = sc.horizon.slots();
    if expansion.len() != n || anchor.is_some_and(|t| t.len() != n) {
        return Err(Error::InfeasibleExpansion(format!("trajectory has {} slots, horizon has {n}", expansion.len())));
    }
    let form = opts.distance_form;
    let layout = VarLayout { slots: n, jammers: sc.jammers.len(), with_tau: opts.with_energy };
    let tight = slack_init_with(expansion, sc, form);
    let uav = &sc.uav;
    let ch = &sc.channel;
    let en = &sc.energy;
    let h = uav.altitude;
    let dt = sc.horizon.dt();

    let mut p = ConvexProgram::new(layout.len());
    let mut numerator = SmoothFn::default();
    let mut denominator = SmoothFn::default();

    let q_scale = uav.start.norm().max(uav.end.norm()).max(sc.source.xy().norm()).max(100.0);
    let v_scale = uav.v_max.min(10.0 * uav.v_min).max(1.0);
    for k in 0..n {
        let (q, v) = (expansion.q[k], expansion.v[k]);
        let mut set = |i: usize, scale: f64, name: String| {
            p.var_scale[i] = scale;
            p.var_order[i] = 2 * k + 1;
            p.var_names[i] = name;
        };
        let [qx, qy] = layout.q(k);
        let [vx, vy] = layout.v(k);
        let [ax, ay] = layout.a(k);
        set(qx, q_scale, format!("qx[{k}]"));
        set(qy, q_scale, format!("qy[{k}]"));
        set(vx, v_scale, format!("vx[{k}]"));
        set(vy, v_scale, format!("vy[{k}]"));
        set(ax, uav.a_max, format!("ax[{k}]"));
        set(ay, uav.a_max, format!("ay[{k}]"));
        let li = layout.inv_signal(k);
        let ii = layout.interference(k);
        let l_f = tight.inv_signal[k];
        let i_f = tight.interference[k];
        set(li, l_f, format!("L[{k}]"));
        set(ii, i_f, format!("I[{k}]"));
        if let Some(t) = layout.tau(k) {
            set(t, v_scale, format!("tau[{k}]"));
        }
        for m in 0..layout.jammers {
            set(layout.dist_sq(k, m), tight.dist_sq[m][k], format!("d{m}[{k}]"));
        }

        let speed = v.norm();
        if !(speed > uav.v_min) {
            return Err(Error::InfeasibleExpansion(format!(
                "speed {speed} at slot {k} is not above v_min = {}",
                uav.v_min
            )));
        }

        // Speed and acceleration limits.
        p.add_inequality(
            SmoothFn::new(
                vec![Term::SquaredNorm { vars: vec![ax, ay], center: vec![0.0; 2], weight: 1.0 }],
                -uav.a_max.powi(2),
            ),
            1.0 / uav.a_max.powi(2),
            "accel_max",
        );
        p.add_inequality(
            SmoothFn::new(
                vec![Term::SquaredNorm { vars: vec![vx, vy], center: vec![0.0; 2], weight: 1.0 }],
                -uav.v_max.powi(2),
            ),
            1.0 / uav.v_max.powi(2),
            "speed_max",
        );
        let vb = speed_sq_bound(v);
        let neg_vl = |extra: f64| {
            SmoothFn::new(vec![Term::linear(vec![vx, vy], vec![-vb.coef.x, -vb.coef.y])], extra - vb.constant)
        };
        p.add_inequality(neg_vl(uav.v_min.powi(2)), 1.0 / uav.v_min.powi(2), "speed_min");

        if let Some(t) = layout.tau(k) {
            p.add_inequality(
                SmoothFn::new(vec![Term::linear(vec![t], vec![-1.0])], uav.v_min),
                1.0 / uav.v_min,
                "tau_floor",
            );
            let mut f = neg_vl(0.0);
            f.push(Term::SquaredNorm { vars: vec![t], center: vec![0.0], weight: 1.0 });
            p.add_inequality(f, 1.0 / speed.powi(2), "tau_speed");

            denominator.push(Term::NormCubed { vars: vec![vx, vy], weight: dt * en.c1 });
            denominator.push(Term::InducedPower { accel: [ax, ay], speed: t, weight: dt * en.c2, gravity: en.gravity });
        }

        // Received signal: ‖q − q_s‖² + H² ≤ P_s·β₀·L.
        let src = sc.source.xy();
        p.add_inequality(
            SmoothFn::new(
                vec![
                    Term::SquaredNorm { vars: vec![qx, qy], center: vec![src.x, src.y], weight: 1.0 },
                    Term::linear(vec![li], vec![-ch.source_power * ch.beta0]),
                ],
                h * h,
            ),
            1.0 / ((q - src).norm_sq() + h * h),
            "signal",
        );

        // Jamming: Σ P_m·β₀/d_m + σ² ≤ I, with d_m below the distance tangent.
        let mut jam = SmoothFn::new(vec![Term::linear(vec![ii], vec![-1.0])], ch.noise_power);
        for (m, j) in sc.jammers.iter().enumerate() {
            let di = layout.dist_sq(k, m);
            let d_f = tight.dist_sq[m][k];
            if !(d_f > DIST_FLOOR) {
                return Err(Error::InfeasibleExpansion(format!("slot {k} is on top of jammer {m} (d = {d_f:e})")));
            }
            jam.push(Term::Reciprocal { var: di, weight: j.power * ch.beta0 });
            p.add_inequality(
                SmoothFn::new(vec![Term::linear(vec![di], vec![-1.0])], DIST_FLOOR),
                1.0 / d_f,
                "dist_floor",
            );
            let db = dist_sq_bound(q, j.node.xy(), h, form);
            p.add_inequality(
                SmoothFn::new(vec![Term::linear(vec![di, qx, qy], vec![1.0, -db.coef.x, -db.coef.y])], -db.constant),
                1.0 / d_f,
                "dist_tangent",
            );
        }
        p.add_inequality(jam, 1.0 / i_f, "interference");

        let rb = RateBound::new(ch.bandwidth, l_f, i_f);
        numerator.push(Term::linear(vec![li, ii], vec![rb.coef_l, rb.coef_i]));
        numerator.constant += rb.constant - rb.coef_l * l_f - rb.coef_i * i_f;
    }

    // Kinetic-energy change, with the concave half replaced by its tangent.
    if opts.with_energy && en.mass > 0.0 {
        let j = en.mass;
        let [lx, ly] = layout.v(n - 1);
        denominator.push(Term::SquaredNorm { vars: vec![lx, ly], center: vec![0.0; 2], weight: 0.5 * j });
        let v0 = expansion.v[0];
        let [fx, fy] = layout.v(0);
        denominator.push(Term::linear(vec![fx, fy], vec![-j * v0.x, -j * v0.y]));
        denominator.constant += 0.5 * j * v0.norm_sq();
    }

    // Kinematics.
    let half = 0.5 * dt * dt;
    let [q0x, q0y] = layout.q(0);
    let [v0x, v0y] = layout.v(0);
    let [a0x, a0y] = layout.a(0);
    p.add_equality(vec![(q0x, 1.0), (v0x, -dt), (a0x, -half)], uav.start.x, 0);
    p.add_equality(vec![(q0y, 1.0), (v0y, -dt), (a0y, -half)], uav.start.y, 0);
    for k in 1..n {
        let (pq, pv) = (layout.q(k - 1), layout.v(k - 1));
        let (cq, cv, ca) = (layout.q(k), layout.v(k), layout.a(k));
        for d in 0..2 {
            p.add_equality(vec![(cq[d], 1.0), (pq[d], -1.0), (cv[d], -dt), (ca[d], -half)], 0.0, 2 * k);
            p.add_equality(vec![(cv[d], 1.0), (pv[d], -1.0), (ca[d], -dt)], 0.0, 2 * k);
        }
    }
    let last = layout.q(n - 1);
    p.add_equality(vec![(last[0], 1.0)], uav.end.x, 2 * n);
    p.add_equality(vec![(last[1], 1.0)], uav.end.y, 2 * n);
    p.objective_scale = 1.0 / (ch.bandwidth * n as f64);

    let mut sub = Subproblem {
        program: p,
        layout,
        numerator,
        denominator: opts.with_energy.then_some(denominator),
        start: Vec::new(),
        expansion: expansion.clone(),
        expansion_slacks: tight,
        lambda,
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let weights: &[f64] = if anchor.is_some() { &[0.0, 1e-3, 1e-2, 3e-2, 0.1] } else { &[0.0] };
    for &w in weights {
        let traj = match anchor {
            Some(an) if w > 0.0 => blend(expansion, an, w)?,
            _ => expansion.clone(),
        };
        if let Some(x) = sub.interior_point(&traj, sc, form) {
            let slack = sub.program.min_slack(&x).unwrap_or(f64::INFINITY);
            if slack > 0.0 && best.as_ref().is_none_or(|(s, _)| slack > *s) {
                best = Some((slack, x));
            }
        }
    }
    let Some((_, start)) = best else {
        return Err(Error::InfeasibleExpansion("no strictly feasible starting point near the expansion point".into()));
    };
    sub.program.initial = Some(start.clone());
    sub.start = start;
    sub.set_lambda(lambda);
    Ok(sub)
}

fn blend(a: &Trajectory, b: &Trajectory, w: f64) -> Result<Trajectory> {
    let mix = |x: &[Vec2], y: &[Vec2]| x.iter().zip(y).map(|(p, q)| *p * (1.0 - w) + *q * w).collect();
    Trajectory::new(mix(&a.q, &b.q), mix(&a.v, &b.v), mix(&a.a, &b.a))
}

impl Subproblem {
    /// Variable vector with kinematics from `traj` and slacks moved slightly
    /// inside their constraints; `None` if no such point exists.
    fn interior_point(&self, traj: &Trajectory, sc: &Scenario, form: DistanceForm) -> Option<Vec<f64>> {
        let l = &self.layout;
        let ch = &sc.channel;
        let v_min = sc.uav.v_min;
        let h = sc.uav.altitude;
        let mut x = vec![0.0; l.len()];
        for k in 0..l.slots {
            let (q, v, a) = (traj.q[k], traj.v[k], traj.a[k]);
            for (ix, val) in [(l.q(k), q), (l.v(k), v), (l.a(k), a)] {
                x[ix[0]] = val.x;
                x[ix[1]] = val.y;
            }
            if let Some(t) = l.tau(k) {
                let vl = speed_sq_bound(self.expansion.v[k]).value(v);
                if !(vl > v_min * v_min) {
                    return None;
                }
                x[t] = v_min + (vl.sqrt() - v_min) * (1.0 - START_MARGIN);
            }
            let signal = (q - sc.source.xy()).norm_sq() + h * h;
            x[l.inv_signal(k)] = signal / (ch.source_power * ch.beta0) * (1.0 + START_MARGIN);
            let mut interference = ch.noise_power;
            for (m, j) in sc.jammers.iter().enumerate() {
                let bound = dist_sq_bound(self.expansion.q[k], j.node.xy(), h, form).value(q);
                let d = bound * (1.0 - START_MARGIN);
                if !(d > DIST_FLOOR * (1.0 + START_MARGIN)) {
                    return None;
                }
                x[l.dist_sq(k, m)] = d;
                interference += j.power * ch.beta0 / d;
            }
            x[l.interference(k)] = interference * (1.0 + START_MARGIN);
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::line_init;
    use crate::physics::{rate_sum, trajectory_energy};
    use crate::scenario::preset_case;
    use approx::assert_relative_eq;

    #[test]
    fn rate_bound_coefficients() {
        let b = RateBound::new(1e5, 1e11, 1e-11);
        assert_relative_eq!(b.constant, 1e5, max_relative = 1e-12);
        assert_relative_eq!(b.coef_l, -1e5 * LOG2_E / 2e11, max_relative = 1e-12);
        assert_relative_eq!(b.coef_i, -1e5 * LOG2_E / 2e-11, max_relative = 1e-12);
        assert!(b.value(2e11, 3e-11) <= slack_rate(1e5, 2e11, 3e-11));
    }

    #[test]
    fn distance_bound_includes_altitude() {
        let u = Vec2::new(0.0, 0.0);
        let qf = Vec2::new(30.0, 40.0);
        let slant = dist_sq_bound(qf, u, 100.0, DistanceForm::Slant);
        assert_relative_eq!(slant.value(qf), 2500.0 + 1e4);
        let flat = dist_sq_bound(qf, u, 100.0, DistanceForm::Horizontal);
        assert_relative_eq!(flat.value(qf), 2500.0);
        let q = Vec2::new(-10.0, 5.0);
        assert!(slant.value(q) <= q.norm_sq() + 1e4);
    }

    #[test]
    fn surrogate_is_tight_at_expansion() {
        let sc = preset_case(1).unwrap().with_duration(20.0).unwrap();
        let mut sc = sc;
        sc.uav.end = Vec2::new(100.0, 0.0);
        let t = line_init(&sc).unwrap();
        let sub = build_subproblem(&t, None, &sc, 0.0, &SurrogateOptions::default()).unwrap();
        let mut x = sub.start.clone();
        let s = &sub.expansion_slacks;
        for k in 0..t.len() {
            x[sub.layout.inv_signal(k)] = s.inv_signal[k];
            x[sub.layout.interference(k)] = s.interference[k];
            x[sub.layout.tau(k).unwrap()] = s.tau[k];
            x[sub.layout.dist_sq(k, 0)] = s.dist_sq[0][k];
        }
        assert_relative_eq!(sub.surrogate_rate_sum(&x), rate_sum(&t, &sc), max_relative = 1e-12);
        let e = trajectory_energy(&t, &sc.energy, sc.horizon.dt()).unwrap();
        assert_relative_eq!(sub.surrogate_energy(&x).unwrap(), e, max_relative = 1e-12);
        assert_eq!(sub.trajectory(&x).unwrap(), t);
        assert!(sub.program.min_slack(&sub.start).unwrap() > 0.0);
    }
}
