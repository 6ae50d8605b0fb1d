//! Exact evaluators of the system model. Nothing in here is approximated;
//! the surrogates in [`crate::sca`] are tested against these functions.

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::scenario::{EnergyParams, GroundNode, Horizon, Scenario, UavParams};

/// Per-slot position, velocity and acceleration of the UAV. Slot `n` here is
/// slot `n + 1` of the usual 1-based numbering.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub q: Vec<Vec2>,
    pub v: Vec<Vec2>,
    pub a: Vec<Vec2>,
}

impl Trajectory {
    pub fn new(q: Vec<Vec2>, v: Vec<Vec2>, a: Vec<Vec2>) -> Result<Self> {
        if q.len() != v.len() || q.len() != a.len() {
            return Err(Error::Malformed {
                what: "trajectory",
                reason: format!("length mismatch q={} v={} a={}", q.len(), v.len(), a.len()),
            });
        }
        if q.iter().chain(&v).chain(&a).any(|p| !p.is_finite()) {
            return Err(Error::Malformed { what: "trajectory", reason: "non-finite entry".into() });
        }
        Ok(Self { q, v, a })
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn speeds(&self) -> impl Iterator<Item = f64> + '_ {
        self.v.iter().map(|v| v.norm())
    }

    pub fn average_speed(&self) -> f64 {
        self.speeds().sum::<f64>() / self.len() as f64
    }
}

/// β₀ / d² with d the 3-D distance between the UAV at altitude `altitude`
/// and a ground node.
pub fn channel_gain(uav_xy: Vec2, altitude: f64, ground: GroundNode, beta0: f64) -> f64 {
    beta0 / ((uav_xy - ground.xy()).norm_sq() + altitude * altitude)
}

/// Total received jamming power plus noise, in watts.
pub fn interference_plus_noise(uav_xy: Vec2, sc: &Scenario) -> f64 {
    let h = sc.uav.altitude;
    let beta0 = sc.channel.beta0;
    sc.jammers.iter().map(|j| j.power * channel_gain(uav_xy, h, j.node, beta0)).sum::<f64>() + sc.channel.noise_power
}

pub fn sinr(uav_xy: Vec2, sc: &Scenario) -> f64 {
    let signal = sc.channel.source_power * channel_gain(uav_xy, sc.uav.altitude, sc.source, sc.channel.beta0);
    signal / interference_plus_noise(uav_xy, sc)
}

/// Achievable rate in bits/s at a horizontal UAV position.
pub fn slot_rate(uav_xy: Vec2, sc: &Scenario) -> f64 {
    sc.channel.bandwidth * (1.0 + sinr(uav_xy, sc)).log2()
}

/// Instantaneous propulsion power of the fixed-wing model in watts.
pub fn propulsion_power(v: Vec2, a: Vec2, energy: &EnergyParams) -> Result<f64> {
    let speed = v.norm();
    if !(speed > 0.0) {
        return Err(Error::ZeroSpeed { slot: 0 });
    }
    let g2 = energy.gravity * energy.gravity;
    Ok(energy.c1 * speed.powi(3) + energy.c2 / speed * (1.0 + a.norm_sq() / g2))
}

/// Propulsion energy over the horizon plus the kinetic-energy change.
pub fn trajectory_energy(traj: &Trajectory, energy: &EnergyParams, dt: f64) -> Result<f64> {
    let mut sum = 0.0;
    for (n, (v, a)) in traj.v.iter().zip(&traj.a).enumerate() {
        sum += propulsion_power(*v, *a, energy).map_err(|_| Error::ZeroSpeed { slot: n })?;
    }
    Ok(dt * sum + kinetic_energy_change(traj, energy))
}

pub fn kinetic_energy_change(traj: &Trajectory, energy: &EnergyParams) -> f64 {
    match (traj.v.first(), traj.v.last()) {
        (Some(first), Some(last)) => 0.5 * energy.mass * (last.norm_sq() - first.norm_sq()),
        _ => 0.0,
    }
}

/// Sum of per-slot rates Σ R[n] (bits/s summed over slots). This is the
/// numerator of the energy-efficiency objective and the quantity reported as
/// "sum throughput" in the results tables.
pub fn rate_sum(traj: &Trajectory, sc: &Scenario) -> f64 {
    traj.q.iter().map(|q| slot_rate(*q, sc)).sum()
}

/// Delivered bits dt · Σ R[n].
pub fn throughput_bits(traj: &Trajectory, sc: &Scenario) -> f64 {
    sc.horizon.dt() * rate_sum(traj, sc)
}

/// Σ R[n] / E, the energy-efficiency objective.
pub fn energy_efficiency(traj: &Trajectory, sc: &Scenario) -> Result<f64> {
    Ok(rate_sum(traj, sc) / trajectory_energy(traj, &sc.energy, sc.horizon.dt())?)
}

/// Worst violation of one constraint family and where it occurs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residual {
    pub max: f64,
    pub slot: usize,
}

impl Residual {
    fn update(&mut self, value: f64, slot: usize) {
        if value > self.max {
            self.max = value;
            self.slot = slot;
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FeasibilityReport {
    /// Position recursion q[n] = q[n-1] + v[n]dt + a[n]dt²/2.
    pub dynamics: Residual,
    /// Velocity recursion v[n] = v[n-1] + a[n]dt.
    pub velocity: Residual,
    pub start: Residual,
    pub end: Residual,
    pub a_max: Residual,
    pub v_max: Residual,
    pub v_min: Residual,
}

impl FeasibilityReport {
    pub fn families(&self) -> [(&'static str, Residual); 7] {
        [
            ("dynamics", self.dynamics),
            ("velocity", self.velocity),
            ("start", self.start),
            ("end", self.end),
            ("a_max", self.a_max),
            ("v_max", self.v_max),
            ("v_min", self.v_min),
        ]
    }

    pub fn max(&self) -> f64 {
        self.families().iter().map(|(_, r)| r.max).fold(0.0, f64::max)
    }
}

pub fn kinematic_residuals(traj: &Trajectory, uav: &UavParams, horizon: &Horizon) -> FeasibilityReport {
    let dt = horizon.dt();
    let mut rep = FeasibilityReport::default();
    let n = traj.len();
    if n == 0 {
        return rep;
    }
    let (q, v, a) = (&traj.q, &traj.v, &traj.a);
    rep.start.update((q[0] - uav.start - v[0] * dt - a[0] * (0.5 * dt * dt)).norm(), 0);
    for k in 1..n {
        rep.dynamics.update((q[k] - q[k - 1] - v[k] * dt - a[k] * (0.5 * dt * dt)).norm(), k);
        rep.velocity.update((v[k] - v[k - 1] - a[k] * dt).norm(), k);
    }
    rep.end.update((q[n - 1] - uav.end).norm(), n - 1);
    for k in 0..n {
        let speed = v[k].norm();
        rep.a_max.update((a[k].norm() - uav.a_max).max(0.0), k);
        rep.v_max.update((speed - uav.v_max).max(0.0), k);
        rep.v_min.update((uav.v_min - speed).max(0.0), k);
    }
    rep
}
