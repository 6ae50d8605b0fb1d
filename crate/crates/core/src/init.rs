//! Strictly feasible starting point for the optimizer.
//!
//! When the endpoints can be joined by a straight line flown above `v_min`,
//! the start is that line at constant velocity. Otherwise the UAV flies a
//! constant-speed detour at 1.1·v_min whose heading sweeps smoothly from
//! +θ₀ to −θ₀ about the chord, with θ₀ chosen so the path closes on the
//! endpoint. A uniform velocity offset removes the residual closure error.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::physics::{channel_gain, Trajectory};
use crate::sca::DistanceForm;
use crate::scenario::Scenario;

/// Auxiliary variables of the convex reformulation, one entry per slot.
#[derive(Clone, Debug, PartialEq)]
pub struct SlackSet {
    /// Speed lower bounds τ[n] (m/s).
    pub tau: Vec<f64>,
    /// Reciprocal received source power L[n] (1/W).
    pub inv_signal: Vec<f64>,
    /// Interference-plus-noise bound I[n] (W).
    pub interference: Vec<f64>,
    /// Squared distances to each jammer, `dist_sq[m][n]` (m²).
    pub dist_sq: Vec<Vec<f64>>,
}

/// Which side of the start→end chord a detour bulges towards.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DetourSide {
    /// Towards the source node; the +y half-plane if the source is on the chord.
    #[default]
    TowardSource,
    Left,
    Right,
}

const DETOUR_SPEED_FACTOR: f64 = 1.1;

pub fn line_init(sc: &Scenario) -> Result<Trajectory> {
    line_init_with(sc, DetourSide::default())
}

pub fn line_init_with(sc: &Scenario, side: DetourSide) -> Result<Trajectory> {
    let uav = &sc.uav;
    let t_total = sc.horizon.duration();
    let n = sc.horizon.slots();
    let dt = sc.horizon.dt();
    let chord = uav.end - uav.start;
    let dist = chord.norm();
    if dist > uav.v_max * t_total {
        return Err(Error::InfeasibleInit(format!(
            "endpoint {dist:.1} m away needs {:.1} m/s > v_max = {}",
            dist / t_total,
            uav.v_max
        )));
    }

    let velocities = if dist / t_total >= uav.v_min * (1.0 + 1e-3) {
        vec![chord * (1.0 / t_total); n]
    } else {
        detour_velocities(sc, side)?
    };

    let mut a = vec![Vec2::ZERO; n];
    for k in 1..n {
        a[k] = (velocities[k] - velocities[k - 1]) * (1.0 / dt);
    }
    let q = integrate(uav.start, &velocities, &a, dt);
    let traj = Trajectory::new(q, velocities, a)?;

    let worst_a = traj.a.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let (lo, hi) = traj.speeds().fold((f64::INFINITY, 0.0f64), |(lo, hi), s| (lo.min(s), hi.max(s)));
    if worst_a > uav.a_max || lo < uav.v_min || hi > uav.v_max {
        return Err(Error::InfeasibleInit(format!(
            "initial path violates limits (max |a| = {worst_a:.3}, speed range [{lo:.3}, {hi:.3}])"
        )));
    }
    Ok(traj)
}

/// Positions implied by the discrete kinematics starting from `start`.
pub fn integrate(start: Vec2, v: &[Vec2], a: &[Vec2], dt: f64) -> Vec<Vec2> {
    let mut q = Vec::with_capacity(v.len());
    let mut prev = start;
    for (vk, ak) in v.iter().zip(a) {
        prev = prev + *vk * dt + *ak * (0.5 * dt * dt);
        q.push(prev);
    }
    q
}

fn detour_velocities(sc: &Scenario, side: DetourSide) -> Result<Vec<Vec2>> {
    let uav = &sc.uav;
    let n = sc.horizon.slots();
    let dt = sc.horizon.dt();
    let t_total = sc.horizon.duration();
    let speed = DETOUR_SPEED_FACTOR * uav.v_min;
    if speed > uav.v_max {
        return Err(Error::InfeasibleInit(format!("detour speed {speed} exceeds v_max {}", uav.v_max)));
    }
    let chord = uav.end - uav.start;
    let dist = chord.norm();
    let u = if dist > 0.0 { chord * (1.0 / dist) } else { Vec2::new(1.0, 0.0) };
    let left = u.rotate(PI / 2.0);
    let sign = match side {
        DetourSide::Left => 1.0,
        DetourSide::Right => -1.0,
        DetourSide::TowardSource => {
            let c = u.cross(sc.source.xy() - uav.start);
            if c > 0.0 {
                1.0
            } else if c < 0.0 {
                -1.0
            } else if left.y >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
    };

    let profile = |amp: f64| -> Vec<Vec2> {
        (0..n)
            .map(|k| {
                let x = (k as f64 + 0.5) / n as f64;
                u.rotate(sign * amp * (PI * x).cos()) * speed
            })
            .collect()
    };
    // Net displacement of the discrete kinematics for a velocity sequence
    // with a[0] = 0 and a[k] = (v[k] - v[k-1]) / dt.
    let displacement = |v: &[Vec2]| -> Vec2 {
        let mut w = v.iter().fold(Vec2::ZERO, |acc, x| acc + *x) * dt;
        w += (v[n - 1] - v[0]) * (0.5 * dt);
        w
    };
    let along = |amp: f64| displacement(&profile(amp)).dot(u);

    let (mut lo, mut hi) = (0.0, 3.8);
    if !(along(lo) > dist && along(hi) < dist) {
        return Err(Error::InfeasibleInit(format!("no closing detour for {n} slots over {dist:.1} m")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if along(mid) > dist {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = profile(0.5 * (lo + hi));
    let closure = displacement(&v) - chord;
    let offset = closure * (-1.0 / t_total);
    for vk in &mut v {
        *vk += offset;
    }
    Ok(v)
}

/// Slacks that make every reformulation constraint hold with equality.
pub fn slack_init(traj: &Trajectory, sc: &Scenario) -> SlackSet {
    slack_init_with(traj, sc, DistanceForm::Slant)
}

pub fn slack_init_with(traj: &Trajectory, sc: &Scenario, form: DistanceForm) -> SlackSet {
    let h = sc.uav.altitude;
    let ch = &sc.channel;
    let tau = traj.speeds().collect();
    let inv_signal =
        traj.q.iter().map(|q| 1.0 / (ch.source_power * channel_gain(*q, h, sc.source, ch.beta0))).collect();
    let dist_sq: Vec<Vec<f64>> =
        sc.jammers.iter().map(|j| traj.q.iter().map(|q| form.distance_sq(*q, j.node.xy(), h)).collect()).collect();
    let interference = (0..traj.len())
        .map(|k| sc.jammers.iter().zip(&dist_sq).map(|(j, d)| j.power * ch.beta0 / d[k]).sum::<f64>() + ch.noise_power)
        .collect();
    SlackSet { tau, inv_signal, interference, dist_sq }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{interference_plus_noise, kinematic_residuals};
    use crate::scenario::{default_scenario, preset_case};
    use approx::assert_relative_eq;

    #[test]
    fn case1_is_a_straight_line() {
        let sc = preset_case(1).unwrap();
        let t = line_init(&sc).unwrap();
        for v in &t.v {
            assert_relative_eq!(v.x, 1000.0 / 150.0, max_relative = 1e-12);
            assert_eq!(v.y, 0.0);
        }
        assert!(t.a.iter().all(|a| *a == Vec2::ZERO));
        assert!(kinematic_residuals(&t, &sc.uav, &sc.horizon).max() <= 1e-9);
    }

    #[test]
    fn closed_loop_detour() {
        let mut sc = default_scenario().with_duration(100.0).unwrap();
        sc.uav.end = sc.uav.start;
        let t = line_init(&sc).unwrap();
        let rep = kinematic_residuals(&t, &sc.uav, &sc.horizon);
        assert!(rep.max() <= 1e-9, "{rep:?}");
        let length: f64 = t.speeds().map(|s| s * sc.horizon.dt()).sum();
        // The closing offset perturbs the nominal 1.1·v_min speed slightly.
        assert_relative_eq!(length, 330.0, max_relative = 1e-2);
        for s in t.speeds() {
            assert_relative_eq!(s, 3.3, max_relative = 1e-2);
        }
        // Source is at +y, so the loop should bulge that way.
        assert!(t.q.iter().map(|q| q.y).fold(f64::MIN, f64::max) > 50.0);
    }

    #[test]
    fn slow_chord_uses_detour_on_requested_side() {
        let mut sc = default_scenario().with_duration(100.0).unwrap();
        sc.uav.start = Vec2::new(-50.0, 0.0);
        sc.uav.end = Vec2::new(50.0, 0.0);
        for (side, sign) in [(DetourSide::Left, 1.0), (DetourSide::Right, -1.0)] {
            let t = line_init_with(&sc, side).unwrap();
            assert!(kinematic_residuals(&t, &sc.uav, &sc.horizon).max() <= 1e-9);
            let mid = t.q[t.len() / 2];
            assert!(sign * mid.y > 10.0, "{side:?}: {mid:?}");
        }
    }

    #[test]
    fn unreachable_endpoint_errors() {
        let mut sc = default_scenario();
        sc.uav.end = Vec2::new(19500.0, 0.0);
        assert!(matches!(line_init(&sc), Err(Error::InfeasibleInit(_))));
    }

    #[test]
    fn too_few_slots_to_turn_errors() {
        let mut sc = default_scenario();
        sc.horizon = crate::scenario::Horizon::from_slots(2, 0.5).unwrap();
        sc.uav.end = sc.uav.start;
        assert!(matches!(line_init(&sc), Err(Error::InfeasibleInit(_))));
    }

    #[test]
    fn slacks_are_tight() {
        let sc = preset_case(1).unwrap();
        let mut t = line_init(&sc).unwrap();
        t.q[0] = Vec2::new(0.0, 1000.0);
        let s = slack_init(&t, &sc);
        assert_relative_eq!(s.inv_signal[0], 1e11, max_relative = 1e-12);
        assert_relative_eq!(s.interference[0], 1.002688e-13, max_relative = 1e-6);
        assert_relative_eq!(s.interference[0], interference_plus_noise(t.q[0], &sc), max_relative = 1e-14);
        assert_relative_eq!(s.tau[3], t.v[3].norm());
        assert_relative_eq!(s.dist_sq[0][0], 1000.0f64.powi(2) + 100.0f64.powi(2));

        let quiet = slack_init(&t, &sc.without_jammers());
        assert!(quiet.interference.iter().all(|&i| i == sc.channel.noise_power));
        assert!(quiet.dist_sq.is_empty());
    }
}
