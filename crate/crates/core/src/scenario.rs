//! Scenario description: ground nodes, channel and propulsion constants, UAV
//! limits and the time grid. Everything here is in SI units; dB and dBm only
//! appear in the file format and are converted on load.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;

/// Ground node at altitude zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundNode {
    pub x: f64,
    pub y: f64,
}

impl GroundNode {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn xy(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jammer {
    pub node: GroundNode,
    /// Transmit power in watts.
    pub power: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    /// Hz.
    pub bandwidth: f64,
    /// Linear channel power gain at the 1 m reference distance.
    pub beta0: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
    /// Source transmit power in watts.
    pub source_power: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyParams {
    /// Parasitic-power constant, W·s³/m³.
    pub c1: f64,
    /// Induced-power constant, W·m/s.
    pub c2: f64,
    /// Gravitational acceleration, m/s².
    pub gravity: f64,
    /// UAV mass in kilograms (only enters the kinetic-energy change).
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UavParams {
    pub altitude: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub a_max: f64,
    pub start: Vec2,
    pub end: Vec2,
}

/// Uniform time grid with `duration == slots * dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Horizon {
    duration: f64,
    slots: usize,
    dt: f64,
}

impl Horizon {
    /// Grid with slot length `dt` covering `duration`; the duration must be an
    /// integer number of slots.
    pub fn from_duration(duration: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::Validation(format!("horizon requires T > 0 and dt > 0 (got T={duration}, dt={dt})")));
        }
        let slots = (duration / dt).round();
        Self::new(duration, slots as usize, dt)
    }

    pub fn from_slots(slots: usize, dt: f64) -> Result<Self> {
        Self::new(slots as f64 * dt, slots, dt)
    }

    pub fn new(duration: f64, slots: usize, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Validation(format!("horizon dt must be > 0 (got {dt})")));
        }
        if slots < 2 {
            return Err(Error::Validation(format!("horizon needs N >= 2 slots (got {slots})")));
        }
        let implied = slots as f64 * dt;
        if (implied - duration).abs() > 1e-9 * duration.abs().max(1.0) {
            return Err(Error::Validation(format!("horizon requires T = N*dt (T={duration}, N={slots}, dt={dt})")));
        }
        Ok(Self { duration, slots, dt })
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub source: GroundNode,
    pub jammers: Vec<Jammer>,
    pub channel: ChannelParams,
    pub energy: EnergyParams,
    pub uav: UavParams,
    pub horizon: Horizon,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub const DEFAULT_DT: f64 = 0.5;
pub const DEFAULT_BANDWIDTH: f64 = 1e5;
pub const DEFAULT_NOISE_DBM: f64 = -119.0;
pub const DEFAULT_TX_POWER: f64 = 0.1;
pub const DEFAULT_C1: f64 = 9.26e-4;
pub const DEFAULT_C2: f64 = 2250.0;
pub const DEFAULT_ALTITUDE: f64 = 100.0;
pub const DEFAULT_V_MAX: f64 = 100.0;
pub const DEFAULT_V_MIN: f64 = 3.0;
pub const DEFAULT_A_MAX: f64 = 5.0;
pub const DEFAULT_BETA0_DB: f64 = -60.0;
pub const DEFAULT_GRAVITY: f64 = 9.8;
pub const DEFAULT_MASS: f64 = 0.0;
pub const DEFAULT_DURATION: f64 = 150.0;

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            bandwidth: DEFAULT_BANDWIDTH,
            beta0: db_to_linear(DEFAULT_BETA0_DB),
            noise_power: dbm_to_watts(DEFAULT_NOISE_DBM),
            source_power: DEFAULT_TX_POWER,
        }
    }
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self { c1: DEFAULT_C1, c2: DEFAULT_C2, gravity: DEFAULT_GRAVITY, mass: DEFAULT_MASS }
    }
}

impl Default for UavParams {
    fn default() -> Self {
        Self {
            altitude: DEFAULT_ALTITUDE,
            v_max: DEFAULT_V_MAX,
            v_min: DEFAULT_V_MIN,
            a_max: DEFAULT_A_MAX,
            start: Vec2::new(-500.0, 0.0),
            end: Vec2::new(500.0, 0.0),
        }
    }
}

/// The reference configuration: case 1 (one jammer at the origin, T = 150 s).
pub fn default_scenario() -> Scenario {
    Scenario {
        source: GroundNode::new(0.0, 1000.0),
        jammers: vec![Jammer { node: GroundNode::new(0.0, 0.0), power: DEFAULT_TX_POWER }],
        channel: ChannelParams::default(),
        energy: EnergyParams::default(),
        uav: UavParams::default(),
        horizon: Horizon::from_duration(DEFAULT_DURATION, DEFAULT_DT).expect("default horizon is valid"),
    }
}

/// Jammer layouts and horizons of the four reference cases.
pub fn preset_case(id: u32) -> Result<Scenario> {
    let jammer = |x, y| Jammer { node: GroundNode::new(x, y), power: DEFAULT_TX_POWER };
    let (jammers, duration) = match id {
        1 => (vec![jammer(0.0, 0.0)], 150.0),
        2 => (vec![jammer(0.0, 0.0)], 200.0),
        3 => (vec![jammer(0.0, 0.0), jammer(500.0, 500.0)], 200.0),
        4 => (vec![jammer(0.0, 0.0), jammer(500.0, 500.0), jammer(300.0, 800.0)], 200.0),
        other => return Err(Error::Unknown { what: "case", value: other.to_string() }),
    };
    let mut sc = default_scenario();
    sc.jammers = jammers;
    sc.horizon = Horizon::from_duration(duration, DEFAULT_DT)?;
    Ok(sc)
}

impl Scenario {
    pub fn with_duration(mut self, duration: f64) -> Result<Self> {
        self.horizon = Horizon::from_duration(duration, self.horizon.dt())?;
        self.validate()?;
        Ok(self)
    }

    pub fn without_jammers(&self) -> Scenario {
        Scenario { jammers: Vec::new(), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        let finite = |p: Vec2| p.is_finite();
        if !finite(self.source.xy()) {
            return bad("source coordinates must be finite".into());
        }
        for (i, j) in self.jammers.iter().enumerate() {
            if !finite(j.node.xy()) {
                return bad(format!("jammer {i} coordinates must be finite"));
            }
            if !(j.power > 0.0 && j.power.is_finite()) {
                return bad(format!("jammer {i} power must be > 0 (got {})", j.power));
            }
        }
        let c = &self.channel;
        for (name, v) in [
            ("bandwidth", c.bandwidth),
            ("beta0", c.beta0),
            ("noise_power", c.noise_power),
            ("source_power", c.source_power),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("channel {name} must be > 0 (got {v})"));
            }
        }
        let e = &self.energy;
        for (name, v) in [("c1", e.c1), ("c2", e.c2), ("gravity", e.gravity)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("energy {name} must be > 0 (got {v})"));
            }
        }
        if !(e.mass >= 0.0 && e.mass.is_finite()) {
            return bad(format!("energy mass must be >= 0 (got {})", e.mass));
        }
        let u = &self.uav;
        if !(u.altitude > 0.0 && u.altitude.is_finite()) {
            return bad(format!("uav altitude must be > 0 (got {})", u.altitude));
        }
        if !(u.v_min > 0.0 && u.v_min < u.v_max && u.v_max.is_finite()) {
            return bad(format!(
                "uav speeds must satisfy 0 < v_min < v_max (got v_min={}, v_max={})",
                u.v_min, u.v_max
            ));
        }
        if !(u.a_max > 0.0 && u.a_max.is_finite()) {
            return bad(format!("uav a_max must be > 0 (got {})", u.a_max));
        }
        if !finite(u.start) || !finite(u.end) {
            return bad("uav start/end must be finite".into());
        }
        // Re-check the horizon in case fields were constructed by hand.
        Horizon::new(self.horizon.duration, self.horizon.slots, self.horizon.dt)?;
        let dist = (u.end - u.start).norm();
        let reach = u.v_max * self.horizon.duration;
        if dist > reach {
            return bad(format!("endpoint unreachable: |end - start| = {dist} m exceeds v_max*T = {reach} m"));
        }
        Ok(())
    }
}

/// Algorithm settings carried by the `solver` section of a scenario file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    /// Outer-loop threshold on the fractional objective increase.
    pub outer_tolerance: f64,
    /// Inner-loop threshold on |F(lambda)| in rate-sum units.
    pub inner_tolerance: f64,
    /// If set, the inner loop stops on |F| / sum(R) below this instead.
    pub inner_relative_tolerance: Option<f64>,
    pub max_outer_iterations: usize,
    pub max_inner_iterations: usize,
    pub kkt_tolerance: f64,
    pub max_newton_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            outer_tolerance: 1e-3,
            inner_tolerance: 10.0,
            inner_relative_tolerance: None,
            max_outer_iterations: 50,
            max_inner_iterations: 30,
            kkt_tolerance: 1e-8,
            max_newton_iterations: 200,
        }
    }
}

/// A scenario together with the solver section of its file.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioDocument {
    pub scenario: Scenario,
    pub solver: SolverSettings,
}

// ---- file format -------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WattsForm {
    watts: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbmForm {
    dbm: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PowerSpec {
    Plain(f64),
    Watts(WattsForm),
    Dbm(DbmForm),
}

impl PowerSpec {
    fn watts(&self) -> f64 {
        match self {
            PowerSpec::Plain(w) | PowerSpec::Watts(WattsForm { watts: w }) => *w,
            PowerSpec::Dbm(DbmForm { dbm }) => dbm_to_watts(*dbm),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearForm {
    linear: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbForm {
    db: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GainSpec {
    Plain(f64),
    Linear(LinearForm),
    Db(DbForm),
}

impl GainSpec {
    fn linear(&self) -> f64 {
        match self {
            GainSpec::Plain(g) | GainSpec::Linear(LinearForm { linear: g }) => *g,
            GainSpec::Db(DbForm { db }) => db_to_linear(*db),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    x: Option<f64>,
    y: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJammer {
    x: f64,
    y: f64,
    power: Option<PowerSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    bandwidth: Option<f64>,
    beta0: Option<GainSpec>,
    noise_power: Option<PowerSpec>,
    source_power: Option<PowerSpec>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnergy {
    c1: Option<f64>,
    c2: Option<f64>,
    gravity: Option<f64>,
    mass: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUav {
    altitude: Option<f64>,
    v_max: Option<f64>,
    v_min: Option<f64>,
    a_max: Option<f64>,
    start: Option<RawPoint>,
    end: Option<RawPoint>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHorizon {
    #[serde(rename = "T")]
    duration: Option<f64>,
    dt: Option<f64>,
    #[serde(rename = "N")]
    slots: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    source: Option<RawPoint>,
    jammers: Option<Vec<RawJammer>>,
    channel: Option<RawChannel>,
    energy: Option<RawEnergy>,
    uav: Option<RawUav>,
    horizon: Option<RawHorizon>,
    solver: Option<SolverSettings>,
}

fn point_or(raw: Option<RawPoint>, default: Vec2) -> Vec2 {
    let raw = raw.unwrap_or_default();
    Vec2::new(raw.x.unwrap_or(default.x), raw.y.unwrap_or(default.y))
}

impl RawDocument {
    fn resolve(self) -> Result<ScenarioDocument> {
        let base = default_scenario();
        let source = point_or(self.source, base.source.xy());
        let jammers = match self.jammers {
            None => base.jammers.clone(),
            Some(list) => list
                .into_iter()
                .map(|j| Jammer {
                    node: GroundNode::new(j.x, j.y),
                    power: j.power.map_or(DEFAULT_TX_POWER, |p| p.watts()),
                })
                .collect(),
        };
        let ch = self.channel.unwrap_or_default();
        let channel = ChannelParams {
            bandwidth: ch.bandwidth.unwrap_or(base.channel.bandwidth),
            beta0: ch.beta0.map_or(base.channel.beta0, |g| g.linear()),
            noise_power: ch.noise_power.map_or(base.channel.noise_power, |p| p.watts()),
            source_power: ch.source_power.map_or(base.channel.source_power, |p| p.watts()),
        };
        let en = self.energy.unwrap_or_default();
        let energy = EnergyParams {
            c1: en.c1.unwrap_or(base.energy.c1),
            c2: en.c2.unwrap_or(base.energy.c2),
            gravity: en.gravity.unwrap_or(base.energy.gravity),
            mass: en.mass.unwrap_or(base.energy.mass),
        };
        let u = self.uav.unwrap_or_default();
        let uav = UavParams {
            altitude: u.altitude.unwrap_or(base.uav.altitude),
            v_max: u.v_max.unwrap_or(base.uav.v_max),
            v_min: u.v_min.unwrap_or(base.uav.v_min),
            a_max: u.a_max.unwrap_or(base.uav.a_max),
            start: point_or(u.start, base.uav.start),
            end: point_or(u.end, base.uav.end),
        };
        let h = self.horizon.unwrap_or_default();
        let dt = h.dt.unwrap_or(DEFAULT_DT);
        let horizon = match (h.duration, h.slots) {
            (Some(t), Some(n)) => Horizon::new(t, n, dt)?,
            (Some(t), None) => Horizon::from_duration(t, dt)?,
            (None, Some(n)) => Horizon::from_slots(n, dt)?,
            (None, None) => Horizon::from_duration(DEFAULT_DURATION, dt)?,
        };
        let scenario = Scenario { source: GroundNode::new(source.x, source.y), jammers, channel, energy, uav, horizon };
        scenario.validate()?;
        let solver = self.solver.unwrap_or_default();
        validate_solver(&solver)?;
        Ok(ScenarioDocument { scenario, solver })
    }
}

fn validate_solver(s: &SolverSettings) -> Result<()> {
    let positive = |v: f64| v > 0.0 && v.is_finite();
    if !positive(s.outer_tolerance) || !positive(s.inner_tolerance) {
        return Err(Error::Validation("solver tolerances must be > 0".into()));
    }
    if let Some(r) = s.inner_relative_tolerance {
        if !positive(r) {
            return Err(Error::Validation("solver inner_relative_tolerance must be > 0".into()));
        }
    }
    if !positive(s.kkt_tolerance) {
        return Err(Error::Validation("solver kkt_tolerance must be > 0".into()));
    }
    if s.max_outer_iterations == 0 || s.max_inner_iterations == 0 || s.max_newton_iterations == 0 {
        return Err(Error::Validation("solver iteration limits must be >= 1".into()));
    }
    Ok(())
}

/// Parses a scenario document from JSON text. Missing fields take defaults.
pub fn parse_document(text: &str) -> Result<ScenarioDocument> {
    let raw: RawDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    raw.resolve()
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    parse_document(text).map(|d| d.scenario)
}

pub fn load_document(path: impl AsRef<Path>) -> Result<ScenarioDocument> {
    parse_document(&fs::read_to_string(path)?)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    load_document(path).map(|d| d.scenario)
}

/// Serialises a document in canonical SI form (watts, linear gains).
pub fn document_to_json(doc: &ScenarioDocument) -> String {
    let sc = &doc.scenario;
    let point = |p: Vec2| serde_json::json!({ "x": p.x, "y": p.y });
    let value = serde_json::json!({
        "source": point(sc.source.xy()),
        "jammers": sc.jammers.iter().map(|j| serde_json::json!({
            "x": j.node.x,
            "y": j.node.y,
            "power": { "watts": j.power },
        })).collect::<Vec<_>>(),
        "channel": {
            "bandwidth": sc.channel.bandwidth,
            "beta0": { "linear": sc.channel.beta0 },
            "noise_power": { "watts": sc.channel.noise_power },
            "source_power": { "watts": sc.channel.source_power },
        },
        "energy": {
            "c1": sc.energy.c1,
            "c2": sc.energy.c2,
            "gravity": sc.energy.gravity,
            "mass": sc.energy.mass,
        },
        "uav": {
            "altitude": sc.uav.altitude,
            "v_max": sc.uav.v_max,
            "v_min": sc.uav.v_min,
            "a_max": sc.uav.a_max,
            "start": point(sc.uav.start),
            "end": point(sc.uav.end),
        },
        "horizon": {
            "T": sc.horizon.duration(),
            "dt": sc.horizon.dt(),
            "N": sc.horizon.slots(),
        },
        "solver": doc.solver,
    });
    let mut text = serde_json::to_string_pretty(&value).expect("json values serialise");
    text.push('\n');
    text
}

pub fn save_document(doc: &ScenarioDocument, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, document_to_json(doc))?;
    Ok(())
}

pub fn save_scenario(sc: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    save_document(&ScenarioDocument { scenario: sc.clone(), solver: SolverSettings::default() }, path)
}
