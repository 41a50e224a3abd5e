//! Seeded instance generator.
//!
//! Biosensors and sinks sit at fixed anatomical positions; candidate relays
//! are sampled uniformly over the body surface outside the exclusion zones
//! (head, hands, feet). Traffic is drawn once per (biosensor, sink) pair and
//! perturbed per scenario; relay placement is resampled until every commodity
//! can reach its sink, so generation either yields a valid instance or fails
//! loudly after a bounded number of attempts.

use super::{
    build_arcs, BanInstance, EnergyParams, InstanceError, InstanceMeta, Layout, Point, Relay,
    Scenario, DEFAULT_PATHLOSS,
};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Torso-frame positions (metres) for up to 16 biosensors, ordered so that a
/// prefix of any length is anatomically spread out.
const BIOSENSOR_TABLE: [(f64, f64); 16] = [
    (0.20, 1.30),
    (0.15, 0.15),
    (0.43, 1.25),
    (0.04, 1.08),
    (0.30, 1.20),
    (0.35, 0.15),
    (0.07, 1.25),
    (0.46, 1.08),
    (0.25, 1.50),
    (0.10, 1.45),
    (0.40, 1.45),
    (0.25, 1.05),
    (0.15, 0.70),
    (0.35, 0.70),
    (0.30, 1.30),
    (0.20, 1.20),
];

/// Waist-level sink positions for up to 4 sinks.
const SINK_TABLE: [(f64, f64); 4] = [(0.18, 0.62), (0.32, 0.62), (0.25, 0.45), (0.25, 0.75)];

/// Rectangular region of the body surface where nodes may not be placed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    pub min: Point,
    pub max: Point,
}

impl Zone {
    fn contains(&self, p: &Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

/// The sampling domain: a body-sized rectangle minus exclusion zones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BodyGeometry {
    pub width: f64,
    pub height: f64,
    pub exclusions: Vec<Zone>,
}

impl Default for BodyGeometry {
    fn default() -> Self {
        let zone = |name: &str, x0: f64, y0: f64, x1: f64, y1: f64| Zone {
            name: name.to_string(),
            min: Point::new(x0, y0),
            max: Point::new(x1, y1),
        };
        BodyGeometry {
            width: 0.5,
            height: 1.8,
            exclusions: vec![
                zone("head", 0.15, 1.55, 0.35, 1.8),
                zone("left_hand", 0.0, 0.85, 0.06, 1.05),
                zone("right_hand", 0.44, 0.85, 0.5, 1.05),
                zone("feet", 0.0, 0.0, 0.5, 0.1),
            ],
        }
    }
}

impl BodyGeometry {
    fn admits(&self, p: &Point) -> bool {
        p.x >= 0.0
            && p.x <= self.width
            && p.y >= 0.0
            && p.y <= self.height
            && !self.exclusions.iter().any(|z| z.contains(p))
    }
}

/// All generator knobs. Deserialization fills omitted fields from the default
/// profile, so profile files only need to list overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorProfile {
    pub biosensors: usize,
    pub sinks: usize,
    pub relays: usize,
    pub scenarios: usize,
    pub body: BodyGeometry,
    pub biosensor_range: f64,
    pub relay_range: f64,
    /// Inclusive-exclusive bounds for nominal per-commodity rates, bit/s.
    pub nominal_rate: (f64, f64),
    /// Per-scenario rates are nominal times a factor in [1-deviation, 1+deviation].
    pub deviation: f64,
    /// Relay capacity as a multiple of the largest scenario rate.
    pub capacity_factor: f64,
    /// Maximum number of relays that may be activated; defaults to relays/10
    /// (at least 1).
    pub relay_budget: Option<u32>,
    pub energy: EnergyParams,
    pub pathloss: f64,
    /// Relay placements giving a disconnected instance are resampled up to
    /// this many times.
    pub max_retries: u32,
}

impl Default for GeneratorProfile {
    fn default() -> Self {
        GeneratorProfile {
            biosensors: 16,
            sinks: 2,
            relays: 400,
            scenarios: 5,
            body: BodyGeometry::default(),
            biosensor_range: 0.45,
            relay_range: 0.45,
            nominal_rate: (1000.0, 10000.0),
            deviation: 0.5,
            capacity_factor: 10.0,
            relay_budget: None,
            energy: EnergyParams::default(),
            pathloss: DEFAULT_PATHLOSS,
            max_retries: 50,
        }
    }
}

impl GeneratorProfile {
    /// Oracle-scale profile: small enough for exhaustive enumeration.
    pub fn small() -> Self {
        GeneratorProfile {
            biosensors: 3,
            sinks: 1,
            relays: 6,
            scenarios: 2,
            capacity_factor: 4.0,
            relay_budget: Some(3),
            ..GeneratorProfile::default()
        }
    }

    /// Mid-scale profile used for solver comparisons.
    pub fn mid() -> Self {
        GeneratorProfile {
            biosensors: 16,
            sinks: 2,
            relays: 40,
            scenarios: 5,
            biosensor_range: 0.4,
            relay_range: 0.35,
            capacity_factor: 4.0,
            relay_budget: Some(16),
            ..GeneratorProfile::default()
        }
    }

    fn validate(&self) -> Result<(), GenerateError> {
        let bad = |what: &str| Err(GenerateError::BadProfile { what: what.to_string() });
        if self.biosensors == 0 || self.biosensors > BIOSENSOR_TABLE.len() {
            return Err(GenerateError::ProfileTooLarge {
                what: "biosensors".to_string(),
                max: BIOSENSOR_TABLE.len(),
            });
        }
        if self.sinks == 0 || self.sinks > SINK_TABLE.len() {
            return Err(GenerateError::ProfileTooLarge {
                what: "sinks".to_string(),
                max: SINK_TABLE.len(),
            });
        }
        if self.scenarios == 0 {
            return bad("scenarios must be positive");
        }
        if !(self.biosensor_range > 0.0 && self.relay_range > 0.0) {
            return bad("ranges must be positive");
        }
        let (lo, hi) = self.nominal_rate;
        if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi) {
            return bad("nominal_rate bounds must satisfy 0 < lo <= hi");
        }
        if !(0.0..1.0).contains(&self.deviation) {
            return bad("deviation must lie in [0, 1)");
        }
        if !(self.capacity_factor > 0.0 && self.capacity_factor.is_finite()) {
            return bad("capacity_factor must be positive");
        }
        if self.max_retries == 0 {
            return bad("max_retries must be positive");
        }
        if !(self.body.width > 0.0 && self.body.height > 0.0) {
            return bad("body dimensions must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("profile requests more {what} than the layout table provides (max {max})")]
    ProfileTooLarge { what: String, max: usize },
    #[error("invalid profile: {what}")]
    BadProfile { what: String },
    #[error("could not place a relay outside the exclusion zones")]
    PlacementFailed,
    #[error("no connected relay placement found in {attempts} attempts")]
    Unconnectable { attempts: u32 },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

/// Deterministically generates an instance. Equal (seed, profile) pairs give
/// equal instances; unconnected relay placements are resampled from the same
/// stream, so retries stay reproducible.
pub fn generate_instance(seed: u64, profile: &GeneratorProfile) -> Result<BanInstance, GenerateError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let biosensors: Vec<Point> = BIOSENSOR_TABLE[..profile.biosensors]
        .iter()
        .map(|&(x, y)| Point::new(x, y))
        .collect();
    let sinks: Vec<Point> = SINK_TABLE[..profile.sinks]
        .iter()
        .map(|&(x, y)| Point::new(x, y))
        .collect();

    let (lo, hi) = profile.nominal_rate;
    let mut nominal = vec![vec![0.0; profile.sinks]; profile.biosensors];
    for row in nominal.iter_mut() {
        for d in row.iter_mut() {
            *d = if lo == hi { lo } else { rng.gen_range(lo..hi) };
        }
    }
    let mut scenarios = Vec::with_capacity(profile.scenarios);
    for id in 0..profile.scenarios {
        let mut demand = vec![vec![0.0; profile.sinks]; profile.biosensors];
        for (b, row) in demand.iter_mut().enumerate() {
            for (s, d) in row.iter_mut().enumerate() {
                let factor = if profile.deviation == 0.0 {
                    1.0
                } else {
                    rng.gen_range(1.0 - profile.deviation..1.0 + profile.deviation)
                };
                *d = nominal[b][s] * factor;
            }
        }
        scenarios.push(Scenario { id, demand });
    }
    let peak_rate = scenarios
        .iter()
        .flat_map(|sc| sc.demand.iter().flatten())
        .fold(0.0f64, |acc, &d| acc.max(d));
    let capacity = profile.capacity_factor * peak_rate;
    let relay_budget = profile
        .relay_budget
        .unwrap_or_else(|| ((profile.relays / 10).max(1)) as u32);

    let mut attempts = 0;
    loop {
        attempts += 1;
        let mut relay_points = Vec::with_capacity(profile.relays);
        for _ in 0..profile.relays {
            let mut placed = false;
            for _ in 0..10_000 {
                let p = Point::new(
                    rng.gen_range(0.0..profile.body.width),
                    rng.gen_range(0.0..profile.body.height),
                );
                if profile.body.admits(&p) {
                    relay_points.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(GenerateError::PlacementFailed);
            }
        }
        let layout = Layout {
            biosensors: biosensors.clone(),
            relays: relay_points.clone(),
            sinks: sinks.clone(),
            biosensor_range: profile.biosensor_range,
            relay_range: profile.relay_range,
            pathloss: profile.pathloss,
            energy: profile.energy.clone(),
        };
        let arcs = build_arcs(&layout).map_err(GenerateError::Instance)?;
        let relays = relay_points
            .into_iter()
            .map(|position| Relay { position, capacity })
            .collect();
        match BanInstance::new(
            biosensors.clone(),
            relays,
            sinks.clone(),
            arcs,
            scenarios.clone(),
            relay_budget,
            profile.energy.clone(),
            Some(InstanceMeta { seed, profile: profile.clone() }),
        ) {
            Ok(inst) => return Ok(inst),
            Err(InstanceError::Disconnected { .. }) if attempts < profile.max_retries => continue,
            Err(InstanceError::Disconnected { .. }) => {
                return Err(GenerateError::Unconnectable { attempts })
            }
            Err(e) => return Err(GenerateError::Instance(e)),
        }
    }
}
