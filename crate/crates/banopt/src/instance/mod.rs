//! Instance data model: nodes on a body surface, directed communication arcs,
//! per-scenario traffic matrices, and the radio energy model.

pub mod generate;
pub mod io;

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use thiserror::Error;

pub use generate::{generate_instance, BodyGeometry, GeneratorProfile, Zone};
pub use io::{load_instance, save_instance};

/// Transmitter circuitry draw, J per bit.
pub const DEFAULT_TX_CIRCUIT: f64 = 16.7e-9;
/// Receiver circuitry draw, J per bit.
pub const DEFAULT_RX_CIRCUIT: f64 = 36.1e-9;
/// Transmitter amplifier coefficient, J per bit per m^pathloss.
pub const DEFAULT_TX_AMP: f64 = 1.97e-9;
/// Path-loss exponent for on-body links.
pub const DEFAULT_PATHLOSS: f64 = 3.38;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Biosensor,
    Relay,
    Sink,
}

/// A node reference: kind plus index within that kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId {
    pub kind: NodeKind,
    pub index: usize,
}

impl NodeId {
    pub fn biosensor(index: usize) -> Self {
        NodeId { kind: NodeKind::Biosensor, index }
    }

    pub fn relay(index: usize) -> Self {
        NodeId { kind: NodeKind::Relay, index }
    }

    pub fn sink(index: usize) -> Self {
        NodeId { kind: NodeKind::Sink, index }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.kind {
            NodeKind::Biosensor => "b",
            NodeKind::Relay => "r",
            NodeKind::Sink => "s",
        };
        write!(f, "{}{}", tag, self.index)
    }
}

/// The four admissible arc shapes. Biosensors never receive, sinks never send,
/// and relay-to-biosensor links do not exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArcClass {
    BioToSink,
    BioToRelay,
    RelayToRelay,
    RelayToSink,
}

/// A directed communication link with its precomputed unit energy (J/bit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    pub distance: f64,
    pub pathloss: f64,
    pub energy: f64,
    pub class: ArcClass,
}

/// Candidate relay: a position and the maximum total outgoing rate it can
/// sustain when activated (bit/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relay {
    pub position: Point,
    pub capacity: f64,
}

/// One traffic scenario: a dense biosensor-by-sink rate matrix (bit/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub demand: Vec<Vec<f64>>,
}

impl Scenario {
    pub fn demand(&self, biosensor: usize, sink: usize) -> f64 {
        self.demand[biosensor][sink]
    }
}

/// Amplifier coefficient: one value for all links, or a table keyed by
/// path-loss exponent for media with heterogeneous propagation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxAmp {
    Uniform(f64),
    ByExponent(Vec<AmpEntry>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpEntry {
    pub pathloss: f64,
    pub amp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    pub tx_circuit: f64,
    pub rx_circuit: f64,
    pub tx_amp: TxAmp,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            tx_circuit: DEFAULT_TX_CIRCUIT,
            rx_circuit: DEFAULT_RX_CIRCUIT,
            tx_amp: TxAmp::Uniform(DEFAULT_TX_AMP),
        }
    }
}

impl EnergyParams {
    /// Amplifier coefficient applicable to a link with the given exponent.
    pub fn amp_for(&self, pathloss: f64) -> Result<f64, InstanceError> {
        match &self.tx_amp {
            TxAmp::Uniform(a) => Ok(*a),
            TxAmp::ByExponent(entries) => entries
                .iter()
                .find(|e| (e.pathloss - pathloss).abs() <= 1e-9)
                .map(|e| e.amp)
                .ok_or(InstanceError::MissingAmpEntry { pathloss }),
        }
    }

    fn check_finite(&self) -> Result<(), InstanceError> {
        let mut vals = vec![("tx_circuit", self.tx_circuit), ("rx_circuit", self.rx_circuit)];
        match &self.tx_amp {
            TxAmp::Uniform(a) => vals.push(("tx_amp", *a)),
            TxAmp::ByExponent(entries) => {
                for e in entries {
                    vals.push(("tx_amp entry", e.amp));
                    vals.push(("tx_amp exponent", e.pathloss));
                }
            }
        }
        for (what, v) in vals {
            if !v.is_finite() || v < 0.0 {
                return Err(InstanceError::BadParameter {
                    what: what.to_string(),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Per-bit energy of a link: transmitter circuitry plus distance-driven
/// amplifier term plus receiver circuitry.
pub fn energy_coefficient(
    params: &EnergyParams,
    distance: f64,
    pathloss: f64,
) -> Result<f64, InstanceError> {
    params.check_finite()?;
    if !distance.is_finite() || distance < 0.0 {
        return Err(InstanceError::BadParameter {
            what: "distance".to_string(),
            value: distance,
        });
    }
    if !pathloss.is_finite() || pathloss <= 0.0 {
        return Err(InstanceError::BadParameter {
            what: "pathloss".to_string(),
            value: pathloss,
        });
    }
    let amp = params.amp_for(pathloss)?;
    Ok(params.tx_circuit + amp * distance.powf(pathloss) + params.rx_circuit)
}

/// Node positions plus radio ranges: everything needed to lay out the arc set.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub biosensors: Vec<Point>,
    pub relays: Vec<Point>,
    pub sinks: Vec<Point>,
    pub biosensor_range: f64,
    pub relay_range: f64,
    pub pathloss: f64,
    pub energy: EnergyParams,
}

/// Builds every admissible arc whose length is within the tail's radio range.
/// Arcs are emitted grouped by tail (biosensors first, then relays), heads
/// ordered relays-then-sinks by index, so the result is deterministic.
pub fn build_arcs(layout: &Layout) -> Result<Vec<Arc>, InstanceError> {
    let mut arcs = Vec::new();
    let mut push = |tail: NodeId,
                    head: NodeId,
                    tp: &Point,
                    hp: &Point,
                    range: f64,
                    class: ArcClass|
     -> Result<(), InstanceError> {
        let d = tp.distance(hp);
        if d <= range {
            arcs.push(Arc {
                tail,
                head,
                distance: d,
                pathloss: layout.pathloss,
                energy: energy_coefficient(&layout.energy, d, layout.pathloss)?,
                class,
            });
        }
        Ok(())
    };

    for (b, bp) in layout.biosensors.iter().enumerate() {
        for (r, rp) in layout.relays.iter().enumerate() {
            push(NodeId::biosensor(b), NodeId::relay(r), bp, rp, layout.biosensor_range, ArcClass::BioToRelay)?;
        }
        for (s, sp) in layout.sinks.iter().enumerate() {
            push(NodeId::biosensor(b), NodeId::sink(s), bp, sp, layout.biosensor_range, ArcClass::BioToSink)?;
        }
    }
    for (r, rp) in layout.relays.iter().enumerate() {
        for (r2, rp2) in layout.relays.iter().enumerate() {
            if r2 != r {
                push(NodeId::relay(r), NodeId::relay(r2), rp, rp2, layout.relay_range, ArcClass::RelayToRelay)?;
            }
        }
        for (s, sp) in layout.sinks.iter().enumerate() {
            push(NodeId::relay(r), NodeId::sink(s), rp, sp, layout.relay_range, ArcClass::RelayToSink)?;
        }
    }
    Ok(arcs)
}

/// Provenance of a generated instance, carried through save/load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub seed: u64,
    pub profile: GeneratorProfile,
}

/// A validated problem instance. Construct via [`BanInstance::new`], the
/// generator, or the JSON loader; all three enforce the structural invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct BanInstance {
    biosensors: Vec<Point>,
    relays: Vec<Relay>,
    sinks: Vec<Point>,
    arcs: Vec<Arc>,
    scenarios: Vec<Scenario>,
    relay_budget: u32,
    energy: EnergyParams,
    meta: Option<InstanceMeta>,
    // Derived, rebuilt on construction.
    commodities: Vec<(usize, usize)>,
    out_arcs: Vec<Vec<u32>>,
    in_arcs: Vec<Vec<u32>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("parameter {what} has invalid value {value}")]
    BadParameter { what: String, value: f64 },
    #[error("no amplifier entry for path-loss exponent {pathloss}")]
    MissingAmpEntry { pathloss: f64 },
    #[error("instance has no scenarios")]
    EmptyScenarios,
    #[error("scenario {index} has id {id}, expected ids to equal positions")]
    ScenarioIdMismatch { index: usize, id: usize },
    #[error("scenario {scenario} demand matrix is {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    DemandShape { scenario: usize, rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
    #[error("scenario {scenario} demand for biosensor {biosensor}, sink {sink} is {value}")]
    BadDemand { scenario: usize, biosensor: usize, sink: usize, value: f64 },
    #[error("arc {arc} references node {node} out of range")]
    NodeOutOfRange { arc: usize, node: NodeId },
    #[error("arc {arc} ({tail} -> {head}) is not an admissible link shape")]
    BadEndpoints { arc: usize, tail: NodeId, head: NodeId },
    #[error("arc {arc} class {class:?} does not match endpoints {tail} -> {head}")]
    ClassMismatch { arc: usize, class: ArcClass, tail: NodeId, head: NodeId },
    #[error("duplicate arc {tail} -> {head}")]
    DuplicateArc { tail: NodeId, head: NodeId },
    #[error("arc {arc} stores energy {stored} but the energy model gives {expected}")]
    EnergyMismatch { arc: usize, stored: f64, expected: f64 },
    #[error("relay {relay} has invalid capacity {value}")]
    BadCapacity { relay: usize, value: f64 },
    #[error("relay budget must be at least 1")]
    ZeroRelayBudget,
    #[error("no route from biosensor {biosensor} to sink {sink} despite positive demand")]
    Disconnected { biosensor: usize, sink: usize },
}

impl BanInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        biosensors: Vec<Point>,
        relays: Vec<Relay>,
        sinks: Vec<Point>,
        arcs: Vec<Arc>,
        scenarios: Vec<Scenario>,
        relay_budget: u32,
        energy: EnergyParams,
        meta: Option<InstanceMeta>,
    ) -> Result<Self, InstanceError> {
        let mut inst = BanInstance {
            biosensors,
            relays,
            sinks,
            arcs,
            scenarios,
            relay_budget,
            energy,
            meta,
            commodities: Vec::new(),
            out_arcs: Vec::new(),
            in_arcs: Vec::new(),
        };
        inst.validate_and_index()?;
        Ok(inst)
    }

    fn validate_and_index(&mut self) -> Result<(), InstanceError> {
        self.energy.check_finite()?;
        if self.relay_budget == 0 {
            return Err(InstanceError::ZeroRelayBudget);
        }
        for (r, relay) in self.relays.iter().enumerate() {
            if !relay.capacity.is_finite() || relay.capacity < 0.0 {
                return Err(InstanceError::BadCapacity { relay: r, value: relay.capacity });
            }
        }
        if self.scenarios.is_empty() {
            return Err(InstanceError::EmptyScenarios);
        }
        let (nb, ns) = (self.biosensors.len(), self.sinks.len());
        for (i, sc) in self.scenarios.iter().enumerate() {
            if sc.id != i {
                return Err(InstanceError::ScenarioIdMismatch { index: i, id: sc.id });
            }
            let cols = sc.demand.first().map_or(0, Vec::len);
            if sc.demand.len() != nb || sc.demand.iter().any(|row| row.len() != ns) {
                return Err(InstanceError::DemandShape {
                    scenario: i,
                    rows: sc.demand.len(),
                    cols,
                    expected_rows: nb,
                    expected_cols: ns,
                });
            }
            for (b, row) in sc.demand.iter().enumerate() {
                for (s, &d) in row.iter().enumerate() {
                    if !d.is_finite() || d < 0.0 {
                        return Err(InstanceError::BadDemand { scenario: i, biosensor: b, sink: s, value: d });
                    }
                }
            }
        }

        let num_nodes = self.num_nodes();
        let (nb_count, nr_count) = (self.biosensors.len(), self.relays.len());
        let ord = move |node: NodeId| match node.kind {
            NodeKind::Biosensor => node.index,
            NodeKind::Relay => nb_count + node.index,
            NodeKind::Sink => nb_count + nr_count + node.index,
        };
        self.out_arcs = vec![Vec::new(); num_nodes];
        self.in_arcs = vec![Vec::new(); num_nodes];
        let mut seen = HashSet::new();
        for (a, arc) in self.arcs.iter().enumerate() {
            for node in [arc.tail, arc.head] {
                let limit = match node.kind {
                    NodeKind::Biosensor => self.biosensors.len(),
                    NodeKind::Relay => self.relays.len(),
                    NodeKind::Sink => self.sinks.len(),
                };
                if node.index >= limit {
                    return Err(InstanceError::NodeOutOfRange { arc: a, node });
                }
            }
            let class = match (arc.tail.kind, arc.head.kind) {
                (NodeKind::Biosensor, NodeKind::Sink) => ArcClass::BioToSink,
                (NodeKind::Biosensor, NodeKind::Relay) => ArcClass::BioToRelay,
                (NodeKind::Relay, NodeKind::Relay) if arc.tail.index != arc.head.index => ArcClass::RelayToRelay,
                (NodeKind::Relay, NodeKind::Sink) => ArcClass::RelayToSink,
                _ => return Err(InstanceError::BadEndpoints { arc: a, tail: arc.tail, head: arc.head }),
            };
            if class != arc.class {
                return Err(InstanceError::ClassMismatch { arc: a, class: arc.class, tail: arc.tail, head: arc.head });
            }
            if !seen.insert((arc.tail, arc.head)) {
                return Err(InstanceError::DuplicateArc { tail: arc.tail, head: arc.head });
            }
            let expected = energy_coefficient(&self.energy, arc.distance, arc.pathloss)?;
            let scale = expected.abs().max(1e-300);
            if !arc.energy.is_finite() || (arc.energy - expected).abs() / scale > 1e-12 {
                return Err(InstanceError::EnergyMismatch { arc: a, stored: arc.energy, expected });
            }
            self.out_arcs[ord(arc.tail)].push(a as u32);
            self.in_arcs[ord(arc.head)].push(a as u32);
        }

        self.commodities = (0..nb)
            .flat_map(|b| (0..ns).map(move |s| (b, s)))
            .filter(|&(b, s)| self.scenarios.iter().any(|sc| sc.demand[b][s] > 0.0))
            .collect();

        for &(b, s) in &self.commodities.clone() {
            if !self.reaches(b, s) {
                return Err(InstanceError::Disconnected { biosensor: b, sink: s });
            }
        }
        Ok(())
    }

    fn reaches(&self, biosensor: usize, sink: usize) -> bool {
        let target = self.node_ord(NodeId::sink(sink));
        let mut seen = vec![false; self.num_nodes()];
        let mut stack = vec![self.node_ord(NodeId::biosensor(biosensor))];
        seen[stack[0]] = true;
        while let Some(v) = stack.pop() {
            if v == target {
                return true;
            }
            for &a in &self.out_arcs[v] {
                let h = self.node_ord(self.arcs[a as usize].head);
                if !seen[h] {
                    seen[h] = true;
                    stack.push(h);
                }
            }
        }
        false
    }

    pub fn num_biosensors(&self) -> usize {
        self.biosensors.len()
    }

    pub fn num_relays(&self) -> usize {
        self.relays.len()
    }

    pub fn num_sinks(&self) -> usize {
        self.sinks.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.scenarios.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.biosensors.len() + self.relays.len() + self.sinks.len()
    }

    /// Dense node ordinal: biosensors, then relays, then sinks.
    pub fn node_ord(&self, node: NodeId) -> usize {
        match node.kind {
            NodeKind::Biosensor => node.index,
            NodeKind::Relay => self.biosensors.len() + node.index,
            NodeKind::Sink => self.biosensors.len() + self.relays.len() + node.index,
        }
    }

    pub fn biosensors(&self) -> &[Point] {
        &self.biosensors
    }

    pub fn relays(&self) -> &[Relay] {
        &self.relays
    }

    pub fn sinks(&self) -> &[Point] {
        &self.sinks
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn scenarios(&self) -> &[Scenario] {
        &self.scenarios
    }

    pub fn relay_budget(&self) -> u32 {
        self.relay_budget
    }

    pub fn energy_params(&self) -> &EnergyParams {
        &self.energy
    }

    pub fn meta(&self) -> Option<&InstanceMeta> {
        self.meta.as_ref()
    }

    /// Biosensor-sink pairs with positive demand in at least one scenario,
    /// ordered by (biosensor, sink).
    pub fn commodities(&self) -> &[(usize, usize)] {
        &self.commodities
    }

    /// Worst-case rate of the pair over all scenarios.
    pub fn max_demand(&self, biosensor: usize, sink: usize) -> f64 {
        self.scenarios
            .iter()
            .map(|sc| sc.demand[biosensor][sink])
            .fold(0.0, f64::max)
    }

    pub fn out_arcs(&self, node: NodeId) -> &[u32] {
        &self.out_arcs[self.node_ord(node)]
    }

    pub fn in_arcs(&self, node: NodeId) -> &[u32] {
        &self.in_arcs[self.node_ord(node)]
    }
}
