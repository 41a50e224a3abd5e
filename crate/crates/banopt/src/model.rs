//! ILP formulations of the network design problem and an exact evaluator for
//! candidate assignments.
//!
//! Variables, in a fixed grid layout: one binary flow variable per
//! (commodity, arc), one binary activation variable per relay, then one
//! continuous worst-case energy variable `E`. Flow variables on arcs that
//! leave a foreign biosensor or enter a foreign sink are pinned to `[0, 0]`:
//! they can never lie on a path of that commodity, and leaving them open would
//! admit disconnected source/sink configurations that no path decomposition
//! matches.
//!
//! Rows, in a fixed order: per-commodity unit-flow conservation (biosensor,
//! every relay, sink), per-(relay, scenario) capacity linked to the activation
//! variable, per-scenario total-energy rows bounding `E`, and the relay
//! cardinality budget. The objective minimizes `E`.

use crate::instance::{BanInstance, NodeId, NodeKind};
use crate::lp::{LpProblem, LpRow, Sense};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Commodity {
    pub biosensor: usize,
    pub sink: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariableId {
    Flow { commodity: usize, arc: usize },
    Relay(usize),
    EnergyBound,
}

/// Dense variable indexing: flows (commodity-major), relays, energy bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariableLayout {
    pub num_commodities: usize,
    pub num_arcs: usize,
    pub num_relays: usize,
}

impl VariableLayout {
    pub fn flow(&self, commodity: usize, arc: usize) -> usize {
        debug_assert!(commodity < self.num_commodities && arc < self.num_arcs);
        commodity * self.num_arcs + arc
    }

    pub fn relay(&self, relay: usize) -> usize {
        debug_assert!(relay < self.num_relays);
        self.num_commodities * self.num_arcs + relay
    }

    pub fn energy(&self) -> usize {
        self.num_commodities * self.num_arcs + self.num_relays
    }

    /// Number of binary variables (everything but the energy bound).
    pub fn num_binaries(&self) -> usize {
        self.num_commodities * self.num_arcs + self.num_relays
    }

    pub fn num_vars(&self) -> usize {
        self.num_binaries() + 1
    }

    pub fn id_of(&self, index: usize) -> VariableId {
        let flows = self.num_commodities * self.num_arcs;
        if index < flows {
            VariableId::Flow { commodity: index / self.num_arcs, arc: index % self.num_arcs }
        } else if index < flows + self.num_relays {
            VariableId::Relay(index - flows)
        } else {
            debug_assert_eq!(index, self.energy());
            VariableId::EnergyBound
        }
    }
}

/// Identity of a model row, also used to report violations of a candidate
/// assignment. `Activation` is evaluation-only: it flags traffic through a
/// relay whose activation variable is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Conservation { commodity: usize, node: NodeId },
    Capacity { relay: usize, scenario: usize },
    ScenarioEnergy { scenario: usize },
    RelayBudget,
    Activation { relay: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("scenario {requested} out of range: instance has {available}")]
    ScenarioOutOfRange { requested: usize, available: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// A built optimization model over a subset of scenarios (all of them for the
/// robust counterpart, a single one otherwise).
#[derive(Clone)]
pub struct RobustModel {
    pub instance: BanInstance,
    pub commodities: Vec<Commodity>,
    pub layout: VariableLayout,
    /// Scenario indices the model protects against.
    pub scenarios: Vec<usize>,
    pub row_kinds: Vec<RowKind>,
    problem: LpProblem,
}

/// Single-scenario design model.
pub fn build_band_ilp(instance: &BanInstance, scenario: usize) -> Result<RobustModel, ModelError> {
    if scenario >= instance.num_scenarios() {
        return Err(ModelError::ScenarioOutOfRange {
            requested: scenario,
            available: instance.num_scenarios(),
        });
    }
    Ok(build(instance, vec![scenario]))
}

/// Min-max robust counterpart over every scenario of the instance.
pub fn build_rob_band_ilp(instance: &BanInstance) -> RobustModel {
    build(instance, (0..instance.num_scenarios()).collect())
}

fn arc_admissible(instance: &BanInstance, c: Commodity, arc: usize) -> bool {
    let a = &instance.arcs()[arc];
    !(a.tail.kind == NodeKind::Biosensor && a.tail.index != c.biosensor)
        && !(a.head.kind == NodeKind::Sink && a.head.index != c.sink)
}

fn build(instance: &BanInstance, scenarios: Vec<usize>) -> RobustModel {
    let commodities: Vec<Commodity> = instance
        .commodities()
        .iter()
        .map(|&(biosensor, sink)| Commodity { biosensor, sink })
        .collect();
    let layout = VariableLayout {
        num_commodities: commodities.len(),
        num_arcs: instance.num_arcs(),
        num_relays: instance.num_relays(),
    };
    let nv = layout.num_vars();
    let mut problem = LpProblem {
        objective: vec![0.0; nv],
        lower: vec![0.0; nv],
        upper: vec![1.0; nv],
        integer: vec![true; nv],
        rows: Vec::new(),
    };
    let energy_var = layout.energy();
    problem.objective[energy_var] = 1.0;
    problem.upper[energy_var] = f64::INFINITY;
    problem.integer[energy_var] = false;
    for (ci, &c) in commodities.iter().enumerate() {
        for arc in 0..layout.num_arcs {
            if !arc_admissible(instance, c, arc) {
                problem.upper[layout.flow(ci, arc)] = 0.0;
            }
        }
    }

    let mut row_kinds = Vec::new();
    for (ci, &c) in commodities.iter().enumerate() {
        let mut conservation = |node: NodeId, rhs: f64| {
            let mut terms: Vec<(usize, f64)> = instance
                .out_arcs(node)
                .iter()
                .map(|&a| (layout.flow(ci, a as usize), 1.0))
                .collect();
            terms.extend(instance.in_arcs(node).iter().map(|&a| (layout.flow(ci, a as usize), -1.0)));
            problem.rows.push(LpRow { terms, sense: Sense::Eq, rhs });
            row_kinds.push(RowKind::Conservation { commodity: ci, node });
        };
        conservation(NodeId::biosensor(c.biosensor), 1.0);
        for r in 0..instance.num_relays() {
            conservation(NodeId::relay(r), 0.0);
        }
        // Sinks only receive, so the unit arrives with coefficient -1.
        conservation(NodeId::sink(c.sink), -1.0);
    }
    for r in 0..instance.num_relays() {
        for &sc in &scenarios {
            let mut terms: Vec<(usize, f64)> = Vec::new();
            for &a in instance.out_arcs(NodeId::relay(r)) {
                for (ci, &c) in commodities.iter().enumerate() {
                    let d = instance.scenarios()[sc].demand(c.biosensor, c.sink);
                    if d > 0.0 {
                        terms.push((layout.flow(ci, a as usize), d));
                    }
                }
            }
            terms.push((layout.relay(r), -instance.relays()[r].capacity));
            problem.rows.push(LpRow { terms, sense: Sense::Le, rhs: 0.0 });
            row_kinds.push(RowKind::Capacity { relay: r, scenario: sc });
        }
    }
    for &sc in &scenarios {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for (ci, &c) in commodities.iter().enumerate() {
            let d = instance.scenarios()[sc].demand(c.biosensor, c.sink);
            if d > 0.0 {
                for (a, arc) in instance.arcs().iter().enumerate() {
                    terms.push((layout.flow(ci, a), arc.energy * d));
                }
            }
        }
        terms.push((energy_var, -1.0));
        problem.rows.push(LpRow { terms, sense: Sense::Le, rhs: 0.0 });
        row_kinds.push(RowKind::ScenarioEnergy { scenario: sc });
    }
    let budget_terms: Vec<(usize, f64)> = (0..instance.num_relays()).map(|r| (layout.relay(r), 1.0)).collect();
    problem.rows.push(LpRow {
        terms: budget_terms,
        sense: Sense::Le,
        rhs: instance.relay_budget() as f64,
    });
    row_kinds.push(RowKind::RelayBudget);

    RobustModel {
        instance: instance.clone(),
        commodities,
        layout,
        scenarios,
        row_kinds,
        problem,
    }
}

impl RobustModel {
    /// The LP/MIP encoding (binaries marked in `integer`).
    pub fn problem(&self) -> &LpProblem {
        &self.problem
    }

    pub fn row_name(&self, row: usize) -> String {
        match self.row_kinds[row] {
            RowKind::Conservation { commodity, node } => {
                let c = self.commodities[commodity];
                format!("cons_{}_{}_{}", c.biosensor, c.sink, node)
            }
            RowKind::Capacity { relay, scenario } => format!("cap_{relay}_{scenario}"),
            RowKind::ScenarioEnergy { scenario } => format!("senergy_{scenario}"),
            RowKind::RelayBudget => "card".to_string(),
            RowKind::Activation { relay } => format!("activation_{relay}"),
        }
    }

    fn var_name(&self, index: usize) -> String {
        match self.layout.id_of(index) {
            VariableId::Flow { commodity, arc } => {
                let c = self.commodities[commodity];
                let a = &self.instance.arcs()[arc];
                format!("x_{}_{}_{}_{}", c.biosensor, c.sink, a.tail, a.head)
            }
            VariableId::Relay(r) => format!("y_{r}"),
            VariableId::EnergyBound => "E".to_string(),
        }
    }

    /// Human-readable LP listing with stable row names, for inspection and
    /// diffing. `extra` rows (e.g. cuts) are appended as `cut_<k>`.
    pub fn lp_text(&self, extra: &[LpRow]) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        out.push_str("minimize E\nsubject to\n");
        let fmt_row = |out: &mut String, name: &str, row: &LpRow| {
            write!(out, "  {name}:").unwrap();
            for &(j, coef) in &row.terms {
                if coef < 0.0 {
                    write!(out, " - {:.12} {}", -coef, self.var_name(j)).unwrap();
                } else {
                    write!(out, " + {:.12} {}", coef, self.var_name(j)).unwrap();
                }
            }
            let sense = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            writeln!(out, " {sense} {:.12}", row.rhs).unwrap();
        };
        for (i, row) in self.problem.rows.iter().enumerate() {
            fmt_row(&mut out, &self.row_name(i), row);
        }
        for (k, row) in extra.iter().enumerate() {
            fmt_row(&mut out, &format!("cut_{k}"), row);
        }
        out.push_str("bounds\n");
        for j in 0..self.problem.num_vars() {
            writeln!(
                out,
                "  {} <= {} <= {}",
                self.problem.lower[j],
                self.var_name(j),
                self.problem.upper[j]
            )
            .unwrap();
        }
        out.push_str("binary\n");
        for j in 0..self.problem.num_vars() {
            if self.problem.integer[j] {
                writeln!(out, "  {}", self.var_name(j)).unwrap();
            }
        }
        out
    }

    /// Splits a layout-ordered binary assignment into the flow grid and the
    /// relay vector, then evaluates it against this model's scenario set.
    pub fn evaluate_binaries(&self, binaries: &[bool]) -> Result<Solution, ModelError> {
        if binaries.len() != self.layout.num_binaries() {
            return Err(ModelError::Shape(format!(
                "{} binaries for a layout of {}",
                binaries.len(),
                self.layout.num_binaries()
            )));
        }
        let x: Vec<Vec<bool>> = (0..self.layout.num_commodities)
            .map(|c| (0..self.layout.num_arcs).map(|a| binaries[self.layout.flow(c, a)]).collect())
            .collect();
        let y: Vec<bool> = (0..self.layout.num_relays)
            .map(|r| binaries[self.layout.relay(r)])
            .collect();
        evaluate_scenarios(&self.instance, &x, &y, &self.scenarios)
    }
}

/// An evaluated candidate assignment. `energy` is the worst case over the
/// evaluated scenario set, reported whether or not the candidate is feasible.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<Vec<bool>>,
    pub y: Vec<bool>,
    pub energy: f64,
    pub per_scenario_energy: Vec<f64>,
    pub feasible: bool,
    pub violations: Vec<RowKind>,
}

/// Exact check of a candidate against every scenario of the instance:
/// per-commodity conservation, per-(relay, scenario) capacity (with a 1e-6
/// relative tolerance), the flow-implies-activation rule, and the relay
/// budget.
pub fn evaluate(instance: &BanInstance, x: &[Vec<bool>], y: &[bool]) -> Result<Solution, ModelError> {
    let scenarios: Vec<usize> = (0..instance.num_scenarios()).collect();
    evaluate_scenarios(instance, x, y, &scenarios)
}

fn evaluate_scenarios(
    instance: &BanInstance,
    x: &[Vec<bool>],
    y: &[bool],
    scenarios: &[usize],
) -> Result<Solution, ModelError> {
    let commodities = instance.commodities();
    if x.len() != commodities.len() {
        return Err(ModelError::Shape(format!(
            "{} flow rows for {} commodities",
            x.len(),
            commodities.len()
        )));
    }
    if let Some(row) = x.iter().find(|row| row.len() != instance.num_arcs()) {
        return Err(ModelError::Shape(format!(
            "flow row of length {} for {} arcs",
            row.len(),
            instance.num_arcs()
        )));
    }
    if y.len() != instance.num_relays() {
        return Err(ModelError::Shape(format!(
            "{} activation flags for {} relays",
            y.len(),
            instance.num_relays()
        )));
    }

    let mut violations = Vec::new();
    for (ci, &(b, s)) in commodities.iter().enumerate() {
        let c = Commodity { biosensor: b, sink: s };
        let flow_out = |node: NodeId| -> i64 {
            instance.out_arcs(node).iter().filter(|&&a| x[ci][a as usize]).count() as i64
        };
        let flow_in = |node: NodeId| -> i64 {
            instance.in_arcs(node).iter().filter(|&&a| x[ci][a as usize]).count() as i64
        };
        for (a, arc) in instance.arcs().iter().enumerate() {
            if x[ci][a] && !arc_admissible(instance, c, a) {
                let node = if arc.tail.kind == NodeKind::Biosensor && arc.tail.index != b {
                    arc.tail
                } else {
                    arc.head
                };
                violations.push(RowKind::Conservation { commodity: ci, node });
            }
        }
        if flow_out(NodeId::biosensor(b)) != 1 {
            violations.push(RowKind::Conservation { commodity: ci, node: NodeId::biosensor(b) });
        }
        for r in 0..instance.num_relays() {
            let node = NodeId::relay(r);
            if flow_out(node) != flow_in(node) {
                violations.push(RowKind::Conservation { commodity: ci, node });
            }
        }
        if flow_in(NodeId::sink(s)) != 1 {
            violations.push(RowKind::Conservation { commodity: ci, node: NodeId::sink(s) });
        }
    }

    for (r, relay) in instance.relays().iter().enumerate() {
        let node = NodeId::relay(r);
        let cap = relay.capacity;
        let mut touched = false;
        for (ci, _) in commodities.iter().enumerate() {
            touched |= instance.out_arcs(node).iter().any(|&a| x[ci][a as usize])
                || instance.in_arcs(node).iter().any(|&a| x[ci][a as usize]);
        }
        if touched && !y[r] {
            violations.push(RowKind::Activation { relay: r });
        }
        for &sc in scenarios {
            let mut load = 0.0;
            for (ci, &(b, s)) in commodities.iter().enumerate() {
                let d = instance.scenarios()[sc].demand(b, s);
                for &a in instance.out_arcs(node) {
                    if x[ci][a as usize] {
                        load += d;
                    }
                }
            }
            let capacity = if y[r] { cap } else { 0.0 };
            if load > capacity + 1e-6 * cap.max(1.0) {
                violations.push(RowKind::Capacity { relay: r, scenario: sc });
            }
        }
    }

    if y.iter().filter(|&&v| v).count() as u32 > instance.relay_budget() {
        violations.push(RowKind::RelayBudget);
    }

    let mut per_scenario_energy = Vec::with_capacity(scenarios.len());
    for &sc in scenarios {
        let mut e = 0.0;
        for (ci, &(b, s)) in commodities.iter().enumerate() {
            let d = instance.scenarios()[sc].demand(b, s);
            if d > 0.0 {
                for (a, arc) in instance.arcs().iter().enumerate() {
                    if x[ci][a] {
                        e += arc.energy * d;
                    }
                }
            }
        }
        per_scenario_energy.push(e);
    }
    let energy = per_scenario_energy.iter().fold(0.0f64, |a, &b| a.max(b));

    Ok(Solution {
        x: x.to_vec(),
        y: y.to_vec(),
        energy,
        per_scenario_energy,
        feasible: violations.is_empty(),
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{
        build_arcs, energy_coefficient, EnergyParams, Layout, Point, Relay, Scenario,
        DEFAULT_PATHLOSS,
    };
    use crate::lp::{solve_lp, LpStatus};

    /// One biosensor, one relay, one sink, all mutually in range.
    fn tiny() -> BanInstance {
        let layout = Layout {
            biosensors: vec![Point::new(0.0, 0.0)],
            relays: vec![Point::new(0.0, 0.3)],
            sinks: vec![Point::new(0.0, 0.5)],
            biosensor_range: 0.55,
            relay_range: 0.45,
            pathloss: DEFAULT_PATHLOSS,
            energy: EnergyParams::default(),
        };
        let arcs = build_arcs(&layout).unwrap();
        BanInstance::new(
            layout.biosensors.clone(),
            vec![Relay { position: layout.relays[0], capacity: 100.0 }],
            layout.sinks.clone(),
            arcs,
            vec![Scenario { id: 0, demand: vec![vec![10.0]] }],
            1,
            EnergyParams::default(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn robust_model_shape() {
        let inst = tiny();
        let model = build_rob_band_ilp(&inst);
        // 1 commodity x 3 arcs + 1 relay + E
        assert_eq!(model.problem().num_vars(), 5);
        // conservation b, r, s; capacity (1 relay x 1 scenario); energy; budget
        assert_eq!(model.problem().rows.len(), 6);
        assert_eq!(model.row_name(0), "cons_0_0_b0");
        assert_eq!(model.row_name(1), "cons_0_0_r0");
        assert_eq!(model.row_name(2), "cons_0_0_s0");
        assert_eq!(model.row_name(3), "cap_0_0");
        assert_eq!(model.row_name(4), "senergy_0");
        assert_eq!(model.row_name(5), "card");
    }

    #[test]
    fn relaxation_picks_the_direct_link() {
        let inst = tiny();
        let model = build_rob_band_ilp(&inst);
        let sol = solve_lp(model.problem(), None).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let direct = energy_coefficient(&EnergyParams::default(), 0.5, DEFAULT_PATHLOSS).unwrap();
        assert!((sol.objective - 10.0 * direct).abs() <= 1e-9 * 10.0 * direct);
    }

    #[test]
    fn band_ilp_rejects_bad_scenario() {
        let inst = tiny();
        let err = match build_band_ilp(&inst, 5) {
            Err(e) => e,
            Ok(_) => panic!("expected an out-of-range error"),
        };
        assert_eq!(err, ModelError::ScenarioOutOfRange { requested: 5, available: 1 });
        assert!(build_band_ilp(&inst, 0).is_ok());
    }

    #[test]
    fn evaluate_direct_path() {
        let inst = tiny();
        // Arc order for the tiny layout: b->r, b->s, r->s.
        let sol = evaluate(&inst, &[vec![false, true, false]], &[false]).unwrap();
        assert!(sol.feasible, "{:?}", sol.violations);
        let direct = energy_coefficient(&EnergyParams::default(), 0.5, DEFAULT_PATHLOSS).unwrap();
        assert!((sol.energy - 10.0 * direct).abs() <= 1e-12 * 10.0 * direct);
    }

    #[test]
    fn evaluate_flags_inactive_relay() {
        let inst = tiny();
        let sol = evaluate(&inst, &[vec![true, false, true]], &[false]).unwrap();
        assert!(!sol.feasible);
        assert!(sol.violations.contains(&RowKind::Activation { relay: 0 }));
        assert!(sol.violations.contains(&RowKind::Capacity { relay: 0, scenario: 0 }));
        // With the relay on, the same routing is feasible.
        let sol = evaluate(&inst, &[vec![true, false, true]], &[true]).unwrap();
        assert!(sol.feasible, "{:?}", sol.violations);
    }

    #[test]
    fn evaluate_flags_broken_conservation() {
        let inst = tiny();
        let sol = evaluate(&inst, &[vec![true, true, false]], &[true]).unwrap();
        assert!(!sol.feasible);
        assert!(sol
            .violations
            .iter()
            .any(|v| matches!(v, RowKind::Conservation { commodity: 0, .. })));
    }

    #[test]
    fn foreign_endpoint_flows_are_pinned_and_rejected() {
        // Two biosensors, two sinks, everything in range of everything.
        let layout = Layout {
            biosensors: vec![Point::new(0.0, 0.0), Point::new(0.1, 0.0)],
            relays: vec![],
            sinks: vec![Point::new(0.0, 0.3), Point::new(0.1, 0.3)],
            biosensor_range: 0.5,
            relay_range: 0.5,
            pathloss: DEFAULT_PATHLOSS,
            energy: EnergyParams::default(),
        };
        let arcs = build_arcs(&layout).unwrap();
        let inst = BanInstance::new(
            layout.biosensors.clone(),
            vec![],
            layout.sinks.clone(),
            arcs,
            vec![Scenario { id: 0, demand: vec![vec![5.0, 5.0], vec![5.0, 5.0]] }],
            1,
            EnergyParams::default(),
            None,
        )
        .unwrap();
        let model = build_rob_band_ilp(&inst);
        // Commodity 0 is (b0, s0); find an arc from b1.
        let foreign = inst
            .arcs()
            .iter()
            .position(|a| a.tail == NodeId::biosensor(1))
            .unwrap();
        let v = model.layout.flow(0, foreign);
        assert_eq!(model.problem().upper[v], 0.0);

        // Evaluation rejects flow on that arc for commodity 0.
        let mut x = vec![vec![false; inst.num_arcs()]; 4];
        let own = inst
            .arcs()
            .iter()
            .position(|a| a.tail == NodeId::biosensor(0) && a.head == NodeId::sink(0))
            .unwrap();
        for (ci, &(b, s)) in inst.commodities().iter().enumerate() {
            let direct = inst
                .arcs()
                .iter()
                .position(|a| a.tail == NodeId::biosensor(b) && a.head == NodeId::sink(s))
                .unwrap();
            x[ci][direct] = true;
        }
        let ok = evaluate(&inst, &x, &[]).unwrap();
        assert!(ok.feasible);
        x[0][own] = false;
        x[0][foreign] = true;
        let bad = evaluate(&inst, &x, &[]).unwrap();
        assert!(!bad.feasible);
    }

    #[test]
    fn lp_text_is_stable() {
        let inst = tiny();
        let model = build_rob_band_ilp(&inst);
        let text = model.lp_text(&[]);
        assert!(text.starts_with("minimize E\n"));
        assert!(text.contains("cons_0_0_b0:"));
        assert!(text.contains("cap_0_0:"));
        assert!(text.contains("senergy_0:"));
        assert!(text.contains("card:"));
        assert!(text.contains("binary\n"));
        // Exact golden fragment for the budget row.
        assert!(text.contains("card: + 1.000000000000 y_0 <= 1.000000000000"));
    }

    #[test]
    fn evaluate_rejects_bad_shapes() {
        let inst = tiny();
        assert!(matches!(evaluate(&inst, &[], &[false]), Err(ModelError::Shape(_))));
        assert!(matches!(
            evaluate(&inst, &[vec![false; 3]], &[]),
            Err(ModelError::Shape(_))
        ));
    }
}
