//! Three-phase primal heuristic for the robust design model.
//!
//! Phase one tightens the relaxation with cutting planes, reads off a lower
//! bound, and deterministically fixes on the relay activations the relaxation
//! is already confident about. Phase two runs cycles of randomized route
//! construction: per commodity, a pool of candidate paths is built from trail
//! weights seeded with the relaxation's flow values, one path is drawn by a
//! trail/energy score, and a warm-started LP guards each fixing; feasible
//! results reinforce the trails, the best infeasible one per cycle goes to an
//! exact repair. Phase three polishes the incumbent with a fix-and-optimize
//! neighborhood search around the relaxation (never worsening it, since the
//! incumbent seeds the search).
//!
//! With `cycles` set, the run is fully deterministic: ant randomness is keyed
//! by (seed, cycle, ant) independent of thread interleaving, exact searches
//! are node-limited instead of timed, and trace timestamps are logical
//! sequence numbers.

pub mod routing;

pub use routing::{
    candidate_paths, min_energy_path, path_probabilities, sample_index, shortest_path, Candidate,
};

use crate::instance::{BanInstance, NodeKind};
use crate::lp::{strengthen, LpError, LpProblem, LpSolution, LpStatus, SimplexSolver};
use crate::mip::{solve_mip_with_root, FixMask, MipError, MipLimits, MipResult};
use crate::model::{build_rob_band_ilp, ModelError, RobustModel, Solution, VariableLayout};
use crate::par;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;
use std::fmt;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicConfig {
    pub seed: u64,
    /// Relay activations with relaxation value at least `1 - epsilon` are
    /// fixed on before construction starts.
    pub epsilon: f64,
    /// Agreement threshold for the fix-and-optimize neighborhood.
    pub rho: f64,
    /// Trail-versus-energy blend in the path choice score.
    pub alpha: f64,
    /// Number of recent feasible values averaged for trail reinforcement.
    pub window: usize,
    /// Candidate paths kept per commodity.
    pub candidates: usize,
    /// Route constructions per cycle.
    pub ants: usize,
    /// Whole-run wall-clock budget in seconds (ignored when `cycles` is set).
    pub time_limit: f64,
    /// Wall-clock budget for the final neighborhood search.
    pub rins_improve_limit: f64,
    /// Wall-clock budget for one repair search.
    pub rins_repair_limit: f64,
    /// Deterministic mode: run exactly this many cycles with node-limited
    /// exact searches and logical timestamps.
    pub cycles: Option<u64>,
    /// Node budget replacing `rins_improve_limit` in deterministic mode.
    pub rins_improve_nodes: u64,
    /// Node budget replacing `rins_repair_limit` in deterministic mode.
    pub rins_repair_nodes: u64,
    /// Cutting-plane rounds applied to the root relaxation.
    pub cut_rounds: usize,
    /// Use raw trail values as routing costs (repelling strong trails)
    /// instead of the default inverted weights.
    pub literal_shortest_path: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            seed: 0,
            epsilon: 0.1,
            rho: 0.1,
            alpha: 0.5,
            window: 4,
            candidates: 5,
            ants: 4,
            time_limit: 1800.0,
            rins_improve_limit: 600.0,
            rins_repair_limit: 60.0,
            cycles: None,
            rins_improve_nodes: 2000,
            rins_repair_nodes: 500,
            cut_rounds: 5,
            literal_shortest_path: false,
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<(), HeuristicError> {
        let bad = |what: &str| Err(HeuristicError::BadConfig(what.to_string()));
        if !(0.0..1.0).contains(&self.epsilon) {
            return bad("epsilon must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if self.window == 0 || self.candidates == 0 || self.ants == 0 {
            return bad("window, candidates and ants must be positive");
        }
        if self.ants > u16::MAX as usize {
            return bad("ants must fit in 16 bits");
        }
        let limits_ok = self.time_limit > 0.0
            && self.rins_improve_limit >= 0.0
            && self.rins_repair_limit >= 0.0;
        if !limits_ok {
            return bad("time limits must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    BoundComputed,
    FixingApplied,
    AntBuilt,
    RepairInvoked,
    IncumbentImproved,
    PheromoneCycle,
    FinalImprovement,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TraceKind::BoundComputed => "bound_computed",
            TraceKind::FixingApplied => "fixing_applied",
            TraceKind::AntBuilt => "ant_built",
            TraceKind::RepairInvoked => "repair_invoked",
            TraceKind::IncumbentImproved => "incumbent_improved",
            TraceKind::PheromoneCycle => "pheromone_cycle",
            TraceKind::FinalImprovement => "final_improvement",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    /// Seconds since the run started, or a logical sequence number in
    /// deterministic mode.
    pub t: f64,
    pub kind: TraceKind,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best: Option<Solution>,
    pub best_value: Option<f64>,
    /// Tightened-relaxation bound; `+inf` when the relaxation is infeasible.
    pub lower_bound: f64,
    /// `(value - bound) / value`, when both exist and the value is positive.
    pub gap: Option<f64>,
    pub cycles_run: u64,
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("bad configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Mip(#[from] MipError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Relative optimality gap of `value` against a lower `bound`.
pub fn relative_gap(value: f64, bound: f64) -> f64 {
    (value - bound) / value
}

/// Trail update factor comparing a feasible value against the recent mean,
/// both measured as gaps over the same bound: positive (reinforce) when the
/// value beats the mean, negative (evaporate) when it trails it. The caller
/// must ensure the mean's gap is positive.
pub fn reinforcement_factor(recent_mean: f64, value: f64, bound: f64) -> f64 {
    let g = relative_gap(recent_mean, bound);
    (g - relative_gap(value, bound)) / g
}

/// Relay activations the relaxation already commits to (value at least
/// `1 - epsilon`), strongest first, truncated to the budget. Returned sorted
/// by relay index.
pub fn deterministic_fixing(
    values: &[f64],
    layout: &VariableLayout,
    epsilon: f64,
    budget: u32,
) -> Vec<usize> {
    let mut cand: Vec<(usize, f64)> = (0..layout.num_relays)
        .filter_map(|r| {
            let v = values[layout.relay(r)];
            (v >= 1.0 - epsilon).then_some((r, v))
        })
        .collect();
    cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    cand.truncate(budget as usize);
    let mut out: Vec<usize> = cand.into_iter().map(|(r, _)| r).collect();
    out.sort_unstable();
    out
}

/// Fix-and-optimize neighborhood: binaries where the reference point agrees
/// confidently with the relaxation (`relaxation <= rho` off, `>= 1 - rho` on)
/// are frozen, the rest are searched exactly. Passing the reference as `hint`
/// guarantees the result is never worse than the reference.
pub fn mod_rins(
    model: &RobustModel,
    root: &LpProblem,
    reference: &[bool],
    relaxation: &[f64],
    rho: f64,
    limits: &MipLimits,
    hint: Option<&[bool]>,
) -> Result<MipResult, MipError> {
    let nb = model.layout.num_binaries();
    if reference.len() != nb || relaxation.len() < nb {
        return Err(MipError::MaskShape { got: reference.len(), expected: nb });
    }
    let mask: Vec<FixMask> = (0..nb)
        .map(|j| {
            let v = relaxation[j];
            if !reference[j] && v <= rho {
                FixMask::Zero
            } else if reference[j] && v >= 1.0 - rho {
                FixMask::One
            } else {
                FixMask::Free
            }
        })
        .collect();
    solve_mip_with_root(model, root, &mask, limits, hint)
}

/// Tightens the relaxation and runs the full heuristic on the robust model of
/// the instance.
pub fn run(instance: &BanInstance, config: &HeuristicConfig) -> Result<RunOutcome, HeuristicError> {
    config.validate()?;
    let model = build_rob_band_ilp(instance);
    let (root, root_sol) = strengthen(model.problem(), config.cut_rounds)?;
    run_with_root(&model, &root, &root_sol, config)
}

struct Clock {
    start: Instant,
    logical: bool,
    seq: u64,
}

impl Clock {
    fn new(logical: bool) -> Self {
        Clock { start: Instant::now(), logical, seq: 0 }
    }

    fn stamp(&mut self) -> f64 {
        if self.logical {
            let t = self.seq as f64;
            self.seq += 1;
            t
        } else {
            self.start.elapsed().as_secs_f64()
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Per-(commodity, arc) trail state. Raw initial values drive the update
/// magnitude; the working table is kept inside clamp bounds.
struct Trails {
    tau: Vec<Vec<f64>>,
    tau0: Vec<Vec<f64>>,
    lo: f64,
    hi: f64,
}

impl Trails {
    fn new(layout: &VariableLayout, values: &[f64]) -> Self {
        let tau0: Vec<Vec<f64>> = (0..layout.num_commodities)
            .map(|c| {
                (0..layout.num_arcs)
                    .map(|a| values[layout.flow(c, a)].clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        let max0 = tau0
            .iter()
            .flat_map(|row| row.iter().copied())
            .fold(0.0f64, f64::max);
        let lo = 1e-6;
        let hi = if max0 > 0.0 { 10.0 * max0 } else { 1.0 };
        let tau = tau0
            .iter()
            .map(|row| row.iter().map(|&v| v.clamp(lo, hi)).collect())
            .collect();
        Trails { tau, tau0, lo, hi }
    }

    fn reinforce(&mut self, commodity: usize, arcs: &[u32], factor: f64) {
        for &a in arcs {
            let i = a as usize;
            let t = self.tau[commodity][i] + self.tau0[commodity][i] * factor;
            self.tau[commodity][i] = t.clamp(self.lo, self.hi);
        }
    }
}

struct AntOutcome {
    binaries: Vec<bool>,
    paths: Vec<Vec<u32>>,
}

#[allow(clippy::too_many_arguments)]
fn build_ant(
    model: &RobustModel,
    base: &SimplexSolver,
    pools: &[Vec<Candidate>],
    probs: &[Vec<f64>],
    order: &[usize],
    fixed_relays: &[usize],
    mut rng: ChaCha8Rng,
) -> Result<AntOutcome, LpError> {
    let layout = &model.layout;
    let problem = model.problem();
    let mut solver = base.clone();
    let mut lp_ok = true;
    let mut paths: Vec<Vec<u32>> = vec![Vec::new(); layout.num_commodities];

    let fix = |solver: &mut SimplexSolver, ci: usize, arcs: &[u32]| -> Result<(), LpError> {
        let mut on = vec![false; layout.num_arcs];
        for &a in arcs {
            on[a as usize] = true;
        }
        for (a, &keep) in on.iter().enumerate() {
            let v = layout.flow(ci, a);
            let b = if keep { 1.0 } else { 0.0 };
            solver.set_var_bounds(v, b, b)?;
        }
        Ok(())
    };
    let unfix = |solver: &mut SimplexSolver, ci: usize| -> Result<(), LpError> {
        for a in 0..layout.num_arcs {
            let v = layout.flow(ci, a);
            solver.set_var_bounds(v, problem.lower[v], problem.upper[v])?;
        }
        Ok(())
    };

    for &ci in order {
        let c = model.commodities[ci];
        let commodity = (c.biosensor, c.sink);
        // Sample even when the LP guard is already off so the RNG stream stays
        // aligned across ants regardless of where feasibility broke down.
        let chosen: Option<Vec<u32>> = if pools[ci].is_empty() {
            None
        } else {
            let k = sample_index(&mut rng, &probs[ci]);
            Some(pools[ci][k].arcs.clone())
        };

        let mut routed: Option<Vec<u32>> = None;
        if let Some(arcs) = chosen {
            if lp_ok {
                fix(&mut solver, ci, &arcs)?;
                match solver.solve()? {
                    LpStatus::Optimal => routed = Some(arcs),
                    LpStatus::Infeasible => unfix(&mut solver, ci)?,
                    LpStatus::Unbounded => {
                        return Err(LpError::Numerical(
                            "construction relaxation unbounded".to_string(),
                        ))
                    }
                }
            } else {
                routed = Some(arcs);
            }
        }
        if routed.is_none() {
            if let Some(arcs) = min_energy_path(&model.instance, commodity) {
                if lp_ok {
                    fix(&mut solver, ci, &arcs)?;
                    match solver.solve()? {
                        LpStatus::Optimal => {}
                        // Keep the route but stop consulting the relaxation:
                        // the exact repair deals with the conflict later.
                        LpStatus::Infeasible => lp_ok = false,
                        LpStatus::Unbounded => {
                            return Err(LpError::Numerical(
                                "construction relaxation unbounded".to_string(),
                            ))
                        }
                    }
                }
                routed = Some(arcs);
            }
        }
        if let Some(arcs) = routed {
            paths[ci] = arcs;
        }
    }

    let mut binaries = vec![false; layout.num_binaries()];
    for (ci, arcs) in paths.iter().enumerate() {
        for &a in arcs {
            binaries[layout.flow(ci, a as usize)] = true;
            let head = model.instance.arcs()[a as usize].head;
            if head.kind == NodeKind::Relay {
                binaries[layout.relay(head.index)] = true;
            }
        }
    }
    for &r in fixed_relays {
        binaries[layout.relay(r)] = true;
    }
    Ok(AntOutcome { binaries, paths })
}

fn paths_of_solution(sol: &Solution) -> Vec<Vec<u32>> {
    sol.x
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter_map(|(a, &on)| on.then_some(a as u32))
                .collect()
        })
        .collect()
}

fn solution_binaries(layout: &VariableLayout, sol: &Solution) -> Vec<bool> {
    let mut out = vec![false; layout.num_binaries()];
    for (ci, row) in sol.x.iter().enumerate() {
        for (a, &on) in row.iter().enumerate() {
            if on {
                out[layout.flow(ci, a)] = true;
            }
        }
    }
    for (r, &on) in sol.y.iter().enumerate() {
        if on {
            out[layout.relay(r)] = true;
        }
    }
    out
}

/// Runs the heuristic against an already-tightened root relaxation (`root`
/// must extend `model.problem()` with rows valid on the full binary box, and
/// `root_sol` must be its solution), so one tightening can be shared between
/// solvers in comparative runs.
pub fn run_with_root(
    model: &RobustModel,
    root: &LpProblem,
    root_sol: &LpSolution,
    config: &HeuristicConfig,
) -> Result<RunOutcome, HeuristicError> {
    config.validate()?;
    let mut clock = Clock::new(config.cycles.is_some());
    let mut trace: Vec<TraceEvent> = Vec::new();
    let layout = &model.layout;

    if root_sol.status != LpStatus::Optimal {
        // An infeasible relaxation proves the design problem infeasible.
        let t = clock.stamp();
        trace.push(TraceEvent { t, kind: TraceKind::BoundComputed, value: f64::INFINITY });
        return Ok(RunOutcome {
            best: None,
            best_value: None,
            lower_bound: f64::INFINITY,
            gap: None,
            cycles_run: 0,
            trace,
        });
    }
    let lower = root_sol.objective;
    let t = clock.stamp();
    trace.push(TraceEvent { t, kind: TraceKind::BoundComputed, value: lower });

    // Phase one: fix confident relay activations, then refresh the flow
    // values under those fixings to seed the trails.
    let mut fixed = deterministic_fixing(
        &root_sol.values,
        layout,
        config.epsilon,
        model.instance.relay_budget(),
    );
    let mut base = SimplexSolver::new(root)?;
    base.install_basis(&root_sol.basis)?;
    for &r in &fixed {
        base.set_var_bounds(layout.relay(r), 1.0, 1.0)?;
    }
    let mut status = base.solve()?;
    if status != LpStatus::Optimal {
        // The cuts can rule the fixings out even though capacity alone never
        // would; drop them rather than start from an infeasible base.
        for &r in &fixed {
            let v = layout.relay(r);
            base.set_var_bounds(v, root.lower[v], root.upper[v])?;
        }
        fixed.clear();
        status = base.solve()?;
        if status != LpStatus::Optimal {
            return Err(HeuristicError::Lp(LpError::Numerical(
                "relaxation lost feasibility after unfixing".to_string(),
            )));
        }
    }
    let t = clock.stamp();
    trace.push(TraceEvent { t, kind: TraceKind::FixingApplied, value: fixed.len() as f64 });

    let mut trails = Trails::new(layout, &base.values());

    // Commodities by decreasing worst-case demand (ties by index): heavy
    // flows route first while capacity is plentiful.
    let mut order: Vec<usize> = (0..layout.num_commodities).collect();
    order.sort_by(|&i, &j| {
        let a = model.commodities[i];
        let b = model.commodities[j];
        model
            .instance
            .max_demand(b.biosensor, b.sink)
            .partial_cmp(&model.instance.max_demand(a.biosensor, a.sink))
            .unwrap()
            .then(i.cmp(&j))
    });

    let improve_budget = config.rins_improve_limit.min(0.2 * config.time_limit);
    let construction_deadline = config.time_limit - improve_budget;

    let mut incumbent: Option<(f64, Solution, Vec<bool>)> = None;
    let mut window: VecDeque<f64> = VecDeque::new();
    let mut cycles_run: u64 = 0;

    loop {
        match config.cycles {
            Some(n) => {
                if cycles_run >= n {
                    break;
                }
            }
            None => {
                if clock.elapsed() >= construction_deadline {
                    break;
                }
            }
        }

        // Candidate pools under the current trails, shared by all ants of the
        // cycle.
        let mut pools: Vec<Vec<Candidate>> = Vec::with_capacity(layout.num_commodities);
        let mut probs: Vec<Vec<f64>> = Vec::with_capacity(layout.num_commodities);
        for ci in 0..layout.num_commodities {
            let c = model.commodities[ci];
            let pool = candidate_paths(
                &model.instance,
                (c.biosensor, c.sink),
                &trails.tau[ci],
                config.candidates,
                config.literal_shortest_path,
            );
            let p = if pool.is_empty() {
                Vec::new()
            } else {
                let means: Vec<f64> = pool.iter().map(|c| c.trail_mean).collect();
                let energies: Vec<f64> = pool.iter().map(|c| c.energy).collect();
                path_probabilities(&means, &energies, config.alpha)
            };
            pools.push(pool);
            probs.push(p);
        }

        let ants: Vec<Result<AntOutcome, LpError>> =
            par::map_ordered((0..config.ants).collect(), |a| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream((cycles_run << 16) | a as u64);
                build_ant(model, &base, &pools, &probs, &order, &fixed, rng)
            });

        let mut best_broken: Option<(f64, AntOutcome)> = None;
        for res in ants {
            let ant = res?;
            let sol = model.evaluate_binaries(&ant.binaries)?;
            let t = clock.stamp();
            trace.push(TraceEvent { t, kind: TraceKind::AntBuilt, value: sol.energy });
            if sol.feasible {
                absorb_feasible(
                    model,
                    &mut trails,
                    &mut window,
                    config.window,
                    lower,
                    &ant.paths,
                    sol,
                    &mut incumbent,
                    &mut trace,
                    &mut clock,
                );
            } else if best_broken.as_ref().is_none_or(|(e, _)| sol.energy < *e) {
                best_broken = Some((sol.energy, ant));
            }
        }

        // One exact repair per cycle, only when the broken route would matter.
        if let Some((e, ant)) = best_broken {
            let worth = incumbent.as_ref().is_none_or(|(inc, _, _)| e < *inc);
            let limits = if worth {
                repair_limits(config, &clock, construction_deadline)
            } else {
                None
            };
            if let Some(limits) = limits {
                let t = clock.stamp();
                trace.push(TraceEvent { t, kind: TraceKind::RepairInvoked, value: e });
                let res = mod_rins(
                    model,
                    root,
                    &ant.binaries,
                    &root_sol.values,
                    config.rho,
                    &limits,
                    None,
                )?;
                if let Some(sol) = res.solution {
                    if sol.feasible {
                        let paths = paths_of_solution(&sol);
                        absorb_feasible(
                            model,
                            &mut trails,
                            &mut window,
                            config.window,
                            lower,
                            &paths,
                            sol,
                            &mut incumbent,
                            &mut trace,
                            &mut clock,
                        );
                    }
                }
            }
        }

        if !window.is_empty() {
            let mean = window.iter().sum::<f64>() / window.len() as f64;
            let t = clock.stamp();
            trace.push(TraceEvent { t, kind: TraceKind::PheromoneCycle, value: mean });
        }
        cycles_run += 1;

        if let Some((inc, _, _)) = &incumbent {
            if *inc <= lower + 1e-9 * lower.abs() {
                break; // already provably optimal
            }
        }
    }

    // Phase three: exact polish around the incumbent, or a last-resort exact
    // dive when construction never produced one.
    let improve = match config.cycles {
        Some(_) => MipLimits { time: None, nodes: Some(config.rins_improve_nodes) },
        None => {
            let left = (config.time_limit - clock.elapsed()).min(improve_budget);
            MipLimits { time: Some(left.max(0.0)), nodes: None }
        }
    };
    let worth_improving = improve.nodes.map_or(improve.time.unwrap_or(0.0) > 0.0, |n| n > 0);
    if worth_improving {
        let res = match &incumbent {
            Some((_, _, bins)) => mod_rins(
                model,
                root,
                bins,
                &root_sol.values,
                config.rho,
                &improve,
                Some(bins),
            )?,
            None => solve_mip_with_root(
                model,
                root,
                &vec![FixMask::Free; layout.num_binaries()],
                &improve,
                None,
            )?,
        };
        if let Some(sol) = res.solution {
            if sol.feasible
                && incumbent.as_ref().is_none_or(|(inc, _, _)| sol.energy < *inc)
            {
                let bins = solution_binaries(layout, &sol);
                incumbent = Some((sol.energy, sol, bins));
            }
        }
        if let Some((inc, _, _)) = &incumbent {
            let t = clock.stamp();
            trace.push(TraceEvent { t, kind: TraceKind::FinalImprovement, value: *inc });
        }
    }

    let (best_value, best) = match incumbent {
        Some((v, sol, _)) => (Some(v), Some(sol)),
        None => (None, None),
    };
    let gap = best_value.and_then(|v| (v > 0.0).then(|| relative_gap(v, lower)));
    Ok(RunOutcome { best, best_value, lower_bound: lower, gap, cycles_run, trace })
}

fn repair_limits(config: &HeuristicConfig, clock: &Clock, deadline: f64) -> Option<MipLimits> {
    match config.cycles {
        Some(_) => {
            (config.rins_repair_nodes > 0)
                .then_some(MipLimits { time: None, nodes: Some(config.rins_repair_nodes) })
        }
        None => {
            let left = (deadline - clock.elapsed()).min(config.rins_repair_limit);
            (left > 0.0).then_some(MipLimits { time: Some(left), nodes: None })
        }
    }
}

/// Feeds one feasible solution into the trail state, the averaging window and
/// the incumbent, emitting trace events as appropriate.
#[allow(clippy::too_many_arguments)]
fn absorb_feasible(
    model: &RobustModel,
    trails: &mut Trails,
    window: &mut VecDeque<f64>,
    window_cap: usize,
    lower: f64,
    paths: &[Vec<u32>],
    sol: Solution,
    incumbent: &mut Option<(f64, Solution, Vec<bool>)>,
    trace: &mut Vec<TraceEvent>,
    clock: &mut Clock,
) {
    let value = sol.energy;
    if !window.is_empty() {
        let mean = window.iter().sum::<f64>() / window.len() as f64;
        if relative_gap(mean, lower) > 0.0 && value > 0.0 {
            let factor = reinforcement_factor(mean, value, lower);
            for (ci, arcs) in paths.iter().enumerate() {
                trails.reinforce(ci, arcs, factor);
            }
        }
    }
    window.push_back(value);
    while window.len() > window_cap {
        window.pop_front();
    }
    if incumbent.as_ref().is_none_or(|(inc, _, _)| value < *inc) {
        let bins = solution_binaries(&model.layout, &sol);
        *incumbent = Some((value, sol, bins));
        let t = clock.stamp();
        trace.push(TraceEvent { t, kind: TraceKind::IncumbentImproved, value });
    }
}
