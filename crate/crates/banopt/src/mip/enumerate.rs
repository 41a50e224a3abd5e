//! Brute-force ground truth: exhaustive search over one simple path per
//! commodity, with admissible pruning. Only activation patterns implied by
//! the chosen paths are considered, which is lossless because activating an
//! unused relay never lowers energy and only consumes budget.
//!
//! The search refuses oversized inputs via [`SizeGuard`] instead of running
//! unbounded; it exists to certify small instances, not to compete with the
//! branch-and-bound.

use crate::instance::{BanInstance, NodeId, NodeKind};
use crate::mip::FixMask;
use crate::model::{evaluate, ModelError, Solution, VariableLayout};
use thiserror::Error;

/// Hard limits before and during enumeration. Relay activation sets are
/// tracked as bits of a `u64`, so more than 64 relays can never be accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeGuard {
    pub max_relays: usize,
    pub max_paths_per_commodity: usize,
    pub max_search_nodes: u64,
}

impl Default for SizeGuard {
    fn default() -> Self {
        SizeGuard {
            max_relays: 60,
            max_paths_per_commodity: 200_000,
            max_search_nodes: 50_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum EnumerateError {
    #[error("{relays} candidate relays exceed the enumeration limit of {max}")]
    TooManyRelays { relays: usize, max: usize },
    #[error("commodity ({biosensor}, {sink}) has more than {max} simple paths")]
    TooManyPaths { biosensor: usize, sink: usize, max: usize },
    #[error("search exceeded {max} nodes")]
    SearchTooLarge { max: u64 },
    #[error("mask has {got} entries for {expected} binaries")]
    MaskShape { got: usize, expected: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

struct Path {
    arcs: Vec<u32>,
    relays: u64,
    energy: f64,
}

/// Exact optimum of the robust design problem, or `None` when no feasible
/// assignment exists.
pub fn enumerate_exact(
    instance: &BanInstance,
    guard: &SizeGuard,
) -> Result<Option<(f64, Solution)>, EnumerateError> {
    let layout = VariableLayout {
        num_commodities: instance.commodities().len(),
        num_arcs: instance.num_arcs(),
        num_relays: instance.num_relays(),
    };
    enumerate_exact_masked(instance, guard, &vec![FixMask::Free; layout.num_binaries()])
}

/// Exact optimum under per-binary fixings in the model's variable order:
/// `Zero`/`One` on a flow removes or demands that arc in its commodity's
/// path, `Zero` on a relay bans it, `One` forces it active (spending budget
/// even when unused).
pub fn enumerate_exact_masked(
    instance: &BanInstance,
    guard: &SizeGuard,
    mask: &[FixMask],
) -> Result<Option<(f64, Solution)>, EnumerateError> {
    let commodities = instance.commodities();
    let layout = VariableLayout {
        num_commodities: commodities.len(),
        num_arcs: instance.num_arcs(),
        num_relays: instance.num_relays(),
    };
    if mask.len() != layout.num_binaries() {
        return Err(EnumerateError::MaskShape {
            got: mask.len(),
            expected: layout.num_binaries(),
        });
    }
    let nr = instance.num_relays();
    if nr > guard.max_relays || nr > 64 {
        return Err(EnumerateError::TooManyRelays {
            relays: nr,
            max: guard.max_relays.min(64),
        });
    }

    let mut forced_relays: u64 = 0;
    for r in 0..nr {
        if mask[layout.relay(r)] == FixMask::One {
            forced_relays |= 1 << r;
        }
    }
    let budget = instance.relay_budget();
    if forced_relays.count_ones() > budget {
        return Ok(None);
    }

    // Commodities in decreasing worst-case demand (ties by index): big flows
    // first makes the capacity and energy pruning bite early.
    let mut order: Vec<usize> = (0..commodities.len()).collect();
    order.sort_by(|&a, &b| {
        let (ab, asn) = commodities[a];
        let (bb, bsn) = commodities[b];
        instance
            .max_demand(bb, bsn)
            .partial_cmp(&instance.max_demand(ab, asn))
            .unwrap()
            .then(a.cmp(&b))
    });

    let mut paths: Vec<Vec<Path>> = Vec::with_capacity(order.len());
    for &ci in &order {
        let list = commodity_paths(instance, guard, mask, &layout, ci)?;
        if list.is_empty() {
            return Ok(None);
        }
        paths.push(list);
    }

    let scenarios = instance.scenarios();
    let ns = scenarios.len();
    // demand[level][sigma] for the ordered commodities.
    let demand: Vec<Vec<f64>> = order
        .iter()
        .map(|&ci| {
            let (b, s) = commodities[ci];
            scenarios.iter().map(|sc| sc.demand(b, s)).collect()
        })
        .collect();
    // Admissible completion bound: the cheapest path of every remaining
    // commodity, weighted by that scenario's demand.
    let mut suffix_min = vec![vec![0.0f64; ns]; order.len() + 1];
    for lvl in (0..order.len()).rev() {
        let emin = paths[lvl].first().map_or(0.0, |p| p.energy);
        for sc in 0..ns {
            suffix_min[lvl][sc] = suffix_min[lvl + 1][sc] + demand[lvl][sc] * emin;
        }
    }

    let caps: Vec<f64> = instance.relays().iter().map(|r| r.capacity).collect();
    let mut search = Search {
        paths: &paths,
        demand: &demand,
        caps: &caps,
        budget,
        ns,
        suffix_min: &suffix_min,
        guard,
        visited: 0,
        best: f64::INFINITY,
        best_choice: None,
        choice: vec![0; order.len()],
        partial: vec![0.0; ns],
        load: vec![0.0; nr * ns],
        union: forced_relays,
    };
    search.dive(0)?;

    let Some(choice) = search.best_choice else {
        return Ok(None);
    };
    let mut x = vec![vec![false; instance.num_arcs()]; commodities.len()];
    let mut union = forced_relays;
    for (lvl, &pi) in choice.iter().enumerate() {
        let path = &paths[lvl][pi];
        for &a in &path.arcs {
            x[order[lvl]][a as usize] = true;
        }
        union |= path.relays;
    }
    let y: Vec<bool> = (0..nr).map(|r| union & (1 << r) != 0).collect();
    let solution = evaluate(instance, &x, &y)?;
    debug_assert!(solution.feasible, "enumerated optimum must be feasible: {:?}", solution.violations);
    Ok(Some((solution.energy, solution)))
}

struct Search<'a> {
    paths: &'a [Vec<Path>],
    demand: &'a [Vec<f64>],
    caps: &'a [f64],
    budget: u32,
    ns: usize,
    suffix_min: &'a [Vec<f64>],
    guard: &'a SizeGuard,
    visited: u64,
    best: f64,
    best_choice: Option<Vec<usize>>,
    choice: Vec<usize>,
    partial: Vec<f64>,
    load: Vec<f64>,
    union: u64,
}

impl Search<'_> {
    fn dive(&mut self, lvl: usize) -> Result<(), EnumerateError> {
        if lvl == self.paths.len() {
            let value = self.partial.iter().fold(0.0f64, |a, &b| a.max(b));
            if value < self.best {
                self.best = value;
                self.best_choice = Some(self.choice.clone());
            }
            return Ok(());
        }
        // Paths come sorted by energy, so the completion bound is monotone
        // within the loop only through the partial term, not the suffix.
        'paths: for pi in 0..self.paths[lvl].len() {
            self.visited += 1;
            if self.visited > self.guard.max_search_nodes {
                return Err(EnumerateError::SearchTooLarge { max: self.guard.max_search_nodes });
            }
            let path = &self.paths[lvl][pi];
            let union = self.union | path.relays;
            if union.count_ones() > self.budget {
                continue;
            }
            let mut bound = f64::NEG_INFINITY;
            for sc in 0..self.ns {
                let partial = self.partial[sc] + self.demand[lvl][sc] * path.energy;
                bound = bound.max(partial + self.suffix_min[lvl + 1][sc]);
            }
            if bound >= self.best {
                continue;
            }
            let mut relays = path.relays;
            while relays != 0 {
                let r = relays.trailing_zeros() as usize;
                relays &= relays - 1;
                for sc in 0..self.ns {
                    if self.load[r * self.ns + sc] + self.demand[lvl][sc] > self.caps[r] {
                        continue 'paths;
                    }
                }
            }

            let saved_union = self.union;
            self.union = union;
            let mut relays = path.relays;
            while relays != 0 {
                let r = relays.trailing_zeros() as usize;
                relays &= relays - 1;
                for sc in 0..self.ns {
                    self.load[r * self.ns + sc] += self.demand[lvl][sc];
                }
            }
            for sc in 0..self.ns {
                self.partial[sc] += self.demand[lvl][sc] * path.energy;
            }
            self.choice[lvl] = pi;

            self.dive(lvl + 1)?;

            for sc in 0..self.ns {
                self.partial[sc] -= self.demand[lvl][sc] * path.energy;
            }
            let mut relays = path.relays;
            while relays != 0 {
                let r = relays.trailing_zeros() as usize;
                relays &= relays - 1;
                for sc in 0..self.ns {
                    self.load[r * self.ns + sc] -= self.demand[lvl][sc];
                }
            }
            self.union = saved_union;
        }
        Ok(())
    }
}

/// All simple paths of one commodity, honoring flow and relay fixings,
/// sorted by per-bit energy (stable, so ties keep discovery order).
fn commodity_paths(
    instance: &BanInstance,
    guard: &SizeGuard,
    mask: &[FixMask],
    layout: &VariableLayout,
    ci: usize,
) -> Result<Vec<Path>, EnumerateError> {
    let (b, s) = instance.commodities()[ci];
    let required: Vec<u32> = (0..instance.num_arcs() as u32)
        .filter(|&a| mask[layout.flow(ci, a as usize)] == FixMask::One)
        .collect();
    let arc_banned = |a: u32| mask[layout.flow(ci, a as usize)] == FixMask::Zero;
    let relay_banned = |r: usize| mask[layout.relay(r)] == FixMask::Zero;

    let mut out = Vec::new();
    let mut stack: Vec<u32> = Vec::new();
    let mut visited: u64 = 0;
    dfs_paths(
        instance,
        guard,
        NodeId::biosensor(b),
        s,
        &arc_banned,
        &relay_banned,
        &mut stack,
        &mut visited,
        &mut out,
    )
    .map_err(|()| EnumerateError::TooManyPaths {
        biosensor: b,
        sink: s,
        max: guard.max_paths_per_commodity,
    })?;
    out.retain(|p| required.iter().all(|a| p.arcs.contains(a)));
    out.sort_by(|a, b| a.energy.partial_cmp(&b.energy).unwrap());
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths(
    instance: &BanInstance,
    guard: &SizeGuard,
    node: NodeId,
    sink: usize,
    arc_banned: &dyn Fn(u32) -> bool,
    relay_banned: &dyn Fn(usize) -> bool,
    stack: &mut Vec<u32>,
    visited: &mut u64,
    out: &mut Vec<Path>,
) -> Result<(), ()> {
    for &a in instance.out_arcs(node) {
        if arc_banned(a) {
            continue;
        }
        let arc = &instance.arcs()[a as usize];
        match arc.head.kind {
            NodeKind::Sink => {
                if arc.head.index != sink {
                    continue;
                }
                if out.len() >= guard.max_paths_per_commodity {
                    return Err(());
                }
                stack.push(a);
                let energy = stack.iter().map(|&k| instance.arcs()[k as usize].energy).sum();
                out.push(Path { arcs: stack.clone(), relays: *visited, energy });
                stack.pop();
            }
            NodeKind::Relay => {
                let r = arc.head.index;
                if relay_banned(r) || *visited & (1 << r) != 0 {
                    continue;
                }
                stack.push(a);
                *visited |= 1 << r;
                dfs_paths(instance, guard, arc.head, sink, arc_banned, relay_banned, stack, visited, out)?;
                *visited &= !(1 << r);
                stack.pop();
            }
            NodeKind::Biosensor => unreachable!("biosensors never receive"),
        }
    }
    Ok(())
}
