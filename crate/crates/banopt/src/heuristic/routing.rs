//! Per-commodity routing machinery for the construction phase: weighted
//! shortest paths, candidate pools built by iterative arc deletion, and the
//! probabilistic path choice.

use crate::instance::{BanInstance, NodeId, NodeKind};
use rand::Rng;
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

/// One candidate route: its arcs, its per-bit energy, and the mean trail
/// weight along it at pool-build time.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub arcs: Vec<u32>,
    pub energy: f64,
    pub trail_mean: f64,
}

struct HeapEntry {
    cost: f64,
    node: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.node == other.node
    }
}
impl Eq for HeapEntry {}
impl Ord for HeapEntry {
    // Min-heap on (cost, node): ties always resolve to the smallest node
    // index so path choice is reproducible across runs and builds.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra from the commodity's biosensor to its sink over the admissible
/// arcs, skipping `banned` arcs. Weights must be nonnegative. Returns the arc
/// sequence of a cheapest path, or `None` when the sink is unreachable.
pub fn shortest_path(
    instance: &BanInstance,
    commodity: (usize, usize),
    weight: impl Fn(u32) -> f64,
    banned: &HashSet<u32>,
) -> Option<Vec<u32>> {
    let (b, s) = commodity;
    let n = instance.num_nodes();
    let start = instance.node_ord(NodeId::biosensor(b));
    let target = instance.node_ord(NodeId::sink(s));
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<u32>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[start] = 0.0;
    heap.push(HeapEntry { cost: 0.0, node: start });

    while let Some(HeapEntry { cost, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        if node == target {
            break;
        }
        let node_id = if node == start {
            NodeId::biosensor(b)
        } else {
            // Only the start biosensor and relays ever expand; sinks have no
            // outgoing arcs.
            let nb = instance.num_biosensors();
            if node < nb || node >= nb + instance.num_relays() {
                continue;
            }
            NodeId::relay(node - nb)
        };
        for &a in instance.out_arcs(node_id) {
            if banned.contains(&a) {
                continue;
            }
            let arc = &instance.arcs()[a as usize];
            if arc.head.kind == NodeKind::Sink && arc.head.index != s {
                continue;
            }
            let w = weight(a);
            debug_assert!(w >= 0.0, "negative routing weight on arc {a}");
            let next = instance.node_ord(arc.head);
            let cand = cost + w;
            if cand < dist[next] {
                dist[next] = cand;
                pred[next] = Some(a);
                heap.push(HeapEntry { cost: cand, node: next });
            }
        }
    }

    if dist[target].is_infinite() {
        return None;
    }
    let mut arcs = Vec::new();
    let mut node = target;
    while node != start {
        let a = pred[node].expect("reachable node has a predecessor");
        arcs.push(a);
        node = instance.node_ord(instance.arcs()[a as usize].tail);
    }
    arcs.reverse();
    Some(arcs)
}

/// Builds up to `count` distinct candidate routes by repeated shortest-path
/// queries, each time deleting the arc with the weakest trail value on the
/// last route found (ties to the lowest arc index) so the next query must
/// diversify. `trail` is indexed by arc.
///
/// With `literal` unset (the default), the routing weight of an arc is
/// `max(1 + 1e-6 - trail, 1e-6)` so strong trails attract the search; the
/// literal variant uses the trail value itself as the weight, which instead
/// repels it, and is kept selectable for comparison.
pub fn candidate_paths(
    instance: &BanInstance,
    commodity: (usize, usize),
    trail: &[f64],
    count: usize,
    literal: bool,
) -> Vec<Candidate> {
    debug_assert_eq!(trail.len(), instance.num_arcs());
    let weight = |a: u32| -> f64 {
        let w = trail[a as usize];
        if literal {
            w.max(0.0)
        } else {
            (1.0 + 1e-6 - w).max(1e-6)
        }
    };
    let mut banned: HashSet<u32> = HashSet::new();
    let mut out: Vec<Candidate> = Vec::new();
    while out.len() < count {
        let Some(arcs) = shortest_path(instance, commodity, weight, &banned) else {
            break;
        };
        let energy = arcs.iter().map(|&a| instance.arcs()[a as usize].energy).sum();
        let weakest = arcs
            .iter()
            .copied()
            .min_by(|&x, &y| {
                trail[x as usize]
                    .total_cmp(&trail[y as usize])
                    .then(x.cmp(&y))
            })
            .expect("a path has at least one arc");
        out.push(Candidate { arcs, energy, trail_mean: 0.0 });
        banned.insert(weakest);
    }
    for c in &mut out {
        c.trail_mean = c.arcs.iter().map(|&a| trail[a as usize]).sum::<f64>() / c.arcs.len() as f64;
    }
    out
}

/// Selection probabilities over a candidate pool: each path is scored by
/// `trail_mean^alpha * (e_min / energy)^(1 - alpha)` and scores are
/// normalized. A degenerate pool (all scores zero) falls back to uniform.
pub fn path_probabilities(trail_means: &[f64], energies: &[f64], alpha: f64) -> Vec<f64> {
    assert_eq!(trail_means.len(), energies.len());
    assert!(!trail_means.is_empty(), "no candidates to choose from");
    let e_min = energies.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let scores: Vec<f64> = trail_means
        .iter()
        .zip(energies)
        .map(|(&t, &e)| {
            let attract = if e > 0.0 { e_min / e } else { 1.0 };
            t.max(0.0).powf(alpha) * attract.powf(1.0 - alpha)
        })
        .collect();
    let total: f64 = scores.iter().sum();
    let probs: Vec<f64> = if total > 0.0 && total.is_finite() {
        scores.iter().map(|&v| v / total).collect()
    } else {
        vec![1.0 / scores.len() as f64; scores.len()]
    };
    let check: f64 = probs.iter().sum();
    assert!((check - 1.0).abs() <= 1e-9, "probabilities sum to {check}");
    probs
}

/// Draws an index from a discrete distribution.
pub fn sample_index(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if r < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Cheapest route by per-bit energy, used when the trail-guided choice has no
/// workable candidate.
pub fn min_energy_path(instance: &BanInstance, commodity: (usize, usize)) -> Option<Vec<u32>> {
    shortest_path(
        instance,
        commodity,
        |a| instance.arcs()[a as usize].energy,
        &HashSet::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{build_arcs, BanInstance, EnergyParams, Layout, Point, Relay, Scenario, DEFAULT_PATHLOSS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Biosensor at the top, two relay chains and a direct link to the sink.
    fn diamond() -> BanInstance {
        let layout = Layout {
            biosensors: vec![Point::new(0.25, 1.0)],
            relays: vec![Point::new(0.15, 0.8), Point::new(0.35, 0.8)],
            sinks: vec![Point::new(0.25, 0.6)],
            biosensor_range: 0.5,
            relay_range: 0.5,
            pathloss: DEFAULT_PATHLOSS,
            energy: EnergyParams::default(),
        };
        let arcs = build_arcs(&layout).unwrap();
        BanInstance::new(
            layout.biosensors.clone(),
            vec![
                Relay { position: layout.relays[0], capacity: 50.0 },
                Relay { position: layout.relays[1], capacity: 50.0 },
            ],
            layout.sinks.clone(),
            arcs,
            vec![Scenario { id: 0, demand: vec![vec![10.0]] }],
            2,
            EnergyParams::default(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn shortest_path_follows_the_weights() {
        let inst = diamond();
        // Unit weights: the direct one-arc route wins.
        let p = shortest_path(&inst, (0, 0), |_| 1.0, &HashSet::new()).unwrap();
        assert_eq!(p.len(), 1);
        let direct = p[0];
        // Make the direct arc expensive: a two-arc relay route wins.
        let p2 = shortest_path(
            &inst,
            (0, 0),
            |a| if a == direct { 10.0 } else { 1.0 },
            &HashSet::new(),
        )
        .unwrap();
        assert_eq!(p2.len(), 2);
        // Banning every arc out of the biosensor leaves nothing.
        let all: HashSet<u32> = inst.out_arcs(NodeId::biosensor(0)).iter().copied().collect();
        assert!(shortest_path(&inst, (0, 0), |_| 1.0, &all).is_none());
    }

    #[test]
    fn candidate_pool_is_distinct_and_ranked_by_trail() {
        let inst = diamond();
        // Strong trail on the direct arc, weak elsewhere.
        let direct = shortest_path(&inst, (0, 0), |_| 1.0, &HashSet::new()).unwrap()[0];
        let mut trail = vec![0.2; inst.num_arcs()];
        trail[direct as usize] = 0.9;
        let pool = candidate_paths(&inst, (0, 0), &trail, 5, false);
        assert!(pool.len() >= 3, "diamond offers at least three routes");
        assert_eq!(pool[0].arcs, vec![direct], "strongest trail goes first");
        let mut seen: Vec<&[u32]> = Vec::new();
        for c in &pool {
            assert!(!seen.contains(&c.arcs.as_slice()), "duplicate candidate");
            seen.push(&c.arcs);
            assert!((c.trail_mean
                - c.arcs.iter().map(|&a| trail[a as usize]).sum::<f64>() / c.arcs.len() as f64)
                .abs()
                <= 1e-15);
        }
        // The literal variant treats the trail as a cost and avoids it.
        let pool_lit = candidate_paths(&inst, (0, 0), &trail, 5, true);
        assert_ne!(pool_lit[0].arcs, vec![direct]);
    }

    #[test]
    fn probabilities_normalize_and_favor_strong_trails() {
        let probs = path_probabilities(&[0.9, 0.1, 0.1], &[1.0, 1.0, 1.0], 0.5);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        assert!(probs[0] > probs[1]);
        assert!((probs[1] - probs[2]).abs() <= 1e-12);
        // Zero trails everywhere: uniform fallback.
        let probs = path_probabilities(&[0.0, 0.0], &[1.0, 2.0], 1.0);
        assert_eq!(probs, vec![0.5, 0.5]);
        // Alpha 0 ignores trails entirely: pure energy attraction.
        let probs = path_probabilities(&[0.9, 0.1], &[2.0, 1.0], 0.0);
        assert!(probs[1] > probs[0]);
    }

    #[test]
    fn sampling_matches_the_distribution() {
        let probs = vec![0.7, 0.2, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 3];
        let n = 20_000;
        for _ in 0..n {
            counts[sample_index(&mut rng, &probs)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / n as f64;
            assert!((freq - probs[i]).abs() < 0.02, "index {i}: {freq} vs {}", probs[i]);
        }
    }

    #[test]
    fn min_energy_route_prefers_the_direct_arc() {
        let inst = diamond();
        // Circuit cost dominates at body scale, so fewer hops means less
        // energy and the single-arc route is cheapest per bit.
        let p = min_energy_path(&inst, (0, 0)).unwrap();
        assert_eq!(p.len(), 1);
    }
}
