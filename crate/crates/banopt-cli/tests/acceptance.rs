//! Acceptance gate for the whole stack. Each test checks one release
//! criterion and prints a single `ACCEPTANCE <name>: PASS|FAIL` line before
//! asserting, so a transcript of the run doubles as the sign-off record.
//!
//! The exact-solver criteria use instances small enough for the enumeration
//! oracle; the comparative criterion runs the full benchmark at mid scale
//! with real per-solver time budgets and therefore dominates the suite's
//! runtime.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use banopt::heuristic::{
    candidate_paths, mod_rins, path_probabilities, reinforcement_factor, run, sample_index,
    HeuristicConfig,
};
use banopt::instance::{
    build_arcs, generate_instance, BanInstance, EnergyParams, GeneratorProfile, Layout, Point,
    Relay, Scenario, DEFAULT_PATHLOSS,
};
use banopt::lp::{strengthen, LpStatus, Sense};
use banopt::mip::{
    enumerate_exact, enumerate_exact_masked, solve_mip, FixMask, MipLimits, MipStatus, SizeGuard,
};
use banopt::model::{build_rob_band_ilp, RobustModel, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CUT_ROUNDS: usize = 5;

fn conclude(name: &str, pass: bool, detail: &str) {
    // Write past the harness's per-test capture so the verdict line shows up
    // in plain `cargo test` output, not only under --nocapture.
    let mut out = std::io::stdout();
    writeln!(out, "ACCEPTANCE {name}: {}", if pass { "PASS" } else { "FAIL" }).unwrap();
    out.flush().unwrap();
    assert!(pass, "{name}: {detail}");
}

/// First generator seed at or after `seed` that yields a connected instance.
fn gen_ok(seed: u64, profile: &GeneratorProfile) -> BanInstance {
    (0..50)
        .find_map(|k| generate_instance(seed + 1000 * k, profile).ok())
        .expect("profile must admit a connected instance")
}

/// Twenty oracle-scale instances: one sink, at most four biosensors, at most
/// ten candidate relays, at most three demand scenarios.
fn small_suite() -> Vec<BanInstance> {
    let tight = GeneratorProfile {
        biosensors: 4,
        relays: 8,
        scenarios: 3,
        capacity_factor: 3.0,
        ..GeneratorProfile::small()
    };
    let wide = GeneratorProfile {
        biosensors: 4,
        relays: 10,
        scenarios: 3,
        capacity_factor: 5.0,
        relay_budget: Some(4),
        ..GeneratorProfile::small()
    };
    let profiles = [GeneratorProfile::small(), tight, wide];
    (0..20u64).map(|i| gen_ok(i, &profiles[i as usize % 3])).collect()
}

fn oracle_value(inst: &BanInstance) -> (f64, Solution) {
    enumerate_exact(inst, &SizeGuard::default())
        .expect("within enumeration guards")
        .expect("generated instances are connected")
}

/// Flattens a solution into the binary vector ordering of the model layout.
fn binaries_of(model: &RobustModel, sol: &Solution) -> Vec<bool> {
    let l = &model.layout;
    let mut bits = vec![false; l.num_binaries()];
    for (c, flows) in sol.x.iter().enumerate() {
        for (a, &on) in flows.iter().enumerate() {
            bits[l.flow(c, a)] = on;
        }
    }
    for (r, &on) in sol.y.iter().enumerate() {
        bits[l.relay(r)] = on;
    }
    bits
}

#[test]
fn oracle_equivalence() {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for (i, inst) in small_suite().iter().enumerate() {
        let model = build_rob_band_ilp(inst);
        let free = vec![FixMask::Free; model.layout.num_binaries()];
        let mip = solve_mip(&model, &free, &MipLimits::default(), None).unwrap();
        let (opt, _) = oracle_value(inst);
        let ok = mip.status == MipStatus::Optimal
            && mip.objective.is_some_and(|v| (v - opt).abs() <= 1e-9 * opt.abs());
        if !ok {
            mismatches.push(format!("instance {i}: {:?} vs oracle {opt:.9e}", mip.objective));
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(300);
    conclude(
        "oracle_equivalence",
        pass,
        &format!("mismatches {mismatches:?}, elapsed {elapsed:?}"),
    );
}

#[test]
fn heuristic_quality() {
    let config = HeuristicConfig { cycles: Some(30), ..HeuristicConfig::default() };
    let mut within = 0;
    let mut infeasible = Vec::new();
    let suite = small_suite();
    for (i, inst) in suite.iter().enumerate() {
        let (opt, _) = oracle_value(inst);
        let out = run(inst, &config).unwrap();
        match (&out.best, out.best_value) {
            (Some(sol), Some(v)) => {
                if !sol.feasible {
                    infeasible.push(i);
                } else if v <= 1.05 * opt {
                    within += 1;
                }
            }
            _ => infeasible.push(i),
        }
    }
    let pass = infeasible.is_empty() && within >= 16;
    conclude(
        "heuristic_quality",
        pass,
        &format!("{within}/{} within 5%, infeasible on {infeasible:?}", suite.len()),
    );
}

/// Mid-scale instance whose relaxation is feasible. Connectivity alone does
/// not guarantee that: clustered geometry can force more demand through a
/// cut relay than budget and capacities admit, and a gap comparison on such
/// an instance is undefined for both solvers.
fn gen_feasible_mid(seed: u64) -> BanInstance {
    (0..50)
        .find_map(|k| {
            let inst = generate_instance(seed + 1000 * k, &GeneratorProfile::mid()).ok()?;
            let model = build_rob_band_ilp(&inst);
            (banopt::lp::solve_lp(model.problem(), None).ok()?.status == LpStatus::Optimal)
                .then_some(inst)
        })
        .expect("profile must admit a feasible instance")
}

#[test]
fn comparative_trend() {
    let pairs: Vec<(String, BanInstance)> = (0..10u64)
        .map(|i| (format!("mid_{i:02}"), gen_feasible_mid(100 + i)))
        .collect();
    let config = banopt::bench::BenchConfig {
        time_limit: 300.0,
        cycles: None,
        mip_nodes: None,
        heuristic: HeuristicConfig::default(),
    };
    let rows = banopt::bench::run_bench(&pairs, &config).unwrap();
    let csv = banopt::bench::csv_string(&rows);
    let report = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_bench.csv");
    std::fs::write(&report, &csv).unwrap();
    println!("bench report written to {}", report.display());
    print!("{csv}");

    let wins = rows
        .iter()
        .filter(|r| {
            matches!((r.gap_heu_pct, r.gap_mip_pct), (Some(h), Some(m)) if h <= m + 1e-9)
        })
        .count();
    let pass = wins >= 7;
    conclude("comparative_trend", pass, &format!("heuristic gap <= exact gap on {wins}/10"));
}

/// Diamond layout with both relay orders available: five distinct routes for
/// the single commodity, so the choice distribution has real spread.
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
            Relay { position: layout.relays[0], capacity: 100.0 },
            Relay { position: layout.relays[1], capacity: 100.0 },
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
fn path_choice_statistics() {
    let inst = diamond();
    let commodity = inst.commodities()[0];
    // Uneven synthetic trails so no two candidates tie.
    let trail: Vec<f64> = (0..inst.num_arcs()).map(|a| 0.15 + 0.11 * (a % 7) as f64).collect();
    let pool = candidate_paths(&inst, commodity, &trail, 5, false);
    assert!(pool.len() >= 3, "diamond must admit several routes, got {}", pool.len());
    let means: Vec<f64> = pool.iter().map(|c| c.trail_mean).collect();
    let energies: Vec<f64> = pool.iter().map(|c| c.energy).collect();
    let probs = path_probabilities(&means, &energies, 0.5);

    let draws = 1000u64;
    let mut counts = vec![0usize; probs.len()];
    for ant in 0..draws {
        // One independent stream per ant, exactly like the construction phase.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        rng.set_stream(ant);
        counts[sample_index(&mut rng, &probs)] += 1;
    }
    let mut worst = 0.0f64;
    for (i, &c) in counts.iter().enumerate() {
        worst = worst.max((c as f64 / draws as f64 - probs[i]).abs());
    }
    let pass = worst <= 0.05;
    conclude(
        "path_choice_statistics",
        pass,
        &format!("worst frequency deviation {worst:.4}, probs {probs:?}, counts {counts:?}"),
    );
}

#[test]
fn reinforcement_arithmetic() {
    // Bound 60, window mean 100, new feasible value 80: the trail grows by
    // exactly 0.375 of its initial value.
    let factor = reinforcement_factor(100.0, 80.0, 60.0);
    let tau0 = 0.7;
    let pass = (factor - 0.375).abs() <= 1e-12 * 0.375
        && (tau0 * factor - 0.375 * tau0).abs() <= 1e-12 * 0.375 * tau0;
    conclude("reinforcement_arithmetic", pass, &format!("factor {factor}"));
}

/// Tiny single-commodity fixtures whose full binary hypercube can be walked.
fn cut_fixtures() -> Vec<BanInstance> {
    let direct = {
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
            vec![
                Scenario { id: 0, demand: vec![vec![10.0]] },
                Scenario { id: 1, demand: vec![vec![4.0]] },
            ],
            1,
            EnergyParams::default(),
            None,
        )
        .unwrap()
    };
    vec![direct, diamond()]
}

#[test]
fn cut_validity() {
    // Part one: every feasible binary point of each tiny fixture satisfies
    // every generated cut, and no cut can exclude larger energy values.
    let mut violations = Vec::new();
    for (f, inst) in cut_fixtures().iter().enumerate() {
        let model = build_rob_band_ilp(inst);
        let base_rows = model.problem().rows.len();
        let (strong, _) = strengthen(model.problem(), CUT_ROUNDS).unwrap();
        let cuts = &strong.rows[base_rows..];
        let nb = model.layout.num_binaries();
        assert!(nb <= 16, "fixture {f} too large to enumerate ({nb} binaries)");
        for point in 0u32..(1 << nb) {
            let bits: Vec<bool> = (0..nb).map(|j| point >> j & 1 == 1).collect();
            let Ok(sol) = model.evaluate_binaries(&bits) else { continue };
            if !sol.feasible {
                continue;
            }
            let mut v: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
            v.push(sol.energy);
            let e_var = model.layout.energy();
            for (k, cut) in cuts.iter().enumerate() {
                let lhs: f64 = cut.terms.iter().map(|&(j, a)| a * v[j]).sum();
                let e_coef = cut
                    .terms
                    .iter()
                    .find_map(|&(j, a)| (j == e_var).then_some(a))
                    .unwrap_or(0.0);
                let tol = 1e-6 * cut.rhs.abs().max(1.0);
                // Validity at the tight energy plus along the free-energy ray.
                let ok = match cut.sense {
                    Sense::Le => lhs <= cut.rhs + tol && e_coef <= 1e-9,
                    Sense::Ge => lhs >= cut.rhs - tol && e_coef >= -1e-9,
                    Sense::Eq => (lhs - cut.rhs).abs() <= tol && e_coef.abs() <= 1e-9,
                };
                if !ok {
                    violations.push(format!("fixture {f} point {point:b} cut {k}"));
                }
            }
        }
    }

    // Part two: the tightened relaxation never claims more than the true
    // optimum on the oracle-scale suite.
    let mut bound_breaks = Vec::new();
    for (i, inst) in small_suite().iter().enumerate() {
        let model = build_rob_band_ilp(inst);
        let (_, relax) = strengthen(model.problem(), CUT_ROUNDS).unwrap();
        assert_eq!(relax.status, LpStatus::Optimal);
        let (opt, _) = oracle_value(inst);
        if relax.objective > opt + 1e-9 * opt.abs() {
            bound_breaks.push(format!("instance {i}: bound {} > optimum {opt}", relax.objective));
        }
    }

    let pass = violations.is_empty() && bound_breaks.is_empty();
    conclude("cut_validity", pass, &format!("{violations:?} {bound_breaks:?}"));
}

#[test]
fn determinism() {
    let dir = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_banopt");
    let mut inputs = Vec::new();
    for seed in [11, 12, 13] {
        let path = dir.path().join(format!("det_{seed}.json"));
        let status = Command::new(exe)
            .args(["generate", "--seed", &seed.to_string(), "--profile", "small"])
            .arg("--out")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        inputs.push(path);
    }
    let run_once = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let trace = dir.path().join(format!("{tag}.trace"));
        let mut cmd = Command::new(exe);
        cmd.arg("bench")
            .args(&inputs)
            .args(["--cycles", "4", "--mip-nodes", "300", "--seed", "9"])
            .arg("--out")
            .arg(&csv)
            .arg("--trace")
            .arg(&trace);
        assert!(cmd.status().unwrap().success());
        (std::fs::read(csv).unwrap(), std::fs::read(trace).unwrap())
    };
    let (csv1, trace1) = run_once("first");
    let (csv2, trace2) = run_once("second");
    let pass = csv1 == csv2 && trace1 == trace2 && !csv1.is_empty() && !trace1.is_empty();
    conclude(
        "determinism",
        pass,
        &format!("csv {} vs {} bytes, trace {} vs {} bytes", csv1.len(), csv2.len(), trace1.len(), trace2.len()),
    );
}

#[test]
fn rins_contracts() {
    let suite: Vec<BanInstance> = (0..4u64).map(|i| gen_ok(40 + i, &GeneratorProfile::small())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut trials = 0;
    let mut regressions = Vec::new();
    let mut worst_fixed = Duration::ZERO;

    'outer: for (i, inst) in suite.iter().cycle().enumerate() {
        if trials >= 100 {
            break;
        }
        assert!(i < 400, "not enough feasible references");
        let model = build_rob_band_ilp(inst);
        let (strong, relax) = strengthen(model.problem(), CUT_ROUNDS).unwrap();
        let nb = model.layout.num_binaries();

        // A random relay-side restriction; the oracle turns it into a
        // feasible reference design when one exists.
        let mut mask = vec![FixMask::Free; nb];
        for r in 0..inst.num_relays() {
            mask[model.layout.relay(r)] = match rng.gen_range(0..10) {
                0..=1 => FixMask::Zero,
                2 => FixMask::One,
                _ => FixMask::Free,
            };
        }
        let Some((ref_value, ref_sol)) =
            enumerate_exact_masked(inst, &SizeGuard::default(), &mask).unwrap()
        else {
            continue 'outer;
        };
        let bits = binaries_of(&model, &ref_sol);

        // Relaxation guidance is the root solution plus noise, clamped to the
        // unit box, so the fixing pattern varies across trials.
        let relaxation: Vec<f64> = (0..nb)
            .map(|j| (relax.values[j] + rng.gen_range(-0.4..0.4)).clamp(0.0, 1.0))
            .collect();
        let rho = rng.gen_range(0.05..0.35);
        let limits = MipLimits { time: None, nodes: Some(300) };
        let out = mod_rins(&model, &strong, &bits, &relaxation, rho, &limits, Some(&bits)).unwrap();
        let v = out.objective.expect("hinted search always keeps a feasible point");
        if v > ref_value + 1e-9 * ref_value.abs() {
            regressions.push(format!("trial {trials}: {v:.9e} > reference {ref_value:.9e}"));
        }

        // Fully-fixed call: relaxation echoes the reference bit for bit, so
        // rho 0 freezes every binary and the search is a single evaluation.
        let echoed: Vec<f64> = bits.iter().map(|&b| f64::from(b)).collect();
        let t0 = Instant::now();
        let fixed = mod_rins(&model, &strong, &bits, &echoed, 0.0, &limits, Some(&bits)).unwrap();
        worst_fixed = worst_fixed.max(t0.elapsed());
        assert!(fixed.objective.is_some());
        trials += 1;
    }

    let pass = trials == 100 && regressions.is_empty() && worst_fixed < Duration::from_secs(1);
    conclude(
        "rins_contracts",
        pass,
        &format!("{trials} trials, regressions {regressions:?}, slowest fixed call {worst_fixed:?}"),
    );
}
