//! Command-line front end: instance generation, the three solvers, and the
//! comparative benchmark. Set `BANOPT_THREADS` to cap the worker pool.

use anyhow::{Context, Result};
use banopt::bench::{csv_string, run_bench, trace_text, BenchConfig};
use banopt::heuristic::{run as run_heuristic, HeuristicConfig};
use banopt::instance::{
    generate_instance, load_instance, save_instance, BanInstance, GeneratorProfile,
};
use banopt::mip::{
    enumerate_exact, solve_mip, FixMask, MipLimits, MipStatus, SizeGuard,
};
use banopt::model::build_rob_band_ilp;
use banopt::par;
use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "banopt", version, about = "Robust wireless body-network design")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    /// Full-size body layout (16 biosensors, 400 candidate relays).
    Default,
    /// Toy size for exact cross-checks.
    Small,
    /// Mid size used in comparative benchmarks.
    Mid,
}

impl ProfileArg {
    fn profile(self) -> GeneratorProfile {
        match self {
            ProfileArg::Default => GeneratorProfile::default(),
            ProfileArg::Small => GeneratorProfile::small(),
            ProfileArg::Mid => GeneratorProfile::mid(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance and write it as JSON.
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Default)]
        profile: ProfileArg,
        /// Output path for the instance JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve with the construction heuristic.
    SolveHeur {
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.1)]
        rho: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        window: usize,
        #[arg(long, default_value_t = 5)]
        candidates: usize,
        #[arg(long, default_value_t = 4)]
        ants: usize,
        /// Whole-run budget in seconds (ignored with --cycles).
        #[arg(long, default_value_t = 1800.0)]
        time_limit: f64,
        #[arg(long, default_value_t = 600.0)]
        rins_improve_limit: f64,
        #[arg(long, default_value_t = 60.0)]
        rins_repair_limit: f64,
        /// Deterministic mode: run exactly this many cycles.
        #[arg(long)]
        cycles: Option<u64>,
        /// Treat trail values as routing costs directly.
        #[arg(long)]
        literal_shortest_path: bool,
        /// Write the event log (tab-separated) to this path.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Solve exactly with branch and bound.
    SolveMip {
        instance: PathBuf,
        /// Wall-clock limit in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Node budget (deterministic).
        #[arg(long)]
        nodes: Option<u64>,
    },
    /// Certify small instances by exhaustive enumeration.
    SolveOracle {
        instance: PathBuf,
        #[arg(long, default_value_t = 60)]
        max_relays: usize,
        #[arg(long, default_value_t = 200_000)]
        max_paths: usize,
        #[arg(long, default_value_t = 50_000_000)]
        max_search_nodes: u64,
    },
    /// Compare branch and bound against the heuristic on a set of instances.
    Bench {
        /// Instance JSON files (at least one).
        #[arg(required = true)]
        instances: Vec<PathBuf>,
        /// Per-solver budget in seconds.
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        /// Deterministic mode: heuristic cycles per instance.
        #[arg(long)]
        cycles: Option<u64>,
        /// Node budget for the exact side.
        #[arg(long)]
        mip_nodes: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the CSV (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the combined event log.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<BanInstance> {
    load_instance(path).with_context(|| format!("loading instance {}", path.display()))
}

fn instance_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn main() -> Result<()> {
    if let Ok(threads) = std::env::var("BANOPT_THREADS") {
        let n: usize = threads
            .parse()
            .with_context(|| format!("BANOPT_THREADS must be a positive integer, got {threads:?}"))?;
        par::configure_threads(Some(n));
    }
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { seed, profile, out } => {
            let inst = generate_instance(seed, &profile.profile())
                .context("instance generation failed")?;
            save_instance(&inst, &out)
                .with_context(|| format!("writing {}", out.display()))?;
            println!(
                "generated seed={seed} biosensors={} relays={} sinks={} scenarios={} arcs={} -> {}",
                inst.num_biosensors(),
                inst.num_relays(),
                inst.num_sinks(),
                inst.num_scenarios(),
                inst.num_arcs(),
                out.display()
            );
        }
        Command::SolveHeur {
            instance,
            seed,
            epsilon,
            rho,
            alpha,
            window,
            candidates,
            ants,
            time_limit,
            rins_improve_limit,
            rins_repair_limit,
            cycles,
            literal_shortest_path,
            trace,
        } => {
            let inst = load(&instance)?;
            let config = HeuristicConfig {
                seed,
                epsilon,
                rho,
                alpha,
                window,
                candidates,
                ants,
                time_limit,
                rins_improve_limit,
                rins_repair_limit,
                cycles,
                literal_shortest_path,
                ..HeuristicConfig::default()
            };
            let out = run_heuristic(&inst, &config)?;
            match out.best_value {
                Some(v) => {
                    println!("status: Feasible");
                    println!("objective: {v:.9e}");
                }
                None => println!("status: NoSolution"),
            }
            println!("bound: {:.9e}", out.lower_bound);
            if let Some(g) = out.gap {
                println!("gap: {:.6}", g);
            }
            println!("cycles: {}", out.cycles_run);
            if let Some(path) = trace {
                let mut text = String::new();
                for e in &out.trace {
                    text.push_str(&format!("{:.3}\t{}\t{:.9e}\n", e.t, e.kind, e.value));
                }
                std::fs::write(&path, text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::SolveMip { instance, time_limit, nodes } => {
            let inst = load(&instance)?;
            let model = build_rob_band_ilp(&inst);
            let limits = MipLimits { time: time_limit, nodes };
            let free = vec![FixMask::Free; model.layout.num_binaries()];
            let res = solve_mip(&model, &free, &limits, None)?;
            println!("status: {:?}", res.status);
            if let Some(v) = res.objective {
                println!("objective: {v:.9e}");
            }
            println!("bound: {:.9e}", res.bound);
            println!("nodes: {}", res.nodes);
            if res.status == MipStatus::Infeasible {
                std::process::exit(3);
            }
        }
        Command::SolveOracle { instance, max_relays, max_paths, max_search_nodes } => {
            let inst = load(&instance)?;
            let guard = SizeGuard {
                max_relays,
                max_paths_per_commodity: max_paths,
                max_search_nodes,
            };
            match enumerate_exact(&inst, &guard)? {
                Some((value, sol)) => {
                    println!("status: Optimal");
                    println!("objective: {value:.9e}");
                    let active: Vec<String> = sol
                        .y
                        .iter()
                        .enumerate()
                        .filter(|&(_, &on)| on)
                        .map(|(r, _)| format!("r{r}"))
                        .collect();
                    println!("relays: {}", active.join(" "));
                }
                None => {
                    println!("status: Infeasible");
                    std::process::exit(3);
                }
            }
        }
        Command::Bench { instances, time_limit, cycles, mip_nodes, seed, out, trace } => {
            let mut pairs = Vec::with_capacity(instances.len());
            for path in &instances {
                pairs.push((instance_id(path), load(path)?));
            }
            let config = BenchConfig {
                time_limit,
                cycles,
                mip_nodes,
                heuristic: HeuristicConfig { seed, ..HeuristicConfig::default() },
            };
            let rows = run_bench(&pairs, &config)?;
            let csv = csv_string(&rows);
            match out {
                Some(path) => std::fs::write(&path, &csv)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => print!("{csv}"),
            }
            if let Some(path) = trace {
                std::fs::write(&path, trace_text(&rows))
                    .with_context(|| format!("writing {}", path.display()))?;
            }
        }
    }
    Ok(())
}
