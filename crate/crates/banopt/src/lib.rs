//! Robust body-area-network (BAN) design toolkit.
//!
//! A BAN instance places biosensors, candidate relays and sinks on a 2-D body
//! surface. Each biosensor must route its traffic to every sink it serves over
//! single-path links, relays may be activated at a cost of one unit of a global
//! budget, and per-scenario traffic matrices capture demand uncertainty. The
//! objective is the worst-case (over scenarios) total transmission energy per
//! second.
//!
//! The crate provides:
//! - [`instance`]: instance data model, seeded generator, JSON persistence;
//! - [`model`]: the single-scenario and robust ILP formulations plus an exact
//!   evaluator for candidate assignments;
//! - [`lp`]: a bounded-variable revised simplex solver with warm starts and
//!   mixed-integer Gomory cut strengthening;
//! - [`mip`]: branch-and-bound on top of [`lp`], plus a solver-independent
//!   enumeration oracle for small instances;
//! - [`heuristic`]: a three-phase matheuristic (relaxation-guided fixing,
//!   probabilistic routing construction, exact large-neighbourhood search);
//! - [`bench`]: head-to-head comparison harness emitting CSV and trace files.
//!
//! The `parallel` feature (on by default) runs independent ants and benchmark
//! instances on a rayon pool; disabling it yields a dependency-free sequential
//! build that produces identical results.

pub mod bench;
pub mod heuristic;
pub mod instance;
pub mod lp;
pub mod mip;
pub mod model;
pub mod par;
