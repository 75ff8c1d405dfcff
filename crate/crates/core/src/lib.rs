//! Simulation and verification library for edge-reinforced random walks on
//! bounded-degree graphs.
//!
//! A walker on a graph re-traverses edges with probability proportional to
//! `W(count)`, where `W` is a configurable reinforcement weight sequence and
//! `count` is the number of times the edge has been crossed so far. Strongly
//! reinforcing weights (those with summable reciprocals) pull the walk onto a
//! single attracting edge; weaker ones let it keep exploring. This crate
//! provides:
//!
//! * [`graph`] — graph providers (finite explicit graphs, cycles, lattices,
//!   lazy infinite graphs) behind a common neighbor-oracle trait, plus
//!   odd-cycle enumeration and the `nu` odd-cycle statistic;
//! * [`weight`] — weight families behind a common trait, the derived series
//!   (reciprocal partial sums, tail sums, total-variation tails) with
//!   certified tail bounds, and the H0–H3 hypothesis checkers;
//! * [`walk`] — the sampling engine: sparse edge counts, seeded reproducible
//!   transitions, per-step observers;
//! * [`diagnostics`] — the zeta/eps/kappa accumulators of cycle runs, exact
//!   identity residuals, excursion bookkeeping at a distinguished vertex, and
//!   attraction classification;
//! * [`harness`] — batched Monte Carlo experiments with deterministic
//!   reports, named presets, and calibrated statistical assertions.

pub mod diagnostics;
pub mod graph;
pub mod harness;
pub mod numeric;
pub mod walk;
pub mod weight;
