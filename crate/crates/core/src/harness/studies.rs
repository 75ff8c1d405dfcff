//! Special-purpose studies: lattice recurrence statistics and the sticky
//! lower bound against Monte Carlo.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{EdgeId, ExplicitGraph, VertexId};
use crate::numeric::{binomial_ci_half_width, quantile_sorted};
use crate::walk::{derive_replica_seed, init_state};
use crate::weight::{sticky_lower_bound, TruncationPolicy, WeightHandle};

use super::report::{min_visits_in_window, ExperimentReport, LATTICE_VISIT_WINDOW};
use super::HarnessError;

/// Per-replica minimum visit counts over a window of the line lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrenceStats {
    pub radius: i64,
    pub per_replica_min: Vec<u64>,
    /// (quantile, value) pairs at 5/25/50/75/95 percent.
    pub quantiles: Vec<(f64, f64)>,
}

/// Minimum visit count over `[-radius, radius]` per replica, with
/// aggregate quantiles. Line-lattice reports only.
pub fn recurrence_stats(
    report: &ExperimentReport,
    radius: i64,
) -> Result<RecurrenceStats, HarnessError> {
    if report.config.graph != "z" {
        return Err(HarnessError::WrongGraph {
            need: "z".into(),
            got: report.config.graph.clone(),
        });
    }
    if radius < 0 || radius > LATTICE_VISIT_WINDOW {
        return Err(HarnessError::Config(format!(
            "radius must be in [0, {LATTICE_VISIT_WINDOW}]"
        )));
    }
    let per_replica_min: Vec<u64> = report
        .per_replica
        .iter()
        .map(|r| {
            min_visits_in_window(r, radius).ok_or_else(|| {
                HarnessError::Config("report lacks visit counts".into())
            })
        })
        .collect::<Result<_, _>>()?;
    let mut sorted: Vec<f64> = per_replica_min.iter().map(|&m| m as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|&q| (q, quantile_sorted(&sorted, q)))
        .collect();
    Ok(RecurrenceStats {
        radius,
        per_replica_min,
        quantiles,
    })
}

/// Sticky product bound versus simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StickyComparison {
    pub bound: f64,
    pub empirical: f64,
    pub ci_half_width: f64,
    pub replicas: u64,
    pub successes: u64,
    pub step_cap: u64,
}

/// Compare the certified lower bound on perpetual traversal with a Monte
/// Carlo estimate on the worst-case star: one target edge at count `m`
/// against `d` competitor edges frozen at the strongest count below `m`.
///
/// Each replica walks from the hub until it either picks a competitor
/// (failure) or survives `step_cap` steps without leaving the target edge.
/// The empirical never-leave frequency must dominate the bound, which is a
/// mathematical lower bound for it.
pub fn sticky_bound_vs_monte_carlo(
    weight: &WeightHandle,
    m: u64,
    d: u32,
    replicas: u64,
    step_cap: u64,
    master_seed: u64,
    policy: &TruncationPolicy,
) -> Result<StickyComparison, HarnessError> {
    if replicas < 1 {
        return Err(HarnessError::Config("replicas must be >= 1".into()));
    }
    let bound = sticky_lower_bound(&**weight, m, d, policy)?;
    if bound == 0.0 {
        return Err(HarnessError::DegenerateBound);
    }
    // Strongest competitor count below m (ties to the smallest count).
    let mut best_j = 1u64;
    let mut best_log = f64::NEG_INFINITY;
    for j in 1..m.max(2) {
        let lw = weight.log_eval(j)?;
        if lw > best_log {
            best_log = lw;
            best_j = j;
        }
    }
    // Star: hub 0, target leaf 1, competitor leaves 2..=d+1.
    let hub = VertexId(0);
    let target = EdgeId::new(hub, VertexId(1));
    let mut edges = vec![(0i64, 1i64)];
    for c in 0..d as i64 {
        edges.push((0, 2 + c));
    }
    let graph = ExplicitGraph::from_edges(format!("star:{d}"), &edges)?;
    let mut overrides = vec![(target, m)];
    for c in 0..d as i64 {
        overrides.push((EdgeId::new(hub, VertexId(2 + c)), best_j));
    }
    let template = init_state(&graph, &**weight, hub, 1, &overrides, 0)?;

    let successes: u64 = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut state = template.clone();
            state.reseed(derive_replica_seed(master_seed, r));
            for _ in 0..step_cap {
                let rec = state
                    .step(&graph, &**weight)
                    .expect("star walk must be steppable");
                if rec.edge != target {
                    return 0u64;
                }
            }
            1u64
        })
        .sum();

    Ok(StickyComparison {
        bound,
        empirical: successes as f64 / replicas as f64,
        ci_half_width: binomial_ci_half_width(successes, replicas),
        replicas,
        successes,
        step_cap,
    })
}
