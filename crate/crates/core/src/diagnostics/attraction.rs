//! Attraction classification from the final window of a run.
//!
//! The limiting edge set of a strongly reinforced walk is (almost surely) a
//! single edge or an odd cycle; at desk scale that is proxied by the edges
//! traversed in the final fraction of a finite run.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{EdgeId, VertexId};
use crate::walk::{StepObserver, StepRecord, WalkState};

use super::DiagError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum AttractionOutcome {
    /// Every traversal in the window used this one edge.
    SingleEdge(EdgeId),
    /// The window's edge set is exactly an odd cycle, every edge traversed
    /// at least `min_count` times; vertices listed in canonical tour order.
    OddCycle(Vec<VertexId>),
    Undecided,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttractionReport {
    pub outcome: AttractionOutcome,
    /// Step interval `(start, end]` the evidence was collected over.
    pub window: (u64, u64),
    /// Per-edge traversal counts inside the window, sorted by edge.
    pub evidence: Vec<(EdgeId, u64)>,
    /// Last step (over the whole run) whose edge differed from the
    /// previous step's edge; None when the walk never switched.
    pub last_switch: Option<u64>,
}

/// Observer that tallies traversals in the final window of a run of known
/// length, and tracks edge switches over the whole run.
pub struct WindowTally {
    total_steps: u64,
    window_start: u64,
    window_counts: BTreeMap<EdgeId, u64>,
    window_steps: u64,
    prev_edge: Option<EdgeId>,
    last_switch: Option<u64>,
}

impl WindowTally {
    /// `window_fraction` in (0, 1]: the tallied window is the final
    /// `fraction` of `total_steps`.
    pub fn new(total_steps: u64, window_fraction: f64) -> Result<Self, DiagError> {
        if !(window_fraction > 0.0 && window_fraction <= 1.0) {
            return Err(DiagError::WindowTooShort {
                window: 0,
                min_count: 0,
            });
        }
        let window_len = ((total_steps as f64) * window_fraction).round() as u64;
        let window_len = window_len.clamp(total_steps.min(1), total_steps);
        Ok(Self {
            total_steps,
            window_start: total_steps - window_len,
            window_counts: BTreeMap::new(),
            window_steps: 0,
            prev_edge: None,
            last_switch: None,
        })
    }

    pub fn window(&self) -> (u64, u64) {
        (self.window_start, self.total_steps)
    }

    pub fn window_steps(&self) -> u64 {
        self.window_steps
    }

    pub fn window_counts(&self) -> &BTreeMap<EdgeId, u64> {
        &self.window_counts
    }

    pub fn last_switch(&self) -> Option<u64> {
        self.last_switch
    }
}

impl StepObserver for WindowTally {
    fn on_step(&mut self, r: &StepRecord, _state: &WalkState) {
        if let Some(prev) = self.prev_edge {
            if prev != r.edge {
                self.last_switch = Some(r.step);
            }
        }
        self.prev_edge = Some(r.edge);
        if r.step > self.window_start {
            *self.window_counts.entry(r.edge).or_insert(0) += 1;
            self.window_steps += 1;
        }
    }
}

/// Classify the window: one edge, an odd cycle with every edge traversed at
/// least `min_count` times, or undecided.
pub fn classify_attraction(
    tally: &WindowTally,
    min_count: u64,
) -> Result<AttractionReport, DiagError> {
    if tally.window_steps < min_count {
        return Err(DiagError::WindowTooShort {
            window: tally.window_steps,
            min_count,
        });
    }
    let evidence: Vec<(EdgeId, u64)> = tally
        .window_counts
        .iter()
        .map(|(&e, &c)| (e, c))
        .collect();
    let outcome = if evidence.len() == 1 {
        AttractionOutcome::SingleEdge(evidence[0].0)
    } else if let Some(tour) = odd_cycle_tour(&evidence, min_count) {
        AttractionOutcome::OddCycle(tour)
    } else {
        AttractionOutcome::Undecided
    };
    Ok(AttractionReport {
        outcome,
        window: tally.window(),
        evidence,
        last_switch: tally.last_switch(),
    })
}

/// When the edge set is exactly one odd simple cycle with all counts at or
/// above the threshold, return its tour from the smallest vertex toward its
/// smaller neighbor.
fn odd_cycle_tour(evidence: &[(EdgeId, u64)], min_count: u64) -> Option<Vec<VertexId>> {
    if evidence.iter().any(|&(_, c)| c < min_count) {
        return None;
    }
    let mut adjacency: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for &(e, _) in evidence {
        adjacency.entry(e.lo).or_default().push(e.hi);
        adjacency.entry(e.hi).or_default().push(e.lo);
    }
    let n = adjacency.len();
    if n != evidence.len() || n < 3 || n % 2 == 0 {
        return None;
    }
    if adjacency.values().any(|nbrs| nbrs.len() != 2) {
        return None;
    }
    // Walk the 2-regular graph; a single cycle must visit every vertex.
    let start = *adjacency.keys().next().unwrap();
    let mut tour = vec![start];
    let mut prev = start;
    let mut here = {
        let mut nbrs = adjacency[&start].clone();
        nbrs.sort_unstable();
        nbrs[0]
    };
    while here != start {
        tour.push(here);
        let nbrs = &adjacency[&here];
        let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
        prev = here;
        here = next;
        if tour.len() > n {
            return None;
        }
    }
    if tour.len() != n {
        return None;
    }
    Some(tour)
}
