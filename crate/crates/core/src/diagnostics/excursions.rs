//! Excursion bookkeeping at the distinguished vertex 0 of a cycle.
//!
//! An excursion spans two consecutive visits to 0. It is a cycle from the
//! right when the walk departs to 1 and re-enters from -1 (mirrored for the
//! left), and a backtrack when it departs and re-enters through the same
//! neighbor. Per closed excursion the ledger records, for every vertex x:
//!
//! * `u(x)` — the zeta increment minus the one cycle credit
//!   `1/W(count of {x,x+1} at the start)` (sign by cycle direction);
//! * the certified ceiling `delta-span(x)`, the drop of the
//!   total-variation tail between the start and end counts, which bounds
//!   `|u(x)|` pathwise;
//! * `v` — the lambda-weighted combination of the `u` values whose ceiling
//!   is the summed span.
//!
//! Uncompleted excursions (the walk never returns) keep the departure-side
//! credit and are bounded by the start tail alone.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::{GraphProvider, VertexId};
use crate::numeric::{binomial_ci_half_width, Kahan};
use crate::walk::{derive_replica_seed, StepObserver, StepRecord, WalkState};
use crate::weight::{delta_n, TruncationPolicy, WeightHandle};

use super::{lambda_values, plus_edge, DiagError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcursionKind {
    CycleRight,
    CycleLeft,
    Backtrack,
    Incomplete,
}

/// One excursion between consecutive visits to vertex 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Excursion {
    pub kind: ExcursionKind,
    /// (start visit step, end step); for incomplete excursions the end is
    /// the step at which tracking stopped.
    pub span: (u64, u64),
    pub u_values: Vec<f64>,
    pub v_value: f64,
    /// Per-vertex ceilings for |u(x)|.
    pub delta_spans: Vec<f64>,
    /// Ceiling for |v|: the sum of the per-vertex spans.
    pub delta_span_total: f64,
}

/// Edge-weight shares at a visit time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaSnapshot {
    pub step: u64,
    pub lambda: Vec<f64>,
    #[serde(rename = "Lambda")]
    pub capital_lambda: f64,
}

struct OpenExcursion {
    start: u64,
    departure: Option<i64>,
    zeta_delta: Vec<Kahan>,
    start_counts: Vec<u64>,
    start_lambda_idx: usize,
}

/// Observer that tracks visits to 0 and closes excursions as they happen.
pub struct ExcursionLedger {
    ell: usize,
    weight: WeightHandle,
    policy: TruncationPolicy,
    window_start: u64,
    visit_times: Vec<u64>,
    excursions: Vec<Excursion>,
    lambda_snapshots: Vec<LambdaSnapshot>,
    open: Option<OpenExcursion>,
    delta_cache: HashMap<u64, f64>,
}

/// Attach an excursion ledger at the walk's current step (`m` in the visit
/// count convention: visits are counted from this time onward).
pub fn track_excursions(
    state: &WalkState,
    g: &dyn GraphProvider,
    weight: WeightHandle,
    policy: TruncationPolicy,
) -> Result<ExcursionLedger, DiagError> {
    let ell = g
        .cycle_len()
        .ok_or_else(|| DiagError::NotACycle(g.spec_string()))?;
    let mut ledger = ExcursionLedger {
        ell,
        weight,
        policy,
        window_start: state.step_index(),
        visit_times: Vec::new(),
        excursions: Vec::new(),
        lambda_snapshots: Vec::new(),
        open: None,
        delta_cache: HashMap::new(),
    };
    if state.current_vertex() == VertexId(0) {
        ledger.record_visit(state.step_index(), state)?;
    }
    Ok(ledger)
}

impl ExcursionLedger {
    pub fn visit_times(&self) -> &[u64] {
        &self.visit_times
    }

    pub fn excursions(&self) -> &[Excursion] {
        &self.excursions
    }

    pub fn lambda_snapshots(&self) -> &[LambdaSnapshot] {
        &self.lambda_snapshots
    }

    pub fn window_start(&self) -> u64 {
        self.window_start
    }

    pub fn closed_count(&self) -> usize {
        self.excursions
            .iter()
            .filter(|e| e.kind != ExcursionKind::Incomplete)
            .count()
    }

    fn delta_value(&mut self, count: u64) -> Result<f64, DiagError> {
        if let Some(&v) = self.delta_cache.get(&count) {
            return Ok(v);
        }
        let v = delta_n(&*self.weight, count, &self.policy)?.value;
        self.delta_cache.insert(count, v);
        Ok(v)
    }

    fn record_visit(&mut self, step: u64, state: &WalkState) -> Result<(), DiagError> {
        self.visit_times.push(step);
        let (lambda, capital_lambda) = lambda_values(state, &*self.weight, self.ell)?;
        self.lambda_snapshots.push(LambdaSnapshot {
            step,
            lambda,
            capital_lambda,
        });
        let start_counts = (0..self.ell)
            .map(|x| state.edge_count(plus_edge(x, self.ell)))
            .collect();
        self.open = Some(OpenExcursion {
            start: step,
            departure: None,
            zeta_delta: vec![Kahan::new(); self.ell],
            start_counts,
            start_lambda_idx: self.lambda_snapshots.len() - 1,
        });
        Ok(())
    }

    fn close_excursion(
        &mut self,
        open: OpenExcursion,
        kind: ExcursionKind,
        end_step: u64,
        end_counts: Option<&WalkState>,
    ) -> Result<(), DiagError> {
        let ell = self.ell;
        let sign = match kind {
            ExcursionKind::CycleRight => 1.0,
            ExcursionKind::CycleLeft => -1.0,
            ExcursionKind::Backtrack => 0.0,
            // Departure side keeps the credit when the walk never returns.
            ExcursionKind::Incomplete => match open.departure {
                Some(d) if d == 1 => 1.0,
                Some(d) if d == (ell as i64 - 1) => -1.0,
                _ => 0.0,
            },
        };
        let mut u_values = Vec::with_capacity(ell);
        let mut delta_spans = Vec::with_capacity(ell);
        let mut total_span = Kahan::new();
        for x in 0..ell {
            let start_count = open.start_counts[x];
            let credit = sign * self.weight.recip(start_count)?;
            u_values.push(open.zeta_delta[x].value() - credit);
            let span = match end_counts {
                Some(state) => {
                    let end = state.edge_count(plus_edge(x, ell));
                    self.delta_value(start_count)? - self.delta_value(end)?
                }
                // Unbounded horizon: the whole remaining tail.
                None => self.delta_value(start_count)?,
            };
            delta_spans.push(span);
            total_span.add(span);
        }
        let snap = &self.lambda_snapshots[open.start_lambda_idx];
        let coeff0 = snap.lambda[0] + snap.lambda[ell - 1];
        let mut v = Kahan::new();
        for (x, &u) in u_values.iter().enumerate() {
            let indicator = if x == 0 || x == ell - 1 { 1.0 } else { 0.0 };
            v.add((coeff0 - indicator) * u);
        }
        self.excursions.push(Excursion {
            kind,
            span: (open.start, end_step),
            u_values,
            v_value: v.value(),
            delta_spans,
            delta_span_total: total_span.value(),
        });
        Ok(())
    }

    /// Close any open excursion as incomplete (end of observation).
    pub fn finalize(&mut self, state: &WalkState) -> Result<(), DiagError> {
        if let Some(open) = self.open.take() {
            if open.departure.is_some() {
                self.close_excursion(open, ExcursionKind::Incomplete, state.step_index(), None)?;
            }
        }
        Ok(())
    }

    /// Bound violations over recorded excursions: every |u(x)| must stay
    /// within its span and |v| within the total, up to `tolerance` of
    /// floating-point slack. Returns human-readable violation notes.
    pub fn bound_violations(&self, tolerance: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (i, e) in self.excursions.iter().enumerate() {
            for (x, &u) in e.u_values.iter().enumerate() {
                if u.abs() > e.delta_spans[x] + tolerance {
                    out.push(format!(
                        "excursion {i} ({:?}) vertex {x}: |u| = {} > span {}",
                        e.kind,
                        u.abs(),
                        e.delta_spans[x]
                    ));
                }
            }
            if e.v_value.abs() > e.delta_span_total + tolerance {
                out.push(format!(
                    "excursion {i} ({:?}): |v| = {} > total span {}",
                    e.kind,
                    e.v_value.abs(),
                    e.delta_span_total
                ));
            }
        }
        out
    }
}

impl StepObserver for ExcursionLedger {
    fn on_step(&mut self, r: &StepRecord, state: &WalkState) {
        let ell = self.ell;
        if let Some(open) = self.open.as_mut() {
            // zeta increment over the oriented edge (a, a+1).
            let inc = self
                .weight
                .recip(r.count_before)
                .expect("weight evaluated during the step must evaluate here");
            let from = r.from.0 as usize;
            let to = r.to.0 as usize;
            let rightward = to == (from + 1) % ell;
            let a = if rightward { from } else { to };
            open.zeta_delta[a].add(if rightward { inc } else { -inc });
            if r.from == VertexId(0) && open.departure.is_none() {
                open.departure = Some(r.to.0);
            }
        }
        if r.to == VertexId(0) {
            if let Some(open) = self.open.take() {
                if let Some(dep) = open.departure {
                    let arr = r.from.0;
                    let kind = if dep == 1 && arr == ell as i64 - 1 {
                        ExcursionKind::CycleRight
                    } else if dep == ell as i64 - 1 && arr == 1 {
                        ExcursionKind::CycleLeft
                    } else {
                        ExcursionKind::Backtrack
                    };
                    self.close_excursion(open, kind, r.step, Some(state))
                        .expect("delta evaluation must succeed for counts seen in the walk");
                }
            }
            self.record_visit(r.step, state)
                .expect("lambda evaluation must succeed for counts seen in the walk");
        }
    }
}

/// Monte Carlo estimate of the next-excursion cycle probabilities from a
/// frozen state at vertex 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CycleProbEstimate {
    pub replicas: u64,
    pub right: u64,
    pub left: u64,
    pub backtrack: u64,
    /// Replicas that hit the step cap before returning (the never-returns
    /// branch of the excursion classification).
    pub incomplete: u64,
    pub q_right: f64,
    pub q_right_half_width: f64,
    pub q_left: f64,
    pub q_left_half_width: f64,
}

/// Clone the frozen state once per replica with a fresh RNG stream, run
/// each until the walk returns to 0 (or `cap` steps), and report the
/// frequencies of right and left cycles with binomial confidence widths.
pub fn empirical_cycle_probs(
    frozen: &WalkState,
    g: &dyn GraphProvider,
    w: &WeightHandle,
    replicas: u64,
    cap: u64,
    master_seed: u64,
) -> Result<CycleProbEstimate, DiagError> {
    let ell = g
        .cycle_len()
        .ok_or_else(|| DiagError::NotACycle(g.spec_string()))? as i64;
    if frozen.current_vertex() != VertexId(0) {
        return Err(DiagError::NotAtDistinguishedVertex {
            expected: VertexId(0),
            found: frozen.current_vertex(),
        });
    }
    if replicas < 100 {
        return Err(DiagError::BadReplicas {
            got: replicas,
            required: 100,
        });
    }
    let kinds: Vec<ExcursionKind> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut state = frozen.clone();
            state.reseed(derive_replica_seed(master_seed, r));
            let mut departure: Option<i64> = None;
            for _ in 0..cap {
                let rec = state
                    .step(g, &**w)
                    .expect("frozen state must remain steppable");
                if departure.is_none() {
                    departure = Some(rec.to.0);
                }
                if rec.to == VertexId(0) {
                    let dep = departure.unwrap();
                    let arr = rec.from.0;
                    return if dep == 1 && arr == ell - 1 {
                        ExcursionKind::CycleRight
                    } else if dep == ell - 1 && arr == 1 {
                        ExcursionKind::CycleLeft
                    } else {
                        ExcursionKind::Backtrack
                    };
                }
            }
            ExcursionKind::Incomplete
        })
        .collect();
    let count = |k: ExcursionKind| kinds.iter().filter(|&&x| x == k).count() as u64;
    let right = count(ExcursionKind::CycleRight);
    let left = count(ExcursionKind::CycleLeft);
    let backtrack = count(ExcursionKind::Backtrack);
    let incomplete = count(ExcursionKind::Incomplete);
    Ok(CycleProbEstimate {
        replicas,
        right,
        left,
        backtrack,
        incomplete,
        q_right: right as f64 / replicas as f64,
        q_right_half_width: binomial_ci_half_width(right, replicas),
        q_left: left as f64 / replicas as f64,
        q_left_half_width: binomial_ci_half_width(left, replicas),
    })
}
