//! Runtime instrumentation for cycle walks.
//!
//! On the cycle `Z/ell`, three per-vertex accumulators track the weighted
//! traversal history (every increment is `1/W(count-before)` of the edge
//! being crossed):
//!
//! * `zeta(x)` — signed by direction over the oriented edge `(x, x+1)`;
//! * `eps(x)`  — signed by departure direction for steps leaving `x`
//!   (a martingale: its one-step conditional drift cancels exactly);
//! * `kappa(x)` — signed by which of the two edges at `x` was crossed,
//!   measuring the imbalance between the edge pair at `x`.
//!
//! Three exact identities hold along every trajectory and are checked as
//! residuals: the decomposition `kappa(x) = 2 eps(x) - zeta(x) - zeta(x-1)`,
//! the balance `sum_x (zeta(x) - eps(x)) = 0`, and the closed form
//! `kappa(x) = W*(X^{x,x+1} - 1) - W*(X^{x,x-1} - 1)` (exact with all-ones
//! initial counts, constant-in-time offset otherwise).

mod attraction;
mod excursions;

pub use attraction::{classify_attraction, AttractionOutcome, AttractionReport, WindowTally};
pub use excursions::{
    empirical_cycle_probs, track_excursions, CycleProbEstimate, Excursion, ExcursionKind,
    ExcursionLedger, LambdaSnapshot,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{EdgeId, GraphError, GraphProvider, VertexId};
use crate::numeric::Kahan;
use crate::walk::{StepObserver, StepRecord, WalkError, WalkState};
use crate::weight::{WStarCache, WeightError, WeightHandle};

#[derive(Debug, Error)]
pub enum DiagError {
    #[error("provider {0} is not a cycle")]
    NotACycle(String),
    #[error("observer must attach to a fresh state (step 0), found step {0}")]
    NotFreshState(u64),
    #[error("window of {window} steps is shorter than min_count {min_count}")]
    WindowTooShort { window: u64, min_count: u64 },
    #[error("at least {required} replicas required, got {got}")]
    BadReplicas { got: u64, required: u64 },
    #[error("walk is not at the distinguished vertex {expected}, found {found}")]
    NotAtDistinguishedVertex { expected: VertexId, found: VertexId },
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Maximum absolute residuals of the three runtime identities.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityResiduals {
    /// max_x |kappa(x) - 2 eps(x) + zeta(x) + zeta(x-1)|
    pub kappa_decomposition_max_abs: f64,
    /// |sum_x (zeta(x) - eps(x))|
    pub zeta_eps_balance_abs: f64,
    /// Exact mode: max_x |kappa(x) - closed form|. Offset mode: the spread
    /// (max minus min over checked steps) of the per-vertex difference.
    pub kappa_closed_form_max_abs: f64,
}

/// Snapshot of the accumulators for JSON export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagSnapshot {
    pub step: u64,
    pub zeta: Vec<f64>,
    pub eps: Vec<f64>,
    pub kappa: Vec<f64>,
    pub lambda: Vec<f64>,
    #[serde(rename = "Lambda")]
    pub capital_lambda: f64,
    pub residuals: IdentityResiduals,
}

/// Per-vertex accumulators on a cycle, fed one step record at a time.
pub struct CycleDiag {
    ell: usize,
    weight: WeightHandle,
    zeta: Vec<Kahan>,
    eps: Vec<Kahan>,
    kappa: Vec<Kahan>,
    wstar: WStarCache,
    /// All-ones initial counts give the exact closed form; otherwise the
    /// difference is constant in time and only its spread is checked.
    exact_mode: bool,
    offset_lo: Vec<f64>,
    offset_hi: Vec<f64>,
    history_every: u64,
    kappa0_history: Vec<f64>,
    check_every: u64,
    worst: Option<IdentityResiduals>,
}

impl CycleDiag {
    /// Attach to a fresh walk on a cycle provider.
    pub fn attach(
        state: &WalkState,
        g: &dyn GraphProvider,
        weight: WeightHandle,
    ) -> Result<Self, DiagError> {
        let ell = g
            .cycle_len()
            .ok_or_else(|| DiagError::NotACycle(g.spec_string()))?;
        if state.step_index() != 0 {
            return Err(DiagError::NotFreshState(state.step_index()));
        }
        let mut exact_mode = state.initial_default() == 1;
        for x in 0..ell {
            let edge = plus_edge(x, ell);
            if state.initial_count(edge) != 1 {
                exact_mode = false;
            }
        }
        Ok(Self {
            ell,
            wstar: WStarCache::new(weight.clone()),
            weight,
            zeta: vec![Kahan::new(); ell],
            eps: vec![Kahan::new(); ell],
            kappa: vec![Kahan::new(); ell],
            exact_mode,
            offset_lo: vec![f64::INFINITY; ell],
            offset_hi: vec![f64::NEG_INFINITY; ell],
            history_every: 0,
            kappa0_history: Vec::new(),
            check_every: 0,
            worst: None,
        })
    }

    /// Record |kappa(0)| every `every` steps (for localization trend reports).
    pub fn with_history(mut self, every: u64) -> Self {
        self.history_every = every.max(1);
        self
    }

    /// Check the identities every `every` steps during observation and keep
    /// the worst residuals seen; read them back with [`Self::final_residuals`].
    pub fn with_residual_checks(mut self, every: u64) -> Self {
        self.check_every = every.max(1);
        self
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn exact_mode(&self) -> bool {
        self.exact_mode
    }

    pub fn zeta_values(&self) -> Vec<f64> {
        self.zeta.iter().map(Kahan::value).collect()
    }

    pub fn eps_values(&self) -> Vec<f64> {
        self.eps.iter().map(Kahan::value).collect()
    }

    pub fn kappa_values(&self) -> Vec<f64> {
        self.kappa.iter().map(Kahan::value).collect()
    }

    pub fn kappa0_history(&self) -> &[f64] {
        &self.kappa0_history
    }

    /// Current residuals of the three identities; also folds this step's
    /// closed-form differences into the offset-mode spread.
    pub fn residuals(&mut self, state: &WalkState) -> Result<IdentityResiduals, DiagError> {
        let ell = self.ell;
        let mut decomp_max = 0.0f64;
        let mut balance = Kahan::new();
        let mut closed_max = 0.0f64;
        for x in 0..ell {
            let prev = (x + ell - 1) % ell;
            let k = self.kappa[x].value();
            let decomp =
                k - 2.0 * self.eps[x].value() + self.zeta[x].value() + self.zeta[prev].value();
            decomp_max = decomp_max.max(decomp.abs());
            balance.add(self.zeta[x].value() - self.eps[x].value());

            let plus = state.edge_count(plus_edge(x, ell));
            let minus = state.edge_count(plus_edge(prev, ell));
            let closed = self.wstar.value(plus - 1)? - self.wstar.value(minus - 1)?;
            if self.exact_mode {
                closed_max = closed_max.max((k - closed).abs());
            } else {
                let diff = k - closed;
                self.offset_lo[x] = self.offset_lo[x].min(diff);
                self.offset_hi[x] = self.offset_hi[x].max(diff);
                closed_max = closed_max.max(self.offset_hi[x] - self.offset_lo[x]);
            }
        }
        Ok(IdentityResiduals {
            kappa_decomposition_max_abs: decomp_max,
            zeta_eps_balance_abs: balance.value().abs(),
            kappa_closed_form_max_abs: closed_max,
        })
    }

    /// Worst residuals over all periodic checks plus one final check now.
    pub fn final_residuals(&mut self, state: &WalkState) -> Result<IdentityResiduals, DiagError> {
        let current = self.residuals(state)?;
        Ok(match self.worst {
            Some(w) => merge_residuals(w, current),
            None => current,
        })
    }

    /// Snapshot for export at the walk's current step.
    pub fn snapshot(&mut self, state: &WalkState) -> Result<DiagSnapshot, DiagError> {
        let residuals = self.residuals(state)?;
        let (lambda, capital_lambda) = lambda_values(state, &*self.weight, self.ell)?;
        Ok(DiagSnapshot {
            step: state.step_index(),
            zeta: self.zeta_values(),
            eps: self.eps_values(),
            kappa: self.kappa_values(),
            lambda,
            capital_lambda,
            residuals,
        })
    }
}

impl StepObserver for CycleDiag {
    fn on_step(&mut self, r: &StepRecord, state: &WalkState) {
        let ell = self.ell;
        let inc = self
            .weight
            .recip(r.count_before)
            .expect("weight evaluated during the step must evaluate here");
        let from = r.from.0 as usize;
        let to = r.to.0 as usize;
        let rightward = to == (from + 1) % ell;
        // Oriented edge (a, a+1) regardless of travel direction.
        let a = if rightward { from } else { to };
        if rightward {
            self.zeta[a].add(inc);
            self.eps[from].add(inc);
        } else {
            self.zeta[a].add(-inc);
            self.eps[from].add(-inc);
        }
        self.kappa[a].add(inc);
        self.kappa[(a + 1) % ell].add(-inc);
        if self.history_every > 0 && r.step % self.history_every == 0 {
            self.kappa0_history.push(self.kappa[0].value());
        }
        if self.check_every > 0 && r.step % self.check_every == 0 {
            let current = self
                .residuals(state)
                .expect("weight evaluated during the step must evaluate here");
            self.worst = Some(match self.worst {
                Some(w) => merge_residuals(w, current),
                None => current,
            });
        }
    }
}

fn merge_residuals(a: IdentityResiduals, b: IdentityResiduals) -> IdentityResiduals {
    IdentityResiduals {
        kappa_decomposition_max_abs: a
            .kappa_decomposition_max_abs
            .max(b.kappa_decomposition_max_abs),
        zeta_eps_balance_abs: a.zeta_eps_balance_abs.max(b.zeta_eps_balance_abs),
        kappa_closed_form_max_abs: a
            .kappa_closed_form_max_abs
            .max(b.kappa_closed_form_max_abs),
    }
}

/// Canonical edge between `x` and `x+1` on the cycle.
pub(crate) fn plus_edge(x: usize, ell: usize) -> EdgeId {
    EdgeId::new(VertexId(x as i64), VertexId(((x + 1) % ell) as i64))
}

/// Normalized reciprocal weights of the cycle's edges at the current counts.
pub(crate) fn lambda_values(
    state: &WalkState,
    weight: &dyn crate::weight::WeightFunction,
    ell: usize,
) -> Result<(Vec<f64>, f64), DiagError> {
    let mut lambda = Vec::with_capacity(ell);
    let mut total = Kahan::new();
    for x in 0..ell {
        let r = weight.recip(state.edge_count(plus_edge(x, ell)))?;
        lambda.push(r);
        total.add(r);
    }
    let t = total.value();
    for l in lambda.iter_mut() {
        *l /= t;
    }
    Ok((lambda, t))
}

/// One-step conditional drift of `eps` at the current vertex:
/// `p(+) / W(count+) - p(-) / W(count-)`, which cancels identically.
/// Returns the floating-point residue of that cancellation.
pub fn eps_zero_drift(
    state: &mut WalkState,
    g: &dyn GraphProvider,
    w: &dyn crate::weight::WeightFunction,
) -> Result<f64, DiagError> {
    let ell = g
        .cycle_len()
        .ok_or_else(|| DiagError::NotACycle(g.spec_string()))?;
    let x = state.current_vertex();
    let succ = VertexId((x.0 + 1).rem_euclid(ell as i64));
    let pred = VertexId((x.0 - 1).rem_euclid(ell as i64));
    let dist = state.transition_distribution(g, w)?;
    let mut drift = 0.0;
    for &(v, p) in &dist.entries {
        if v == succ {
            drift += p * w.recip(state.edge_count(EdgeId::new(x, succ)))?;
        } else if v == pred {
            drift -= p * w.recip(state.edge_count(EdgeId::new(x, pred)))?;
        }
    }
    Ok(drift)
}

/// Absolute tolerance for the three identity residuals: accumulators sum
/// at most ~1e7 unit-bounded terms with compensation, keeping rounding far
/// below this.
pub const IDENTITY_TOLERANCE: f64 = 1e-9;
/// Tolerance for the eps drift cancellation (a handful of rounding ulps).
pub const DRIFT_TOLERANCE: f64 = 1e-12;

/// Full identity-check run: residuals and eps drift tracked along a fresh
/// seeded walk; maxima reported.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityRunReport {
    pub steps: u64,
    pub residuals: IdentityResiduals,
    pub eps_drift_max_abs: f64,
    pub final_kappa: Vec<f64>,
    /// True when every residual is under [`IDENTITY_TOLERANCE`] and the
    /// drift under [`DRIFT_TOLERANCE`].
    pub within_tolerance: bool,
}

/// Drive `steps` steps from a fresh state, checking the identities every
/// `check_every` steps (1 = every step) and the eps drift at every step.
/// When `snapshot_every > 0`, accumulator snapshots are collected at that
/// interval.
pub fn run_identity_check(
    g: &dyn GraphProvider,
    w: &WeightHandle,
    steps: u64,
    seed: u64,
    initial_default: u64,
    check_every: u64,
    snapshot_every: u64,
) -> Result<(IdentityRunReport, Vec<DiagSnapshot>), DiagError> {
    let state0 = crate::walk::init_state(g, &**w, VertexId(0), initial_default, &[], seed)?;
    let mut state = state0;
    let mut diag = CycleDiag::attach(&state, g, w.clone())?;
    let check_every = check_every.max(1);
    let mut worst = diag.residuals(&state)?;
    let mut drift_max = 0.0f64;
    let mut snapshots = Vec::new();
    for i in 0..steps {
        drift_max = drift_max.max(eps_zero_drift(&mut state, g, &**w)?.abs());
        let record = state.step(g, &**w)?;
        diag.on_step(&record, &state);
        if (i + 1) % check_every == 0 || i + 1 == steps {
            let r = diag.residuals(&state)?;
            worst = merge_residuals(worst, r);
        }
        if snapshot_every > 0 && (i + 1) % snapshot_every == 0 {
            snapshots.push(diag.snapshot(&state)?);
        }
    }
    let within_tolerance = worst.kappa_decomposition_max_abs < IDENTITY_TOLERANCE
        && worst.zeta_eps_balance_abs < IDENTITY_TOLERANCE
        && worst.kappa_closed_form_max_abs < IDENTITY_TOLERANCE
        && drift_max < DRIFT_TOLERANCE;
    Ok((
        IdentityRunReport {
            steps,
            residuals: worst,
            eps_drift_max_abs: drift_max,
            final_kappa: diag.kappa_values(),
            within_tolerance,
        },
        snapshots,
    ))
}
