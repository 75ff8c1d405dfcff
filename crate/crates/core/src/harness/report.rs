//! Experiment report structures, aggregation, and file output.
//!
//! Reports are byte-identical across reruns of the same config: replica
//! records are collected in index order, all maps are sorted, and no
//! wall-clock data is embedded.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{AttractionOutcome, ExcursionKind, ExcursionLedger, IdentityResiduals};
use crate::graph::{EdgeId, GraphProvider, VertexId};
use crate::numeric::binomial_ci_half_width;
use crate::walk::RunSummary;
use crate::weight::HypothesisVerdict;

use super::{ExperimentConfig, HarnessError, DEFAULT_RESIDUAL_TOLERANCE};

/// Largest finite graph whose full visit map is embedded per replica.
const VISIT_EMBED_VERTEX_LIMIT: usize = 256;
/// Half-width of the coordinate window kept for line-lattice runs.
pub const LATTICE_VISIT_WINDOW: i64 = 128;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExcursionSummary {
    pub total: usize,
    pub closed: usize,
    pub cycle_right: usize,
    pub cycle_left: usize,
    pub backtrack: usize,
    pub incomplete: usize,
    /// Excursions whose increments exceeded their certified spans (always
    /// 0 for a correct engine; counted with 1e-12 floating-point slack).
    pub bound_violations: usize,
}

impl ExcursionSummary {
    pub fn from_ledger(ledger: &ExcursionLedger) -> Self {
        let count = |k: ExcursionKind| {
            ledger
                .excursions()
                .iter()
                .filter(|e| e.kind == k)
                .count()
        };
        Self {
            total: ledger.excursions().len(),
            closed: ledger.closed_count(),
            cycle_right: count(ExcursionKind::CycleRight),
            cycle_left: count(ExcursionKind::CycleLeft),
            backtrack: count(ExcursionKind::Backtrack),
            incomplete: count(ExcursionKind::Incomplete),
            bound_violations: ledger.bound_violations(1e-12).len(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicaRecord {
    pub replica: u64,
    pub seed: u64,
    pub outcome: AttractionOutcome,
    pub window: (u64, u64),
    pub evidence: Vec<(EdgeId, u64)>,
    pub last_switch: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_kappa: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<IdentityResiduals>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa0_final_quarter_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excursion_summary: Option<ExcursionSummary>,
    /// Visit counts: full map for small finite graphs, the window
    /// [-128, 128] for the line lattice, omitted otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visit_counts: Option<Vec<(i64, u64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssertionResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub replicas: u64,
    pub single_edge: u64,
    pub odd_cycle: u64,
    pub undecided: u64,
    pub single_edge_fraction: f64,
    pub odd_cycle_fraction: f64,
    pub undecided_fraction: f64,
    pub single_edge_ci_half_width: f64,
    pub odd_cycle_ci_half_width: f64,
    pub assertions: Vec<AssertionResult>,
    pub all_assertions_passed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub verdicts: Vec<HypothesisVerdict>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub engine_version: String,
    pub per_replica: Vec<ReplicaRecord>,
    pub aggregate: Aggregate,
    pub hypothesis_summary: HypothesisSummary,
}

impl ExperimentReport {
    /// Canonical JSON bytes (pretty, trailing newline); reruns of the same
    /// config produce identical bytes.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }
}

/// Visit counts worth embedding in the report for this graph.
pub(super) fn visits_for_report(
    graph_spec: &str,
    graph: &dyn GraphProvider,
    summary: &RunSummary,
) -> Option<Vec<(i64, u64)>> {
    if graph_spec == "z" {
        return Some(
            summary
                .visit_counts
                .iter()
                .filter(|(v, _)| v.0.abs() <= LATTICE_VISIT_WINDOW)
                .map(|(v, &c)| (v.0, c))
                .collect(),
        );
    }
    match graph.vertex_count() {
        Some(n) if n <= VISIT_EMBED_VERTEX_LIMIT => Some(
            summary
                .visit_counts
                .iter()
                .map(|(v, &c)| (v.0, c))
                .collect(),
        ),
        _ => None,
    }
}

/// Fold replica records into fractions, confidence widths and assertion
/// outcomes (a deterministic fold in replica order).
pub(super) fn aggregate(cfg: &ExperimentConfig, records: &[ReplicaRecord]) -> Aggregate {
    let n = records.len() as u64;
    let single_edge = records
        .iter()
        .filter(|r| matches!(r.outcome, AttractionOutcome::SingleEdge(_)))
        .count() as u64;
    let odd_cycle = records
        .iter()
        .filter(|r| matches!(r.outcome, AttractionOutcome::OddCycle(_)))
        .count() as u64;
    let undecided = n - single_edge - odd_cycle;
    let nf = n as f64;

    let mut assertions = Vec::new();
    if let Some(min) = cfg.assertions.min_single_edge_fraction {
        let frac = single_edge as f64 / nf;
        assertions.push(AssertionResult {
            name: "min_single_edge_fraction".into(),
            passed: frac >= min,
            detail: format!("fraction {frac:.4} vs required {min:.4}"),
        });
    }
    if cfg.assertions.odd_cycle_fraction_zero {
        assertions.push(AssertionResult {
            name: "odd_cycle_fraction_zero".into(),
            passed: odd_cycle == 0,
            detail: format!("{odd_cycle} replicas classified as odd cycle"),
        });
    }
    if !matches!(cfg.diagnostics, super::DiagnosticsMode::None) {
        let tol = cfg
            .assertions
            .max_identity_residual
            .unwrap_or(DEFAULT_RESIDUAL_TOLERANCE);
        let worst = records
            .iter()
            .filter_map(|r| r.residuals.as_ref())
            .map(|res| {
                res.kappa_decomposition_max_abs
                    .max(res.zeta_eps_balance_abs)
                    .max(res.kappa_closed_form_max_abs)
            })
            .fold(0.0f64, f64::max);
        assertions.push(AssertionResult {
            name: "max_identity_residual".into(),
            passed: worst < tol,
            detail: format!("worst residual {worst:.3e} vs tolerance {tol:.3e}"),
        });
        let violations: usize = records
            .iter()
            .filter_map(|r| r.excursion_summary.as_ref())
            .map(|e| e.bound_violations)
            .sum();
        if records.iter().any(|r| r.excursion_summary.is_some()) {
            assertions.push(AssertionResult {
                name: "excursion_bounds".into(),
                passed: violations == 0,
                detail: format!("{violations} bound violations"),
            });
        }
    }
    if let Some(rec) = cfg.assertions.recurrence {
        let passing = records
            .iter()
            .filter(|r| min_visits_in_window(r, rec.radius).is_some_and(|m| m >= rec.min_visits))
            .count() as f64;
        let frac = passing / nf;
        assertions.push(AssertionResult {
            name: "recurrence".into(),
            passed: frac >= rec.min_fraction,
            detail: format!(
                "fraction {frac:.4} of replicas with min visits >= {} in [-{}, {}] \
                 (required {:.4})",
                rec.min_visits, rec.radius, rec.radius, rec.min_fraction
            ),
        });
    }
    if let Some(loc) = cfg.assertions.localization {
        let passing = records
            .iter()
            .filter(|r| r.evidence.len() <= loc.max_edges)
            .count() as f64;
        let frac = passing / nf;
        assertions.push(AssertionResult {
            name: "localization".into(),
            passed: frac >= loc.min_fraction,
            detail: format!(
                "fraction {frac:.4} of replicas with window edges <= {} (required {:.4})",
                loc.max_edges, loc.min_fraction
            ),
        });
    }
    let all_assertions_passed = assertions.iter().all(|a| a.passed);
    Aggregate {
        replicas: n,
        single_edge,
        odd_cycle,
        undecided,
        single_edge_fraction: single_edge as f64 / nf,
        odd_cycle_fraction: odd_cycle as f64 / nf,
        undecided_fraction: undecided as f64 / nf,
        single_edge_ci_half_width: binomial_ci_half_width(single_edge, n),
        odd_cycle_ci_half_width: binomial_ci_half_width(odd_cycle, n),
        assertions,
        all_assertions_passed,
    }
}

/// Minimum visit count over the integer window [-radius, radius], when the
/// record carries visit counts. Unvisited vertices count zero.
pub(super) fn min_visits_in_window(record: &ReplicaRecord, radius: i64) -> Option<u64> {
    let visits = record.visit_counts.as_ref()?;
    let mut min = u64::MAX;
    for v in -radius..=radius {
        let c = visits
            .iter()
            .find(|&&(vertex, _)| vertex == v)
            .map(|&(_, c)| c)
            .unwrap_or(0);
        min = min.min(c);
    }
    Some(min)
}

pub const REPLICA_CSV_HEADER: &str = "replica,seed,outcome,edge_lo,edge_hi,cycle_vertices,\
last_switch,window_edge_count,window_steps,kappa_decomposition_max_abs,\
zeta_eps_balance_abs,kappa_closed_form_max_abs,kappa0_final_quarter_mean,\
excursions_closed,excursion_bound_violations";

fn csv_row(r: &ReplicaRecord) -> String {
    let (outcome, edge_lo, edge_hi, cycle_vertices) = match &r.outcome {
        AttractionOutcome::SingleEdge(e) => (
            "single_edge",
            e.lo.to_string(),
            e.hi.to_string(),
            String::new(),
        ),
        AttractionOutcome::OddCycle(vs) => (
            "odd_cycle",
            String::new(),
            String::new(),
            vs.iter()
                .map(VertexId::to_string)
                .collect::<Vec<_>>()
                .join("|"),
        ),
        AttractionOutcome::Undecided => {
            ("undecided", String::new(), String::new(), String::new())
        }
    };
    let fmt_opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    let res = r.residuals.as_ref();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.replica,
        r.seed,
        outcome,
        edge_lo,
        edge_hi,
        cycle_vertices,
        r.last_switch.map(|s| s.to_string()).unwrap_or_default(),
        r.evidence.len(),
        r.window.1 - r.window.0,
        fmt_opt(res.map(|x| x.kappa_decomposition_max_abs)),
        fmt_opt(res.map(|x| x.zeta_eps_balance_abs)),
        fmt_opt(res.map(|x| x.kappa_closed_form_max_abs)),
        fmt_opt(r.kappa0_final_quarter_mean),
        r.excursion_summary
            .as_ref()
            .map(|e| e.closed.to_string())
            .unwrap_or_default(),
        r.excursion_summary
            .as_ref()
            .map(|e| e.bound_violations.to_string())
            .unwrap_or_default(),
    )
}

/// Flat per-replica table; columns documented in the README.
pub fn replicas_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(REPLICA_CSV_HEADER);
    out.push('\n');
    for r in &report.per_replica {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

/// Write `report.json` and `replicas.csv` into `dir` (created if needed).
pub fn write_report_files(report: &ExperimentReport, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), report.to_json_bytes())?;
    std::fs::write(dir.join("replicas.csv"), replicas_csv(report))?;
    Ok(())
}
