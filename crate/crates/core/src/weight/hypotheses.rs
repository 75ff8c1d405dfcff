//! Checkers for the four convergence hypotheses a weight function can
//! satisfy, reported as graded verdicts rather than booleans:
//!
//! * H0 — the reciprocal sum `sum 1/W(k)` converges;
//! * H1 — `nu * liminf delta_n / sqrt(alpha_n) < 1`, coupling reciprocal
//!   regularity to the longest odd cycle (`nu = 0` satisfies it outright,
//!   as does a vanishing liminf);
//! * H2 — `liminf (max_{j<n} W(j)) * sum_{k>=n} 1/W(k)` is finite (the
//!   "sticky" weights);
//! * H3 — `sum (W'(n)/W(n))^2` converges.
//!
//! Families with analytic tails can earn `HoldsAnalytic`/`FailsAnalytic`;
//! everything else is graded `LikelyHolds`/`LikelyFails`/`Inconclusive`
//! from finite-window evidence, with the caveat spelled out: a finite
//! sample cannot certify a liminf.

use serde::{Deserialize, Serialize};

use crate::graph::NuValue;
use crate::numeric::Kahan;

use super::series::{alpha_n, delta_n, recip_tail, TailOutcome, TruncationPolicy};
use super::{WeightError, WeightFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H0,
    H1,
    H2,
    H3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictStatus {
    HoldsAnalytic,
    FailsAnalytic,
    LikelyHolds,
    LikelyFails,
    Inconclusive,
}

/// Sampled quantity backing a verdict: the series index and the value seen.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvidencePoint {
    pub n: u64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    pub hypothesis: Hypothesis,
    pub status: VerdictStatus,
    /// Liminf estimate (H1, H2) or partial sum (H0, H3), when meaningful.
    pub estimate: Option<f64>,
    pub evidence: Vec<EvidencePoint>,
    pub caveat: String,
}

/// Geometric sample grid over `[lo, hi]`, endpoints included.
fn log_spaced(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    let lo = lo.max(1);
    if hi <= lo {
        return vec![lo];
    }
    let decades = ((hi as f64).log10() - (lo as f64).log10()).max(0.0);
    let count = ((decades * per_decade as f64).ceil() as usize).clamp(1, 400);
    let mut out = Vec::with_capacity(count + 1);
    let llo = (lo as f64).ln();
    let lhi = (hi as f64).ln();
    for i in 0..=count {
        let x = (llo + (lhi - llo) * i as f64 / count as f64).exp();
        out.push((x.round() as u64).clamp(lo, hi));
    }
    out.dedup();
    out
}

/// Trailing-window classification of a growing partial-sum trace.
enum SumTrend {
    Stabilized,
    Growing,
    Unclear,
}

fn classify_trend(total: f64, trailing: f64, policy: &TruncationPolicy) -> SumTrend {
    if trailing.abs() <= policy.stabilization_rel * total.abs() {
        SumTrend::Stabilized
    } else if trailing.abs() >= 0.05 * total.abs() {
        SumTrend::Growing
    } else {
        SumTrend::Unclear
    }
}

/// Sum `term(k)` for `k` in `[start, start+terms)`, recording checkpoint
/// partial sums and the trailing-window contribution.
fn partial_sum_trace(
    start: u64,
    terms: u64,
    term: &dyn Fn(u64) -> Result<f64, WeightError>,
    policy: &TruncationPolicy,
) -> Result<(f64, f64, Vec<EvidencePoint>), WeightError> {
    let end = start + terms;
    let mark = start + ((terms as f64) * (1.0 - policy.stabilization_window)) as u64;
    let checkpoints = log_spaced(start.max(1), end - 1, 4);
    let mut next_checkpoint = 0usize;
    let mut acc = Kahan::new();
    let mut at_mark = 0.0;
    let mut evidence = Vec::new();
    for k in start..end {
        acc.add(term(k)?);
        if k + 1 == mark {
            at_mark = acc.value();
        }
        if next_checkpoint < checkpoints.len() && k == checkpoints[next_checkpoint] {
            evidence.push(EvidencePoint {
                n: k,
                value: acc.value(),
            });
            next_checkpoint += 1;
        }
    }
    Ok((acc.value(), acc.value() - at_mark, evidence))
}

/// H0: does `sum 1/W(k)` converge?
pub fn check_h0(
    w: &dyn WeightFunction,
    policy: &TruncationPolicy,
) -> Result<HypothesisVerdict, WeightError> {
    let trace_terms = policy.max_terms.clamp(16, 200_000);
    let term = |k: u64| w.recip(k);
    let (total, trailing, evidence) = partial_sum_trace(1, trace_terms, &term, policy)?;
    if let Some(holds) = w.h0_analytic() {
        let estimate = if holds {
            match recip_tail(w, 1, policy)? {
                TailOutcome::Estimate(est) => Some(est.value),
                TailOutcome::CertifiedDivergent => None,
            }
        } else {
            None
        };
        return Ok(HypothesisVerdict {
            hypothesis: Hypothesis::H0,
            status: if holds {
                VerdictStatus::HoldsAnalytic
            } else {
                VerdictStatus::FailsAnalytic
            },
            estimate,
            evidence,
            caveat: "closed-form convergence criterion for this family".into(),
        });
    }
    let status = match classify_trend(total, trailing, policy) {
        SumTrend::Stabilized => VerdictStatus::LikelyHolds,
        SumTrend::Growing => VerdictStatus::LikelyFails,
        SumTrend::Unclear => VerdictStatus::Inconclusive,
    };
    Ok(HypothesisVerdict {
        hypothesis: Hypothesis::H0,
        status,
        estimate: Some(total),
        evidence,
        caveat: format!(
            "black-box rule judged by partial-sum stabilization over {trace_terms} terms; \
             convergence of an arbitrary series is not decidable numerically"
        ),
    })
}

/// H1: `nu * liminf delta_n / sqrt(alpha_n) < 1`, estimated as the minimum
/// ratio over a finite window of indices.
pub fn check_h1(
    w: &dyn WeightFunction,
    nu_value: NuValue,
    window: (u64, u64),
    policy: &TruncationPolicy,
) -> Result<HypothesisVerdict, WeightError> {
    let (n_lo, n_hi) = window;
    if n_lo < 1 || n_lo > n_hi {
        return Err(WeightError::BadSpec {
            spec: format!("window {n_lo}..{n_hi}"),
            reason: "window must satisfy 1 <= lo <= hi".into(),
        });
    }
    let mut evidence = Vec::new();
    let mut min_ratio = f64::INFINITY;
    for n in log_spaced(n_lo, n_hi, 8) {
        let delta = delta_n(w, n, policy)?;
        let alpha = alpha_n(w, n, policy)?;
        if alpha.value <= 0.0 {
            // Tail underflowed to zero; the ratio carries no information here.
            continue;
        }
        let ratio = delta.value / alpha.value.sqrt();
        min_ratio = min_ratio.min(ratio);
        evidence.push(EvidencePoint { n, value: ratio });
    }
    if evidence.is_empty() {
        return Err(WeightError::TailUnbounded(
            "ratio evidence empty: all sampled tails underflowed".into(),
        ));
    }
    let (status, caveat) = match nu_value {
        NuValue::Zero => (
            VerdictStatus::HoldsAnalytic,
            "no odd cycles: the condition holds for any value of the liminf".to_string(),
        ),
        nu => {
            let product = nu.numeric() * min_ratio;
            let status = if product < 1.0 {
                VerdictStatus::LikelyHolds
            } else {
                VerdictStatus::LikelyFails
            };
            (
                status,
                format!(
                    "window minimum estimates but cannot certify a liminf; \
                     nu * estimate = {product:.6e} compared against 1"
                ),
            )
        }
    };
    Ok(HypothesisVerdict {
        hypothesis: Hypothesis::H1,
        status,
        estimate: Some(min_ratio),
        evidence,
        caveat,
    })
}

/// H2: `liminf (max_{0<=j<n} W(j)) * sum_{k>=n} 1/W(k) < infinity`.
pub fn check_h2(
    w: &dyn WeightFunction,
    window: (u64, u64),
    policy: &TruncationPolicy,
) -> Result<HypothesisVerdict, WeightError> {
    let (n_lo, n_hi) = window;
    if n_lo < 2 || n_lo > n_hi {
        return Err(WeightError::BadSpec {
            spec: format!("window {n_lo}..{n_hi}"),
            reason: "window must satisfy 2 <= lo <= hi".into(),
        });
    }
    // Closed forms first. For W = b^k the product is identically 1/(b-1).
    // For W = k^rho the product grows like n/(rho-1) (or the tail diverges
    // outright when rho <= 1), so the liminf is infinite for every rho.
    if let Some(exp) = as_exponential(w) {
        let limit = 1.0 / (exp - 1.0);
        let evidence = h2_products(w, window, policy)?;
        return Ok(HypothesisVerdict {
            hypothesis: Hypothesis::H2,
            status: VerdictStatus::HoldsAnalytic,
            estimate: Some(limit),
            evidence,
            caveat: "geometric closed form: the product is constant in n".into(),
        });
    }
    if let Some(rho) = as_power(w) {
        let evidence = if rho > 1.0 {
            h2_products(w, window, policy)?
        } else {
            Vec::new()
        };
        return Ok(HypothesisVerdict {
            hypothesis: Hypothesis::H2,
            status: VerdictStatus::FailsAnalytic,
            estimate: None,
            evidence,
            caveat: if rho > 1.0 {
                format!(
                    "closed form: the product grows like n/(rho-1) with rho = {rho}, \
                     so the liminf is infinite"
                )
            } else {
                "reciprocal tail diverges for rho <= 1, so the product is infinite \
                 for every n"
                    .into()
            },
        });
    }
    // Certified divergent reciprocal tails with a finite running max mean
    // an infinite product at every n.
    if w.analytic_tails() {
        if let TailOutcome::CertifiedDivergent = recip_tail(w, n_lo, policy)? {
            return Ok(HypothesisVerdict {
                hypothesis: Hypothesis::H2,
                status: VerdictStatus::FailsAnalytic,
                estimate: None,
                evidence: Vec::new(),
                caveat: "reciprocal tail certified divergent: the product is infinite \
                         for every n"
                    .into(),
            });
        }
    }
    let evidence = h2_products(w, window, policy)?;
    let values: Vec<f64> = evidence.iter().map(|p| p.value).collect();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let first = values.first().copied().unwrap_or(f64::NAN);
    let last = values.last().copied().unwrap_or(f64::NAN);
    // Sustained growth across the window signals an infinite liminf.
    let growing = last > 4.0 * first && last > 2.0 * min;
    Ok(HypothesisVerdict {
        hypothesis: Hypothesis::H2,
        status: if growing {
            VerdictStatus::LikelyFails
        } else {
            VerdictStatus::LikelyHolds
        },
        estimate: Some(min),
        evidence,
        caveat: "window minimum estimates but cannot certify a liminf".into(),
    })
}

/// Running-max times reciprocal-tail products over the window.
fn h2_products(
    w: &dyn WeightFunction,
    (n_lo, n_hi): (u64, u64),
    policy: &TruncationPolicy,
) -> Result<Vec<EvidencePoint>, WeightError> {
    let samples = log_spaced(n_lo.max(2), n_hi, 8);
    let mut evidence = Vec::new();
    let mut log_run_max = f64::NEG_INFINITY;
    let mut scanned = 1u64; // log_run_max covers counts 1..scanned
    for &n in &samples {
        while scanned < n {
            log_run_max = log_run_max.max(w.log_eval(scanned)?);
            scanned += 1;
        }
        let tail = match recip_tail(w, n, policy)? {
            TailOutcome::Estimate(est) => est.value,
            TailOutcome::CertifiedDivergent => f64::INFINITY,
        };
        let product = if tail.is_infinite() {
            f64::INFINITY
        } else {
            (log_run_max + tail.ln()).exp()
        };
        evidence.push(EvidencePoint { n, value: product });
    }
    Ok(evidence)
}

/// H3: does `sum_{n>=2} (W'(n)/W(n))^2` converge?
pub fn check_h3(
    w: &dyn WeightFunction,
    policy: &TruncationPolicy,
) -> Result<HypothesisVerdict, WeightError> {
    let trace_terms = policy.max_terms.clamp(16, 200_000);
    // (W'(n)/W(n))^2 = (1 - W(n-1)/W(n))^2, evaluated through logs so that
    // exponential-range families stay finite.
    let term = |n: u64| -> Result<f64, WeightError> {
        let r = (w.log_eval(n - 1)? - w.log_eval(n)?).exp();
        Ok((1.0 - r) * (1.0 - r))
    };
    let (total, trailing, evidence) = partial_sum_trace(2, trace_terms, &term, policy)?;
    if let Some(holds) = w.h3_analytic() {
        return Ok(HypothesisVerdict {
            hypothesis: Hypothesis::H3,
            status: if holds {
                VerdictStatus::HoldsAnalytic
            } else {
                VerdictStatus::FailsAnalytic
            },
            estimate: holds.then_some(total),
            evidence,
            caveat: "closed-form convergence criterion for this family".into(),
        });
    }
    let status = match classify_trend(total, trailing, policy) {
        SumTrend::Stabilized => VerdictStatus::LikelyHolds,
        SumTrend::Growing => VerdictStatus::LikelyFails,
        SumTrend::Unclear => VerdictStatus::Inconclusive,
    };
    Ok(HypothesisVerdict {
        hypothesis: Hypothesis::H3,
        status,
        estimate: Some(total),
        evidence,
        caveat: format!(
            "black-box rule judged by partial-sum stabilization over {trace_terms} terms"
        ),
    })
}

fn as_power(w: &dyn WeightFunction) -> Option<f64> {
    let spec = w.spec_string();
    spec.strip_prefix("power:").and_then(|s| s.parse().ok())
}

fn as_exponential(w: &dyn WeightFunction) -> Option<f64> {
    let spec = w.spec_string();
    spec.strip_prefix("exp:").and_then(|s| s.parse().ok())
}
