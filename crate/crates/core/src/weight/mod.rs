//! Reinforcement weight functions `W(k)`, the series derived from them, and
//! the H0–H3 hypothesis checkers.
//!
//! Every family implements [`WeightFunction`]; instances are produced from
//! spec strings (`"power:1.5"`, `"exp:2"`, `"sellke:1"`, `"exposc"`,
//! `"table:<path>"`) by [`parse_weight_spec`]. Families carry their own
//! analytic knowledge — monotonicity, reciprocal limits, closed-form or
//! integral-test tail brackets — which the series evaluators in [`series`]
//! and the checkers in [`hypotheses`] consume. Families without that
//! knowledge (black-box customs) degrade to stabilization heuristics and
//! can only yield `Likely*` or `Inconclusive` verdicts.

mod families;
pub mod hypotheses;
pub mod series;

pub use families::{
    parse_weight_spec, registered_weight_specs, CustomWeight, ExpOscillating, Exponential, Power,
    SellkeOscillating, TableWeights,
};
pub use hypotheses::{
    check_h0, check_h1, check_h2, check_h3, Hypothesis, HypothesisVerdict, VerdictStatus,
};
pub use series::{
    alpha_n, delta_n, recip_tail, sticky_lower_bound, w_prime, w_star, SeriesEstimate,
    TailOutcome, TruncationPolicy, WStarCache,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("weight argument {0} outside domain (k >= {1} required)")]
    Domain(u64, u64),
    #[error("weight rule returned a non-positive value at k = {0}")]
    NonPositiveWeight(u64),
    #[error("weight rule returned a non-finite value at k = {0}")]
    NonFiniteWeight(u64),
    #[error("series tail cannot be bounded: {0}")]
    TailUnbounded(String),
    #[error("invalid weight spec {spec:?}: {reason}")]
    BadSpec { spec: String, reason: String },
    #[error("io error reading weight table: {0}")]
    Io(#[from] std::io::Error),
}

/// Whether the weight sequence is known to be nondecreasing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Monotone {
    Yes,
    No,
    Unknown,
}

/// A positive reinforcement weight sequence `W(k)`, `k >= 1`, plus the
/// analytic metadata the series evaluators rely on.
///
/// The `raw`/`log_raw` pair is the family's evaluation rule for `k >= 1`;
/// the provided methods add the domain and positivity guards. Tail methods
/// return `None` when the family has no analytic control and
/// `f64::INFINITY` bounds when the tail is certified divergent.
pub trait WeightFunction: Send + Sync {
    /// Spec string the family answers to (e.g. `"power:1.5"`).
    fn spec_string(&self) -> String;

    /// Evaluation rule, `k >= 1` assumed.
    fn raw(&self, k: u64) -> f64;

    /// `log W(k)` computed directly, so exponential-range families stay
    /// finite where `raw` overflows. Defaults to `ln(raw(k))`.
    fn log_raw(&self, k: u64) -> f64 {
        self.raw(k).ln()
    }

    /// True when `log_raw` is computed without going through `raw`, which
    /// makes an overflowing `raw` acceptable.
    fn has_exact_log(&self) -> bool {
        false
    }

    fn monotone(&self) -> Monotone;

    /// Whether closed-form or integral-test tail bounds exist.
    fn analytic_tails(&self) -> bool;

    /// `lim_k 1/W(k)`, when known.
    fn recip_limit(&self) -> Option<f64> {
        None
    }

    /// Bracket `[lo, hi]` for `sum_{k>=from} 1/W(k)`.
    fn recip_tail_bracket(&self, _from: u64) -> Option<(f64, f64)> {
        None
    }

    /// Bracket `[lo, hi]` for `sum_{k>=from} 1/W(k)^2`.
    fn recip_sq_tail_bracket(&self, _from: u64) -> Option<(f64, f64)> {
        None
    }

    /// Upper bound for `sum_{k>=from} |1/W(k) - 1/W(k-1)|`, `from >= 2`.
    fn abs_diff_tail_bound(&self, _from: u64) -> Option<f64> {
        None
    }

    /// Analytic answer to "does `sum 1/W(k)` converge", when certain.
    fn h0_analytic(&self) -> Option<bool> {
        None
    }

    /// Analytic answer to "does `sum (W'(n)/W(n))^2` converge", when certain.
    fn h3_analytic(&self) -> Option<bool> {
        None
    }

    /// `W(k)` with guards: `k >= 1`, positive, and finite unless the family
    /// exposes an exact log.
    fn eval(&self, k: u64) -> Result<f64, WeightError> {
        if k < 1 {
            return Err(WeightError::Domain(k, 1));
        }
        let v = self.raw(k);
        if v.is_nan() || v <= 0.0 {
            return Err(WeightError::NonPositiveWeight(k));
        }
        if v.is_infinite() && !self.has_exact_log() {
            return Err(WeightError::NonFiniteWeight(k));
        }
        Ok(v)
    }

    /// `log W(k)` with the same guards.
    fn log_eval(&self, k: u64) -> Result<f64, WeightError> {
        if k < 1 {
            return Err(WeightError::Domain(k, 1));
        }
        if self.has_exact_log() {
            let lv = self.log_raw(k);
            if lv.is_nan() {
                return Err(WeightError::NonPositiveWeight(k));
            }
            return Ok(lv);
        }
        Ok(self.eval(k)?.ln())
    }

    /// `1/W(k)`, falling back to `exp(-log W(k))` when `W(k)` overflows.
    /// All series and diagnostics accumulate this quantity, so using one
    /// helper keeps incremental and closed-form routes consistent.
    fn recip(&self, k: u64) -> Result<f64, WeightError> {
        let v = self.eval(k)?;
        if v.is_infinite() {
            Ok((-self.log_eval(k)?).exp())
        } else {
            Ok(1.0 / v)
        }
    }
}

/// Shared handle to a weight function.
pub type WeightHandle = Arc<dyn WeightFunction>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_guards_domain() {
        let w = parse_weight_spec("power:2").unwrap();
        assert!(matches!(w.eval(0), Err(WeightError::Domain(0, 1))));
        assert_eq!(w.eval(3).unwrap(), 9.0);
    }

    #[test]
    fn sellke_denominator_parity() {
        // Even k has denominator 3, odd k denominator 1.
        let w = parse_weight_spec("sellke:1").unwrap();
        assert!((w.eval(4).unwrap() - 16.0 / 3.0).abs() < 1e-12);
        assert_eq!(w.eval(3).unwrap(), 9.0);
    }

    #[test]
    fn custom_rejects_non_positive() {
        let w = CustomWeight::new("bad", std::sync::Arc::new(|_k| -1.0));
        assert!(matches!(
            w.eval(5),
            Err(WeightError::NonPositiveWeight(5))
        ));
    }

    #[test]
    fn exponential_log_is_exact_under_overflow() {
        let w = parse_weight_spec("exp:2").unwrap();
        // 2^5000 overflows f64 but the log stays finite and exact.
        let lw = w.log_eval(5000).unwrap();
        assert!((lw - 5000.0 * 2f64.ln()).abs() < 1e-9);
        // recip falls back to the log route and underflows gracefully.
        assert_eq!(w.recip(5000).unwrap(), 0.0);
        assert!((w.recip(10).unwrap() - 2f64.powi(-10)).abs() < 1e-18);
    }

    #[test]
    fn monotone_flags_match_families() {
        assert_eq!(parse_weight_spec("power:2").unwrap().monotone(), Monotone::Yes);
        assert_eq!(parse_weight_spec("exp:2").unwrap().monotone(), Monotone::Yes);
        assert_eq!(
            parse_weight_spec("sellke:1").unwrap().monotone(),
            Monotone::No
        );
        assert_eq!(parse_weight_spec("exposc").unwrap().monotone(), Monotone::No);
    }
}
