//! Derived series of a weight function: reciprocal partial sums, tail sums,
//! total-variation tails, and the sticky lower-bound product.
//!
//! Conventions shared by every evaluator:
//! * sums accumulate `1/W(k)` through [`WeightFunction::recip`], compensated;
//! * truncation follows a [`TruncationPolicy`]; families with analytic tails
//!   get a certified bracket, black boxes get a stabilization heuristic;
//! * a term at `k = 1` that would involve `W(0)` treats the sequence as
//!   extended by `W(0) := W(1)`, i.e. contributes nothing.

use crate::numeric::Kahan;

use super::{Monotone, WeightError, WeightFunction, WeightHandle};

/// Truncation and stabilization parameters for series evaluation.
#[derive(Debug, Clone, Copy)]
pub struct TruncationPolicy {
    /// Hard cap on summed terms per evaluation.
    pub max_terms: u64,
    /// Stop early once the certified tail drops below this fraction of the
    /// running estimate.
    pub target_rel_tail: f64,
    /// Fraction of trailing terms examined by the stabilization heuristic.
    pub stabilization_window: f64,
    /// A black-box sum counts as stabilized when the trailing window
    /// contributes less than this fraction of the total.
    pub stabilization_rel: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_terms: 1_000_000,
            target_rel_tail: 1e-10,
            stabilization_window: 0.1,
            stabilization_rel: 1e-8,
        }
    }
}

impl TruncationPolicy {
    /// Smaller budget for sweeps that evaluate many series points.
    pub fn quick() -> Self {
        Self {
            max_terms: 200_000,
            ..Self::default()
        }
    }
}

/// A series value together with what is known about its error.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SeriesEstimate {
    pub value: f64,
    /// Certified bound on `|value - true sum|` (heuristic for black boxes).
    pub tail_bound: f64,
    pub terms_used: u64,
    /// True when the value is closed-form or a completed finite sum.
    pub exact: bool,
}

impl SeriesEstimate {
    fn exact_value(value: f64) -> Self {
        Self {
            value,
            tail_bound: 0.0,
            terms_used: 0,
            exact: true,
        }
    }
}

/// Outcome of a tail-sum evaluation that can be certifiably divergent.
#[derive(Debug, Clone, Copy)]
pub enum TailOutcome {
    CertifiedDivergent,
    Estimate(SeriesEstimate),
}

fn rounding_budget(scale: f64) -> f64 {
    8.0 * f64::EPSILON * scale.abs()
}

/// `W*(n) = sum_{k=1..n} 1/W(k)`, compensated; `W*(0) = 0`.
pub fn w_star(w: &dyn WeightFunction, n: u64) -> Result<f64, WeightError> {
    let mut acc = Kahan::new();
    for k in 1..=n {
        acc.add(w.recip(k)?);
    }
    Ok(acc.value())
}

/// Incrementally extended table of `W*` values, shared by diagnostics that
/// look the partial sums up once per step.
pub struct WStarCache {
    w: WeightHandle,
    partial: Vec<f64>,
    acc: Kahan,
}

impl WStarCache {
    pub fn new(w: WeightHandle) -> Self {
        Self {
            w,
            partial: vec![0.0],
            acc: Kahan::new(),
        }
    }

    pub fn value(&mut self, n: u64) -> Result<f64, WeightError> {
        while (self.partial.len() as u64) <= n {
            let k = self.partial.len() as u64;
            self.acc.add(self.w.recip(k)?);
            self.partial.push(self.acc.value());
        }
        Ok(self.partial[n as usize])
    }
}

/// Increment `W'(n) = W(n) - W(n-1)`, `n >= 2`.
pub fn w_prime(w: &dyn WeightFunction, n: u64) -> Result<f64, WeightError> {
    if n < 2 {
        return Err(WeightError::Domain(n, 2));
    }
    Ok(w.eval(n)? - w.eval(n - 1)?)
}

/// Generic truncated tail sum: terms from `start` upward, with either a
/// certified bracket per index or the stabilization heuristic.
fn truncated_tail_sum(
    start: u64,
    term: &dyn Fn(u64) -> Result<f64, WeightError>,
    bracket: Option<&dyn Fn(u64) -> (f64, f64)>,
    policy: &TruncationPolicy,
) -> Result<SeriesEstimate, WeightError> {
    match bracket {
        Some(bracket) => {
            let (lo0, hi0) = bracket(start);
            if hi0.is_infinite() {
                return Err(WeightError::TailUnbounded(
                    "tail bound is certified divergent".into(),
                ));
            }
            if lo0 == hi0 {
                return Ok(SeriesEstimate::exact_value(lo0));
            }
            if hi0 == 0.0 {
                return Ok(SeriesEstimate::exact_value(0.0));
            }
            // Smallest end index whose certified tail meets the target.
            let target_abs = policy.target_rel_tail * hi0;
            let cap = start.saturating_add(policy.max_terms);
            let mut lo_k = start;
            let mut hi_k = cap;
            while lo_k < hi_k {
                let mid = lo_k + (hi_k - lo_k) / 2;
                if bracket(mid).1 <= target_abs {
                    hi_k = mid;
                } else {
                    lo_k = mid + 1;
                }
            }
            let end = lo_k;
            // Sum ascending magnitudes: from end-1 down to start.
            let mut acc = Kahan::new();
            let mut k = end;
            while k > start {
                k -= 1;
                acc.add(term(k)?);
            }
            let partial = acc.value();
            let (tail_lo, tail_hi) = bracket(end);
            let mid = 0.5 * (tail_lo + tail_hi);
            let value = partial + mid;
            let tail_bound = 0.5 * (tail_hi - tail_lo) + rounding_budget(partial + mid);
            Ok(SeriesEstimate {
                value,
                tail_bound,
                terms_used: end - start,
                exact: tail_hi == 0.0,
            })
        }
        None => {
            // Black box: forward sum with a stabilization check.
            let total_terms = policy.max_terms.max(16);
            let mark =
                start + ((total_terms as f64) * (1.0 - policy.stabilization_window)) as u64;
            let mut acc = Kahan::new();
            let mut at_mark = 0.0;
            let mut zeros_in_a_row = 0u32;
            let mut k = start;
            let end = start + total_terms;
            while k < end {
                let t = term(k)?;
                acc.add(t);
                if t == 0.0 {
                    zeros_in_a_row += 1;
                    if zeros_in_a_row >= 64 {
                        // Terms underflowed; nothing further can move the sum.
                        return Ok(SeriesEstimate {
                            value: acc.value(),
                            tail_bound: rounding_budget(acc.value()),
                            terms_used: k - start + 1,
                            exact: false,
                        });
                    }
                } else {
                    zeros_in_a_row = 0;
                }
                if k + 1 == mark {
                    at_mark = acc.value();
                }
                k += 1;
            }
            let total = acc.value();
            let trailing = total - at_mark;
            if trailing.abs() <= policy.stabilization_rel * total.abs() {
                Ok(SeriesEstimate {
                    value: total,
                    tail_bound: 10.0 * trailing.abs() + rounding_budget(total),
                    terms_used: total_terms,
                    exact: false,
                })
            } else {
                Err(WeightError::TailUnbounded(format!(
                    "no analytic tail control and partial sums not stabilized \
                     after {total_terms} terms"
                )))
            }
        }
    }
}

/// Total-variation tail `delta_n = sum_{k>=n+1} |1/W(k) - 1/W(k-1)|`.
///
/// Nondecreasing families with a known reciprocal limit answer exactly by
/// telescoping; otherwise the sum is truncated against the family's tail
/// bound or the stabilization heuristic.
pub fn delta_n(
    w: &dyn WeightFunction,
    n: u64,
    policy: &TruncationPolicy,
) -> Result<SeriesEstimate, WeightError> {
    if w.monotone() == Monotone::Yes {
        if let Some(limit) = w.recip_limit() {
            if limit.is_finite() {
                let value = (w.recip(n.max(1))? - limit).max(0.0);
                return Ok(SeriesEstimate::exact_value(value));
            }
        }
    }
    let start = (n + 1).max(2);
    let term = |k: u64| -> Result<f64, WeightError> { Ok((w.recip(k)? - w.recip(k - 1)?).abs()) };
    let has_bound = w.abs_diff_tail_bound(start).is_some();
    if has_bound {
        let bracket = |k: u64| -> (f64, f64) {
            let hi = w.abs_diff_tail_bound(k).unwrap_or(f64::INFINITY);
            (0.0, hi)
        };
        truncated_tail_sum(start, &term, Some(&bracket), policy)
    } else {
        truncated_tail_sum(start, &term, None, policy)
    }
}

/// Squared-reciprocal tail `alpha_n = sum_{k>=n} 1/W(k)^2`, `n >= 1`.
pub fn alpha_n(
    w: &dyn WeightFunction,
    n: u64,
    policy: &TruncationPolicy,
) -> Result<SeriesEstimate, WeightError> {
    if n < 1 {
        return Err(WeightError::Domain(n, 1));
    }
    let term = |k: u64| -> Result<f64, WeightError> {
        let r = w.recip(k)?;
        Ok(r * r)
    };
    let has_bracket = w.recip_sq_tail_bracket(n).is_some();
    if has_bracket {
        let bracket = |k: u64| -> (f64, f64) {
            w.recip_sq_tail_bracket(k)
                .unwrap_or((f64::INFINITY, f64::INFINITY))
        };
        truncated_tail_sum(n, &term, Some(&bracket), policy)
    } else {
        truncated_tail_sum(n, &term, None, policy)
    }
}

/// Reciprocal tail `sum_{k>=from} 1/W(k)`, distinguishing certified
/// divergence from an estimate.
pub fn recip_tail(
    w: &dyn WeightFunction,
    from: u64,
    policy: &TruncationPolicy,
) -> Result<TailOutcome, WeightError> {
    if from < 1 {
        return Err(WeightError::Domain(from, 1));
    }
    if let Some((lo, hi)) = w.recip_tail_bracket(from) {
        if lo.is_infinite() && hi.is_infinite() {
            return Ok(TailOutcome::CertifiedDivergent);
        }
    }
    let term = |k: u64| w.recip(k);
    let has_bracket = w.recip_tail_bracket(from).is_some();
    let est = if has_bracket {
        let bracket = |k: u64| -> (f64, f64) {
            w.recip_tail_bracket(k)
                .unwrap_or((f64::INFINITY, f64::INFINITY))
        };
        truncated_tail_sum(from, &term, Some(&bracket), policy)?
    } else {
        truncated_tail_sum(from, &term, None, policy)?
    };
    Ok(TailOutcome::Estimate(est))
}

/// Lower bound on the probability of traversing one edge forever, starting
/// from count `m` against `d` frozen competitors:
/// the product over `k >= 0` of `W(m+k) / (W(m+k) + d * max_{j<m} W(j))`.
///
/// The product is accumulated in the log domain and extended until the next
/// factor's deficit drops below the policy target; the remaining factors
/// are certified through the family's reciprocal tail bound. Returns 0 when
/// no positive certified bound exists (e.g. divergent reciprocal sums).
pub fn sticky_lower_bound(
    w: &dyn WeightFunction,
    m: u64,
    d: u32,
    policy: &TruncationPolicy,
) -> Result<f64, WeightError> {
    if m < 1 {
        return Err(WeightError::Domain(m, 1));
    }
    if d < 1 {
        return Err(WeightError::Domain(d as u64, 1));
    }
    // Strongest competitor at counts below m; for m = 1 no strictly smaller
    // count exists, so W(1) stands in.
    let mut log_max = w.log_eval(1)?;
    for j in 2..m {
        log_max = log_max.max(w.log_eval(j)?);
    }
    let log_dmax = (d as f64).ln() + log_max;

    let mut neg_log = Kahan::new();
    let mut k = 0u64;
    loop {
        let ratio = (log_dmax - w.log_eval(m + k)?).exp();
        neg_log.add(ratio.ln_1p());
        k += 1;
        if k >= policy.max_terms {
            break;
        }
        let next_ratio = (log_dmax - w.log_eval(m + k)?).exp();
        if next_ratio / (1.0 + next_ratio) < policy.target_rel_tail {
            break;
        }
        if neg_log.value() > 750.0 {
            // Product already below the smallest positive double.
            return Ok(0.0);
        }
    }
    // Remaining factors: product >= exp(-d*max * sum_{j>=m+k} 1/W(j)).
    let tail_hi = match w.recip_tail_bracket(m + k) {
        Some((_, hi)) if hi.is_finite() => hi,
        _ => return Ok(0.0),
    };
    let tail_exponent = (log_dmax + tail_hi.ln()).exp();
    if !tail_exponent.is_finite() {
        return Ok(0.0);
    }
    let bound = (-neg_log.value() - tail_exponent).exp();
    Ok(bound.min(1.0 - f64::EPSILON))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::{parse_weight_spec, CustomWeight, TableWeights};
    use std::sync::Arc;

    fn policy() -> TruncationPolicy {
        TruncationPolicy::default()
    }

    #[test]
    fn w_star_basics() {
        let w1 = parse_weight_spec("power:1").unwrap();
        assert_eq!(w_star(&*w1, 0).unwrap(), 0.0);
        assert!((w_star(&*w1, 3).unwrap() - 11.0 / 6.0).abs() < 1e-15);
        let w2 = parse_weight_spec("power:2").unwrap();
        assert_eq!(w_star(&*w2, 2).unwrap(), 1.25);
    }

    #[test]
    fn w_star_cache_increments_match_reciprocals() {
        let w = parse_weight_spec("power:1.5").unwrap();
        let mut cache = WStarCache::new(w.clone());
        for n in 1..2000u64 {
            let diff = cache.value(n).unwrap() - cache.value(n - 1).unwrap();
            let scale = 1.0 + cache.value(n).unwrap();
            assert!(
                (diff - w.recip(n).unwrap()).abs() <= 4.0 * f64::EPSILON * scale,
                "n = {n}"
            );
        }
    }

    #[test]
    fn delta_monotone_families_are_exact_reciprocals() {
        let w = parse_weight_spec("power:2").unwrap();
        let est = delta_n(&*w, 5, &policy()).unwrap();
        assert_eq!(est.value, 0.04);
        assert!(est.exact);
        for n in 1..1000u64 {
            let est = delta_n(&*w, n, &policy()).unwrap();
            let direct = w.recip(n).unwrap();
            assert!((est.value - direct).abs() <= 1e-12 * direct);
        }
        let we = parse_weight_spec("exp:2").unwrap();
        let este = delta_n(&*we, 10, &policy()).unwrap();
        assert_eq!(este.value, 2f64.powi(-10));
    }

    #[test]
    fn delta_constant_table_tail_is_zero() {
        let t = TableWeights::new("table:test", vec![1.0, 2.0, 5.0]).unwrap();
        let est = delta_n(&t, 3, &policy()).unwrap();
        assert_eq!(est.value, 0.0);
        assert!(est.exact);
        let est10 = delta_n(&t, 10, &policy()).unwrap();
        assert_eq!(est10.value, 0.0);
    }

    #[test]
    fn delta_oscillating_table_sums_exactly() {
        // Non-monotone prefix: increments are finite and computable exactly.
        let t = TableWeights::new("table:test", vec![1.0, 4.0, 2.0]).unwrap();
        let est = delta_n(&t, 0, &policy()).unwrap();
        // |1/4 - 1| + |1/2 - 1/4| + 0 = 1.0
        assert!((est.value - 1.0).abs() < 1e-15);
        assert!(est.exact);
    }

    #[test]
    fn delta_sellke_matches_brute_force() {
        let w = parse_weight_spec("sellke:1").unwrap();
        let n = 100u64;
        let est = delta_n(&*w, n, &policy()).unwrap();
        // Independent oracle: plain forward sum, far past the policy cap.
        let mut oracle = 0.0;
        for k in (n + 1)..(n + 4_000_000) {
            oracle += (w.recip(k).unwrap() - w.recip(k - 1).unwrap()).abs();
        }
        let oracle_tail = 3.0 / (n as f64 + 4e6 - 2.0);
        assert!(
            (est.value - oracle).abs() <= est.tail_bound + oracle_tail,
            "est {} oracle {} tail {}",
            est.value,
            oracle,
            est.tail_bound
        );
    }

    #[test]
    fn delta_diverges_for_decreasing_power() {
        let w = parse_weight_spec("power:-1").unwrap();
        assert!(matches!(
            delta_n(&*w, 5, &policy()),
            Err(WeightError::TailUnbounded(_))
        ));
    }

    #[test]
    fn alpha_exponential_closed_form() {
        let w = parse_weight_spec("exp:2").unwrap();
        let est = alpha_n(&*w, 1, &policy()).unwrap();
        assert!((est.value - 1.0 / 3.0).abs() < 1e-15);
        assert!(est.exact);
    }

    #[test]
    fn alpha_power_two_near_pi4_over_90() {
        let w = parse_weight_spec("power:2").unwrap();
        let est = alpha_n(&*w, 1, &policy()).unwrap();
        let reference = std::f64::consts::PI.powi(4) / 90.0;
        assert!(
            (est.value - reference).abs() <= est.tail_bound + 4.0 * f64::EPSILON * reference,
            "value {} reference {} tail {}",
            est.value,
            reference,
            est.tail_bound
        );
    }

    #[test]
    fn alpha_asymptotic_integral_test() {
        // alpha_n * 3 n^3 -> 1 for W = k^2.
        let w = parse_weight_spec("power:2").unwrap();
        let n = 10_000u64;
        let est = alpha_n(&*w, n, &policy()).unwrap();
        let scaled = est.value * 3.0 * (n as f64).powi(3);
        assert!((scaled - 1.0).abs() < 1e-3, "scaled = {scaled}");
    }

    #[test]
    fn alpha_nonincreasing_in_n() {
        for spec in ["power:2", "power:1.5", "sellke:1"] {
            let w = parse_weight_spec(spec).unwrap();
            let mut prev = f64::INFINITY;
            for n in 1..60u64 {
                let est = alpha_n(&*w, n, &policy()).unwrap();
                assert!(
                    est.value <= prev + est.tail_bound + 1e-15,
                    "{spec} at n = {n}"
                );
                prev = est.value;
            }
        }
    }

    #[test]
    fn alpha_divergent_tail_is_an_error() {
        let w = parse_weight_spec("power:0.4").unwrap();
        assert!(matches!(
            alpha_n(&*w, 1, &policy()),
            Err(WeightError::TailUnbounded(_))
        ));
        assert!(matches!(alpha_n(&*w, 0, &policy()), Err(WeightError::Domain(0, 1))));
    }

    #[test]
    fn custom_black_box_stabilizes_or_errors() {
        // Fast-converging black box: stabilizes.
        let conv = CustomWeight::new("cube", Arc::new(|k| (k as f64).powi(3)));
        let est = alpha_n(&conv, 1, &policy()).unwrap();
        assert!(!est.exact);
        assert!(est.tail_bound > 0.0);
        // Slowly growing sums: refuses to guess.
        let slow = CustomWeight::new("slow", Arc::new(|k| (k as f64).sqrt()));
        assert!(matches!(
            alpha_n(&slow, 1, &policy()),
            Err(WeightError::TailUnbounded(_))
        ));
    }

    #[test]
    fn w_prime_values_and_guard() {
        let w1 = parse_weight_spec("power:1").unwrap();
        assert_eq!(w_prime(&*w1, 5).unwrap(), 1.0);
        let w2 = parse_weight_spec("power:2").unwrap();
        assert_eq!(w_prime(&*w2, 5).unwrap(), 9.0);
        let we = parse_weight_spec("exp:2").unwrap();
        assert_eq!(w_prime(&*we, 4).unwrap(), 8.0);
        assert!(matches!(w_prime(&*w1, 1), Err(WeightError::Domain(1, 2))));
    }

    #[test]
    fn sticky_bound_exponential_matches_direct_product() {
        let w = parse_weight_spec("exp:2").unwrap();
        let bound = sticky_lower_bound(&*w, 4, 2, &policy()).unwrap();
        // Direct oracle: product of W(4+k) / (W(4+k) + 2 * W(3)) until flat.
        let mut product = 1.0;
        for k in 0..200u64 {
            let wk = 2f64.powi((4 + k) as i32);
            product *= wk / (wk + 16.0);
        }
        assert!(bound > 0.0 && bound < 1.0);
        assert!((bound - product).abs() < 1e-9, "bound {bound} oracle {product}");
    }

    #[test]
    fn sticky_bound_harmonic_is_degenerate() {
        let w = parse_weight_spec("power:1").unwrap();
        assert_eq!(sticky_lower_bound(&*w, 10, 2, &policy()).unwrap(), 0.0);
    }

    #[test]
    fn sticky_bound_nondecreasing_in_m_for_exponential() {
        let w = parse_weight_spec("exp:2").unwrap();
        let mut prev = 0.0;
        for m in 1..12u64 {
            let b = sticky_lower_bound(&*w, m, 2, &policy()).unwrap();
            assert!((0.0..1.0).contains(&b));
            assert!(b >= prev - 1e-12, "m = {m}: {b} < {prev}");
            prev = b;
        }
    }

    #[test]
    fn sticky_bound_guards() {
        let w = parse_weight_spec("exp:2").unwrap();
        assert!(matches!(
            sticky_lower_bound(&*w, 0, 2, &policy()),
            Err(WeightError::Domain(0, 1))
        ));
        assert!(matches!(
            sticky_lower_bound(&*w, 4, 0, &policy()),
            Err(WeightError::Domain(0, 1))
        ));
    }

    #[test]
    fn recip_tail_divergence_and_estimates() {
        let w1 = parse_weight_spec("power:1").unwrap();
        assert!(matches!(
            recip_tail(&*w1, 5, &policy()).unwrap(),
            TailOutcome::CertifiedDivergent
        ));
        let w2 = parse_weight_spec("power:2").unwrap();
        match recip_tail(&*w2, 10, &policy()).unwrap() {
            TailOutcome::Estimate(est) => {
                // psi'(10) = 0.105166335681686... via direct summation.
                assert!((est.value - 0.105166335681686).abs() < 1e-9);
            }
            TailOutcome::CertifiedDivergent => panic!("power:2 tail converges"),
        }
    }

    #[test]
    fn reciprocal_bounded_by_delta_tail() {
        // 1/W(k) <= delta_k for weights whose reciprocals vanish; equality
        // for nondecreasing families.
        let mono = parse_weight_spec("power:1.5").unwrap();
        for k in 1..10_000u64 {
            let d = delta_n(&*mono, k, &policy()).unwrap();
            assert_eq!(d.value, mono.recip(k).unwrap());
        }
        let osc = parse_weight_spec("sellke:1").unwrap();
        let mut k = 1u64;
        while k <= 10_000 {
            let d = delta_n(&*osc, k, &policy()).unwrap();
            assert!(
                osc.recip(k).unwrap() <= d.value + d.tail_bound + 1e-15,
                "k = {k}"
            );
            k = (k * 3 / 2).max(k + 1);
        }
    }
}
