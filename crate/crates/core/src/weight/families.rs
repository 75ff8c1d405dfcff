//! The built-in weight families and the spec-string registry.

use std::path::Path;
use std::sync::Arc;

use super::{Monotone, WeightError, WeightFunction, WeightHandle};

/// `W(k) = k^rho`.
#[derive(Debug, Clone)]
pub struct Power {
    rho: f64,
    int_rho: Option<i32>,
}

impl Power {
    pub fn new(rho: f64) -> Result<Self, WeightError> {
        if !rho.is_finite() {
            return Err(WeightError::BadSpec {
                spec: format!("power:{rho}"),
                reason: "exponent must be finite".into(),
            });
        }
        let int_rho = (rho.fract() == 0.0 && rho.abs() <= 32.0).then(|| rho as i32);
        Ok(Self { rho, int_rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl WeightFunction for Power {
    fn spec_string(&self) -> String {
        format!("power:{}", self.rho)
    }

    fn raw(&self, k: u64) -> f64 {
        let x = k as f64;
        // powi keeps small integer powers exact (n^2 for n <= 1e4 matters
        // to downstream identity tests).
        match self.int_rho {
            Some(p) => x.powi(p),
            None => x.powf(self.rho),
        }
    }

    fn log_raw(&self, k: u64) -> f64 {
        self.rho * (k as f64).ln()
    }

    fn has_exact_log(&self) -> bool {
        true
    }

    fn monotone(&self) -> Monotone {
        if self.rho >= 0.0 {
            Monotone::Yes
        } else {
            Monotone::No
        }
    }

    fn analytic_tails(&self) -> bool {
        true
    }

    fn recip_limit(&self) -> Option<f64> {
        if self.rho > 0.0 {
            Some(0.0)
        } else if self.rho == 0.0 {
            Some(1.0)
        } else {
            None
        }
    }

    fn recip_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        Some(p_series_tail_bracket(self.rho, from))
    }

    fn recip_sq_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        Some(p_series_tail_bracket(2.0 * self.rho, from))
    }

    fn abs_diff_tail_bound(&self, from: u64) -> Option<f64> {
        if self.rho > 0.0 {
            // Nonincreasing reciprocals telescope.
            Some((from.max(2) as f64 - 1.0).powf(-self.rho))
        } else if self.rho == 0.0 {
            Some(0.0)
        } else {
            Some(f64::INFINITY)
        }
    }

    fn h0_analytic(&self) -> Option<bool> {
        Some(self.rho > 1.0)
    }

    fn h3_analytic(&self) -> Option<bool> {
        // Relative increments decay like rho/n for every exponent.
        Some(true)
    }
}

/// Integral-test bracket for `sum_{k>=from} k^(-s)`; divergent for `s <= 1`.
fn p_series_tail_bracket(s: f64, from: u64) -> (f64, f64) {
    if s <= 1.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let x = from.max(1) as f64;
    let integral = x.powf(1.0 - s) / (s - 1.0);
    (integral, x.powf(-s) + integral)
}

/// `W(k) = b^k`, `b > 1`.
#[derive(Debug, Clone)]
pub struct Exponential {
    base: f64,
    log_base: f64,
}

impl Exponential {
    pub fn new(base: f64) -> Result<Self, WeightError> {
        if !(base.is_finite() && base > 1.0) {
            return Err(WeightError::BadSpec {
                spec: format!("exp:{base}"),
                reason: "base must be finite and > 1".into(),
            });
        }
        Ok(Self {
            base,
            log_base: base.ln(),
        })
    }

    pub fn base(&self) -> f64 {
        self.base
    }
}

impl WeightFunction for Exponential {
    fn spec_string(&self) -> String {
        format!("exp:{}", self.base)
    }

    fn raw(&self, k: u64) -> f64 {
        if k <= i32::MAX as u64 {
            self.base.powi(k as i32)
        } else {
            f64::INFINITY
        }
    }

    fn log_raw(&self, k: u64) -> f64 {
        k as f64 * self.log_base
    }

    fn has_exact_log(&self) -> bool {
        true
    }

    fn monotone(&self) -> Monotone {
        Monotone::Yes
    }

    fn analytic_tails(&self) -> bool {
        true
    }

    fn recip_limit(&self) -> Option<f64> {
        Some(0.0)
    }

    fn recip_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        // Geometric closed form: b^(1-from) / (b - 1).
        let v = ((1.0 - from as f64) * self.log_base).exp() / (self.base - 1.0);
        Some((v, v))
    }

    fn recip_sq_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        // b^(2-2*from) / (b^2 - 1).
        let v = ((2.0 - 2.0 * from as f64) * self.log_base).exp()
            / (self.base * self.base - 1.0);
        Some((v, v))
    }

    fn abs_diff_tail_bound(&self, from: u64) -> Option<f64> {
        Some(((1.0 - from.max(2) as f64) * self.log_base).exp() * self.base)
    }

    fn h0_analytic(&self) -> Option<bool> {
        Some(true)
    }

    fn h3_analytic(&self) -> Option<bool> {
        // W'(n)/W(n) = 1 - 1/b, constant; the squared terms do not vanish.
        Some(false)
    }
}

/// `W(k) = k^(1+rho) / (2 + (-1)^k)`: even k divides by 3, odd k by 1.
#[derive(Debug, Clone)]
pub struct SellkeOscillating {
    rho: f64,
}

impl SellkeOscillating {
    pub fn new(rho: f64) -> Result<Self, WeightError> {
        if !(rho.is_finite() && rho > 0.0) {
            return Err(WeightError::BadSpec {
                spec: format!("sellke:{rho}"),
                reason: "exponent must be finite and > 0".into(),
            });
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    fn denominator(k: u64) -> f64 {
        if k % 2 == 0 {
            3.0
        } else {
            1.0
        }
    }
}

impl WeightFunction for SellkeOscillating {
    fn spec_string(&self) -> String {
        format!("sellke:{}", self.rho)
    }

    fn raw(&self, k: u64) -> f64 {
        (k as f64).powf(1.0 + self.rho) / Self::denominator(k)
    }

    fn log_raw(&self, k: u64) -> f64 {
        (1.0 + self.rho) * (k as f64).ln() - Self::denominator(k).ln()
    }

    fn has_exact_log(&self) -> bool {
        true
    }

    fn monotone(&self) -> Monotone {
        Monotone::No
    }

    fn analytic_tails(&self) -> bool {
        true
    }

    fn recip_limit(&self) -> Option<f64> {
        Some(0.0)
    }

    fn recip_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        // 1/W(k) lies between k^-(1+rho) and 3 k^-(1+rho).
        let (lo, hi) = p_series_tail_bracket(1.0 + self.rho, from);
        Some((lo, 3.0 * hi))
    }

    fn recip_sq_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        let (lo, hi) = p_series_tail_bracket(2.0 + 2.0 * self.rho, from);
        Some((lo, 9.0 * hi))
    }

    fn abs_diff_tail_bound(&self, from: u64) -> Option<f64> {
        // |1/W(k) - 1/W(k-1)| <= max of the pair <= 3 (k-1)^-(1+rho).
        let (_, hi) = p_series_tail_bracket(1.0 + self.rho, from.max(2) - 1);
        Some(3.0 * hi)
    }

    fn h0_analytic(&self) -> Option<bool> {
        Some(self.rho > 0.0)
    }

    fn h3_analytic(&self) -> Option<bool> {
        // The ratio W(n-1)/W(n) oscillates near 3 and 1/3, so the squared
        // relative increments stay bounded away from 0.
        Some(false)
    }
}

/// `W(k) = exp(k * (2 + (-1)^k))`: even k gives e^(3k), odd k gives e^k.
#[derive(Debug, Clone, Default)]
pub struct ExpOscillating;

impl ExpOscillating {
    fn exponent(k: u64) -> f64 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        k as f64 * (2.0 + sign)
    }
}

impl WeightFunction for ExpOscillating {
    fn spec_string(&self) -> String {
        "exposc".into()
    }

    fn raw(&self, k: u64) -> f64 {
        Self::exponent(k).exp()
    }

    fn log_raw(&self, k: u64) -> f64 {
        Self::exponent(k)
    }

    fn has_exact_log(&self) -> bool {
        true
    }

    fn monotone(&self) -> Monotone {
        Monotone::No
    }

    fn analytic_tails(&self) -> bool {
        true
    }

    fn recip_limit(&self) -> Option<f64> {
        Some(0.0)
    }

    fn recip_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        // Every term is at most e^-k; the first term is a trivial lower bound.
        let lo = (-Self::exponent(from)).exp();
        let hi = (-(from as f64)).exp() / (1.0 - (-1.0f64).exp());
        Some((lo, hi))
    }

    fn recip_sq_tail_bracket(&self, from: u64) -> Option<(f64, f64)> {
        let lo = (-2.0 * Self::exponent(from)).exp();
        let hi = (-2.0 * from as f64).exp() / (1.0 - (-2.0f64).exp());
        Some((lo, hi))
    }

    fn abs_diff_tail_bound(&self, from: u64) -> Option<f64> {
        // max(1/W(k), 1/W(k-1)) <= e^-(k-1).
        Some((1.0 - from.max(2) as f64).exp() / (1.0 - (-1.0f64).exp()))
    }

    fn h0_analytic(&self) -> Option<bool> {
        Some(true)
    }

    fn h3_analytic(&self) -> Option<bool> {
        Some(false)
    }
}

/// Finite table of weights with the last value extended as a constant tail.
#[derive(Debug, Clone)]
pub struct TableWeights {
    name: String,
    values: Vec<f64>,
    monotone: Monotone,
}

impl TableWeights {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self, WeightError> {
        if values.is_empty() {
            return Err(WeightError::BadSpec {
                spec: name.into(),
                reason: "weight table must contain at least one value".into(),
            });
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(WeightError::NonPositiveWeight(i as u64 + 1));
            }
        }
        let monotone = if values.windows(2).all(|w| w[0] <= w[1]) {
            Monotone::Yes
        } else {
            Monotone::No
        };
        Ok(Self {
            name: name.into(),
            values,
            monotone,
        })
    }

    /// Load one `W(k)` value per line, 1-based; `#` comments and blank
    /// lines are skipped.
    pub fn from_file(path: &Path) -> Result<Self, WeightError> {
        let name = format!("table:{}", path.display());
        let text = std::fs::read_to_string(path)?;
        let mut values = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let v: f64 = body.parse().map_err(|_| WeightError::BadSpec {
                spec: name.clone(),
                reason: format!("line {}: expected a number", lineno + 1),
            })?;
            values.push(v);
        }
        Self::new(name, values)
    }

    pub fn prefix_len(&self) -> u64 {
        self.values.len() as u64
    }

    fn last(&self) -> f64 {
        *self.values.last().unwrap()
    }
}

impl WeightFunction for TableWeights {
    fn spec_string(&self) -> String {
        self.name.clone()
    }

    fn raw(&self, k: u64) -> f64 {
        if k <= self.values.len() as u64 {
            self.values[(k - 1) as usize]
        } else {
            self.last()
        }
    }

    fn monotone(&self) -> Monotone {
        self.monotone
    }

    fn analytic_tails(&self) -> bool {
        true
    }

    fn recip_limit(&self) -> Option<f64> {
        Some(1.0 / self.last())
    }

    fn recip_tail_bracket(&self, _from: u64) -> Option<(f64, f64)> {
        // Constant positive tail: divergent.
        Some((f64::INFINITY, f64::INFINITY))
    }

    fn recip_sq_tail_bracket(&self, _from: u64) -> Option<(f64, f64)> {
        Some((f64::INFINITY, f64::INFINITY))
    }

    fn abs_diff_tail_bound(&self, from: u64) -> Option<f64> {
        let len = self.values.len() as u64;
        if from > len {
            return Some(0.0);
        }
        // Remaining increments end at the constant tail; sum them exactly.
        let mut total = 0.0;
        for k in from.max(2)..=len {
            total += (1.0 / self.raw(k) - 1.0 / self.raw(k - 1)).abs();
        }
        Some(total)
    }

    fn h0_analytic(&self) -> Option<bool> {
        Some(false)
    }

    fn h3_analytic(&self) -> Option<bool> {
        Some(true)
    }
}

/// Black-box weight rule; positivity is checked on every evaluation and no
/// analytic tail information is assumed.
pub struct CustomWeight {
    name: String,
    rule: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
}

impl CustomWeight {
    pub fn new(name: impl Into<String>, rule: Arc<dyn Fn(u64) -> f64 + Send + Sync>) -> Self {
        Self {
            name: name.into(),
            rule,
        }
    }
}

impl WeightFunction for CustomWeight {
    fn spec_string(&self) -> String {
        format!("custom:{}", self.name)
    }

    fn raw(&self, k: u64) -> f64 {
        (self.rule)(k)
    }

    fn monotone(&self) -> Monotone {
        Monotone::Unknown
    }

    fn analytic_tails(&self) -> bool {
        false
    }
}

/// Names understood by [`parse_weight_spec`], with a short description each.
pub fn registered_weight_specs() -> Vec<(&'static str, &'static str)> {
    vec![
        ("power:<rho>", "W(k) = k^rho"),
        ("exp:<b>", "W(k) = b^k, b > 1"),
        ("sellke:<rho>", "W(k) = k^(1+rho)/(2+(-1)^k), rho > 0"),
        ("exposc", "W(k) = exp(k(2+(-1)^k))"),
        ("table:<path>", "values from file, one W(k) per line, 1-based"),
    ]
}

/// Resolve a weight spec string to a family instance.
pub fn parse_weight_spec(spec: &str) -> Result<WeightHandle, WeightError> {
    let spec = spec.trim();
    let bad = |reason: &str| WeightError::BadSpec {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    if spec == "exposc" {
        return Ok(Arc::new(ExpOscillating));
    }
    if let Some(rest) = spec.strip_prefix("power:") {
        let rho: f64 = rest.parse().map_err(|_| bad("exponent must be a number"))?;
        return Ok(Arc::new(Power::new(rho)?));
    }
    if let Some(rest) = spec.strip_prefix("exp:") {
        let base: f64 = rest.parse().map_err(|_| bad("base must be a number"))?;
        return Ok(Arc::new(Exponential::new(base)?));
    }
    if let Some(rest) = spec.strip_prefix("sellke:") {
        let rho: f64 = rest.parse().map_err(|_| bad("exponent must be a number"))?;
        return Ok(Arc::new(SellkeOscillating::new(rho)?));
    }
    if let Some(path) = spec.strip_prefix("table:") {
        return Ok(Arc::new(TableWeights::from_file(Path::new(path))?));
    }
    Err(bad("unknown weight spec"))
}
