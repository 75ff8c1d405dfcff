//! Small numeric building blocks shared across the crate: compensated
//! summation and binomial confidence intervals.

/// Kahan–Babuska compensated accumulator.
///
/// Error stays O(eps * sum of |terms|) independent of the term count, which
/// is what lets the identity residual budget of 1e-9 hold over multi-million
/// step runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum of an iterator of terms.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(terms: I) -> f64 {
    let mut acc = Kahan::new();
    for t in terms {
        acc.add(t);
    }
    acc.value()
}

/// Half-width of a 95% Wald interval for a binomial proportion.
///
/// `successes` out of `trials`; returns 0 for zero trials.
pub fn binomial_ci_half_width(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    1.96 * (p * (1.0 - p) / n).sqrt()
}

/// SplitMix64 step, used to derive independent replica seeds from a master
/// seed. The generator choice for the walk itself lives in `walk`.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Quantile of a sorted slice by nearest-rank; `q` in [0, 1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_small_increments() {
        // 1.0 followed by 1e8 additions of 1e-16 is lost by naive summation.
        let mut acc = Kahan::new();
        acc.add(1.0);
        for _ in 0..100_000 {
            acc.add(1e-16);
        }
        let expected = 1.0 + 1e-11;
        assert!((acc.value() - expected).abs() < 1e-15);
    }

    #[test]
    fn ci_half_width_zero_trials() {
        assert_eq!(binomial_ci_half_width(0, 0), 0.0);
    }

    #[test]
    fn ci_half_width_matches_formula() {
        let hw = binomial_ci_half_width(50, 100);
        assert!((hw - 1.96 * (0.25f64 / 100.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn quantiles_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
    }

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = 42u64;
        let mut b = 42u64;
        assert_eq!(splitmix64(&mut a), splitmix64(&mut b));
        assert_eq!(a, b);
    }
}
