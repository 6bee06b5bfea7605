//! Small numerical helpers shared by the prior and posterior code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Exponents below this are treated as exact zeros when leaving log space.
pub const LOG_UNDERFLOW_FLOOR: f64 = -745.0;

/// Returns `log(sum(exp(values)))`; empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut acc = LogSumExp::new();
    for &v in values {
        acc.push(v);
    }
    acc.value()
}

/// Streaming log-sum-exp accumulator.
///
/// Keeps the running maximum and a sum of `exp(v - max)`, rescaling the sum
/// whenever a new maximum arrives.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub fn push(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v > self.max {
            let shift = self.max - v;
            self.sum = if shift < LOG_UNDERFLOW_FLOOR {
                0.0
            } else {
                self.sum * shift.exp()
            };
            self.max = v;
        }
        let d = v - self.max;
        if d >= LOG_UNDERFLOW_FLOOR {
            self.sum += d.exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

/// Exactly rounded floating point summation (Shewchuk's expansion algorithm,
/// as used by Python's `math.fsum`).
///
/// The rounded result does not depend on the order in which values were
/// added, which the posterior engine relies on for reproducible reductions
/// across threads and predictor orderings. Inputs must be finite.
#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        debug_assert!(value.is_finite(), "ExactSum only accepts finite values");
        let mut x = value;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// The correctly rounded value of the accumulated sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Round-half-even correction when the remaining partials push the
        // exact value past a halfway point.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

/// Prefix table of `log Γ(base + m) − log Γ(base) = Σ_{k<m} log(base + k)`.
#[derive(Debug, Clone)]
pub struct LogRising {
    prefix: Vec<f64>,
}

impl LogRising {
    pub fn new(base: f64, max_m: usize) -> Self {
        let mut prefix = Vec::with_capacity(max_m + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for k in 0..max_m {
            acc += (base + k as f64).ln();
            prefix.push(acc);
        }
        Self { prefix }
    }

    #[inline]
    pub fn get(&self, m: usize) -> f64 {
        self.prefix[m]
    }

    pub fn max_m(&self) -> usize {
        self.prefix.len() - 1
    }
}

/// `log C(n, k)`; `-inf` when `k > n`.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let mut acc = ExactSum::new();
    for i in 0..k {
        acc.add(((n - i) as f64).ln());
        acc.add(-((i + 1) as f64).ln());
    }
    acc.value()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream indices into a new seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &idx| splitmix64(acc ^ splitmix64(idx)))
}

/// A deterministic RNG substream for `(seed, stream)`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_is_order_independent() {
        let values = [1e16, 1.0, -1e16, 3.5, 1e-10, -2.25, 7e15, 0.1, 0.2, 0.3];
        let mut fwd = ExactSum::new();
        values.iter().for_each(|&v| fwd.add(v));
        let mut rev = ExactSum::new();
        values.iter().rev().for_each(|&v| rev.add(v));
        assert_eq!(fwd.value(), rev.value());
        assert_eq!(fwd.value(), 7_000_000_000_000_003.0);
    }

    #[test]
    fn exact_sum_of_tenths() {
        let mut s = ExactSum::new();
        for _ in 0..10 {
            s.add(0.1);
        }
        assert_eq!(s.value(), 1.0);
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    #[test]
    fn exact_sum_merge_matches_single_accumulator() {
        let vals: Vec<f64> = (1..200).map(|i| 1.0 / i as f64).collect();
        let mut all = ExactSum::new();
        vals.iter().for_each(|&v| all.add(v));
        let mut a = ExactSum::new();
        let mut b = ExactSum::new();
        for (i, &v) in vals.iter().enumerate() {
            if i % 3 == 0 {
                a.add(v)
            } else {
                b.add(v)
            }
        }
        b.merge(&a);
        assert_eq!(all.value(), b.value());
    }

    #[test]
    fn log_sum_exp_edge_cases() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        let v = log_sum_exp(&[0.0, -800.0]);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn log_rising_matches_gamma_ratio() {
        let t = LogRising::new(0.5, 10);
        for m in 0..=10 {
            let expect = statrs::function::gamma::ln_gamma(0.5 + m as f64)
                - statrs::function::gamma::ln_gamma(0.5);
            assert!((t.get(m) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn ln_choose_small() {
        assert!((ln_choose(10, 2) - 45f64.ln()).abs() < 1e-14);
        assert_eq!(ln_choose(3, 4), f64::NEG_INFINITY);
        assert_eq!(ln_choose(5, 0), 0.0);
    }

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        use rand::Rng;
        let a: u64 = substream(7, 3).random();
        let b: u64 = substream(7, 3).random();
        let c: u64 = substream(7, 4).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }
}
