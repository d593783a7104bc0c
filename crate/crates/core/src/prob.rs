//! Probability primitives: the validated `Probability` newtype, Bernoulli
//! algebra, a numerically careful binomial CDF, and the additive Chernoff
//! radius.

use crate::error::{Error, Result};

/// A real number in `[0, 1]`, enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const HALF: Probability = Probability(0.5);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "probability must lie in [0, 1], got {value}"
            )))
        }
    }

    /// Clamps into `[0, 1]`; for values that are probabilities up to rounding.
    pub fn clamped(value: f64) -> Self {
        Probability(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Probability(1.0 - self.0)
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Parameter of `s XOR t` for independent `s ~ Ber(q1)`, `t ~ Ber(q2)`.
///
/// Returns `Pr[s ⊕ t = 1] = q1 + q2 − 2·q1·q2`. The complementary identity
/// `Pr[s ⊕ t = 0] = 2·q1·q2 − q1 − q2 + 1` is easy to mistake for this one —
/// substituting `q1 = 0, q2 = 1` there gives 0 even though the XOR is surely
/// 1 — so both sign conventions are pinned by unit tests.
pub fn xor_bernoulli_param(q1: Probability, q2: Probability) -> Probability {
    let (a, b) = (q1.value(), q2.value());
    Probability::clamped(a * (1.0 - b) + b * (1.0 - a))
}

/// `ln(e^x + e^y)`, stable for any magnitudes.
pub(crate) fn ln_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// `c * ln(p)` with the `0 * ln(0) = 0` convention.
pub(crate) fn ln_pow(p: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * p.ln()
    }
}

/// Cumulative distribution of Binomial(n, p) at `k`: `Pr[X <= k]`.
///
/// The mass function is accumulated through the exact ratio recurrence
/// `pmf(j+1)/pmf(j) = ((n-j)/(j+1)) (p/(1-p))` anchored at the mode (value
/// 1 there), then normalized by the full sum, with compensated summation
/// on both accumulators. Naive factorial products overflow long before
/// n = 10000; anchoring at the mode also sidesteps the ~1e-11 cancellation
/// a log-gamma evaluation suffers at that size, keeping the absolute error
/// near 1e-13.
pub fn binomial_cdf(k: u64, n: u64, p: Probability) -> Result<Probability> {
    if n < 1 {
        return Err(Error::InvalidArgument("binomial_cdf needs n >= 1".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!(
            "binomial_cdf index k={k} out of range 0..={n}"
        )));
    }
    let pv = p.value();
    if k == n || pv == 0.0 {
        return Ok(Probability::ONE);
    }
    if pv == 1.0 {
        // k < n here
        return Ok(Probability::ZERO);
    }

    let odds = pv / (1.0 - pv);
    let mode = (((n + 1) as f64) * pv).floor().min(n as f64) as u64;

    let mut total = KahanSum::default();
    let mut prefix = KahanSum::default();
    let mut add = |j: u64, term: f64| {
        total.add(term);
        if j <= k {
            prefix.add(term);
        }
    };

    add(mode, 1.0);
    let mut term = 1.0f64;
    for j in mode..n {
        term *= (n - j) as f64 / (j + 1) as f64 * odds;
        if term == 0.0 {
            break;
        }
        add(j + 1, term);
    }
    term = 1.0;
    for j in (1..=mode).rev() {
        term *= j as f64 / (n - j + 1) as f64 / odds;
        if term == 0.0 {
            break;
        }
        add(j - 1, term);
    }
    Ok(Probability::clamped(prefix.value() / total.value()))
}

#[derive(Default)]
struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    fn add(&mut self, term: f64) {
        let y = term - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Radius `a` with `2·exp(-2·n·a²) = beta`: the additive Chernoff deviation
/// bound for the mean of `n` Bernoulli draws at failure probability `beta`.
pub fn chernoff_radius(n: u64, beta: Probability) -> Result<f64> {
    let b = beta.value();
    if n < 1 {
        return Err(Error::InvalidArgument(
            "chernoff_radius needs n >= 1".into(),
        ));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "chernoff_radius needs beta in (0, 1), got {b}"
        )));
    }
    Ok(((2.0 / b).ln() / (2.0 * n as f64)).sqrt())
}
