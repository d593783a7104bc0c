//! Single-bit collection with everlasting privacy: doubly randomized
//! response.
//!
//! Each user holds one bit `b`, remembers a once-noised copy
//! `b' = b XOR x` with `x ~ Ber(1/(e^{eps1}+1))`, and at every collection
//! sends `r = b' XOR y` with fresh `y ~ Ber(1/(e^{eps2}+1))`. The stored
//! bit caps the lifetime leakage at `eps1` no matter how many reports are
//! collected; the fresh noise governs how linkable the reports are to each
//! other.
//!
//! The aggregator inverts the two noise layers in closed form: with mean
//! report `S` over one report per user,
//!
//! ```text
//! p0_hat = (e^{eps1+eps2} + 1 - (e^{eps1}+1)(e^{eps2}+1) * S)
//!          / ((e^{eps1}-1)(e^{eps2}-1))
//! ```
//!
//! is an unbiased estimate of the fraction of zeros (and `p1_hat` its
//! complement). The estimate is left unclipped; presentation layers may
//! clamp.

use crate::bounds::permanent_state_untrackable;
use crate::error::{Error, Result};
use crate::mech::PermanentStateMechanism;
use crate::parallel;
use crate::prob::{ln_add_exp, Probability};
use crate::rng::SeededRng;

/// Noise levels of the two layers; both must be positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitwiseParams {
    pub eps1: f64,
    pub eps2: f64,
}

impl BitwiseParams {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        if !(eps1.is_finite() && eps2.is_finite()) || eps1 <= 0.0 || eps2 <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "noise levels must be positive, got eps1={eps1} eps2={eps2}"
            )));
        }
        Ok(BitwiseParams { eps1, eps2 })
    }

    /// Probability the remembered bit differs from the private bit:
    /// `1/(e^{eps1}+1)`.
    pub fn state_flip_probability(self) -> Probability {
        Probability::clamped(1.0 / (self.eps1.exp() + 1.0))
    }

    /// Probability a report differs from the remembered bit:
    /// `1/(e^{eps2}+1)`.
    pub fn report_flip_probability(self) -> Probability {
        Probability::clamped(1.0 / (self.eps2.exp() + 1.0))
    }

    /// Marginal probability of reporting 1 for a user holding `b`.
    pub fn marginal_one_rate(self, b: bool) -> Probability {
        let (e1, e2) = (self.eps1.exp(), self.eps2.exp());
        let rate_zero = (e1 + e2) / ((e1 + 1.0) * (e2 + 1.0));
        if b {
            Probability::clamped(1.0 - rate_zero)
        } else {
            Probability::clamped(rate_zero)
        }
    }
}

/// The remembered bit `b' = b XOR x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitwiseState {
    pub bit: bool,
}

/// Unbiased two-value frequency estimate; `p1` is defined as `1 - p0`
/// exactly, and either entry may leave `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyEstimate2 {
    pub p0: f64,
    pub p1: f64,
}

/// Draws the permanent state for a user holding `b`.
pub fn init_state(b: bool, params: &BitwiseParams, rng: &mut SeededRng) -> BitwiseState {
    let flip = rng.bernoulli(params.state_flip_probability());
    BitwiseState { bit: b ^ flip }
}

/// One report: the remembered bit under fresh noise.
pub fn report(state: BitwiseState, params: &BitwiseParams, rng: &mut SeededRng) -> bool {
    state.bit ^ rng.bernoulli(params.report_flip_probability())
}

/// Inverts the two noise layers over one report per user.
pub fn estimate_frequencies(
    reports: &[bool],
    params: &BitwiseParams,
) -> Result<FrequencyEstimate2> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to aggregate".into()));
    }
    let ones = reports.iter().filter(|&&r| r).count();
    Ok(estimate_from_mean(
        ones as f64 / reports.len() as f64,
        params,
    ))
}

/// The estimator applied to a precomputed mean report.
pub fn estimate_from_mean(mean_report: f64, params: &BitwiseParams) -> FrequencyEstimate2 {
    let (e1, e2) = (params.eps1.exp(), params.eps2.exp());
    let p0 = ((params.eps1 + params.eps2).exp() + 1.0 - (e1 + 1.0) * (e2 + 1.0) * mean_report)
        / ((e1 - 1.0) * (e2 - 1.0));
    FrequencyEstimate2 { p0, p1: 1.0 - p0 }
}

/// Deviation bounds on `|p0_hat - p0|` holding with probability `1 - beta`
/// over `n` users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBounds {
    /// `((e^{eps1}+1)(e^{eps2}+1)/((e^{eps1}-1)(e^{eps2}-1))) * sqrt(2 ln(2/beta)/n)`.
    pub exact: f64,
    /// The looser closed form `((eps1+2)(eps2+2)/(eps1*eps2)) * sqrt(32 ln(2/beta)/n)`.
    pub simplified: f64,
}

pub fn accuracy_bound(params: &BitwiseParams, n: u64, beta: Probability) -> Result<AccuracyBounds> {
    let b = beta.value();
    if n < 1 {
        return Err(Error::InvalidArgument("need n >= 1 users".into()));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in (0, 1), got {b}"
        )));
    }
    let (e1, e2) = (params.eps1.exp(), params.eps2.exp());
    let log_term = (2.0 / b).ln();
    let exact =
        ((e1 + 1.0) * (e2 + 1.0)) / ((e1 - 1.0) * (e2 - 1.0)) * (2.0 * log_term / n as f64).sqrt();
    let simplified = ((params.eps1 + 2.0) * (params.eps2 + 2.0)) / (params.eps1 * params.eps2)
        * (32.0 * log_term / n as f64).sqrt();
    Ok(AccuracyBounds { exact, simplified })
}

/// Probability of one particular report stream of length `len` in which
/// `matching` reports equal the user's private bit:
///
/// ```text
/// (e^{eps1 + matching*eps2} + e^{(len-matching)*eps2})
///   / ((1+e^{eps1}) (1+e^{eps2})^len)
/// ```
///
/// Symmetric in the private bit. Summed over the binomial multiplicities it
/// is a distribution: `sum_x C(len, x) * p(x, len) = 1`.
pub fn stream_probability(
    matching: usize,
    len: usize,
    params: &BitwiseParams,
) -> Result<Probability> {
    if matching > len {
        return Err(Error::InvalidArgument(format!(
            "matching count {matching} exceeds stream length {len}"
        )));
    }
    let log_num = ln_add_exp(
        params.eps1 + matching as f64 * params.eps2,
        (len - matching) as f64 * params.eps2,
    );
    let log_den = (1.0 + params.eps1.exp()).ln() + len as f64 * (1.0 + params.eps2.exp()).ln();
    Ok(Probability::clamped((log_num - log_den).exp()))
}

/// Untrackability envelope for `k` reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackabilityEnvelope {
    /// `floor(k/2) * eps2`, from the permanent-state bound.
    pub upper: f64,
    /// The nominal lower estimate `(k/2)*eps2 - eps1 - ln 2`, clamped into
    /// `[0, upper]`. The half-ones witness this estimate is read off from
    /// only guarantees [`Self::witness_floor`]; exact enumeration can fall
    /// between the two.
    pub lower: f64,
    /// `(k/2)*eps2 - eps1 - ln 4`, clamped into `[0, upper]`: what the
    /// half-ones witness provably achieves.
    pub witness_floor: f64,
}

pub fn trackability_bounds(params: &BitwiseParams, k: u64) -> TrackabilityEnvelope {
    let upper = permanent_state_untrackable(params.eps2, k);
    let nominal = k as f64 / 2.0 * params.eps2 - params.eps1 - 2f64.ln();
    let witness = k as f64 / 2.0 * params.eps2 - params.eps1 - 4f64.ln();
    TrackabilityEnvelope {
        upper,
        lower: nominal.clamp(0.0, upper),
        witness_floor: witness.clamp(0.0, upper),
    }
}

/// The finite two-input, two-state, two-report representation for the
/// exact oracles.
pub fn as_permanent_mechanism(params: &BitwiseParams) -> PermanentStateMechanism {
    let (e1, e2) = (params.eps1.exp(), params.eps2.exp());
    let keep1 = e1 / (1.0 + e1);
    let keep2 = e2 / (1.0 + e2);
    PermanentStateMechanism::new(
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into()],
        vec!["0".into(), "1".into()],
        vec![vec![keep1, 1.0 - keep1], vec![1.0 - keep1, keep1]],
        vec![vec![keep2, 1.0 - keep2], vec![1.0 - keep2, keep2]],
    )
    .expect("bitwise representation is row-stochastic")
}

/// One collection round: `zeros` users hold 0 and `ones` hold 1, each
/// initializes a fresh state and sends one report. User `i` draws from the
/// `i`-th child stream of `rng`, so the round is reproducible at any
/// parallelism level.
pub fn simulate_frequency_round(
    params: &BitwiseParams,
    zeros: usize,
    ones: usize,
    rng: &SeededRng,
) -> Result<FrequencyEstimate2> {
    let n = zeros + ones;
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    let one_reports = parallel::sum_indexed_u64(n, |i| {
        let mut user_rng = rng.substream(i as u64);
        let state = init_state(i >= zeros, params, &mut user_rng);
        u64::from(report(state, params, &mut user_rng))
    });
    Ok(estimate_from_mean(one_reports as f64 / n as f64, params))
}
