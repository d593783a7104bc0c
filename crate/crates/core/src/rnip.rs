//! Report noisy inner product: d-bit value collection with everlasting
//! privacy and bounded-horizon untrackability.
//!
//! Each user stores L executions of a noisy inner-product query against
//! their value `u`: random nonzero vectors `v_j` in {0,1}^d and bits
//! `b_j = <v_j, u> XOR x_j` with `x_j ~ Ber(1/(e^{eps'}+1))`. Every
//! collection replays one stored execution chosen uniformly; only L
//! distinct executions ever leave the device, so composing L reports at
//! level eps' = eps / (2 sqrt(2 L ln(1/delta))) keeps the lifetime leakage
//! within (eps, delta).
//!
//! The aggregator estimates every value's frequency densely:
//!
//! ```text
//! p_hat(u) = (2^d-1)/(2^d n) * (e^{eps'}+1)/(e^{eps'}-1)
//!            * sum_i (-1)^{<V_i,u> XOR B_i}  +  1/2^d
//! ```
//!
//! which is unbiased and sums to exactly 1 over all 2^d values. Two report
//! sets are perfectly indistinguishable (one user versus two) unless some
//! vector value repeats across reports; that collision event has
//! probability at most `k^2/L + L^2/2^d`.

use crate::error::{Error, Result};
use crate::parallel;
use crate::prob::Probability;
use crate::rng::SeededRng;

/// Largest supported dimension for dense 2^d frequency estimation.
pub const MAX_DENSE_DIMENSION: usize = 20;

/// `eps / (2 sqrt(2 L ln(1/delta)))`: the per-report privacy level that
/// makes L-fold advanced composition land at (eps, delta).
pub fn derive_eps_prime(eps: f64, delta: Probability, state_size: usize) -> Result<f64> {
    let d = delta.value();
    if !(d > 0.0 && d < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {d}"
        )));
    }
    if state_size < 1 {
        return Err(Error::InvalidArgument("state size must be >= 1".into()));
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    Ok(eps / (2.0 * (2.0 * state_size as f64 * (1.0 / d).ln()).sqrt()))
}

/// Mechanism configuration. `eps_prime` is the per-report noise level; the
/// plain constructor derives it from `(eps, delta, state_size)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnipParams {
    /// Value width in bits (d).
    pub dimension: usize,
    /// Stored executions per user (L).
    pub state_size: usize,
    /// Everlasting privacy target epsilon.
    pub eps: f64,
    /// Everlasting privacy target delta.
    pub delta: Probability,
    /// Per-report privacy level.
    pub eps_prime: f64,
}

impl RnipParams {
    pub fn new(dimension: usize, state_size: usize, eps: f64, delta: Probability) -> Result<Self> {
        if !(1..=32).contains(&dimension) {
            return Err(Error::InvalidArgument(format!(
                "dimension must lie in 1..=32, got {dimension}"
            )));
        }
        let eps_prime = derive_eps_prime(eps, delta, state_size)?;
        Ok(RnipParams {
            dimension,
            state_size,
            eps,
            delta,
            eps_prime,
        })
    }

    /// Probability a stored bit is flipped: `1/(e^{eps'}+1)`.
    pub fn noise_probability(&self) -> Probability {
        Probability::clamped(1.0 / (self.eps_prime.exp() + 1.0))
    }

    fn vector_mask(&self) -> u32 {
        if self.dimension >= 32 {
            u32::MAX
        } else {
            (1u32 << self.dimension) - 1
        }
    }
}

/// The L stored executions of one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RnipState {
    /// Nonzero query vectors, one bit per dimension.
    pub vectors: Vec<u32>,
    /// Noisy inner products `<v_j, u> XOR x_j`.
    pub bits: Vec<bool>,
}

/// One replayed execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RnipReport {
    pub vector: u32,
    pub bit: bool,
}

/// Inner product over GF(2).
fn parity(v: u32, u: u32) -> bool {
    (v & u).count_ones() & 1 == 1
}

/// Draws the stored state for a user holding `value`: L uniform nonzero
/// vectors (rejection sampled for exact uniformity over the 2^d - 1
/// candidates) and their noisy inner products.
pub fn init_state(value: u32, params: &RnipParams, rng: &mut SeededRng) -> Result<RnipState> {
    let mask = params.vector_mask();
    if params.dimension < 32 && value > mask {
        return Err(Error::InvalidArgument(format!(
            "value {value} does not fit in {} bits",
            params.dimension
        )));
    }
    if params.state_size < 1 {
        return Err(Error::InvalidArgument("state size must be >= 1".into()));
    }
    let noise = params.noise_probability();
    let mut vectors = Vec::with_capacity(params.state_size);
    let mut bits = Vec::with_capacity(params.state_size);
    for _ in 0..params.state_size {
        let v = loop {
            let candidate = (rng.word() as u32) & mask;
            if candidate != 0 {
                break candidate;
            }
        };
        vectors.push(v);
        bits.push(parity(v, value) ^ rng.bernoulli(noise));
    }
    Ok(RnipState { vectors, bits })
}

/// Replays one stored execution chosen uniformly; never re-noised.
pub fn report(state: &RnipState, rng: &mut SeededRng) -> RnipReport {
    let j = rng.index(state.vectors.len());
    RnipReport {
        vector: state.vectors[j],
        bit: state.bits[j],
    }
}

/// Dense per-value frequency estimates; index = value.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyVector {
    pub estimates: Vec<f64>,
}

impl FrequencyVector {
    /// `max_u |estimate(u) - truth(u)|` against explicit true frequencies.
    pub fn linf_error(&self, truth: &[f64]) -> f64 {
        self.estimates
            .iter()
            .zip(truth)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Euclidean projection onto the probability simplex; presentation
    /// only, the raw estimator is what the accuracy analysis covers.
    pub fn project_to_simplex(&self) -> Vec<f64> {
        let mut sorted = self.estimates.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let mut cumulative = 0.0;
        let mut threshold = 0.0;
        for (j, &value) in sorted.iter().enumerate() {
            cumulative += value;
            let candidate = (cumulative - 1.0) / (j as f64 + 1.0);
            if value - candidate > 0.0 {
                threshold = candidate;
            }
        }
        self.estimates
            .iter()
            .map(|&v| (v - threshold).max(0.0))
            .collect()
    }
}

/// Runs the frequency oracle over one report per user.
pub fn estimate_frequencies(
    reports: &[RnipReport],
    params: &RnipParams,
) -> Result<FrequencyVector> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to aggregate".into()));
    }
    if params.dimension > MAX_DENSE_DIMENSION {
        return Err(Error::BudgetExceeded {
            required: 1u64 << params.dimension,
            budget: 1u64 << MAX_DENSE_DIMENSION,
        });
    }
    let mask = params.vector_mask();
    if let Some(bad) = reports
        .iter()
        .position(|r| r.vector == 0 || (r.vector & !mask) != 0)
    {
        return Err(Error::InvalidArgument(format!(
            "report {bad} carries an invalid query vector"
        )));
    }

    let n = reports.len() as f64;
    let domain = 1usize << params.dimension;
    let e = params.eps_prime.exp();
    let scale = ((domain as f64 - 1.0) / (domain as f64 * n)) * ((e + 1.0) / (e - 1.0));
    let offset = 1.0 / domain as f64;

    let estimates = parallel::map_indexed(domain, |u| {
        let mut signed_sum = 0i64;
        for r in reports {
            let disagree = parity(r.vector, u as u32) ^ r.bit;
            signed_sum += if disagree { -1 } else { 1 };
        }
        scale * signed_sum as f64 + offset
    });
    Ok(FrequencyVector { estimates })
}

/// Deviation bounds on the dense estimate holding with probability
/// `1 - beta` over `n` one-report users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBounds {
    /// `((2^d-1)/2^{d-1}) ((e^{eps'}+1)/(e^{eps'}-1)) sqrt(2 ln(2^{d+1}/beta)/n)`.
    pub exact: f64,
    /// The looser closed form `((eps'+2)/eps') sqrt(8 ln(2^{d+1}/beta)/n)`.
    pub simplified: f64,
}

/// `ln(2^{d+1}/beta)` without forming the power.
fn log_union_term(dimension: usize, beta: f64) -> f64 {
    (dimension as f64 + 1.0) * 2f64.ln() - beta.ln()
}

pub fn accuracy_bound(params: &RnipParams, n: u64, beta: Probability) -> Result<AccuracyBounds> {
    let b = beta.value();
    if n < 1 {
        return Err(Error::InvalidArgument("need n >= 1 users".into()));
    }
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in (0, 1), got {b}"
        )));
    }
    let log_term = log_union_term(params.dimension, b);
    let domain = 2f64.powi(params.dimension as i32);
    let e = params.eps_prime.exp();
    let exact = ((domain - 1.0) / (domain / 2.0))
        * ((e + 1.0) / (e - 1.0))
        * (2.0 * log_term / n as f64).sqrt();
    let simplified =
        ((params.eps_prime + 2.0) / params.eps_prime) * (8.0 * log_term / n as f64).sqrt();
    Ok(AccuracyBounds { exact, simplified })
}

/// The collision ("two reports replay the same vector") accounting behind
/// the (0, delta) untrackability guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UntrackableDelta {
    /// `k^2 / L + L^2 / 2^d`, clamped to 1.
    pub total: f64,
    /// Same-user pair bound `C(k,2) / L`.
    pub within_user: f64,
    /// Cross-user vector collision bound `L^2 / 2^d`.
    pub cross_user: f64,
}

pub fn untrackable_delta(k: u64, state_size: u64, dimension: u32) -> UntrackableDelta {
    assert!(k >= 1 && state_size >= 1 && dimension >= 1);
    let l = state_size as f64;
    let cross = l * l / 2f64.powi(dimension as i32);
    let total = (k * k) as f64 / l + cross;
    UntrackableDelta {
        total: total.min(1.0),
        within_user: (k * (k - 1)) as f64 / 2.0 / l,
        cross_user: cross,
    }
}

/// Outcome of accuracy-driven parameter selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RnipSelection {
    pub params: RnipParams,
    /// `2 sqrt(2 ln(2^{d+1}/beta)/n)`: smallest meaningful accuracy target.
    pub noise_floor: f64,
    /// The exact per-report level the accuracy bound demands,
    /// `2 sqrt(2 ln(2^{d+1}/beta)) / (alpha sqrt(n) - sqrt(2 ln(2^{d+1}/beta)))`.
    pub exact_min_eps_prime: f64,
    /// Whether the simplified choice meets the exact requirement.
    pub meets_exact_floor: bool,
}

/// Chooses `eps' = (4/alpha) sqrt(2 ln(2^{d+1}/beta)/n)` for the accuracy
/// target and the largest state size keeping everlasting privacy at
/// `(eps, delta)`: `L = floor(eps^2 / (8 eps'^2 ln(1/delta)))`.
pub fn select_parameters(
    eps: f64,
    delta: Probability,
    alpha: f64,
    beta: Probability,
    n: u64,
    dimension: usize,
) -> Result<RnipSelection> {
    let d = delta.value();
    let b = beta.value();
    if !(d > 0.0 && d < 1.0) || !(b > 0.0 && b < 1.0) {
        return Err(Error::InvalidArgument(
            "delta and beta must lie in (0, 1)".into(),
        ));
    }
    if !eps.is_finite() || eps <= 0.0 || !alpha.is_finite() || alpha <= 0.0 || n < 1 {
        return Err(Error::InvalidArgument(
            "eps, alpha and n must be positive".into(),
        ));
    }
    if !(1..=32).contains(&dimension) {
        return Err(Error::InvalidArgument(format!(
            "dimension must lie in 1..=32, got {dimension}"
        )));
    }
    let log_term = log_union_term(dimension, b);
    let noise_floor = 2.0 * (2.0 * log_term / n as f64).sqrt();
    if alpha <= noise_floor {
        return Err(Error::Infeasible(format!(
            "accuracy target {alpha} at or below the noise floor {noise_floor}"
        )));
    }
    let eps_prime = (4.0 / alpha) * (2.0 * log_term / n as f64).sqrt();
    let state_size = (eps * eps / (8.0 * eps_prime * eps_prime * (1.0 / d).ln())).floor();
    if state_size < 1.0 {
        return Err(Error::Infeasible(
            "state size rounds to zero; loosen accuracy or privacy targets".into(),
        ));
    }
    let exact_min_eps_prime =
        2.0 * (2.0 * log_term).sqrt() / (alpha * (n as f64).sqrt() - (2.0 * log_term).sqrt());
    Ok(RnipSelection {
        params: RnipParams {
            dimension,
            state_size: state_size as usize,
            eps,
            delta,
            eps_prime,
        },
        noise_floor,
        exact_min_eps_prime,
        meets_exact_floor: eps_prime >= exact_min_eps_prime,
    })
}

/// Monte-Carlo collision rates for the event behind [`untrackable_delta`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionRates {
    /// All k reports from one user.
    pub one_user: f64,
    /// ceil(k/2) reports from one user, floor(k/2) from another with the
    /// same value.
    pub two_users: f64,
}

/// Estimates, over `trials` seeded trials, how often two of the k reported
/// vectors coincide in each regime.
pub fn empirical_collision_rate(
    params: &RnipParams,
    k: usize,
    trials: usize,
    rng: &SeededRng,
) -> Result<CollisionRates> {
    if trials < 1 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("need k >= 1 reports".into()));
    }
    let outcomes: Vec<(bool, bool)> = parallel::map_indexed(trials, |t| {
        let mut trial_rng = rng.substream(t as u64);
        let value = 0u32;

        let state = init_state(value, params, &mut trial_rng).expect("valid params");
        let vectors: Vec<u32> = (0..k)
            .map(|_| report(&state, &mut trial_rng).vector)
            .collect();
        let solo = has_duplicate(vectors);

        let first = init_state(value, params, &mut trial_rng).expect("valid params");
        let second = init_state(value, params, &mut trial_rng).expect("valid params");
        let split = k.div_ceil(2);
        let vectors: Vec<u32> = (0..k)
            .map(|i| {
                let state = if i < split { &first } else { &second };
                report(state, &mut trial_rng).vector
            })
            .collect();
        let pair = has_duplicate(vectors);
        (solo, pair)
    });
    let solo = outcomes.iter().filter(|o| o.0).count();
    let pair = outcomes.iter().filter(|o| o.1).count();
    Ok(CollisionRates {
        one_user: solo as f64 / trials as f64,
        two_users: pair as f64 / trials as f64,
    })
}

fn has_duplicate(mut vectors: Vec<u32>) -> bool {
    vectors.sort_unstable();
    vectors.windows(2).any(|w| w[0] == w[1])
}

/// One collection round over an explicit population: `counts` lists
/// (value, user count) pairs; every user initializes a state and sends one
/// report. User i draws from child stream i of `rng`.
pub fn simulate_frequency_round(
    params: &RnipParams,
    counts: &[(u32, usize)],
    rng: &SeededRng,
) -> Result<FrequencyVector> {
    let n: usize = counts.iter().map(|(_, c)| c).sum();
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one user".into()));
    }
    let mut values = Vec::with_capacity(n);
    for &(value, count) in counts {
        values.extend(std::iter::repeat_n(value, count));
    }
    let reports: Vec<RnipReport> = parallel::map_indexed(n, |i| {
        let mut user_rng = rng.substream(i as u64);
        let state = init_state(values[i], params, &mut user_rng).expect("validated value");
        report(&state, &mut user_rng)
    });
    estimate_frequencies(&reports, params)
}

/// True frequency vector of an explicit population.
pub fn true_frequencies(counts: &[(u32, usize)], dimension: usize) -> Vec<f64> {
    let n: usize = counts.iter().map(|(_, c)| c).sum();
    let mut truth = vec![0.0; 1 << dimension];
    for &(value, count) in counts {
        truth[value as usize] += count as f64 / n as f64;
    }
    truth
}
