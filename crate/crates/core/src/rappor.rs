//! The RAPPOR report pipeline and its trackability analyses.
//!
//! A value is Bloom-encoded into `s` bits by `h` seeded hash positions. The
//! filter is randomized once per client ("permanent randomization": each
//! bit is forced to 1 with probability f/2, to 0 with probability f/2, and
//! kept otherwise) and every report re-randomizes that copy: bit j reports
//! 1 with probability q when the permanent bit is 1 and p when it is 0.
//!
//! Because positions are independent and every report bit depends only on
//! the underlying filter bit, the likelihood that a set of k reports came
//! from one client versus a split between two clients factorizes per
//! position. With `x` ones at a position among the first user's `i`
//! reports and `y` among the other `k-i`, the position's contribution is
//!
//! ```text
//! C_b(i, x, y) = P_b(i, x) * P_b(k-i, y) / P_b(k, x+y)
//! P_b(a, c)    = Pr[B'=1|B=b] q^c (1-q)^{a-c} + Pr[B'=0|B=b] p^c (1-p)^{a-c}
//! ```
//!
//! where `Pr[B'=1|B=1] = 1-f/2` and `Pr[B'=1|B=0] = f/2`. The worst-case
//! enumeration maximizes the product over per-class counts; the Monte-Carlo
//! percentile estimator samples the trackability random variable instead.

use crate::error::{Error, Result};
use crate::mech::SplitIndex;
use crate::parallel;
use crate::percentile::{percentile_with_ci, PercentileEstimate};
use crate::prob::{ln_add_exp, ln_pow, Probability};
use crate::rng::SeededRng;

/// Configuration of the report pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RapporParams {
    /// Bloom filter length `s`.
    pub bits: usize,
    /// Number of hash positions `h`.
    pub hashes: usize,
    /// Permanent randomization probability `f`.
    pub f: Probability,
    /// Report-1 probability for a permanent 0 bit.
    pub p: Probability,
    /// Report-1 probability for a permanent 1 bit.
    pub q: Probability,
    /// Seed of the deterministic hash family.
    pub hash_seed: u64,
}

impl RapporParams {
    pub fn new(
        bits: usize,
        hashes: usize,
        f: Probability,
        p: Probability,
        q: Probability,
        hash_seed: u64,
    ) -> Result<Self> {
        if hashes < 1 || hashes > bits {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= hashes <= bits, got hashes={hashes} bits={bits}"
            )));
        }
        Ok(RapporParams {
            bits,
            hashes,
            f,
            p,
            q,
            hash_seed,
        })
    }

    /// The deployed configuration analyzed throughout: s=128, h=2, f=0.5,
    /// p=0.5, q=0.75.
    pub fn chrome_deployment(hash_seed: u64) -> Self {
        RapporParams {
            bits: 128,
            hashes: 2,
            f: Probability::HALF,
            p: Probability::HALF,
            q: Probability::clamped(0.75),
            hash_seed,
        }
    }

    /// `Pr[B' = 1 | B = b]`.
    fn keep_one(&self, b: bool) -> f64 {
        let f = self.f.value();
        if b {
            1.0 - 0.5 * f
        } else {
            0.5 * f
        }
    }

    /// Marginal report rate `Pr[S_j = 1 | B_j = b]`: mixes q and p through
    /// the permanent layer.
    pub fn marginal_one_rate(&self, b: bool) -> Probability {
        let w = self.keep_one(b);
        Probability::clamped(w * self.q.value() + (1.0 - w) * self.p.value())
    }
}

/// Deterministic seeded byte hash (FNV-1a core with seed mixing).
fn position_hash(seed: u64, index: u64, value: &[u8]) -> u64 {
    let mut state = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    state = state.wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    for &byte in value {
        state ^= u64::from(byte);
        state = state.wrapping_mul(0x0000_0100_0000_01b3);
    }
    state ^= state >> 33;
    state = state.wrapping_mul(0xff51_afd7_ed55_8ccd);
    state ^ (state >> 33)
}

/// Bloom-encodes a value: `hashes` seeded positions set to 1 (fewer when
/// they collide). Deterministic in `(value, hash_seed)`.
pub fn encode_bloom(value: &[u8], params: &RapporParams) -> Vec<bool> {
    let mut filter = vec![false; params.bits];
    for i in 0..params.hashes {
        let pos = position_hash(params.hash_seed, i as u64, value) % params.bits as u64;
        filter[pos as usize] = true;
    }
    filter
}

/// The once-per-client randomization: each bit becomes 1 with probability
/// f/2, 0 with probability f/2, and keeps the filter bit otherwise.
pub fn permanent_randomize(
    filter: &[bool],
    params: &RapporParams,
    rng: &mut SeededRng,
) -> Vec<bool> {
    let f = params.f.value();
    filter
        .iter()
        .map(|&b| {
            let u = rng.uniform();
            if u < 0.5 * f {
                true
            } else if u < f {
                false
            } else {
                b
            }
        })
        .collect()
}

/// One instantaneous report from the permanent randomization.
pub fn rappor_report(permanent: &[bool], params: &RapporParams, rng: &mut SeededRng) -> Vec<bool> {
    permanent
        .iter()
        .map(|&b| rng.bernoulli(if b { params.q } else { params.p }))
        .collect()
}

/// A set of k reports from the same underlying Bloom filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RapporReportSet {
    reports: Vec<Vec<bool>>,
    bloom: Vec<bool>,
}

impl RapporReportSet {
    pub fn new(reports: Vec<Vec<bool>>, bloom: Vec<bool>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::InvalidArgument("report set is empty".into()));
        }
        if reports.iter().any(|r| r.len() != bloom.len()) {
            return Err(Error::InvalidArgument(
                "report width differs from the filter length".into(),
            ));
        }
        Ok(RapporReportSet { reports, bloom })
    }

    pub fn reports(&self) -> &[Vec<bool>] {
        &self.reports
    }

    pub fn bloom(&self) -> &[bool] {
        &self.bloom
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

/// `ln P_b(a, c)`: log probability of `c` ones in `a` reports at a position
/// whose underlying bit is `b`, mixing the two permanent outcomes.
fn ln_count_probability(params: &RapporParams, b: bool, a: usize, c: usize) -> f64 {
    let w = params.keep_one(b);
    let (p, q) = (params.p.value(), params.q.value());
    let via_one = if w == 0.0 {
        f64::NEG_INFINITY
    } else {
        w.ln() + ln_pow(q, c as f64) + ln_pow(1.0 - q, (a - c) as f64)
    };
    let via_zero = if w == 1.0 {
        f64::NEG_INFINITY
    } else {
        (1.0 - w).ln() + ln_pow(p, c as f64) + ln_pow(1.0 - p, (a - c) as f64)
    };
    ln_add_exp(via_one, via_zero)
}

/// `ln C_b(i, x, y)`: one position's signed log contribution to the
/// one-user versus two-user likelihood ratio.
fn ln_position_ratio(
    params: &RapporParams,
    b: bool,
    i: usize,
    x: usize,
    y: usize,
    k: usize,
) -> f64 {
    ln_count_probability(params, b, i, x) + ln_count_probability(params, b, k - i, y)
        - ln_count_probability(params, b, k, x + y)
}

/// The position ratio `C_b(i, x, y)` itself (not logged or folded into an
/// absolute value).
pub fn position_trackability(
    b: bool,
    i: usize,
    x: usize,
    y: usize,
    k: usize,
    params: &RapporParams,
) -> Result<f64> {
    if i > k || x > i || y > k - i {
        return Err(Error::InvalidArgument(format!(
            "counts out of range: i={i} x={x} y={y} k={k}"
        )));
    }
    Ok(ln_position_ratio(params, b, i, x, y, k).exp())
}

/// Trackability of a report set under a split: the absolute summed log of
/// the per-position ratios.
pub fn report_set_trackability(
    set: &RapporReportSet,
    split: &SplitIndex,
    params: &RapporParams,
) -> Result<f64> {
    let k = set.len();
    if split.k() != k {
        return Err(Error::InvalidArgument(format!(
            "split is over {} reports, set has {k}",
            split.k()
        )));
    }
    if set.bloom().len() != params.bits {
        return Err(Error::InvalidArgument(format!(
            "filter length {} differs from configured bits {}",
            set.bloom().len(),
            params.bits
        )));
    }
    let i = split.members().len();
    let mut acc = 0.0;
    for (pos, &b) in set.bloom().iter().enumerate() {
        let mut x = 0usize;
        let mut y = 0usize;
        for (idx, report) in set.reports().iter().enumerate() {
            if report[pos] {
                if split.contains(idx) {
                    x += 1;
                } else {
                    y += 1;
                }
            }
        }
        acc += ln_position_ratio(params, b, i, x, y, k);
    }
    Ok(acc.abs())
}

/// Worst-case trackability over all report sets and splits, assuming the
/// filter has exactly `min(hashes, bits)` set positions.
pub fn worst_case_gamma(params: &RapporParams, k: usize) -> f64 {
    worst_case_gamma_with_set_bits(params, k, params.hashes.min(params.bits))
}

/// Worst-case trackability with an explicit count of set filter positions
/// (hash collisions reduce it below `hashes`).
///
/// Positions are independent and positions of one class are exchangeable,
/// so the worst report set gives every class its own extremal count pair;
/// the enumeration is O(k^3) over the split size and the two counts.
pub fn worst_case_gamma_with_set_bits(params: &RapporParams, k: usize, set_bits: usize) -> f64 {
    assert!(set_bits <= params.bits, "set bits exceed the filter length");
    let zero_positions = (params.bits - set_bits) as f64;
    let one_positions = set_bits as f64;

    let mut best_positive = 0.0f64;
    let mut best_negative = 0.0f64;
    for i in 1..=k {
        let mut extremes = [(0.0f64, 0.0f64); 2]; // (max, min) per class
        for (class, slot) in extremes.iter_mut().enumerate() {
            let b = class == 1;
            let mut max_ln = f64::NEG_INFINITY;
            let mut min_ln = f64::INFINITY;
            for x in 0..=i {
                for y in 0..=(k - i) {
                    let v = ln_position_ratio(params, b, i, x, y, k);
                    max_ln = max_ln.max(v);
                    min_ln = min_ln.min(v);
                }
            }
            *slot = (max_ln, min_ln);
        }
        best_positive =
            best_positive.max(zero_positions * extremes[0].0 + one_positions * extremes[1].0);
        best_negative =
            best_negative.min(zero_positions * extremes[0].1 + one_positions * extremes[1].1);
    }
    best_positive.abs().max(best_negative.abs())
}

/// The loose per-position composition bound
/// `bits * floor(k/2) * max(|ln(p/q)|, |ln((1-p)/(1-q))|)`; infinite when
/// p or q is degenerate (and they differ).
pub fn composition_gamma(params: &RapporParams, k: usize) -> f64 {
    let (p, q) = (params.p.value(), params.q.value());
    let term = |a: f64, b: f64| -> f64 {
        if a == b {
            0.0
        } else if a == 0.0 || b == 0.0 {
            f64::INFINITY
        } else {
            (a / b).ln().abs()
        }
    };
    let per_bit = term(p, q).max(term(1.0 - p, 1.0 - q));
    params.bits as f64 * (k / 2) as f64 * per_bit
}

/// Samples the trackability random variable `nsamps` times.
///
/// Each sample runs, for every prefix length i up to floor(k/2), one
/// two-user report set (two independent permanent randomizations of the
/// same filter, i and k-i reports) and one one-user set (a single
/// randomization, all k reports), evaluates the signed split-versus-joint
/// log likelihood ratio of each, and keeps the largest value, floored at
/// zero.
///
/// The underlying filter is assumed to have exactly `min(hashes, bits)`
/// distinct set positions; hash collisions over random values are rare
/// (one in `bits` per pair) and excluded from the sampled model. Sample m
/// draws from child stream m, so the run is reproducible at any
/// parallelism level.
pub fn sample_trackability(
    params: &RapporParams,
    k: usize,
    nsamps: usize,
    rng: &SeededRng,
) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidArgument("need k >= 2 reports".into()));
    }
    if nsamps < 1 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    Ok(parallel::map_indexed(nsamps, |m| {
        one_trackability_sample(params, k, &mut rng.substream(m as u64))
    }))
}

fn one_trackability_sample(params: &RapporParams, k: usize, rng: &mut SeededRng) -> f64 {
    let set_bits = params.hashes.min(params.bits);
    let mut tau = f64::NEG_INFINITY;

    // Reports generated by two users holding the same value.
    for i in 1..=k / 2 {
        let mut acc = 0.0;
        for pos in 0..params.bits {
            let b = pos < set_bits;
            let x = position_count(params, b, i, rng);
            let y = position_count(params, b, k - i, rng);
            acc += ln_position_ratio(params, b, i, x, y, k);
        }
        tau = tau.max(acc);
    }
    // Reports generated by one user, split at the same prefix lengths.
    for i in 1..=k / 2 {
        let mut acc = 0.0;
        for pos in 0..params.bits {
            let b = pos < set_bits;
            let w = Probability::clamped(params.keep_one(b));
            let rate = if rng.bernoulli(w) { params.q } else { params.p };
            let x = (0..i).filter(|_| rng.bernoulli(rate)).count();
            let y = (0..k - i).filter(|_| rng.bernoulli(rate)).count();
            acc += ln_position_ratio(params, b, i, x, y, k);
        }
        tau = tau.max(acc);
    }
    tau.max(0.0)
}

/// One user's permanent bit and report-one count at a single position.
fn position_count(params: &RapporParams, b: bool, reports: usize, rng: &mut SeededRng) -> usize {
    let w = Probability::clamped(params.keep_one(b));
    let rate = if rng.bernoulli(w) { params.q } else { params.p };
    (0..reports).filter(|_| rng.bernoulli(rate)).count()
}

/// Median and 90th-percentile estimates of the trackability random
/// variable with 95% order-statistic confidence intervals.
pub fn estimate_trackability_percentiles(
    params: &RapporParams,
    k: usize,
    nsamps: usize,
    rng: &SeededRng,
) -> Result<(PercentileEstimate, PercentileEstimate)> {
    if nsamps < 1000 {
        return Err(Error::InvalidArgument(
            "percentile estimation needs nsamps >= 1000".into(),
        ));
    }
    let samples = sample_trackability(params, k, nsamps, rng)?;
    let confidence = Probability::clamped(0.95);
    let median = percentile_with_ci(&samples, 50.0, confidence)?;
    let p90 = percentile_with_ci(&samples, 90.0, confidence)?;
    Ok((median, p90))
}
