//! Acceptance suite: one test per shipped criterion, each printing a
//! `[PASS]`/`[FAIL]` line. Tolerances are pinned in the assertions.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion lines.

use std::process::Command;
use std::time::Instant;

use untrack_core::bitwise::{self, BitwiseParams};
use untrack_core::bounds::{
    advanced_chain, chain_tightness_search, dp_advanced_composition, undetectable_bound,
    BinaryChainInstance, PrivacyBound, TrackabilityBound,
};
use untrack_core::mech::{exact_everlasting_epsilon, exact_untrackable_gamma, OracleBudget};
use untrack_core::prob::{binomial_cdf, chernoff_radius, Probability};
use untrack_core::rappor::{self, RapporParams};
use untrack_core::rng::SeededRng;
use untrack_core::rnip::{self, RnipParams};

fn pr(v: f64) -> Probability {
    Probability::new(v).unwrap()
}

const WORST_CASE_SERIES: [(usize, f64); 14] = [
    (2, 7.714008349934885),
    (3, 13.810059121593174),
    (4, 23.160702698499367),
    (5, 38.32143182990363),
    (6, 55.01599092734287),
    (7, 72.14651052510693),
    (8, 94.90089464514297),
    (9, 119.36532468090775),
    (10, 142.67375011125492),
    (11, 170.17748308615091),
    (12, 199.4380884218118),
    (13, 225.9396144617209),
    (14, 257.327381941984),
    (15, 288.6453266158751),
];

/// Criterion 1: the worst-case CLI regenerates the published trackability
/// series at the deployed parameters, within 1e-6 relative, within 60 s.
#[test]
fn criterion_01_worst_case_regression() {
    let started = Instant::now();
    let output = Command::new(env!("CARGO_BIN_EXE_untrack"))
        .args([
            "rappor",
            "worst-case",
            "--s",
            "128",
            "--h",
            "2",
            "--f",
            "0.5",
            "--p",
            "0.5",
            "--q",
            "0.75",
            "--k-max",
            "15",
            "--format",
            "csv",
            "--seed",
            "0",
        ])
        .output()
        .expect("binary runs");
    assert!(output.status.success(), "worst-case command failed");
    let stdout = String::from_utf8(output.stdout).unwrap();

    let mut seen = 0usize;
    for line in stdout.lines() {
        if line.starts_with('#') || line.starts_with("k,") {
            continue;
        }
        let (k, gamma) = line.split_once(',').expect("k,gamma row");
        let k: usize = k.parse().unwrap();
        let gamma: f64 = gamma.parse().unwrap();
        let (_, expected) = WORST_CASE_SERIES[k - 2];
        let rel = (gamma - expected).abs() / expected;
        assert!(rel <= 1e-6, "k={k}: {gamma} vs {expected} (rel {rel:.2e})");
        seen += 1;
    }
    assert_eq!(seen, 14, "expected all 14 series points");
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!("[PASS] criterion 1: all 14 worst-case points within 1e-6 in {elapsed:?}");
}

/// Criterion 2: the binomial CDF reproduces both order-statistic coverage
/// constants to 1e-9.
#[test]
fn criterion_02_binomial_constants() {
    let median = binomial_cdf(5099, 10000, pr(0.5)).unwrap().value()
        - binomial_cdf(4899, 10000, pr(0.5)).unwrap().value();
    assert!((median - 0.95449433663).abs() <= 1e-9, "median: {median}");
    let p90 = binomial_cdf(9059, 10000, pr(0.9)).unwrap().value()
        - binomial_cdf(8939, 10000, pr(0.9)).unwrap().value();
    assert!((p90 - 0.9545103468).abs() <= 1e-9, "p90: {p90}");
    println!("[PASS] criterion 2: coverage constants {median:.11} and {p90:.10}");
}

/// Published Monte-Carlo percentile points (point, +err, -err) from the
/// trackability figure at the deployed parameters.
const PERCENTILE_POINTS: [(usize, [f64; 3], [f64; 3]); 4] = [
    (
        2,
        [
            0.3193007504358434,
            0.010745153817822484,
            0.01231062248211856,
        ],
        [
            0.9215732409547286,
            0.02056780112150136,
            0.018478454618929163,
        ],
    ),
    (
        7,
        [2.6563933536170907, 0.03484729391232122, 0.03821818315088876],
        [4.477354167400904, 0.048495005234940436, 0.054423526335313],
    ),
    (
        10,
        [
            5.340969664565364,
            0.039087858465450154,
            0.045457911429366504,
        ],
        [7.776868122958263, 0.07342991566542878, 0.08185247143353536],
    ),
    (
        15,
        [
            10.102327281472753,
            0.06510795177882756,
            0.058399091029286865,
        ],
        [13.751703040255734, 0.10876613815503333, 0.1120456598587225],
    ),
];

/// Criterion 3: at the deployed parameters with 10000 samples, the 95%
/// confidence intervals for the median and 90th percentile overlap the
/// published intervals for at least 2 of 3 seeds per point.
///
/// The sampled model assumes the encoded value occupies exactly two
/// distinct filter positions (the overwhelmingly common case; the
/// published runs' collision handling is not stated).
#[test]
fn criterion_03_percentile_agreement() {
    let params = RapporParams::chrome_deployment(0);
    let seeds = [101u64, 202, 303];
    for &(k, med, p90) in &PERCENTILE_POINTS {
        let mut med_hits = 0;
        let mut p90_hits = 0;
        for &seed in &seeds {
            let rng = SeededRng::new(seed);
            let (median, ninety) =
                rappor::estimate_trackability_percentiles(&params, k, 10_000, &rng).unwrap();
            let overlaps = |est: &untrack_core::PercentileEstimate, point: [f64; 3]| {
                let (lo, hi) = (point[0] - point[2], point[0] + point[1]);
                est.ci_low <= hi && lo <= est.ci_high
            };
            med_hits += usize::from(overlaps(&median, med));
            p90_hits += usize::from(overlaps(&ninety, p90));
        }
        assert!(
            med_hits >= 2,
            "k={k}: median CI overlapped only {med_hits}/3 seeds"
        );
        assert!(
            p90_hits >= 2,
            "k={k}: p90 CI overlapped only {p90_hits}/3 seeds"
        );
        println!(
            "[PASS] criterion 3 (k={k}): median {med_hits}/3, 90th percentile {p90_hits}/3 overlaps"
        );
    }
}

/// Criterion 4: the tightness search achieves the closed-form chained
/// level at the analytic witness (1e-12) over 20 parameter pairs, and no
/// random binary-intermediate instance exceeds it by more than 1e-9.
#[test]
fn criterion_04_chaining_tightness() {
    let mut pairs = Vec::new();
    for i in 0..5 {
        for j in 0..4 {
            pairs.push((0.15 + 0.6 * i as f64, 0.3 + 0.6 * j as f64));
        }
    }
    assert_eq!(pairs.len(), 20);
    for &(e1, e2) in &pairs {
        let result = chain_tightness_search(e1, e2, 24).unwrap();
        assert!(
            (result.achieved - result.bound).abs() <= 1e-12,
            "({e1},{e2}): achieved {} vs bound {}",
            result.achieved,
            result.bound
        );
    }

    // Random feasible instances never exceed the bound.
    let mut rng = SeededRng::new(44);
    let mut worst_slack = f64::NEG_INFINITY;
    let feasible = |rng: &mut SeededRng, e: f64| {
        let scale = e.exp();
        let p = rng.uniform().clamp(1e-9, 1.0 - 1e-9);
        let lo = (p / scale).max(1.0 - scale * (1.0 - p));
        let hi = (p * scale).min(1.0 - (1.0 - p) / scale);
        let q = lo + (hi - lo) * rng.uniform();
        (p, q)
    };
    for _ in 0..100_000 {
        let e1 = 3.0 * rng.uniform().max(1e-6);
        let e2 = 3.0 * rng.uniform().max(1e-6);
        let (p_v, q_v) = feasible(&mut rng, e1);
        let (g_v, g_w) = feasible(&mut rng, e2);
        let instance = BinaryChainInstance { p_v, q_v, g_v, g_w };
        debug_assert!(instance.is_ldp(e1, e2, 1e-9));
        let slack = instance.max_log_ratio() - advanced_chain(e1, e2);
        worst_slack = worst_slack.max(slack);
    }
    assert!(worst_slack <= 1e-9, "worst slack {worst_slack}");
    println!(
        "[PASS] criterion 4: 20 witnesses exact; worst sampled slack {worst_slack:.2e} over 100000 instances"
    );
}

/// Criterion 5: exact-oracle sandwich for the bitwise mechanism, k <= 8,
/// (eps1, eps2) in {0.1, 0.5, 1}^2, within 10 s:
/// gamma_exact in [max(0, (k/2) eps2 - eps1 - ln 2), floor(k/2) eps2], and
/// everlasting_exact <= eps1.
///
/// The lower bracket is stated with the additive constant -ln 2; the
/// half-ones witness it is derived from only supports -ln 4, and exact
/// enumeration lands between the two at 14 of the 72 grid points, so this
/// criterion fails there. The module tests pin the supported -ln 4
/// bracket; this test keeps the criterion's own constant and reports every
/// violating grid point.
#[test]
fn criterion_05_exact_oracle_sandwich() {
    let started = Instant::now();
    let levels = [0.1f64, 0.5, 1.0];
    let budget = OracleBudget::default();
    let mut violations = Vec::new();
    for &eps1 in &levels {
        for &eps2 in &levels {
            let params = BitwiseParams::new(eps1, eps2).unwrap();
            let mech = bitwise::as_permanent_mechanism(&params);
            for k in 1..=8usize {
                let gamma = exact_untrackable_gamma(&mech, k, budget).unwrap();
                let upper = (k / 2) as f64 * eps2 + 1e-12;
                let lower = (k as f64 / 2.0 * eps2 - eps1 - 2f64.ln()).max(0.0);
                assert!(
                    gamma <= upper,
                    "upper bound breached at eps1={eps1} eps2={eps2} k={k}: {gamma}"
                );
                if gamma < lower - 1e-12 {
                    violations.push(format!(
                        "eps1={eps1} eps2={eps2} k={k}: gamma_exact={gamma:.6} < lower={lower:.6}"
                    ));
                }
            }
            let everlasting = exact_everlasting_epsilon(&mech, 8, budget).unwrap();
            assert!(
                everlasting <= eps1 + 1e-12,
                "everlasting {everlasting} exceeds {eps1}"
            );
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}");
    if violations.is_empty() {
        println!("[PASS] criterion 5: sandwich held at all 72 grid points in {elapsed:?}");
    } else {
        println!(
            "[FAIL] criterion 5: the -ln 2 lower bracket fails at {} of 72 grid points \
             (everlasting and upper parts hold; see the witness analysis note):",
            violations.len()
        );
        for v in &violations {
            println!("       {v}");
        }
    }
    assert!(
        violations.is_empty(),
        "lower bracket (k/2)*eps2 - eps1 - ln 2 exceeded the exact gamma at {} grid points",
        violations.len()
    );
}

/// Criterion 6: bitwise deviation coverage at n = 1e5, eps1 = eps2 = 1,
/// p0 in {0, 0.3, 0.5}, beta = 0.1 over 1000 seeded trials: at most a 0.1
/// violation fraction and a mean within 4 standard errors.
#[test]
fn criterion_06_bitwise_coverage() {
    let params = BitwiseParams::new(1.0, 1.0).unwrap();
    let n = 100_000usize;
    let trials = 1000u64;
    let bound = bitwise::accuracy_bound(&params, n as u64, pr(0.1))
        .unwrap()
        .exact;
    for (case, p0) in [0.0f64, 0.3, 0.5].into_iter().enumerate() {
        let zeros = (p0 * n as f64).round() as usize;
        let truth = zeros as f64 / n as f64;
        let root = SeededRng::stream(600 + case as u64, 0);
        let estimates: Vec<f64> = (0..trials)
            .map(|t| {
                bitwise::simulate_frequency_round(&params, zeros, n - zeros, &root.substream(t))
                    .unwrap()
                    .p0
            })
            .collect();
        let violations = estimates
            .iter()
            .filter(|e| (*e - truth).abs() > bound)
            .count();
        assert!(
            violations as f64 <= 0.1 * trials as f64,
            "p0={p0}: {violations} violations"
        );
        let mean = estimates.iter().sum::<f64>() / trials as f64;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (trials as f64 - 1.0);
        let stderr = (var / trials as f64).sqrt();
        assert!(
            (mean - truth).abs() <= 4.0 * stderr.max(1e-12),
            "p0={p0}: mean {mean} vs {truth} stderr {stderr}"
        );
        println!(
            "[PASS] criterion 6 (p0={p0}): {violations}/{trials} violations, mean off by {:.2} stderr",
            (mean - truth).abs() / stderr.max(1e-12)
        );
    }
}

/// Criterion 7: the dense estimator sums to 1 within 1e-9 on 100 random
/// report multisets (d <= 10), and full-outcome enumeration confirms
/// unbiasedness within 1e-10 for every d <= 4.
#[test]
fn criterion_07_rnip_normalization_and_unbiasedness() {
    let root = SeededRng::new(70);
    for trial in 0..100u64 {
        let mut rng = root.substream(trial);
        let dimension = 1 + rng.index(10);
        let params = RnipParams::new(dimension, 3, 1.0, pr(0.01)).unwrap();
        let mask = (1u32 << dimension) - 1;
        let n = 1 + rng.index(400);
        let reports: Vec<rnip::RnipReport> = (0..n)
            .map(|_| {
                let vector = loop {
                    let v = (rng.word() as u32) & mask;
                    if v != 0 {
                        break v;
                    }
                };
                rnip::RnipReport {
                    vector,
                    bit: rng.bernoulli(Probability::HALF),
                }
            })
            .collect();
        let est = rnip::estimate_frequencies(&reports, &params).unwrap();
        let total: f64 = est.estimates.iter().sum();
        assert!((total - 1.0).abs() <= 1e-9, "trial {trial}: sum {total}");
    }

    // Exact expectation by enumerating every (vector, noise flip) outcome.
    for dimension in 1..=4usize {
        let params = RnipParams::new(dimension, 2, 0.8, pr(0.05)).unwrap();
        let domain = 1usize << dimension;
        let noise = params.noise_probability().value();
        let e = params.eps_prime.exp();
        let scale = ((domain - 1) as f64 / domain as f64) * ((e + 1.0) / (e - 1.0));
        for value in 0..domain as u32 {
            for u in 0..domain as u32 {
                let mut expectation = 0.0;
                for v in 1..domain as u32 {
                    for flip in [false, true] {
                        let weight =
                            (1.0 / (domain - 1) as f64) * if flip { noise } else { 1.0 - noise };
                        let bit = ((v & value).count_ones() & 1 == 1) ^ flip;
                        let disagree = ((v & u).count_ones() & 1 == 1) ^ bit;
                        expectation += weight * if disagree { -1.0 } else { 1.0 };
                    }
                }
                let estimate = scale * expectation + 1.0 / domain as f64;
                let truth = if u == value { 1.0 } else { 0.0 };
                assert!(
                    (estimate - truth).abs() <= 1e-10,
                    "d={dimension} value={value} u={u}: {estimate}"
                );
            }
        }
    }
    println!("[PASS] criterion 7: 100 multisets normalized; enumeration unbiased for d <= 4");
}

/// Criterion 8: noisy-inner-product deviation coverage at d = 4,
/// n = 5e4, beta = 0.1, (eps, delta) = (1, 1e-4) over 500 trials (state
/// size 10): the sup-norm error exceeds the bound in at most 10% of them.
#[test]
fn criterion_08_rnip_coverage() {
    let params = RnipParams::new(4, 10, 1.0, pr(1e-4)).unwrap();
    let n = 50_000usize;
    let counts = [(3u32, 30_000usize), (9, 15_000), (0, 5_000)];
    let truth = rnip::true_frequencies(&counts, 4);
    let bound = rnip::accuracy_bound(&params, n as u64, pr(0.1))
        .unwrap()
        .exact;
    let trials = 500u64;
    let root = SeededRng::new(80);
    let violations = (0..trials)
        .filter(|&t| {
            let est = rnip::simulate_frequency_round(&params, &counts, &root.substream(t)).unwrap();
            est.linf_error(&truth) > bound
        })
        .count();
    assert!(
        violations as f64 <= 0.1 * trials as f64,
        "{violations} violations in {trials} trials"
    );
    println!("[PASS] criterion 8: {violations}/{trials} sup-norm violations (bound {bound:.4})");
}

/// Criterion 9: collision accounting. Empirical collision rates at
/// (k=3, L=100, d=20) over 1e5 trials stay within the stated delta plus a
/// Chernoff radius in both regimes, and exact enumeration at
/// (d=2, L=2, k=2) shows the two regimes identical conditioned on no
/// collision, within 1e-12.
#[test]
fn criterion_09_collision_accounting() {
    let params = RnipParams::new(20, 100, 1.0, pr(1e-4)).unwrap();
    let trials = 100_000usize;
    let rates = rnip::empirical_collision_rate(&params, 3, trials, &SeededRng::new(90)).unwrap();
    let delta = rnip::untrackable_delta(3, 100, 20).total;
    let radius = chernoff_radius(trials as u64, pr(0.01)).unwrap();
    assert!(
        rates.one_user <= delta + radius,
        "one-user rate {} vs {delta} + {radius}",
        rates.one_user
    );
    assert!(
        rates.two_users <= delta + radius,
        "two-user rate {} vs {delta} + {radius}",
        rates.two_users
    );

    let worst = conditional_equivalence_gap();
    assert!(
        worst <= 1e-12,
        "conditional distributions differ by {worst}"
    );
    println!(
        "[PASS] criterion 9: rates ({:.4}, {:.4}) <= {delta:.4} + {radius:.4}; conditional gap {worst:.2e}",
        rates.one_user, rates.two_users
    );
}

/// Exact enumeration at d = 2, L = 2, k = 2: the distribution of two
/// reports from one user equals that from two users with the same value,
/// conditioned on the reported vectors being distinct.
fn conditional_equivalence_gap() -> f64 {
    let params = RnipParams::new(2, 2, 1.0, pr(0.1)).unwrap();
    let noise = params.noise_probability().value();
    let value = 1u32;
    let vectors = [1u32, 2, 3];
    let flip_weight = |flip: bool| if flip { noise } else { 1.0 - noise };
    let parity = |v: u32, u: u32| (v & u).count_ones() & 1 == 1;

    // outcome key: (v1, b1, v2, b2) -> probability
    let mut one_user = std::collections::BTreeMap::new();
    let mut two_users = std::collections::BTreeMap::new();
    let states: Vec<([u32; 2], [bool; 2], f64)> = {
        let mut all = Vec::new();
        for &v1 in &vectors {
            for &v2 in &vectors {
                for x1 in [false, true] {
                    for x2 in [false, true] {
                        let weight = (1.0 / 9.0) * flip_weight(x1) * flip_weight(x2);
                        let bits = [parity(v1, value) ^ x1, parity(v2, value) ^ x2];
                        all.push(([v1, v2], bits, weight));
                    }
                }
            }
        }
        all
    };

    for (vs, bs, weight) in &states {
        for j1 in 0..2usize {
            for j2 in 0..2usize {
                let key = (vs[j1], bs[j1], vs[j2], bs[j2]);
                *one_user.entry(key).or_insert(0.0) += weight * 0.25;
            }
        }
    }
    for (vs_a, bs_a, weight_a) in &states {
        for (vs_b, bs_b, weight_b) in &states {
            for j1 in 0..2usize {
                for j2 in 0..2usize {
                    let key = (vs_a[j1], bs_a[j1], vs_b[j2], bs_b[j2]);
                    *two_users.entry(key).or_insert(0.0) += weight_a * weight_b * 0.25;
                }
            }
        }
    }

    let conditional = |dist: &std::collections::BTreeMap<(u32, bool, u32, bool), f64>| {
        let kept: f64 = dist
            .iter()
            .filter(|((v1, _, v2, _), _)| v1 != v2)
            .map(|(_, p)| p)
            .sum();
        dist.iter()
            .filter(|((v1, _, v2, _), _)| v1 != v2)
            .map(|(k, p)| (*k, p / kept))
            .collect::<std::collections::BTreeMap<_, _>>()
    };
    let solo = conditional(&one_user);
    let pair = conditional(&two_users);
    let mut worst: f64 = 0.0;
    for (key, p) in &solo {
        worst = worst.max((p - pair.get(key).copied().unwrap_or(0.0)).abs());
    }
    for (key, p) in &pair {
        worst = worst.max((p - solo.get(key).copied().unwrap_or(0.0)).abs());
    }
    worst
}

/// Criterion 10: bound-calculus spot values at 1e-9.
#[test]
fn criterion_10_spot_values() {
    let v = advanced_chain(1.0, 1.0);
    assert!((v - 0.4337808304830273).abs() <= 1e-9);

    let composed =
        dp_advanced_composition(PrivacyBound::pure(1.0).unwrap(), 1, pr((-1f64).exp())).unwrap();
    let expected = 2f64.sqrt() + 1f64.exp() - 1.0;
    assert!((composed.epsilon - expected).abs() <= 1e-9);

    let (undetect_gamma, delta_max) = undetectable_bound(
        TrackabilityBound::new(0.1, pr(0.01), 1).unwrap(),
        PrivacyBound::new(0.2, pr(0.02)).unwrap(),
    );
    assert!((undetect_gamma - 0.3).abs() <= 1e-9);
    assert!((delta_max.value() - 0.032214027581601704).abs() <= 1e-9);

    // The per-position composition route at the deployed configuration:
    // the exact coefficient is 128 ln 2 = 88.7228...; the widely quoted
    // "88 per floor(k/2)" figure rounds it down.
    let params = RapporParams::chrome_deployment(0);
    let route = rappor::composition_gamma(&params, 2);
    assert!((route - 128.0 * 2f64.ln()).abs() <= 1e-9);
    println!(
        "[PASS] criterion 10: chain {v:.9}; composition {:.6}; undetectable ({undetect_gamma:.1}, {:.9}); \
         per-position route {route:.6} (quoted elsewhere rounded to 88)",
        composed.epsilon,
        delta_max.value(),
    );
}
