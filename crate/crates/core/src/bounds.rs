//! Closed-form bound calculus for local privacy and untrackability.
//!
//! Chaining runs one local mechanism on the output of another; composition
//! runs several mechanisms side by side. Both keep their parameters in
//! closed form here:
//!
//! - chaining an ε₁-LDP stage into an ε₂-LDP stage is
//!   `ln((e^{ε1+ε2}+1)/(e^{ε1}+e^{ε2}))`-LDP (tight), upper-bounded by both
//!   `min(ε1, ε2)` and, for parameters below 2, by `ε1·ε2/2`;
//! - advanced composition turns k copies of an (ε, δ) mechanism into
//!   `(sqrt(2k·ln(1/δ'))·ε + k·ε·(e^ε−1), kδ + δ')`, and the same functional
//!   form composes (γ, δ) untrackability over m report streams;
//! - a permanent-state mechanism whose reports are ε-DP in the state is
//!   `floor(k/2)·ε`-untrackable for k reports, `(n−1)γ` covers n-user
//!   splits generically, and `ceil(log2 n)·floor(k/2)·ε` covers them for
//!   permanent-state mechanisms;
//! - an untrackability bound and an everlasting-privacy bound combine into
//!   an undetectability bound for a changed private value.

use crate::error::{Error, Result};
use crate::prob::{ln_add_exp, Probability};

/// An (ε, δ) differential-privacy style guarantee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBound {
    pub epsilon: f64,
    pub delta: Probability,
}

impl PrivacyBound {
    pub fn new(epsilon: f64, delta: Probability) -> Result<Self> {
        if epsilon.is_nan() || epsilon < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be nonnegative, got {epsilon}"
            )));
        }
        Ok(PrivacyBound { epsilon, delta })
    }

    pub fn pure(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, Probability::ZERO)
    }
}

/// A (γ, δ) untrackability guarantee for `k` reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackabilityBound {
    pub gamma: f64,
    pub delta: Probability,
    pub reports: usize,
}

impl TrackabilityBound {
    pub fn new(gamma: f64, delta: Probability, reports: usize) -> Result<Self> {
        if gamma.is_nan() || gamma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gamma must be nonnegative, got {gamma}"
            )));
        }
        if reports < 1 {
            return Err(Error::InvalidArgument("report count must be >= 1".into()));
        }
        Ok(TrackabilityBound {
            gamma,
            delta,
            reports,
        })
    }
}

/// Chained LDP level from post-processing alone: `min(e1, e2)`.
pub fn basic_chain(e1: f64, e2: f64) -> f64 {
    assert!(e1 >= 0.0 && e2 >= 0.0, "epsilons must be nonnegative");
    e1.min(e2)
}

/// Tight chained LDP level: `ln((e^{e1+e2}+1)/(e^{e1}+e^{e2}))`.
pub fn advanced_chain(e1: f64, e2: f64) -> f64 {
    assert!(e1 >= 0.0 && e2 >= 0.0, "epsilons must be nonnegative");
    // ln(e^{e1+e2} + 1) - ln(e^{e1} + e^{e2}), stable for large epsilons.
    (ln_add_exp(e1 + e2, 0.0) - ln_add_exp(e1, e2)).max(0.0)
}

/// Small-parameter chained bound `e1*e2/2`; only meaningful below 2, where
/// it upper-bounds [`advanced_chain`].
pub fn corollary_chain(e1: f64, e2: f64) -> f64 {
    assert!(e1 >= 0.0 && e2 >= 0.0, "epsilons must be nonnegative");
    0.5 * e1 * e2
}

/// Left fold of [`advanced_chain`] over a pipeline of LDP levels. The fold
/// order is immaterial: the two-stage bound satisfies
/// `tanh(chain/2) = tanh(e1/2) * tanh(e2/2)`, so the fold multiplies
/// commutatively; a property test pins reversal invariance.
pub fn k_fold_chain(epsilons: &[f64]) -> Result<f64> {
    let (&first, rest) = epsilons
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("k_fold_chain needs at least one stage".into()))?;
    Ok(rest.iter().fold(first, |acc, &e| advanced_chain(acc, e)))
}

/// The advanced-composition epsilon growth shared by privacy and
/// untrackability: `sqrt(2k ln(1/δ'))·ε + k·ε·(e^ε − 1)`.
fn advanced_composition_level(eps: f64, folds: u64, delta_prime: f64) -> f64 {
    (2.0 * folds as f64 * (1.0 / delta_prime).ln()).sqrt() * eps
        + folds as f64 * eps * (eps.exp_m1())
}

/// k-fold advanced composition of an (ε, δ) mechanism with slack `δ'`.
pub fn dp_advanced_composition(
    bound: PrivacyBound,
    folds: u64,
    delta_prime: Probability,
) -> Result<PrivacyBound> {
    let dp = delta_prime.value();
    if folds < 1 {
        return Err(Error::InvalidArgument("composition needs k >= 1".into()));
    }
    if !(dp > 0.0 && dp < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta_prime must lie in (0, 1), got {dp}"
        )));
    }
    Ok(PrivacyBound {
        epsilon: advanced_composition_level(bound.epsilon, folds, dp),
        delta: Probability::clamped(folds as f64 * bound.delta.value() + dp),
    })
}

/// m-fold advanced composition of a (γ, δ) untrackable mechanism over the
/// concatenated report streams; the same functional form as
/// [`dp_advanced_composition`].
pub fn untrackable_advanced_composition(
    bound: TrackabilityBound,
    mechanisms: u64,
    delta_prime: Probability,
) -> Result<TrackabilityBound> {
    let dp = delta_prime.value();
    if mechanisms < 1 {
        return Err(Error::InvalidArgument("composition needs m >= 1".into()));
    }
    if !(dp > 0.0 && dp < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta_prime must lie in (0, 1), got {dp}"
        )));
    }
    Ok(TrackabilityBound {
        gamma: advanced_composition_level(bound.gamma, mechanisms, dp),
        delta: Probability::clamped(mechanisms as f64 * bound.delta.value() + dp),
        reports: bound.reports * mechanisms as usize,
    })
}

/// Untrackability of a permanent-state mechanism whose reports are
/// `eps_report`-DP in the state: `floor(k/2) * eps_report`.
pub fn permanent_state_untrackable(eps_report: f64, k: u64) -> f64 {
    assert!(eps_report >= 0.0, "epsilon must be nonnegative");
    assert!(k >= 1, "k must be >= 1");
    if k < 2 {
        // One report admits only trivial splits, even at infinite levels.
        return 0.0;
    }
    (k / 2) as f64 * eps_report
}

/// n-user untrackability from the two-user parameter: `(n-1) * gamma`.
pub fn multi_user_untrackable(gamma: f64, n_users: u64) -> Result<f64> {
    if n_users < 2 {
        return Err(Error::InvalidArgument("need at least 2 users".into()));
    }
    assert!(gamma >= 0.0, "gamma must be nonnegative");
    Ok((n_users - 1) as f64 * gamma)
}

/// Exact integer `ceil(log2 n)`; no float edge cases at powers of two.
pub fn ceil_log2(n: u64) -> u32 {
    assert!(n >= 1);
    if n == 1 {
        0
    } else {
        (n - 1).ilog2() + 1
    }
}

/// n-user untrackability of a permanent-state mechanism:
/// `ceil(log2 n) * floor(k/2) * eps_report`.
pub fn multi_user_permanent_untrackable(eps_report: f64, k: u64, n_users: u64) -> Result<f64> {
    if n_users < 2 {
        return Err(Error::InvalidArgument("need at least 2 users".into()));
    }
    Ok(f64::from(ceil_log2(n_users)) * permanent_state_untrackable(eps_report, k))
}

/// Undetectability of a changed private value from untrackability plus
/// everlasting privacy: `(γ + ε, max(e^ε δ + δ', δ + e^γ δ'))`, the delta
/// clamped to 1.
pub fn undetectable_bound(t: TrackabilityBound, e: PrivacyBound) -> (f64, Probability) {
    let (d, dp) = (t.delta.value(), e.delta.value());
    let arm_one = e.epsilon.exp() * d + dp;
    let arm_two = d + t.gamma.exp() * dp;
    (
        t.gamma + e.epsilon,
        Probability::clamped(arm_one.max(arm_two)),
    )
}

/// One chained pair over a two-point intermediate alphabet {v, w} and two
/// outputs: the first stage maps the two inputs to v with probabilities
/// `p_v` and `q_v`, the second emits output one with probability `g_v`
/// from v and `g_w` from w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryChainInstance {
    pub p_v: f64,
    pub q_v: f64,
    pub g_v: f64,
    pub g_w: f64,
}

impl BinaryChainInstance {
    /// Largest absolute log likelihood ratio of the chained mechanism over
    /// its two outputs (both input orders are covered by the absolute
    /// value). Infinite when exactly one input can reach an output.
    pub fn max_log_ratio(&self) -> f64 {
        let mut worst = 0.0f64;
        for (gv, gw) in [(self.g_v, self.g_w), (1.0 - self.g_v, 1.0 - self.g_w)] {
            let via_u = self.p_v * gv + (1.0 - self.p_v) * gw;
            let via_u2 = self.q_v * gv + (1.0 - self.q_v) * gw;
            if via_u == 0.0 && via_u2 == 0.0 {
                continue;
            }
            if via_u == 0.0 || via_u2 == 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max((via_u / via_u2).ln().abs());
        }
        worst
    }

    /// Whether the two stages satisfy ε₁- and ε₂-LDP respectively (up to
    /// `tol` on the log ratios).
    pub fn is_ldp(&self, e1: f64, e2: f64, tol: f64) -> bool {
        let ok = |a: f64, b: f64, e: f64| {
            if a == 0.0 && b == 0.0 {
                true
            } else if a == 0.0 || b == 0.0 {
                false
            } else {
                (a / b).ln().abs() <= e + tol
            }
        };
        ok(self.p_v, self.q_v, e1)
            && ok(1.0 - self.p_v, 1.0 - self.q_v, e1)
            && ok(self.g_v, self.g_w, e2)
            && ok(1.0 - self.g_v, 1.0 - self.g_w, e2)
    }
}

/// The instance achieving the tight chained level: the first stage is the
/// extreme ε₁ coin (`p_v = e^{ε1}/(1+e^{ε1})`, `q_v = 1/(1+e^{ε1})`) and the
/// second stage the extreme ε₂ coin (`g_w = g_v / e^{ε2}` at the largest
/// valid `g_v`).
pub fn analytic_chain_witness(e1: f64, e2: f64) -> BinaryChainInstance {
    let (a, b) = (e1.exp(), e2.exp());
    BinaryChainInstance {
        p_v: a / (1.0 + a),
        q_v: 1.0 / (1.0 + a),
        g_v: b / (1.0 + b),
        g_w: 1.0 / (1.0 + b),
    }
}

/// Result of [`chain_tightness_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TightnessResult {
    /// Largest chained log ratio found.
    pub achieved: f64,
    pub witness: BinaryChainInstance,
    /// The closed-form level the search is probing.
    pub bound: f64,
}

/// Searches binary-intermediate chained pairs for the largest output
/// likelihood ratio.
///
/// For each grid value of `p_v` (and of `g_v`) the other side of the stage
/// is set to its extreme feasible value, where the ratio is maximal; the
/// analytic witness is always included. The achieved value equals
/// [`advanced_chain`] at the witness and no candidate exceeds it.
pub fn chain_tightness_search(e1: f64, e2: f64, grid: usize) -> Result<TightnessResult> {
    if grid < 2 {
        return Err(Error::InvalidArgument(
            "grid resolution must be >= 2".into(),
        ));
    }
    let bound = advanced_chain(e1, e2);
    let (a, b) = (e1.exp(), e2.exp());
    let mut best = analytic_chain_witness(e1, e2);
    let mut achieved = best.max_log_ratio();

    for i in 0..grid {
        let p_v = (i as f64 + 0.5) / grid as f64;
        // Smallest q_v compatible with both epsilon-1 constraints.
        let q_v = (p_v / a).max(a * p_v - a + 1.0);
        for j in 0..grid {
            let g_v = (j as f64 + 0.5) / grid as f64;
            let g_w = (g_v / b).max(b * g_v - b + 1.0);
            let cand = BinaryChainInstance { p_v, q_v, g_v, g_w };
            let value = cand.max_log_ratio();
            if value > achieved {
                achieved = value;
                best = cand;
            }
        }
    }
    Ok(TightnessResult {
        achieved,
        witness: best,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_chain_is_min() {
        assert_eq!(basic_chain(0.5, 0.3), 0.3);
        assert_eq!(basic_chain(0.0, 7.0), 0.0);
        assert_eq!(basic_chain(1.0, 1.0), 1.0);
        assert!(basic_chain(1.0, 1.0) > advanced_chain(1.0, 1.0));
    }

    #[test]
    fn advanced_chain_values() {
        let v = advanced_chain(1.0, 1.0);
        assert!((v - 0.4337808304830273).abs() < 1e-12);
        for x in [0.0, 0.5, 3.0] {
            assert_eq!(advanced_chain(0.0, x), 0.0);
            assert_eq!(advanced_chain(x, 0.0), 0.0);
        }
        // Large first stage degrades to plain post-processing of the second.
        let v = advanced_chain(500.0, 0.7);
        assert!((v - 0.7).abs() < 1e-9, "got {v}");
    }

    #[test]
    fn corollary_chain_values() {
        assert_eq!(corollary_chain(1.0, 1.0), 0.5);
        assert!(corollary_chain(1.0, 1.0) >= advanced_chain(1.0, 1.0));
        assert_eq!(corollary_chain(0.0, 5.0), 0.0);
        // Beyond 2 the product bound falls behind even the basic one.
        assert_eq!(corollary_chain(3.0, 3.0), 4.5);
        assert!(corollary_chain(3.0, 3.0) > basic_chain(3.0, 3.0));
    }

    #[test]
    fn k_fold_values() {
        assert_eq!(k_fold_chain(&[0.7]).unwrap(), 0.7);
        assert_eq!(k_fold_chain(&[1.0, 1.0, 0.0]).unwrap(), 0.0);
        // Fold evaluation oracle: two explicit stages.
        let expect = advanced_chain(advanced_chain(1.0, 1.0), 1.0);
        assert!((k_fold_chain(&[1.0, 1.0, 1.0]).unwrap() - expect).abs() < 1e-15);
        assert!((expect - 0.1980168371459863).abs() < 1e-12);
        assert!(k_fold_chain(&[]).is_err());
    }

    #[test]
    fn dp_composition_values() {
        let p = |v| Probability::new(v).unwrap();
        let b = PrivacyBound::pure(0.0).unwrap();
        let out = dp_advanced_composition(b, 10, p(0.3)).unwrap();
        assert_eq!(out.epsilon, 0.0);

        let b = PrivacyBound::pure(1.0).unwrap();
        let out = dp_advanced_composition(b, 1, p((-1.0f64).exp())).unwrap();
        assert!((out.epsilon - (2.0f64.sqrt() + 1.0f64.exp() - 1.0)).abs() < 1e-9);
        assert!((out.epsilon - 3.1324953908321405).abs() < 1e-9);

        let b = PrivacyBound::pure(0.1).unwrap();
        let out = dp_advanced_composition(b, 100, p(1e-6)).unwrap();
        assert!((out.epsilon - 6.308230950513409).abs() < 1e-9);
        assert!((out.delta.value() - 1e-6).abs() < 1e-18);

        assert!(dp_advanced_composition(b, 0, p(0.5)).is_err());
        assert!(dp_advanced_composition(b, 3, Probability::ZERO).is_err());
        assert!(dp_advanced_composition(b, 3, Probability::ONE).is_err());
    }

    #[test]
    fn untrackable_composition_values() {
        let p = |v| Probability::new(v).unwrap();
        let t = TrackabilityBound::new(0.0, Probability::ZERO, 5).unwrap();
        assert_eq!(
            untrackable_advanced_composition(t, 4, p(0.1))
                .unwrap()
                .gamma,
            0.0
        );

        let t = TrackabilityBound::new(0.1, Probability::ZERO, 3).unwrap();
        let out = untrackable_advanced_composition(t, 4, p(0.01)).unwrap();
        assert!((out.gamma - 0.6490392189843177).abs() < 1e-9);
        assert_eq!(out.reports, 12);

        // Composition never improves the parameter.
        let out = untrackable_advanced_composition(t, 1, p(1e-9)).unwrap();
        assert!(out.gamma > t.gamma);
    }

    #[test]
    fn composition_forms_agree() {
        // Privacy and untrackability composition share one functional form.
        let p = |v| Probability::new(v).unwrap();
        for eps in [0.05, 0.3, 1.0] {
            for m in [1u64, 4, 50] {
                let a = dp_advanced_composition(PrivacyBound::pure(eps).unwrap(), m, p(0.02))
                    .unwrap()
                    .epsilon;
                let b = untrackable_advanced_composition(
                    TrackabilityBound::new(eps, Probability::ZERO, 1).unwrap(),
                    m,
                    p(0.02),
                )
                .unwrap()
                .gamma;
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn permanent_state_values() {
        assert_eq!(permanent_state_untrackable(1.0, 2), 1.0);
        assert!((permanent_state_untrackable(0.2, 5) - 0.4).abs() < 1e-15);
        assert_eq!(permanent_state_untrackable(3.0, 1), 0.0);
    }

    #[test]
    fn multi_user_values() {
        assert_eq!(multi_user_untrackable(0.7, 2).unwrap(), 0.7);
        assert_eq!(multi_user_untrackable(0.5, 3).unwrap(), 1.0);
        assert_eq!(multi_user_untrackable(0.0, 17).unwrap(), 0.0);
        assert!(multi_user_untrackable(0.5, 1).is_err());
    }

    #[test]
    fn ceil_log2_exact() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1 << 40), 40);
        assert_eq!(ceil_log2((1 << 40) + 1), 41);
    }

    #[test]
    fn multi_user_permanent_values() {
        let v = multi_user_permanent_untrackable(0.1, 6, 4).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
        // Two users reduce to the permanent-state bound itself.
        assert_eq!(
            multi_user_permanent_untrackable(0.3, 7, 2).unwrap(),
            permanent_state_untrackable(0.3, 7)
        );
        assert_eq!(multi_user_permanent_untrackable(1.0, 2, 3).unwrap(), 2.0);
        // The log-n route beats the linear route whenever ceil(log2 n) <= n-1.
        for n in 2..40u64 {
            if u64::from(ceil_log2(n)) < n {
                let fast = multi_user_permanent_untrackable(0.2, 9, n).unwrap();
                let slow = multi_user_untrackable(permanent_state_untrackable(0.2, 9), n).unwrap();
                assert!(fast <= slow + 1e-12);
            }
        }
        assert!(multi_user_permanent_untrackable(0.1, 5, 1).is_err());
    }

    #[test]
    fn undetectable_values() {
        let p = |v| Probability::new(v).unwrap();
        let t = TrackabilityBound::new(0.1, p(0.01), 4).unwrap();
        let e = PrivacyBound::new(0.2, p(0.02)).unwrap();
        let (g, d) = undetectable_bound(t, e);
        assert!((g - 0.3).abs() < 1e-15);
        assert!((d.value() - 0.032214027581601704).abs() < 1e-9);

        let t = TrackabilityBound::new(0.1, Probability::ZERO, 4).unwrap();
        let e = PrivacyBound::pure(0.2).unwrap();
        let (g, d) = undetectable_bound(t, e);
        assert!((g - 0.3).abs() < 1e-15);
        assert_eq!(d.value(), 0.0);

        let t = TrackabilityBound::new(0.0, p(0.01), 4).unwrap();
        let e = PrivacyBound::new(0.0, p(0.02)).unwrap();
        let (g, d) = undetectable_bound(t, e);
        assert_eq!(g, 0.0);
        assert!((d.value() - 0.03).abs() < 1e-15);
    }

    #[test]
    fn tightness_witness_achieves_bound() {
        for &(e1, e2) in &[(1.0, 1.0), (0.3, 2.0), (2.5, 0.1)] {
            let w = analytic_chain_witness(e1, e2);
            assert!(w.is_ldp(e1, e2, 1e-12));
            let r = chain_tightness_search(e1, e2, 64).unwrap();
            assert!(
                (r.achieved - r.bound).abs() < 1e-12,
                "({e1},{e2}): achieved {} vs bound {}",
                r.achieved,
                r.bound
            );
        }
        let r = chain_tightness_search(1.0, 1.0, 8).unwrap();
        assert!((r.achieved - 0.4337808304830273).abs() < 1e-12);
        let r = chain_tightness_search(0.0, 1.3, 16).unwrap();
        assert!(r.achieved.abs() < 1e-12);
        assert!(chain_tightness_search(1.0, 1.0, 1).is_err());
    }

    #[test]
    fn grid_never_exceeds_bound() {
        for &(e1, e2) in &[(0.2, 0.7), (1.0, 1.0), (3.0, 0.4)] {
            let r = chain_tightness_search(e1, e2, 101).unwrap();
            assert!(r.achieved <= r.bound + 1e-9);
        }
    }
}
