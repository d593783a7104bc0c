//! Finite report mechanisms and exact brute-force oracles.
//!
//! A stateless mechanism is a row-stochastic kernel from inputs to reports;
//! a permanent-state mechanism draws one state from a per-input prior and
//! then emits conditionally i.i.d. reports from a per-state kernel. For
//! small instances the three distinguishing parameters are computed exactly
//! by enumerating every report stream (and, where splits matter, every
//! subset of report indices):
//!
//! - untrackable γ: worst log ratio between one user producing all k
//!   reports and two users with the same value splitting them;
//! - everlasting ε: worst log ratio between two different values over
//!   whole streams;
//! - undetectable γ: the split ratio with the complement part generated
//!   from a possibly different value.
//!
//! Pure (δ = 0) parameters are per-stream maximizations; ratios with
//! probability exactly zero on one side surface as `f64::INFINITY` rather
//! than being clamped. An evaluation budget keeps the `|R|^k · 2^k` blowup
//! from hanging the process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;
use crate::prob::Probability;
use crate::rng::SeededRng;

const ROW_SUM_TOLERANCE: f64 = 1e-12;
/// Probabilities below this floor are treated as exactly zero in ratio
/// maximizations.
const PROBABILITY_FLOOR: f64 = 1e-300;

/// A sequence of report symbol indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportStream {
    pub reports: Vec<usize>,
}

impl ReportStream {
    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

/// A subset J of the report indices `[0, k)` attributed to the first user;
/// the complement goes to the second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndex {
    k: usize,
    members: Vec<usize>,
}

impl SplitIndex {
    /// Builds a split from arbitrary indices; duplicates collapse.
    pub fn new(k: usize, members: &[usize]) -> Result<Self> {
        let mut m: Vec<usize> = members.to_vec();
        m.sort_unstable();
        m.dedup();
        if m.last().is_some_and(|&last| last >= k) {
            return Err(Error::InvalidArgument(format!(
                "split index out of range for k={k}"
            )));
        }
        Ok(SplitIndex { k, members: m })
    }

    /// The prefix split `J = {0, .., i-1}`.
    pub fn prefix(k: usize, i: usize) -> Result<Self> {
        if i > k {
            return Err(Error::InvalidArgument(format!(
                "prefix length {i} exceeds k={k}"
            )));
        }
        Ok(SplitIndex {
            k,
            members: (0..i).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.k).filter(|i| !self.contains(*i)).collect()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.binary_search(&index).is_ok()
    }
}

fn validate_row_stochastic(matrix: &[Vec<f64>], cols: usize, field: &str) -> Result<()> {
    for (row_idx, row) in matrix.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::InvalidMechanism {
                field: field.into(),
                reason: format!("row {row_idx} has {} entries, expected {cols}", row.len()),
            });
        }
        let mut sum = 0.0;
        for (col_idx, &v) in row.iter().enumerate() {
            if !(0.0..=1.0 + ROW_SUM_TOLERANCE).contains(&v) {
                return Err(Error::InvalidMechanism {
                    field: field.into(),
                    reason: format!("entry ({row_idx}, {col_idx}) = {v} is not a probability"),
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::InvalidMechanism {
                field: field.into(),
                reason: format!("row {row_idx} sums to {sum}, expected 1"),
            });
        }
    }
    Ok(())
}

fn categorical(row: &[f64], rng: &mut SeededRng) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for (idx, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx;
        }
    }
    row.len() - 1
}

/// A memoryless mechanism: one row-stochastic kernel `Pr[report | input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteStatelessMechanism {
    inputs: Vec<String>,
    reports: Vec<String>,
    kernel: Vec<Vec<f64>>,
}

impl FiniteStatelessMechanism {
    pub fn new(inputs: Vec<String>, reports: Vec<String>, kernel: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || reports.is_empty() {
            return Err(Error::InvalidMechanism {
                field: "inputs".into(),
                reason: "inputs and reports must be non-empty".into(),
            });
        }
        if kernel.len() != inputs.len() {
            return Err(Error::InvalidMechanism {
                field: "kernel".into(),
                reason: format!("{} rows for {} inputs", kernel.len(), inputs.len()),
            });
        }
        validate_row_stochastic(&kernel, reports.len(), "kernel")?;
        Ok(FiniteStatelessMechanism {
            inputs,
            reports,
            kernel,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn reports(&self) -> &[String] {
        &self.reports
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    /// k i.i.d. reports for the given input index.
    pub fn generate_stream(
        &self,
        input: usize,
        k: usize,
        rng: &mut SeededRng,
    ) -> Result<ReportStream> {
        if input >= self.inputs.len() {
            return Err(Error::InvalidArgument(format!(
                "unknown input index {input}"
            )));
        }
        if k < 1 {
            return Err(Error::InvalidArgument("stream length must be >= 1".into()));
        }
        let row = &self.kernel[input];
        Ok(ReportStream {
            reports: (0..k).map(|_| categorical(row, rng)).collect(),
        })
    }

    /// Exact LDP level of the kernel: worst |ln| ratio across inputs per
    /// report; infinite when a report is reachable from one input only.
    pub fn exact_ldp_epsilon(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.reports.len() {
            for u in 0..self.inputs.len() {
                for u2 in 0..self.inputs.len() {
                    let (a, b) = (self.kernel[u][r], self.kernel[u2][r]);
                    if a <= PROBABILITY_FLOOR && b <= PROBABILITY_FLOOR {
                        continue;
                    }
                    if a <= PROBABILITY_FLOOR || b <= PROBABILITY_FLOOR {
                        return f64::INFINITY;
                    }
                    worst = worst.max((a / b).ln().abs());
                }
            }
        }
        worst
    }

    /// The equivalent permanent-state mechanism: the state records the
    /// input (reports are i.i.d. given the input either way).
    pub fn as_permanent(&self) -> PermanentStateMechanism {
        let n = self.inputs.len();
        let prior: Vec<Vec<f64>> = (0..n)
            .map(|u| (0..n).map(|s| if s == u { 1.0 } else { 0.0 }).collect())
            .collect();
        PermanentStateMechanism {
            inputs: self.inputs.clone(),
            states: self.inputs.clone(),
            reports: self.reports.clone(),
            state_prior: prior,
            report_kernel: self.kernel.clone(),
        }
    }
}

/// JSON document layout for [`PermanentStateMechanism`]: label lists plus
/// flat row-major probability arrays.
#[derive(Debug, Serialize, Deserialize)]
struct MechanismDocument {
    inputs: Vec<String>,
    states: Vec<String>,
    reports: Vec<String>,
    /// Row-major `inputs x states` array: `Pr[state | input]`.
    state_prior: Vec<f64>,
    /// Row-major `states x reports` array: `Pr[report | state]`.
    report_kernel: Vec<f64>,
}

/// A mechanism that draws one state per user and then reports i.i.d. from
/// the state's kernel row forever.
#[derive(Debug, Clone, PartialEq)]
pub struct PermanentStateMechanism {
    inputs: Vec<String>,
    states: Vec<String>,
    reports: Vec<String>,
    state_prior: Vec<Vec<f64>>,
    report_kernel: Vec<Vec<f64>>,
}

impl PermanentStateMechanism {
    pub fn new(
        inputs: Vec<String>,
        states: Vec<String>,
        reports: Vec<String>,
        state_prior: Vec<Vec<f64>>,
        report_kernel: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if inputs.is_empty() || states.is_empty() || reports.is_empty() {
            return Err(Error::InvalidMechanism {
                field: "inputs".into(),
                reason: "inputs, states and reports must be non-empty".into(),
            });
        }
        if state_prior.len() != inputs.len() {
            return Err(Error::InvalidMechanism {
                field: "state_prior".into(),
                reason: format!("{} rows for {} inputs", state_prior.len(), inputs.len()),
            });
        }
        if report_kernel.len() != states.len() {
            return Err(Error::InvalidMechanism {
                field: "report_kernel".into(),
                reason: format!("{} rows for {} states", report_kernel.len(), states.len()),
            });
        }
        validate_row_stochastic(&state_prior, states.len(), "state_prior")?;
        validate_row_stochastic(&report_kernel, reports.len(), "report_kernel")?;
        Ok(PermanentStateMechanism {
            inputs,
            states,
            reports,
            state_prior,
            report_kernel,
        })
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn reports(&self) -> &[String] {
        &self.reports
    }

    pub fn state_prior(&self) -> &[Vec<f64>] {
        &self.state_prior
    }

    pub fn report_kernel(&self) -> &[Vec<f64>] {
        &self.report_kernel
    }

    pub fn input_index(&self, label: &str) -> Option<usize> {
        self.inputs.iter().position(|l| l == label)
    }

    /// Parses the JSON document `{inputs, states, reports, state_prior,
    /// report_kernel}` with row-major flat probability arrays.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MechanismDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidMechanism {
                field: "document".into(),
                reason: e.to_string(),
            })?;
        let unflatten =
            |flat: &[f64], rows: usize, cols: usize, field: &str| -> Result<Vec<Vec<f64>>> {
                if flat.len() != rows * cols {
                    return Err(Error::InvalidMechanism {
                        field: field.into(),
                        reason: format!(
                            "expected {rows} x {cols} = {} entries, got {}",
                            rows * cols,
                            flat.len()
                        ),
                    });
                }
                Ok(flat.chunks(cols).map(<[f64]>::to_vec).collect())
            };
        let prior = unflatten(
            &doc.state_prior,
            doc.inputs.len(),
            doc.states.len(),
            "state_prior",
        )?;
        let kernel = unflatten(
            &doc.report_kernel,
            doc.states.len(),
            doc.reports.len(),
            "report_kernel",
        )?;
        Self::new(doc.inputs, doc.states, doc.reports, prior, kernel)
    }

    /// Serializes to the document layout accepted by [`Self::from_json`].
    pub fn to_json(&self) -> String {
        let doc = MechanismDocument {
            inputs: self.inputs.clone(),
            states: self.states.clone(),
            reports: self.reports.clone(),
            state_prior: self.state_prior.iter().flatten().copied().collect(),
            report_kernel: self.report_kernel.iter().flatten().copied().collect(),
        };
        serde_json::to_string_pretty(&doc).expect("mechanism document serializes")
    }

    /// Draws the permanent state once, then k reports from its kernel row.
    pub fn generate_stream(
        &self,
        input: usize,
        k: usize,
        rng: &mut SeededRng,
    ) -> Result<ReportStream> {
        if input >= self.inputs.len() {
            return Err(Error::InvalidArgument(format!(
                "unknown input index {input}"
            )));
        }
        if k < 1 {
            return Err(Error::InvalidArgument("stream length must be >= 1".into()));
        }
        let state = categorical(&self.state_prior[input], rng);
        let row = &self.report_kernel[state];
        Ok(ReportStream {
            reports: (0..k).map(|_| categorical(row, rng)).collect(),
        })
    }

    /// Exact probability of one report stream: the per-state product of
    /// kernel entries accumulated in log space, mixed over the state prior.
    /// The empty stream has probability 1.
    pub fn exact_stream_probability(
        &self,
        input: usize,
        stream: &ReportStream,
    ) -> Result<Probability> {
        if input >= self.inputs.len() {
            return Err(Error::InvalidArgument(format!(
                "unknown input index {input}"
            )));
        }
        if let Some(&bad) = stream.reports.iter().find(|&&r| r >= self.reports.len()) {
            return Err(Error::InvalidArgument(format!(
                "report symbol {bad} outside the report alphabet"
            )));
        }
        let mut total = 0.0;
        for (s, row) in self.report_kernel.iter().enumerate() {
            let prior = self.state_prior[input][s];
            if prior == 0.0 {
                continue;
            }
            let log_prod: f64 = stream.reports.iter().map(|&r| row[r].ln()).sum();
            total += prior * log_prod.exp();
        }
        Ok(Probability::clamped(total))
    }

    /// Worst |ln| ratio of the report kernel across states: the per-report
    /// DP level of the state-to-report channel.
    pub fn report_epsilon(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.reports.len() {
            for s in 0..self.states.len() {
                for s2 in 0..self.states.len() {
                    let (a, b) = (self.report_kernel[s][r], self.report_kernel[s2][r]);
                    if a <= PROBABILITY_FLOOR && b <= PROBABILITY_FLOOR {
                        continue;
                    }
                    if a <= PROBABILITY_FLOOR || b <= PROBABILITY_FLOOR {
                        return f64::INFINITY;
                    }
                    worst = worst.max((a / b).ln().abs());
                }
            }
        }
        worst
    }
}

/// Evaluation budget for the exact oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleBudget {
    pub max_evaluations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_evaluations: 10_000_000,
        }
    }
}

impl OracleBudget {
    fn admit(self, required: u128) -> Result<()> {
        if required > u128::from(self.max_evaluations) {
            return Err(Error::BudgetExceeded {
                required: required.min(u128::from(u64::MAX)) as u64,
                budget: self.max_evaluations,
            });
        }
        Ok(())
    }
}

/// Per-state log kernel sums for one concrete stream, used by the oracles.
struct StreamTable<'m> {
    mech: &'m PermanentStateMechanism,
    /// log kernel entry per (state, position).
    log_q: Vec<Vec<f64>>,
}

impl<'m> StreamTable<'m> {
    fn new(mech: &'m PermanentStateMechanism, stream: &[usize]) -> Self {
        let log_q = mech
            .report_kernel
            .iter()
            .map(|row| stream.iter().map(|&r| row[r].ln()).collect())
            .collect();
        StreamTable { mech, log_q }
    }

    /// Probability that input `u` generates exactly the positions of the
    /// stream selected by `mask`.
    fn masked_probability(&self, u: usize, mask: u64) -> f64 {
        let mut total = 0.0;
        for (s, logs) in self.log_q.iter().enumerate() {
            let prior = self.mech.state_prior[u][s];
            if prior == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                acc += logs[i];
                bits &= bits - 1;
            }
            total += prior * acc.exp();
        }
        total
    }
}

/// |ln(joint / split)| with zero-probability cases kept distinct: both
/// sides zero means the stream is unreachable (no constraint), one side
/// zero is infinite.
fn log_ratio(joint: f64, split: f64) -> Option<f64> {
    let joint_zero = joint <= PROBABILITY_FLOOR;
    let split_zero = split <= PROBABILITY_FLOOR;
    match (joint_zero, split_zero) {
        (true, true) => None,
        (true, false) | (false, true) => Some(f64::INFINITY),
        (false, false) => Some((joint.ln() - split.ln()).abs()),
    }
}

fn stream_space(reports: usize, k: usize) -> u128 {
    (reports as u128).pow(k as u32)
}

fn decode_stream(mut index: u128, reports: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        out.push((index % reports as u128) as usize);
        index /= reports as u128;
    }
    out
}

fn check_k(k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    if k > 63 {
        return Err(Error::InvalidArgument(
            "split enumeration supports at most 63 reports".into(),
        ));
    }
    Ok(())
}

/// Exact pure untrackability at horizon `k`: the worst |ln| ratio between
/// one user generating a stream and any two-user split of it, maximized
/// over inputs, streams, and splits.
pub fn exact_untrackable_gamma(
    mech: &PermanentStateMechanism,
    k: usize,
    budget: OracleBudget,
) -> Result<f64> {
    check_k(k)?;
    let n_streams = stream_space(mech.reports.len(), k);
    budget.admit(n_streams * (1u128 << k) * mech.inputs.len() as u128)?;

    let worst = parallel::max_indexed_f64(n_streams as usize, |stream_idx| {
        let stream = decode_stream(stream_idx as u128, mech.reports.len(), k);
        let table = StreamTable::new(mech, &stream);
        let full_mask = (1u64 << k) - 1;
        let mut local = 0.0f64;
        for u in 0..mech.inputs.len() {
            let joint = table.masked_probability(u, full_mask);
            // Complementary masks give the same product; half the range
            // covers every split.
            for mask in 0..=(full_mask >> 1) {
                let split = table.masked_probability(u, mask)
                    * table.masked_probability(u, full_mask & !mask);
                if let Some(r) = log_ratio(joint, split) {
                    local = local.max(r);
                }
            }
        }
        local
    });
    Ok(worst.max(0.0))
}

/// Exact pure everlasting-privacy level at horizon `k`: the worst |ln|
/// ratio between two inputs over whole report streams. Nondecreasing in k.
pub fn exact_everlasting_epsilon(
    mech: &PermanentStateMechanism,
    k: usize,
    budget: OracleBudget,
) -> Result<f64> {
    check_k(k)?;
    let n_streams = stream_space(mech.reports.len(), k);
    budget.admit(n_streams * (mech.inputs.len() as u128).pow(2))?;

    let worst = parallel::max_indexed_f64(n_streams as usize, |stream_idx| {
        let stream = decode_stream(stream_idx as u128, mech.reports.len(), k);
        let table = StreamTable::new(mech, &stream);
        let full_mask = (1u64 << k) - 1;
        let probs: Vec<f64> = (0..mech.inputs.len())
            .map(|u| table.masked_probability(u, full_mask))
            .collect();
        let mut local = 0.0f64;
        for u in 0..probs.len() {
            for u2 in (u + 1)..probs.len() {
                if let Some(r) = log_ratio(probs[u], probs[u2]) {
                    local = local.max(r);
                }
            }
        }
        local
    });
    Ok(worst.max(0.0))
}

/// Exact pure undetectability at horizon `k`: like the untrackable oracle
/// but the complement part of the split may come from a different input.
pub fn exact_undetectable_gamma(
    mech: &PermanentStateMechanism,
    k: usize,
    budget: OracleBudget,
) -> Result<f64> {
    check_k(k)?;
    let n_streams = stream_space(mech.reports.len(), k);
    budget.admit(n_streams * (1u128 << k) * (mech.inputs.len() as u128).pow(2))?;

    let worst = parallel::max_indexed_f64(n_streams as usize, |stream_idx| {
        let stream = decode_stream(stream_idx as u128, mech.reports.len(), k);
        let table = StreamTable::new(mech, &stream);
        let full_mask = (1u64 << k) - 1;
        let mut local = 0.0f64;
        for u in 0..mech.inputs.len() {
            let joint = table.masked_probability(u, full_mask);
            for u2 in 0..mech.inputs.len() {
                for mask in 0..=full_mask {
                    let split = table.masked_probability(u, mask)
                        * table.masked_probability(u2, full_mask & !mask);
                    if let Some(r) = log_ratio(joint, split) {
                        local = local.max(r);
                    }
                }
            }
        }
        local
    });
    Ok(worst.max(0.0))
}
