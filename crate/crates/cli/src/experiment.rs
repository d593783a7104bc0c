//! Experiment definitions and the shared dispatcher.
//!
//! Every subcommand's arguments serialize into the manifest's `args` block
//! and every run goes through [`run_experiment`], so a stored manifest can
//! be re-executed (`replay`) through exactly the code path that produced
//! it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use untrack_core::bitwise::{self, BitwiseParams};
use untrack_core::bounds;
use untrack_core::mech::{
    exact_everlasting_epsilon, exact_undetectable_gamma, exact_untrackable_gamma, OracleBudget,
    PermanentStateMechanism,
};
use untrack_core::prob::Probability;
use untrack_core::rappor::{self, RapporParams};
use untrack_core::rng::SeededRng;
use untrack_core::rnip::{self, RnipParams};
use untrack_core::{Error, Result};

use crate::table::{int, num, OutputFormat, ResultTable};

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct ChainArgs {
    /// First stage LDP level.
    #[arg(long, requires = "eps2")]
    pub eps1: Option<f64>,
    /// Second stage LDP level.
    #[arg(long, requires = "eps1")]
    pub eps2: Option<f64>,
    /// Comma-separated LDP levels for an iterated chain.
    #[arg(long, value_delimiter = ',')]
    pub eps_list: Option<Vec<f64>>,
    /// Also run the tightness search at this grid resolution.
    #[arg(long)]
    pub search_grid: Option<usize>,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct ComposeArgs {
    /// Per-mechanism level (epsilon, or gamma for untrackability).
    #[arg(long)]
    pub eps: f64,
    /// Per-mechanism delta.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Number of composed mechanisms.
    #[arg(long)]
    pub folds: u64,
    /// Slack delta spent by advanced composition.
    #[arg(long)]
    pub delta_prime: f64,
    /// Which guarantee is being composed.
    #[arg(long, value_parser = ["dp", "untrackable"], default_value = "dp")]
    pub kind: String,
    /// Reports per mechanism (untrackable composition only).
    #[arg(long, default_value_t = 1)]
    pub k_per_mech: u64,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct PermanentArgs {
    /// Per-report DP level in the state.
    #[arg(long)]
    pub eps: f64,
    /// Number of reports.
    #[arg(long)]
    pub k: u64,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct MultiuserArgs {
    /// Number of users the reports may be split across.
    #[arg(long)]
    pub users: u64,
    /// Two-user untrackability level (generic route).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Per-report DP level (permanent-state route; needs --k).
    #[arg(long, requires = "k")]
    pub eps: Option<f64>,
    /// Number of reports (permanent-state route).
    #[arg(long, requires = "eps")]
    pub k: Option<u64>,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct UndetectableArgs {
    /// Untrackability level.
    #[arg(long)]
    pub gamma: f64,
    /// Everlasting privacy level.
    #[arg(long)]
    pub eps: f64,
    /// Untrackability delta.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Everlasting privacy delta.
    #[arg(long, default_value_t = 0.0)]
    pub delta_prime: f64,
    /// Report count the untrackability level refers to.
    #[arg(long, default_value_t = 1)]
    pub k: u64,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct RapporSharedArgs {
    /// Bloom filter length.
    #[arg(long, default_value_t = 128)]
    pub s: usize,
    /// Hash functions per value.
    #[arg(long, default_value_t = 2)]
    pub h: usize,
    /// Permanent randomization probability.
    #[arg(long, default_value_t = 0.5)]
    pub f: f64,
    /// Report-1 probability on a permanent 0.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Report-1 probability on a permanent 1.
    #[arg(long, default_value_t = 0.75)]
    pub q: f64,
}

impl RapporSharedArgs {
    fn params(&self, hash_seed: u64) -> Result<RapporParams> {
        RapporParams::new(
            self.s,
            self.h,
            Probability::new(self.f)?,
            Probability::new(self.p)?,
            Probability::new(self.q)?,
            hash_seed,
        )
    }
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct RapporWorstCaseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: RapporSharedArgs,
    /// Largest report count analyzed (series runs k = 2..=k-max).
    #[arg(long, default_value_t = 15)]
    pub k_max: usize,
    /// Analyze a filter with this many set bits instead of `h`.
    #[arg(long)]
    pub set_bits: Option<usize>,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct RapporPercentilesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub shared: RapporSharedArgs,
    /// Analyze a single report count (shorthand for equal k-min/k-max).
    #[arg(long, conflicts_with_all = ["k_min", "k_max"])]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 15)]
    pub k_max: usize,
    /// Trackability samples per report count.
    #[arg(long, default_value_t = 10000)]
    pub nsamps: usize,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct SimulateBitwiseArgs {
    /// Number of users.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// True fraction of users holding 0 (rounded to a user count).
    #[arg(long)]
    pub p0: f64,
    #[arg(long)]
    pub eps1: f64,
    #[arg(long)]
    pub eps2: f64,
    #[arg(long, default_value_t = 1)]
    pub rounds: u64,
    /// Failure probability of the reported deviation bound.
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Clamp reported estimates into [0, 1] (presentation only; violation
    /// counting always uses the raw unbiased estimator).
    #[arg(long, default_value_t = false)]
    pub clip: bool,
}

#[derive(Debug, clap::Args, Serialize, Deserialize)]
pub struct SimulateRnipArgs {
    /// Value width in bits.
    #[arg(long)]
    pub d: usize,
    /// Number of users.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Stored executions per user; alternative to --alpha.
    #[arg(long, visible_alias = "L", conflicts_with = "alpha")]
    pub state_size: Option<usize>,
    /// Everlasting privacy target epsilon.
    #[arg(long)]
    pub eps: f64,
    /// Everlasting privacy target delta.
    #[arg(long)]
    pub delta: f64,
    /// Accuracy target driving parameter selection; alternative to
    /// --state-size.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    #[arg(long, default_value_t = 1)]
    pub rounds: u64,
    /// Reports per user for the collision accounting.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Monte-Carlo trials for the collision rate.
    #[arg(long, default_value_t = 10000)]
    pub trials: usize,
    /// Also report estimates projected onto the probability simplex
    /// (presentation only).
    #[arg(long, default_value_t = false)]
    pub project: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DistinguishArgs {
    /// The mechanism document (embedded at manifest creation).
    pub mechanism: Value,
    pub k_max: usize,
    pub budget: u64,
}

/// A manifest-ready experiment: its kind tag and serialized arguments.
pub fn to_manifest_args<T: Serialize>(args: &T) -> BTreeMap<String, Value> {
    match serde_json::to_value(args).expect("experiment args serialize") {
        Value::Object(map) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

fn parse_args<T: for<'de> Deserialize<'de>>(
    kind: &str,
    args: &BTreeMap<String, Value>,
) -> Result<T> {
    serde_json::from_value(Value::Object(args.clone().into_iter().collect())).map_err(|e| {
        Error::InvalidArgument(format!("manifest args do not fit experiment `{kind}`: {e}"))
    })
}

/// Preferred output format of an experiment kind (overridable by flags).
pub fn preferred_format(kind: &str) -> OutputFormat {
    match kind {
        "simulate-bitwise" | "simulate-rnip" => OutputFormat::Json,
        _ => OutputFormat::Csv,
    }
}

/// Executes an experiment kind against its manifest arguments.
pub fn run_experiment(
    kind: &str,
    args: &BTreeMap<String, Value>,
    seed: u64,
) -> Result<ResultTable> {
    match kind {
        "bounds-chain" => bounds_chain(parse_args(kind, args)?),
        "bounds-compose" => bounds_compose(parse_args(kind, args)?),
        "bounds-permanent" => bounds_permanent(parse_args(kind, args)?),
        "bounds-multiuser" => bounds_multiuser(parse_args(kind, args)?),
        "bounds-undetectable" => bounds_undetectable(parse_args(kind, args)?),
        "rappor-worst-case" => rappor_worst_case(parse_args(kind, args)?, seed),
        "rappor-percentiles" => rappor_percentiles(parse_args(kind, args)?, seed),
        "simulate-bitwise" => simulate_bitwise(parse_args(kind, args)?, seed),
        "simulate-rnip" => simulate_rnip(parse_args(kind, args)?, seed),
        "distinguish" => distinguish(parse_args(kind, args)?),
        other => Err(Error::InvalidArgument(format!(
            "unknown experiment kind `{other}`"
        ))),
    }
}

fn check_nonnegative(name: &str, value: f64) -> Result<f64> {
    if value.is_nan() || value < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "{name} must be nonnegative, got {value}"
        )));
    }
    Ok(value)
}

fn bounds_chain(args: ChainArgs) -> Result<ResultTable> {
    let mut table = ResultTable::new(
        "chained local-privacy levels",
        &["quantity", "value", "rule"],
    );
    let mut any = false;
    if let (Some(e1), Some(e2)) = (args.eps1, args.eps2) {
        check_nonnegative("eps1", e1)?;
        check_nonnegative("eps2", e2)?;
        any = true;
        table.push_row(vec![
            "basic".into(),
            num(bounds::basic_chain(e1, e2)),
            "post-processing minimum".into(),
        ]);
        table.push_row(vec![
            "advanced".into(),
            num(bounds::advanced_chain(e1, e2)),
            "tight two-stage chaining".into(),
        ]);
        table.push_row(vec![
            "corollary".into(),
            num(bounds::corollary_chain(e1, e2)),
            "small-epsilon product".into(),
        ]);
        if let Some(grid) = args.search_grid {
            let search = bounds::chain_tightness_search(e1, e2, grid)?;
            table.push_row(vec![
                "search-achieved".into(),
                num(search.achieved),
                "tightness search over binary intermediates".into(),
            ]);
        }
    }
    if let Some(list) = &args.eps_list {
        for (i, &e) in list.iter().enumerate() {
            check_nonnegative(&format!("eps_list[{i}]"), e)?;
        }
        any = true;
        table.push_row(vec![
            "k-fold".into(),
            num(bounds::k_fold_chain(list)?),
            "iterated two-stage chaining".into(),
        ]);
    }
    if !any {
        return Err(Error::InvalidArgument(
            "provide --eps1/--eps2 or --eps-list".into(),
        ));
    }
    Ok(table)
}

fn bounds_compose(args: ComposeArgs) -> Result<ResultTable> {
    check_nonnegative("eps", args.eps)?;
    let delta = Probability::new(args.delta)?;
    let delta_prime = Probability::new(args.delta_prime)?;
    let mut table = ResultTable::new(
        "advanced composition of per-mechanism guarantees",
        &["quantity", "value", "rule"],
    );
    match args.kind.as_str() {
        "dp" => {
            let composed = bounds::dp_advanced_composition(
                bounds::PrivacyBound::new(args.eps, delta)?,
                args.folds,
                delta_prime,
            )?;
            table.push_row(vec![
                "epsilon".into(),
                num(composed.epsilon),
                "advanced composition".into(),
            ]);
            table.push_row(vec![
                "delta".into(),
                num(composed.delta.value()),
                "advanced composition".into(),
            ]);
        }
        "untrackable" => {
            let composed = bounds::untrackable_advanced_composition(
                bounds::TrackabilityBound::new(args.eps, delta, args.k_per_mech as usize)?,
                args.folds,
                delta_prime,
            )?;
            table.push_row(vec![
                "gamma".into(),
                num(composed.gamma),
                "advanced composition".into(),
            ]);
            table.push_row(vec![
                "delta".into(),
                num(composed.delta.value()),
                "advanced composition".into(),
            ]);
            table.push_row(vec![
                "reports".into(),
                int(composed.reports as u64),
                "concatenated streams".into(),
            ]);
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown composition kind `{other}`"
            )))
        }
    }
    Ok(table)
}

fn bounds_permanent(args: PermanentArgs) -> Result<ResultTable> {
    check_nonnegative("eps", args.eps)?;
    if args.k < 1 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let mut table = ResultTable::new(
        "permanent-state untrackability",
        &["quantity", "value", "rule"],
    );
    table.push_row(vec![
        "gamma".into(),
        num(bounds::permanent_state_untrackable(args.eps, args.k)),
        "floor(k/2) per-report level".into(),
    ]);
    Ok(table)
}

fn bounds_multiuser(args: MultiuserArgs) -> Result<ResultTable> {
    let mut table = ResultTable::new("multi-user untrackability", &["quantity", "value", "rule"]);
    let mut any = false;
    if let Some(gamma) = args.gamma {
        check_nonnegative("gamma", gamma)?;
        any = true;
        table.push_row(vec![
            "gamma".into(),
            num(bounds::multi_user_untrackable(gamma, args.users)?),
            "linear in users".into(),
        ]);
    }
    if let (Some(eps), Some(k)) = (args.eps, args.k) {
        check_nonnegative("eps", eps)?;
        any = true;
        table.push_row(vec![
            "gamma".into(),
            num(bounds::multi_user_permanent_untrackable(
                eps, k, args.users,
            )?),
            "logarithmic in users (permanent state)".into(),
        ]);
    }
    if !any {
        return Err(Error::InvalidArgument(
            "provide --gamma or --eps with --k".into(),
        ));
    }
    Ok(table)
}

fn bounds_undetectable(args: UndetectableArgs) -> Result<ResultTable> {
    check_nonnegative("gamma", args.gamma)?;
    check_nonnegative("eps", args.eps)?;
    let t =
        bounds::TrackabilityBound::new(args.gamma, Probability::new(args.delta)?, args.k as usize)?;
    let e = bounds::PrivacyBound::new(args.eps, Probability::new(args.delta_prime)?)?;
    let (gamma, delta_max) = bounds::undetectable_bound(t, e);
    let mut table = ResultTable::new(
        "undetectability from untrackability and everlasting privacy",
        &["quantity", "value", "rule"],
    );
    table.push_row(vec!["gamma".into(), num(gamma), "sum of levels".into()]);
    table.push_row(vec![
        "delta_max".into(),
        num(delta_max.value()),
        "worst of the two mixing arms".into(),
    ]);
    Ok(table)
}

fn rappor_worst_case(args: RapporWorstCaseArgs, seed: u64) -> Result<ResultTable> {
    let params = args.shared.params(seed)?;
    if args.k_max < 2 {
        return Err(Error::InvalidArgument("k-max must be >= 2".into()));
    }
    let set_bits = args
        .set_bits
        .unwrap_or_else(|| params.hashes.min(params.bits));
    if set_bits > params.bits {
        return Err(Error::InvalidArgument(
            "set-bits exceeds the filter length".into(),
        ));
    }
    let mut table = ResultTable::new("worst-case trackability by report count", &["k", "gamma"]);
    for k in 2..=args.k_max {
        let gamma = rappor::worst_case_gamma_with_set_bits(&params, k, set_bits);
        table.push_row(vec![int(k as u64), num(gamma)]);
    }
    table.insert_summary(
        "composition_gamma_k2",
        num(rappor::composition_gamma(&params, 2)),
    );
    Ok(table)
}

fn rappor_percentiles(args: RapporPercentilesArgs, seed: u64) -> Result<ResultTable> {
    let params = args.shared.params(seed)?;
    let (k_min, k_max) = match args.k {
        Some(k) => (k, k),
        None => (args.k_min, args.k_max),
    };
    if k_min < 2 || k_max < k_min {
        return Err(Error::InvalidArgument("need 2 <= k-min <= k-max".into()));
    }
    let root = SeededRng::new(seed);
    let mut table = ResultTable::new(
        "trackability random variable percentiles (95% order-statistic intervals)",
        &["k", "median", "med_lo", "med_hi", "p90", "p90_lo", "p90_hi"],
    );
    for k in k_min..=k_max {
        let (median, p90) = rappor::estimate_trackability_percentiles(
            &params,
            k,
            args.nsamps,
            &root.substream(k as u64),
        )?;
        table.push_row(vec![
            int(k as u64),
            num(median.point),
            num(median.ci_low),
            num(median.ci_high),
            num(p90.point),
            num(p90.ci_low),
            num(p90.ci_high),
        ]);
    }
    Ok(table)
}

fn simulate_bitwise(args: SimulateBitwiseArgs, seed: u64) -> Result<ResultTable> {
    if !(0.0..=1.0).contains(&args.p0) {
        return Err(Error::InvalidArgument("p0 must lie in [0, 1]".into()));
    }
    if args.rounds < 1 {
        return Err(Error::InvalidArgument("need rounds >= 1".into()));
    }
    let n = args.n as usize;
    let params = BitwiseParams::new(args.eps1, args.eps2)?;
    let zeros = (args.p0 * n as f64).round() as usize;
    let p0_true = zeros as f64 / n as f64;
    let bound = bitwise::accuracy_bound(&params, args.n, Probability::new(args.beta)?)?;

    let root = SeededRng::new(seed);
    let mut table = ResultTable::new(
        "bitwise everlasting-privacy frequency simulation",
        &["round", "p0_est", "abs_error"],
    );
    let mut estimates = Vec::with_capacity(args.rounds as usize);
    let mut violations = 0u64;
    for round in 0..args.rounds {
        let est =
            bitwise::simulate_frequency_round(&params, zeros, n - zeros, &root.substream(round))?;
        let error = (est.p0 - p0_true).abs();
        if error > bound.exact {
            violations += 1;
        }
        let shown = if args.clip {
            est.p0.clamp(0.0, 1.0)
        } else {
            est.p0
        };
        estimates.push(num(shown));
        table.push_row(vec![int(round), num(shown), num(error)]);
    }
    table.insert_summary("p0_true", num(p0_true));
    table.insert_summary("p0_est_per_round", Value::Array(estimates));
    table.insert_summary("bound", num(bound.exact));
    table.insert_summary("bound_simplified", num(bound.simplified));
    table.insert_summary("beta", num(args.beta));
    table.insert_summary("violations", int(violations));
    Ok(table)
}

fn simulate_rnip(args: SimulateRnipArgs, seed: u64) -> Result<ResultTable> {
    if args.rounds < 1 {
        return Err(Error::InvalidArgument("need rounds >= 1".into()));
    }
    let n = args.n as usize;
    let delta = Probability::new(args.delta)?;
    let beta = Probability::new(args.beta)?;
    let mut selection_summary = None;
    let params = match (args.state_size, args.alpha) {
        (Some(state_size), None) => RnipParams::new(args.d, state_size, args.eps, delta)?,
        (None, Some(alpha)) => {
            let selection = rnip::select_parameters(args.eps, delta, alpha, beta, args.n, args.d)?;
            selection_summary = Some(serde_json::json!({
                "alpha": alpha,
                "noise_floor": selection.noise_floor,
                "exact_min_eps_prime": selection.exact_min_eps_prime,
                "meets_exact_floor": selection.meets_exact_floor,
            }));
            selection.params
        }
        _ => {
            return Err(Error::InvalidArgument(
                "provide exactly one of --state-size or --alpha".into(),
            ))
        }
    };

    // Round-robin population over the first few values: known truth with
    // several distinct frequencies.
    let distinct = 4usize.min(1usize << args.d.min(20));
    let mut counts: Vec<(u32, usize)> = (0..distinct).map(|v| (v as u32, n / distinct)).collect();
    counts[0].1 += n % distinct;
    let truth = rnip::true_frequencies(&counts, args.d);

    let bound = rnip::accuracy_bound(&params, args.n, beta)?;
    let root = SeededRng::new(seed);
    let rounds_rng = root.substream(0);
    let collision_rng = root.substream(1);

    let mut table = ResultTable::new(
        "report-noisy-inner-product frequency simulation",
        &["round", "linf_error"],
    );
    let mut errors = Vec::with_capacity(args.rounds as usize);
    let mut violations = 0u64;
    for round in 0..args.rounds {
        let est = rnip::simulate_frequency_round(&params, &counts, &rounds_rng.substream(round))?;
        let est = if args.project {
            rnip::FrequencyVector {
                estimates: est.project_to_simplex(),
            }
        } else {
            est
        };
        let error = est.linf_error(&truth);
        if error > bound.exact {
            violations += 1;
        }
        errors.push(num(error));
        table.push_row(vec![int(round), num(error)]);
    }

    let collisions =
        rnip::empirical_collision_rate(&params, args.k as usize, args.trials, &collision_rng)?;
    let delta_parts = rnip::untrackable_delta(args.k, params.state_size as u64, args.d as u32);

    table.insert_summary(
        "params",
        serde_json::json!({
            "d": params.dimension,
            "state_size": params.state_size,
            "eps": params.eps,
            "delta": params.delta.value(),
            "eps_prime": params.eps_prime,
        }),
    );
    if let Some(selection) = selection_summary {
        table.insert_summary("selection", selection);
    }
    table.insert_summary("linf_error_per_round", Value::Array(errors));
    table.insert_summary("bound", num(bound.exact));
    table.insert_summary("bound_simplified", num(bound.simplified));
    table.insert_summary("beta", num(args.beta));
    table.insert_summary("violations", int(violations));
    table.insert_summary(
        "collision_rate",
        serde_json::json!({
            "one_user": collisions.one_user,
            "two_users": collisions.two_users,
        }),
    );
    table.insert_summary(
        "untrackable_delta",
        serde_json::json!({
            "total": delta_parts.total,
            "within_user": delta_parts.within_user,
            "cross_user": delta_parts.cross_user,
        }),
    );
    table.insert_summary("projected", Value::Bool(args.project));
    Ok(table)
}

fn distinguish(args: DistinguishArgs) -> Result<ResultTable> {
    if args.k_max < 1 {
        return Err(Error::InvalidArgument("k-max must be >= 1".into()));
    }
    let text = serde_json::to_string(&args.mechanism).expect("value serializes");
    let mech = PermanentStateMechanism::from_json(&text)?;
    let budget = OracleBudget {
        max_evaluations: args.budget,
    };
    let report_eps = mech.report_epsilon();

    let mut table = ResultTable::new(
        "exact distinguishing parameters by report count",
        &[
            "k",
            "gamma_exact",
            "eps_exact",
            "undetect_exact",
            "permanent_bound",
        ],
    );
    for k in 1..=args.k_max {
        table.push_row(vec![
            int(k as u64),
            num(exact_untrackable_gamma(&mech, k, budget)?),
            num(exact_everlasting_epsilon(&mech, k, budget)?),
            num(exact_undetectable_gamma(&mech, k, budget)?),
            num(bounds::permanent_state_untrackable(report_eps, k as u64)),
        ]);
    }
    table.insert_summary("report_epsilon", num(report_eps));
    Ok(table)
}
