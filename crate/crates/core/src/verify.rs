//! Executable property checks for the mechanisms and the seeded random
//! battery that runs them.
//!
//! Truthfulness is probed by re-running a mechanism with one user's bid
//! changed and everything else (other bids, arrival order) held fixed. Probe
//! bids exactly equal to the reference payment are never used: which side of
//! the threshold they land on depends on tie-breaking.
//!
//! Every violation carries the instance seed it came from;
//! [`battery_case`] rebuilds the exact instance, arrival order and probe
//! parameters from that seed.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AuctionOutcome, Coverage, Instance, Units, UserId};
use crate::msensing::run_msensing;
use crate::online::{run_online, run_online_traced, OnlineConfig};
use crate::seeding::{self, ARRIVAL_STREAM, INSTANCE_STREAM};
use crate::smart::run_smart;

/// Largest instance [`first_best_bound`] will enumerate.
pub const FIRST_BEST_MAX_USERS: usize = 20;

/// The battery computes the first-best bound up to this many users.
pub const BATTERY_FIRST_BEST_USERS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Smart,
    Msensing,
    Online,
}

impl MechanismKind {
    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Smart => "smart",
            MechanismKind::Msensing => "msensing",
            MechanismKind::Online => "online",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smart" => Ok(MechanismKind::Smart),
            "msensing" => Ok(MechanismKind::Msensing),
            "online" => Ok(MechanismKind::Online),
            other => Err(Error::Config(format!(
                "unknown mechanism `{other}` (expected smart, msensing or online)"
            ))),
        }
    }
}

/// A mechanism ready to run on any instance over the same user ids.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    Smart,
    Msensing,
    Online {
        order: Vec<UserId>,
        config: OnlineConfig,
    },
}

impl Mechanism {
    pub fn kind(&self) -> MechanismKind {
        match self {
            Mechanism::Smart => MechanismKind::Smart,
            Mechanism::Msensing => MechanismKind::Msensing,
            Mechanism::Online { .. } => MechanismKind::Online,
        }
    }

    pub fn run(&self, instance: &Instance) -> Result<AuctionOutcome> {
        match self {
            Mechanism::Smart => Ok(run_smart(instance)),
            Mechanism::Msensing => Ok(run_msensing(instance)),
            Mechanism::Online { order, config } => run_online(instance, order, *config),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    /// Every winner is paid at least its bid.
    IndividualRationality,
    /// Platform utility is non-negative.
    Profitability,
    /// SMART's utility is at least M-Sensing's.
    SmartBeatsMsensing,
    /// A winner that lowers its bid still wins.
    MonotoneSelection,
    /// A winner that bids above its payment loses.
    CriticalPayment,
    /// Bidding the true cost maximizes the user's own utility.
    TruthfulBidding,
    /// SMART's utility never exceeds the best subset's value minus bids.
    FirstBestBound,
    /// T ⊆ R, |R| ≤ m, clean reference set, utility non-decreasing.
    OnlineStructure,
    /// Decisions on a prefix do not depend on later arrivals.
    OnlinePrefixReplay,
}

impl Property {
    pub const ALL: [Property; 9] = [
        Property::IndividualRationality,
        Property::Profitability,
        Property::SmartBeatsMsensing,
        Property::MonotoneSelection,
        Property::CriticalPayment,
        Property::TruthfulBidding,
        Property::FirstBestBound,
        Property::OnlineStructure,
        Property::OnlinePrefixReplay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::IndividualRationality => "individual_rationality",
            Property::Profitability => "profitability",
            Property::SmartBeatsMsensing => "smart_beats_msensing",
            Property::MonotoneSelection => "monotone_selection",
            Property::CriticalPayment => "critical_payment",
            Property::TruthfulBidding => "truthful_bidding",
            Property::FirstBestBound => "first_best_bound",
            Property::OnlineStructure => "online_structure",
            Property::OnlinePrefixReplay => "online_prefix_replay",
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One failed check on one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub property: Property,
    pub mechanism: Option<MechanismKind>,
    pub user: Option<UserId>,
    pub detail: String,
}

impl Finding {
    fn new(
        property: Property,
        mechanism: Option<MechanismKind>,
        user: Option<UserId>,
        detail: String,
    ) -> Self {
        Finding {
            property,
            mechanism,
            user,
            detail,
        }
    }
}

/// A finding tagged with the battery case that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub instance_index: usize,
    pub instance_seed: u64,
    #[serde(flatten)]
    pub finding: Finding,
}

/// Result of a set of checks: how often each property was tested, and what
/// failed. Counts are keyed by property and mechanism.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PropertyReport {
    pub instances: usize,
    pub checks: BTreeMap<(Property, Option<MechanismKind>), u64>,
    pub violations: Vec<Violation>,
}

impl PropertyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violation_count(&self, property: Property, mechanism: Option<MechanismKind>) -> usize {
        self.violations
            .iter()
            .filter(|v| v.finding.property == property && v.finding.mechanism == mechanism)
            .count()
    }

    /// Distinct instances with at least one violation of `property`.
    pub fn failing_instances(&self, property: Property, mechanism: Option<MechanismKind>) -> usize {
        let mut seen: Vec<usize> = self
            .violations
            .iter()
            .filter(|v| v.finding.property == property && v.finding.mechanism == mechanism)
            .map(|v| v.instance_index)
            .collect();
        seen.dedup();
        seen.len()
    }

    /// Violations as JSON lines, in instance order.
    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        for v in &self.violations {
            serde_json::to_writer(&mut out, v)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// One line per (property, mechanism): checks run and violations found.
    pub fn summary(&self) -> String {
        let mut text = format!("instances: {}\n", self.instances);
        for (&(property, mechanism), &checks) in &self.checks {
            let mech = mechanism.map_or("-", MechanismKind::name);
            let bad = self.violation_count(property, mechanism);
            let cases = self.failing_instances(property, mechanism);
            text.push_str(&format!(
                "{:<24} {:<9} checks {:>8}  violations {:>6}  instances {:>6}\n",
                property.name(),
                mech,
                checks,
                bad,
                cases
            ));
        }
        text
    }

    fn merge(&mut self, index: usize, seed: u64, case: CaseReport) {
        self.instances += 1;
        for (key, n) in case.checks {
            *self.checks.entry(key).or_default() += n;
        }
        self.violations
            .extend(case.findings.into_iter().map(|finding| Violation {
                instance_index: index,
                instance_seed: seed,
                finding,
            }));
    }
}

/// Findings and check counts for a single instance.
#[derive(Debug, Clone, Default)]
pub struct CaseReport {
    pub checks: BTreeMap<(Property, Option<MechanismKind>), u64>,
    pub findings: Vec<Finding>,
}

impl CaseReport {
    fn tally(&mut self, property: Property, mechanism: Option<MechanismKind>) {
        *self.checks.entry((property, mechanism)).or_default() += 1;
    }

    fn absorb(&mut self, other: CaseReport) {
        for (key, n) in other.checks {
            *self.checks.entry(key).or_default() += n;
        }
        self.findings.extend(other.findings);
    }
}

/// max over W ⊆ U of v(W) − Σ_{i∈W} b_i, by enumeration.
pub fn first_best_bound(instance: &Instance) -> Result<Units> {
    let n = instance.user_count();
    if n > FIRST_BEST_MAX_USERS {
        return Err(Error::Config(format!(
            "first-best enumeration refused for {n} users (limit {FIRST_BEST_MAX_USERS})"
        )));
    }
    let ids: Vec<UserId> = instance.user_ids().collect();
    fn search(instance: &Instance, ids: &[UserId], coverage: &Coverage<'_>, bids: Units) -> Units {
        let here = coverage.value() - bids;
        match ids.split_first() {
            None => here,
            Some((&first, rest)) => {
                let skip = search(instance, rest, coverage, bids);
                let mut with = coverage.clone();
                with.insert(first);
                let take = search(instance, rest, &with, bids + instance.bid(first));
                skip.max(take)
            }
        }
    }
    Ok(search(instance, &ids, &Coverage::empty(instance), 0))
}

/// Winners paid at least their bid; utility non-negative.
pub fn check_rationality_profitability(
    mechanism: &Mechanism,
    instance: &Instance,
) -> Result<CaseReport> {
    let outcome = mechanism.run(instance)?;
    Ok(rationality_profitability(
        mechanism.kind(),
        instance,
        &outcome,
    ))
}

fn rationality_profitability(
    kind: MechanismKind,
    instance: &Instance,
    outcome: &AuctionOutcome,
) -> CaseReport {
    let mut report = CaseReport::default();
    for &i in &outcome.winners {
        report.tally(Property::IndividualRationality, Some(kind));
        let (pay, bid) = (outcome.payment(i), instance.bid(i));
        if pay < bid {
            report.findings.push(Finding::new(
                Property::IndividualRationality,
                Some(kind),
                Some(i),
                format!("payment {pay} below bid {bid}"),
            ));
        }
    }
    report.tally(Property::Profitability, Some(kind));
    if outcome.utility < 0 {
        report.findings.push(Finding::new(
            Property::Profitability,
            Some(kind),
            None,
            format!("utility {}", outcome.utility),
        ));
    }
    report
}

/// SMART's utility is at least M-Sensing's.
pub fn check_dominance(instance: &Instance) -> CaseReport {
    let smart = run_smart(instance).utility;
    let msensing = run_msensing(instance).utility;
    let mut report = CaseReport::default();
    report.tally(Property::SmartBeatsMsensing, None);
    if smart < msensing {
        report.findings.push(Finding::new(
            Property::SmartBeatsMsensing,
            None,
            None,
            format!("smart utility {smart} below msensing utility {msensing}"),
        ));
    }
    report
}

/// Re-bids for one winner. `cost` is the user's true cost (≤ its bid).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthfulnessProbe {
    pub user: UserId,
    pub cost: Units,
    pub bids: Vec<Units>,
}

/// Monotonicity, criticality and truthful-bid dominance for one winner.
///
/// Against the reference run (current bids): every probe bid below the
/// user's bid must still win; every probe bid above its payment must lose.
/// Separately, the user's utility ω(b) = p − cost when winning (else 0) must
/// be maximized by bidding `cost`, over all probe bids.
pub fn check_truthfulness(
    mechanism: &Mechanism,
    instance: &Instance,
    probe: &TruthfulnessProbe,
) -> Result<CaseReport> {
    let kind = Some(mechanism.kind());
    let i = probe.user;
    let reference = mechanism.run(instance)?;
    if !reference.is_winner(i) {
        return Err(Error::precondition(
            "check_truthfulness",
            format!("probe target {i} does not win under its reference bid"),
        ));
    }
    let bid = instance.bid(i);
    let payment = reference.payment(i);
    if let Some(&b) = probe.bids.iter().find(|&&b| b == payment) {
        return Err(Error::precondition(
            "check_truthfulness",
            format!("probe bid {b} equals the reference payment"),
        ));
    }
    if probe.cost <= 0 || probe.cost > bid {
        return Err(Error::precondition(
            "check_truthfulness",
            format!("cost {} must lie in 1..={bid}", probe.cost),
        ));
    }

    let own_utility = |outcome: &AuctionOutcome| {
        if outcome.is_winner(i) {
            outcome.payment(i) - probe.cost
        } else {
            0
        }
    };
    let mut report = CaseReport::default();
    let truthful = mechanism.run(&instance.with_bid(i, probe.cost)?)?;
    let truthful_utility = own_utility(&truthful);

    for &b in &probe.bids {
        let outcome = mechanism.run(&instance.with_bid(i, b)?)?;
        let wins = outcome.is_winner(i);
        if b < bid {
            report.tally(Property::MonotoneSelection, kind);
            if !wins {
                report.findings.push(Finding::new(
                    Property::MonotoneSelection,
                    kind,
                    Some(i),
                    format!("wins at bid {bid} but loses at lower bid {b}"),
                ));
            }
        }
        if b > payment {
            report.tally(Property::CriticalPayment, kind);
            if wins {
                report.findings.push(Finding::new(
                    Property::CriticalPayment,
                    kind,
                    Some(i),
                    format!(
                        "paid {payment} at bid {bid}, still wins at bid {b} (paid {})",
                        outcome.payment(i)
                    ),
                ));
            }
        }
        report.tally(Property::TruthfulBidding, kind);
        let lied = own_utility(&outcome);
        if lied > truthful_utility {
            report.findings.push(Finding::new(
                Property::TruthfulBidding,
                kind,
                Some(i),
                format!(
                    "cost {}: truthful bid earns {truthful_utility}, bid {b} earns {lied}",
                    probe.cost
                ),
            ));
        }
    }
    Ok(report)
}

/// Structural invariants of one online run plus a prefix-replay check.
pub fn check_online_structure(
    instance: &Instance,
    order: &[UserId],
    config: OnlineConfig,
) -> Result<CaseReport> {
    let kind = Some(MechanismKind::Online);
    let run = run_online_traced(instance, order, config)?;
    let m = instance.task_count();
    let mut report = CaseReport::default();
    let fail = |report: &mut CaseReport, user: Option<UserId>, detail: String| {
        report
            .findings
            .push(Finding::new(Property::OnlineStructure, kind, user, detail));
    };

    report.tally(Property::OnlineStructure, kind);
    if run.initial_reference.len() > m {
        fail(
            &mut report,
            None,
            format!("initial |R| = {} > m = {m}", run.initial_reference.len()),
        );
    }
    let mut previous_utility = 0;
    for record in &run.log {
        report.tally(Property::OnlineStructure, kind);
        let user = Some(record.user);
        if !record.winners.is_subset(&record.reference) {
            fail(&mut report, user, "T is not a subset of R".into());
        }
        if record.reference.len() > m {
            fail(
                &mut report,
                user,
                format!("|R| = {} > m = {m}", record.reference.len()),
            );
        }
        for &j in record.reference.difference(&record.winners) {
            let rest = instance.cover(record.reference.iter().filter(|&&r| r != j));
            if rest.marginal(j) < instance.bid(j) {
                fail(
                    &mut report,
                    user,
                    format!("reference user {j} kept with marginal below its bid"),
                );
            }
        }
        if record.decision.accepted() && record.utility < previous_utility {
            fail(
                &mut report,
                user,
                format!("utility fell from {previous_utility} to {}", record.utility),
            );
        }
        if !record.decision.accepted() && record.utility != previous_utility {
            fail(&mut report, user, "utility changed on a rejection".into());
        }
        previous_utility = record.utility;
    }
    let processed = run.log.len();
    let remaining = run.arrivals.len() - run.observed;
    if processed < remaining && run.outcome.winners.len() < m {
        fail(
            &mut report,
            None,
            format!("stopped after {processed} of {remaining} arrivals with |T| < m"),
        );
    }

    // Reverse everything after the middle processed arrival and replay.
    report.tally(Property::OnlinePrefixReplay, kind);
    if processed > 0 {
        let keep = processed.div_ceil(2);
        let last_kept = run.log[keep - 1].user;
        let cut = order
            .iter()
            .position(|&u| u == last_kept)
            .expect("arrival in order")
            + 1;
        let mut replay_order = order.to_vec();
        replay_order[cut..].reverse();
        let replay = run_online_traced(instance, &replay_order, config)?;
        if replay.log.len() < keep || replay.log[..keep] != run.log[..keep] {
            report.findings.push(Finding::new(
                Property::OnlinePrefixReplay,
                kind,
                None,
                format!("first {keep} decisions changed when later arrivals were reordered"),
            ));
        }
    }
    Ok(report)
}

/// Bounds for battery instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryConfig {
    pub seed: u64,
    pub count: usize,
    pub max_users: usize,
    pub max_tasks: usize,
}

impl BatteryConfig {
    pub const MAX_TASK_VALUE: Units = 20;
    pub const MAX_BID: Units = 30;
}

/// Everything one battery case needs, rebuilt from its seed.
#[derive(Debug, Clone)]
pub struct BatteryCase {
    pub instance: Instance,
    pub order: Vec<UserId>,
    pub online: OnlineConfig,
    probe_rng_seed: u64,
}

/// Random instance with n ∈ [1, max_users] and m ∈ [1, max_tasks]; each
/// user covers a uniform random subset of 1..=m tasks, task values lie in
/// [0, 20] and bids in [1, 30].
pub fn battery_case(seed: u64, max_users: usize, max_tasks: usize) -> BatteryCase {
    let mut rng = seeding::stream(seed, INSTANCE_STREAM);
    let n = rng.gen_range(1..=max_users.max(1));
    let m = rng.gen_range(1..=max_tasks.max(1));
    let values: Vec<Units> = (0..m)
        .map(|_| rng.gen_range(0..=BatteryConfig::MAX_TASK_VALUE))
        .collect();
    let users: Vec<(Vec<u32>, Units)> = (0..n)
        .map(|_| {
            let size = rng.gen_range(1..=m);
            let mut tasks: Vec<u32> = index::sample(&mut rng, m, size)
                .into_iter()
                .map(|t| t as u32)
                .collect();
            tasks.sort_unstable();
            (tasks, rng.gen_range(1..=BatteryConfig::MAX_BID))
        })
        .collect();
    let instance = Instance::from_parts(values, users).expect("generated instance is valid");

    let mut arrivals = seeding::stream(seed, ARRIVAL_STREAM);
    let mut order: Vec<UserId> = instance.user_ids().collect();
    order.shuffle(&mut arrivals);
    let fraction = arrivals.gen_range(10..=60) as f64 / 100.0;
    BatteryCase {
        instance,
        order,
        online: OnlineConfig::new(fraction).expect("fraction in range"),
        probe_rng_seed: arrivals.gen(),
    }
}

/// Probe bids for a winner: up to three bids below its bid, three above its
/// payment, and its own bid when that differs from the payment.
fn probe_for(user: UserId, bid: Units, payment: Units, rng: &mut impl Rng) -> TruthfulnessProbe {
    let mut bids: Vec<Units> = [1, bid / 2, bid - 1]
        .into_iter()
        .filter(|&b| b >= 1 && b < bid)
        .collect();
    let floor = payment.max(0);
    bids.extend([floor + 1, floor + 1 + floor / 2, 2 * floor + 3]);
    bids.push(bid);
    bids.sort_unstable();
    bids.dedup();
    bids.retain(|&b| b != payment && b >= 1);
    TruthfulnessProbe {
        user,
        cost: rng.gen_range(1..=bid),
        bids,
    }
}

/// All checks on one battery case.
pub fn check_case(case: &BatteryCase) -> Result<CaseReport> {
    let instance = &case.instance;
    let mut report = CaseReport::default();
    let mut rng = seeding::stream(case.probe_rng_seed, 0);
    let mechanisms = [
        Mechanism::Smart,
        Mechanism::Msensing,
        Mechanism::Online {
            order: case.order.clone(),
            config: case.online,
        },
    ];
    let mut smart_utility = 0;
    for mechanism in &mechanisms {
        let outcome = mechanism.run(instance)?;
        if mechanism.kind() == MechanismKind::Smart {
            smart_utility = outcome.utility;
        }
        report.absorb(rationality_profitability(
            mechanism.kind(),
            instance,
            &outcome,
        ));
        for &i in &outcome.winners {
            let probe = probe_for(i, instance.bid(i), outcome.payment(i), &mut rng);
            report.absorb(check_truthfulness(mechanism, instance, &probe)?);
        }
    }
    report.absorb(check_dominance(instance));
    if instance.user_count() <= BATTERY_FIRST_BEST_USERS {
        report.tally(Property::FirstBestBound, Some(MechanismKind::Smart));
        let bound = first_best_bound(instance)?;
        if smart_utility > bound {
            report.findings.push(Finding::new(
                Property::FirstBestBound,
                Some(MechanismKind::Smart),
                None,
                format!("smart utility {smart_utility} exceeds first-best bound {bound}"),
            ));
        }
    }
    report.absorb(check_online_structure(instance, &case.order, case.online)?);
    Ok(report)
}

/// Seed of the battery case at `index`.
pub fn case_seed(base: u64, index: usize) -> u64 {
    seeding::trial_seed(base, 0, index)
}

/// Runs every check on `count` seeded random instances. Cases run in
/// parallel; the report is assembled in case order.
pub fn run_battery(config: &BatteryConfig) -> Result<PropertyReport> {
    let cases: Vec<(u64, CaseReport)> = (0..config.count)
        .into_par_iter()
        .map(|index| {
            let seed = case_seed(config.seed, index);
            let case = battery_case(seed, config.max_users, config.max_tasks);
            check_case(&case).map(|r| (seed, r))
        })
        .collect::<Result<_>>()?;
    let mut report = PropertyReport::default();
    for (index, (seed, case)) in cases.into_iter().enumerate() {
        report.merge(index, seed, case);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{single_user, walkthrough};

    #[test]
    fn first_best_small_cases() {
        let fix = walkthrough();
        // brute force over all 32 subsets
        let ids: Vec<UserId> = fix.user_ids().collect();
        let mut best = 0;
        for mask in 0u32..32 {
            let chosen: Vec<UserId> = ids
                .iter()
                .copied()
                .filter(|u| mask >> (u.0 - 1) & 1 == 1)
                .collect();
            let bids: Units = chosen.iter().map(|&u| fix.bid(u)).sum();
            best = best.max(fix.coverage_value(&chosen).unwrap() - bids);
        }
        assert_eq!(first_best_bound(&fix).unwrap(), best);
        assert_eq!(best, 36);

        let empty = Instance::from_parts(Vec::<i64>::new(), Vec::new()).unwrap();
        assert_eq!(first_best_bound(&empty).unwrap(), 0);
        assert_eq!(first_best_bound(&single_user()).unwrap(), 6);

        let big = Instance::from_parts([1], (0..21).map(|_| (vec![0], 1))).unwrap();
        assert!(first_best_bound(&big).is_err());
    }

    #[test]
    fn first_best_three_user_table() {
        // tasks 0..2 worth 5, 7, 4; u1 {0,1} b3, u2 {1,2} b6, u3 {2} b1
        let inst =
            Instance::from_parts([5, 7, 4], [(vec![0, 1], 3), (vec![1, 2], 6), (vec![2], 1)])
                .unwrap();
        // subset utilities by hand:
        // {}:0 {1}:9 {2}:5 {3}:3 {1,2}:7 {1,3}:12 {2,3}:4 {1,2,3}:6
        assert_eq!(first_best_bound(&inst).unwrap(), 12);
    }

    #[test]
    fn walkthrough_passes_rationality_and_profitability() {
        let fix = walkthrough();
        for m in [Mechanism::Smart, Mechanism::Msensing] {
            let report = check_rationality_profitability(&m, &fix).unwrap();
            assert!(report.findings.is_empty(), "{:?}", report.findings);
        }
        assert!(check_dominance(&fix).findings.is_empty());
    }

    #[test]
    fn walkthrough_truthfulness_probes() {
        let fix = walkthrough();
        let probe = TruthfulnessProbe {
            user: UserId(3),
            cost: 6,
            bids: vec![4, 9],
        };
        let report = check_truthfulness(&Mechanism::Smart, &fix, &probe).unwrap();
        assert!(report.findings.is_empty(), "{:?}", report.findings);
        assert!(run_smart(&fix.with_bid(UserId(3), 4).unwrap()).is_winner(UserId(3)));
        assert!(!run_smart(&fix.with_bid(UserId(3), 9).unwrap()).is_winner(UserId(3)));

        let probe = TruthfulnessProbe {
            user: UserId(5),
            cost: 2,
            bids: vec![9],
        };
        let report = check_truthfulness(&Mechanism::Smart, &fix, &probe).unwrap();
        assert!(report.findings.is_empty(), "{:?}", report.findings);
        assert!(!run_smart(&fix.with_bid(UserId(5), 9).unwrap()).is_winner(UserId(5)));
    }

    #[test]
    fn probes_reject_boundary_and_losers() {
        let fix = walkthrough();
        let at_payment = TruthfulnessProbe {
            user: UserId(3),
            cost: 6,
            bids: vec![7],
        };
        assert!(check_truthfulness(&Mechanism::Smart, &fix, &at_payment).is_err());
        let loser = TruthfulnessProbe {
            user: UserId(1),
            cost: 8,
            bids: vec![3],
        };
        assert!(check_truthfulness(&Mechanism::Smart, &fix, &loser).is_err());
    }

    #[test]
    fn online_probe_above_payment_loses() {
        let fix = walkthrough();
        let order: Vec<UserId> = [4, 5, 1, 3, 2].map(UserId).to_vec();
        let mechanism = Mechanism::Online {
            order,
            config: OnlineConfig::new(0.2).unwrap(),
        };
        let outcome = mechanism.run(&fix).unwrap();
        for &i in &outcome.winners {
            let probe = TruthfulnessProbe {
                user: i,
                cost: fix.bid(i),
                bids: vec![outcome.payment(i) + 1],
            };
            let report = check_truthfulness(&mechanism, &fix, &probe).unwrap();
            let critical: Vec<_> = report
                .findings
                .iter()
                .filter(|f| f.property == Property::CriticalPayment)
                .collect();
            assert!(critical.is_empty(), "{critical:?}");
        }
    }

    #[test]
    fn online_structure_on_walkthrough() {
        let fix = walkthrough();
        let order: Vec<UserId> = [4, 5, 1, 3, 2].map(UserId).to_vec();
        let report = check_online_structure(&fix, &order, OnlineConfig::new(0.2).unwrap()).unwrap();
        assert!(report.findings.is_empty(), "{:?}", report.findings);
    }

    #[test]
    fn empty_battery() {
        let report = run_battery(&BatteryConfig {
            seed: 1,
            count: 0,
            max_users: 10,
            max_tasks: 8,
        })
        .unwrap();
        assert_eq!(report.instances, 0);
        assert!(report.is_clean());
        let mut buf = Vec::new();
        report.write_jsonl(&mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn battery_is_deterministic() {
        let config = BatteryConfig {
            seed: 1,
            count: 60,
            max_users: 8,
            max_tasks: 6,
        };
        let a = run_battery(&config).unwrap();
        let b = run_battery(&config).unwrap();
        let (mut ja, mut jb) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut ja).unwrap();
        b.write_jsonl(&mut jb).unwrap();
        assert_eq!(ja, jb);
        assert_eq!(a.summary(), b.summary());
        assert_eq!(a.instances, 60);
    }

    #[test]
    fn violations_replay_from_seed() {
        let config = BatteryConfig {
            seed: 5,
            count: 300,
            max_users: 8,
            max_tasks: 8,
        };
        let report = run_battery(&config).unwrap();
        for v in report.violations.iter().take(5) {
            let case = battery_case(v.instance_seed, config.max_users, config.max_tasks);
            let replay = check_case(&case).unwrap();
            assert!(replay.findings.contains(&v.finding), "{v:?}");
        }
    }
}
