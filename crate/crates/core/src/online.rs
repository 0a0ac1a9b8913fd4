//! ONLINE-SMART: reject and observe the first k arrivals, seed a reference
//! set with SMART over them, then accept or reject each later arrival on the
//! spot.
//!
//! Arrivals whose standalone value does not exceed their bid are dropped
//! before anything else and do not count toward n. Observed users never win.
//! Reference users kept from the observation phase are never paid.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AuctionOutcome, Instance, Units, UserId};
use crate::smart::Smart;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OnlineConfig {
    observe_fraction: f64,
}

impl OnlineConfig {
    /// `observe_fraction` is 1/c and must lie strictly between 0 and 1.
    pub fn new(observe_fraction: f64) -> Result<Self> {
        if !(observe_fraction > 0.0 && observe_fraction < 1.0) {
            return Err(Error::Config(format!(
                "observe fraction {observe_fraction} is outside (0, 1)"
            )));
        }
        Ok(OnlineConfig { observe_fraction })
    }

    pub fn observe_fraction(&self) -> f64 {
        self.observe_fraction
    }

    /// k = ⌊n · fraction⌋. The small epsilon keeps decimal fractions such as
    /// 0.29 · 100 from flooring to 28.
    pub fn observed_count(&self, n: usize) -> usize {
        ((n as f64) * self.observe_fraction + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct OnlineState {
    pub reference: BTreeSet<UserId>,
    pub winners: BTreeSet<UserId>,
    pub payments: BTreeMap<UserId, Units>,
    /// Index of the next arrival in the eligible arrival sequence.
    pub cursor: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "decision")]
pub enum Decision {
    Added { payment: Units },
    Replaced { replaced: UserId, payment: Units },
    Rejected,
}

impl Decision {
    pub fn payment(&self) -> Option<Units> {
        match *self {
            Decision::Added { payment } | Decision::Replaced { payment, .. } => Some(payment),
            Decision::Rejected => None,
        }
    }

    pub fn accepted(&self) -> bool {
        !matches!(self, Decision::Rejected)
    }
}

/// One processed arrival and the state right after its cleanup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArrivalRecord {
    pub user: UserId,
    pub decision: Decision,
    pub removed_references: Vec<UserId>,
    pub reference: BTreeSet<UserId>,
    pub winners: BTreeSet<UserId>,
    pub utility: Units,
}

impl OnlineState {
    /// Adds `i` to both sets and pays v_i(R) as measured before insertion.
    /// Requires |R| < m and v_i(R) > b_i.
    pub fn add_user(&mut self, instance: &Instance, i: UserId) -> Result<Units> {
        instance.check(i)?;
        if self.reference.len() >= instance.task_count() {
            return Err(Error::precondition("add_user", "reference set is full"));
        }
        let payment = instance.cover(&self.reference).marginal(i);
        if payment - instance.bid(i) <= 0 {
            return Err(Error::precondition(
                "add_user",
                format!("user {i} has no positive margin over the reference set"),
            ));
        }
        self.reference.insert(i);
        self.winners.insert(i);
        self.payments.insert(i, payment);
        Ok(payment)
    }

    /// Swaps `i` for the reference user j ∈ R \ T that maximizes
    /// v((R \ {j}) ∪ {i}) − v(R) + b_j − b_i, if that gain is positive.
    /// Returns the swapped-out user and the payment.
    pub fn try_to_replace(
        &mut self,
        instance: &Instance,
        i: UserId,
    ) -> Result<Option<(UserId, Units)>> {
        instance.check(i)?;
        let current = instance.cover(&self.reference).value();
        let bid = instance.bid(i);
        let mut best: Option<(UserId, Units)> = None;
        for &k in self.reference.difference(&self.winners) {
            let mut swapped = instance.cover(self.reference.iter().filter(|&&r| r != k));
            swapped.insert(i);
            let gain = swapped.value() - current + instance.bid(k) - bid;
            if best.is_none_or(|(_, g)| gain > g) {
                best = Some((k, gain));
            }
        }
        match best {
            Some((j, gain)) if gain > 0 => {
                let payment = gain + bid;
                self.reference.remove(&j);
                self.reference.insert(i);
                self.winners.insert(i);
                self.payments.insert(i, payment);
                Ok(Some((j, payment)))
            }
            _ => Ok(None),
        }
    }

    /// One ascending pass over R \ T, dropping each j with v_j(R \ {j}) < b_j
    /// against the shrinking R. Winners are never touched.
    pub fn remove_bad_reference_users(&mut self, instance: &Instance) -> Vec<UserId> {
        let candidates: Vec<UserId> = self.reference.difference(&self.winners).copied().collect();
        let mut removed = Vec::new();
        for j in candidates {
            let without = instance.cover(self.reference.iter().filter(|&&r| r != j));
            if without.marginal(j) < instance.bid(j) {
                self.reference.remove(&j);
                removed.push(j);
            }
        }
        removed
    }

    pub fn utility(&self, instance: &Instance) -> Units {
        instance.cover(&self.winners).value() - self.payments.values().sum::<Units>()
    }
}

/// A running ONLINE-SMART auction over a fixed arrival order.
#[derive(Debug, Clone)]
pub struct OnlineAuction<'a> {
    instance: &'a Instance,
    arrivals: Vec<UserId>,
    ineligible: Vec<UserId>,
    observed: usize,
    state: OnlineState,
    log: Vec<ArrivalRecord>,
}

/// Result of a full online run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OnlineRun {
    pub outcome: AuctionOutcome,
    /// Eligible arrivals in order; the first `observed` of them seeded R.
    pub arrivals: Vec<UserId>,
    pub observed: usize,
    pub initial_reference: BTreeSet<UserId>,
    pub log: Vec<ArrivalRecord>,
}

impl<'a> OnlineAuction<'a> {
    /// Validates `arrival_order` as a permutation of all user ids, drops
    /// users with v_i ≤ b_i, and runs the observation phase.
    pub fn new(
        instance: &'a Instance,
        arrival_order: &[UserId],
        config: OnlineConfig,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &id in arrival_order {
            instance.check(id)?;
            if !seen.insert(id) {
                return Err(Error::precondition(
                    "observe",
                    format!("user {id} arrives twice"),
                ));
            }
        }
        if seen.len() != instance.user_count() {
            return Err(Error::precondition(
                "observe",
                format!(
                    "arrival order lists {} of {} users",
                    seen.len(),
                    instance.user_count()
                ),
            ));
        }
        let (arrivals, ineligible): (Vec<UserId>, Vec<UserId>) = arrival_order
            .iter()
            .partition(|&&id| instance.standalone_value(id) > instance.bid(id));
        let observed = config.observed_count(arrivals.len());
        let pool: BTreeSet<UserId> = arrivals[..observed].iter().copied().collect();
        let reference = Smart::with_pool(instance, &pool)?.run()?.winners;
        Ok(OnlineAuction {
            instance,
            arrivals,
            ineligible,
            observed,
            state: OnlineState {
                reference,
                cursor: observed,
                ..OnlineState::default()
            },
            log: Vec::new(),
        })
    }

    pub fn state(&self) -> &OnlineState {
        &self.state
    }

    pub fn arrivals(&self) -> &[UserId] {
        &self.arrivals
    }

    /// Users rejected up front because their bid is at least their value.
    pub fn ineligible(&self) -> &[UserId] {
        &self.ineligible
    }

    pub fn observed(&self) -> usize {
        self.observed
    }

    pub fn log(&self) -> &[ArrivalRecord] {
        &self.log
    }

    pub fn is_finished(&self) -> bool {
        self.state.cursor >= self.arrivals.len()
            || self.state.winners.len() >= self.instance.task_count()
    }

    /// Decides the next arrival, then cleans up the reference set.
    pub fn process_next(&mut self) -> Option<&ArrivalRecord> {
        if self.is_finished() {
            return None;
        }
        let instance = self.instance;
        let i = self.arrivals[self.state.cursor];
        self.state.cursor += 1;

        let margin = instance.cover(&self.state.reference).marginal(i) - instance.bid(i);
        let decision = if self.state.reference.len() < instance.task_count() && margin > 0 {
            let payment = self
                .state
                .add_user(instance, i)
                .expect("add_user preconditions checked above");
            Decision::Added { payment }
        } else {
            match self
                .state
                .try_to_replace(instance, i)
                .expect("arrival ids are validated")
            {
                Some((replaced, payment)) => Decision::Replaced { replaced, payment },
                None => Decision::Rejected,
            }
        };
        let removed_references = self.state.remove_bad_reference_users(instance);
        self.log.push(ArrivalRecord {
            user: i,
            decision,
            removed_references,
            reference: self.state.reference.clone(),
            winners: self.state.winners.clone(),
            utility: self.state.utility(instance),
        });
        self.log.last()
    }

    pub fn run(mut self) -> OnlineRun {
        let initial_reference = self.state.reference.clone();
        while self.process_next().is_some() {}
        let outcome = AuctionOutcome::new(
            self.instance,
            self.state.winners.clone(),
            self.state.payments.clone(),
        )
        .expect("every online winner has a payment");
        OnlineRun {
            outcome,
            arrivals: self.arrivals,
            observed: self.observed,
            initial_reference,
            log: self.log,
        }
    }
}

/// Observation phase only: the state before the first selection-phase arrival.
pub fn observe(
    instance: &Instance,
    arrival_order: &[UserId],
    config: OnlineConfig,
) -> Result<OnlineState> {
    Ok(OnlineAuction::new(instance, arrival_order, config)?.state)
}

pub fn run_online(
    instance: &Instance,
    arrival_order: &[UserId],
    config: OnlineConfig,
) -> Result<AuctionOutcome> {
    Ok(OnlineAuction::new(instance, arrival_order, config)?
        .run()
        .outcome)
}

pub fn run_online_traced(
    instance: &Instance,
    arrival_order: &[UserId],
    config: OnlineConfig,
) -> Result<OnlineRun> {
    Ok(OnlineAuction::new(instance, arrival_order, config)?.run())
}
