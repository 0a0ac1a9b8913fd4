//! Offline SMART: greedy screening, winner selection with replacement and
//! critical-value payments, then removal of users whose marginal value no
//! longer exceeds their payment.
//!
//! Every argmax over users breaks ties toward the lowest user id, so a run is
//! a pure function of the instance.
//!
//! [`Smart`] runs over a pool of participating users. The free functions use
//! the whole instance as the pool; the online mechanism uses a pool made of
//! the observed arrivals.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{AuctionOutcome, Coverage, Instance, Units, UserId};

/// Replacement threshold γ_i. Finite values may be negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    Finite(Units),
    Infinite,
}

impl Gamma {
    pub fn finite(self) -> Option<Units> {
        match self {
            Gamma::Finite(g) => Some(g),
            Gamma::Infinite => None,
        }
    }
}

/// Entry payment β_i: the largest bid with which a user still enters the
/// screening set. Users never screened carry `Infinite`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Beta {
    Finite(Units),
    Infinite,
}

impl Beta {
    pub fn finite(self) -> Option<Units> {
        match self {
            Beta::Finite(b) => Some(b),
            Beta::Infinite => None,
        }
    }
}

/// Screened users in entry order, with the margin v_i(S) − b_i each had when
/// it entered.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ScreeningResult {
    order: Vec<UserId>,
    margins: Vec<Units>,
}

impl ScreeningResult {
    pub fn order(&self) -> &[UserId] {
        &self.order
    }

    pub fn entry_margins(&self) -> &[Units] {
        &self.margins
    }

    /// Zero-based round in which the user entered, if it did.
    pub fn entry_round(&self, id: UserId) -> Option<usize> {
        self.order.iter().position(|&u| u == id)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn to_set(&self) -> BTreeSet<UserId> {
        self.order.iter().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NextBest {
    pub candidate: Option<UserId>,
    pub gamma: Gamma,
}

/// What the winner-selection phase did with one screened user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "action")]
pub enum Selection {
    /// Kept and paid its replacement threshold γ_i.
    PayThreshold { payment: Units },
    /// Swapped out for the next best user, who is paid inside the swap.
    Replaced {
        by: UserId,
        replacement_gamma: Gamma,
        payment: Units,
    },
    /// Kept and paid min(v_i(T \ {i}), β_i).
    PayMarginal { payment: Units },
    /// Dropped without replacement.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionStep {
    pub user: UserId,
    pub candidate: Option<UserId>,
    pub gamma: Gamma,
    pub sigma: Units,
    pub beta: Beta,
    pub selection: Selection,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct WinnerSelection {
    pub winners: BTreeSet<UserId>,
    pub payments: BTreeMap<UserId, Units>,
    pub steps: Vec<SelectionStep>,
    /// Entry payments after the phase. Unscreened users and users picked as
    /// replacement candidates are `Infinite`.
    pub beta_table: BTreeMap<UserId, Beta>,
}

/// Winners and payments kept by the cleanup, and the users it removed.
pub type Pruned = (BTreeSet<UserId>, BTreeMap<UserId, Units>, Vec<UserId>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SmartTrace {
    pub screening: ScreeningResult,
    pub selection: WinnerSelection,
    /// Users dropped by the final cleanup, in removal order.
    pub removed: Vec<UserId>,
    pub outcome: AuctionOutcome,
}

/// SMART over a fixed pool of participating users.
#[derive(Debug, Clone)]
pub struct Smart<'a> {
    instance: &'a Instance,
    pool: Vec<UserId>,
}

impl<'a> Smart<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        Smart {
            instance,
            pool: instance.user_ids().collect(),
        }
    }

    /// Restricts the auction to `pool`; other users do not exist for it.
    pub fn with_pool(instance: &'a Instance, pool: &BTreeSet<UserId>) -> Result<Self> {
        for &id in pool {
            instance.check(id)?;
        }
        Ok(Smart {
            instance,
            pool: pool.iter().copied().collect(),
        })
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    fn check_member(&self, op: &'static str, id: UserId) -> Result<()> {
        self.instance.check(id)?;
        if self.pool.binary_search(&id).is_err() {
            return Err(Error::precondition(
                op,
                format!("user {id} is not in the pool"),
            ));
        }
        Ok(())
    }

    /// argmax over `candidates` of v_k(S) − b_k, lowest id on ties.
    fn best_margin(
        &self,
        coverage: &Coverage<'_>,
        candidates: impl Iterator<Item = UserId>,
    ) -> Option<(UserId, Units)> {
        let mut best: Option<(UserId, Units)> = None;
        for k in candidates {
            let margin = coverage.marginal(k) - self.instance.bid(k);
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((k, margin));
            }
        }
        best
    }

    pub fn screen(&self) -> ScreeningResult {
        let mut result = ScreeningResult::default();
        let mut chosen = BTreeSet::new();
        let mut coverage = Coverage::empty(self.instance);
        while chosen.len() < self.pool.len() {
            let rest = self.pool.iter().copied().filter(|k| !chosen.contains(k));
            match self.best_margin(&coverage, rest) {
                Some((i, margin)) if margin > 0 => {
                    chosen.insert(i);
                    coverage.insert(i);
                    result.order.push(i);
                    result.margins.push(margin);
                }
                _ => break,
            }
        }
        result
    }

    fn next_best_unchecked(&self, i: UserId, winners: &BTreeSet<UserId>) -> NextBest {
        let rest = self.instance.cover(winners.iter().filter(|&&k| k != i));
        let outsiders = self.pool.iter().copied().filter(|k| !winners.contains(k));
        match self.best_margin(&rest, outsiders) {
            Some((j, margin)) if margin > 0 => NextBest {
                candidate: Some(j),
                gamma: Gamma::Finite(rest.marginal(i) - rest.marginal(j) + self.instance.bid(j)),
            },
            _ => NextBest {
                candidate: None,
                gamma: Gamma::Infinite,
            },
        }
    }

    /// Best outsider to take `i`'s place in `winners`, and the threshold bid
    /// γ_i above which swapping them raises utility.
    pub fn next_best_user(&self, i: UserId, winners: &BTreeSet<UserId>) -> Result<NextBest> {
        self.check_member("next_best_user", i)?;
        if !winners.contains(&i) {
            return Err(Error::precondition(
                "next_best_user",
                format!("user {i} is not in the winner set"),
            ));
        }
        for &id in winners {
            self.check_member("next_best_user", id)?;
        }
        Ok(self.next_best_unchecked(i, winners))
    }

    fn entry_payment_unchecked(&self, i: UserId) -> Units {
        let bid = self.instance.bid(i);
        let mut competitors: Vec<UserId> = self.pool.iter().copied().filter(|&k| k != i).collect();
        let mut running = Coverage::empty(self.instance);
        let mut beta: Units = 0;
        loop {
            let own = running.marginal(i);
            if own <= bid {
                return beta;
            }
            match self.best_margin(&running, competitors.iter().copied()) {
                Some((j, margin)) if margin > 0 => {
                    beta = beta.max(own - margin);
                    running.insert(j);
                    competitors.retain(|&k| k != j);
                }
                // No competitor would enter: `i` gets in with any bid below
                // its current marginal.
                _ => return beta.max(own),
            }
        }
    }

    /// β_i from a screening replay without `i`.
    pub fn user_entry_payment(&self, i: UserId) -> Result<Beta> {
        self.check_member("user_entry_payment", i)?;
        Ok(Beta::Finite(self.entry_payment_unchecked(i)))
    }

    fn replace_unchecked(
        &self,
        winners: &BTreeSet<UserId>,
        i: UserId,
        j: UserId,
    ) -> (BTreeSet<UserId>, Gamma, Units) {
        let mut next = winners.clone();
        next.remove(&i);
        next.insert(j);
        let gamma = self.next_best_unchecked(j, &next).gamma;
        let own = self
            .instance
            .cover(next.iter().filter(|&&k| k != j))
            .marginal(j);
        let payment = match gamma {
            Gamma::Finite(g) if g < own => g,
            _ => own,
        };
        (next, gamma, payment)
    }

    /// Swaps `i` out for `j` and prices `j` against the new set.
    pub fn replace_user(
        &self,
        winners: &BTreeSet<UserId>,
        i: UserId,
        j: UserId,
    ) -> Result<(BTreeSet<UserId>, Units)> {
        self.check_member("replace_user", i)?;
        self.check_member("replace_user", j)?;
        if !winners.contains(&i) {
            return Err(Error::precondition(
                "replace_user",
                format!("user {i} is not in the winner set"),
            ));
        }
        if winners.contains(&j) {
            return Err(Error::precondition(
                "replace_user",
                format!("user {j} is already in the winner set"),
            ));
        }
        let (next, _, payment) = self.replace_unchecked(winners, i, j);
        Ok((next, payment))
    }

    pub fn winner_selection(&self, screening: &ScreeningResult) -> Result<WinnerSelection> {
        for &id in screening.order() {
            self.check_member("winner_selection", id)?;
        }
        let mut out = WinnerSelection {
            winners: screening.to_set(),
            beta_table: self.pool.iter().map(|&k| (k, Beta::Infinite)).collect(),
            ..WinnerSelection::default()
        };
        // Users brought in by replacement are priced on entry and not
        // revisited; the loop walks the frozen screening order.
        for &i in screening.order() {
            if !out.winners.contains(&i) {
                continue;
            }
            let NextBest { candidate, gamma } = self.next_best_unchecked(i, &out.winners);
            if let Some(j) = candidate {
                out.beta_table.insert(j, Beta::Infinite);
            }
            let bid = self.instance.bid(i);
            let own = self
                .instance
                .cover(out.winners.iter().filter(|&&k| k != i))
                .marginal(i);
            let sigma = own - bid;
            let beta = self.entry_payment_unchecked(i);
            out.beta_table.insert(i, Beta::Finite(beta));

            let selection = match (sigma > 0, gamma, candidate) {
                (true, Gamma::Finite(g), _) if g >= bid && g <= beta => {
                    Selection::PayThreshold { payment: g }
                }
                (true, Gamma::Finite(g), Some(j)) if g < bid && g <= beta => {
                    self.swap(&mut out, i, j)
                }
                (true, _, _) => Selection::PayMarginal {
                    payment: (sigma + bid).min(beta),
                },
                (false, Gamma::Finite(_), Some(j)) => self.swap(&mut out, i, j),
                (false, _, _) => {
                    out.winners.remove(&i);
                    out.payments.remove(&i);
                    Selection::Dropped
                }
            };
            match selection {
                Selection::PayThreshold { payment } | Selection::PayMarginal { payment } => {
                    out.payments.insert(i, payment);
                }
                Selection::Replaced { .. } | Selection::Dropped => {}
            }
            out.steps.push(SelectionStep {
                user: i,
                candidate,
                gamma,
                sigma,
                beta: Beta::Finite(beta),
                selection,
            });
        }
        Ok(out)
    }

    fn swap(&self, out: &mut WinnerSelection, i: UserId, j: UserId) -> Selection {
        let (next, replacement_gamma, payment) = self.replace_unchecked(&out.winners, i, j);
        out.winners = next;
        out.payments.remove(&i);
        out.payments.insert(j, payment);
        Selection::Replaced {
            by: j,
            replacement_gamma,
            payment,
        }
    }

    /// Drops, in ascending id order against the shrinking set, every winner
    /// whose marginal value does not exceed its payment.
    pub fn remove_bad_users(
        &self,
        winners: &BTreeSet<UserId>,
        payments: &BTreeMap<UserId, Units>,
    ) -> Result<Pruned> {
        for &id in winners {
            self.check_member("remove_bad_users", id)?;
            if !payments.contains_key(&id) {
                return Err(Error::precondition(
                    "remove_bad_users",
                    format!("no payment for winner {id}"),
                ));
            }
        }
        let mut kept = winners.clone();
        let mut pay = payments.clone();
        let mut removed = Vec::new();
        for &i in winners {
            let own = self
                .instance
                .cover(kept.iter().filter(|&&k| k != i))
                .marginal(i);
            if own - pay[&i] <= 0 {
                kept.remove(&i);
                pay.remove(&i);
                removed.push(i);
            }
        }
        pay.retain(|id, _| kept.contains(id));
        Ok((kept, pay, removed))
    }

    pub fn run_traced(&self) -> Result<SmartTrace> {
        let screening = self.screen();
        let selection = self.winner_selection(&screening)?;
        let (winners, payments, removed) =
            self.remove_bad_users(&selection.winners, &selection.payments)?;
        let outcome = AuctionOutcome::new(self.instance, winners, payments)?;
        Ok(SmartTrace {
            screening,
            selection,
            removed,
            outcome,
        })
    }

    pub fn run(&self) -> Result<AuctionOutcome> {
        Ok(self.run_traced()?.outcome)
    }
}

pub fn screen_users(instance: &Instance) -> ScreeningResult {
    Smart::new(instance).screen()
}

pub fn next_best_user(
    instance: &Instance,
    i: UserId,
    winners: &BTreeSet<UserId>,
) -> Result<NextBest> {
    Smart::new(instance).next_best_user(i, winners)
}

pub fn user_entry_payment(instance: &Instance, i: UserId) -> Result<Beta> {
    Smart::new(instance).user_entry_payment(i)
}

pub fn replace_user(
    instance: &Instance,
    winners: &BTreeSet<UserId>,
    i: UserId,
    j: UserId,
) -> Result<(BTreeSet<UserId>, Units)> {
    Smart::new(instance).replace_user(winners, i, j)
}

pub fn winner_selection(
    instance: &Instance,
    screening: &ScreeningResult,
) -> Result<WinnerSelection> {
    Smart::new(instance).winner_selection(screening)
}

pub fn remove_bad_users(
    instance: &Instance,
    winners: &BTreeSet<UserId>,
    payments: &BTreeMap<UserId, Units>,
) -> Result<(BTreeSet<UserId>, BTreeMap<UserId, Units>)> {
    let (kept, pay, _) = Smart::new(instance).remove_bad_users(winners, payments)?;
    Ok((kept, pay))
}

pub fn run_smart(instance: &Instance) -> AuctionOutcome {
    Smart::new(instance)
        .run()
        .expect("SMART over a validated instance cannot violate its own preconditions")
}

pub fn run_smart_traced(instance: &Instance) -> SmartTrace {
    Smart::new(instance)
        .run_traced()
        .expect("SMART over a validated instance cannot violate its own preconditions")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{single_user, walkthrough};
    use crate::model::users;

    fn ids(raw: &[u32]) -> Vec<UserId> {
        raw.iter().map(|&i| UserId(i)).collect()
    }

    #[test]
    fn screening() {
        let fix = walkthrough();
        let s = screen_users(&fix);
        assert_eq!(s.order(), ids(&[1, 3, 2]));
        assert_eq!(s.entry_margins(), [25, 3, 2]);
        assert_eq!(s.entry_round(UserId(2)), Some(2));

        let empty = Instance::from_parts(Vec::<i64>::new(), Vec::new()).unwrap();
        assert!(screen_users(&empty).is_empty());
        assert_eq!(screen_users(&single_user()).order(), ids(&[1]));
    }

    #[test]
    fn next_best() {
        let fix = walkthrough();
        assert_eq!(
            next_best_user(&fix, UserId(1), &users(&[1, 3, 2])).unwrap(),
            NextBest {
                candidate: Some(UserId(5)),
                gamma: Gamma::Finite(2)
            }
        );
        assert_eq!(
            next_best_user(&fix, UserId(3), &users(&[5, 3, 2])).unwrap(),
            NextBest {
                candidate: Some(UserId(4)),
                gamma: Gamma::Finite(15)
            }
        );
        assert_eq!(
            next_best_user(&single_user(), UserId(1), &users(&[1])).unwrap(),
            NextBest {
                candidate: None,
                gamma: Gamma::Infinite
            }
        );
        assert!(matches!(
            next_best_user(&fix, UserId(4), &users(&[1, 3, 2])),
            Err(Error::Precondition { .. })
        ));
    }

    #[test]
    fn entry_payments() {
        let fix = walkthrough();
        assert_eq!(
            user_entry_payment(&fix, UserId(1)).unwrap(),
            Beta::Finite(15)
        );
        assert_eq!(
            user_entry_payment(&fix, UserId(2)).unwrap(),
            Beta::Finite(8)
        );
        assert_eq!(
            user_entry_payment(&fix, UserId(3)).unwrap(),
            Beta::Finite(7)
        );
        // no competitors: any bid below v_1 = 10 gets in
        assert_eq!(
            user_entry_payment(&single_user(), UserId(1)).unwrap(),
            Beta::Finite(10)
        );
    }

    #[test]
    fn replacement() {
        let fix = walkthrough();
        let (next, pay) = replace_user(&fix, &users(&[1, 3, 2]), UserId(1), UserId(5)).unwrap();
        assert_eq!(next, users(&[5, 3, 2]));
        assert_eq!(pay, 8);

        // γ_2 = v_2(∅) − v_1(∅) + b_1 = 10 − 10 + 9 = 9 < v_2(∅) = 10
        let two = Instance::from_parts([10, 10], [(vec![0], 9), (vec![1], 1)]).unwrap();
        let (next, pay) = replace_user(&two, &users(&[1]), UserId(1), UserId(2)).unwrap();
        assert_eq!(next, users(&[2]));
        assert_eq!(pay, 9);

        // the displaced user is the only outsider and its margin is not
        // positive, so γ_2 is infinite and user 2 is paid v_2(T' \ {2})
        let solo = Instance::from_parts([10, 4], [(vec![0], 12), (vec![0, 1], 2)]).unwrap();
        let (next, pay) = replace_user(&solo, &users(&[1]), UserId(1), UserId(2)).unwrap();
        assert_eq!(next, users(&[2]));
        assert_eq!(pay, 14);

        assert!(replace_user(&fix, &users(&[1, 3, 2]), UserId(4), UserId(5)).is_err());
        assert!(replace_user(&fix, &users(&[1, 3, 2]), UserId(1), UserId(3)).is_err());
    }

    #[test]
    fn winner_selection_walkthrough() {
        let fix = walkthrough();
        let sel = winner_selection(&fix, &screen_users(&fix)).unwrap();
        assert_eq!(sel.winners, users(&[2, 3, 5]));
        assert_eq!(
            sel.payments,
            [(UserId(2), 8), (UserId(3), 7), (UserId(5), 8)].into()
        );

        let gammas: Vec<Gamma> = sel.steps.iter().map(|s| s.gamma).collect();
        assert_eq!(
            gammas,
            [Gamma::Finite(2), Gamma::Finite(15), Gamma::Finite(16)]
        );
        assert_eq!(
            sel.steps[0].selection,
            Selection::Replaced {
                by: UserId(5),
                replacement_gamma: Gamma::Finite(8),
                payment: 8
            }
        );
        assert_eq!(
            sel.steps[1].selection,
            Selection::PayMarginal { payment: 7 }
        );
        assert_eq!(
            sel.steps[2].selection,
            Selection::PayMarginal { payment: 8 }
        );
        // user 1 was picked as user 2's candidate, so its β is reset
        assert_eq!(sel.beta_table[&UserId(1)], Beta::Infinite);
        assert_eq!(sel.beta_table[&UserId(3)], Beta::Finite(7));
    }

    #[test]
    fn winner_selection_edges() {
        let one = single_user();
        let sel = winner_selection(&one, &screen_users(&one)).unwrap();
        assert_eq!(sel.winners, users(&[1]));
        assert_eq!(sel.payments[&UserId(1)], 10);

        let sel = winner_selection(&one, &ScreeningResult::default()).unwrap();
        assert!(sel.winners.is_empty() && sel.payments.is_empty());
    }

    #[test]
    fn bad_user_removal() {
        let fix = walkthrough();
        let pay: BTreeMap<_, _> = [(UserId(2), 8), (UserId(3), 7), (UserId(5), 8)].into();
        let (t, p) = remove_bad_users(&fix, &users(&[2, 3, 5]), &pay).unwrap();
        assert_eq!(t, users(&[2, 3, 5]));
        assert_eq!(p, pay);

        let one = single_user();
        let (t, p) = remove_bad_users(&one, &users(&[1]), &[(UserId(1), 10)].into()).unwrap();
        assert!(t.is_empty() && p.is_empty());

        let (t, p) = remove_bad_users(&one, &users(&[]), &BTreeMap::new()).unwrap();
        assert!(t.is_empty() && p.is_empty());

        assert!(remove_bad_users(&one, &users(&[1]), &BTreeMap::new()).is_err());
    }

    #[test]
    fn removal_is_sequential() {
        // Users 1 and 2 both cover the only task. Against the full set each
        // adds nothing, so user 1 is dropped; user 2 is then tested alone.
        let inst = Instance::from_parts([10], [(vec![0], 1), (vec![0], 1)]).unwrap();
        let pay: BTreeMap<_, _> = [(UserId(1), 3), (UserId(2), 3)].into();
        let (t, _) = remove_bad_users(&inst, &users(&[1, 2]), &pay).unwrap();
        assert_eq!(t, users(&[2]));
    }

    #[test]
    fn full_runs() {
        let fix = walkthrough();
        let out = run_smart(&fix);
        assert_eq!(out.winners, users(&[2, 3, 5]));
        assert_eq!(out.payment(UserId(2)), 8);
        assert_eq!(out.payment(UserId(3)), 7);
        assert_eq!(out.payment(UserId(5)), 8);
        assert_eq!(out.payment(UserId(1)), 0);
        assert_eq!(out.utility, 27);

        let empty = Instance::from_parts(Vec::<i64>::new(), Vec::new()).unwrap();
        assert_eq!(run_smart(&empty), AuctionOutcome::default());

        // p_1 = β_1 = v_1, so the cleanup removes the only winner
        assert_eq!(run_smart(&single_user()), AuctionOutcome::default());
    }

    #[test]
    fn pool_restriction() {
        let fix = walkthrough();
        let pool = users(&[1, 2]);
        let smart = Smart::with_pool(&fix, &pool).unwrap();
        assert_eq!(smart.screen().order(), ids(&[1, 2]));
        assert!(smart.user_entry_payment(UserId(3)).is_err());
    }
}
