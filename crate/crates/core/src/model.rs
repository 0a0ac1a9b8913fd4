//! Auction ground truth: task catalog, user profiles and the coverage-value
//! algebra every mechanism is built on.
//!
//! Values, bids and payments are exact integers ("value-units"). They are
//! carried as `i64` so that signed quantities such as marginal utilities and
//! replacement thresholds need no casts; construction rejects negative task
//! values and non-positive bids.
//!
//! The value of a user set is the summed value of the union of its members'
//! task sets. All mechanisms reach it only through [`Instance::coverage_value`],
//! [`Instance::marginal_value`] and the [`Coverage`] accumulator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer value-units.
pub type Units = i64;

/// 1-based user identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl UserId {
    fn index(self) -> usize {
        (self.0 as usize).wrapping_sub(1)
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for UserId {
    fn from(id: u32) -> Self {
        UserId(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: u32,
    pub value: Units,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskCatalog {
    tasks: Vec<Task>,
}

impl TaskCatalog {
    pub fn new(tasks: Vec<Task>) -> Result<Self> {
        for (position, task) in tasks.iter().enumerate() {
            if task.id as usize != position {
                return Err(Error::TaskIdOutOfSequence {
                    position,
                    id: task.id,
                });
            }
            if task.value < 0 {
                return Err(Error::NegativeTaskValue {
                    position,
                    value: task.value,
                });
            }
        }
        Ok(TaskCatalog { tasks })
    }

    /// Catalog with task ids assigned in order.
    pub fn from_values(values: impl IntoIterator<Item = Units>) -> Result<Self> {
        let tasks = values
            .into_iter()
            .enumerate()
            .map(|(id, value)| Task {
                id: id as u32,
                value,
            })
            .collect();
        TaskCatalog::new(tasks)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn value(&self, task: u32) -> Units {
        self.tasks[task as usize].value
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: UserId,
    /// Task ids this user performs, in the order they were declared.
    pub tasks: Vec<u32>,
    pub bid: Units,
}

/// A validated auction instance: the catalog plus every user's profile.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct Instance {
    catalog: TaskCatalog,
    users: Vec<UserProfile>,
    masks: Vec<FixedBitSet>,
}

/// On-disk shape of an instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    tasks: Vec<Task>,
    users: Vec<UserProfile>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        Instance::new(TaskCatalog::new(file.tasks)?, file.users)
    }
}

impl From<Instance> for InstanceFile {
    fn from(instance: Instance) -> Self {
        InstanceFile {
            tasks: instance.catalog.tasks,
            users: instance.users,
        }
    }
}

impl Instance {
    pub fn new(catalog: TaskCatalog, users: Vec<UserProfile>) -> Result<Self> {
        let m = catalog.len();
        let mut masks = Vec::with_capacity(users.len());
        for (position, user) in users.iter().enumerate() {
            let expected = position as u32 + 1;
            if user.id.0 != expected {
                return Err(Error::UserIdOutOfSequence {
                    position,
                    expected,
                    id: user.id.0,
                });
            }
            if user.tasks.is_empty() {
                return Err(Error::EmptyTaskSet { position });
            }
            if user.bid <= 0 {
                return Err(Error::NonPositiveBid {
                    position,
                    bid: user.bid,
                });
            }
            let mut mask = FixedBitSet::with_capacity(m);
            for &task in &user.tasks {
                if task as usize >= m {
                    return Err(Error::UnknownTask { position, task });
                }
                if mask.put(task as usize) {
                    return Err(Error::DuplicateTask { position, task });
                }
            }
            masks.push(mask);
        }
        Ok(Instance {
            catalog,
            users,
            masks,
        })
    }

    /// Builds an instance from task values and `(tasks, bid)` pairs; user ids
    /// are assigned 1..n in order.
    pub fn from_parts(
        values: impl IntoIterator<Item = Units>,
        users: impl IntoIterator<Item = (Vec<u32>, Units)>,
    ) -> Result<Self> {
        let users = users
            .into_iter()
            .enumerate()
            .map(|(i, (tasks, bid))| UserProfile {
                id: UserId(i as u32 + 1),
                tasks,
                bid,
            })
            .collect();
        Instance::new(TaskCatalog::from_values(values)?, users)
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Compact canonical JSON; `from_json(to_json(x)) == x` and the text is a
    /// fixed point of parse-then-print.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serialization is infallible")
    }

    pub fn catalog(&self) -> &TaskCatalog {
        &self.catalog
    }

    pub fn users(&self) -> &[UserProfile] {
        &self.users
    }

    /// Number of users (n).
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    /// Number of tasks (m).
    pub fn task_count(&self) -> usize {
        self.catalog.len()
    }

    pub fn user_ids(&self) -> impl DoubleEndedIterator<Item = UserId> {
        (1..self.users.len() as u32 + 1).map(UserId)
    }

    pub fn contains(&self, id: UserId) -> bool {
        id.0 >= 1 && id.index() < self.users.len()
    }

    pub fn check(&self, id: UserId) -> Result<()> {
        if self.contains(id) {
            Ok(())
        } else {
            Err(Error::UnknownUser(id))
        }
    }

    pub fn user(&self, id: UserId) -> Result<&UserProfile> {
        self.check(id)?;
        Ok(&self.users[id.index()])
    }

    /// Bid of a known user. Panics on an unknown id.
    pub fn bid(&self, id: UserId) -> Units {
        self.users[id.index()].bid
    }

    /// v_i: value of everything the user performs.
    pub fn standalone_value(&self, id: UserId) -> Units {
        self.masks[id.index()]
            .ones()
            .map(|t| self.catalog.tasks[t].value)
            .sum()
    }

    /// Copy of this instance with one user's bid replaced.
    pub fn with_bid(&self, id: UserId, bid: Units) -> Result<Instance> {
        self.check(id)?;
        if bid <= 0 {
            return Err(Error::NonPositiveBid {
                position: id.index(),
                bid,
            });
        }
        let mut next = self.clone();
        next.users[id.index()].bid = bid;
        Ok(next)
    }

    /// Coverage accumulator seeded with `users`. Ids must already be valid.
    pub fn cover<'a>(&self, users: impl IntoIterator<Item = &'a UserId>) -> Coverage<'_> {
        let mut coverage = Coverage::empty(self);
        for &id in users {
            coverage.insert(id);
        }
        coverage
    }

    fn checked_cover<'a>(
        &self,
        users: impl IntoIterator<Item = &'a UserId>,
    ) -> Result<Coverage<'_>> {
        let mut coverage = Coverage::empty(self);
        for &id in users {
            self.check(id)?;
            coverage.insert(id);
        }
        Ok(coverage)
    }

    /// v(S): value of the union of the users' task sets.
    pub fn coverage_value<'a>(&self, users: impl IntoIterator<Item = &'a UserId>) -> Result<Units> {
        Ok(self.checked_cover(users)?.value())
    }

    /// v_i(S) = v(S ∪ {i}) − v(S); zero when `i` is already in `S`.
    pub fn marginal_value<'a>(
        &self,
        i: UserId,
        set: impl IntoIterator<Item = &'a UserId>,
    ) -> Result<Units> {
        self.check(i)?;
        Ok(self.checked_cover(set)?.marginal(i))
    }

    /// u(S) = v(S) − Σ p_i over the winners. May be negative.
    pub fn platform_utility<'a>(
        &self,
        winners: impl IntoIterator<Item = &'a UserId>,
        payments: &BTreeMap<UserId, Units>,
    ) -> Result<Units> {
        let winners: Vec<UserId> = winners.into_iter().copied().collect();
        let value = self.coverage_value(&winners)?;
        let mut paid = 0;
        for id in &winners {
            paid += payments.get(id).copied().ok_or_else(|| {
                Error::precondition("platform_utility", format!("no payment for winner {id}"))
            })?;
        }
        Ok(value - paid)
    }

    /// u_i(S) = v_i(S) − p_i.
    pub fn marginal_utility<'a>(
        &self,
        i: UserId,
        set: impl IntoIterator<Item = &'a UserId>,
        payment: Units,
    ) -> Result<Units> {
        Ok(self.marginal_value(i, set)? - payment)
    }

    /// σ_i(T) = v_i(T \ {i}) − b_i, defined whether or not `i` is in `T`.
    pub fn sigma<'a>(&self, i: UserId, set: impl IntoIterator<Item = &'a UserId>) -> Result<Units> {
        self.check(i)?;
        let mut rest = Vec::new();
        for &id in set {
            self.check(id)?;
            if id != i {
                rest.push(id);
            }
        }
        Ok(self.cover(&rest).marginal(i) - self.bid(i))
    }
}

/// Running union of covered tasks for a user set.
#[derive(Debug, Clone)]
pub struct Coverage<'a> {
    instance: &'a Instance,
    covered: FixedBitSet,
    value: Units,
}

impl<'a> Coverage<'a> {
    pub fn empty(instance: &'a Instance) -> Self {
        Coverage {
            instance,
            covered: FixedBitSet::with_capacity(instance.task_count()),
            value: 0,
        }
    }

    pub fn value(&self) -> Units {
        self.value
    }

    /// Value the user would add: its tasks not yet covered.
    pub fn marginal(&self, id: UserId) -> Units {
        let tasks = &self.instance.catalog.tasks;
        self.instance.masks[id.index()]
            .difference(&self.covered)
            .map(|t| tasks[t].value)
            .sum()
    }

    pub fn insert(&mut self, id: UserId) {
        self.value += self.marginal(id);
        self.covered.union_with(&self.instance.masks[id.index()]);
    }
}

/// Winners, their payments and the platform utility of one auction run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub winners: BTreeSet<UserId>,
    /// Payments to winners; every other user is paid zero.
    pub payments: BTreeMap<UserId, Units>,
    pub utility: Units,
}

impl AuctionOutcome {
    /// Assembles an outcome, dropping payment entries for non-winners and
    /// computing the utility from the instance.
    pub fn new(
        instance: &Instance,
        winners: BTreeSet<UserId>,
        mut payments: BTreeMap<UserId, Units>,
    ) -> Result<Self> {
        payments.retain(|id, _| winners.contains(id));
        let utility = instance.platform_utility(&winners, &payments)?;
        Ok(AuctionOutcome {
            winners,
            payments,
            utility,
        })
    }

    pub fn payment(&self, id: UserId) -> Units {
        self.payments.get(&id).copied().unwrap_or(0)
    }

    pub fn is_winner(&self, id: UserId) -> bool {
        self.winners.contains(&id)
    }

    pub fn total_payment(&self) -> Units {
        self.payments.values().sum()
    }
}

/// Shorthand for building user-id sets in code and tests.
pub fn users(ids: &[u32]) -> BTreeSet<UserId> {
    ids.iter().map(|&id| UserId(id)).collect()
}
