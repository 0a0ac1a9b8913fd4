//! M-Sensing as a baseline: the screening set wins and every winner is paid
//! its entry payment β_i.

use std::collections::BTreeSet;

use crate::error::Result;
use crate::model::{AuctionOutcome, Instance, UserId};
use crate::smart::Smart;

pub fn run_msensing(instance: &Instance) -> AuctionOutcome {
    run_msensing_on(&Smart::new(instance)).expect("validated instance")
}

/// M-Sensing restricted to a pool of users.
pub fn run_msensing_pool(instance: &Instance, pool: &BTreeSet<UserId>) -> Result<AuctionOutcome> {
    run_msensing_on(&Smart::with_pool(instance, pool)?)
}

fn run_msensing_on(smart: &Smart<'_>) -> Result<AuctionOutcome> {
    let screening = smart.screen();
    let mut payments = std::collections::BTreeMap::new();
    for &i in screening.order() {
        let beta = smart
            .user_entry_payment(i)?
            .finite()
            .expect("entry payment of a pool member is finite");
        payments.insert(i, beta);
    }
    AuctionOutcome::new(smart.instance(), screening.to_set(), payments)
}
