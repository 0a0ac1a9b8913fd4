//! Truthful reverse-auction mechanisms for smartphone crowd-sourcing.
//!
//! * [`smart`]: the offline SMART mechanism.
//! * [`msensing`]: the M-Sensing baseline (screening set paid entry payments).
//! * [`online`]: ONLINE-SMART for users arriving one at a time.
//! * [`verify`]: property probes and the seeded random battery.
//! * [`sim`]: instance generation and experiment sweeps written as CSV.

pub mod error;
pub mod fixture;
pub mod model;
pub mod msensing;
pub mod online;
pub mod seeding;
pub mod sim;
pub mod smart;
pub mod verify;

pub use error::{Error, Result};
pub use model::{AuctionOutcome, Instance, TaskCatalog, Units, UserId, UserProfile};
