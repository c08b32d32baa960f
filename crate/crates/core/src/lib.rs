//! Event-driven smart contract protocol core.

pub mod codec;
pub mod crypto;
pub mod event;
pub mod event_manager;
pub mod event_state;
pub mod ledger;
pub mod matcher;
pub mod merkle;
pub mod message;
pub mod types;

pub use types::{Address, Amount, Gas, HashDigest, Height};
