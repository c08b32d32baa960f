use std::collections::BTreeMap;

use thiserror::Error;

use crate::message::ProtocolMessage;
use crate::types::Address;

use super::state::ChainState;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PoolError {
    #[error("message already pooled for this sender and nonce")]
    Duplicate,
    #[error("sender has too many pending messages")]
    AccountFull,
    #[error("signature or sender mismatch")]
    NotAuthentic,
    #[error("external updates belong in the event buffer")]
    WrongKind,
    #[error("nonce already used")]
    Stale,
}

/// Pending account messages, keyed by sender and nonce.
#[derive(Clone, Debug)]
pub struct TxPool {
    by_sender: BTreeMap<Address, BTreeMap<u64, ProtocolMessage>>,
    len: usize,
    max_per_account: usize,
}

impl Default for TxPool {
    fn default() -> Self {
        Self::new(16)
    }
}

impl TxPool {
    pub fn new(max_per_account: usize) -> Self {
        Self { by_sender: BTreeMap::new(), len: 0, max_per_account }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn pending_for(&self, sender: &Address) -> usize {
        self.by_sender.get(sender).map_or(0, |q| q.len())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ProtocolMessage> {
        self.by_sender.values().flat_map(|q| q.values())
    }

    pub fn senders(&self) -> impl Iterator<Item = (&Address, &BTreeMap<u64, ProtocolMessage>)> {
        self.by_sender.iter()
    }

    pub fn insert(&mut self, msg: ProtocolMessage) -> Result<(), PoolError> {
        if msg.as_update().is_some() {
            return Err(PoolError::WrongKind);
        }
        if !msg.is_authentic() {
            return Err(PoolError::NotAuthentic);
        }
        let q = self.by_sender.entry(msg.sender).or_default();
        if q.contains_key(&msg.sender_nonce) {
            return Err(PoolError::Duplicate);
        }
        if q.len() >= self.max_per_account {
            return Err(PoolError::AccountFull);
        }
        q.insert(msg.sender_nonce, msg);
        self.len += 1;
        Ok(())
    }

    /// Inserts against a chain state, rejecting already-used nonces.
    pub fn insert_checked(&mut self, msg: ProtocolMessage, chain: &ChainState) -> Result<(), PoolError> {
        if msg.sender_nonce < chain.nonce(&msg.sender) {
            return Err(PoolError::Stale);
        }
        self.insert(msg)
    }

    pub fn remove(&mut self, sender: &Address, nonce: u64) -> Option<ProtocolMessage> {
        let q = self.by_sender.get_mut(sender)?;
        let out = q.remove(&nonce);
        if out.is_some() {
            self.len -= 1;
        }
        if q.is_empty() {
            self.by_sender.remove(sender);
        }
        out
    }

    /// Drops messages whose nonce is already used in `chain`.
    pub fn purge_stale(&mut self, chain: &ChainState) {
        let mut removed = 0;
        self.by_sender.retain(|sender, q| {
            let n = chain.nonce(sender);
            let before = q.len();
            q.retain(|k, _| *k >= n);
            removed += before - q.len();
            !q.is_empty()
        });
        self.len -= removed;
    }
}
