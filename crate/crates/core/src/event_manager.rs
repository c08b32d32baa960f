//! Event buffer, update validation and trigger synthesis.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Canonical, DecodeError, Reader};
use crate::crypto::verify;
use crate::event::{transfer_event_id, EventUpdate, Origin, Value, TRANSFER_TO_FIELD};
use crate::event_state::EventState;
use crate::matcher::{should_trigger, MatchContext};
use crate::message::{SubscriptionRef, TriggeredExecution};
use crate::types::{Address, Amount, Gas, HashDigest, Height};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimits {
    pub max_updates_per_account_per_epoch: u32,
    /// `k`: triggers synthesized from one update.
    pub max_triggers_per_event_update: u32,
    /// `m`: triggers charged to one subscriber account per epoch.
    pub max_triggers_per_account_per_epoch: u32,
    pub epoch_length: u64,
}

impl Default for RateLimits {
    fn default() -> Self {
        Self {
            max_updates_per_account_per_epoch: 32,
            max_triggers_per_event_update: 64,
            max_triggers_per_account_per_epoch: 16,
            epoch_length: 1,
        }
    }
}

impl RateLimits {
    pub fn epoch_of(&self, height: Height) -> u64 {
        height / self.epoch_length.max(1)
    }
}

/// Per-epoch usage counters. Part of consensus state.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochCounters {
    pub epoch: u64,
    pub updates: BTreeMap<Address, u32>,
    pub triggers: BTreeMap<Address, u32>,
}

impl EpochCounters {
    /// Resets the counters when `height` starts a new epoch.
    pub fn roll(&mut self, height: Height, limits: &RateLimits) {
        let epoch = limits.epoch_of(height);
        if epoch != self.epoch {
            *self = Self { epoch, ..Self::default() };
        }
    }

    pub fn triggers_for(&self, account: &Address) -> u32 {
        self.triggers.get(account).copied().unwrap_or(0)
    }
}

impl Canonical for EpochCounters {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.epoch.encode_to(out);
        for map in [&self.updates, &self.triggers] {
            (map.len() as u32).encode_to(out);
            for (a, n) in map {
                a.encode_to(out);
                n.encode_to(out);
            }
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let epoch = u64::decode_from(r)?;
        let mut maps = [BTreeMap::new(), BTreeMap::new()];
        for map in maps.iter_mut() {
            let n = u32::decode_from(r)?;
            for _ in 0..n {
                let a = Address::decode_from(r)?;
                map.insert(a, u32::decode_from(r)?);
            }
        }
        let [updates, triggers] = maps;
        Ok(Self { epoch, updates, triggers })
    }
}

#[derive(Clone, Copy, Debug, Error, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    #[error("unknown event")]
    UnknownEvent,
    #[error("payload does not match the definition")]
    BadPayload,
    #[error("bad signature")]
    BadSignature,
    #[error("bad nonce")]
    BadNonce,
    #[error("rate limited")]
    RateLimited,
    #[error("buffer full")]
    BufferFull,
    #[error("publisher cannot pay the inclusion fee")]
    InsufficientFee,
}

impl RejectReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RejectReason::UnknownEvent => "UnknownEvent",
            RejectReason::BadPayload => "BadPayload",
            RejectReason::BadSignature => "BadSignature",
            RejectReason::BadNonce => "BadNonce",
            RejectReason::RateLimited => "RateLimited",
            RejectReason::BufferFull => "BufferFull",
            RejectReason::InsufficientFee => "InsufficientFee",
        }
    }
}

/// Checks that do not depend on nonce position or rate counters.
pub fn check_static(update: &EventUpdate, state: &EventState) -> Result<(), RejectReason> {
    let def = state.definition(&update.event_id).ok_or(RejectReason::UnknownEvent)?;
    if !def.accepts(&update.payload) {
        return Err(RejectReason::BadPayload);
    }
    match update.origin {
        Origin::External => {
            let ok = update.publisher_key.address() == update.publisher
                && update
                    .signature
                    .as_ref()
                    .is_some_and(|s| verify(&update.publisher_key, &update.signing_digest(), s));
            if !ok {
                return Err(RejectReason::BadSignature);
            }
        }
        Origin::Internal | Origin::System => {
            if update.signature.is_some() || update.inclusion_fee != 0 {
                return Err(RejectReason::BadSignature);
            }
        }
    }
    Ok(())
}

/// Accepts updates in order, recording nonces and per-epoch counts for the
/// accepted ones only.
pub fn validate_and_filter_evts(
    updates: Vec<EventUpdate>,
    state: &mut EventState,
    limits: &RateLimits,
    counters: &mut EpochCounters,
) -> (Vec<EventUpdate>, Vec<(EventUpdate, RejectReason)>) {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for u in updates {
        match validate_one(&u, state, limits, counters) {
            Ok(()) => {
                state.record_nonce(u.event_id, u.publisher, u.nonce);
                if u.origin != Origin::System {
                    *counters.updates.entry(u.publisher).or_insert(0) += 1;
                }
                accepted.push(u);
            }
            Err(reason) => rejected.push((u, reason)),
        }
    }
    (accepted, rejected)
}

fn validate_one(
    u: &EventUpdate,
    state: &EventState,
    limits: &RateLimits,
    counters: &EpochCounters,
) -> Result<(), RejectReason> {
    check_static(u, state)?;
    if u.nonce != state.last_nonce(&u.event_id, &u.publisher) + 1 {
        return Err(RejectReason::BadNonce);
    }
    if u.origin != Origin::System
        && counters.updates.get(&u.publisher).copied().unwrap_or(0) >= limits.max_updates_per_account_per_epoch
    {
        return Err(RejectReason::RateLimited);
    }
    Ok(())
}

/// Block-level inputs to matching.
#[derive(Clone, Copy, Debug)]
pub struct BlockCtx {
    pub height: Height,
    pub time_secs: i64,
}

/// Eval gas owed by a subscriber at its subscription's gas price.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalCharge {
    pub subscriber: Address,
    pub gas: Gas,
    pub gas_price: Amount,
}

#[derive(Clone, Debug, Default)]
pub struct TriggerBatch {
    pub executions: Vec<TriggeredExecution>,
    pub eval_charges: Vec<EvalCharge>,
}

/// For transaction events only the recipient's own subscriptions match.
pub fn recipient_filter(update: &EventUpdate, transfer_id: &Address) -> Option<Address> {
    if update.event_id != *transfer_id {
        return None;
    }
    update.payload.get(TRANSFER_TO_FIELD).and_then(Value::as_address)
}

/// Walks each update's active subscriptions in priority order and
/// synthesizes executions, honouring `k` per update and `m` per subscriber
/// account per epoch. `state` must already have had `begin_block` applied
/// for `ctx.height`.
pub fn create_tx_based_on_evts(
    state: &mut EventState,
    updates: &[EventUpdate],
    ctx: BlockCtx,
    limits: &RateLimits,
    counters: &mut EpochCounters,
    gas_per_node: Gas,
) -> TriggerBatch {
    let transfer_id = transfer_event_id();
    let mut batch = TriggerBatch::default();
    for u in updates {
        let Some(list) = state.subscriptions.get_mut(&u.event_id) else {
            continue;
        };
        let only = recipient_filter(u, &transfer_id);
        let digest = u.digest();
        let mcx = MatchContext { update: u, block_number: ctx.height, block_time: ctx.time_secs };
        let mut emitted = 0u32;
        for sub in list.iter_mut() {
            if emitted >= limits.max_triggers_per_event_update {
                break;
            }
            if sub.activation_block > ctx.height || only.is_some_and(|to| to != sub.subscriber) {
                continue;
            }
            if counters.triggers_for(&sub.subscriber) >= limits.max_triggers_per_account_per_epoch {
                continue;
            }
            let d = should_trigger(sub, &mcx, gas_per_node);
            if d.counts_instance() {
                sub.instance_counter += 1;
            }
            if d.eval_gas > 0 {
                batch.eval_charges.push(EvalCharge {
                    subscriber: sub.subscriber,
                    gas: d.eval_gas,
                    gas_price: sub.params.gas_price,
                });
            }
            if !d.trigger {
                continue;
            }
            sub.last_trigger_block = Some(ctx.height);
            *counters.triggers.entry(sub.subscriber).or_insert(0) += 1;
            emitted += 1;
            batch.executions.push(TriggeredExecution {
                subscription: SubscriptionRef {
                    event_id: sub.event_id,
                    subscriber: sub.subscriber,
                    ordinal: sub.ordinal,
                },
                triggering_update: digest,
                publisher: u.publisher,
                payload: u.payload.clone(),
                gas_price: sub.params.gas_price,
                gas_limit: sub.params.gas_limit,
                subscription_fee_paid: u.subscription_fee,
                subscriber_data: sub.params.subscriber_data.clone(),
                created_block: ctx.height,
            });
        }
    }
    batch
}

/// Per-node buffer of validated external updates awaiting inclusion.
#[derive(Clone, Debug)]
pub struct EventBuffer {
    queues: BTreeMap<(Address, Address), BTreeMap<u64, EventUpdate>>,
    len: usize,
    capacity: usize,
}

pub const DEFAULT_BUFFER_CAPACITY: usize = 4096;

impl Default for EventBuffer {
    fn default() -> Self {
        Self::new(DEFAULT_BUFFER_CAPACITY)
    }
}

/// Drain priority: fee descending, then digest ascending.
type DrainKey = (Amount, Reverse<HashDigest>);

impl EventBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { queues: BTreeMap::new(), len: 0, capacity }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &EventUpdate> {
        self.queues.values().flat_map(|q| q.values())
    }

    pub fn contains(&self, u: &EventUpdate) -> bool {
        self.queues.get(&(u.event_id, u.publisher)).and_then(|q| q.get(&u.nonce)) == Some(u)
    }

    /// Validates and enqueues an external update. Future nonces are held
    /// until their predecessors drain. Returns the evicted update, if any.
    pub fn ingest(&mut self, update: EventUpdate, state: &EventState) -> Result<Option<EventUpdate>, RejectReason> {
        if update.origin != Origin::External {
            return Err(RejectReason::BadSignature);
        }
        check_static(&update, state)?;
        if update.nonce <= state.last_nonce(&update.event_id, &update.publisher) {
            return Err(RejectReason::BadNonce);
        }
        let key = (update.event_id, update.publisher);
        if self.queues.get(&key).is_some_and(|q| q.contains_key(&update.nonce)) {
            return Err(RejectReason::BadNonce);
        }
        let mut evicted = None;
        if self.len >= self.capacity {
            let victim = self.eviction_candidate().ok_or(RejectReason::BufferFull)?;
            let victim_fee = self.queues[&victim.0][&victim.1].inclusion_fee;
            if update.inclusion_fee <= victim_fee {
                return Err(RejectReason::BufferFull);
            }
            evicted = self.remove(&victim.0, victim.1);
        }
        self.queues.entry(key).or_default().insert(update.nonce, update);
        self.len += 1;
        Ok(evicted)
    }

    /// Lowest-fee queue tail; ties go to the larger digest.
    fn eviction_candidate(&self) -> Option<((Address, Address), u64)> {
        self.queues
            .iter()
            .filter_map(|(k, q)| q.last_key_value().map(|(n, u)| (k, *n, u)))
            .min_by_key(|(_, _, u)| (u.inclusion_fee, Reverse(u.digest())))
            .map(|(k, n, _)| (*k, n))
    }

    fn remove(&mut self, key: &(Address, Address), nonce: u64) -> Option<EventUpdate> {
        let q = self.queues.get_mut(key)?;
        let out = q.remove(&nonce);
        if out.is_some() {
            self.len -= 1;
        }
        if q.is_empty() {
            self.queues.remove(key);
        }
        out
    }

    /// Drops updates whose nonce is already used in `state`.
    pub fn purge_stale(&mut self, state: &EventState) {
        let mut removed = 0;
        self.queues.retain(|(ev, publisher), q| {
            let last = state.last_nonce(ev, publisher);
            let before = q.len();
            q.retain(|n, _| *n > last);
            removed += before - q.len();
            !q.is_empty()
        });
        self.len -= removed;
    }

    /// Removes up to `budget` updates in processing order. Only queue heads
    /// whose nonce directly follows the recorded one are eligible; taking a
    /// head makes its successor eligible.
    pub fn drain_for_block(&mut self, state: &EventState, budget: usize) -> Vec<EventUpdate> {
        if budget == 0 {
            return Vec::new();
        }
        self.purge_stale(state);
        let mut heap: BinaryHeap<(DrainKey, (Address, Address), u64)> = BinaryHeap::new();
        for (key, q) in &self.queues {
            let expected = state.last_nonce(&key.0, &key.1) + 1;
            if let Some(u) = q.get(&expected) {
                heap.push(((u.inclusion_fee, Reverse(u.digest())), *key, expected));
            }
        }
        let mut out = Vec::new();
        while out.len() < budget {
            let Some((_, key, nonce)) = heap.pop() else { break };
            let u = self.remove(&key, nonce).expect("heap entry present");
            if let Some(next) = self.queues.get(&key).and_then(|q| q.get(&(nonce + 1))) {
                heap.push(((next.inclusion_fee, Reverse(next.digest())), key, nonce + 1));
            }
            out.push(u);
        }
        out
    }
}
