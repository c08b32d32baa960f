//! Authenticated registry of event definitions and subscriptions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::Canonical;
use crate::crypto::verify;
use crate::event::{EventDefinition, VarType};
use crate::matcher::{parse_constraint, ConstraintError, Expr};
use crate::merkle;
use crate::message::{MessageBody, ProtocolMessage, SubscriptionParams, SubscriptionRef};
use crate::types::{Address, HashDigest, Height};

pub const DEFAULT_ACTIVATION_DELAY: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EventStateError {
    #[error("event {0} already registered")]
    DuplicateEvent(Address),
    #[error("invalid signature")]
    InvalidSignature,
    #[error("unknown event {0}")]
    UnknownEvent(Address),
    #[error("unknown contract {0}")]
    UnknownContract(Address),
    #[error("no such subscription")]
    NoSuchSubscription,
    #[error("variable names are not unique")]
    DuplicateVariable,
    #[error("bad constraint: {0}")]
    Constraint(#[from] ConstraintError),
    #[error("message kind does not apply to the event registry")]
    WrongKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Change {
    Update { params: SubscriptionParams },
    Remove,
}

/// A change waiting for its activation block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingChange {
    pub effective_block: Height,
    pub change: Change,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub event_id: Address,
    pub subscriber: Address,
    pub ordinal: u64,
    pub params: SubscriptionParams,
    /// Compiled form of `params.constraint`.
    #[serde(skip)]
    pub constraint: Expr,
    pub activation_block: Height,
    pub last_trigger_block: Option<Height>,
    pub instance_counter: u64,
    pub pending: Option<PendingChange>,
}

impl Subscription {
    pub fn new(
        event_id: Address,
        subscriber: Address,
        ordinal: u64,
        params: SubscriptionParams,
        def: &EventDefinition,
        activation_block: Height,
    ) -> Result<Self, ConstraintError> {
        let constraint = parse_constraint(&params.constraint, def)?;
        Ok(Self {
            event_id,
            subscriber,
            ordinal,
            params,
            constraint,
            activation_block,
            last_trigger_block: None,
            instance_counter: 0,
            pending: None,
        })
    }

    pub fn id(&self) -> SubscriptionRef {
        SubscriptionRef { event_id: self.event_id, subscriber: self.subscriber, ordinal: self.ordinal }
    }

    fn leaf_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.params.encode_to(&mut out);
        self.activation_block.encode_to(&mut out);
        self.last_trigger_block.encode_to(&mut out);
        self.instance_counter.encode_to(&mut out);
        match &self.pending {
            None => out.push(0),
            Some(p) => {
                out.push(1);
                p.effective_block.encode_to(&mut out);
                match &p.change {
                    Change::Update { params } => {
                        out.push(0);
                        params.encode_to(&mut out);
                    }
                    Change::Remove => out.push(1),
                }
            }
        }
        out
    }
}

/// Priority order within one event: higher gas price first, then older.
pub fn priority_cmp(a: &Subscription, b: &Subscription) -> std::cmp::Ordering {
    b.params.gas_price.cmp(&a.params.gas_price).then(a.ordinal.cmp(&b.ordinal))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventState {
    pub definitions: BTreeMap<Address, EventDefinition>,
    pub subscriptions: BTreeMap<Address, Vec<Subscription>>,
    #[serde(with = "nonce_entries")]
    pub publisher_nonces: BTreeMap<(Address, Address), u64>,
    pub next_ordinal: u64,
    pub activation_delay: u64,
}

impl Default for EventState {
    fn default() -> Self {
        Self::new(DEFAULT_ACTIVATION_DELAY)
    }
}

impl EventState {
    pub fn new(activation_delay: u64) -> Self {
        Self {
            definitions: BTreeMap::new(),
            subscriptions: BTreeMap::new(),
            publisher_nonces: BTreeMap::new(),
            next_ordinal: 1,
            activation_delay,
        }
    }

    /// Recompiles constraints after deserialization.
    pub fn rehydrate(&mut self) -> Result<(), EventStateError> {
        for (id, list) in self.subscriptions.iter_mut() {
            let def = self.definitions.get(id).ok_or(EventStateError::UnknownEvent(*id))?;
            for s in list {
                s.constraint = parse_constraint(&s.params.constraint, def)?;
            }
        }
        Ok(())
    }

    pub fn definition(&self, id: &Address) -> Option<&EventDefinition> {
        self.definitions.get(id)
    }

    /// Last accepted nonce for `(event_id, publisher)`; 0 if none.
    pub fn last_nonce(&self, event_id: &Address, publisher: &Address) -> u64 {
        self.publisher_nonces.get(&(*event_id, *publisher)).copied().unwrap_or(0)
    }

    pub fn record_nonce(&mut self, event_id: Address, publisher: Address, nonce: u64) {
        let slot = self.publisher_nonces.entry((event_id, publisher)).or_insert(0);
        *slot = (*slot).max(nonce);
    }

    /// Registers a definition directly (genesis and system events).
    pub fn insert_definition(&mut self, def: EventDefinition) -> Result<Address, EventStateError> {
        if !def.has_unique_names() {
            return Err(EventStateError::DuplicateVariable);
        }
        if self.definitions.contains_key(&def.event_id) {
            return Err(EventStateError::DuplicateEvent(def.event_id));
        }
        let id = def.event_id;
        self.definitions.insert(id, def);
        Ok(id)
    }

    pub fn create_event_mut(
        &mut self,
        creator: Address,
        variables: Vec<(String, VarType)>,
        comments: &str,
    ) -> Result<Address, EventStateError> {
        self.insert_definition(EventDefinition::new(creator, variables, comments))
    }

    /// Inserts a subscription that activates at `block + activation_delay`.
    pub fn subscribe_mut(
        &mut self,
        event_id: Address,
        subscriber: Address,
        params: SubscriptionParams,
        block: Height,
    ) -> Result<SubscriptionRef, EventStateError> {
        self.subscribe_at(event_id, subscriber, params, block + self.activation_delay)
    }

    /// Inserts a subscription with an explicit activation block.
    pub fn subscribe_at(
        &mut self,
        event_id: Address,
        subscriber: Address,
        params: SubscriptionParams,
        activation_block: Height,
    ) -> Result<SubscriptionRef, EventStateError> {
        let def = self.definitions.get(&event_id).ok_or(EventStateError::UnknownEvent(event_id))?;
        let sub = Subscription::new(event_id, subscriber, self.next_ordinal, params, def, activation_block)?;
        self.next_ordinal += 1;
        let id = sub.id();
        let list = self.subscriptions.entry(event_id).or_default();
        let at = list.partition_point(|s| priority_cmp(s, &sub).is_lt());
        list.insert(at, sub);
        Ok(id)
    }

    fn find_mut(&mut self, r: &SubscriptionRef) -> Option<&mut Subscription> {
        self.subscriptions
            .get_mut(&r.event_id)?
            .iter_mut()
            .find(|s| s.subscriber == r.subscriber && s.ordinal == r.ordinal)
    }

    pub fn find(&self, r: &SubscriptionRef) -> Option<&Subscription> {
        self.subscriptions
            .get(&r.event_id)?
            .iter()
            .find(|s| s.subscriber == r.subscriber && s.ordinal == r.ordinal)
    }

    /// Schedules removal at `block + activation_delay`.
    pub fn unsubscribe_mut(&mut self, r: &SubscriptionRef, block: Height) -> Result<(), EventStateError> {
        let effective_block = block + self.activation_delay;
        let sub = self.find_mut(r).ok_or(EventStateError::NoSuchSubscription)?;
        if matches!(sub.pending, Some(PendingChange { change: Change::Remove, .. })) {
            return Err(EventStateError::NoSuchSubscription);
        }
        sub.pending = Some(PendingChange { effective_block, change: Change::Remove });
        Ok(())
    }

    /// Schedules a parameter replacement at `block + activation_delay`. The
    /// ordinal is kept.
    pub fn update_subscription_mut(
        &mut self,
        r: &SubscriptionRef,
        params: SubscriptionParams,
        block: Height,
    ) -> Result<(), EventStateError> {
        let def = self.definitions.get(&r.event_id).ok_or(EventStateError::UnknownEvent(r.event_id))?;
        parse_constraint(&params.constraint, def)?;
        let effective_block = block + self.activation_delay;
        let sub = self.find_mut(r).ok_or(EventStateError::NoSuchSubscription)?;
        if matches!(sub.pending, Some(PendingChange { change: Change::Remove, .. })) {
            return Err(EventStateError::NoSuchSubscription);
        }
        sub.pending = Some(PendingChange { effective_block, change: Change::Update { params } });
        Ok(())
    }

    /// Materializes every pending change effective at or before `height`.
    pub fn begin_block(&mut self, height: Height) {
        let definitions = &self.definitions;
        for (id, list) in self.subscriptions.iter_mut() {
            let mut touched = false;
            list.retain_mut(|s| match &s.pending {
                Some(p) if p.effective_block <= height => {
                    touched = true;
                    let change = s.pending.take().expect("checked").change;
                    match change {
                        Change::Remove => false,
                        Change::Update { params } => {
                            s.constraint = parse_constraint(&params.constraint, &definitions[id])
                                .expect("validated when scheduled");
                            s.params = params;
                            true
                        }
                    }
                }
                _ => true,
            });
            if touched {
                list.sort_by(priority_cmp);
            }
        }
        self.subscriptions.retain(|_, l| !l.is_empty());
    }

    /// Subscriptions governing `event_id` at `block`, in priority order.
    /// Pending changes are resolved as of `block` without mutating.
    pub fn active_subscriptions(&self, event_id: &Address, block: Height) -> Vec<Subscription> {
        let Some(list) = self.subscriptions.get(event_id) else {
            return Vec::new();
        };
        let def = &self.definitions[event_id];
        let mut out: Vec<Subscription> = list
            .iter()
            .filter_map(|s| {
                let mut s = s.clone();
                if let Some(p) = &s.pending {
                    if p.effective_block <= block {
                        match s.pending.take().expect("checked").change {
                            Change::Remove => return None,
                            Change::Update { params } => {
                                s.constraint = parse_constraint(&params.constraint, def).ok()?;
                                s.params = params;
                            }
                        }
                    }
                }
                (s.activation_block <= block).then_some(s)
            })
            .collect();
        out.sort_by(priority_cmp);
        out
    }

    pub fn subscription_count(&self) -> usize {
        self.subscriptions.values().map(Vec::len).sum()
    }

    /// Every per-event list is in priority order.
    pub fn priority_lists_sorted(&self) -> bool {
        self.subscriptions
            .values()
            .all(|l| l.windows(2).all(|w| priority_cmp(&w[0], &w[1]).is_lt()))
    }

    /// Merkle root over definitions, subscriptions, publisher nonces and the
    /// ordinal counter.
    pub fn root_hash(&self) -> HashDigest {
        let mut leaves: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
        for (id, def) in &self.definitions {
            leaves.push(([b"D".as_slice(), &id.0].concat(), def.encode()));
        }
        for list in self.subscriptions.values() {
            for s in list {
                let key = [b"S".as_slice(), &s.event_id.0, &s.subscriber.0, &s.ordinal.to_be_bytes()].concat();
                leaves.push((key, s.leaf_bytes()));
            }
        }
        for ((ev, publisher), n) in &self.publisher_nonces {
            leaves.push(([b"N".as_slice(), &ev.0, &publisher.0].concat(), n.to_be_bytes().to_vec()));
        }
        leaves.push((b"O".to_vec(), self.next_ordinal.to_be_bytes().to_vec()));
        merkle::root_of_entries(&leaves)
    }

    /// Deterministic JSON dump with sorted keys.
    pub fn debug_json(&self) -> String {
        let v = serde_json::to_value(self).expect("serializable");
        serde_json::to_string_pretty(&v).expect("serializable")
    }

    /// Applies a registry message at `block`. `is_contract` tells whether
    /// an address holds a deployed contract.
    pub fn apply_message_mut(
        &mut self,
        msg: &ProtocolMessage,
        block: Height,
        is_contract: &dyn Fn(&Address) -> bool,
    ) -> Result<(), EventStateError> {
        let authentic = msg
            .signature
            .as_ref()
            .is_some_and(|s| verify(&msg.sender_key, &msg.signing_digest(), s))
            && msg.sender_key.address() == msg.sender;
        if !authentic {
            return Err(EventStateError::InvalidSignature);
        }
        match &msg.body {
            MessageBody::EventCreate { variables, comments } => {
                self.create_event_mut(msg.sender, variables.clone(), comments).map(|_| ())
            }
            MessageBody::Subscribe { subscriber, event_id, params } => {
                if !self.definitions.contains_key(event_id) {
                    return Err(EventStateError::UnknownEvent(*event_id));
                }
                if !is_contract(subscriber) {
                    return Err(EventStateError::UnknownContract(*subscriber));
                }
                self.subscribe_mut(*event_id, *subscriber, params.clone(), block).map(|_| ())
            }
            MessageBody::Unsubscribe { subscriber, event_id, ordinal } => {
                let r = SubscriptionRef { event_id: *event_id, subscriber: *subscriber, ordinal: *ordinal };
                self.unsubscribe_mut(&r, block)
            }
            MessageBody::SubscriptionUpdate { subscriber, event_id, ordinal, params } => {
                let r = SubscriptionRef { event_id: *event_id, subscriber: *subscriber, ordinal: *ordinal };
                self.update_subscription_mut(&r, params.clone(), block)
            }
            _ => Err(EventStateError::WrongKind),
        }
    }
}

/// Functional form: returns a new snapshot.
pub fn apply_event_create(state: &EventState, msg: &ProtocolMessage, block: Height) -> Result<EventState, EventStateError> {
    let mut next = state.clone();
    next.apply_message_mut(msg, block, &|_| false)?;
    Ok(next)
}

pub fn apply_subscribe(
    state: &EventState,
    msg: &ProtocolMessage,
    block: Height,
    is_contract: &dyn Fn(&Address) -> bool,
) -> Result<EventState, EventStateError> {
    let mut next = state.clone();
    next.apply_message_mut(msg, block, is_contract)?;
    Ok(next)
}

pub fn apply_unsubscribe(state: &EventState, msg: &ProtocolMessage, block: Height) -> Result<EventState, EventStateError> {
    let mut next = state.clone();
    next.apply_message_mut(msg, block, &|_| false)?;
    Ok(next)
}

pub fn apply_subscription_update(
    state: &EventState,
    msg: &ProtocolMessage,
    block: Height,
) -> Result<EventState, EventStateError> {
    apply_unsubscribe(state, msg, block)
}

mod nonce_entries {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::types::Address;

    #[derive(Serialize, Deserialize)]
    struct Entry {
        event_id: Address,
        publisher: Address,
        nonce: u64,
    }

    pub fn serialize<S: Serializer>(m: &BTreeMap<(Address, Address), u64>, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<Entry> = m
            .iter()
            .map(|((e, p), n)| Entry { event_id: *e, publisher: *p, nonce: *n })
            .collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<(Address, Address), u64>, D::Error> {
        let v = Vec::<Entry>::deserialize(d)?;
        Ok(v.into_iter().map(|e| ((e.event_id, e.publisher), e.nonce)).collect())
    }
}
