//! On-chain messages, contract scripts, triggered executions, receipts and
//! blocks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::codec::{digest_of, Canonical, DecodeError, Reader};
use crate::crypto::{verify, KeyPair, PublicKey, Signature};
use crate::event::{EventUpdate, Value, VarType};
use crate::types::{Address, Amount, Gas, HashDigest, Height};
use crate::{canonical_seq, canonical_struct};

/// Subscriber-chosen terms of a subscription.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscriptionParams {
    #[serde(with = "crate::types::amount_str")]
    pub gas_price: Amount,
    pub gas_limit: Gas,
    #[serde(with = "crate::types::amount_str")]
    pub max_subscription_fee: Amount,
    /// Empty means any publisher.
    pub publisher_filter: BTreeSet<PublicKey>,
    /// 0 = unlimited, else at most one trigger per `block_rate` blocks.
    pub block_rate: u64,
    /// 0 = every instance, else every `event_rate`-th instance.
    pub event_rate: u64,
    pub constraint: String,
    #[serde(with = "crate::types::hex_bytes")]
    pub subscriber_data: Vec<u8>,
}

impl SubscriptionParams {
    pub fn new(gas_price: Amount, gas_limit: Gas) -> Self {
        Self {
            gas_price,
            gas_limit,
            max_subscription_fee: 0,
            publisher_filter: BTreeSet::new(),
            block_rate: 0,
            event_rate: 0,
            constraint: String::new(),
            subscriber_data: Vec::new(),
        }
    }
}

/// Payload element of an event emitted by a script.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    Const(Value),
    /// Copy the field at this index of the triggering update's payload.
    TriggerField(u32),
    BlockNumber,
    BlockTime,
    TriggerPublisher,
}

/// Recipient of a scripted transfer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Fixed(Address),
    /// Address-typed field of the triggering payload.
    TriggerField(u32),
    TriggerPublisher,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptPredicate {
    Always,
    Never,
    /// Contract balance (inside the execution) is below the amount.
    BalanceBelow(#[serde(with = "crate::types::amount_str")] Amount),
    FieldEquals(u32, Value),
    /// True for roughly `per_mille`/1000 of executions, decided by the
    /// execution digest.
    DigestChance(u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    ConsumeGas(Gas),
    EmitEvent {
        event_id: Address,
        payload: Vec<Template>,
        #[serde(with = "crate::types::amount_str")]
        subscription_fee: Amount,
    },
    Transfer {
        to: Target,
        #[serde(with = "crate::types::amount_str")]
        amount: Amount,
        #[serde(with = "crate::types::hex_bytes")]
        memo: Vec<u8>,
    },
    RevertIf(ScriptPredicate),
    Subscribe {
        event_id: Address,
        params: SubscriptionParams,
    },
    Noop,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractScript {
    pub on_trigger: Vec<Action>,
}

impl ContractScript {
    pub fn new(on_trigger: Vec<Action>) -> Self {
        Self { on_trigger }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    EventCreate,
    Subscribe,
    Unsubscribe,
    SubscriptionUpdate,
    TransferEvent,
    DeployEvent,
    ExternalEventUpdate,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageBody {
    EventCreate {
        variables: Vec<(String, VarType)>,
        comments: String,
    },
    /// Registers a subscription for a contract owned by the sender.
    Subscribe {
        subscriber: Address,
        event_id: Address,
        params: SubscriptionParams,
    },
    Unsubscribe {
        subscriber: Address,
        event_id: Address,
        ordinal: u64,
    },
    SubscriptionUpdate {
        subscriber: Address,
        event_id: Address,
        ordinal: u64,
        params: SubscriptionParams,
    },
    TransferEvent {
        to: Address,
        #[serde(with = "crate::types::amount_str")]
        amount: Amount,
        #[serde(with = "crate::types::hex_bytes")]
        memo: Vec<u8>,
    },
    /// Installs a contract. `trigger` holds the terms of its default
    /// transaction-event subscription.
    DeployEvent {
        script: ContractScript,
        #[serde(with = "crate::types::amount_str")]
        endowment: Amount,
        trigger: SubscriptionParams,
    },
    ExternalEventUpdate {
        update: EventUpdate,
    },
}

impl MessageBody {
    pub fn kind(&self) -> MessageKind {
        match self {
            MessageBody::EventCreate { .. } => MessageKind::EventCreate,
            MessageBody::Subscribe { .. } => MessageKind::Subscribe,
            MessageBody::Unsubscribe { .. } => MessageKind::Unsubscribe,
            MessageBody::SubscriptionUpdate { .. } => MessageKind::SubscriptionUpdate,
            MessageBody::TransferEvent { .. } => MessageKind::TransferEvent,
            MessageBody::DeployEvent { .. } => MessageKind::DeployEvent,
            MessageBody::ExternalEventUpdate { .. } => MessageKind::ExternalEventUpdate,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolMessage {
    pub sender: Address,
    pub sender_key: PublicKey,
    pub sender_nonce: u64,
    #[serde(with = "crate::types::amount_str")]
    pub gas_price: Amount,
    #[serde(with = "crate::types::amount_str")]
    pub inclusion_fee: Amount,
    pub body: MessageBody,
    pub signature: Option<Signature>,
}

impl ProtocolMessage {
    /// Signed account message. Not for external updates; see
    /// [`ProtocolMessage::external_update`].
    pub fn signed(
        key: &KeyPair,
        sender_nonce: u64,
        gas_price: Amount,
        inclusion_fee: Amount,
        body: MessageBody,
    ) -> Self {
        let mut m = Self {
            sender: key.address(),
            sender_key: key.public().clone(),
            sender_nonce,
            gas_price,
            inclusion_fee,
            body,
            signature: None,
        };
        m.signature = Some(key.sign(&m.signing_digest()));
        m
    }

    /// Envelope for an external event update. The envelope mirrors the
    /// update: same sender, key, nonce, inclusion fee and signature, and a
    /// zero gas price. It does not consume an account nonce.
    pub fn external_update(update: EventUpdate) -> Self {
        Self {
            sender: update.publisher,
            sender_key: update.publisher_key.clone(),
            sender_nonce: update.nonce,
            gas_price: 0,
            inclusion_fee: update.inclusion_fee,
            signature: update.signature.clone(),
            body: MessageBody::ExternalEventUpdate { update },
        }
    }

    pub fn kind(&self) -> MessageKind {
        self.body.kind()
    }

    pub fn as_update(&self) -> Option<&EventUpdate> {
        match &self.body {
            MessageBody::ExternalEventUpdate { update } => Some(update),
            _ => None,
        }
    }

    pub fn signing_digest(&self) -> HashDigest {
        let mut unsigned = self.clone();
        unsigned.signature = None;
        digest_of(&unsigned)
    }

    pub fn digest(&self) -> HashDigest {
        digest_of(self)
    }

    /// Signature and sender-identity checks.
    pub fn is_authentic(&self) -> bool {
        if let Some(update) = self.as_update() {
            return self.sender == update.publisher
                && self.sender_key == update.publisher_key
                && self.sender_nonce == update.nonce
                && self.gas_price == 0
                && self.inclusion_fee == update.inclusion_fee
                && self.signature == update.signature
                && update.publisher_key.address() == update.publisher
                && update
                    .signature
                    .as_ref()
                    .is_some_and(|s| verify(&update.publisher_key, &update.signing_digest(), s));
        }
        self.sender_key.address() == self.sender
            && self
                .signature
                .as_ref()
                .is_some_and(|s| verify(&self.sender_key, &self.signing_digest(), s))
    }
}

/// Identity of a subscription: `(event_id, subscriber, ordinal)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SubscriptionRef {
    pub event_id: Address,
    pub subscriber: Address,
    pub ordinal: u64,
}

/// A transaction synthesized from a (subscription, event update) match.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggeredExecution {
    pub subscription: SubscriptionRef,
    pub triggering_update: HashDigest,
    pub publisher: Address,
    pub payload: Vec<Value>,
    #[serde(with = "crate::types::amount_str")]
    pub gas_price: Amount,
    pub gas_limit: Gas,
    #[serde(with = "crate::types::amount_str")]
    pub subscription_fee_paid: Amount,
    #[serde(with = "crate::types::hex_bytes")]
    pub subscriber_data: Vec<u8>,
    pub created_block: Height,
}

impl TriggeredExecution {
    pub fn digest(&self) -> HashDigest {
        digest_of(self)
    }

    /// Worst-case debit of the subscriber.
    pub fn prefund(&self) -> Amount {
        u128::from(self.gas_limit)
            .saturating_mul(self.gas_price)
            .saturating_add(self.subscription_fee_paid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiptStatus {
    Success,
    Reverted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Receipt {
    pub tx: HashDigest,
    pub status: ReceiptStatus,
    pub gas_used: Gas,
    #[serde(with = "crate::types::amount_str")]
    pub miner_fee: Amount,
    #[serde(with = "crate::types::amount_str")]
    pub subscription_fee: Amount,
    pub publisher: Address,
    pub emitted: Vec<HashDigest>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub number: Height,
    pub parent: HashDigest,
    /// Milliseconds since the start of the chain.
    pub timestamp_ms: u64,
    pub miner: Address,
    pub gas_limit: Gas,
    pub gas_used: Gas,
    pub state_root: HashDigest,
    pub event_state_root: HashDigest,
    pub receipts_root: HashDigest,
    /// External updates in drain order, then account messages in execution
    /// order.
    pub external_messages: Vec<ProtocolMessage>,
    pub executions: Vec<TriggeredExecution>,
    /// Build-loop round of each entry in `executions`.
    pub execution_rounds: Vec<u32>,
}

impl Block {
    pub fn hash(&self) -> HashDigest {
        digest_of(self)
    }

    /// Timestamp in whole seconds, as exposed to constraints.
    pub fn time_secs(&self) -> i64 {
        (self.timestamp_ms / 1000) as i64
    }
}

// ---- canonical encoding -------------------------------------------------

canonical_seq!(
    Value,
    (String, VarType),
    Template,
    Action,
    EventUpdate,
    ProtocolMessage,
    TriggeredExecution,
    u32,
);

canonical_struct!(SubscriptionParams {
    gas_price,
    gas_limit,
    max_subscription_fee,
    publisher_filter,
    block_rate,
    event_rate,
    constraint,
    subscriber_data,
});

canonical_struct!(ContractScript { on_trigger });

canonical_struct!(ProtocolMessage {
    sender,
    sender_key,
    sender_nonce,
    gas_price,
    inclusion_fee,
    body,
    signature,
});

canonical_struct!(SubscriptionRef { event_id, subscriber, ordinal });

canonical_struct!(TriggeredExecution {
    subscription,
    triggering_update,
    publisher,
    payload,
    gas_price,
    gas_limit,
    subscription_fee_paid,
    subscriber_data,
    created_block,
});

canonical_struct!(Block {
    number,
    parent,
    timestamp_ms,
    miner,
    gas_limit,
    gas_used,
    state_root,
    event_state_root,
    receipts_root,
    external_messages,
    executions,
    execution_rounds,
});

impl Canonical for Template {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            Template::Const(v) => {
                out.push(0);
                v.encode_to(out);
            }
            Template::TriggerField(i) => {
                out.push(1);
                i.encode_to(out);
            }
            Template::BlockNumber => out.push(2),
            Template::BlockTime => out.push(3),
            Template::TriggerPublisher => out.push(4),
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("template", 4)? {
            0 => Template::Const(Value::decode_from(r)?),
            1 => Template::TriggerField(u32::decode_from(r)?),
            2 => Template::BlockNumber,
            3 => Template::BlockTime,
            _ => Template::TriggerPublisher,
        })
    }
}

impl Canonical for Target {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            Target::Fixed(a) => {
                out.push(0);
                a.encode_to(out);
            }
            Target::TriggerField(i) => {
                out.push(1);
                i.encode_to(out);
            }
            Target::TriggerPublisher => out.push(2),
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("target", 2)? {
            0 => Target::Fixed(Address::decode_from(r)?),
            1 => Target::TriggerField(u32::decode_from(r)?),
            _ => Target::TriggerPublisher,
        })
    }
}

impl Canonical for ScriptPredicate {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            ScriptPredicate::Always => out.push(0),
            ScriptPredicate::Never => out.push(1),
            ScriptPredicate::BalanceBelow(a) => {
                out.push(2);
                a.encode_to(out);
            }
            ScriptPredicate::FieldEquals(i, v) => {
                out.push(3);
                i.encode_to(out);
                v.encode_to(out);
            }
            ScriptPredicate::DigestChance(p) => {
                out.push(4);
                p.encode_to(out);
            }
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("predicate", 4)? {
            0 => ScriptPredicate::Always,
            1 => ScriptPredicate::Never,
            2 => ScriptPredicate::BalanceBelow(u128::decode_from(r)?),
            3 => ScriptPredicate::FieldEquals(u32::decode_from(r)?, Value::decode_from(r)?),
            _ => ScriptPredicate::DigestChance(u32::decode_from(r)?),
        })
    }
}

impl Canonical for Action {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            Action::ConsumeGas(g) => {
                out.push(0);
                g.encode_to(out);
            }
            Action::EmitEvent { event_id, payload, subscription_fee } => {
                out.push(1);
                event_id.encode_to(out);
                payload.encode_to(out);
                subscription_fee.encode_to(out);
            }
            Action::Transfer { to, amount, memo } => {
                out.push(2);
                to.encode_to(out);
                amount.encode_to(out);
                memo.encode_to(out);
            }
            Action::RevertIf(p) => {
                out.push(3);
                p.encode_to(out);
            }
            Action::Subscribe { event_id, params } => {
                out.push(4);
                event_id.encode_to(out);
                params.encode_to(out);
            }
            Action::Noop => out.push(5),
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("action", 5)? {
            0 => Action::ConsumeGas(u64::decode_from(r)?),
            1 => Action::EmitEvent {
                event_id: Address::decode_from(r)?,
                payload: Vec::<Template>::decode_from(r)?,
                subscription_fee: u128::decode_from(r)?,
            },
            2 => Action::Transfer {
                to: Target::decode_from(r)?,
                amount: u128::decode_from(r)?,
                memo: Vec::<u8>::decode_from(r)?,
            },
            3 => Action::RevertIf(ScriptPredicate::decode_from(r)?),
            4 => Action::Subscribe {
                event_id: Address::decode_from(r)?,
                params: SubscriptionParams::decode_from(r)?,
            },
            _ => Action::Noop,
        })
    }
}

impl Canonical for MessageBody {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            MessageBody::EventCreate { variables, comments } => {
                out.push(0);
                variables.encode_to(out);
                comments.encode_to(out);
            }
            MessageBody::Subscribe { subscriber, event_id, params } => {
                out.push(1);
                subscriber.encode_to(out);
                event_id.encode_to(out);
                params.encode_to(out);
            }
            MessageBody::Unsubscribe { subscriber, event_id, ordinal } => {
                out.push(2);
                subscriber.encode_to(out);
                event_id.encode_to(out);
                ordinal.encode_to(out);
            }
            MessageBody::SubscriptionUpdate { subscriber, event_id, ordinal, params } => {
                out.push(3);
                subscriber.encode_to(out);
                event_id.encode_to(out);
                ordinal.encode_to(out);
                params.encode_to(out);
            }
            MessageBody::TransferEvent { to, amount, memo } => {
                out.push(4);
                to.encode_to(out);
                amount.encode_to(out);
                memo.encode_to(out);
            }
            MessageBody::DeployEvent { script, endowment, trigger } => {
                out.push(5);
                script.encode_to(out);
                endowment.encode_to(out);
                trigger.encode_to(out);
            }
            MessageBody::ExternalEventUpdate { update } => {
                out.push(6);
                update.encode_to(out);
            }
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("message body", 6)? {
            0 => MessageBody::EventCreate {
                variables: Canonical::decode_from(r)?,
                comments: Canonical::decode_from(r)?,
            },
            1 => MessageBody::Subscribe {
                subscriber: Canonical::decode_from(r)?,
                event_id: Canonical::decode_from(r)?,
                params: Canonical::decode_from(r)?,
            },
            2 => MessageBody::Unsubscribe {
                subscriber: Canonical::decode_from(r)?,
                event_id: Canonical::decode_from(r)?,
                ordinal: Canonical::decode_from(r)?,
            },
            3 => MessageBody::SubscriptionUpdate {
                subscriber: Canonical::decode_from(r)?,
                event_id: Canonical::decode_from(r)?,
                ordinal: Canonical::decode_from(r)?,
                params: Canonical::decode_from(r)?,
            },
            4 => MessageBody::TransferEvent {
                to: Canonical::decode_from(r)?,
                amount: Canonical::decode_from(r)?,
                memo: Canonical::decode_from(r)?,
            },
            5 => MessageBody::DeployEvent {
                script: Canonical::decode_from(r)?,
                endowment: Canonical::decode_from(r)?,
                trigger: Canonical::decode_from(r)?,
            },
            _ => MessageBody::ExternalEventUpdate { update: Canonical::decode_from(r)? },
        })
    }
}

impl Canonical for ReceiptStatus {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(match self {
            ReceiptStatus::Success => 0,
            ReceiptStatus::Reverted => 1,
        });
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("receipt status", 1)? {
            0 => ReceiptStatus::Success,
            _ => ReceiptStatus::Reverted,
        })
    }
}

canonical_struct!(Receipt { tx, status, gas_used, miner_fee, subscription_fee, publisher, emitted });
