use std::collections::BTreeMap;

use thiserror::Error;

use crate::event::{amount_to_int, transfer_event_definition, transfer_event_id, EventUpdate, Value};
use crate::event_state::{EventState, EventStateError};
use crate::matcher::parse_constraint;
use crate::message::{
    Action, MessageBody, ProtocolMessage, Receipt, ReceiptStatus, ScriptPredicate, SubscriptionParams, Target,
    Template, TriggeredExecution,
};
use crate::types::{Address, Amount, Gas, Height};

use super::state::{Account, AccountKind, Contract, LedgerState};
use super::{contract_address, LedgerConfig};

#[derive(Clone, Copy, Debug)]
pub struct ExecCtx {
    pub height: Height,
    pub time_ms: u64,
    pub miner: Address,
}

impl ExecCtx {
    pub fn time_secs(&self) -> i64 {
        (self.time_ms / 1000) as i64
    }
}

/// Nonces handed out to internal and system updates within one block.
#[derive(Clone, Debug, Default)]
pub struct NonceReserve(BTreeMap<(Address, Address), u64>);

impl NonceReserve {
    pub fn next(&mut self, events: &EventState, event_id: Address, publisher: Address) -> u64 {
        let last = events.last_nonce(&event_id, &publisher);
        let slot = self.0.entry((event_id, publisher)).or_insert(0);
        *slot = (*slot).max(last) + 1;
        *slot
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecOutcome {
    pub receipt: Receipt,
    /// Updates produced, each with the gas price that orders it.
    pub emitted: Vec<EventUpdate>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExecError {
    #[error("subscriber cannot cover gas_limit x gas_price + fee")]
    InsufficientPrefund,
    #[error("subscriber is not a deployed contract")]
    UnknownContract,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MessageError {
    #[error("invalid signature")]
    InvalidSignature,
    #[error("bad nonce: expected {expected}, got {got}")]
    BadNonce { expected: u64, got: u64 },
    #[error("insufficient balance")]
    InsufficientBalance,
    #[error("sender does not own the subscribing contract")]
    NotOwner,
    #[error("contract address already in use")]
    AddressTaken,
    #[error(transparent)]
    Registry(#[from] EventStateError),
}

fn transfer_update(
    events: &EventState,
    reserve: &mut NonceReserve,
    from: Address,
    to: Address,
    amount: Amount,
    memo: Vec<u8>,
) -> EventUpdate {
    let id = transfer_event_id();
    let nonce = reserve.next(events, id, from);
    let payload = vec![Value::Address(from), Value::Address(to), Value::Int(amount_to_int(amount)), Value::Bytes(memo)];
    EventUpdate::system(id, from, nonce, payload)
}

/// Executes an account message or charges an external update's inclusion
/// fee. On error nothing changes.
pub fn execute_message(
    st: &mut LedgerState,
    msg: &ProtocolMessage,
    ctx: &ExecCtx,
    cfg: &LedgerConfig,
    reserve: &mut NonceReserve,
) -> Result<ExecOutcome, MessageError> {
    if !msg.is_authentic() {
        return Err(MessageError::InvalidSignature);
    }
    let digest = msg.digest();
    if let MessageBody::ExternalEventUpdate { update } = &msg.body {
        if st.chain.balance(&msg.sender) < msg.inclusion_fee {
            return Err(MessageError::InsufficientBalance);
        }
        st.chain.debit(&msg.sender, msg.inclusion_fee);
        st.chain.credit(ctx.miner, msg.inclusion_fee);
        return Ok(ExecOutcome {
            receipt: Receipt {
                tx: digest,
                status: ReceiptStatus::Success,
                gas_used: 0,
                miner_fee: msg.inclusion_fee,
                subscription_fee: 0,
                publisher: Address::ZERO,
                emitted: vec![update.digest()],
            },
            emitted: vec![update.clone()],
        });
    }

    let expected = st.chain.nonce(&msg.sender);
    if msg.sender_nonce != expected {
        return Err(MessageError::BadNonce { expected, got: msg.sender_nonce });
    }
    let gas = cfg.gas.message_gas(msg.kind());
    let fee = u128::from(gas).saturating_mul(msg.gas_price).saturating_add(msg.inclusion_fee);
    let value = match &msg.body {
        MessageBody::TransferEvent { amount, .. } => *amount,
        MessageBody::DeployEvent { endowment, .. } => *endowment,
        _ => 0,
    };
    if st.chain.balance(&msg.sender) < fee.saturating_add(value) {
        return Err(MessageError::InsufficientBalance);
    }

    // Checks that can fail happen before any mutation.
    let mut emitted = Vec::new();
    match &msg.body {
        MessageBody::Subscribe { subscriber, .. }
        | MessageBody::Unsubscribe { subscriber, .. }
        | MessageBody::SubscriptionUpdate { subscriber, .. } => {
            let owner = st
                .chain
                .contracts
                .get(subscriber)
                .map(|c| c.owner)
                .ok_or(EventStateError::UnknownContract(*subscriber))?;
            if owner != msg.sender {
                return Err(MessageError::NotOwner);
            }
            let chain = &st.chain;
            st.events.apply_message_mut(msg, ctx.height, &|a| chain.is_contract(a))?;
        }
        MessageBody::EventCreate { .. } => {
            st.events.apply_message_mut(msg, ctx.height, &|_| false)?;
        }
        MessageBody::TransferEvent { to, amount, memo } => {
            st.chain.debit(&msg.sender, *amount);
            st.chain.credit(*to, *amount);
            st.chain.accounts.entry(*to).or_insert_with(|| Account::external(0));
            emitted.push(transfer_update(&st.events, reserve, msg.sender, *to, *amount, memo.clone()));
        }
        MessageBody::DeployEvent { script, endowment, trigger } => {
            let addr = contract_address(&msg.sender, msg.sender_nonce);
            if st.chain.accounts.contains_key(&addr) {
                return Err(MessageError::AddressTaken);
            }
            parse_constraint(&trigger.constraint, &transfer_event_definition()).map_err(EventStateError::from)?;
            st.chain.debit(&msg.sender, *endowment);
            st.chain.accounts.insert(addr, Account { balance: *endowment, nonce: 0, kind: AccountKind::Contract });
            st.chain.contracts.insert(addr, Contract { owner: msg.sender, script: script.clone() });
            st.events
                .subscribe_mut(transfer_event_id(), addr, trigger.clone(), ctx.height)
                .expect("constraint checked above");
        }
        MessageBody::ExternalEventUpdate { .. } => unreachable!("handled above"),
    }

    st.chain.debit(&msg.sender, fee);
    st.chain.credit(ctx.miner, fee);
    st.chain.accounts.get_mut(&msg.sender).expect("sender exists").nonce += 1;
    Ok(ExecOutcome {
        receipt: Receipt {
            tx: digest,
            status: ReceiptStatus::Success,
            gas_used: gas,
            miner_fee: fee,
            subscription_fee: 0,
            publisher: Address::ZERO,
            emitted: emitted.iter().map(EventUpdate::digest).collect(),
        },
        emitted,
    })
}

/// Effects of a script run, applied only on success.
#[derive(Default)]
struct Overlay {
    gas: Gas,
    debited: Amount,
    credits: Vec<(Address, Amount, Vec<u8>)>,
    emits: Vec<(Address, Vec<Value>, Amount)>,
    subscribes: Vec<(Address, SubscriptionParams)>,
}

enum Halt {
    Revert,
    OutOfGas,
}

fn template_value(t: &Template, exec: &TriggeredExecution, ctx: &ExecCtx) -> Option<Value> {
    Some(match t {
        Template::Const(v) => v.clone(),
        Template::TriggerField(i) => exec.payload.get(*i as usize)?.clone(),
        Template::BlockNumber => Value::Int(i64::try_from(ctx.height).ok()?),
        Template::BlockTime => Value::Int(ctx.time_secs()),
        Template::TriggerPublisher => Value::Address(exec.publisher),
    })
}

fn predicate_holds(p: &ScriptPredicate, exec: &TriggeredExecution, available: Amount) -> bool {
    match p {
        ScriptPredicate::Always => true,
        ScriptPredicate::Never => false,
        ScriptPredicate::BalanceBelow(a) => available < *a,
        ScriptPredicate::FieldEquals(i, v) => exec.payload.get(*i as usize) == Some(v),
        ScriptPredicate::DigestChance(per_mille) => exec.digest().prefix_u64() % 1000 < u64::from(*per_mille),
    }
}

fn run_script(
    st: &LedgerState,
    script: &[Action],
    exec: &TriggeredExecution,
    ctx: &ExecCtx,
    cfg: &LedgerConfig,
) -> Result<Overlay, (Halt, Gas)> {
    let me = exec.subscription.subscriber;
    let reserve = exec.prefund();
    let mut ov = Overlay { gas: cfg.gas.base_trigger_gas, ..Overlay::default() };
    let charge = |ov: &mut Overlay, g: Gas| -> Result<(), (Halt, Gas)> {
        ov.gas = ov.gas.saturating_add(g);
        if ov.gas > exec.gas_limit {
            Err((Halt::OutOfGas, exec.gas_limit))
        } else {
            Ok(())
        }
    };
    charge(&mut ov, 0)?;
    for action in script {
        // Balance the script may still move, keeping the gas and fee reserve.
        let available = st.chain.balance(&me).saturating_sub(reserve).saturating_sub(ov.debited);
        match action {
            Action::ConsumeGas(g) => charge(&mut ov, *g)?,
            Action::Noop => {}
            Action::RevertIf(p) => {
                if predicate_holds(p, exec, available) {
                    return Err((Halt::Revert, ov.gas));
                }
            }
            Action::EmitEvent { event_id, payload, subscription_fee } => {
                charge(&mut ov, cfg.gas.emit_event_gas)?;
                let values: Option<Vec<Value>> = payload.iter().map(|t| template_value(t, exec, ctx)).collect();
                let def = st.events.definition(event_id);
                match (values, def) {
                    (Some(v), Some(d)) if d.accepts(&v) => ov.emits.push((*event_id, v, *subscription_fee)),
                    _ => return Err((Halt::Revert, ov.gas)),
                }
            }
            Action::Transfer { to, amount, memo } => {
                charge(&mut ov, cfg.gas.transfer_gas)?;
                let dest = match to {
                    Target::Fixed(a) => Some(*a),
                    Target::TriggerField(i) => exec.payload.get(*i as usize).and_then(Value::as_address),
                    Target::TriggerPublisher => Some(exec.publisher),
                };
                let Some(dest) = dest else { return Err((Halt::Revert, ov.gas)) };
                if *amount > available {
                    return Err((Halt::Revert, ov.gas));
                }
                ov.debited += amount;
                ov.credits.push((dest, *amount, memo.clone()));
            }
            Action::Subscribe { event_id, params } => {
                charge(&mut ov, cfg.gas.subscribe_gas)?;
                let ok = st
                    .events
                    .definition(event_id)
                    .is_some_and(|d| parse_constraint(&params.constraint, d).is_ok());
                if !ok {
                    return Err((Halt::Revert, ov.gas));
                }
                ov.subscribes.push((*event_id, params.clone()));
            }
        }
    }
    Ok(ov)
}

/// Runs a triggered execution. A revert keeps only the gas payment to the
/// miner; the subscription fee is not paid.
pub fn execute_execution(
    st: &mut LedgerState,
    exec: &TriggeredExecution,
    ctx: &ExecCtx,
    cfg: &LedgerConfig,
    reserve: &mut NonceReserve,
) -> Result<ExecOutcome, ExecError> {
    let me = exec.subscription.subscriber;
    let script = st.chain.contracts.get(&me).ok_or(ExecError::UnknownContract)?.script.on_trigger.clone();
    if st.chain.balance(&me) < exec.prefund() {
        return Err(ExecError::InsufficientPrefund);
    }
    let digest = exec.digest();
    match run_script(st, &script, exec, ctx, cfg) {
        Err((_, gas_used)) => {
            let miner_fee = u128::from(gas_used) * exec.gas_price;
            st.chain.debit(&me, miner_fee);
            st.chain.credit(ctx.miner, miner_fee);
            Ok(ExecOutcome {
                receipt: Receipt {
                    tx: digest,
                    status: ReceiptStatus::Reverted,
                    gas_used,
                    miner_fee,
                    subscription_fee: 0,
                    publisher: exec.publisher,
                    emitted: vec![],
                },
                emitted: vec![],
            })
        }
        Ok(ov) => {
            let miner_fee = u128::from(ov.gas) * exec.gas_price;
            let fee = exec.subscription_fee_paid;
            st.chain.debit(&me, miner_fee + fee + ov.debited);
            st.chain.credit(ctx.miner, miner_fee);
            st.chain.credit(exec.publisher, fee);
            let mut emitted = Vec::new();
            for (event_id, payload, sub_fee) in ov.emits {
                let nonce = reserve.next(&st.events, event_id, me);
                emitted.push(EventUpdate::internal(me, event_id, nonce, payload, sub_fee));
            }
            for (to, amount, memo) in ov.credits {
                st.chain.credit(to, amount);
                st.chain.accounts.entry(to).or_insert_with(|| Account::external(0));
                emitted.push(transfer_update(&st.events, reserve, me, to, amount, memo));
            }
            for (event_id, params) in ov.subscribes {
                st.events.subscribe_mut(event_id, me, params, ctx.height).expect("checked in script");
            }
            Ok(ExecOutcome {
                receipt: Receipt {
                    tx: digest,
                    status: ReceiptStatus::Success,
                    gas_used: ov.gas,
                    miner_fee,
                    subscription_fee: fee,
                    publisher: exec.publisher,
                    emitted: emitted.iter().map(EventUpdate::digest).collect(),
                },
                emitted,
            })
        }
    }
}
