use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet};

use crate::codec::Canonical;
use crate::event::{new_block_event_id, EventUpdate, Value};
use crate::event_manager::{
    create_tx_based_on_evts, validate_and_filter_evts, BlockCtx, EventBuffer, RejectReason,
};
use crate::merkle;
use crate::message::{Block, ProtocolMessage, Receipt, TriggeredExecution};
use crate::types::{Address, Amount, Gas, HashDigest, Height};

use super::exec::{execute_execution, execute_message, ExecCtx, MessageError, NonceReserve};
use super::pool::TxPool;
use super::state::LedgerState;
use super::LedgerConfig;

#[derive(Clone, Debug)]
pub struct BuildParams {
    pub parent: HashDigest,
    pub number: Height,
    pub timestamp_ms: u64,
    pub miner: Address,
    pub gas_limit: Gas,
}

#[derive(Clone, Debug)]
pub struct BuiltBlock {
    pub block: Block,
    pub post: LedgerState,
    pub receipts: Vec<Receipt>,
    pub rejected_updates: Vec<(EventUpdate, RejectReason)>,
    pub dropped_messages: Vec<(HashDigest, MessageError)>,
}

/// Selection key: gas price descending, account messages before triggered
/// executions at equal price, then subscription ordinal, then digest.
type Key = (Reverse<Amount>, u8, u64, HashDigest);

fn trigger_key(e: &TriggeredExecution, digest: HashDigest) -> Key {
    (Reverse(e.gas_price), 1, e.subscription.ordinal, digest)
}

fn message_key(m: &ProtocolMessage, digest: HashDigest) -> Key {
    (Reverse(m.gas_price), 0, 0, digest)
}

/// Priority order between two triggered executions.
pub fn candidate_order(a: &TriggeredExecution, b: &TriggeredExecution) -> Ordering {
    trigger_key(a, a.digest()).cmp(&trigger_key(b, b.digest()))
}

enum Pick<'a> {
    Message(&'a ProtocolMessage),
    Trigger(usize),
}

/// Builds the next block on top of `parent`. A pure function of its inputs.
pub fn build_block(
    parent: &LedgerState,
    pool: &TxPool,
    buffer: &EventBuffer,
    params: &BuildParams,
    cfg: &LedgerConfig,
) -> BuiltBlock {
    let height = params.number;
    let ctx = ExecCtx { height, time_ms: params.timestamp_ms, miner: params.miner };
    let bctx = BlockCtx { height, time_secs: ctx.time_secs() };
    let limits = &cfg.limits;
    let gas_per_node = cfg.gas.eval_gas_per_node;

    let mut st = parent.clone();
    st.events.begin_block(height);
    st.chain.counters.roll(height, limits);
    st.chain.credit(params.miner, cfg.block_reward);

    let mut reserve = NonceReserve::default();
    let mut receipts = Vec::new();
    let mut external_messages = Vec::new();
    let mut executed_messages = Vec::new();
    let mut executions = Vec::new();
    let mut execution_rounds = Vec::new();
    let mut rejected_updates = Vec::new();
    let mut dropped_messages = Vec::new();
    let mut gas_used: Gas = 0;

    // Round 0 events: the new-block system event, then drained external
    // updates that pass validation and can pay their inclusion fee.
    let nb_id = new_block_event_id();
    let nb_nonce = reserve.next(&st.events, nb_id, Address::ZERO);
    let new_block = EventUpdate::system(
        nb_id,
        Address::ZERO,
        nb_nonce,
        vec![Value::Int(height as i64), Value::Int(ctx.time_secs())],
    );
    let (mut accepted, rej) = validate_and_filter_evts(vec![new_block], &mut st.events, limits, &mut st.chain.counters);
    rejected_updates.extend(rej);

    let mut drained = buffer.clone().drain_for_block(&st.events, cfg.update_budget);
    for u in drained.drain(..) {
        if st.chain.balance(&u.publisher) < u.inclusion_fee {
            rejected_updates.push((u, RejectReason::InsufficientFee));
            continue;
        }
        let (acc, rej) = validate_and_filter_evts(vec![u], &mut st.events, limits, &mut st.chain.counters);
        rejected_updates.extend(rej);
        for u in acc {
            let envelope = ProtocolMessage::external_update(u.clone());
            let out = execute_message(&mut st, &envelope, &ctx, cfg, &mut reserve)
                .expect("validated update with a covered fee");
            receipts.push(out.receipt);
            external_messages.push(envelope);
            accepted.push(u);
        }
    }

    // Working set of triggered executions: carried over plus new.
    let mut triggers: Vec<(Key, TriggeredExecution)> =
        std::mem::take(&mut st.chain.pending).into_iter().map(|e| (trigger_key(&e, e.digest()), e)).collect();
    let mut blocked_senders: BTreeSet<Address> = BTreeSet::new();
    let m_cap = limits.max_triggers_per_account_per_epoch as usize;

    let mut round: u32 = 0;
    loop {
        let batch = create_tx_based_on_evts(&mut st.events, &accepted, bctx, limits, &mut st.chain.counters, gas_per_node);
        for c in &batch.eval_charges {
            let owed = u128::from(c.gas).saturating_mul(c.gas_price);
            let taken = st.chain.debit_saturating(&c.subscriber, owed);
            st.chain.credit(params.miner, taken);
        }
        triggers.extend(
            batch
                .executions
                .into_iter()
                .filter(|e| e.gas_limit <= params.gas_limit)
                .map(|e| (trigger_key(&e, e.digest()), e)),
        );

        // tx-filter: one message per sender (its next nonce) and at most m
        // triggers per subscriber account.
        let mut cands: Vec<(Key, Pick<'_>)> = Vec::new();
        for (sender, q) in pool.senders() {
            if blocked_senders.contains(sender) {
                continue;
            }
            if let Some(m) = q.get(&st.chain.nonce(sender)) {
                cands.push((message_key(m, m.digest()), Pick::Message(m)));
            }
        }
        triggers.sort_by_key(|a| a.0);
        let mut per_account: BTreeMap<Address, usize> = BTreeMap::new();
        for (i, (k, e)) in triggers.iter().enumerate() {
            let n = per_account.entry(e.subscription.subscriber).or_insert(0);
            if *n < m_cap {
                *n += 1;
                cands.push((*k, Pick::Trigger(i)));
            }
        }
        cands.sort_by_key(|a| a.0);

        let mut selected = 0usize;
        let mut consumed: BTreeSet<usize> = BTreeSet::new();
        let mut emitted: Vec<(Amount, EventUpdate)> = Vec::new();
        for (_, pick) in cands {
            let remaining = params.gas_limit - gas_used;
            match pick {
                Pick::Message(m) => {
                    if cfg.gas.message_gas(m.kind()) > remaining {
                        continue;
                    }
                    match execute_message(&mut st, m, &ctx, cfg, &mut reserve) {
                        Ok(out) => {
                            gas_used += out.receipt.gas_used;
                            receipts.push(out.receipt);
                            emitted.extend(out.emitted.into_iter().map(|u| (m.gas_price, u)));
                            executed_messages.push(m.clone());
                            selected += 1;
                        }
                        Err(e) => {
                            blocked_senders.insert(m.sender);
                            dropped_messages.push((m.digest(), e));
                        }
                    }
                }
                Pick::Trigger(i) => {
                    let e = &triggers[i].1;
                    if e.gas_limit > remaining {
                        continue;
                    }
                    consumed.insert(i);
                    if let Ok(out) = execute_execution(&mut st, e, &ctx, cfg, &mut reserve) {
                        gas_used += out.receipt.gas_used;
                        receipts.push(out.receipt);
                        emitted.extend(out.emitted.into_iter().map(|u| (e.gas_price, u)));
                        executions.push(e.clone());
                        execution_rounds.push(round);
                        selected += 1;
                    }
                }
            }
        }
        let mut idx = 0;
        triggers.retain(|_| {
            idx += 1;
            !consumed.contains(&(idx - 1))
        });

        if selected == 0 && emitted.is_empty() {
            break;
        }
        // Next round's updates, ordered by the emitter's gas price.
        emitted.sort_by_key(|(price, _)| Reverse(*price));
        let next: Vec<EventUpdate> = emitted.into_iter().map(|(_, u)| u).collect();
        let (acc, rej) = validate_and_filter_evts(next, &mut st.events, limits, &mut st.chain.counters);
        rejected_updates.extend(rej);
        accepted = acc;
        round += 1;
    }

    let mut leftover: Vec<(HashDigest, TriggeredExecution)> = triggers.into_iter().map(|(k, e)| (k.3, e)).collect();
    leftover.sort_by_key(|a| a.0);
    st.chain.pending = leftover.into_iter().map(|(_, e)| e).collect();

    external_messages.extend(executed_messages);
    let receipt_bytes: Vec<Vec<u8>> = receipts.iter().map(Canonical::encode).collect();
    let block = Block {
        number: height,
        parent: params.parent,
        timestamp_ms: params.timestamp_ms,
        miner: params.miner,
        gas_limit: params.gas_limit,
        gas_used,
        state_root: st.chain.root_hash(),
        event_state_root: st.events.root_hash(),
        receipts_root: merkle::root_of_list(&receipt_bytes),
        external_messages,
        executions,
        execution_rounds,
    };
    BuiltBlock { block, post: st, receipts, rejected_updates, dropped_messages }
}
