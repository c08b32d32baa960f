#![allow(dead_code)]

use edsc_core::crypto::KeyPair;
use edsc_core::event::{EventDefinition, EventUpdate, Value, VarType};
use edsc_core::event_manager::{EventBuffer, DEFAULT_BUFFER_CAPACITY};
use edsc_core::ledger::{
    build_block, BuildParams, BuiltBlock, GenesisBuilder, LedgerConfig, LedgerState, TxPool,
};
use edsc_core::message::{Action, ContractScript, SubscriptionParams, SubscriptionRef, TriggeredExecution};
use edsc_core::{Address, Amount, Gas, HashDigest};

pub const FUNDS: Amount = 1_000_000_000_000;
pub const GAS_LIMIT: Gas = 8_000_000;

pub fn miner() -> Address {
    Address::from_label("miner")
}

pub fn oracle_key() -> KeyPair {
    KeyPair::keyed_from_label("oracle")
}

pub fn price_def() -> EventDefinition {
    EventDefinition::new(oracle_key().address(), vec![("round".into(), VarType::Int), ("price".into(), VarType::Int)], "price")
}

/// Genesis with the oracle funded and its price event registered.
pub fn genesis() -> (GenesisBuilder, Address) {
    let mut g = GenesisBuilder::new(2);
    g.fund(oracle_key().address(), FUNDS);
    let ev = g.event(price_def());
    (g, ev)
}

pub fn install(g: &mut GenesisBuilder, addr: Address, actions: Vec<Action>, balance: Amount) {
    g.contract(addr, Address::from_label("deployer"), ContractScript::new(actions), balance, SubscriptionParams::new(1, 100_000));
}

pub fn price_update(ev: Address, nonce: u64, price: i64) -> EventUpdate {
    EventUpdate::external(&oracle_key(), ev, nonce, vec![Value::Int(nonce as i64), Value::Int(price)], 0, 10)
}

pub fn params(number: u64, parent: HashDigest, gas_limit: Gas) -> BuildParams {
    BuildParams { parent, number, timestamp_ms: number * 12_420, miner: miner(), gas_limit }
}

pub fn build(parent: &LedgerState, number: u64, pool: &TxPool, updates: &[EventUpdate], gas_limit: Gas) -> BuiltBlock {
    let mut buf = EventBuffer::new(DEFAULT_BUFFER_CAPACITY);
    for u in updates {
        buf.ingest(u.clone(), &parent.events).expect("fixture update accepted");
    }
    build_block(parent, pool, &buf, &params(number, HashDigest::default(), gas_limit), &LedgerConfig::default())
}

pub fn exec_for(subscriber: Address, gas_price: Amount, gas_limit: Gas, fee: Amount) -> TriggeredExecution {
    TriggeredExecution {
        subscription: SubscriptionRef { event_id: Address::from_label("ev"), subscriber, ordinal: 1 },
        triggering_update: HashDigest::default(),
        publisher: Address::from_label("publisher"),
        payload: vec![],
        gas_price,
        gas_limit,
        subscription_fee_paid: fee,
        subscriber_data: vec![],
        created_block: 1,
    }
}
