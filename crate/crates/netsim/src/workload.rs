//! Accounts, contracts and messages of the simulated workload.
//!
//! Both models share one genesis so background traffic is identical. The
//! edsc model measures contracts subscribed to the oracle's price event. The
//! baseline measures consumer contracts whose transaction-event callback
//! fires when the oracle's responder pays them after seeing the request.

use std::collections::BTreeMap;

use edsc_core::crypto::KeyPair;
use edsc_core::event::{EventDefinition, EventUpdate, Value, VarType};
use edsc_core::ledger::{GenesisBuilder, LedgerState};
use edsc_core::message::{Action, ContractScript, MessageBody, ProtocolMessage, SubscriptionParams, TriggeredExecution};
use edsc_core::{Address, Amount, Gas};

use crate::chain::Hit;
use crate::config::SimConfig;

const FUNDS: Amount = 1_000_000_000_000_000_000;
const SUBSCRIBER_GAS_LIMIT_MARGIN: Gas = 20_000;
pub const ORACLE_INCLUSION_FEE: Amount = 10;

/// Gas price of measured slot `c`.
pub fn slot_price(c: usize) -> Amount {
    30 + 5 * c as Amount
}

/// Background sink `j` of `n`, priced across 1..=100.
pub fn sink_price(j: usize, n: usize) -> Amount {
    if n <= 1 {
        return 50;
    }
    1 + (99 * j / (n - 1)) as Amount
}

pub fn memo(sample: u32) -> Vec<u8> {
    sample.to_be_bytes().to_vec()
}

fn memo_sample(v: &Value) -> Option<u32> {
    Some(u32::from_be_bytes(v.as_bytes()?.try_into().ok()?))
}

#[derive(Debug)]
pub struct Workload {
    pub oracle: KeyPair,
    pub price_event: Address,
    /// edsc: contracts subscribed to the price event.
    pub subscribers: Vec<Address>,
    /// baseline: request senders, their contracts, and the paying responders.
    pub consumers: Vec<KeyPair>,
    pub consumer_contracts: Vec<Address>,
    pub responders: Vec<KeyPair>,
    pub oracle_contract: Address,
    pub bg_senders: Vec<KeyPair>,
    pub sinks: Vec<Address>,
    pub sink_prices: Vec<Amount>,
    pub miners: Vec<Address>,
    subscriber_slot: BTreeMap<Address, u16>,
    consumer_slot: BTreeMap<Address, u16>,
}

fn contract_params(price: Amount, gas_limit: Gas) -> SubscriptionParams {
    SubscriptionParams::new(price, gas_limit)
}

impl Workload {
    pub fn new(cfg: &SimConfig) -> (Self, LedgerState) {
        let w = &cfg.workload;
        let gas = &cfg.ledger.gas;
        let mut g = GenesisBuilder::new(edsc_core::event_state::DEFAULT_ACTIVATION_DELAY);
        let deployer = Address::from_label("sim/deployer");
        let callback = ContractScript::new(vec![Action::ConsumeGas(w.subscriber_gas)]);
        let callback_limit = gas.base_trigger_gas + w.subscriber_gas + SUBSCRIBER_GAS_LIMIT_MARGIN;

        let oracle = KeyPair::keyed_from_label("sim/oracle");
        g.fund(oracle.address(), FUNDS);
        let price_event = g.event(EventDefinition::new(
            oracle.address(),
            vec![("sample".into(), VarType::Int), ("price".into(), VarType::Int)],
            "oracle price sample",
        ));

        let mut subscribers = Vec::new();
        let mut consumers = Vec::new();
        let mut consumer_contracts = Vec::new();
        let mut responders = Vec::new();
        for c in 0..w.subscribers {
            let s = Address::from_label(&format!("sim/subscriber/{c}"));
            g.contract(s, deployer, callback.clone(), FUNDS, contract_params(1, gas.base_trigger_gas));
            g.subscribe(price_event, s, contract_params(slot_price(c), callback_limit));
            subscribers.push(s);

            let k = KeyPair::keyed_from_label(&format!("sim/consumer/{c}"));
            g.fund(k.address(), FUNDS);
            let cc = Address::from_label(&format!("sim/consumer-contract/{c}"));
            g.contract(cc, k.address(), callback.clone(), FUNDS, contract_params(slot_price(c), callback_limit));
            consumers.push(k);
            consumer_contracts.push(cc);

            let r = KeyPair::keyed_from_label(&format!("sim/responder/{c}"));
            g.fund(r.address(), FUNDS);
            responders.push(r);
        }
        let oracle_contract = Address::from_label("sim/oracle-contract");
        g.contract(
            oracle_contract,
            oracle.address(),
            ContractScript::new(vec![Action::Noop]),
            FUNDS,
            contract_params(1, gas.base_trigger_gas),
        );

        let sink_script = ContractScript::new(vec![Action::ConsumeGas(w.background_exec_gas)]);
        let sink_limit = gas.base_trigger_gas + w.background_exec_gas;
        let mut sinks = Vec::new();
        let mut sink_prices = Vec::new();
        for j in 0..w.background_sinks {
            let a = Address::from_label(&format!("sim/sink/{j}"));
            let p = sink_price(j, w.background_sinks);
            g.contract(a, deployer, sink_script.clone(), FUNDS, contract_params(p, sink_limit));
            sinks.push(a);
            sink_prices.push(p);
        }
        let bg_senders: Vec<KeyPair> = (0..w.background_senders)
            .map(|i| {
                let k = KeyPair::keyed_from_label(&format!("sim/background/{i}"));
                g.fund(k.address(), FUNDS);
                k
            })
            .collect();
        let miners = (0..cfg.node_count).map(|i| Address::from_label(&format!("sim/miner/{i}"))).collect();

        let subscriber_slot = subscribers.iter().enumerate().map(|(i, a)| (*a, i as u16)).collect();
        let consumer_slot = consumer_contracts.iter().enumerate().map(|(i, a)| (*a, i as u16)).collect();
        let wl = Self {
            oracle,
            price_event,
            subscribers,
            consumers,
            consumer_contracts,
            responders,
            oracle_contract,
            bg_senders,
            sinks,
            sink_prices,
            miners,
            subscriber_slot,
            consumer_slot,
        };
        (wl, g.build())
    }

    pub fn oracle_update(&self, sample: u32) -> EventUpdate {
        let price = 1_000 + i64::from(sample % 97);
        EventUpdate::external(
            &self.oracle,
            self.price_event,
            u64::from(sample) + 1,
            vec![Value::Int(i64::from(sample)), Value::Int(price)],
            0,
            ORACLE_INCLUSION_FEE,
        )
    }

    pub fn request(&self, slot: usize, nonce: u64, sample: u32) -> ProtocolMessage {
        ProtocolMessage::signed(
            &self.consumers[slot],
            nonce,
            slot_price(slot),
            0,
            MessageBody::TransferEvent { to: self.oracle_contract, amount: 1, memo: memo(sample) },
        )
    }

    pub fn response(&self, slot: usize, nonce: u64, sample: u32) -> ProtocolMessage {
        ProtocolMessage::signed(
            &self.responders[slot],
            nonce,
            slot_price(slot),
            0,
            MessageBody::TransferEvent { to: self.consumer_contracts[slot], amount: 1, memo: memo(sample) },
        )
    }

    pub fn background(&self, sender: usize, sink: usize, nonce: u64) -> ProtocolMessage {
        ProtocolMessage::signed(
            &self.bg_senders[sender],
            nonce,
            self.sink_prices[sink],
            0,
            MessageBody::TransferEvent { to: self.sinks[sink], amount: 1, memo: Vec::new() },
        )
    }

    /// Measured callback carried by `e`, if any.
    pub fn hit(&self, e: &TriggeredExecution) -> Option<Hit> {
        let sub = e.subscription.subscriber;
        if e.subscription.event_id == self.price_event {
            let slot = *self.subscriber_slot.get(&sub)?;
            let sample = u32::try_from(e.payload.first()?.as_int()?).ok()?;
            return Some(Hit { sample, slot });
        }
        let slot = *self.consumer_slot.get(&sub)?;
        let from = e.payload.first()?.as_address()?;
        if from != self.responders[slot as usize].address() {
            return None;
        }
        Some(Hit { sample: memo_sample(e.payload.get(3)?)?, slot })
    }
}
