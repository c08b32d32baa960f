//! Accounts, scripted contracts, block building and validation.

mod builder;
mod exec;
mod pool;
mod state;
mod validate;

pub use builder::{build_block, candidate_order, BuildParams, BuiltBlock};
pub use exec::{execute_execution, execute_message, ExecCtx, ExecError, ExecOutcome, MessageError, NonceReserve};
pub use pool::{PoolError, TxPool};
pub use state::{Account, AccountKind, ChainState, Contract, LedgerState};
pub use validate::{validate_block, BlockLog, BlockLogError, BlockRejection, LogGenesis};

use serde::{Deserialize, Serialize};

use crate::event::{new_block_event_definition, transfer_event_definition};
use crate::event_manager::RateLimits;
use crate::event_state::EventState;
use crate::matcher::EVAL_GAS_PER_NODE;
use crate::message::{MessageKind, SubscriptionParams};
use crate::types::{Address, Amount, Gas};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GasSchedule {
    pub event_create_gas: Gas,
    pub subscribe_gas: Gas,
    pub subscription_update_gas: Gas,
    pub deploy_gas: Gas,
    pub transfer_gas: Gas,
    pub base_trigger_gas: Gas,
    pub eval_gas_per_node: Gas,
    /// Charged per `emit_event` script action.
    pub emit_event_gas: Gas,
}

impl Default for GasSchedule {
    fn default() -> Self {
        Self {
            event_create_gas: 50_000,
            subscribe_gas: 40_000,
            subscription_update_gas: 20_000,
            deploy_gas: 100_000,
            transfer_gas: 21_000,
            base_trigger_gas: 10_000,
            eval_gas_per_node: EVAL_GAS_PER_NODE,
            emit_event_gas: 2_000,
        }
    }
}

impl GasSchedule {
    /// Gas charged for an account message. External updates pay only
    /// their inclusion fee.
    pub fn message_gas(&self, kind: MessageKind) -> Gas {
        match kind {
            MessageKind::EventCreate => self.event_create_gas,
            MessageKind::Subscribe => self.subscribe_gas,
            MessageKind::Unsubscribe | MessageKind::SubscriptionUpdate => self.subscription_update_gas,
            MessageKind::TransferEvent => self.transfer_gas,
            MessageKind::DeployEvent => self.deploy_gas,
            MessageKind::ExternalEventUpdate => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerConfig {
    pub gas: GasSchedule,
    pub limits: RateLimits,
    /// External updates drained per block.
    pub update_budget: usize,
    /// Minted to the miner per block.
    #[serde(with = "crate::types::amount_str")]
    pub block_reward: Amount,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        Self { gas: GasSchedule::default(), limits: RateLimits::default(), update_budget: 256, block_reward: 0 }
    }
}

/// Deterministic address of a contract deployed by `sender` at `nonce`.
pub fn contract_address(sender: &Address, nonce: u64) -> Address {
    crate::crypto::hash_parts(&[b"edsc/contract", &sender.0, &nonce.to_be_bytes()]).truncate_address()
}

/// Genesis helper: builds a state with the system events registered.
#[derive(Clone, Debug, Default)]
pub struct GenesisBuilder {
    state: LedgerState,
}

impl GenesisBuilder {
    pub fn new(activation_delay: u64) -> Self {
        let mut events = EventState::new(activation_delay);
        events.insert_definition(transfer_event_definition()).expect("fresh registry");
        events.insert_definition(new_block_event_definition()).expect("fresh registry");
        Self { state: LedgerState { chain: ChainState::default(), events } }
    }

    pub fn fund(&mut self, a: Address, amount: Amount) -> &mut Self {
        self.state.chain.credit(a, amount);
        self.state.chain.accounts.entry(a).or_insert_with(|| Account::external(0));
        self
    }

    /// Installs a contract, active from genesis, subscribed to the
    /// transaction event with `trigger` terms.
    pub fn contract(
        &mut self,
        address: Address,
        owner: Address,
        script: crate::message::ContractScript,
        balance: Amount,
        trigger: SubscriptionParams,
    ) -> &mut Self {
        let chain = &mut self.state.chain;
        chain.accounts.insert(address, Account { balance, nonce: 0, kind: AccountKind::Contract });
        chain.contracts.insert(address, Contract { owner, script });
        self.state
            .events
            .subscribe_at(crate::event::transfer_event_id(), address, trigger, 0)
            .expect("system event registered");
        self
    }

    pub fn event(&mut self, def: crate::event::EventDefinition) -> Address {
        self.state.events.insert_definition(def).expect("unique genesis event")
    }

    pub fn subscribe(&mut self, event_id: Address, subscriber: Address, params: SubscriptionParams) -> &mut Self {
        self.state.events.subscribe_at(event_id, subscriber, params, 0).expect("valid genesis subscription");
        self
    }

    pub fn state_mut(&mut self) -> &mut LedgerState {
        &mut self.state
    }

    pub fn build(&self) -> LedgerState {
        self.state.clone()
    }
}
