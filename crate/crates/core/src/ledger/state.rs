use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::codec::Canonical;
use crate::event_manager::EpochCounters;
use crate::event_state::EventState;
use crate::merkle;
use crate::message::{ContractScript, TriggeredExecution};
use crate::types::{Address, Amount, HashDigest};
use crate::canonical_struct;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountKind {
    External,
    Contract,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    #[serde(with = "crate::types::amount_str")]
    pub balance: Amount,
    pub nonce: u64,
    pub kind: AccountKind,
}

impl Account {
    pub fn external(balance: Amount) -> Self {
        Self { balance, nonce: 0, kind: AccountKind::External }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contract {
    pub owner: Address,
    pub script: ContractScript,
}

/// Accounts, contracts, carried-over executions and epoch counters.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub accounts: BTreeMap<Address, Account>,
    pub contracts: BTreeMap<Address, Contract>,
    /// Triggered executions created but not yet included, in digest order.
    pub pending: Vec<TriggeredExecution>,
    pub counters: EpochCounters,
}

impl ChainState {
    pub fn balance(&self, a: &Address) -> Amount {
        self.accounts.get(a).map_or(0, |acc| acc.balance)
    }

    pub fn nonce(&self, a: &Address) -> u64 {
        self.accounts.get(a).map_or(0, |acc| acc.nonce)
    }

    pub fn is_contract(&self, a: &Address) -> bool {
        self.contracts.contains_key(a)
    }

    pub fn credit(&mut self, a: Address, amount: Amount) {
        if amount == 0 {
            return;
        }
        let acc = self.accounts.entry(a).or_insert_with(|| Account::external(0));
        acc.balance = acc.balance.checked_add(amount).expect("token supply overflow");
    }

    /// Panics when the balance is short; callers check first.
    pub fn debit(&mut self, a: &Address, amount: Amount) {
        if amount == 0 {
            return;
        }
        let acc = self.accounts.get_mut(a).expect("debited account exists");
        acc.balance = acc.balance.checked_sub(amount).expect("balance checked before debit");
    }

    /// Debits up to `amount` and returns what was taken.
    pub fn debit_saturating(&mut self, a: &Address, amount: Amount) -> Amount {
        let Some(acc) = self.accounts.get_mut(a) else { return 0 };
        let taken = acc.balance.min(amount);
        acc.balance -= taken;
        taken
    }

    pub fn total_supply(&self) -> Amount {
        self.accounts.values().map(|a| a.balance).sum()
    }

    pub fn root_hash(&self) -> HashDigest {
        let mut leaves: Vec<(Vec<u8>, Vec<u8>)> =
            Vec::with_capacity(self.accounts.len() + self.contracts.len() + self.pending.len() + 1);
        for (a, acc) in &self.accounts {
            leaves.push(([b"A".as_slice(), &a.0].concat(), acc.encode()));
        }
        for (a, c) in &self.contracts {
            leaves.push(([b"C".as_slice(), &a.0].concat(), c.encode()));
        }
        for e in &self.pending {
            leaves.push(([b"P".as_slice(), &e.digest().0].concat(), e.encode()));
        }
        leaves.push((b"E".to_vec(), self.counters.encode()));
        merkle::root_of_entries(&leaves)
    }
}

impl Canonical for AccountKind {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(match self {
            AccountKind::External => 0,
            AccountKind::Contract => 1,
        });
    }
    fn decode_from(r: &mut crate::codec::Reader<'_>) -> Result<Self, crate::codec::DecodeError> {
        Ok(match r.tag("account kind", 1)? {
            0 => AccountKind::External,
            _ => AccountKind::Contract,
        })
    }
}

canonical_struct!(Account { balance, nonce, kind });
canonical_struct!(Contract { owner, script });

/// Chain state plus the event registry: everything a block commits to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerState {
    pub chain: ChainState,
    pub events: EventState,
}

impl LedgerState {
    pub fn roots(&self) -> (HashDigest, HashDigest) {
        (self.chain.root_hash(), self.events.root_hash())
    }
}
