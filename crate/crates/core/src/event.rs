//! Event definitions and event updates.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::codec::{decode_seq, digest_of, encode_seq, Canonical, DecodeError, Reader};
use crate::crypto::{hash_parts, KeyPair, PublicKey, Signature};
use crate::types::{Address, Amount, HashDigest};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarType {
    Int,
    Bytes,
    Address,
    Bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Int(i64),
    Bytes(#[serde(with = "crate::types::hex_bytes")] Vec<u8>),
    Address(Address),
    Bool(bool),
}

impl Value {
    pub fn var_type(&self) -> VarType {
        match self {
            Value::Int(_) => VarType::Int,
            Value::Bytes(_) => VarType::Bytes,
            Value::Address(_) => VarType::Address,
            Value::Bool(_) => VarType::Bool,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_address(&self) -> Option<Address> {
        match self {
            Value::Address(a) => Some(*a),
            _ => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Value::Bytes(b) => Some(b),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventDefinition {
    pub event_id: Address,
    pub creator: Address,
    pub variables: Vec<(String, VarType)>,
    pub comments: String,
}

impl EventDefinition {
    /// Builds a definition and fills in its derived identifier.
    pub fn new(creator: Address, variables: Vec<(String, VarType)>, comments: &str) -> Self {
        let mut def = Self { event_id: Address::ZERO, creator, variables, comments: comments.into() };
        def.event_id = derive_event_id(&creator, &def.id_preimage());
        def
    }

    /// Canonical encoding with the identifier zeroed.
    pub fn id_preimage(&self) -> Vec<u8> {
        let mut zeroed = self.clone();
        zeroed.event_id = Address::ZERO;
        zeroed.encode()
    }

    pub fn has_unique_names(&self) -> bool {
        let mut names: Vec<&str> = self.variables.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        names.windows(2).all(|w| w[0] != w[1])
    }

    pub fn variable(&self, name: &str) -> Option<(usize, VarType)> {
        self.variables.iter().position(|(n, _)| n == name).map(|i| (i, self.variables[i].1))
    }

    /// Payload arity and types match the variable list.
    pub fn accepts(&self, payload: &[Value]) -> bool {
        payload.len() == self.variables.len()
            && payload.iter().zip(&self.variables).all(|(v, (_, t))| v.var_type() == *t)
    }
}

/// First 20 bytes of `hash(creator || definition_bytes)`.
pub fn derive_event_id(creator: &Address, definition_bytes: &[u8]) -> Address {
    hash_parts(&[&creator.0, definition_bytes]).truncate_address()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    External,
    Internal,
    System,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventUpdate {
    pub event_id: Address,
    pub publisher: Address,
    pub publisher_key: PublicKey,
    pub nonce: u64,
    pub payload: Vec<Value>,
    #[serde(with = "crate::types::amount_str")]
    pub subscription_fee: Amount,
    #[serde(with = "crate::types::amount_str")]
    pub inclusion_fee: Amount,
    pub signature: Option<Signature>,
    pub origin: Origin,
}

impl EventUpdate {
    /// Signed external update.
    #[allow(clippy::too_many_arguments)]
    pub fn external(
        key: &KeyPair,
        event_id: Address,
        nonce: u64,
        payload: Vec<Value>,
        subscription_fee: Amount,
        inclusion_fee: Amount,
    ) -> Self {
        let mut u = Self {
            event_id,
            publisher: key.address(),
            publisher_key: key.public().clone(),
            nonce,
            payload,
            subscription_fee,
            inclusion_fee,
            signature: None,
            origin: Origin::External,
        };
        u.signature = Some(key.sign(&u.signing_digest()));
        u
    }

    /// Update emitted by a contract during execution.
    pub fn internal(
        contract: Address,
        event_id: Address,
        nonce: u64,
        payload: Vec<Value>,
        subscription_fee: Amount,
    ) -> Self {
        Self {
            event_id,
            publisher: contract,
            publisher_key: PublicKey::Contract(contract),
            nonce,
            payload,
            subscription_fee,
            inclusion_fee: 0,
            signature: None,
            origin: Origin::Internal,
        }
    }

    /// System-generated update (new-block and transaction events).
    pub fn system(event_id: Address, publisher: Address, nonce: u64, payload: Vec<Value>) -> Self {
        Self {
            event_id,
            publisher,
            publisher_key: PublicKey::System,
            nonce,
            payload,
            subscription_fee: 0,
            inclusion_fee: 0,
            signature: None,
            origin: Origin::System,
        }
    }

    /// Digest covered by the publisher's signature.
    pub fn signing_digest(&self) -> HashDigest {
        let mut unsigned = self.clone();
        unsigned.signature = None;
        digest_of(&unsigned)
    }

    /// Identity of this update (includes the signature).
    pub fn digest(&self) -> HashDigest {
        digest_of(self)
    }
}

pub const TRANSFER_EVENT_LABEL: &str = "edsc/system/transaction-event";
pub const NEW_BLOCK_EVENT_LABEL: &str = "edsc/system/new-block-event";

/// The transaction event every contract is subscribed to by default.
/// Payload: `(from: address, to: address, amount: int, memo: bytes)`.
pub fn transfer_event_definition() -> EventDefinition {
    EventDefinition::new(
        Address::ZERO,
        vec![
            ("from".into(), VarType::Address),
            ("to".into(), VarType::Address),
            ("amount".into(), VarType::Int),
            ("memo".into(), VarType::Bytes),
        ],
        TRANSFER_EVENT_LABEL,
    )
}

/// The per-block system event. Payload: `(number: int, timestamp: int)`.
pub fn new_block_event_definition() -> EventDefinition {
    EventDefinition::new(
        Address::ZERO,
        vec![("number".into(), VarType::Int), ("timestamp".into(), VarType::Int)],
        NEW_BLOCK_EVENT_LABEL,
    )
}

pub fn transfer_event_id() -> Address {
    static ID: OnceLock<Address> = OnceLock::new();
    *ID.get_or_init(|| transfer_event_definition().event_id)
}

pub fn new_block_event_id() -> Address {
    static ID: OnceLock<Address> = OnceLock::new();
    *ID.get_or_init(|| new_block_event_definition().event_id)
}

/// Index of the recipient field in the transaction event payload.
pub const TRANSFER_TO_FIELD: usize = 1;

pub(crate) fn amount_to_int(amount: Amount) -> i64 {
    i64::try_from(amount).unwrap_or(i64::MAX)
}

// ---- canonical encoding -------------------------------------------------

impl Canonical for VarType {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(match self {
            VarType::Int => 0,
            VarType::Bytes => 1,
            VarType::Address => 2,
            VarType::Bool => 3,
        });
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("var type", 3)? {
            0 => VarType::Int,
            1 => VarType::Bytes,
            2 => VarType::Address,
            _ => VarType::Bool,
        })
    }
}

impl Canonical for Value {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            Value::Int(v) => {
                out.push(0);
                v.encode_to(out);
            }
            Value::Bytes(b) => {
                out.push(1);
                b.encode_to(out);
            }
            Value::Address(a) => {
                out.push(2);
                a.encode_to(out);
            }
            Value::Bool(b) => {
                out.push(3);
                b.encode_to(out);
            }
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("value", 3)? {
            0 => Value::Int(i64::decode_from(r)?),
            1 => Value::Bytes(Vec::<u8>::decode_from(r)?),
            2 => Value::Address(Address::decode_from(r)?),
            _ => Value::Bool(bool::decode_from(r)?),
        })
    }
}

impl Canonical for EventDefinition {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.event_id.encode_to(out);
        self.creator.encode_to(out);
        encode_seq(&self.variables, out);
        self.comments.encode_to(out);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            event_id: Address::decode_from(r)?,
            creator: Address::decode_from(r)?,
            variables: decode_seq(r)?,
            comments: String::decode_from(r)?,
        })
    }
}

impl Canonical for PublicKey {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            PublicKey::Keyed(d) => {
                out.push(0);
                d.encode_to(out);
            }
            PublicKey::Secp256k1(b) => {
                out.push(1);
                b.encode_to(out);
            }
            PublicKey::Contract(a) => {
                out.push(2);
                a.encode_to(out);
            }
            PublicKey::System => out.push(3),
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("public key", 3)? {
            0 => PublicKey::Keyed(HashDigest::decode_from(r)?),
            1 => PublicKey::Secp256k1(Vec::<u8>::decode_from(r)?),
            2 => PublicKey::Contract(Address::decode_from(r)?),
            _ => PublicKey::System,
        })
    }
}

impl Canonical for Signature {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            Signature::Keyed(d) => {
                out.push(0);
                d.encode_to(out);
            }
            Signature::Secp256k1(b) => {
                out.push(1);
                b.encode_to(out);
            }
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("signature", 1)? {
            0 => Signature::Keyed(HashDigest::decode_from(r)?),
            _ => Signature::Secp256k1(Vec::<u8>::decode_from(r)?),
        })
    }
}

impl Canonical for Origin {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(match self {
            Origin::External => 0,
            Origin::Internal => 1,
            Origin::System => 2,
        });
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.tag("origin", 2)? {
            0 => Origin::External,
            1 => Origin::Internal,
            _ => Origin::System,
        })
    }
}

impl Canonical for EventUpdate {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.event_id.encode_to(out);
        self.publisher.encode_to(out);
        self.publisher_key.encode_to(out);
        self.nonce.encode_to(out);
        encode_seq(&self.payload, out);
        self.subscription_fee.encode_to(out);
        self.inclusion_fee.encode_to(out);
        self.signature.encode_to(out);
        self.origin.encode_to(out);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            event_id: Address::decode_from(r)?,
            publisher: Address::decode_from(r)?,
            publisher_key: PublicKey::decode_from(r)?,
            nonce: u64::decode_from(r)?,
            payload: decode_seq(r)?,
            subscription_fee: u128::decode_from(r)?,
            inclusion_fee: u128::decode_from(r)?,
            signature: Option::<Signature>::decode_from(r)?,
            origin: Origin::decode_from(r)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{hash, verify};

    fn price_def(creator: Address) -> EventDefinition {
        EventDefinition::new(creator, vec![("price".into(), VarType::Int)], "price feed")
    }

    #[test]
    fn event_id_is_deterministic() {
        let c = Address::from_label("creator");
        assert_eq!(price_def(c).event_id, price_def(c).event_id);
    }

    #[test]
    fn same_definition_from_two_creators_gets_two_ids() {
        let a = price_def(Address::from_label("a"));
        let b = price_def(Address::from_label("b"));
        assert_ne!(a.event_id, b.event_id);
        // Direct recomputation from the formula.
        let expected = hash_parts(&[&Address::from_label("a").0, &a.id_preimage()]).truncate_address();
        assert_eq!(a.event_id, expected);
    }

    #[test]
    fn zero_creator_with_empty_definition_bytes() {
        let expected = hash(&[0u8; 20]).truncate_address();
        assert_eq!(derive_event_id(&Address::ZERO, &[]), expected);
    }

    #[test]
    fn comments_are_part_of_the_encoding() {
        let c = Address::from_label("c");
        let a = EventDefinition::new(c, vec![], "one");
        let b = EventDefinition::new(c, vec![], "two");
        assert_ne!(a.id_preimage(), b.id_preimage());
    }

    #[test]
    fn external_update_signature_covers_payload() {
        let kp = KeyPair::keyed_from_label("oracle");
        let id = Address::from_label("ev");
        let u = EventUpdate::external(&kp, id, 1, vec![Value::Int(5)], 1, 2);
        let sig = u.signature.clone().unwrap();
        assert!(verify(&u.publisher_key, &u.signing_digest(), &sig));
        let mut tampered = u.clone();
        tampered.payload[0] = Value::Int(6);
        assert!(!verify(&tampered.publisher_key, &tampered.signing_digest(), &sig));
    }

    #[test]
    fn payload_schema_check() {
        let def = price_def(Address::ZERO);
        assert!(def.accepts(&[Value::Int(1)]));
        assert!(!def.accepts(&[Value::Bool(true)]));
        assert!(!def.accepts(&[]));
    }
}
