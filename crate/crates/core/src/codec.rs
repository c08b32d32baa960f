//! Canonical binary encoding.
//!
//! Byte layout (see `docs/canonical-encoding.md`):
//! integers are fixed-width big-endian, `bool` is one byte (0 or 1), byte
//! strings and UTF-8 text carry a `u32` length prefix, sequences carry a
//! `u32` count prefix, `Option` is a one-byte tag followed by the value, and
//! enums are a one-byte variant tag followed by the variant fields in
//! declaration order. Struct fields are written in declaration order.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::types::{Address, HashDigest};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("unexpected end of input at offset {0}")]
    Truncated(usize),
    #[error("invalid tag {tag} for {what}")]
    BadTag { what: &'static str, tag: u8 },
    #[error("invalid utf-8 text")]
    BadUtf8,
    #[error("{0} trailing bytes after value")]
    Trailing(usize),
    #[error("invalid value: {0}")]
    Invalid(String),
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated(self.pos))?;
        if end > self.buf.len() {
            return Err(DecodeError::Truncated(self.pos));
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn tag(&mut self, what: &'static str, max: u8) -> Result<u8, DecodeError> {
        let tag = self.u8()?;
        if tag > max {
            return Err(DecodeError::BadTag { what, tag });
        }
        Ok(tag)
    }
}

pub trait Canonical: Sized {
    fn encode_to(&self, out: &mut Vec<u8>);
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError>;

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_to(&mut out);
        out
    }

    /// Decodes a complete value; trailing bytes are an error.
    fn decode(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let v = Self::decode_from(&mut r)?;
        match r.remaining() {
            0 => Ok(v),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

macro_rules! int_impl {
    ($t:ty) => {
        impl Canonical for $t {
            fn encode_to(&self, out: &mut Vec<u8>) {
                out.extend_from_slice(&self.to_be_bytes());
            }
            fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
                let raw = r.take(std::mem::size_of::<$t>())?;
                Ok(<$t>::from_be_bytes(raw.try_into().expect("exact width")))
            }
        }
    };
}

int_impl!(u8);
int_impl!(u32);
int_impl!(u64);
int_impl!(u128);
int_impl!(i64);

impl Canonical for bool {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.push(u8::from(*self));
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(r.tag("bool", 1)? == 1)
    }
}

fn encode_len(len: usize, out: &mut Vec<u8>) {
    let len = u32::try_from(len).expect("length fits in u32");
    len.encode_to(out);
}

impl Canonical for Vec<u8> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        encode_len(self.len(), out);
        out.extend_from_slice(self);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let len = u32::decode_from(r)? as usize;
        Ok(r.take(len)?.to_vec())
    }
}

impl Canonical for String {
    fn encode_to(&self, out: &mut Vec<u8>) {
        encode_len(self.len(), out);
        out.extend_from_slice(self.as_bytes());
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let len = u32::decode_from(r)? as usize;
        String::from_utf8(r.take(len)?.to_vec()).map_err(|_| DecodeError::BadUtf8)
    }
}

impl Canonical for Address {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(Address::from_slice(r.take(20)?).expect("20 bytes"))
    }
}

impl Canonical for HashDigest {
    fn encode_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(HashDigest::from_slice(r.take(32)?).expect("32 bytes"))
    }
}

impl<T: Canonical> Canonical for Option<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            None => out.push(0),
            Some(v) => {
                out.push(1);
                v.encode_to(out);
            }
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        match r.tag("option", 1)? {
            0 => Ok(None),
            _ => Ok(Some(T::decode_from(r)?)),
        }
    }
}

/// Sequences. `Vec<u8>` has its own byte-string impl, so this is a helper
/// rather than a blanket impl.
pub fn encode_seq<T: Canonical>(items: &[T], out: &mut Vec<u8>) {
    encode_len(items.len(), out);
    for item in items {
        item.encode_to(out);
    }
}

pub fn decode_seq<T: Canonical>(r: &mut Reader<'_>) -> Result<Vec<T>, DecodeError> {
    let n = u32::decode_from(r)? as usize;
    // Each element takes at least one byte; refuse absurd counts early.
    if n > r.remaining() {
        return Err(DecodeError::Truncated(r.pos));
    }
    (0..n).map(|_| T::decode_from(r)).collect()
}

impl<T: Canonical + Ord> Canonical for BTreeSet<T> {
    fn encode_to(&self, out: &mut Vec<u8>) {
        encode_len(self.len(), out);
        for item in self {
            item.encode_to(out);
        }
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let items: Vec<T> = decode_seq(r)?;
        let n = items.len();
        let set: BTreeSet<T> = items.into_iter().collect();
        if set.len() != n {
            return Err(DecodeError::Invalid("duplicate set element".into()));
        }
        Ok(set)
    }
}

impl<A: Canonical, B: Canonical> Canonical for (A, B) {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.0.encode_to(out);
        self.1.encode_to(out);
    }
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok((A::decode_from(r)?, B::decode_from(r)?))
    }
}

/// Implements `Canonical` for `Vec<T>` of the listed element types.
#[macro_export]
macro_rules! canonical_seq {
    ($($t:ty),* $(,)?) => {$(
        impl $crate::codec::Canonical for Vec<$t> {
            fn encode_to(&self, out: &mut Vec<u8>) {
                $crate::codec::encode_seq(self, out);
            }
            fn decode_from(
                r: &mut $crate::codec::Reader<'_>,
            ) -> Result<Self, $crate::codec::DecodeError> {
                $crate::codec::decode_seq(r)
            }
        }
    )*};
}

/// Implements `Canonical` for a struct by writing its fields in order.
#[macro_export]
macro_rules! canonical_struct {
    ($t:ident { $($f:ident),* $(,)? }) => {
        impl $crate::codec::Canonical for $t {
            fn encode_to(&self, out: &mut Vec<u8>) {
                $( $crate::codec::Canonical::encode_to(&self.$f, out); )*
            }
            fn decode_from(
                r: &mut $crate::codec::Reader<'_>,
            ) -> Result<Self, $crate::codec::DecodeError> {
                Ok(Self { $( $f: $crate::codec::Canonical::decode_from(r)?, )* })
            }
        }
    };
}

canonical_seq!(u64, Address, HashDigest, Vec<u8>, String);

/// Digest of a value's canonical encoding.
pub fn digest_of<T: Canonical>(v: &T) -> HashDigest {
    crate::crypto::hash(&v.encode())
}
