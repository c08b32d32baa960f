//! Binary Merkle root over sorted leaves.
//!
//! Leaves are `H(0x00 || len(key) || key || value)`, sorted by key before
//! hashing. Interior nodes are `H(0x01 || left || right)`; an odd node at any
//! level is paired with itself. The empty set hashes to `H(b"")`.

use crate::crypto::{hash, hash_parts};
use crate::types::HashDigest;

pub fn leaf_hash(key: &[u8], value: &[u8]) -> HashDigest {
    let len = (key.len() as u32).to_be_bytes();
    hash_parts(&[&[0u8], &len, key, value])
}

pub fn empty_root() -> HashDigest {
    hash(b"")
}

/// Root over leaf hashes already in canonical order.
pub fn root_of_leaves(mut level: Vec<HashDigest>) -> HashDigest {
    if level.is_empty() {
        return empty_root();
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len().div_ceil(2));
        for pair in level.chunks(2) {
            let right = pair.get(1).unwrap_or(&pair[0]);
            next.push(hash_parts(&[&[1u8], &pair[0].0, &right.0]));
        }
        level = next;
    }
    level[0]
}

/// Root over `(key, value)` entries; order of the input does not matter.
pub fn root_of_entries<K: AsRef<[u8]>, V: AsRef<[u8]>>(entries: &[(K, V)]) -> HashDigest {
    let mut keyed: Vec<(&[u8], HashDigest)> = entries
        .iter()
        .map(|(k, v)| (k.as_ref(), leaf_hash(k.as_ref(), v.as_ref())))
        .collect();
    keyed.sort_by(|a, b| a.0.cmp(b.0).then(a.1.cmp(&b.1)));
    root_of_leaves(keyed.into_iter().map(|(_, h)| h).collect())
}

/// Root over an ordered list (receipts); position is the key.
pub fn root_of_list<V: AsRef<[u8]>>(items: &[V]) -> HashDigest {
    root_of_leaves(
        items
            .iter()
            .enumerate()
            .map(|(i, v)| leaf_hash(&(i as u32).to_be_bytes(), v.as_ref()))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_set_root_is_the_empty_digest() {
        let none: [(&[u8], &[u8]); 0] = [];
        assert_eq!(root_of_entries(&none), hash(b""));
    }

    #[test]
    fn single_leaf_root_is_the_leaf() {
        assert_eq!(root_of_entries(&[(b"k", b"v")]), leaf_hash(b"k", b"v"));
    }

    #[test]
    fn odd_level_duplicates_last() {
        let a = leaf_hash(b"a", b"1");
        let b = leaf_hash(b"b", b"2");
        let c = leaf_hash(b"c", b"3");
        let ab = hash_parts(&[&[1], &a.0, &b.0]);
        let cc = hash_parts(&[&[1], &c.0, &c.0]);
        let expected = hash_parts(&[&[1], &ab.0, &cc.0]);
        assert_eq!(root_of_entries(&[(b"c", b"3"), (b"a", b"1"), (b"b", b"2")]), expected);
    }
}
