//! Shared block store and per-node fork choice.

use std::collections::BTreeMap;
use std::sync::Arc;

use edsc_core::ledger::LedgerState;
use edsc_core::message::Block;
use edsc_core::HashDigest;

use crate::engine::Time;

pub type BlockId = u32;

pub const GENESIS: BlockId = 0;

/// A measured callback found in a block: `(sample, slot)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Hit {
    pub sample: u32,
    pub slot: u16,
}

#[derive(Clone, Debug)]
pub struct BlockRec {
    pub parent: Option<BlockId>,
    pub height: u64,
    pub hash: HashDigest,
    pub mined_at: Time,
    pub miner: usize,
    pub valid: bool,
    /// Post-state; dropped for deep blocks.
    pub state: Option<Arc<LedgerState>>,
    pub body: Option<Block>,
    pub hits: Vec<Hit>,
}

/// Every block ever mined in the run, shared by all nodes. Validity and
/// post-states are deterministic, so each is computed once.
#[derive(Debug, Default)]
pub struct BlockStore {
    blocks: Vec<BlockRec>,
    best: BlockId,
}

impl BlockStore {
    pub fn new(genesis_hash: HashDigest, genesis_state: LedgerState) -> Self {
        let g = BlockRec {
            parent: None,
            height: 0,
            hash: genesis_hash,
            mined_at: 0,
            miner: usize::MAX,
            valid: true,
            state: Some(Arc::new(genesis_state)),
            body: None,
            hits: Vec::new(),
        };
        Self { blocks: vec![g], best: GENESIS }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, id: BlockId) -> &BlockRec {
        &self.blocks[id as usize]
    }

    pub fn get_mut(&mut self, id: BlockId) -> &mut BlockRec {
        &mut self.blocks[id as usize]
    }

    /// Highest valid block; ties keep the earlier one.
    pub fn best(&self) -> BlockId {
        self.best
    }

    pub fn add(&mut self, rec: BlockRec) -> BlockId {
        let id = self.blocks.len() as BlockId;
        if rec.valid && rec.height > self.get(self.best).height {
            self.best = id;
        }
        self.blocks.push(rec);
        id
    }

    /// Ancestor of `id` at `height` (itself when heights match).
    pub fn ancestor_at(&self, mut id: BlockId, height: u64) -> BlockId {
        assert!(height <= self.get(id).height, "ancestor above block");
        while self.get(id).height > height {
            id = self.get(id).parent.expect("non-genesis block has a parent");
        }
        id
    }

    pub fn is_ancestor(&self, a: BlockId, b: BlockId) -> bool {
        let ha = self.get(a).height;
        ha <= self.get(b).height && self.ancestor_at(b, ha) == a
    }

    /// Block ids from genesis to `id` inclusive.
    pub fn chain(&self, id: BlockId) -> Vec<BlockId> {
        let mut out = Vec::with_capacity(self.get(id).height as usize + 1);
        let mut cur = Some(id);
        while let Some(c) = cur {
            out.push(c);
            cur = self.get(c).parent;
        }
        out.reverse();
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockId, &BlockRec)> {
        self.blocks.iter().enumerate().map(|(i, b)| (i as BlockId, b))
    }
}

/// One node's view: which blocks it holds and its current head.
#[derive(Clone, Debug)]
pub struct NodeChain {
    head: BlockId,
    known: Vec<bool>,
    /// Blocks waiting for their parent, keyed by the parent.
    orphans: BTreeMap<BlockId, Vec<BlockId>>,
}

impl Default for NodeChain {
    fn default() -> Self {
        Self { head: GENESIS, known: vec![true], orphans: BTreeMap::new() }
    }
}

impl NodeChain {
    pub fn head(&self) -> BlockId {
        self.head
    }

    pub fn knows(&self, id: BlockId) -> bool {
        self.known.get(id as usize).copied().unwrap_or(false)
    }

    pub fn orphan_count(&self) -> usize {
        self.orphans.values().map(Vec::len).sum()
    }

    /// Fork choice on receipt of `id`: the highest block wins and ties keep
    /// the first received. Blocks whose parent is unknown wait for it.
    /// Returns true when the head changed.
    pub fn receive(&mut self, id: BlockId, store: &BlockStore) -> bool {
        if self.knows(id) || !store.get(id).valid {
            return false;
        }
        let parent = store.get(id).parent.expect("received blocks are not genesis");
        if !self.knows(parent) {
            self.orphans.entry(parent).or_default().push(id);
            return false;
        }
        let before = self.head;
        let mut ready = vec![id];
        while let Some(b) = ready.pop() {
            if self.knows(b) {
                continue;
            }
            if self.known.len() <= b as usize {
                self.known.resize(b as usize + 1, false);
            }
            self.known[b as usize] = true;
            if store.get(b).height > store.get(self.head).height {
                self.head = b;
            }
            if let Some(children) = self.orphans.remove(&b) {
                // Reverse so children are applied in arrival order.
                ready.extend(children.into_iter().rev());
            }
        }
        self.head != before
    }
}
