use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::hash_parts;
use crate::event_manager::EventBuffer;
use crate::message::Block;
use crate::types::{HashDigest, Height};

use super::builder::{build_block, BuildParams, BuiltBlock};
use super::pool::TxPool;
use super::state::LedgerState;
use super::LedgerConfig;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BlockRejection {
    #[error("gas_used exceeds gas_limit")]
    OverGasLimit,
    #[error("parent hash or number does not follow the parent")]
    BadParent,
    #[error("invalid or unexecutable message: {0}")]
    InvalidMessage(String),
    #[error("execution set differs from the honest derivation")]
    BadExecutions,
    #[error("execution or message order differs from the honest derivation")]
    BadOrder,
    #[error("gas_used differs from the honest derivation")]
    BadGasUsed,
    #[error("state root mismatch")]
    BadStateRoot,
    #[error("event state root mismatch")]
    BadEventStateRoot,
    #[error("receipts root mismatch")]
    BadReceiptsRoot,
    #[error("header field mismatch")]
    BadHeader,
}

impl BlockRejection {
    pub fn name(&self) -> &'static str {
        match self {
            BlockRejection::OverGasLimit => "OverGasLimit",
            BlockRejection::BadParent => "BadParent",
            BlockRejection::InvalidMessage(_) => "InvalidMessage",
            BlockRejection::BadExecutions => "BadExecutions",
            BlockRejection::BadOrder => "BadOrder",
            BlockRejection::BadGasUsed => "BadGasUsed",
            BlockRejection::BadStateRoot => "BadStateRoot",
            BlockRejection::BadEventStateRoot => "BadEventStateRoot",
            BlockRejection::BadReceiptsRoot => "BadReceiptsRoot",
            BlockRejection::BadHeader => "BadHeader",
        }
    }
}

fn sorted_digests<I: Iterator<Item = HashDigest>>(it: I) -> Vec<HashDigest> {
    let mut v: Vec<HashDigest> = it.collect();
    v.sort();
    v
}

/// Re-derives `block` from the parent state and the block's own messages
/// and compares the result field by field. Returns the post-state on
/// acceptance.
pub fn validate_block(
    parent: &LedgerState,
    parent_hash: HashDigest,
    parent_number: Height,
    block: &Block,
    cfg: &LedgerConfig,
) -> Result<BuiltBlock, BlockRejection> {
    if block.gas_used > block.gas_limit {
        return Err(BlockRejection::OverGasLimit);
    }
    if block.parent != parent_hash || block.number != parent_number + 1 {
        return Err(BlockRejection::BadParent);
    }

    let mut pool = TxPool::new(usize::MAX);
    let mut buffer = EventBuffer::new(block.external_messages.len().max(1));
    for m in &block.external_messages {
        let res = match m.as_update() {
            Some(u) => {
                if !m.is_authentic() {
                    return Err(BlockRejection::InvalidMessage("update envelope does not match".into()));
                }
                buffer.ingest(u.clone(), &parent.events).map(|_| ()).map_err(|e| e.to_string())
            }
            None => pool.insert(m.clone()).map_err(|e| e.to_string()),
        };
        res.map_err(BlockRejection::InvalidMessage)?;
    }

    let params = BuildParams {
        parent: block.parent,
        number: block.number,
        timestamp_ms: block.timestamp_ms,
        miner: block.miner,
        gas_limit: block.gas_limit,
    };
    let honest = build_block(parent, &pool, &buffer, &params, cfg);
    let h = &honest.block;

    if h.external_messages != block.external_messages {
        let same = sorted_digests(h.external_messages.iter().map(|m| m.digest()))
            == sorted_digests(block.external_messages.iter().map(|m| m.digest()));
        return Err(if same {
            BlockRejection::BadOrder
        } else {
            BlockRejection::InvalidMessage("message set not executable as claimed".into())
        });
    }
    if h.executions != block.executions {
        let same = sorted_digests(h.executions.iter().map(|e| e.digest()))
            == sorted_digests(block.executions.iter().map(|e| e.digest()));
        return Err(if same { BlockRejection::BadOrder } else { BlockRejection::BadExecutions });
    }
    if h.execution_rounds != block.execution_rounds {
        return Err(BlockRejection::BadOrder);
    }
    if h.gas_used != block.gas_used {
        return Err(BlockRejection::BadGasUsed);
    }
    if h.state_root != block.state_root {
        return Err(BlockRejection::BadStateRoot);
    }
    if h.event_state_root != block.event_state_root {
        return Err(BlockRejection::BadEventStateRoot);
    }
    if h.receipts_root != block.receipts_root {
        return Err(BlockRejection::BadReceiptsRoot);
    }
    if h != block {
        return Err(BlockRejection::BadHeader);
    }
    Ok(honest)
}

/// First line of a block log.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogGenesis {
    pub config: LedgerConfig,
    pub state: LedgerState,
}

impl LogGenesis {
    /// Parent hash of block 1.
    pub fn hash(&self) -> HashDigest {
        let (a, b) = self.state.roots();
        hash_parts(&[b"edsc/genesis", &a.0, &b.0])
    }
}

#[derive(Debug, Error)]
pub enum BlockLogError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("empty block log")]
    Empty,
    #[error("line {line}: {msg}")]
    Genesis { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Newline-delimited JSON: genesis first, then one block per line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockLog {
    pub genesis: LogGenesis,
    pub blocks: Vec<Block>,
}

impl BlockLog {
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &self.genesis)?;
        w.write_all(b"\n")?;
        for b in &self.blocks {
            serde_json::to_writer(&mut w, b)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self, BlockLogError> {
        let mut genesis: Option<LogGenesis> = None;
        let mut blocks = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let n = i + 1;
            if genesis.is_none() {
                let mut g: LogGenesis =
                    serde_json::from_str(&line).map_err(|source| BlockLogError::Parse { line: n, source })?;
                g.state.events.rehydrate().map_err(|e| BlockLogError::Genesis { line: n, msg: e.to_string() })?;
                genesis = Some(g);
            } else {
                blocks.push(serde_json::from_str(&line).map_err(|source| BlockLogError::Parse { line: n, source })?);
            }
        }
        Ok(Self { genesis: genesis.ok_or(BlockLogError::Empty)?, blocks })
    }

    /// Replays every block from genesis. Returns the number of blocks
    /// accepted, or the first rejection.
    pub fn validate_all(&self) -> Result<usize, (Height, BlockRejection)> {
        let mut state = self.genesis.state.clone();
        let mut parent_hash = self.genesis.hash();
        let mut parent_number = 0;
        for b in &self.blocks {
            let built = validate_block(&state, parent_hash, parent_number, b, &self.genesis.config)
                .map_err(|e| (b.number, e))?;
            state = built.post;
            parent_hash = b.hash();
            parent_number = b.number;
        }
        Ok(self.blocks.len())
    }
}
