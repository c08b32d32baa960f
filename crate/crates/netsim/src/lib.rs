//! Discrete-event simulation of a proof-of-work network running the
//! event-driven protocol, plus a request/response oracle baseline.
//!
//! Time is integer microseconds. All randomness comes from named streams
//! derived from the configured seed, so a configuration reproduces its
//! output byte for byte.

pub mod chain;
pub mod config;
pub mod engine;
pub mod gossip;
pub mod metrics;
pub mod rng;
mod sim;
pub mod workload;

pub use chain::{BlockId, BlockStore, NodeChain};
pub use config::{ConfigError, Model, SimConfig, WorkloadConfig};
pub use gossip::{gossip_message, gossip_with, GossipParams, GossipTrace, Link};
pub use metrics::{MetricsRecord, RejectionRecord, Summary};
pub use sim::{mine_blocks, run, run_baseline, run_edsc, MinedBlock, SimError, SimOutput, ORACLE_NODE};
