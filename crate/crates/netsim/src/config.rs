use edsc_core::ledger::LedgerConfig;
use edsc_core::Gas;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Edsc,
    Baseline,
}

impl Model {
    pub fn as_str(&self) -> &'static str {
        match self {
            Model::Edsc => "edsc",
            Model::Baseline => "baseline",
        }
    }
}

impl std::str::FromStr for Model {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edsc" => Ok(Model::Edsc),
            "baseline" => Ok(Model::Baseline),
            _ => Err(ConfigError::Invalid(format!("unknown model {s:?}"))),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    /// Measured subscriber contracts (edsc) or consumer contracts (baseline).
    pub subscribers: usize,
    /// Oracle samples per block interval on average (Poisson).
    pub samples_per_block: f64,
    /// Blocks before the first sample.
    pub warmup_blocks: u64,
    /// Gas burned by each measured callback.
    pub subscriber_gas: Gas,
    /// Baseline: blocks the oracle waits for, counting the including one.
    pub request_confirmations: u64,
    /// Baseline: oracle processing time before it answers.
    pub response_latency_s: f64,
    pub background_senders: usize,
    pub background_sinks: usize,
    /// Background demand in gas per block interval.
    pub background_gas_per_block: Gas,
    /// Gas burned by each background sink execution.
    pub background_exec_gas: Gas,
    /// A background sender with this many unconfirmed messages sheds load.
    pub max_outstanding: u64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            subscribers: 10,
            samples_per_block: 1.0,
            warmup_blocks: 5,
            subscriber_gas: 20_000,
            request_confirmations: 2,
            response_latency_s: 0.0,
            background_senders: 128,
            background_sinks: 16,
            background_gas_per_block: 2_000_000,
            background_exec_gas: 150_000,
            max_outstanding: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub model: Model,
    pub seed: u64,
    pub node_count: usize,
    /// Per-node share of hash power; empty means equal shares.
    pub hashpower: Vec<f64>,
    pub block_interval_s: f64,
    pub block_delay_s: f64,
    pub msg_delay_ms: f64,
    pub hash_wait_ms: f64,
    /// Best-chain height at which the workload stops.
    pub run_length: u64,
    /// Extra blocks mined after the workload stops.
    pub drain_blocks: u64,
    /// Blocks below the final head excluded from measurement.
    pub finality_depth: u64,
    pub block_gas_limit: Gas,
    pub workload: WorkloadConfig,
    pub ledger: LedgerConfig,
    /// Re-validate every mined block before nodes accept it.
    pub verify_blocks: bool,
    /// Keep block bodies so the final chain can be exported.
    pub keep_block_log: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            model: Model::Edsc,
            seed: 1,
            node_count: 20,
            hashpower: Vec::new(),
            block_interval_s: 12.42,
            block_delay_s: 2.3,
            msg_delay_ms: 100.0,
            hash_wait_ms: 500.0,
            run_length: 10_000,
            drain_blocks: 30,
            finality_depth: 6,
            block_gas_limit: 8_000_000,
            workload: WorkloadConfig::default(),
            ledger: LedgerConfig::default(),
            verify_blocks: true,
            keep_block_log: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.node_count < 2 {
            return bad("node_count must be at least 2");
        }
        if !self.hashpower.is_empty() {
            if self.hashpower.len() != self.node_count {
                return bad("hashpower must list one share per node");
            }
            if self.hashpower.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return bad("hashpower shares must be positive");
            }
            let sum: f64 = self.hashpower.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return bad("hashpower shares must sum to 1");
            }
        }
        if !(self.block_interval_s.is_finite() && self.block_interval_s > 0.0) {
            return bad("block_interval_s must be positive");
        }
        for (name, v) in [
            ("block_delay_s", self.block_delay_s),
            ("msg_delay_ms", self.msg_delay_ms),
            ("hash_wait_ms", self.hash_wait_ms),
            ("response_latency_s", self.workload.response_latency_s),
            ("samples_per_block", self.workload.samples_per_block),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be finite and non-negative")));
            }
        }
        if self.run_length == 0 {
            return bad("run_length must be positive");
        }
        if self.workload.request_confirmations == 0 {
            return bad("request_confirmations must be at least 1");
        }
        if self.workload.subscribers > u16::MAX as usize {
            return bad("too many subscribers");
        }
        if self.workload.background_gas_per_block > 0 && (self.workload.background_senders == 0 || self.workload.background_sinks == 0) {
            return bad("background load needs senders and sinks");
        }
        let per_exec = self.ledger.gas.base_trigger_gas + self.workload.background_exec_gas;
        if self.workload.background_gas_per_block > 0 && per_exec + self.ledger.gas.transfer_gas > self.block_gas_limit {
            return bad("a background execution does not fit in a block");
        }
        if self.ledger.gas.base_trigger_gas + self.workload.subscriber_gas > self.block_gas_limit {
            return bad("a measured callback does not fit in a block");
        }
        Ok(())
    }

    pub fn share(&self, node: usize) -> f64 {
        if self.hashpower.is_empty() {
            1.0 / self.node_count as f64
        } else {
            self.hashpower[node]
        }
    }
}
