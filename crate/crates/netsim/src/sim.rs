use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use edsc_core::event::EventUpdate;
use edsc_core::event_manager::{EventBuffer, DEFAULT_BUFFER_CAPACITY};
use edsc_core::ledger::{
    build_block, validate_block, BlockLog, BlockRejection, BuildParams, LedgerState, LogGenesis, TxPool,
};
use edsc_core::message::ProtocolMessage;
use edsc_core::Address;
use log::{debug, info};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::chain::{BlockId, BlockRec, BlockStore, NodeChain, GENESIS};
use crate::config::{ConfigError, Model, SimConfig};
use crate::engine::{EventQueue, SimEventKind, Time};
use crate::gossip::{gossip_message, GossipParams};
use crate::metrics::{latency_stats, MetricsRecord, RejectionRecord, Summary};
use crate::rng::{exp_draw, secs, stream, us};
use crate::workload::Workload;

/// Node hosting the oracle and its responders.
pub const ORACLE_NODE: usize = 0;
/// Post-states older than this many blocks below the best head are dropped.
const STATE_KEEP: u64 = 128;
const BODY_KEEP: u64 = 1024;
const GC_EVERY: u64 = 64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("block {height} failed validation: {reason}")]
    InvalidBlock { height: u64, reason: BlockRejection },
    #[error("state of block {0} was pruned and cannot be replayed")]
    StatePruned(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinedBlock {
    pub time_us: Time,
    pub miner: usize,
    pub height: u64,
    pub in_final_chain: bool,
}

#[derive(Debug)]
pub struct SimOutput {
    pub records: Vec<MetricsRecord>,
    pub summary: Summary,
    pub rejections: Vec<RejectionRecord>,
    pub mined: Vec<MinedBlock>,
    /// All nodes agree on the chain below the finality depth.
    pub consistent: bool,
    pub samples: usize,
    pub block_log: Option<BlockLog>,
}

enum Payload {
    Mine { node: usize, gen: u64 },
    Arrive { node: usize, block: BlockId },
    Sample,
    Background,
    Response { slot: usize, sample: u32 },
}

enum Item {
    Msg(ProtocolMessage),
    Update(EventUpdate),
}

struct LiveMsg {
    arrivals: Vec<Time>,
    item: Item,
}

struct Node {
    chain: NodeChain,
    gen: u64,
    rng: ChaCha8Rng,
}

struct PendingRequest {
    sample: u32,
    slot: usize,
    nonce: u64,
}

struct Simulation<'a> {
    cfg: &'a SimConfig,
    wl: Workload,
    genesis: LogGenesis,
    store: BlockStore,
    nodes: Vec<Node>,
    queue: EventQueue<Payload>,
    gossip: GossipParams,
    live: BTreeMap<u64, LiveMsg>,
    next_live: u64,
    by_sender: BTreeMap<Address, BTreeMap<u64, u64>>,
    by_stream: BTreeMap<(Address, Address), BTreeMap<u64, u64>>,
    next_nonce: BTreeMap<Address, u64>,
    sample_times: Vec<Time>,
    pending_requests: Vec<PendingRequest>,
    rejections: Vec<RejectionRecord>,
    sample_rng: ChaCha8Rng,
    request_rng: ChaCha8Rng,
    bg_rng: ChaCha8Rng,
    emitting: bool,
    mining: bool,
    interval_us: f64,
    block_delay: Time,
    state_cursor: usize,
    body_cursor: usize,
    last_gc: u64,
}

impl<'a> Simulation<'a> {
    fn new(cfg: &'a SimConfig) -> Self {
        let (wl, state) = Workload::new(cfg);
        let genesis = LogGenesis { config: cfg.ledger, state };
        let store = BlockStore::new(genesis.hash(), genesis.state.clone());
        let nodes = (0..cfg.node_count)
            .map(|i| Node { chain: NodeChain::default(), gen: 0, rng: stream(cfg.seed, "mining", i as u64) })
            .collect();
        Self {
            cfg,
            wl,
            genesis,
            store,
            nodes,
            queue: EventQueue::default(),
            gossip: GossipParams { delay_mean_us: cfg.msg_delay_ms * 1e3, hash_wait_us: us(cfg.hash_wait_ms / 1e3) },
            live: BTreeMap::new(),
            next_live: 0,
            by_sender: BTreeMap::new(),
            by_stream: BTreeMap::new(),
            next_nonce: BTreeMap::new(),
            sample_times: Vec::new(),
            pending_requests: Vec::new(),
            rejections: Vec::new(),
            sample_rng: stream(cfg.seed, "workload", 0),
            request_rng: stream(cfg.seed, "workload", 1),
            bg_rng: stream(cfg.seed, "workload", 2),
            emitting: true,
            mining: true,
            interval_us: cfg.block_interval_s * 1e6,
            block_delay: us(cfg.block_delay_s),
            state_cursor: 1,
            body_cursor: 1,
            last_gc: 0,
        }
    }

    fn background_gap_us(&self) -> Option<f64> {
        let w = &self.cfg.workload;
        if w.background_gas_per_block == 0 {
            return None;
        }
        let g = &self.cfg.ledger.gas;
        let per_tx = (g.transfer_gas + g.base_trigger_gas + w.background_exec_gas) as f64;
        Some(self.interval_us * per_tx / w.background_gas_per_block as f64)
    }

    fn sample_gap_us(&self) -> Option<f64> {
        let spb = self.cfg.workload.samples_per_block;
        (spb > 0.0).then(|| self.interval_us / spb)
    }

    fn run(mut self) -> Result<SimOutput, SimError> {
        for i in 0..self.nodes.len() {
            self.redraw(i, 0);
        }
        if let Some(gap) = self.sample_gap_us() {
            let start = self.cfg.workload.warmup_blocks as f64 * self.interval_us;
            let t = libm::round(start + exp_draw(&mut self.sample_rng, gap)) as Time;
            self.queue.push(t, SimEventKind::OracleEmit, Payload::Sample);
        }
        if let Some(gap) = self.background_gap_us() {
            let t = libm::round(exp_draw(&mut self.bg_rng, gap)) as Time;
            self.queue.push(t, SimEventKind::Background, Payload::Background);
        }
        while let Some(ev) = self.queue.pop() {
            let t = ev.time;
            match ev.payload {
                Payload::Mine { node, gen } => {
                    if self.mining && gen == self.nodes[node].gen {
                        self.mine(node, t)?;
                    }
                }
                Payload::Arrive { node, block } => self.deliver(node, block, t)?,
                Payload::Sample => self.on_sample(t),
                Payload::Background => self.on_background(t)?,
                Payload::Response { slot, sample } => {
                    let key = self.wl.responders[slot].address();
                    let nonce = self.take_nonce(key);
                    let msg = self.wl.response(slot, nonce, sample);
                    self.inject(Item::Msg(msg), ORACLE_NODE, t);
                }
            }
        }
        self.finish()
    }

    fn take_nonce(&mut self, a: Address) -> u64 {
        let n = self.next_nonce.entry(a).or_insert(0);
        *n += 1;
        *n - 1
    }

    fn redraw(&mut self, node: usize, t: Time) {
        let n = &mut self.nodes[node];
        n.gen += 1;
        if self.mining {
            let mean = self.interval_us / self.cfg.share(node);
            let dt = libm::round(exp_draw(&mut n.rng, mean)) as Time;
            let gen = n.gen;
            self.queue.push(t.saturating_add(dt), SimEventKind::BlockMined, Payload::Mine { node, gen });
        }
    }

    fn inject(&mut self, item: Item, origin: usize, t: Time) {
        let digest = match &item {
            Item::Msg(m) => m.digest(),
            Item::Update(u) => u.digest(),
        };
        let mut rng = stream(self.cfg.seed, "gossip", digest.prefix_u64());
        let trace = gossip_message(origin, t, self.nodes.len(), &self.gossip, &mut rng);
        let id = self.next_live;
        self.next_live += 1;
        match &item {
            Item::Msg(m) => self.by_sender.entry(m.sender).or_default().insert(m.sender_nonce, id),
            Item::Update(u) => self.by_stream.entry((u.event_id, u.publisher)).or_default().insert(u.nonce, id),
        };
        self.live.insert(id, LiveMsg { arrivals: trace.arrivals, item });
    }

    fn on_sample(&mut self, t: Time) {
        if !self.emitting {
            return;
        }
        let s = self.sample_times.len() as u32;
        self.sample_times.push(t);
        match self.cfg.model {
            Model::Edsc => {
                let u = self.wl.oracle_update(s);
                self.inject(Item::Update(u), ORACLE_NODE, t);
            }
            Model::Baseline => {
                for slot in 0..self.wl.consumers.len() {
                    let nonce = self.take_nonce(self.wl.consumers[slot].address());
                    let msg = self.wl.request(slot, nonce, s);
                    let origin = self.request_rng.gen_range(0..self.nodes.len());
                    self.inject(Item::Msg(msg), origin, t);
                    self.pending_requests.push(PendingRequest { sample: s, slot, nonce });
                }
            }
        }
        let gap = self.sample_gap_us().expect("samples are scheduled only with a positive rate");
        let next = t + libm::round(exp_draw(&mut self.sample_rng, gap)) as Time;
        self.queue.push(next, SimEventKind::OracleEmit, Payload::Sample);
    }

    fn on_background(&mut self, t: Time) -> Result<(), SimError> {
        if !self.emitting {
            return Ok(());
        }
        let sender = self.bg_rng.gen_range(0..self.wl.bg_senders.len());
        let sink = self.bg_rng.gen_range(0..self.wl.sinks.len());
        let gap = self.background_gap_us().expect("background is scheduled only with a positive rate");
        let next = t + libm::round(exp_draw(&mut self.bg_rng, gap)) as Time;
        self.queue.push(next, SimEventKind::Background, Payload::Background);

        let addr = self.wl.bg_senders[sender].address();
        let best = self.state_of(self.store.best())?;
        let sent = self.next_nonce.get(&addr).copied().unwrap_or(0);
        if sent - best.chain.nonce(&addr) >= self.cfg.workload.max_outstanding {
            return Ok(());
        }
        let nonce = self.take_nonce(addr);
        let msg = self.wl.background(sender, sink, nonce);
        self.inject(Item::Msg(msg), sender % self.nodes.len(), t);
        Ok(())
    }

    /// Post-state of `id`, replaying from the nearest retained ancestor.
    fn state_of(&mut self, id: BlockId) -> Result<Arc<LedgerState>, SimError> {
        if let Some(s) = &self.store.get(id).state {
            return Ok(s.clone());
        }
        let mut path = vec![id];
        let mut cur = self.store.get(id).parent.expect("genesis state is never pruned");
        while self.store.get(cur).state.is_none() {
            path.push(cur);
            cur = self.store.get(cur).parent.expect("genesis state is never pruned");
        }
        let mut state = self.store.get(cur).state.clone().expect("loop exits on a retained state");
        for &b in path.iter().rev() {
            let rec = self.store.get(b);
            let parent = self.store.get(rec.parent.expect("non-genesis"));
            let body = rec.body.as_ref().ok_or(SimError::StatePruned(rec.height))?;
            let built = validate_block(&state, parent.hash, parent.height, body, &self.cfg.ledger)
                .map_err(|reason| SimError::InvalidBlock { height: rec.height, reason })?;
            state = Arc::new(built.post);
            self.store.get_mut(b).state = Some(state.clone());
        }
        Ok(state)
    }

    /// What node `i` would put in a block at time `t` on top of `st`.
    fn collect(&mut self, i: usize, t: Time, st: &LedgerState) -> (TxPool, EventBuffer) {
        let mut pool = TxPool::new(usize::MAX);
        for (sender, q) in &self.by_sender {
            for lid in q.range(st.chain.nonce(sender)..).map(|(_, l)| l) {
                let m = &self.live[lid];
                if m.arrivals[i] > t {
                    break;
                }
                if let Item::Msg(msg) = &m.item {
                    // Duplicates and forgeries cannot occur in the honest workload.
                    let _ = pool.insert(msg.clone());
                }
            }
        }
        let mut buffer = EventBuffer::new(DEFAULT_BUFFER_CAPACITY);
        for ((ev, publisher), q) in &self.by_stream {
            let last = st.events.last_nonce(ev, publisher);
            for lid in q.range(last + 1..).map(|(_, l)| l) {
                let m = &self.live[lid];
                if m.arrivals[i] > t {
                    break;
                }
                if let Item::Update(u) = &m.item {
                    if let Err(reason) = buffer.ingest(u.clone(), &st.events) {
                        self.rejections.push(RejectionRecord {
                            time_us: t,
                            node: i,
                            update: u.digest().to_hex(),
                            reason: reason.as_str().to_string(),
                        });
                    }
                }
            }
        }
        (pool, buffer)
    }

    fn mine(&mut self, i: usize, t: Time) -> Result<(), SimError> {
        let parent = self.nodes[i].chain.head();
        let pstate = self.state_of(parent)?;
        let (pool, buffer) = self.collect(i, t, &pstate);
        let (phash, pheight) = (self.store.get(parent).hash, self.store.get(parent).height);
        let params = BuildParams {
            parent: phash,
            number: pheight + 1,
            timestamp_ms: t / 1000,
            miner: self.wl.miners[i],
            gas_limit: self.cfg.block_gas_limit,
        };
        let built = build_block(&pstate, &pool, &buffer, &params, &self.cfg.ledger);
        for (u, reason) in &built.rejected_updates {
            self.rejections.push(RejectionRecord {
                time_us: t,
                node: i,
                update: u.digest().to_hex(),
                reason: reason.as_str().to_string(),
            });
        }
        if self.cfg.verify_blocks {
            validate_block(&pstate, phash, pheight, &built.block, &self.cfg.ledger)
                .map_err(|reason| SimError::InvalidBlock { height: pheight + 1, reason })?;
        }
        let hits = built.block.executions.iter().filter_map(|e| self.wl.hit(e)).collect();
        let id = self.store.add(BlockRec {
            parent: Some(parent),
            height: pheight + 1,
            hash: built.block.hash(),
            mined_at: t,
            miner: i,
            valid: true,
            state: Some(Arc::new(built.post)),
            body: Some(built.block),
            hits,
        });
        debug!("t={:.3}s node {i} mined #{} ({} blocks stored)", secs(t), pheight + 1, self.store.len());
        self.deliver(i, id, t)?;
        for j in 0..self.nodes.len() {
            if j != i {
                self.queue.push(t + self.block_delay, SimEventKind::BlockArrival, Payload::Arrive { node: j, block: id });
            }
        }
        self.after_block()
    }

    fn deliver(&mut self, node: usize, block: BlockId, t: Time) -> Result<(), SimError> {
        if self.nodes[node].chain.receive(block, &self.store) {
            self.redraw(node, t);
            if node == ORACLE_NODE && self.cfg.model == Model::Baseline {
                self.check_requests(t)?;
            }
        }
        Ok(())
    }

    /// Answers every request buried under enough blocks at the oracle node.
    fn check_requests(&mut self, t: Time) -> Result<(), SimError> {
        if self.pending_requests.is_empty() {
            return Ok(());
        }
        let conf = self.cfg.workload.request_confirmations;
        let head = self.nodes[ORACLE_NODE].chain.head();
        let h = self.store.get(head).height;
        if h + 1 < conf {
            return Ok(());
        }
        let anchor = self.store.ancestor_at(head, h + 1 - conf);
        let st = self.state_of(anchor)?;
        let consumers: Vec<Address> = self.wl.consumers.iter().map(|k| k.address()).collect();
        let at = t + us(self.cfg.workload.response_latency_s);
        let mut answered = Vec::new();
        self.pending_requests.retain(|r| {
            let done = st.chain.nonce(&consumers[r.slot]) > r.nonce;
            if done {
                answered.push((r.slot, r.sample));
            }
            !done
        });
        for (slot, sample) in answered {
            self.queue.push(at, SimEventKind::Response, Payload::Response { slot, sample });
        }
        Ok(())
    }

    fn after_block(&mut self) -> Result<(), SimError> {
        let best = self.store.best();
        let bh = self.store.get(best).height;
        if self.emitting && bh >= self.cfg.run_length {
            info!("workload stopped at height {bh}");
            self.emitting = false;
        }
        if self.mining && bh >= self.cfg.run_length + self.cfg.drain_blocks {
            self.mining = false;
        }
        while self.state_cursor < self.store.len() && self.store.get(self.state_cursor as BlockId).height + STATE_KEEP < bh {
            self.store.get_mut(self.state_cursor as BlockId).state = None;
            self.state_cursor += 1;
        }
        if !self.cfg.keep_block_log {
            while self.body_cursor < self.store.len() && self.store.get(self.body_cursor as BlockId).height + BODY_KEEP < bh {
                self.store.get_mut(self.body_cursor as BlockId).body = None;
                self.body_cursor += 1;
            }
        }
        if bh >= self.last_gc + 2 * GC_EVERY {
            self.last_gc = bh - GC_EVERY;
            let anchor = self.store.ancestor_at(best, self.last_gc);
            let st = self.state_of(anchor)?;
            self.gc(&st);
        }
        Ok(())
    }

    /// Forgets messages whose nonce is settled deep in the best chain.
    fn gc(&mut self, st: &LedgerState) {
        let mut dead = Vec::new();
        self.by_sender.retain(|sender, q| {
            let keep = q.split_off(&st.chain.nonce(sender));
            dead.extend(q.values().copied());
            *q = keep;
            !q.is_empty()
        });
        self.by_stream.retain(|(ev, publisher), q| {
            let keep = q.split_off(&(st.events.last_nonce(ev, publisher) + 1));
            dead.extend(q.values().copied());
            *q = keep;
            !q.is_empty()
        });
        for id in dead {
            self.live.remove(&id);
        }
    }

    fn finish(self) -> Result<SimOutput, SimError> {
        let cfg = self.cfg;
        let store = &self.store;
        let head = self.nodes[ORACLE_NODE].chain.head();
        let final_height = store.get(head).height;

        let min_h = self.nodes.iter().map(|n| store.get(n.chain.head()).height).min().unwrap_or(0);
        let cut = min_h.saturating_sub(cfg.finality_depth);
        let anchor = store.ancestor_at(head, cut);
        let consistent = self.nodes.iter().all(|n| store.ancestor_at(n.chain.head(), cut) == anchor);

        let chain = store.chain(head);
        let cutoff = final_height.saturating_sub(cfg.finality_depth);
        let mut seen = BTreeSet::new();
        let mut records = Vec::new();
        for &id in &chain {
            let b = store.get(id);
            if b.height > cutoff {
                break;
            }
            for hit in &b.hits {
                if !seen.insert(*hit) {
                    continue;
                }
                let emit = self.sample_times[hit.sample as usize];
                records.push((
                    *hit,
                    MetricsRecord {
                        model: cfg.model,
                        trigger_id: format!("{}-{}", hit.sample, hit.slot),
                        emit_time_s: secs(emit),
                        inclusion_time_s: secs(b.mined_at),
                        latency_s: secs(b.mined_at - emit),
                        block_number: b.height,
                    },
                ));
            }
        }
        records.sort_by_key(|a| a.0);
        let records: Vec<MetricsRecord> = records.into_iter().map(|(_, r)| r).collect();

        let in_chain: BTreeSet<BlockId> = chain.iter().copied().collect();
        let mined: Vec<MinedBlock> = store
            .iter()
            .filter(|(id, _)| *id != GENESIS)
            .map(|(id, b)| MinedBlock { time_us: b.mined_at, miner: b.miner, height: b.height, in_final_chain: in_chain.contains(&id) })
            .collect();

        let slots = match cfg.model {
            Model::Edsc => self.wl.subscribers.len(),
            Model::Baseline => self.wl.consumers.len(),
        };
        let (mean, p50, p95) = latency_stats(&records);
        let summary = Summary {
            model: cfg.model,
            mean,
            p50,
            p95,
            stale_rate: if mined.is_empty() { 0.0 } else { 1.0 - final_height as f64 / mined.len() as f64 },
            blocks: final_height,
            records: records.len(),
            missing: (self.sample_times.len() * slots).saturating_sub(records.len()),
            mean_block_interval: if final_height == 0 { f64::NAN } else { secs(store.get(head).mined_at) / final_height as f64 },
        };

        let block_log = if cfg.keep_block_log {
            let blocks = chain[1..]
                .iter()
                .map(|&id| store.get(id).body.clone().ok_or(SimError::StatePruned(store.get(id).height)))
                .collect::<Result<Vec<_>, _>>()?;
            Some(BlockLog { genesis: self.genesis.clone(), blocks })
        } else {
            None
        };

        info!(
            "{}: {} records, mean {:.3}s, {} blocks, stale {:.4}",
            cfg.model.as_str(),
            summary.records,
            summary.mean,
            summary.blocks,
            summary.stale_rate
        );
        Ok(SimOutput {
            records,
            summary,
            rejections: self.rejections,
            mined,
            consistent,
            samples: self.sample_times.len(),
            block_log,
        })
    }
}

/// Runs one simulation of `cfg.model`.
pub fn run(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    Simulation::new(cfg).run()
}

pub fn run_edsc(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    run(&SimConfig { model: Model::Edsc, ..cfg.clone() })
}

pub fn run_baseline(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    run(&SimConfig { model: Model::Baseline, ..cfg.clone() })
}

/// Block production alone: no oracle samples and no background load.
pub fn mine_blocks(cfg: &SimConfig) -> Result<Vec<MinedBlock>, SimError> {
    let mut quiet = cfg.clone();
    quiet.workload.samples_per_block = 0.0;
    quiet.workload.background_gas_per_block = 0;
    quiet.drain_blocks = 0;
    Ok(run(&quiet)?.mined)
}
