//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always
//! printed. Sweep points use `EDSC_SWEEP_BLOCKS` blocks (default 2000);
//! the headline runs use the full default scenario.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use edsc_core::crypto::KeyPair;
use edsc_core::event::{EventDefinition, EventUpdate, Value, VarType};
use edsc_core::event_manager::{create_tx_based_on_evts, BlockCtx, EpochCounters, EventBuffer, RateLimits};
use edsc_core::event_state::EventState;
use edsc_core::ledger::{
    build_block, execute_execution, BlockLog, BlockRejection, BuildParams, ExecCtx, GenesisBuilder, LedgerConfig,
    LedgerState, NonceReserve, TxPool,
};
use edsc_core::matcher::EVAL_GAS_PER_NODE;
use edsc_core::message::{
    Action, Block, ContractScript, MessageBody, ProtocolMessage, ReceiptStatus, ScriptPredicate, SubscriptionParams,
    SubscriptionRef, Target, Template, TriggeredExecution,
};
use edsc_core::{Address, Amount, HashDigest};
use edsc_netsim::metrics::to_csv;
use edsc_netsim::{run_baseline, run_edsc, SimConfig, SimOutput};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Outcome = Result<String, String>;

fn check(cond: bool, ok: String, bad: String) -> Outcome {
    if cond {
        Ok(ok)
    } else {
        Err(bad)
    }
}

fn sweep_blocks() -> u64 {
    std::env::var("EDSC_SWEEP_BLOCKS").ok().and_then(|s| s.parse().ok()).unwrap_or(2000)
}

fn sweep_base() -> SimConfig {
    SimConfig { run_length: sweep_blocks(), verify_blocks: false, ..SimConfig::default() }
}

/// (baseline mean, edsc mean)
fn pair(cfg: &SimConfig) -> (f64, f64) {
    let b = run_baseline(cfg).expect("baseline run").summary.mean;
    let e = run_edsc(cfg).expect("edsc run").summary.mean;
    (b, e)
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}

fn nondecreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[0] <= w[1])
}

struct Headline {
    edsc: SimOutput,
    baseline: SimOutput,
}

fn headline() -> Headline {
    let cfg = SimConfig { keep_block_log: true, ..SimConfig::default() };
    Headline { edsc: run_edsc(&cfg).expect("edsc run"), baseline: run_baseline(&cfg).expect("baseline run") }
}

fn c1(h: &Headline) -> Outcome {
    let (b, e) = (h.baseline.summary.mean, h.edsc.summary.mean);
    let r = b / e;
    let msg = format!("ratio {r:.3} (baseline {b:.3}s, edsc {e:.3}s), band [2.0, 5.0]");
    check((2.0..=5.0).contains(&r), msg.clone(), msg)
}

fn c2(h: &Headline) -> Outcome {
    let interval = SimConfig::default().block_interval_s;
    let b = h.baseline.summary.mean;
    let msg = format!("baseline mean {b:.3}s = {:.3} intervals, floor 3.0", b / interval);
    check(b >= 3.0 * interval, msg.clone(), msg)
}

fn c3(h: &Headline) -> Outcome {
    let interval = SimConfig::default().block_interval_s;
    let p50 = h.edsc.summary.p50;
    let msg = format!("edsc median {p50:.3}s = {:.3} intervals, ceiling 1.25", p50 / interval);
    check(p50 <= 1.25 * interval, msg.clone(), msg)
}

fn c4() -> Outcome {
    let mut rows = Vec::new();
    for v in [8.0, 12.42, 20.0, 30.0, 45.0, 60.0] {
        rows.push((v, pair(&SimConfig { block_interval_s: v, ..sweep_base() })));
    }
    let ratios: Vec<f64> = rows.iter().map(|(_, (b, e))| b / e).collect();
    let bs: Vec<f64> = rows.iter().map(|(_, (b, _))| *b).collect();
    let es: Vec<f64> = rows.iter().map(|(_, (_, e))| *e).collect();
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let msg = format!(
        "min ratio {min_ratio:.3}; baseline {:?}; edsc {:?}",
        bs.iter().map(|x| (x * 10.0).round() / 10.0).collect::<Vec<_>>(),
        es.iter().map(|x| (x * 10.0).round() / 10.0).collect::<Vec<_>>()
    );
    check(min_ratio >= 2.0 && nondecreasing(&bs) && nondecreasing(&es), msg.clone(), msg)
}

fn c5() -> Outcome {
    let gaps = |cfgs: Vec<SimConfig>| -> Vec<f64> {
        cfgs.iter()
            .map(|c| {
                let (b, e) = pair(c);
                b - e
            })
            .collect()
    };
    let bd = gaps([0.5, 2.3, 5.0, 10.0].iter().map(|&v| SimConfig { block_delay_s: v, ..sweep_base() }).collect());
    let md = gaps([10.0, 100.0, 500.0, 2000.0].iter().map(|&v| SimConfig { msg_delay_ms: v, ..sweep_base() }).collect());
    let r = |xs: &[f64]| xs.iter().map(|x| (x * 100.0).round() / 100.0).collect::<Vec<_>>();
    let msg = format!("gap vs block delay {:?}; gap vs msg delay {:?}", r(&bd), r(&md));
    check(strictly_increasing(&bd) && strictly_increasing(&md), msg.clone(), msg)
}

fn c6() -> Outcome {
    let base = sweep_base();
    let caps = [base.block_gas_limit, base.block_gas_limit / 2, base.block_gas_limit / 4];
    let rows: Vec<(f64, f64)> = caps.iter().map(|&g| pair(&SimConfig { block_gas_limit: g, ..base.clone() })).collect();
    let bs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let es: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let min_ratio = rows.iter().map(|(b, e)| b / e).fold(f64::INFINITY, f64::min);
    let msg = format!("caps {caps:?}: baseline {bs:.2?}, edsc {es:.2?}, min ratio {min_ratio:.3}");
    check(strictly_increasing(&bs) && strictly_increasing(&es) && min_ratio >= 2.0, msg.clone(), msg)
}

/// SHA-256 of the metrics CSVs of a fixed short scenario, recorded once.
/// A different machine or build must reproduce it bit for bit.
const GOLDEN_CSV_SHA256: &str = "97bc611f779ead66883362c0e42e7fbf0f94c7b88e1e8e3d121f1545ebdedbca";

fn c7() -> Outcome {
    let cfg = SimConfig { run_length: 300, ..SimConfig::default() };
    let csv = |f: fn(&SimConfig) -> Result<SimOutput, edsc_netsim::SimError>| to_csv(&f(&cfg).expect("run").records);
    let (e1, e2, b1, b2) = (csv(run_edsc), csv(run_edsc), csv(run_baseline), csv(run_baseline));
    let mut h = Sha256::new();
    h.update(e1.as_bytes());
    h.update(b1.as_bytes());
    let digest = hex::encode(h.finalize());
    let same = e1 == e2 && b1 == b2;
    let msg = format!("re-run identical: {same}; csv sha256 {digest} (recorded {GOLDEN_CSV_SHA256})");
    check(same && digest == GOLDEN_CSV_SHA256, msg.clone(), msg)
}

#[derive(Clone, Copy, Debug)]
enum Tamper {
    Swap,
    RootFlip,
    FeeEdit,
    Drop,
}

fn same_round_pair(b: &Block) -> Option<usize> {
    (0..b.executions.len().saturating_sub(1))
        .find(|&j| b.execution_rounds[j] == b.execution_rounds[j + 1] && b.executions[j] != b.executions[j + 1])
}

fn c8() -> Outcome {
    let cfg = SimConfig { run_length: 500, keep_block_log: true, ..SimConfig::default() };
    let log = run_edsc(&cfg).expect("run").block_log.expect("log kept");
    if log.blocks.len() < 500 {
        return Err(format!("log has only {} blocks", log.blocks.len()));
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("honest.jsonl");
    let mut buf = Vec::new();
    log.write_to(&mut buf).expect("serialize");
    std::fs::write(&path, &buf).expect("write log");
    if let Err(e) = edsc_cli::cmd_validate(&path) {
        return Err(format!("honest log rejected: {e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut failures = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for trial in 0..50 {
        let kind = [Tamper::Swap, Tamper::RootFlip, Tamper::FeeEdit, Tamper::Drop][trial % 4];
        let mut t = log.clone();
        let eligible: Vec<usize> = (0..t.blocks.len())
            .filter(|&i| match kind {
                Tamper::Swap => same_round_pair(&t.blocks[i]).is_some(),
                Tamper::RootFlip => true,
                Tamper::FeeEdit | Tamper::Drop => !t.blocks[i].executions.is_empty(),
            })
            .collect();
        let i = *eligible.choose(&mut rng).expect("some block qualifies");
        let b = &mut t.blocks[i];
        let expected = match kind {
            Tamper::Swap => {
                let pairs: Vec<usize> = (0..b.executions.len() - 1)
                    .filter(|&j| b.execution_rounds[j] == b.execution_rounds[j + 1] && b.executions[j] != b.executions[j + 1])
                    .collect();
                let j = *pairs.choose(&mut rng).expect("pair exists");
                b.executions.swap(j, j + 1);
                BlockRejection::BadOrder
            }
            Tamper::RootFlip => {
                let bit = 1u8 << rng.gen_range(0..8);
                let byte = rng.gen_range(0..32);
                match rng.gen_range(0..3) {
                    0 => {
                        b.state_root.0[byte] ^= bit;
                        BlockRejection::BadStateRoot
                    }
                    1 => {
                        b.event_state_root.0[byte] ^= bit;
                        BlockRejection::BadEventStateRoot
                    }
                    _ => {
                        b.receipts_root.0[byte] ^= bit;
                        BlockRejection::BadReceiptsRoot
                    }
                }
            }
            Tamper::FeeEdit => {
                let j = rng.gen_range(0..b.executions.len());
                b.executions[j].subscription_fee_paid += rng.gen_range(1..1000);
                BlockRejection::BadExecutions
            }
            Tamper::Drop => {
                let j = rng.gen_range(0..b.executions.len());
                b.executions.remove(j);
                b.execution_rounds.remove(j);
                BlockRejection::BadExecutions
            }
        };
        let number = b.number;
        *counts.entry(expected.name()).or_default() += 1;
        match t.validate_all() {
            Err((h, r)) if h == number && r == expected => {}
            other => failures.push(format!("{kind:?} at block {number}: expected {}, got {other:?}", expected.name())),
        }
    }
    let msg = format!("honest {} blocks valid; 50 tamperings {counts:?}", log.blocks.len());
    check(failures.is_empty(), msg, failures.join("; "))
}

// Criterion 9: brute-force matcher oracle.

#[derive(Clone, Debug)]
enum OTerm {
    X,
    Y,
    BlockNumber,
    BlockTime,
    Int(i64),
    Tag,
    Publisher,
    Bytes(Vec<u8>),
    Flag,
    Bool(bool),
}

#[derive(Clone, Debug)]
enum OExpr {
    Lit(bool),
    Flag,
    Cmp(&'static str, OTerm, OTerm),
    Not(Box<OExpr>),
    And(Box<OExpr>, Box<OExpr>),
    Or(Box<OExpr>, Box<OExpr>),
}

fn render_term(t: &OTerm) -> String {
    match t {
        OTerm::X => "payload.x".into(),
        OTerm::Y => "payload.y".into(),
        OTerm::BlockNumber => "block.number".into(),
        OTerm::BlockTime => "block.time".into(),
        OTerm::Int(v) => v.to_string(),
        OTerm::Tag => "payload.tag".into(),
        OTerm::Publisher => "publisher".into(),
        OTerm::Bytes(b) => format!("0x{}", hex::encode(b)),
        OTerm::Flag => "payload.flag".into(),
        OTerm::Bool(b) => b.to_string(),
    }
}

fn render(e: &OExpr) -> String {
    match e {
        OExpr::Lit(b) => b.to_string(),
        OExpr::Flag => "payload.flag".into(),
        OExpr::Cmp(op, l, r) => format!("{} {op} {}", render_term(l), render_term(r)),
        OExpr::Not(x) => format!("not ({})", render(x)),
        OExpr::And(a, b) => format!("({}) and ({})", render(a), render(b)),
        OExpr::Or(a, b) => format!("({}) or ({})", render(a), render(b)),
    }
}

struct OCtx<'a> {
    x: i64,
    y: i64,
    tag: &'a [u8],
    flag: bool,
    publisher: &'a [u8],
    number: i64,
    time: i64,
}

enum OVal {
    I(i64),
    B(Vec<u8>),
    T(bool),
}

fn oval(t: &OTerm, c: &OCtx<'_>) -> OVal {
    match t {
        OTerm::X => OVal::I(c.x),
        OTerm::Y => OVal::I(c.y),
        OTerm::BlockNumber => OVal::I(c.number),
        OTerm::BlockTime => OVal::I(c.time),
        OTerm::Int(v) => OVal::I(*v),
        OTerm::Tag => OVal::B(c.tag.to_vec()),
        OTerm::Publisher => OVal::B(c.publisher.to_vec()),
        OTerm::Bytes(b) => OVal::B(b.clone()),
        OTerm::Flag => OVal::T(c.flag),
        OTerm::Bool(b) => OVal::T(*b),
    }
}

fn oeval(e: &OExpr, c: &OCtx<'_>) -> bool {
    match e {
        OExpr::Lit(b) => *b,
        OExpr::Flag => c.flag,
        OExpr::Not(x) => !oeval(x, c),
        OExpr::And(a, b) => oeval(a, c) && oeval(b, c),
        OExpr::Or(a, b) => oeval(a, c) || oeval(b, c),
        OExpr::Cmp(op, l, r) => match (oval(l, c), oval(r, c)) {
            (OVal::I(a), OVal::I(b)) => match *op {
                "==" => a == b,
                "!=" => a != b,
                "<" => a < b,
                "<=" => a <= b,
                ">" => a > b,
                ">=" => a >= b,
                _ => unreachable!(),
            },
            (OVal::B(a), OVal::B(b)) => (a == b) == (*op == "=="),
            (OVal::T(a), OVal::T(b)) => (a == b) == (*op == "=="),
            _ => unreachable!("generator is well typed"),
        },
    }
}

const TAGS: [&[u8]; 3] = [&[0x01], &[0x02], &[0xab, 0xcd]];

fn gen_expr(rng: &mut ChaCha8Rng, depth: u32, pubs: &[Vec<u8>]) -> OExpr {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    if !leaf {
        return match rng.gen_range(0..3) {
            0 => OExpr::Not(Box::new(gen_expr(rng, depth - 1, pubs))),
            1 => OExpr::And(Box::new(gen_expr(rng, depth - 1, pubs)), Box::new(gen_expr(rng, depth - 1, pubs))),
            _ => OExpr::Or(Box::new(gen_expr(rng, depth - 1, pubs)), Box::new(gen_expr(rng, depth - 1, pubs))),
        };
    }
    let int_term = |rng: &mut ChaCha8Rng| match rng.gen_range(0..5) {
        0 => OTerm::X,
        1 => OTerm::Y,
        2 => OTerm::BlockNumber,
        3 => OTerm::BlockTime,
        _ => OTerm::Int(rng.gen_range(-3..12)),
    };
    match rng.gen_range(0..10) {
        0 => OExpr::Lit(rng.gen()),
        1 => OExpr::Flag,
        2 => {
            let op = ["==", "!="][rng.gen_range(0..2)];
            OExpr::Cmp(op, OTerm::Flag, OTerm::Bool(rng.gen()))
        }
        3 => {
            let op = ["==", "!="][rng.gen_range(0..2)];
            let lit = TAGS[rng.gen_range(0..TAGS.len())].to_vec();
            OExpr::Cmp(op, OTerm::Tag, OTerm::Bytes(lit))
        }
        4 => {
            let op = ["==", "!="][rng.gen_range(0..2)];
            OExpr::Cmp(op, OTerm::Publisher, OTerm::Bytes(pubs[rng.gen_range(0..pubs.len())].clone()))
        }
        _ => {
            let op = ["==", "!=", "<", "<=", ">", ">="][rng.gen_range(0..6)];
            let (l, r) = (int_term(rng), int_term(rng));
            OExpr::Cmp(op, l, r)
        }
    }
}

struct OSub {
    event: usize,
    subscriber: Address,
    ordinal: u64,
    price: Amount,
    max_fee: Amount,
    filter: Vec<usize>,
    block_rate: u64,
    event_rate: u64,
    expr: Option<OExpr>,
    activation: u64,
    last: Option<u64>,
    instances: u64,
}

type Trig = (Address, Address, u64, HashDigest);

fn universe(seed: u64) -> Result<(usize, usize, usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pubs: Vec<KeyPair> = (0..4).map(|i| KeyPair::keyed_from_label(&format!("acc/pub/{i}"))).collect();
    let pub_bytes: Vec<Vec<u8>> = pubs.iter().map(|k| k.public().raw_bytes()).collect();
    let accounts: Vec<Address> = (0..12).map(|i| Address::from_label(&format!("acc/sub/{i}"))).collect();
    let limits = RateLimits {
        max_updates_per_account_per_epoch: u32::MAX,
        max_triggers_per_event_update: rng.gen_range(1..=5),
        max_triggers_per_account_per_epoch: rng.gen_range(1..=6),
        epoch_length: rng.gen_range(1..=3),
    };
    let n_events = rng.gen_range(1..=50);
    let n_subs = rng.gen_range(0..=200);
    let n_updates = rng.gen_range(0..=500);
    let n_blocks: u64 = rng.gen_range(1..=10);

    let mut state = EventState::new(2);
    let mut events = Vec::new();
    for e in 0..n_events {
        let creator = pubs[rng.gen_range(0..pubs.len())].address();
        let def = EventDefinition::new(
            creator,
            vec![
                ("x".into(), VarType::Int),
                ("y".into(), VarType::Int),
                ("tag".into(), VarType::Bytes),
                ("flag".into(), VarType::Bool),
            ],
            &format!("universe {seed} event {e}"),
        );
        events.push(state.insert_definition(def).map_err(|e| e.to_string())?);
    }
    let mut osubs = Vec::new();
    for _ in 0..n_subs {
        let event = rng.gen_range(0..n_events);
        let subscriber = accounts[rng.gen_range(0..accounts.len())];
        let filter: Vec<usize> = if rng.gen_bool(0.6) {
            Vec::new()
        } else {
            (0..pubs.len()).filter(|_| rng.gen_bool(0.5)).collect()
        };
        let expr = if rng.gen_bool(0.2) { None } else { Some(gen_expr(&mut rng, 3, &pub_bytes)) };
        let mut p = SubscriptionParams::new(rng.gen_range(1..=6), 100_000);
        p.max_subscription_fee = rng.gen_range(0..=3);
        p.publisher_filter = filter.iter().map(|&i| pubs[i].public().clone()).collect();
        p.block_rate = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=3) };
        p.event_rate = if rng.gen_bool(0.5) { 0 } else { rng.gen_range(1..=3) };
        p.constraint = expr.as_ref().map(render).unwrap_or_default();
        let activation = rng.gen_range(0..=n_blocks);
        let r = state
            .subscribe_at(events[event], subscriber, p.clone(), activation)
            .map_err(|e| format!("constraint {:?}: {e}", p.constraint))?;
        osubs.push(OSub {
            event,
            subscriber,
            ordinal: r.ordinal,
            price: p.gas_price,
            max_fee: p.max_subscription_fee,
            filter,
            block_rate: p.block_rate,
            event_rate: p.event_rate,
            expr,
            activation,
            last: None,
            instances: 0,
        });
    }

    // Updates spread over blocks 1..=n_blocks.
    let mut nonces: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut by_block: BTreeMap<u64, Vec<(EventUpdate, usize, usize)>> = BTreeMap::new();
    for _ in 0..n_updates {
        let (e, p) = (rng.gen_range(0..n_events), rng.gen_range(0..pubs.len()));
        let n = nonces.entry((e, p)).or_insert(0);
        *n += 1;
        let payload = vec![
            Value::Int(rng.gen_range(-2..10)),
            Value::Int(rng.gen_range(-2..10)),
            Value::Bytes(TAGS[rng.gen_range(0..TAGS.len())].to_vec()),
            Value::Bool(rng.gen()),
        ];
        let u = EventUpdate::external(&pubs[p], events[e], *n, payload, rng.gen_range(0..=3), 0);
        by_block.entry(rng.gen_range(1..=n_blocks)).or_default().push((u, e, p));
    }

    let mut counters = EpochCounters::default();
    let mut oracle_counts: BTreeMap<Address, u32> = BTreeMap::new();
    let mut oracle_epoch = 0;
    let mut indexed: Vec<Trig> = Vec::new();
    let mut brute: Vec<Trig> = Vec::new();
    let mut capped = 0;
    for h in 1..=n_blocks {
        let ups = by_block.remove(&h).unwrap_or_default();
        let time = h as i64 * 12;
        state.begin_block(h);
        counters.roll(h, &limits);
        let plain: Vec<EventUpdate> = ups.iter().map(|(u, _, _)| u.clone()).collect();
        let batch = create_tx_based_on_evts(
            &mut state,
            &plain,
            BlockCtx { height: h, time_secs: time },
            &limits,
            &mut counters,
            EVAL_GAS_PER_NODE,
        );
        indexed.extend(batch.executions.iter().map(|x: &TriggeredExecution| {
            let s: &SubscriptionRef = &x.subscription;
            (s.event_id, s.subscriber, s.ordinal, x.triggering_update)
        }));

        let epoch = h / limits.epoch_length;
        if epoch != oracle_epoch {
            oracle_epoch = epoch;
            oracle_counts.clear();
        }
        for (u, e, p) in &ups {
            let mut order: Vec<usize> = (0..osubs.len()).filter(|&i| osubs[i].event == *e && osubs[i].activation <= h).collect();
            order.sort_by(|&a, &b| osubs[b].price.cmp(&osubs[a].price).then(osubs[a].ordinal.cmp(&osubs[b].ordinal)));
            let (tag, flag, x, y) = match (&u.payload[2], &u.payload[3], &u.payload[0], &u.payload[1]) {
                (Value::Bytes(t), Value::Bool(f), Value::Int(x), Value::Int(y)) => (t.clone(), *f, *x, *y),
                _ => unreachable!(),
            };
            let ctx = OCtx { x, y, tag: &tag, flag, publisher: &pub_bytes[*p], number: h as i64, time };
            let mut emitted = 0;
            for i in order {
                if emitted >= limits.max_triggers_per_event_update {
                    capped += 1;
                    break;
                }
                let s = &mut osubs[i];
                if oracle_counts.get(&s.subscriber).copied().unwrap_or(0) >= limits.max_triggers_per_account_per_epoch {
                    capped += 1;
                    continue;
                }
                if !s.filter.is_empty() && !s.filter.contains(p) {
                    continue;
                }
                s.instances += 1;
                if s.max_fee < u.subscription_fee {
                    continue;
                }
                if s.block_rate > 0 && s.last.is_some_and(|l| h - l < s.block_rate) {
                    continue;
                }
                if s.event_rate > 0 && s.instances % s.event_rate != 0 {
                    continue;
                }
                if !s.expr.as_ref().is_none_or(|x| oeval(x, &ctx)) {
                    continue;
                }
                s.last = Some(h);
                *oracle_counts.entry(s.subscriber).or_insert(0) += 1;
                emitted += 1;
                brute.push((events[*e], s.subscriber, s.ordinal, u.digest()));
            }
        }
    }
    if indexed != brute {
        let first = indexed.iter().zip(&brute).position(|(a, b)| a != b).unwrap_or(indexed.len().min(brute.len()));
        return Err(format!(
            "universe {seed}: indexed {} vs brute {} triggers, first difference at {first}",
            indexed.len(),
            brute.len()
        ));
    }
    Ok((n_subs, n_updates, brute.len(), capped))
}

fn c9() -> Outcome {
    let mut totals = (0, 0, 0, 0);
    for seed in 0..1000 {
        let (s, u, t, c) = universe(seed)?;
        totals = (totals.0 + s, totals.1 + u, totals.2 + t, totals.3 + c);
    }
    Ok(format!(
        "1000 universes agree ({} subscriptions, {} updates, {} triggers, {} cap cut-offs)",
        totals.0, totals.1, totals.2, totals.3
    ))
}

fn c10(logs: &[&BlockLog]) -> Outcome {
    let limits = RateLimits::default();
    let mut blocks = 0;
    let mut execs = 0;
    for log in logs {
        let limits = log.genesis.config.limits;
        let mut per_update: BTreeMap<HashDigest, u32> = BTreeMap::new();
        let mut per_account: BTreeMap<(Address, u64), u32> = BTreeMap::new();
        for b in &log.blocks {
            blocks += 1;
            for (w, r) in b.executions.windows(2).zip(b.execution_rounds.windows(2)) {
                if r[0] != r[1] {
                    continue;
                }
                let (a, c) = (&w[0], &w[1]);
                if a.gas_price < c.gas_price || (a.gas_price == c.gas_price && a.subscription.ordinal > c.subscription.ordinal) {
                    return Err(format!("block {}: executions out of order", b.number));
                }
            }
            for e in &b.executions {
                execs += 1;
                let n = per_update.entry(e.triggering_update).or_default();
                *n += 1;
                if *n > limits.max_triggers_per_event_update {
                    return Err(format!("block {}: more than k triggers for one update", b.number));
                }
                let epoch = limits.epoch_of(e.created_block);
                let m = per_account.entry((e.subscription.subscriber, epoch)).or_default();
                *m += 1;
                if *m > limits.max_triggers_per_account_per_epoch {
                    return Err(format!("block {}: more than m triggers for one account", b.number));
                }
            }
        }
    }
    Ok(format!(
        "{blocks} blocks, {execs} executions scanned: price order within each build round, k={}, m={} respected",
        limits.max_triggers_per_event_update, limits.max_triggers_per_account_per_epoch
    ))
}

fn random_script(rng: &mut ChaCha8Rng, own_event: Address, sinks: &[Address]) -> Vec<Action> {
    let mut actions = Vec::new();
    for _ in 0..rng.gen_range(1..=4) {
        actions.push(match rng.gen_range(0..4) {
            0 => Action::ConsumeGas(rng.gen_range(0..20_000)),
            1 => Action::Transfer {
                to: if rng.gen_bool(0.5) { Target::TriggerPublisher } else { Target::Fixed(sinks[rng.gen_range(0..sinks.len())]) },
                amount: rng.gen_range(0..500),
                memo: vec![],
            },
            2 => Action::EmitEvent {
                event_id: own_event,
                payload: vec![Template::TriggerField(1), Template::BlockNumber],
                subscription_fee: rng.gen_range(0..3),
            },
            _ => Action::Noop,
        });
    }
    let at = rng.gen_range(0..=actions.len());
    actions.insert(at, Action::RevertIf(ScriptPredicate::DigestChance(300)));
    actions
}

fn c11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let oracle = KeyPair::keyed_from_label("acc/oracle");
    let miner = Address::from_label("acc/miner");
    let sinks: Vec<Address> = (0..4).map(|i| Address::from_label(&format!("acc/sink/{i}"))).collect();
    let mut g = GenesisBuilder::new(1);
    g.fund(oracle.address(), 1_000_000_000_000);
    g.fund(miner, 1);
    for s in &sinks {
        g.fund(*s, 1);
    }
    let price_def =
        EventDefinition::new(oracle.address(), vec![("round".into(), VarType::Int), ("price".into(), VarType::Int)], "acc price");
    let ev = g.event(price_def);
    let mut subs = Vec::new();
    for i in 0..20 {
        let a = Address::from_label(&format!("acc/contract/{i}"));
        let own = g.event(EventDefinition::new(a, vec![("price".into(), VarType::Int), ("at".into(), VarType::Int)], "acc own"));
        let script = random_script(&mut rng, own, &sinks);
        g.contract(a, Address::from_label("acc/deployer"), ContractScript::new(script), 10_000_000_000, SubscriptionParams::new(1, 100_000));
        let mut p = SubscriptionParams::new(rng.gen_range(1..50), 150_000);
        p.max_subscription_fee = 5;
        g.subscribe(ev, a, p);
        subs.push(a);
    }
    let genesis = g.build();
    let cfg = LedgerConfig { block_reward: 7, ..LedgerConfig::default() };

    // Atomicity: 1000 standalone executions against evolving state.
    let mut st = genesis.clone();
    let mut reserve = NonceReserve::default();
    let mut reverted = 0;
    for i in 0..1000u64 {
        let sub = subs[rng.gen_range(0..subs.len())];
        let exec = TriggeredExecution {
            subscription: SubscriptionRef { event_id: ev, subscriber: sub, ordinal: 0 },
            triggering_update: edsc_core::crypto::hash(&i.to_be_bytes()),
            publisher: oracle.address(),
            payload: vec![Value::Int(i as i64), Value::Int(rng.gen_range(0..1000))],
            gas_price: rng.gen_range(1..50),
            gas_limit: 150_000,
            subscription_fee_paid: rng.gen_range(0..5),
            subscriber_data: vec![],
            created_block: i / 20 + 1,
        };
        let ctx = ExecCtx { height: i / 20 + 1, time_ms: i * 600, miner };
        let pre = st.clone();
        let out = execute_execution(&mut st, &exec, &ctx, &cfg, &mut reserve).map_err(|e| format!("exec {i}: {e:?}"))?;
        if pre.chain.total_supply() != st.chain.total_supply() {
            return Err(format!("exec {i}: supply changed"));
        }
        if out.receipt.status == ReceiptStatus::Reverted {
            reverted += 1;
            let fee = u128::from(out.receipt.gas_used) * exec.gas_price;
            let mut expected: LedgerState = pre.clone();
            expected.chain.debit(&sub, fee);
            expected.chain.credit(miner, fee);
            if expected != st || !out.emitted.is_empty() {
                return Err(format!("exec {i}: reverted execution changed more than the gas payment"));
            }
        }
    }

    // Conservation after every block of a chain carrying the same scripts.
    let mut state = genesis.clone();
    let base_supply = genesis.chain.total_supply();
    let mut parent = HashDigest::default();
    let mut chain_execs = 0;
    let mut chain_reverts = 0;
    let mut nonce = 0;
    let mut h = 0u64;
    while chain_execs < 1000 {
        h += 1;
        let mut buf = EventBuffer::new(64);
        for _ in 0..rng.gen_range(1..=3) {
            nonce += 1;
            let u = EventUpdate::external(&oracle, ev, nonce, vec![Value::Int(nonce as i64), Value::Int(rng.gen_range(0..999))], rng.gen_range(0..=5), 10);
            buf.ingest(u, &state.events).map_err(|e| format!("ingest: {e}"))?;
        }
        let p = BuildParams { parent, number: h, timestamp_ms: h * 12_420, miner, gas_limit: 8_000_000 };
        let built = build_block(&state, &TxPool::default(), &buf, &p, &cfg);
        chain_execs += built.block.executions.len();
        chain_reverts += built.receipts.iter().filter(|r| r.status == ReceiptStatus::Reverted).count();
        let supply = built.post.chain.total_supply();
        if supply != base_supply + 7 * u128::from(h) {
            return Err(format!("block {h}: supply {supply} != {}", base_supply + 7 * u128::from(h)));
        }
        parent = built.block.hash();
        state = built.post;
    }
    Ok(format!(
        "{reverted}/1000 standalone executions reverted with gas-only effects; {h} blocks, {chain_execs} executions ({chain_reverts} reverted) conserve supply"
    ))
}

/// Test-side model of one subscription's schedule.
#[derive(Clone, Debug)]
struct Sched {
    ordinal: u64,
    /// (effective block, gas price or None for removal)
    changes: Vec<(u64, Option<Amount>)>,
}

impl Sched {
    fn price_at(&self, h: u64) -> Option<Amount> {
        self.changes.iter().rfind(|(b, _)| *b <= h).and_then(|(_, p)| *p)
    }
    fn settled(&self, h: u64) -> bool {
        self.changes.last().is_some_and(|(b, _)| *b <= h)
    }
}

fn activation_run(seed: u64) -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let delay = rng.gen_range(1..=5);
    let oracle = KeyPair::keyed_from_label("act/oracle");
    let miner = Address::from_label("act/miner");
    let owners: Vec<KeyPair> = (0..6).map(|i| KeyPair::keyed_from_label(&format!("act/owner/{i}"))).collect();
    let contracts: Vec<Address> = (0..6).map(|i| Address::from_label(&format!("act/contract/{i}"))).collect();
    let mut g = GenesisBuilder::new(delay);
    g.fund(oracle.address(), 1_000_000_000_000);
    let ev = g.event(EventDefinition::new(oracle.address(), vec![("n".into(), VarType::Int)], "act tick"));
    for (k, c) in owners.iter().zip(&contracts) {
        g.fund(k.address(), 1_000_000_000_000);
        g.contract(*c, k.address(), ContractScript::new(vec![Action::Noop]), 1_000_000_000_000, SubscriptionParams::new(1, 100_000));
    }
    let mut state = g.build();
    let cfg = LedgerConfig::default();
    let mut scheds: Vec<Vec<Sched>> = vec![Vec::new(); contracts.len()];
    let mut nonces = vec![0u64; owners.len()];
    let mut parent = HashDigest::default();
    let mut checked = 0;
    for h in 1..=40u64 {
        let mut pool = TxPool::new(4);
        let mut planned: Vec<(usize, Option<Amount>, bool)> = Vec::new();
        for c in 0..contracts.len() {
            if !rng.gen_bool(0.3) {
                continue;
            }
            let live = scheds[c].last().filter(|s| s.price_at(u64::MAX).is_some()).cloned();
            let body = match live {
                Some(s) if !s.settled(h) => continue,
                Some(s) => {
                    if rng.gen_bool(0.5) {
                        planned.push((c, None, false));
                        MessageBody::Unsubscribe { subscriber: contracts[c], event_id: ev, ordinal: s.ordinal }
                    } else {
                        let price = rng.gen_range(1..100);
                        planned.push((c, Some(price), false));
                        MessageBody::SubscriptionUpdate {
                            subscriber: contracts[c],
                            event_id: ev,
                            ordinal: s.ordinal,
                            params: SubscriptionParams::new(price, 100_000),
                        }
                    }
                }
                None => {
                    let price = rng.gen_range(1..100);
                    planned.push((c, Some(price), true));
                    MessageBody::Subscribe { subscriber: contracts[c], event_id: ev, params: SubscriptionParams::new(price, 100_000) }
                }
            };
            let m = ProtocolMessage::signed(&owners[c], nonces[c], 1, 0, body);
            nonces[c] += 1;
            pool.insert(m).map_err(|e| format!("pool: {e}"))?;
        }
        let mut buf = EventBuffer::new(8);
        let tick = EventUpdate::external(&oracle, ev, h, vec![Value::Int(h as i64)], 0, 10);
        buf.ingest(tick.clone(), &state.events).map_err(|e| format!("ingest: {e}"))?;
        let p = BuildParams { parent, number: h, timestamp_ms: h * 12_420, miner, gas_limit: 8_000_000 };
        let built = build_block(&state, &pool, &buf, &p, &cfg);
        if !built.dropped_messages.is_empty() {
            return Err(format!("block {h}: messages dropped {:?}", built.dropped_messages));
        }

        // Expected triggers from the tick, per the model as of block h.
        let mut expected: BTreeSet<(Address, Amount)> = BTreeSet::new();
        for (c, list) in scheds.iter().enumerate() {
            for s in list {
                if let Some(price) = s.price_at(h) {
                    expected.insert((contracts[c], price));
                }
            }
        }
        let tick_digest = tick.digest();
        let actual: BTreeSet<(Address, Amount)> = built
            .block
            .executions
            .iter()
            .filter(|e| e.triggering_update == tick_digest)
            .map(|e| (e.subscription.subscriber, e.gas_price))
            .collect();
        if expected != actual {
            return Err(format!("seed {seed} delay {delay} block {h}: expected {expected:?}, got {actual:?}"));
        }
        checked += actual.len();

        // Record this block's changes at block h + delay.
        for (c, price, new) in planned {
            if new {
                let ordinal = built
                    .post
                    .events
                    .subscriptions
                    .get(&ev)
                    .into_iter()
                    .flatten()
                    .filter(|s| s.subscriber == contracts[c])
                    .map(|s| s.ordinal)
                    .max()
                    .ok_or("new subscription missing")?;
                scheds[c].push(Sched { ordinal, changes: vec![(h + delay, price)] });
            } else {
                scheds[c].last_mut().expect("live subscription").changes.push((h + delay, price));
            }
        }
        parent = built.block.hash();
        state = built.post;
    }
    Ok(checked)
}

fn c12() -> Outcome {
    let mut total = 0;
    for seed in 0..50 {
        total += activation_run(seed)?;
    }
    Ok(format!("50 randomized schedules, {total} tick triggers matched the delayed model"))
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut time = |n: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let r = f();
        let secs = t.elapsed().as_secs_f64();
        let (tag, msg) = match &r {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("criterion {n:>2} [{tag}] {name}: {msg} ({secs:.1}s)");
        results.push((n, name, r, secs));
    };
    let t = Instant::now();
    let h = headline();
    println!("headline runs (both models, default scenario): {:.1}s", t.elapsed().as_secs_f64());
    time(1, "headline ratio", &mut || c1(&h));
    time(2, "baseline floor", &mut || c2(&h));
    time(3, "edsc median", &mut || c3(&h));
    time(4, "interval sweep", &mut c4);
    time(5, "delay sensitivity", &mut c5);
    time(6, "capacity sweep", &mut c6);
    time(7, "determinism", &mut c7);
    time(8, "validation soundness", &mut c8);
    time(9, "matcher oracle", &mut c9);
    let logs: Vec<&BlockLog> = [&h.edsc, &h.baseline].iter().filter_map(|o| o.block_log.as_ref()).collect();
    time(10, "ordering and caps", &mut || c10(&logs));
    time(11, "atomicity and conservation", &mut c11);
    time(12, "activation delay", &mut c12);
    let failed: Vec<u32> = results.iter().filter(|r| r.2.is_err()).map(|r| r.0).collect();
    println!("acceptance: {} passed, {} failed", results.len() - failed.len(), failed.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
