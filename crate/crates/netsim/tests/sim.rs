use edsc_netsim::metrics::to_csv;
use edsc_netsim::{mine_blocks, run_baseline, run_edsc, SimConfig};

fn quick() -> SimConfig {
    SimConfig { run_length: 200, verify_blocks: true, ..SimConfig::default() }
}

fn mean_gap_s(times: &[u64]) -> f64 {
    let n = times.len() - 1;
    (times[n] - times[0]) as f64 / 1e6 / n as f64
}

#[test]
fn single_miner_mean_interval() {
    let cfg = SimConfig {
        node_count: 2,
        hashpower: vec![1.0 - 1e-12, 1e-12],
        run_length: 10_000,
        verify_blocks: false,
        ..SimConfig::default()
    };
    let mined = mine_blocks(&cfg).unwrap();
    assert!(mined.iter().all(|b| b.miner == 0));
    let mut t: Vec<u64> = mined.iter().map(|b| b.time_us).collect();
    t.insert(0, 0);
    let m = mean_gap_s(&t);
    assert!((m - 12.42).abs() <= 0.02 * 12.42, "mean {m}");
}

#[test]
fn two_equal_miners_mean_interval() {
    let cfg = SimConfig {
        node_count: 2,
        hashpower: vec![0.5, 0.5],
        block_delay_s: 0.0,
        run_length: 10_000,
        verify_blocks: false,
        ..SimConfig::default()
    };
    let mined = mine_blocks(&cfg).unwrap();
    let mut t: Vec<u64> = mined.iter().map(|b| b.time_us).collect();
    t.insert(0, 0);
    let m = mean_gap_s(&t);
    assert!((m - 12.42).abs() <= 0.02 * 12.42, "mean {m}");
    let share = mined.iter().filter(|b| b.miner == 0).count() as f64 / mined.len() as f64;
    assert!((share - 0.5).abs() < 0.03, "share {share}");
}

#[test]
fn zero_delay_has_no_stale_blocks() {
    let cfg = SimConfig { block_delay_s: 0.0, run_length: 10_000, verify_blocks: false, ..SimConfig::default() };
    let mined = mine_blocks(&cfg).unwrap();
    let stale = mined.iter().filter(|b| !b.in_final_chain).count();
    // Blocks above the measured head are not counted as stale.
    let tail = mined.iter().filter(|b| b.height + 6 > 10_000).count();
    assert!(stale <= tail, "stale {stale}");
    assert!(mined.iter().enumerate().all(|(i, b)| b.height == i as u64 + 1));
}

#[test]
fn runs_are_reproducible() {
    let cfg = quick();
    let a = run_edsc(&cfg).unwrap();
    let b = run_edsc(&cfg).unwrap();
    assert_eq!(to_csv(&a.records), to_csv(&b.records));
    assert_eq!(a.mined, b.mined);
    let c = run_edsc(&SimConfig { seed: 2, ..cfg }).unwrap();
    assert_ne!(to_csv(&a.records), to_csv(&c.records));
}

#[test]
fn nodes_agree_and_latencies_positive() {
    for out in [run_edsc(&quick()).unwrap(), run_baseline(&quick()).unwrap()] {
        assert!(out.consistent);
        assert!(!out.records.is_empty());
        assert!(out.records.iter().all(|r| r.latency_s > 0.0));
        assert!(out.rejections.is_empty());
        assert_eq!(out.summary.records, out.records.len());
    }
}

#[test]
fn every_sample_reaches_every_subscriber() {
    let out = run_edsc(&quick()).unwrap();
    let subs = SimConfig::default().workload.subscribers;
    assert_eq!(out.records.len() + out.summary.missing, out.samples * subs);
    // Drain blocks leave room for all callbacks.
    assert_eq!(out.summary.missing, 0);
}

/// Even with instant propagation and an instant oracle, the request has to
/// be included and confirmed before the response can be.
#[test]
fn baseline_needs_two_inclusions() {
    let mut cfg = quick();
    cfg.block_delay_s = 0.0;
    cfg.msg_delay_ms = 0.0;
    cfg.workload.response_latency_s = 0.0;
    let conf = cfg.workload.request_confirmations;
    let out = run_baseline(&cfg).unwrap();
    let final_times: Vec<f64> = out.mined.iter().filter(|b| b.in_final_chain).map(|b| b.time_us as f64 / 1e6).collect();
    assert!(!out.records.is_empty());
    for r in &out.records {
        let blocks = final_times.iter().filter(|&&t| t > r.emit_time_s && t <= r.inclusion_time_s + 1e-6).count();
        assert!(blocks as u64 >= 2.max(conf + 1), "{} spans {blocks} blocks", r.trigger_id);
    }
}

#[test]
fn edsc_callbacks_land_in_next_block_when_idle() {
    let mut cfg = quick();
    cfg.block_delay_s = 0.0;
    cfg.msg_delay_ms = 0.0;
    cfg.workload.background_gas_per_block = 0;
    let out = run_edsc(&cfg).unwrap();
    let final_times: Vec<f64> = out.mined.iter().filter(|b| b.in_final_chain).map(|b| b.time_us as f64 / 1e6).collect();
    for r in &out.records {
        let blocks = final_times.iter().filter(|&&t| t > r.emit_time_s && t <= r.inclusion_time_s + 1e-6).count();
        assert_eq!(blocks, 1, "{}", r.trigger_id);
    }
}

#[test]
fn block_log_replays() {
    let cfg = SimConfig { run_length: 60, keep_block_log: true, ..SimConfig::default() };
    let out = run_edsc(&cfg).unwrap();
    let log = out.block_log.expect("log kept");
    assert!(log.blocks.len() >= 60);
    assert_eq!(log.validate_all(), Ok(log.blocks.len()));
}

#[test]
fn config_rejects_bad_values() {
    let bad = [
        SimConfig { node_count: 1, ..SimConfig::default() },
        SimConfig { hashpower: vec![0.5], ..SimConfig::default() },
        SimConfig { block_interval_s: 0.0, ..SimConfig::default() },
        SimConfig { msg_delay_ms: -1.0, ..SimConfig::default() },
        SimConfig { block_gas_limit: 10, ..SimConfig::default() },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
        assert!(run_edsc(&c).is_err());
    }
}
