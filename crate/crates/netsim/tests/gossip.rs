use edsc_netsim::gossip::fanout;
use edsc_netsim::rng::stream;
use edsc_netsim::{gossip_message, gossip_with, GossipParams, Link};

const MS: u64 = 1_000;

fn params(delay_ms: f64, wait_ms: u64) -> GossipParams {
    GossipParams { delay_mean_us: delay_ms * 1e3, hash_wait_us: wait_ms * MS }
}

#[test]
fn fanout_is_ceil_sqrt() {
    for p in 0..10_000usize {
        let brute = (0..=p).find(|r| r * r >= p).unwrap();
        assert_eq!(fanout(p), brute, "p={p}");
    }
}

#[test]
fn two_nodes_send_full() {
    let mut rng = stream(7, "gossip", 0);
    let t = gossip_message(0, 0, 2, &params(100.0, 500), &mut rng);
    assert_eq!(t.sends[0], (1, 0));
    assert_eq!(t.fetches, 0);
    assert!(t.arrivals[1] < u64::MAX);
}

#[test]
fn origin_split_at_101_nodes() {
    for seed in 0..5 {
        let mut rng = stream(seed, "gossip", 0);
        let t = gossip_message(3, 0, 101, &params(100.0, 500), &mut rng);
        assert_eq!(t.sends[3], (10, 90));
        assert!(t.arrivals.iter().all(|&a| a < u64::MAX), "every node learns the message");
    }
}

#[test]
fn every_node_informed_and_sends_bounded() {
    for n in [2usize, 3, 5, 20, 64] {
        for seed in 0..10 {
            let mut rng = stream(seed, "gossip", n as u64);
            let t = gossip_message(0, 1_000, n, &params(100.0, 500), &mut rng);
            assert_eq!(t.arrivals[0], 1_000);
            assert!(t.arrivals.iter().all(|&a| (1_000..u64::MAX).contains(&a)));
            for &(full, hash) in &t.sends {
                assert!((full as usize + hash as usize) < n);
            }
        }
    }
}

/// Five nodes: the origin sends two full copies (200 ms) and two hashes
/// (instant). The informed pair forwards in full to the other two.
fn scripted(full_ms: u64) -> edsc_netsim::GossipTrace {
    let mut rng = stream(1, "gossip", 0);
    gossip_with(0, 0, 5, 500 * MS, &mut rng, |_, link| match link {
        Link::Full => full_ms * MS,
        Link::Hash => 0,
        Link::Fetch => 50 * MS,
    })
}

#[test]
fn full_copy_before_timer_cancels_fetch() {
    let t = scripted(200);
    assert_eq!(t.sends[0], (2, 2));
    assert_eq!(t.fetches, 0);
    let mut arr = t.arrivals.clone();
    arr.sort_unstable();
    assert_eq!(arr, vec![0, 200 * MS, 200 * MS, 400 * MS, 400 * MS]);
}

#[test]
fn timer_fires_when_copy_is_late() {
    let t = scripted(300);
    assert_eq!(t.fetches, 2);
    let mut arr = t.arrivals.clone();
    arr.sort_unstable();
    // Fetch at 500 ms plus request and reply legs.
    assert_eq!(arr, vec![0, 300 * MS, 300 * MS, 600 * MS, 600 * MS]);
}

#[test]
fn zero_wait_fetches_immediately() {
    let mut rng = stream(1, "gossip", 0);
    let t = gossip_with(0, 0, 5, 0, &mut rng, |_, link| match link {
        Link::Full => 300 * MS,
        Link::Hash => 0,
        Link::Fetch => 10 * MS,
    });
    // The two hash-only peers fetch at once. Later announcements from them
    // may trigger more fetches, depending on which peers they pick.
    assert!(t.fetches >= 2);
    assert_eq!(t.arrivals.iter().filter(|&&a| a == 20 * MS).count(), 2, "{t:?}");
    assert!(t.arrivals.iter().all(|&a| a <= 320 * MS));
}

proptest::proptest! {
    #[test]
    fn fixed_delays_inform_everyone_no_earlier_than_one_leg(
        n in 2usize..80,
        origin_pick in 0usize..1000,
        seed in 0u64..1000,
        full_ms in 0u64..400,
        hash_ms in 0u64..400,
        fetch_ms in 0u64..400,
        wait_ms in 0u64..800,
    ) {
        let origin = origin_pick % n;
        let mut rng = stream(seed, "gossip", n as u64);
        let t = gossip_with(origin, 5 * MS, n, wait_ms * MS, &mut rng, |_, link| match link {
            Link::Full => full_ms * MS,
            Link::Hash => hash_ms * MS,
            Link::Fetch => fetch_ms * MS,
        });
        // A copy arrives over a full leg or a request/reply pair.
        let floor = 5 * MS + full_ms.min(2 * fetch_ms) * MS;
        for (i, &a) in t.arrivals.iter().enumerate() {
            if i == origin {
                proptest::prop_assert_eq!(a, 5 * MS);
            } else {
                proptest::prop_assert!(a < u64::MAX);
                proptest::prop_assert!(a >= floor, "node {} at {} < {}", i, a, floor);
            }
        }
        for &(full, hash) in &t.sends {
            proptest::prop_assert!((full as usize + hash as usize) < n);
        }
    }
}
