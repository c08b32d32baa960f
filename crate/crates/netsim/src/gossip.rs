//! Square-root fan-out gossip with hash announcements.
//!
//! A node that learns a message forwards it in full to `ceil(sqrt(P))`
//! random peers among the `P` that do not have it yet and announces its hash
//! to the others. A node holding only announcements waits `hash_wait`, then
//! fetches the body from an announcer (request plus reply).

use rand::seq::index::sample;
use rand::Rng;

use crate::engine::{EventQueue, SimEventKind, Time};
use crate::rng::exp_draw;

#[derive(Clone, Copy, Debug)]
pub struct GossipParams {
    pub delay_mean_us: f64,
    pub hash_wait_us: Time,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GossipTrace {
    /// Time each node first held the full message.
    pub arrivals: Vec<Time>,
    /// `(full sends, hash announcements)` issued by each node.
    pub sends: Vec<(u32, u32)>,
    pub fetches: u32,
}

pub fn fanout(uninformed: usize) -> usize {
    let mut r = (uninformed as f64).sqrt() as usize;
    // Correct for floating error in either direction.
    while r * r < uninformed {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= uninformed {
        r -= 1;
    }
    r
}

/// What a link carries, for delay models that distinguish them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    Full,
    Hash,
    /// One leg of a fetch (request or reply).
    Fetch,
}

/// Delivery schedule of one message injected at `origin` at time `t0`,
/// with i.i.d. exponential link delays.
pub fn gossip_message<R: Rng>(origin: usize, t0: Time, n: usize, params: &GossipParams, rng: &mut R) -> GossipTrace {
    let mean = params.delay_mean_us;
    gossip_with(origin, t0, n, params.hash_wait_us, rng, |r, _| libm::round(exp_draw(r, mean)) as Time)
}

/// As [`gossip_message`] with a caller-supplied link delay.
pub fn gossip_with<R: Rng, F: FnMut(&mut R, Link) -> Time>(
    origin: usize,
    t0: Time,
    n: usize,
    hash_wait_us: Time,
    rng: &mut R,
    mut delay: F,
) -> GossipTrace {
    let mut trace = GossipTrace { arrivals: vec![Time::MAX; n], sends: vec![(0, 0); n], fetches: 0 };
    let mut hash_at = vec![Time::MAX; n];
    let mut q: EventQueue<usize> = EventQueue::default();
    q.push(t0, SimEventKind::MsgArrival, origin);

    while let Some(ev) = q.pop() {
        let (t, node) = (ev.time, ev.payload);
        match ev.kind {
            SimEventKind::MsgArrival => {
                if trace.arrivals[node] != Time::MAX {
                    continue;
                }
                trace.arrivals[node] = t;
                let peers: Vec<usize> = (0..n).filter(|&p| trace.arrivals[p] == Time::MAX).collect();
                let k = fanout(peers.len());
                let mut full = vec![false; peers.len()];
                for i in sample(rng, peers.len(), k) {
                    full[i] = true;
                }
                for (i, &p) in peers.iter().enumerate() {
                    if full[i] {
                        trace.sends[node].0 += 1;
                        q.push(t + delay(rng, Link::Full), SimEventKind::MsgArrival, p);
                    } else {
                        trace.sends[node].1 += 1;
                        let at = t + delay(rng, Link::Hash);
                        if at < hash_at[p] {
                            hash_at[p] = at;
                            q.push(at + hash_wait_us, SimEventKind::FetchTimeout, p);
                        }
                    }
                }
            }
            SimEventKind::FetchTimeout => {
                // Superseded by an earlier announcement, or already delivered.
                if trace.arrivals[node] != Time::MAX || hash_at[node] + hash_wait_us != t {
                    continue;
                }
                trace.fetches += 1;
                let at = t + delay(rng, Link::Fetch) + delay(rng, Link::Fetch);
                q.push(at, SimEventKind::MsgArrival, node);
            }
            _ => unreachable!("gossip schedules only arrivals and timeouts"),
        }
    }
    trace
}
