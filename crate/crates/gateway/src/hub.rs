use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use serde::Serialize;
use tokio::sync::broadcast;
use twinflow_core::diagnosis::HistoryRecord;
use twinflow_core::runtime::{Event, TwinSnapshot};

/// Events kept for reconnecting subscribers.
pub const RING_CAPACITY: usize = 1024;

/// Everything readers may see of the twin at one point of the event
/// sequence.
#[derive(Debug, Clone, Serialize)]
pub struct Published {
    #[serde(flatten)]
    pub snapshot: TwinSnapshot,
    #[serde(skip)]
    pub history: Vec<HistoryRecord>,
}

/// Where a new subscriber starts.
pub enum Start {
    /// Missed events, oldest first.
    Replay(Vec<Event>),
    /// The requested position fell out of the ring.
    Resync(Arc<Published>),
}

struct Inner {
    ring: VecDeque<Event>,
    latest: Arc<Published>,
}

/// Fan-out of the event sequence plus the matching state. Publishing and
/// subscribing hold the same lock so no subscriber sees a gap.
pub struct Hub {
    inner: Mutex<Inner>,
    tx: broadcast::Sender<Event>,
}

impl Hub {
    pub fn new(initial: Published) -> Self {
        let (tx, _) = broadcast::channel(RING_CAPACITY);
        Hub {
            inner: Mutex::new(Inner {
                ring: VecDeque::with_capacity(RING_CAPACITY),
                latest: Arc::new(initial),
            }),
            tx,
        }
    }

    pub fn latest(&self) -> Arc<Published> {
        self.inner.lock().unwrap().latest.clone()
    }

    pub fn publish(&self, events: Vec<Event>, state: Published) {
        let mut inner = self.inner.lock().unwrap();
        for ev in events {
            if inner.ring.len() == RING_CAPACITY {
                inner.ring.pop_front();
            }
            inner.ring.push_back(ev.clone());
            // no receivers is fine
            let _ = self.tx.send(ev);
        }
        inner.latest = Arc::new(state);
    }

    /// Subscribe after `since` (the last seq the caller has seen), or from
    /// now on.
    pub fn subscribe(&self, since: Option<u64>) -> (Start, broadcast::Receiver<Event>) {
        let inner = self.inner.lock().unwrap();
        let rx = self.tx.subscribe();
        let Some(since) = since else {
            return (Start::Replay(Vec::new()), rx);
        };
        let last = inner.latest.snapshot.seq;
        let oldest = inner.ring.front().map_or(last + 1, |e| e.seq);
        if since + 1 < oldest {
            return (Start::Resync(inner.latest.clone()), rx);
        }
        let missed = inner.ring.iter().filter(|e| e.seq > since).cloned().collect();
        (Start::Replay(missed), rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use twinflow_core::bundled;
    use twinflow_core::circuit::{normalize, parse_netlist};
    use twinflow_core::runtime::{EventKind, Twin, TwinConfig};
    use twinflow_core::synthesize;

    fn published(seq: u64) -> Published {
        let g = normalize(parse_netlist(bundled::CIRCUIT1).unwrap()).unwrap();
        let twin = Twin::new(g.clone(), synthesize(&g), TwinConfig::default()).unwrap();
        let mut snapshot = twin.snapshot();
        snapshot.seq = seq;
        Published {
            snapshot,
            history: Vec::new(),
        }
    }

    fn event(seq: u64) -> Event {
        Event {
            seq,
            iteration: seq,
            kind: EventKind::StateChanged,
            payload: serde_json::Value::Null,
        }
    }

    fn seqs(start: Start) -> Vec<u64> {
        match start {
            Start::Replay(evs) => evs.iter().map(|e| e.seq).collect(),
            Start::Resync(_) => panic!("unexpected resync"),
        }
    }

    #[test]
    fn replays_what_was_missed() {
        let hub = Hub::new(published(0));
        hub.publish((1..=5).map(event).collect(), published(5));
        assert_eq!(seqs(hub.subscribe(Some(3)).0), [4, 5]);
        assert_eq!(seqs(hub.subscribe(Some(0)).0), [1, 2, 3, 4, 5]);
        assert!(seqs(hub.subscribe(Some(5)).0).is_empty());
        assert!(seqs(hub.subscribe(None).0).is_empty());
    }

    #[test]
    fn evicted_position_resyncs() {
        let hub = Hub::new(published(0));
        let n = RING_CAPACITY as u64 + 10;
        hub.publish((1..=n).map(event).collect(), published(n));
        match hub.subscribe(Some(3)).0 {
            Start::Resync(p) => assert_eq!(p.snapshot.seq, n),
            Start::Replay(_) => panic!("expected a resync"),
        }
        assert_eq!(seqs(hub.subscribe(Some(10)).0).len(), RING_CAPACITY);
        assert!(matches!(hub.subscribe(Some(9)).0, Start::Resync(_)));
    }

    #[tokio::test]
    async fn live_events_follow_the_replay() {
        let hub = Hub::new(published(0));
        hub.publish(vec![event(1)], published(1));
        let (start, mut rx) = hub.subscribe(Some(0));
        assert_eq!(seqs(start), [1]);
        hub.publish(vec![event(2)], published(2));
        assert_eq!(rx.recv().await.unwrap().seq, 2);
    }
}
