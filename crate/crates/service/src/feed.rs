//! Per-run record feed with a bounded replay window.
//!
//! The run loop pushes without ever waiting on subscribers. Each subscriber
//! keeps its own cursor; one that falls behind the window skips ahead to
//! the oldest record still held.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use tokio::sync::watch;
use vecorch::harness::SlotRecord;

use crate::run::TerminalRecord;

#[derive(Debug, Clone)]
pub enum FeedItem {
    Slot(Arc<SlotRecord>),
    End(Arc<TerminalRecord>),
}

struct Inner {
    /// `(sequence number, record)`, oldest first.
    records: VecDeque<(u64, Arc<SlotRecord>)>,
    next_seq: u64,
    window: usize,
    end: Option<Arc<TerminalRecord>>,
}

pub struct Feed {
    inner: Mutex<Inner>,
    seq: watch::Sender<u64>,
}

impl Feed {
    pub fn new(window: usize) -> Arc<Self> {
        Arc::new(Feed {
            inner: Mutex::new(Inner {
                records: VecDeque::new(),
                next_seq: 0,
                window: window.max(1),
                end: None,
            }),
            seq: watch::Sender::new(0),
        })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn push(&self, record: SlotRecord) {
        let next = {
            let mut g = self.lock();
            let seq = g.next_seq;
            g.records.push_back((seq, Arc::new(record)));
            g.next_seq += 1;
            while g.records.len() > g.window {
                g.records.pop_front();
            }
            g.next_seq
        };
        self.seq.send_replace(next);
    }

    /// Publishes the terminal record; nothing may be pushed afterwards.
    pub fn finish(&self, end: TerminalRecord) {
        let next = {
            let mut g = self.lock();
            g.end = Some(Arc::new(end));
            g.next_seq + 1
        };
        self.seq.send_replace(next);
    }

    pub fn is_finished(&self) -> bool {
        self.lock().end.is_some()
    }

    /// Subscribes with at most `replay` already-published records (capped
    /// by the window).
    pub fn subscribe(self: &Arc<Self>, replay: Option<usize>) -> Subscription {
        let g = self.lock();
        let held = g.records.len();
        let replay = replay.unwrap_or(held).min(held) as u64;
        Subscription {
            feed: Arc::clone(self),
            cursor: g.next_seq - replay,
            ended: false,
            rx: self.seq.subscribe(),
        }
    }
}

pub struct Subscription {
    feed: Arc<Feed>,
    cursor: u64,
    ended: bool,
    rx: watch::Receiver<u64>,
}

impl Subscription {
    /// Next record in slot order, then the terminal record, then `None`.
    pub async fn next(&mut self) -> Option<FeedItem> {
        if self.ended {
            return None;
        }
        loop {
            self.rx.borrow_and_update();
            {
                let g = self.feed.lock();
                let first = g.records.front().map_or(g.next_seq, |r| r.0);
                self.cursor = self.cursor.max(first);
                if self.cursor < g.next_seq {
                    let rec = Arc::clone(&g.records[(self.cursor - first) as usize].1);
                    self.cursor += 1;
                    return Some(FeedItem::Slot(rec));
                }
                if let Some(end) = &g.end {
                    self.ended = true;
                    return Some(FeedItem::End(Arc::clone(end)));
                }
            }
            if self.rx.changed().await.is_err() {
                return None;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::run::RunStatus;
    use vecorch::semantics::CommandClass;

    fn rec(slot: u64) -> SlotRecord {
        SlotRecord {
            seed: 0,
            slot,
            world_slot: slot,
            policy: "sp".into(),
            vehicles: 0,
            completed: 0,
            latency_sum_ms: 0.0,
            mean_latency_ms: 0.0,
            max_latency_ms: 0.0,
            violations: 0,
            energy_j: 0.0,
            transmit_j: 0.0,
            local_j: 0.0,
            server_j: 0.0,
            arrived_bytes: vec![],
            served_bytes: vec![],
            dropped_bytes: vec![],
            backlog_bytes: vec![],
            offloaded_pairs: 0,
            alloc_sum: 0.0,
            beta_e: 1.0,
            beta_q: 1.0,
            command_class: CommandClass::Balanced,
            fallback: false,
            stale: false,
            command: None,
        }
    }

    fn end() -> TerminalRecord {
        TerminalRecord {
            run_id: 1,
            status: RunStatus::Finished,
            slots: 0,
            report: None,
            error: None,
        }
    }

    async fn drain(sub: &mut Subscription) -> (Vec<u64>, bool) {
        let mut slots = Vec::new();
        while let Some(item) = sub.next().await {
            match item {
                FeedItem::Slot(r) => slots.push(r.slot),
                FeedItem::End(_) => return (slots, true),
            }
        }
        (slots, false)
    }

    #[tokio::test]
    async fn late_subscriber_gets_the_window() {
        let feed = Feed::new(50);
        for t in 1..=100 {
            feed.push(rec(t));
        }
        feed.finish(end());
        let (slots, ended) = drain(&mut feed.subscribe(None)).await;
        assert_eq!(slots, (51..=100).collect::<Vec<_>>());
        assert!(ended);
        let (slots, _) = drain(&mut feed.subscribe(Some(5))).await;
        assert_eq!(slots, (96..=100).collect::<Vec<_>>());
    }

    #[tokio::test]
    async fn slow_subscriber_skips_to_the_window() {
        let feed = Feed::new(3);
        let mut sub = feed.subscribe(None);
        feed.push(rec(1));
        assert!(matches!(sub.next().await, Some(FeedItem::Slot(r)) if r.slot == 1));
        for t in 2..=10 {
            feed.push(rec(t));
        }
        feed.finish(end());
        assert_eq!(drain(&mut sub).await, (vec![8, 9, 10], true));
        assert!(sub.next().await.is_none());
    }

    #[tokio::test]
    async fn live_records_arrive_in_order() {
        // window large enough that a slow reader never skips
        let feed = Feed::new(1000);
        let mut sub = feed.subscribe(None);
        let f = Arc::clone(&feed);
        let producer = std::thread::spawn(move || {
            for t in 1..=500 {
                f.push(rec(t));
            }
            f.finish(end());
        });
        let (slots, ended) = drain(&mut sub).await;
        producer.join().unwrap();
        assert!(ended);
        assert!(slots.windows(2).all(|w| w[1] == w[0] + 1), "gap or reorder");
        assert_eq!(*slots.last().unwrap(), 500);
    }
}
