use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard, Weak};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::geometry::NodeId;
use crate::solver::PoseEstimate;
use crate::twr::RangeMeasurement;

pub const DEFAULT_QUEUE_CAPACITY: usize = 1024;
pub const POSE_TOPIC: &str = "poses";
pub const STATUS_TOPIC: &str = "bus/status";

pub fn ranging_topic(tag: NodeId) -> String {
    format!("ranging/tag{tag}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Range(RangeMeasurement),
    Pose(PoseEstimate),
    Status(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Range,
    Pose,
    Status,
}

impl PayloadKind {
    pub fn name(&self) -> &'static str {
        match self {
            PayloadKind::Range => "range",
            PayloadKind::Pose => "pose",
            PayloadKind::Status => "status",
        }
    }
}

impl Message {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Message::Range(_) => PayloadKind::Range,
            Message::Pose(_) => PayloadKind::Pose,
            Message::Status(_) => PayloadKind::Status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topic {
    pub name: String,
    /// Fixed by the first publish (or explicit creation).
    pub kind: Option<PayloadKind>,
}

#[derive(Debug)]
struct Queue {
    items: VecDeque<Arc<Message>>,
    closed: bool,
}

#[derive(Debug)]
struct SubscriberShared {
    queue: Mutex<Queue>,
    ready: Condvar,
    capacity: usize,
    dropped: AtomicU64,
}

impl SubscriberShared {
    fn lock(&self) -> MutexGuard<'_, Queue> {
        self.queue.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Returns true if the oldest message had to be evicted.
    fn deliver(&self, msg: Arc<Message>) -> bool {
        let mut q = self.lock();
        if q.closed {
            return false;
        }
        let evicted = q.items.len() >= self.capacity;
        if evicted {
            q.items.pop_front();
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        q.items.push_back(msg);
        drop(q);
        self.ready.notify_one();
        evicted
    }

    fn close(&self) {
        self.lock().closed = true;
        self.ready.notify_all();
    }
}

#[derive(Debug, Default)]
struct TopicState {
    kind: Option<PayloadKind>,
    subscribers: Vec<Weak<SubscriberShared>>,
    published: u64,
    dropped: u64,
}

#[derive(Debug)]
struct BusInner {
    topics: Mutex<HashMap<String, TopicState>>,
    default_capacity: usize,
}

/// In-process publish/subscribe bus.
///
/// Each subscriber owns a bounded FIFO. When it is full the oldest message
/// is evicted and counted; publishers never block. Subscribers only see
/// messages published after they subscribed.
#[derive(Debug, Clone)]
pub struct Bus {
    inner: Arc<BusInner>,
}

impl Default for Bus {
    fn default() -> Self {
        Bus::new()
    }
}

impl Bus {
    pub fn new() -> Self {
        Bus::with_capacity(DEFAULT_QUEUE_CAPACITY)
    }

    pub fn with_capacity(default_capacity: usize) -> Self {
        Bus {
            inner: Arc::new(BusInner {
                topics: Mutex::new(HashMap::new()),
                default_capacity: default_capacity.max(1),
            }),
        }
    }

    fn topics(&self) -> MutexGuard<'_, HashMap<String, TopicState>> {
        self.inner.topics.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn create_topic(&self, name: &str, kind: PayloadKind) -> Result<()> {
        let mut topics = self.topics();
        let state = topics.entry(name.to_string()).or_default();
        match state.kind {
            Some(k) if k != kind => Err(Error::TopicKind {
                topic: name.to_string(),
                expected: k.name(),
                found: kind.name(),
            }),
            _ => {
                state.kind = Some(kind);
                Ok(())
            }
        }
    }

    pub fn topic_list(&self) -> Vec<Topic> {
        let mut list: Vec<Topic> = self
            .topics()
            .iter()
            .map(|(name, s)| Topic {
                name: name.clone(),
                kind: s.kind,
            })
            .collect();
        list.sort_by(|a, b| a.name.cmp(&b.name));
        list
    }

    /// Delivers `message` to every live subscriber of `topic`, creating the
    /// topic on first use. Returns the number of subscribers reached.
    ///
    /// Fails only if the topic already carries a different payload kind.
    pub fn publish(&self, topic: &str, message: Message) -> Result<usize> {
        let kind = message.kind();
        let msg = Arc::new(message);
        let mut topics = self.topics();
        let state = topics.entry(topic.to_string()).or_default();
        match state.kind {
            Some(k) if k != kind => {
                return Err(Error::TopicKind {
                    topic: topic.to_string(),
                    expected: k.name(),
                    found: kind.name(),
                })
            }
            None => state.kind = Some(kind),
            _ => {}
        }
        state.published += 1;
        let mut reached = 0;
        state.subscribers.retain(|weak| match weak.upgrade() {
            Some(sub) => {
                if sub.deliver(Arc::clone(&msg)) {
                    state.dropped += 1;
                }
                reached += 1;
                true
            }
            None => false,
        });
        Ok(reached)
    }

    pub fn publish_status(&self, text: impl Into<String>) {
        // the status topic only ever carries status payloads
        let _ = self.publish(STATUS_TOPIC, Message::Status(text.into()));
    }

    pub fn subscribe(&self, topic: &str) -> Subscription {
        self.subscribe_with_capacity(topic, self.inner.default_capacity)
    }

    pub fn subscribe_with_capacity(&self, topic: &str, capacity: usize) -> Subscription {
        let shared = Arc::new(SubscriberShared {
            queue: Mutex::new(Queue {
                items: VecDeque::new(),
                closed: false,
            }),
            ready: Condvar::new(),
            capacity: capacity.max(1),
            dropped: AtomicU64::new(0),
        });
        self.topics()
            .entry(topic.to_string())
            .or_default()
            .subscribers
            .push(Arc::downgrade(&shared));
        Subscription {
            topic: topic.to_string(),
            shared,
        }
    }

    /// Messages evicted from any subscriber queue of `topic` so far.
    pub fn dropped(&self, topic: &str) -> u64 {
        self.topics().get(topic).map_or(0, |s| s.dropped)
    }

    pub fn published(&self, topic: &str) -> u64 {
        self.topics().get(topic).map_or(0, |s| s.published)
    }

    /// Closes every subscription; receivers drain what is queued and then
    /// see the end of the stream.
    pub fn close(&self) {
        let topics = self.topics();
        for state in topics.values() {
            for sub in state.subscribers.iter().filter_map(Weak::upgrade) {
                sub.close();
            }
        }
    }
}

#[derive(Debug)]
pub struct Subscription {
    topic: String,
    shared: Arc<SubscriberShared>,
}

impl Subscription {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn try_recv(&self) -> Option<Arc<Message>> {
        self.shared.lock().items.pop_front()
    }

    /// Blocks until a message arrives; `None` once closed and drained.
    pub fn recv(&self) -> Option<Arc<Message>> {
        let mut q = self.shared.lock();
        loop {
            if let Some(m) = q.items.pop_front() {
                return Some(m);
            }
            if q.closed {
                return None;
            }
            q = self.shared.ready.wait(q).unwrap_or_else(|e| e.into_inner());
        }
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<Arc<Message>> {
        let deadline = Instant::now() + timeout;
        let mut q = self.shared.lock();
        loop {
            if let Some(m) = q.items.pop_front() {
                return Some(m);
            }
            let now = Instant::now();
            if q.closed || now >= deadline {
                return None;
            }
            q = self
                .shared
                .ready
                .wait_timeout(q, deadline - now)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }

    pub fn len(&self) -> usize {
        self.shared.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dropped(&self) -> u64 {
        self.shared.dropped.load(Ordering::Relaxed)
    }
}

impl Iterator for Subscription {
    type Item = Arc<Message>;

    fn next(&mut self) -> Option<Self::Item> {
        self.recv()
    }
}
