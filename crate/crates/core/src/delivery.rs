//! Notification outbox, platform adapters and the broadcast queue.
//!
//! Delivery is at-least-once. Every notification and every platform post has
//! an idempotency key, and both the outbox and the adapters return the
//! existing item when a key is replayed, so retries have exactly one visible
//! effect.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{Channel, Contact};
use crate::ids::{NotificationId, QuestionId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformConfig {
    /// Adapter key, e.g. `twitter`.
    pub name: String,
    /// Display name used in sentences, e.g. `Twitter`.
    pub label: String,
    pub char_limit: usize,
}

impl PlatformConfig {
    pub fn new(name: &str, label: &str, char_limit: usize) -> Self {
        Self {
            name: name.to_owned(),
            label: label.to_owned(),
            char_limit,
        }
    }

    pub fn defaults() -> Vec<PlatformConfig> {
        vec![
            PlatformConfig::new("twitter", "Twitter", 280),
            PlatformConfig::new("mastodon", "Mastodon", 500),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DeliveryState {
    Queued,
    Sent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub notif_id: NotificationId,
    pub channel: Channel,
    pub recipient: String,
    pub body: String,
    pub idempotency_key: String,
    pub state: DeliveryState,
    pub queued_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxFilter {
    pub recipient: Option<String>,
    pub channel: Option<Channel>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Outbox {
    items: Vec<Notification>,
    #[serde(skip)]
    by_key: HashMap<String, usize>,
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    fn reindex(&mut self) {
        self.by_key = self
            .items
            .iter()
            .enumerate()
            .map(|(i, n)| (n.idempotency_key.clone(), i))
            .collect();
    }

    /// Queues a message; replaying a key returns the original, unchanged.
    pub fn enqueue(
        &mut self,
        contact: &Contact,
        body: String,
        idempotency_key: String,
        now: DateTime<Utc>,
    ) -> &Notification {
        if self.by_key.len() != self.items.len() {
            self.reindex();
        }
        if let Some(&idx) = self.by_key.get(&idempotency_key) {
            return &self.items[idx];
        }
        let notif = Notification {
            notif_id: NotificationId::new(format!("n{}", self.items.len() + 1)),
            channel: contact.channel(),
            recipient: contact.address().to_owned(),
            body,
            idempotency_key: idempotency_key.clone(),
            state: DeliveryState::Queued,
            queued_at: now,
        };
        self.items.push(notif);
        self.by_key.insert(idempotency_key, self.items.len() - 1);
        self.items.last().expect("just pushed")
    }

    pub fn list(&self, filter: &OutboxFilter) -> Vec<Notification> {
        self.items
            .iter()
            .filter(|n| filter.recipient.as_ref().is_none_or(|r| &n.recipient == r))
            .filter(|n| filter.channel.is_none_or(|c| n.channel == c))
            .cloned()
            .collect()
    }

    pub fn get(&self, id: &NotificationId) -> Option<&Notification> {
        self.items.iter().find(|n| &n.notif_id == id)
    }

    /// Hands queued messages to the (mock) mail and DM transports.
    pub fn deliver_all(&mut self) -> usize {
        let mut sent = 0;
        for n in self.items.iter_mut().filter(|n| n.state == DeliveryState::Queued) {
            n.state = DeliveryState::Sent;
            sent += 1;
        }
        sent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PostOrigin {
    Question,
    Contribution,
    Mention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlatformPost {
    pub platform: String,
    pub post_id: String,
    pub in_reply_to: Option<String>,
    pub body: String,
    pub origin: PostOrigin,
    pub source_id: String,
    pub idempotency_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublishRequest {
    pub body: String,
    pub in_reply_to: Option<String>,
    pub origin: PostOrigin,
    pub source_id: String,
    pub idempotency_key: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdapterError {
    #[error("platform `{0}` is unavailable")]
    AdapterUnavailable(String),
}

/// The surface a platform client must offer. Real clients can replace the
/// mock without touching the identity or question modules.
///
/// Contract: `publish` with an idempotency key already seen returns the
/// original post instead of creating another one.
pub trait PlatformAdapter: Send + Sync {
    fn name(&self) -> &str;
    fn publish(&self, request: &PublishRequest) -> Result<PlatformPost, AdapterError>;
    fn posts(&self) -> Vec<PlatformPost>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FailureMode {
    BeforeCommit,
    AfterCommit,
}

/// In-process stand-in for a social platform account.
#[derive(Debug)]
pub struct MockAdapter {
    name: String,
    posts: Mutex<Vec<PlatformPost>>,
    failures: AtomicUsize,
    mode: Mutex<FailureMode>,
}

impl MockAdapter {
    pub fn new(name: &str) -> Self {
        Self::with_posts(name, Vec::new())
    }

    pub fn with_posts(name: &str, posts: Vec<PlatformPost>) -> Self {
        Self {
            name: name.to_owned(),
            posts: Mutex::new(posts),
            failures: AtomicUsize::new(0),
            mode: Mutex::new(FailureMode::BeforeCommit),
        }
    }

    /// The next `n` publish calls fail without storing anything.
    pub fn fail_next(&self, n: usize) {
        *self.mode.lock() = FailureMode::BeforeCommit;
        self.failures.store(n, Ordering::SeqCst);
    }

    /// The next `n` publish calls store the post but report failure, as if
    /// the acknowledgement were lost.
    pub fn lose_acks(&self, n: usize) {
        *self.mode.lock() = FailureMode::AfterCommit;
        self.failures.store(n, Ordering::SeqCst);
    }

    fn take_failure(&self) -> bool {
        self.failures
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
            .is_ok()
    }
}

impl PlatformAdapter for MockAdapter {
    fn name(&self) -> &str {
        &self.name
    }

    fn publish(&self, request: &PublishRequest) -> Result<PlatformPost, AdapterError> {
        let failing = self.take_failure();
        let mode = *self.mode.lock();
        if failing && mode == FailureMode::BeforeCommit {
            return Err(AdapterError::AdapterUnavailable(self.name.clone()));
        }
        let mut posts = self.posts.lock();
        let post = match posts
            .iter()
            .find(|p| p.idempotency_key == request.idempotency_key)
        {
            Some(existing) => existing.clone(),
            None => {
                let post = PlatformPost {
                    platform: self.name.clone(),
                    post_id: format!("{}-{}", self.name, posts.len() + 1),
                    in_reply_to: request.in_reply_to.clone(),
                    body: request.body.clone(),
                    origin: request.origin,
                    source_id: request.source_id.clone(),
                    idempotency_key: request.idempotency_key.clone(),
                };
                posts.push(post.clone());
                post
            }
        };
        if failing {
            return Err(AdapterError::AdapterUnavailable(self.name.clone()));
        }
        Ok(post)
    }

    fn posts(&self) -> Vec<PlatformPost> {
        self.posts.lock().clone()
    }
}

/// Where the first post of a job attaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Anchor {
    /// Starts a new conversation.
    Root,
    /// Replies to the latest post of the conversation.
    ConversationTail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastJob {
    pub job_id: String,
    pub platform: String,
    pub conversation: QuestionId,
    pub origin: PostOrigin,
    pub source_id: String,
    pub bodies: Vec<String>,
    pub anchor: Anchor,
    /// Posts already acknowledged by the adapter.
    pub published: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FlushReport {
    pub published: usize,
    pub pending_jobs: usize,
    pub failed_platforms: Vec<String>,
}

/// FIFO broadcast queues, one per platform, drained by a single consumer.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Dispatcher {
    queues: BTreeMap<String, VecDeque<BroadcastJob>>,
    /// Latest post id of each conversation, per platform.
    tails: BTreeMap<String, BTreeMap<QuestionId, String>>,
    next_job: u64,
}

impl Dispatcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn enqueue(
        &mut self,
        platform: &str,
        conversation: &QuestionId,
        origin: PostOrigin,
        source_id: &str,
        bodies: Vec<String>,
        anchor: Anchor,
    ) -> String {
        self.next_job += 1;
        let job_id = format!("job{}", self.next_job);
        self.queues
            .entry(platform.to_owned())
            .or_default()
            .push_back(BroadcastJob {
                job_id: job_id.clone(),
                platform: platform.to_owned(),
                conversation: conversation.clone(),
                origin,
                source_id: source_id.to_owned(),
                bodies,
                anchor,
                published: Vec::new(),
            });
        job_id
    }

    pub fn pending_jobs(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn conversation_tail(&self, platform: &str, conversation: &QuestionId) -> Option<&str> {
        self.tails
            .get(platform)
            .and_then(|m| m.get(conversation))
            .map(String::as_str)
    }

    /// Publishes queued jobs in order. A failing platform keeps its remaining
    /// jobs queued for the next flush; other platforms proceed.
    pub fn flush(&mut self, adapters: &[Arc<dyn PlatformAdapter>]) -> FlushReport {
        let mut report = FlushReport::default();
        for (platform, queue) in self.queues.iter_mut() {
            let Some(adapter) = adapters.iter().find(|a| a.name() == platform) else {
                report.failed_platforms.push(platform.clone());
                continue;
            };
            let tails = self.tails.entry(platform.clone()).or_default();
            'jobs: while let Some(job) = queue.front_mut() {
                while job.published.len() < job.bodies.len() {
                    let index = job.published.len();
                    let in_reply_to = match job.published.last() {
                        Some(prev) => Some(prev.clone()),
                        None => match job.anchor {
                            Anchor::Root => None,
                            Anchor::ConversationTail => tails.get(&job.conversation).cloned(),
                        },
                    };
                    let request = PublishRequest {
                        body: job.bodies[index].clone(),
                        in_reply_to,
                        origin: job.origin,
                        source_id: job.source_id.clone(),
                        idempotency_key: format!("{}/{}", job.job_id, index),
                    };
                    match adapter.publish(&request) {
                        Ok(post) => {
                            tails.insert(job.conversation.clone(), post.post_id.clone());
                            job.published.push(post.post_id);
                            report.published += 1;
                        }
                        Err(_) => {
                            report.failed_platforms.push(platform.clone());
                            break 'jobs;
                        }
                    }
                }
                queue.pop_front();
            }
        }
        report.pending_jobs = self.pending_jobs();
        report
    }
}
