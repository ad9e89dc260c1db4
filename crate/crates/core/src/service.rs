//! The operation surface shared by the HTTP gateway and the CLI.
//!
//! Every mutating operation runs under one state lock, which makes each one a
//! single linearizable step. Broadcast jobs are flushed to the platform
//! adapters before the lock is released (when `auto_flush` is on); a failing
//! adapter keeps its jobs queued for the next flush.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use chrono::Datelike;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;
use crate::contact::Contact;
use crate::corpus::{CorpusError, CorpusHandle, CorpusSnapshot, CorpusSummary};
use crate::delivery::{
    Anchor, Dispatcher, FlushReport, MockAdapter, Notification, Outbox, OutboxFilter, PlatformAdapter,
    PlatformConfig, PlatformPost, PostOrigin,
};
use crate::identity::{
    parse_author_ref, ClaimState, Endorsement, IdentityError, JournalEvent, Registration, Registry, UserAccount,
};
use crate::ids::{AuthorId, ContributionId, EndorsementId, QuestionId, UserId};
use crate::meronym::{audit, AuditReport, Meronym, MeronymError, SeniorityLookup};
use crate::qa::quota::LedgerCounts;
use crate::qa::{
    endorsement_request_message, expert_invite_message, helper_invite_message, name_similarity,
    pending_contribution_message, render_thread, verification_message, Board, Contribution, ExpertInvite,
    ExpertRequest, HelperInvite, HelperRequest, Moderation, PostThread, PosterIntro, QaError, QuestionRequest,
    QuestionStatus, QuotaLedger, QuotaLimits, MAX_INVITEES_PER_CATEGORY,
};
use crate::signals::{
    derive_endorser_signals, derive_relational_signals, derive_self_signals, suggest_seniority, EndorserGrant,
    IdentitySignal, Persona, RelationshipCategory, Seniority, SignalError, SignalKind, Subject,
};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Qa(#[from] QaError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Meronym(#[from] MeronymError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("unknown platform `{0}`")]
    UnknownPlatform(String),
    #[error("unknown post `{0}`")]
    UnknownPost(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Identity(e) => e.code(),
            ServiceError::Qa(e) => e.code(),
            ServiceError::Signal(e) => e.code(),
            ServiceError::Meronym(e) => e.code(),
            ServiceError::Corpus(e) => e.code(),
            ServiceError::UnknownPlatform(_) => "UnknownPlatform",
            ServiceError::UnknownPost(_) => "UnknownPost",
        }
    }
}

impl From<crate::qa::QuotaError> for ServiceError {
    fn from(e: crate::qa::QuotaError) -> Self {
        ServiceError::Qa(e.into())
    }
}

impl From<crate::qa::ThreadError> for ServiceError {
    fn from(e: crate::qa::ThreadError) -> Self {
        ServiceError::Qa(e.into())
    }
}

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub k_threshold: usize,
    pub quota: QuotaLimits,
    /// Platform named in follow-relation sentences.
    pub follow_platform_label: String,
    pub platforms: Vec<PlatformConfig>,
    pub auto_flush: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            k_threshold: crate::meronym::DEFAULT_K_THRESHOLD,
            quota: QuotaLimits::default(),
            follow_platform_label: "Twitter".to_owned(),
            platforms: PlatformConfig::defaults(),
            auto_flush: true,
        }
    }
}

/// Everything needed to resume a service after restart.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PersistedState {
    pub registry: Registry,
    pub board: Board,
    pub outbox: Outbox,
    pub dispatcher: Dispatcher,
    pub quotas: LedgerCounts,
    pub platform_posts: BTreeMap<String, Vec<PlatformPost>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewQuestion {
    pub text: String,
    #[serde(default)]
    pub meronym: Vec<IdentitySignal>,
    #[serde(default)]
    pub experts: Vec<ExpertRequest>,
    #[serde(default)]
    pub helpers: Vec<HelperRequest>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionPreview {
    pub meronym: Meronym,
    pub audit: AuditReport,
    pub threads: BTreeMap<String, PostThread>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuestionSummary {
    #[serde(flatten)]
    pub question: QuestionRequest,
    pub pending_contributions: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PublicAnswer {
    pub contribution_id: ContributionId,
    pub posts: BTreeMap<String, Vec<String>>,
}

/// A question as anyone may see it: only what was broadcast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PublicQuestion {
    pub question_id: QuestionId,
    pub created: chrono::DateTime<chrono::Utc>,
    pub posts: BTreeMap<String, Vec<String>>,
    pub answers: Vec<PublicAnswer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PostTrace {
    pub platform: String,
    pub post_id: String,
    pub origin: PostOrigin,
    pub source_id: String,
    pub author: UserId,
    pub endorsement_id: Option<EndorsementId>,
    pub endorser: Option<UserId>,
    pub endorser_author_id: Option<AuthorId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Health {
    pub status: &'static str,
    pub authors: usize,
    pub publications: usize,
    pub follows: usize,
    pub pending_broadcasts: usize,
}

#[derive(Debug, Default)]
struct State {
    registry: Registry,
    board: Board,
    outbox: Outbox,
    dispatcher: Dispatcher,
    journal: Vec<JournalEvent>,
}

pub struct Service {
    config: ServiceConfig,
    corpus: CorpusHandle,
    clock: Arc<dyn Clock>,
    quotas: QuotaLedger,
    mocks: Vec<Arc<MockAdapter>>,
    adapters: Vec<Arc<dyn PlatformAdapter>>,
    state: Mutex<State>,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").field("config", &self.config).finish_non_exhaustive()
    }
}

fn poster_contact(account: &UserAccount) -> Contact {
    match &account.contact_email {
        Some(email) => Contact::Email(email.clone()),
        None => Contact::Handle(account.handle.clone()),
    }
}

fn intro(account: &UserAccount) -> PosterIntro<'_> {
    PosterIntro {
        full_name: &account.full_name,
        handle: &account.handle,
    }
}

/// Validated expert invite before ids and notifications are assigned.
struct ExpertDraft {
    author: AuthorId,
    expert_name: String,
    contact: Contact,
    private_signals: Vec<IdentitySignal>,
    reveal_name: bool,
    mention_handle: Option<String>,
}

impl Service {
    pub fn new(config: ServiceConfig, snapshot: CorpusSnapshot, clock: Arc<dyn Clock>) -> Self {
        Self::restore(config, snapshot, clock, PersistedState::default())
    }

    pub fn restore(
        config: ServiceConfig,
        snapshot: CorpusSnapshot,
        clock: Arc<dyn Clock>,
        persisted: PersistedState,
    ) -> Self {
        let PersistedState {
            registry,
            board,
            outbox,
            dispatcher,
            quotas,
            mut platform_posts,
        } = persisted;
        let mocks: Vec<Arc<MockAdapter>> = config
            .platforms
            .iter()
            .map(|p| Arc::new(MockAdapter::with_posts(&p.name, platform_posts.remove(&p.name).unwrap_or_default())))
            .collect();
        let adapters = mocks.iter().map(|m| m.clone() as Arc<dyn PlatformAdapter>).collect();
        Self {
            quotas: QuotaLedger::with_counts(config.quota, quotas),
            config,
            corpus: CorpusHandle::new(snapshot),
            clock,
            mocks,
            adapters,
            state: Mutex::new(State {
                registry,
                board,
                outbox,
                dispatcher,
                journal: Vec::new(),
            }),
        }
    }

    pub fn export_state(&self) -> PersistedState {
        let st = self.state.lock();
        PersistedState {
            registry: st.registry.clone(),
            board: st.board.clone(),
            outbox: st.outbox.clone(),
            dispatcher: st.dispatcher.clone(),
            quotas: self.quotas.snapshot(),
            platform_posts: self.mocks.iter().map(|m| (m.name().to_owned(), m.posts())).collect(),
        }
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn corpus(&self) -> Arc<CorpusSnapshot> {
        self.corpus.current()
    }

    /// Swaps in a new corpus. Operations already holding the old snapshot
    /// finish against it.
    pub fn reload_corpus(&self, snapshot: CorpusSnapshot) -> CorpusSummary {
        let summary = snapshot.summary();
        self.corpus.replace(snapshot);
        summary
    }

    pub fn mock_adapter(&self, platform: &str) -> Option<Arc<MockAdapter>> {
        self.mocks.iter().find(|m| m.name() == platform).cloned()
    }

    fn mutate<R>(&self, f: impl FnOnce(&mut State) -> Result<R>) -> Result<R> {
        let mut st = self.state.lock();
        let out = f(&mut st);
        let events = st.registry.drain_journal();
        st.journal.extend(events);
        if self.config.auto_flush {
            st.dispatcher.flush(&self.adapters);
        }
        out
    }

    /// Journal entries recorded since the last drain, oldest first.
    pub fn drain_journal(&self) -> Vec<JournalEvent> {
        std::mem::take(&mut self.state.lock().journal)
    }

    fn log(st: &mut State, at: chrono::DateTime<chrono::Utc>, entity: &str, event: &str, actor: &UserId) {
        st.journal.push(JournalEvent {
            at,
            entity: entity.to_owned(),
            event: event.to_owned(),
            actor: Some(actor.clone()),
            detail: None,
        });
    }

    // ---- identity ----

    pub fn register(
        &self,
        full_name: &str,
        handle: &str,
        contact_email: Option<&str>,
        seniority: Seniority,
    ) -> Result<Registration> {
        let now = self.clock.now();
        self.mutate(|st| {
            let reg = st.registry.register(full_name, handle, contact_email, seniority, now)?;
            let handle = Contact::Handle(reg.account.handle.clone());
            st.outbox.enqueue(
                &handle,
                verification_message(&reg.account.handle, &reg.verification_token),
                format!("account/{}/verify", reg.account.user_id),
                now,
            );
            Ok(reg)
        })
    }

    pub fn verify(&self, user: &UserId, token: &str) -> Result<UserAccount> {
        let now = self.clock.now();
        self.mutate(|st| Ok(st.registry.verify_handle(user, token, now)?.clone()))
    }

    pub fn account(&self, user: &UserId) -> Result<UserAccount> {
        Ok(self.state.lock().registry.account(user)?.clone())
    }

    pub fn accounts(&self) -> Vec<UserAccount> {
        self.state.lock().registry.accounts().cloned().collect()
    }

    pub fn user_for_session(&self, token: &str) -> Option<UserId> {
        self.state.lock().registry.user_for_session(token).cloned()
    }

    pub fn claim(&self, user: &UserId, author_ref: &str) -> Result<ClaimState> {
        let snapshot = self.corpus();
        let author = parse_author_ref(author_ref);
        let exists = snapshot.author(&author).is_ok();
        let now = self.clock.now();
        self.mutate(|st| Ok(st.registry.claim_profile(user, &author, exists, now)?))
    }

    /// Admin only.
    pub fn approve_claim(&self, user: &UserId) -> Result<UserAccount> {
        let now = self.clock.now();
        self.mutate(|st| Ok(st.registry.approve_claim(user, now)?.clone()))
    }

    /// Signals the referenced author would make available, shown to them in
    /// the request. Relationship-dependent sentences are left out since the
    /// endorser picks the relationship when responding.
    fn endorsement_preview_lines(&self, st: &State, snapshot: &CorpusSnapshot, author: &AuthorId) -> Vec<String> {
        let Ok(record) = snapshot.author(author) else {
            return Vec::new();
        };
        let persona = match st.registry.account_for_author(author) {
            Some(account) => account.persona(),
            None => Persona {
                full_name: record.full_name.clone(),
                handle: record.handle.clone().unwrap_or_default(),
                seniority: snapshot
                    .author_metrics(author)
                    .map(|m| suggest_seniority(m, self.clock.now().year()))
                    .unwrap_or(Seniority::Junior),
                author_id: Some(author.clone()),
            },
        };
        let grant = EndorserGrant {
            endorser: persona,
            relationship: RelationshipCategory::FellowResearcher,
            name_reveal_allowed: false,
            endorsee_author_id: None,
            endorsee_name: String::new(),
        };
        derive_endorser_signals(snapshot, Some(&grant))
            .unwrap_or_default()
            .iter()
            .filter(|s| {
                !matches!(
                    s.kind(),
                    SignalKind::Relationship | SignalKind::Name | SignalKind::Coauthorship
                )
            })
            .map(IdentitySignal::render)
            .collect()
    }

    pub fn request_endorsement(&self, endorsee: &UserId, profile_ref: &str, contact: &str) -> Result<Endorsement> {
        let snapshot = self.corpus();
        let author = parse_author_ref(profile_ref);
        let exists = snapshot.author(&author).is_ok();
        let now = self.clock.now();
        self.mutate(|st| {
            let endorsement = st
                .registry
                .request_endorsement(endorsee, &author, exists, contact, now)?
                .clone();
            let preview = self.endorsement_preview_lines(st, &snapshot, &author);
            let account = st.registry.account(endorsee)?.clone();
            st.outbox.enqueue(
                &endorsement.endorser_contact,
                endorsement_request_message(intro(&account), &endorsement.endorsement_id, &preview),
                format!("endorsement/{}/request", endorsement.endorsement_id),
                now,
            );
            Ok(endorsement)
        })
    }

    pub fn respond_endorsement(
        &self,
        responder: &UserId,
        id: &EndorsementId,
        accept: bool,
        relationship: Option<RelationshipCategory>,
        name_reveal_allowed: bool,
    ) -> Result<Endorsement> {
        let now = self.clock.now();
        self.mutate(|st| {
            let endorsement = st
                .registry
                .respond_endorsement(responder, id, accept, relationship, name_reveal_allowed, now)?
                .clone();
            let endorsee = st.registry.account(&endorsement.endorsee)?.clone();
            let outcome = if accept { "accepted" } else { "declined" };
            st.outbox.enqueue(
                &poster_contact(&endorsee),
                format!("Your endorsement request {id} was {outcome}."),
                format!("endorsement/{id}/response"),
                now,
            );
            Ok(endorsement)
        })
    }

    pub fn revoke_endorsement(&self, actor: &UserId, id: &EndorsementId) -> Result<Endorsement> {
        let now = self.clock.now();
        self.mutate(|st| Ok(st.registry.revoke_endorsement(actor, id, now)?.clone()))
    }

    /// The example lines shown to the endorser of `id`.
    pub fn endorsement_preview(&self, id: &EndorsementId) -> Result<Vec<String>> {
        let snapshot = self.corpus();
        let st = self.state.lock();
        let author = st.registry.endorsement(id)?.endorser_author_id.clone();
        Ok(self.endorsement_preview_lines(&st, &snapshot, &author))
    }

    pub fn endorsement(&self, id: &EndorsementId) -> Result<Endorsement> {
        Ok(self.state.lock().registry.endorsement(id)?.clone())
    }

    pub fn endorsements(&self) -> Vec<Endorsement> {
        self.state.lock().registry.endorsements().cloned().collect()
    }

    pub fn is_enabled(&self, user: &UserId) -> Result<bool> {
        Ok(self.state.lock().registry.is_enabled(user)?)
    }

    // ---- signals and meronyms ----

    pub fn self_signals(&self, user: &UserId) -> Result<Vec<IdentitySignal>> {
        let snapshot = self.corpus();
        let persona = self.state.lock().registry.account(user)?.persona();
        Ok(derive_self_signals(&snapshot, &persona)?)
    }

    pub fn endorser_signals(&self, user: &UserId) -> Result<Vec<IdentitySignal>> {
        let snapshot = self.corpus();
        let st = self.state.lock();
        st.registry.account(user)?;
        Ok(derive_endorser_signals(&snapshot, st.registry.active_grant(user).as_ref())?)
    }

    pub fn relational_signals(&self, user: &UserId, expert_ref: &str) -> Result<Vec<IdentitySignal>> {
        let snapshot = self.corpus();
        let st = self.state.lock();
        let persona = st.registry.account(user)?.persona();
        let grant = st.registry.active_grant(user);
        let expert = parse_author_ref(expert_ref);
        Ok(derive_relational_signals(
            &snapshot,
            &persona,
            grant.as_ref(),
            &expert,
            &self.config.follow_platform_label,
        )?)
    }

    /// Signals the user may place in a public meronym.
    fn public_signals(&self, registry: &Registry, snapshot: &CorpusSnapshot, user: &UserId) -> Result<Vec<IdentitySignal>> {
        let account = registry.account(user)?;
        let mut out = derive_self_signals(snapshot, &account.persona())?;
        if let Some(grant) = registry.active_grant(user) {
            out.extend(derive_endorser_signals(snapshot, Some(&grant))?);
        }
        Ok(out)
    }

    fn seniority_lookup(&self, registry: &Registry) -> SeniorityLookup {
        SeniorityLookup {
            declared: registry.declared_seniority(),
            reference_year: self.clock.now().year(),
        }
    }

    fn compose_for(&self, registry: &Registry, snapshot: &CorpusSnapshot, user: &UserId, selected: &[IdentitySignal]) -> Result<Meronym> {
        let available = self.public_signals(registry, snapshot, user)?;
        let mut meronym = Meronym::compose(selected, &available)?;
        let report = audit(snapshot, &self.seniority_lookup(registry), &meronym, self.config.k_threshold);
        meronym.set_anonymity_k(report.k);
        Ok(meronym)
    }

    pub fn compose(&self, user: &UserId, selected: &[IdentitySignal]) -> Result<Meronym> {
        let snapshot = self.corpus();
        let st = self.state.lock();
        self.compose_for(&st.registry, &snapshot, user, selected)
    }

    /// Audit of a meronym the user could post.
    pub fn audit(&self, user: &UserId, selected: &[IdentitySignal]) -> Result<AuditReport> {
        let snapshot = self.corpus();
        let st = self.state.lock();
        let meronym = self.compose_for(&st.registry, &snapshot, user, selected)?;
        Ok(audit(&snapshot, &self.seniority_lookup(&st.registry), &meronym, self.config.k_threshold))
    }

    /// What a question would look like if posted now, without posting it.
    pub fn preview_question(&self, user: &UserId, text: &str, selected: &[IdentitySignal], mentions: &[String]) -> Result<QuestionPreview> {
        let snapshot = self.corpus();
        let st = self.state.lock();
        let meronym = self.compose_for(&st.registry, &snapshot, user, selected)?;
        let audit = audit(&snapshot, &self.seniority_lookup(&st.registry), &meronym, self.config.k_threshold);
        let threads = self.render_threads(text, meronym.rendered_lines(), mentions)?;
        Ok(QuestionPreview { meronym, audit, threads })
    }

    /// Audit of an arbitrary signal list, without ownership checks.
    pub fn audit_raw(&self, signals: &[IdentitySignal]) -> Result<AuditReport> {
        let snapshot = self.corpus();
        let st = self.state.lock();
        Ok(crate::meronym::audit_signals(
            &snapshot,
            &self.seniority_lookup(&st.registry),
            signals,
            self.config.k_threshold,
        )?)
    }

    // ---- questions ----

    fn require_enabled(registry: &Registry, user: &UserId) -> Result<()> {
        if registry.is_enabled(user)? {
            Ok(())
        } else {
            Err(QaError::NotEnabled(user.clone()).into())
        }
    }

    fn render_threads(
        &self,
        text: &str,
        lines: &[String],
        mentions: &[String],
    ) -> Result<BTreeMap<String, PostThread>> {
        let mut out = BTreeMap::new();
        for platform in &self.config.platforms {
            let thread = render_thread(text, lines, &platform.name, platform.char_limit, mentions)?;
            out.insert(platform.name.clone(), thread);
        }
        Ok(out)
    }

    fn draft_experts(
        &self,
        registry: &Registry,
        snapshot: &CorpusSnapshot,
        poster: &UserId,
        meronym: &Meronym,
        requests: &[ExpertRequest],
    ) -> Result<Vec<ExpertDraft>> {
        let account = registry.account(poster)?;
        let persona = account.persona();
        let grant = registry.active_grant(poster);
        let public = self.public_signals(registry, snapshot, poster)?;
        let mut drafts = Vec::new();
        for request in requests {
            let author = parse_author_ref(&request.profile);
            let record = snapshot.author(&author)?;
            let contact = Contact::parse(&request.contact)
                .ok_or_else(|| QaError::InvalidContact(request.contact.clone()))?;
            let relational = derive_relational_signals(
                snapshot,
                &persona,
                grant.as_ref(),
                &author,
                &self.config.follow_platform_label,
            )?;
            let mut private = BTreeSet::new();
            for signal in &request.private_signals {
                if !public.contains(signal) && !relational.contains(signal) {
                    return Err(MeronymError::UnownedSignal(signal.render()).into());
                }
                if !meronym.signals().contains(signal) {
                    private.insert(signal.clone());
                }
            }
            let reveal_name = request.reveal_name
                || private
                    .iter()
                    .any(|s| s.subject == Subject::Poster && s.kind() == SignalKind::Name);
            let mention_handle = if request.mention_publicly {
                let handle = contact
                    .as_handle()
                    .map(str::to_owned)
                    .or_else(|| record.handle.as_deref().map(crate::contact::normalize_handle))
                    .ok_or_else(|| QaError::NoHandleToMention(author.clone()))?;
                Some(handle)
            } else {
                None
            };
            drafts.push(ExpertDraft {
                author,
                expert_name: record.full_name.clone(),
                contact,
                private_signals: private.into_iter().collect(),
                reveal_name,
                mention_handle,
            });
        }
        Ok(drafts)
    }

    fn check_contacts<'a>(
        existing: impl Iterator<Item = &'a Contact>,
        new: impl Iterator<Item = &'a Contact>,
    ) -> Result<()> {
        let mut seen: BTreeSet<&str> = existing.map(Contact::address).collect();
        for contact in new {
            if !seen.insert(contact.address()) {
                return Err(QaError::DuplicateContact(contact.address().to_owned()).into());
            }
        }
        Ok(())
    }

    fn parse_helpers(requests: &[HelperRequest]) -> Result<Vec<Contact>> {
        requests
            .iter()
            .map(|h| Contact::parse(&h.contact).ok_or_else(|| QaError::InvalidContact(h.contact.clone()).into()))
            .collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn issue_expert_invites(
        st: &mut State,
        poster: &UserAccount,
        question_id: &QuestionId,
        text: &str,
        public_lines: &[String],
        drafts: Vec<ExpertDraft>,
        now: chrono::DateTime<chrono::Utc>,
    ) -> Vec<ExpertInvite> {
        drafts
            .into_iter()
            .map(|d| {
                let invite_id = st.board.next_invite_id();
                let private_lines: Vec<String> = d.private_signals.iter().map(IdentitySignal::render).collect();
                let message = expert_invite_message(
                    &d.expert_name,
                    d.reveal_name.then(|| intro(poster)),
                    question_id,
                    text,
                    public_lines,
                    &private_lines,
                );
                let notif = st.outbox.enqueue(
                    &d.contact,
                    message.clone(),
                    format!("question/{question_id}/invite/{invite_id}"),
                    now,
                );
                ExpertInvite {
                    invite_id,
                    expert_author_id: d.author,
                    name_check: name_similarity(&d.expert_name, d.contact.address()),
                    contact: d.contact,
                    private_signals: d.private_signals,
                    reveal_name: d.reveal_name,
                    mention_publicly: d.mention_handle.is_some(),
                    message,
                    notif_id: notif.notif_id.clone(),
                    delivery: notif.state,
                }
            })
            .collect()
    }

    fn issue_helper_invites(
        st: &mut State,
        poster: &UserAccount,
        question_id: &QuestionId,
        text: &str,
        contacts: Vec<Contact>,
        now: chrono::DateTime<chrono::Utc>,
    ) -> Vec<HelperInvite> {
        contacts
            .into_iter()
            .map(|contact| {
                let invite_id = st.board.next_invite_id();
                let message = helper_invite_message(intro(poster), question_id, text);
                let notif = st.outbox.enqueue(
                    &contact,
                    message.clone(),
                    format!("question/{question_id}/invite/{invite_id}"),
                    now,
                );
                HelperInvite {
                    invite_id,
                    contact,
                    message,
                    notif_id: notif.notif_id.clone(),
                    delivery: notif.state,
                }
            })
            .collect()
    }

    /// Queues each platform's thread: body and identity posts as one job,
    /// mention posts as a second job replying to the tail.
    fn queue_question_threads(st: &mut State, question_id: &QuestionId, threads: &BTreeMap<String, PostThread>) {
        for (platform, thread) in threads {
            let (mentions, main): (Vec<_>, Vec<_>) = thread
                .posts
                .iter()
                .partition(|p| p.section == crate::qa::thread::Section::Mention);
            st.dispatcher.enqueue(
                platform,
                question_id,
                PostOrigin::Question,
                question_id.as_str(),
                main.into_iter().map(|p| p.text.clone()).collect(),
                Anchor::Root,
            );
            if !mentions.is_empty() {
                st.dispatcher.enqueue(
                    platform,
                    question_id,
                    PostOrigin::Mention,
                    question_id.as_str(),
                    mentions.into_iter().map(|p| p.text.clone()).collect(),
                    Anchor::ConversationTail,
                );
            }
        }
    }

    pub fn create_question(&self, poster: &UserId, request: &NewQuestion) -> Result<QuestionRequest> {
        let snapshot = self.corpus();
        let now = self.clock.now();
        self.mutate(|st| {
            Self::require_enabled(&st.registry, poster)?;
            if request.experts.len() > MAX_INVITEES_PER_CATEGORY {
                return Err(QaError::TooManyExperts { limit: MAX_INVITEES_PER_CATEGORY }.into());
            }
            if request.helpers.len() > MAX_INVITEES_PER_CATEGORY {
                return Err(QaError::TooManyHelpers { limit: MAX_INVITEES_PER_CATEGORY }.into());
            }
            let meronym = self.compose_for(&st.registry, &snapshot, poster, &request.meronym)?;
            let drafts = self.draft_experts(&st.registry, &snapshot, poster, &meronym, &request.experts)?;
            let helpers = Self::parse_helpers(&request.helpers)?;
            Self::check_contacts(std::iter::empty(), drafts.iter().map(|d| &d.contact))?;
            Self::check_contacts(std::iter::empty(), helpers.iter())?;
            let mentions: Vec<String> = drafts.iter().filter_map(|d| d.mention_handle.clone()).collect();
            let threads = self.render_threads(&request.text, meronym.rendered_lines(), &mentions)?;

            let expert_contacts: Vec<String> = drafts.iter().map(|d| d.contact.address().to_owned()).collect();
            self.quotas.try_admit(now.date_naive(), Some(poster), &expert_contacts)?;

            let account = st.registry.account(poster)?.clone();
            let endorsement_id_at_publish = st.registry.active_endorsement(poster).map(|e| e.endorsement_id.clone());
            let question_id = st.board.next_question_id();
            let experts = Self::issue_expert_invites(
                st,
                &account,
                &question_id,
                &request.text,
                meronym.rendered_lines(),
                drafts,
                now,
            );
            let helpers = Self::issue_helper_invites(st, &account, &question_id, &request.text, helpers, now);
            Self::queue_question_threads(st, &question_id, &threads);
            let question = QuestionRequest {
                question_id: question_id.clone(),
                poster: poster.clone(),
                text: request.text.clone(),
                meronym,
                experts,
                helpers,
                endorsement_id_at_publish,
                threads,
                created: now,
                status: QuestionStatus::Published,
            };
            st.board.insert_question(question.clone());
            Self::log(st, now, question_id.as_str(), "question.published", poster);
            Ok(question)
        })
    }

    fn require_poster<'a>(st: &'a State, poster: &UserId, question_id: &QuestionId) -> Result<&'a QuestionRequest> {
        let question = st.board.question(question_id)?;
        if &question.poster != poster {
            return Err(QaError::NotThePoster.into());
        }
        Ok(question)
    }

    /// Late addition of experts. Public mentions, if requested, are appended
    /// to every platform thread; the rest of the thread is unchanged.
    pub fn add_experts(&self, poster: &UserId, question_id: &QuestionId, requests: &[ExpertRequest]) -> Result<QuestionRequest> {
        let snapshot = self.corpus();
        let now = self.clock.now();
        self.mutate(|st| {
            let question = Self::require_poster(st, poster, question_id)?.clone();
            if question.experts.len() + requests.len() > MAX_INVITEES_PER_CATEGORY {
                return Err(QaError::TooManyExperts { limit: MAX_INVITEES_PER_CATEGORY }.into());
            }
            let drafts = self.draft_experts(&st.registry, &snapshot, poster, &question.meronym, requests)?;
            Self::check_contacts(question.experts.iter().map(|e| &e.contact), drafts.iter().map(|d| &d.contact))?;
            let mentions: Vec<String> = drafts.iter().filter_map(|d| d.mention_handle.clone()).collect();
            let mut threads = question.threads.clone();
            let mut appended = BTreeMap::new();
            if !mentions.is_empty() {
                for (platform, thread) in threads.iter_mut() {
                    appended.insert(platform.clone(), thread.append_mentions(&mentions)?);
                }
            }
            let expert_contacts: Vec<String> = drafts.iter().map(|d| d.contact.address().to_owned()).collect();
            self.quotas.try_admit(now.date_naive(), None, &expert_contacts)?;

            let account = st.registry.account(poster)?.clone();
            let invites = Self::issue_expert_invites(
                st,
                &account,
                question_id,
                &question.text,
                question.meronym.rendered_lines(),
                drafts,
                now,
            );
            for (platform, posts) in appended {
                st.dispatcher.enqueue(
                    &platform,
                    question_id,
                    PostOrigin::Mention,
                    question_id.as_str(),
                    posts.into_iter().map(|p| p.text).collect(),
                    Anchor::ConversationTail,
                );
            }
            let stored = st.board.question_mut(question_id)?;
            stored.experts.extend(invites);
            stored.threads = threads;
            Ok(stored.clone())
        })
    }

    pub fn add_helpers(&self, poster: &UserId, question_id: &QuestionId, requests: &[HelperRequest]) -> Result<QuestionRequest> {
        let now = self.clock.now();
        self.mutate(|st| {
            let question = Self::require_poster(st, poster, question_id)?.clone();
            if question.helpers.len() + requests.len() > MAX_INVITEES_PER_CATEGORY {
                return Err(QaError::TooManyHelpers { limit: MAX_INVITEES_PER_CATEGORY }.into());
            }
            let contacts = Self::parse_helpers(requests)?;
            Self::check_contacts(question.helpers.iter().map(|h| &h.contact), contacts.iter())?;
            let account = st.registry.account(poster)?.clone();
            let invites = Self::issue_helper_invites(st, &account, question_id, &question.text, contacts, now);
            let stored = st.board.question_mut(question_id)?;
            stored.helpers.extend(invites);
            Ok(stored.clone())
        })
    }

    pub fn question(&self, id: &QuestionId) -> Result<QuestionRequest> {
        Ok(self.state.lock().board.question(id)?.clone())
    }

    // ---- answers and moderation ----

    pub fn create_answer(
        &self,
        contributor: &UserId,
        question_id: &QuestionId,
        text: &str,
        selected: &[IdentitySignal],
    ) -> Result<Contribution> {
        let snapshot = self.corpus();
        let now = self.clock.now();
        self.mutate(|st| {
            Self::require_enabled(&st.registry, contributor)?;
            let question = st.board.question(question_id)?;
            let poster = question.poster.clone();
            let meronym = self.compose_for(&st.registry, &snapshot, contributor, selected)?;
            let mut contribution = Contribution {
                contribution_id: st.board.next_contribution_id(),
                question_id: question_id.clone(),
                contributor: contributor.clone(),
                text: text.to_owned(),
                meronym,
                is_original_poster: contributor == &poster,
                moderation: Moderation::Pending,
                endorsement_id_at_publish: st.registry.active_endorsement(contributor).map(|e| e.endorsement_id.clone()),
                threads: BTreeMap::new(),
                created: now,
            };
            // Render now so an unpostable answer is refused up front.
            self.render_threads(text, &contribution.identity_lines(), &[])?;
            contribution.threads.clear();
            let poster_account = st.registry.account(&poster)?.clone();
            st.outbox.enqueue(
                &poster_contact(&poster_account),
                pending_contribution_message(question_id, &contribution.contribution_id, text),
                format!("contribution/{}/pending", contribution.contribution_id),
                now,
            );
            st.board.insert_contribution(contribution.clone());
            Self::log(st, now, contribution.contribution_id.as_str(), "contribution.submitted", contributor);
            Ok(contribution)
        })
    }

    /// Approval broadcasts the answer as a reply to the question's thread.
    /// Rejected answers stay stored for accountability and are never shown.
    pub fn moderate(&self, poster: &UserId, contribution_id: &ContributionId, approve: bool) -> Result<Contribution> {
        let now = self.clock.now();
        self.mutate(|st| {
            let contribution = st.board.contribution(contribution_id)?.clone();
            Self::require_poster(st, poster, &contribution.question_id)?;
            if contribution.moderation != Moderation::Pending {
                return Err(QaError::NotPending.into());
            }
            let (moderation, threads, event) = if approve {
                let threads = self.render_threads(&contribution.text, &contribution.identity_lines(), &[])?;
                (Moderation::Approved, threads, "contribution.approved")
            } else {
                (Moderation::Rejected, BTreeMap::new(), "contribution.rejected")
            };
            for (platform, thread) in &threads {
                st.dispatcher.enqueue(
                    platform,
                    &contribution.question_id,
                    PostOrigin::Contribution,
                    contribution_id.as_str(),
                    thread.posts.iter().map(|p| p.text.clone()).collect(),
                    Anchor::ConversationTail,
                );
            }
            let stored = st.board.contribution_mut(contribution_id)?;
            stored.moderation = moderation;
            stored.threads = threads;
            let out = stored.clone();
            Self::log(st, now, contribution_id.as_str(), event, poster);
            Ok(out)
        })
    }

    pub fn contribution(&self, id: &ContributionId) -> Result<Contribution> {
        Ok(self.state.lock().board.contribution(id)?.clone())
    }

    /// Pending answers across the poster's questions.
    pub fn moderation_queue(&self, poster: &UserId) -> Result<Vec<Contribution>> {
        let st = self.state.lock();
        st.registry.account(poster)?;
        Ok(st
            .board
            .contributions()
            .filter(|c| c.moderation == Moderation::Pending)
            .filter(|c| st.board.question(&c.question_id).is_ok_and(|q| &q.poster == poster))
            .cloned()
            .collect())
    }

    pub fn list_questions(&self, poster: &UserId) -> Result<Vec<QuestionSummary>> {
        let st = self.state.lock();
        st.registry.account(poster)?;
        Ok(st
            .board
            .questions_by(poster)
            .into_iter()
            .map(|q| QuestionSummary {
                question: q.clone(),
                pending_contributions: st
                    .board
                    .contributions_for(&q.question_id)
                    .filter(|c| c.moderation == Moderation::Pending)
                    .count(),
            })
            .collect())
    }

    /// Every question with its approved answers, newest first.
    pub fn feed(&self) -> Vec<PublicQuestion> {
        let st = self.state.lock();
        let texts = |threads: &BTreeMap<String, PostThread>| {
            threads
                .iter()
                .map(|(p, t)| (p.clone(), t.texts().into_iter().map(str::to_owned).collect()))
                .collect::<BTreeMap<String, Vec<String>>>()
        };
        let mut out: Vec<PublicQuestion> = st
            .board
            .questions()
            .map(|q| PublicQuestion {
                question_id: q.question_id.clone(),
                created: q.created,
                posts: texts(&q.threads),
                answers: st
                    .board
                    .contributions_for(&q.question_id)
                    .filter(|c| c.moderation == Moderation::Approved)
                    .map(|c| PublicAnswer {
                        contribution_id: c.contribution_id.clone(),
                        posts: texts(&c.threads),
                    })
                    .collect(),
            })
            .collect();
        out.sort_by(|a, b| b.created.cmp(&a.created));
        out
    }

    // ---- delivery ----

    pub fn outbox(&self, filter: &OutboxFilter) -> Vec<Notification> {
        self.state.lock().outbox.list(filter)
    }

    pub fn platform_posts(&self, platform: &str) -> Result<Vec<PlatformPost>> {
        self.adapters
            .iter()
            .find(|a| a.name() == platform)
            .map(|a| a.posts())
            .ok_or_else(|| ServiceError::UnknownPlatform(platform.to_owned()))
    }

    pub fn platforms(&self) -> Vec<String> {
        self.adapters.iter().map(|a| a.name().to_owned()).collect()
    }

    /// Retries queued broadcast jobs.
    pub fn flush(&self) -> FlushReport {
        self.state.lock().dispatcher.flush(&self.adapters)
    }

    /// Hands every queued notification to the mock transports.
    pub fn deliver_notifications(&self) -> usize {
        let mut st = self.state.lock();
        let sent = st.outbox.deliver_all();
        let State { board, outbox, .. } = &mut *st;
        for question in board.questions_mut() {
            for invite in question.experts.iter_mut() {
                if let Some(n) = outbox.get(&invite.notif_id) {
                    invite.delivery = n.state;
                }
            }
            for invite in question.helpers.iter_mut() {
                if let Some(n) = outbox.get(&invite.notif_id) {
                    invite.delivery = n.state;
                }
            }
        }
        sent
    }

    /// Admin only: which account, and which endorser, stand behind a post.
    pub fn trace_post(&self, platform: &str, post_id: &str) -> Result<PostTrace> {
        let post = self
            .platform_posts(platform)?
            .into_iter()
            .find(|p| p.post_id == post_id)
            .ok_or_else(|| ServiceError::UnknownPost(post_id.to_owned()))?;
        let st = self.state.lock();
        let (author, endorsement_id) = match post.origin {
            PostOrigin::Question | PostOrigin::Mention => {
                let q = st.board.question(&QuestionId::new(post.source_id.clone()))?;
                (q.poster.clone(), q.endorsement_id_at_publish.clone())
            }
            PostOrigin::Contribution => {
                let c = st.board.contribution(&ContributionId::new(post.source_id.clone()))?;
                (c.contributor.clone(), c.endorsement_id_at_publish.clone())
            }
        };
        let endorsement = endorsement_id.as_ref().map(|id| st.registry.endorsement(id)).transpose()?;
        Ok(PostTrace {
            platform: post.platform,
            post_id: post.post_id,
            origin: post.origin,
            source_id: post.source_id,
            author,
            endorser: endorsement.and_then(|e| e.endorser.clone()),
            endorser_author_id: endorsement.map(|e| e.endorser_author_id.clone()),
            endorsement_id,
        })
    }

    pub fn health(&self) -> Health {
        let summary = self.corpus().summary();
        Health {
            status: "ok",
            authors: summary.authors,
            publications: summary.publications,
            follows: summary.follows,
            pending_broadcasts: self.state.lock().dispatcher.pending_jobs(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;
    use crate::contact::Channel;
    use crate::corpus::CorpusPaths;
    use crate::signals::{SignalPayload, Subject};
    use chrono::{DateTime, Utc};

    fn start() -> DateTime<Utc> {
        DateTime::parse_from_rfc3339("2024-03-01T12:00:00Z").unwrap().with_timezone(&Utc)
    }

    fn fixture() -> CorpusSnapshot {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/scholars");
        CorpusPaths::in_dir(&dir).load().unwrap()
    }

    fn service() -> (Service, Arc<ManualClock>) {
        let clock = Arc::new(ManualClock::new(start()));
        (Service::new(ServiceConfig::default(), fixture(), clock.clone()), clock)
    }

    /// Registers, verifies and (optionally) approves a claim.
    fn enabled_user(svc: &Service, name: &str, handle: &str, author: Option<&str>) -> UserId {
        let reg = svc.register(name, handle, None, Seniority::Junior).unwrap();
        let id = reg.account.user_id.clone();
        svc.verify(&id, &reg.verification_token).unwrap();
        if let Some(author) = author {
            svc.claim(&id, author).unwrap();
            svc.approve_claim(&id).unwrap();
        }
        id
    }

    fn ask(svc: &Service, poster: &UserId, text: &str) -> Result<QuestionRequest> {
        svc.create_question(
            poster,
            &NewQuestion {
                text: text.into(),
                ..Default::default()
            },
        )
    }

    #[test]
    fn registration_queues_a_dm_and_verification_is_idempotent() {
        let (svc, _) = service();
        let reg = svc.register("Alice Liddell", "@Alice_L", None, Seniority::Junior).unwrap();
        let out = svc.outbox(&OutboxFilter::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].channel, Channel::DirectMessage);
        assert_eq!(out[0].recipient, "@alice_l");
        assert!(out[0].body.contains(&reg.verification_token));
        let id = reg.account.user_id;
        assert!(svc.verify(&id, &reg.verification_token).unwrap().handle_verified);
        assert!(svc.verify(&id, &reg.verification_token).unwrap().handle_verified);
        let err = svc.register("Other", "@alice_l", None, Seniority::Junior).unwrap_err();
        assert_eq!(err.code(), "HandleTaken");
    }

    #[test]
    fn claim_unlocks_profile_signals() {
        let (svc, _) = service();
        let reg = svc.register("Alice Liddell", "@alice_l", None, Seniority::Junior).unwrap();
        let id = reg.account.user_id;
        assert_eq!(svc.self_signals(&id).unwrap().len(), 2);
        assert_eq!(svc.claim(&id, "https://scholar.example/author/a01").unwrap(), ClaimState::Pending);
        svc.approve_claim(&id).unwrap();
        let signals = svc.self_signals(&id).unwrap();
        assert!(signals.len() > 2);
        assert!(signals.iter().any(|s| s.render() == "Posted by someone who published before at CHI"));
        let err = svc.claim(&id, "a99").unwrap_err();
        assert_eq!(err.code(), "UnknownAuthor");
    }

    #[test]
    fn endorsement_request_channels_follow_contact_form() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", None);
        let dave = enabled_user(&svc, "Dave Bowman", "@dave_b", None);
        svc.request_endorsement(&alice, "a02", "advisor@uni.edu").unwrap();
        svc.request_endorsement(&dave, "a02", "@advisor").unwrap();
        let email = svc.outbox(&OutboxFilter { recipient: Some("advisor@uni.edu".into()), channel: None });
        assert_eq!(email.len(), 1);
        assert_eq!(email[0].channel, Channel::Email);
        assert!(email[0].body.contains("Any recommendations"));
        let dm = svc.outbox(&OutboxFilter { recipient: Some("@advisor".into()), channel: None });
        assert_eq!(dm[0].channel, Channel::DirectMessage);
        let err = svc.request_endorsement(&alice, "a03", "@rita_s").unwrap_err();
        assert_eq!(err.code(), "EndorsementAlreadyPendingOrActive");
    }

    #[test]
    fn endorser_path_enables_and_revocation_disables() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", None);
        let e = svc.request_endorsement(&alice, "a02", "@mark_sloan").unwrap();
        assert!(!svc.is_enabled(&alice).unwrap());
        let mark = enabled_user(&svc, "Mark Sloan", "@mark_sloan", Some("a02"));
        svc.respond_endorsement(&mark, &e.endorsement_id, true, Some(RelationshipCategory::Advisor), true)
            .unwrap();
        assert!(svc.is_enabled(&alice).unwrap());
        let lines: Vec<String> = svc.endorser_signals(&alice).unwrap().iter().map(IdentitySignal::render).collect();
        assert!(lines.contains(&"The poster is endorsed by their advisor, Mark Sloan, @mark_sloan".to_owned()));
        svc.revoke_endorsement(&mark, &e.endorsement_id).unwrap();
        assert!(!svc.is_enabled(&alice).unwrap());
        assert_eq!(svc.endorser_signals(&alice).unwrap_err().code(), "NoActiveEndorsement");
    }

    #[test]
    fn question_with_two_experts_and_a_helper() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        let before = svc.outbox(&OutboxFilter::default()).len();
        let q = svc
            .create_question(
                &alice,
                &NewQuestion {
                    text: "Any recommendations on papers about trust in AI?".into(),
                    meronym: vec![],
                    experts: vec![
                        ExpertRequest { profile: "a03".into(), contact: "rita.skeeter@ravenclaw.edu".into(), ..Default::default() },
                        ExpertRequest { profile: "a06".into(), contact: "@hgranger".into(), ..Default::default() },
                    ],
                    helpers: vec![HelperRequest { contact: "@dave_b".into() }],
                },
            )
            .unwrap();
        let new: Vec<Notification> = svc.outbox(&OutboxFilter::default()).into_iter().skip(before).collect();
        assert_eq!(new.len(), 3);
        assert_eq!(new.iter().filter(|n| n.channel == Channel::Email).count(), 1);
        assert_eq!(new.iter().filter(|n| n.channel == Channel::DirectMessage).count(), 2);
        for platform in ["twitter", "mastodon"] {
            assert_eq!(svc.platform_posts(platform).unwrap().len(), 1);
        }
        assert!(new[2].body.contains("Alice Liddell"));
        assert!(!new[0].body.contains("Alice Liddell"));
        assert_eq!(q.experts[0].name_check, crate::qa::NameCheck::Pass);
    }

    #[test]
    fn daily_quota_and_expert_cap() {
        let (svc, clock) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        for i in 0..3 {
            ask(&svc, &alice, &format!("question {i}")).unwrap();
        }
        assert_eq!(ask(&svc, &alice, "fourth").unwrap_err().code(), "DailyAskQuotaExceeded");
        clock.advance(chrono::Duration::days(1));
        ask(&svc, &alice, "next day").unwrap();

        let six: Vec<ExpertRequest> = (1..=6)
            .map(|i| ExpertRequest { profile: format!("a0{i}"), contact: format!("@expert{i}"), ..Default::default() })
            .collect();
        let err = svc
            .create_question(&alice, &NewQuestion { text: "q".into(), experts: six.clone(), ..Default::default() })
            .unwrap_err();
        assert_eq!(err.code(), "TooManyExperts");
        let q = svc
            .create_question(&alice, &NewQuestion { text: "q".into(), experts: six[..4].to_vec(), ..Default::default() })
            .unwrap();
        let q = svc.add_experts(&alice, &q.question_id, &six[4..5]).unwrap();
        assert_eq!(q.experts.len(), 5);
        let err = svc.add_experts(&alice, &q.question_id, &six[5..]).unwrap_err();
        assert_eq!(err.code(), "TooManyExperts");
    }

    #[test]
    fn non_poster_cannot_add_or_moderate() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        let matt = enabled_user(&svc, "Matt Murdock", "@matt_m", Some("a05"));
        let q = ask(&svc, &alice, "Why?").unwrap();
        let err = svc.add_helpers(&matt, &q.question_id, &[HelperRequest { contact: "@x".into() }]).unwrap_err();
        assert_eq!(err.code(), "NotThePoster");
        let c = svc.create_answer(&matt, &q.question_id, "Because.", &[]).unwrap();
        assert!(!c.is_original_poster);
        assert_eq!(svc.moderate(&matt, &c.contribution_id, true).unwrap_err().code(), "NotThePoster");
        assert_eq!(svc.list_questions(&alice).unwrap()[0].pending_contributions, 1);
    }

    #[test]
    fn moderation_gates_broadcast() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        let matt = enabled_user(&svc, "Matt Murdock", "@matt_m", Some("a05"));
        let q = ask(&svc, &alice, "Why?").unwrap();
        let good = svc.create_answer(&matt, &q.question_id, "Good answer.", &[]).unwrap();
        let bad = svc.create_answer(&matt, &q.question_id, "Spam answer.", &[]).unwrap();
        let own = svc.create_answer(&alice, &q.question_id, "Update from me.", &[]).unwrap();
        assert!(own.is_original_poster);
        svc.moderate(&alice, &good.contribution_id, true).unwrap();
        svc.moderate(&alice, &bad.contribution_id, false).unwrap();
        svc.moderate(&alice, &own.contribution_id, true).unwrap();
        assert_eq!(svc.moderate(&alice, &good.contribution_id, true).unwrap_err().code(), "NotPending");
        let posts = svc.platform_posts("twitter").unwrap();
        let bodies: Vec<&str> = posts.iter().map(|p| p.body.as_str()).collect();
        assert!(bodies.iter().any(|b| b.contains("Good answer.")));
        assert!(!bodies.iter().any(|b| b.contains("Spam answer.")));
        assert!(bodies.iter().any(|b| b.contains("This reply is from the original poster.")));
        for pair in posts.windows(2) {
            assert_eq!(pair[1].in_reply_to.as_deref(), Some(pair[0].post_id.as_str()));
        }
        let feed = svc.feed();
        assert_eq!(feed[0].answers.len(), 2);
    }

    #[test]
    fn answers_require_enabled_contributor() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        let q = ask(&svc, &alice, "Why?").unwrap();
        let reg = svc.register("Nobody", "@nobody", None, Seniority::Junior).unwrap();
        let err = svc.create_answer(&reg.account.user_id, &q.question_id, "Hi", &[]).unwrap_err();
        assert_eq!(err.code(), "NotEnabled");
        let err = svc.create_answer(&alice, &"q99".into(), "Hi", &[]).unwrap_err();
        assert_eq!(err.code(), "UnknownQuestion");
    }

    #[test]
    fn relational_signals_are_rejected_in_meronyms() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        let relational = svc.relational_signals(&alice, "a02").unwrap();
        assert!(!relational.is_empty());
        let err = svc
            .create_question(&alice, &NewQuestion { text: "q".into(), meronym: relational, ..Default::default() })
            .unwrap_err();
        assert_eq!(err.code(), "RelationalSignalInPublicMeronym");
        let foreign = IdentitySignal::poster(SignalPayload::VenueHistory { venue: "NeurIPS".into() });
        assert_eq!(svc.audit(&alice, &[foreign]).unwrap_err().code(), "UnownedSignal");
        let own = IdentitySignal { subject: Subject::Poster, payload: SignalPayload::VenueHistory { venue: "CHI".into() } };
        assert_eq!(svc.audit(&alice, &[own]).unwrap().k, 7);
    }

    #[test]
    fn failed_adapter_retries_without_duplicates() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        svc.mock_adapter("twitter").unwrap().lose_acks(1);
        ask(&svc, &alice, &"word ".repeat(100)).unwrap();
        assert_eq!(svc.health().pending_broadcasts, 1);
        assert_eq!(svc.flush().pending_jobs, 0);
        let posts = svc.platform_posts("twitter").unwrap();
        assert_eq!(posts.len(), 2);
        assert_eq!(svc.platform_posts("mastodon").unwrap().len(), 1);
        assert_eq!(svc.platform_posts("myspace").unwrap_err().code(), "UnknownPlatform");
    }

    #[test]
    fn trace_reaches_the_endorser() {
        let (svc, _) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", None);
        let e = svc.request_endorsement(&alice, "a02", "@mark_sloan").unwrap();
        let mark = enabled_user(&svc, "Mark Sloan", "@mark_sloan", Some("a02"));
        svc.respond_endorsement(&mark, &e.endorsement_id, true, Some(RelationshipCategory::Advisor), false)
            .unwrap();
        ask(&svc, &alice, "Why?").unwrap();
        let post = &svc.platform_posts("twitter").unwrap()[0];
        let trace = svc.trace_post("twitter", &post.post_id).unwrap();
        assert_eq!(trace.author, alice);
        assert_eq!(trace.endorser, Some(mark));
        svc.revoke_endorsement(&alice, &e.endorsement_id).unwrap();
        assert_eq!(svc.platform_posts("twitter").unwrap()[0].body, post.body);
    }

    #[test]
    fn state_round_trips_through_export() {
        let (svc, clock) = service();
        let alice = enabled_user(&svc, "Alice Liddell", "@alice_l", Some("a01"));
        ask(&svc, &alice, "Why?").unwrap();
        let json = serde_json::to_string(&svc.export_state()).unwrap();
        let restored: PersistedState = serde_json::from_str(&json).unwrap();
        let svc2 = Service::restore(ServiceConfig::default(), fixture(), clock, restored);
        assert_eq!(svc2.list_questions(&alice).unwrap().len(), 1);
        assert_eq!(svc2.platform_posts("twitter").unwrap().len(), 1);
        ask(&svc2, &alice, "Again?").unwrap();
        ask(&svc2, &alice, "Again?").unwrap();
        assert_eq!(ask(&svc2, &alice, "Again?").unwrap_err().code(), "DailyAskQuotaExceeded");
        assert!(!svc.drain_journal().is_empty());
    }
}
