//! Questions, invitations, answers and moderation.

pub mod quota;
pub mod similarity;
pub mod thread;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::Contact;
use crate::delivery::DeliveryState;
use crate::ids::{AuthorId, ContributionId, EndorsementId, InviteId, NotificationId, QuestionId, UserId};
use crate::meronym::Meronym;
use crate::signals::{IdentitySignal, RelationshipCategory};

pub use quota::{QuotaError, QuotaLedger, QuotaLimits};
pub use similarity::{name_similarity, NameCheck};
pub use thread::{render_thread, PostThread, ThreadError, MENTION_SENTENCE, ORIGINAL_POSTER_MARKER};

/// Most experts, and most helpers, one question may name.
pub const MAX_INVITEES_PER_CATEGORY: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QaError {
    #[error("account `{0}` must verify its handle and claim a profile or hold an active endorsement")]
    NotEnabled(UserId),
    #[error("at most {limit} experts per question")]
    TooManyExperts { limit: usize },
    #[error("at most {limit} helpers per question")]
    TooManyHelpers { limit: usize },
    #[error("only the poster of the question may do this")]
    NotThePoster,
    #[error("contribution is not awaiting moderation")]
    NotPending,
    #[error("unknown question `{0}`")]
    UnknownQuestion(QuestionId),
    #[error("unknown contribution `{0}`")]
    UnknownContribution(ContributionId),
    #[error("{0} is invited more than once")]
    DuplicateContact(String),
    #[error("no platform handle is known for expert `{0}`")]
    NoHandleToMention(AuthorId),
    #[error("invalid contact `{0}`")]
    InvalidContact(String),
    #[error(transparent)]
    Quota(#[from] QuotaError),
    #[error(transparent)]
    Thread(#[from] ThreadError),
}

impl QaError {
    pub fn code(&self) -> &'static str {
        match self {
            QaError::NotEnabled(_) => "NotEnabled",
            QaError::TooManyExperts { .. } => "TooManyExperts",
            QaError::TooManyHelpers { .. } => "TooManyHelpers",
            QaError::NotThePoster => "NotThePoster",
            QaError::NotPending => "NotPending",
            QaError::UnknownQuestion(_) => "UnknownQuestion",
            QaError::UnknownContribution(_) => "UnknownContribution",
            QaError::DuplicateContact(_) => "DuplicateContact",
            QaError::NoHandleToMention(_) => "NoHandleToMention",
            QaError::InvalidContact(_) => "InvalidContact",
            QaError::Quota(QuotaError::DailyAskQuotaExceeded { .. }) => "DailyAskQuotaExceeded",
            QaError::Quota(QuotaError::ExpertDailyCapExceeded { .. }) => "ExpertDailyCapExceeded",
            QaError::Thread(e) => e.code(),
        }
    }
}

/// An expert as the poster names them when asking.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertRequest {
    /// Author profile URL or bare author id.
    pub profile: String,
    pub contact: String,
    #[serde(default)]
    pub private_signals: Vec<IdentitySignal>,
    #[serde(default)]
    pub reveal_name: bool,
    #[serde(default)]
    pub mention_publicly: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperRequest {
    pub contact: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertInvite {
    pub invite_id: InviteId,
    pub expert_author_id: AuthorId,
    pub contact: Contact,
    pub name_check: NameCheck,
    pub private_signals: Vec<IdentitySignal>,
    pub reveal_name: bool,
    pub mention_publicly: bool,
    pub message: String,
    pub notif_id: NotificationId,
    pub delivery: DeliveryState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperInvite {
    pub invite_id: InviteId,
    pub contact: Contact,
    pub message: String,
    pub notif_id: NotificationId,
    pub delivery: DeliveryState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionStatus {
    Published,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRequest {
    pub question_id: QuestionId,
    pub poster: UserId,
    pub text: String,
    pub meronym: Meronym,
    pub experts: Vec<ExpertInvite>,
    pub helpers: Vec<HelperInvite>,
    pub endorsement_id_at_publish: Option<EndorsementId>,
    /// Rendered thread per platform name.
    pub threads: BTreeMap<String, PostThread>,
    pub created: DateTime<Utc>,
    pub status: QuestionStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Moderation {
    Pending,
    Approved,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    pub contribution_id: ContributionId,
    pub question_id: QuestionId,
    pub contributor: UserId,
    pub text: String,
    pub meronym: Meronym,
    pub is_original_poster: bool,
    pub moderation: Moderation,
    pub endorsement_id_at_publish: Option<EndorsementId>,
    /// Present only once approved.
    pub threads: BTreeMap<String, PostThread>,
    pub created: DateTime<Utc>,
}

impl Contribution {
    /// Lines posted after the answer body: the original-poster marker when
    /// it applies, then the meronym.
    pub fn identity_lines(&self) -> Vec<String> {
        let mut lines = Vec::new();
        if self.is_original_poster {
            lines.push(ORIGINAL_POSTER_MARKER.to_owned());
        }
        lines.extend(self.meronym.rendered_lines().iter().cloned());
        lines
    }
}

/// Stored questions and contributions.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Board {
    questions: BTreeMap<QuestionId, QuestionRequest>,
    contributions: BTreeMap<ContributionId, Contribution>,
    next_question: u64,
    next_contribution: u64,
    next_invite: u64,
}

impl Board {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn next_question_id(&mut self) -> QuestionId {
        self.next_question += 1;
        QuestionId::new(format!("q{}", self.next_question))
    }

    pub fn next_contribution_id(&mut self) -> ContributionId {
        self.next_contribution += 1;
        ContributionId::new(format!("c{}", self.next_contribution))
    }

    pub fn next_invite_id(&mut self) -> InviteId {
        self.next_invite += 1;
        InviteId::new(format!("i{}", self.next_invite))
    }

    pub fn question(&self, id: &QuestionId) -> Result<&QuestionRequest, QaError> {
        self.questions
            .get(id)
            .ok_or_else(|| QaError::UnknownQuestion(id.clone()))
    }

    pub fn question_mut(&mut self, id: &QuestionId) -> Result<&mut QuestionRequest, QaError> {
        self.questions
            .get_mut(id)
            .ok_or_else(|| QaError::UnknownQuestion(id.clone()))
    }

    pub fn questions(&self) -> impl Iterator<Item = &QuestionRequest> {
        self.questions.values()
    }

    pub fn questions_mut(&mut self) -> impl Iterator<Item = &mut QuestionRequest> {
        self.questions.values_mut()
    }

    pub fn insert_question(&mut self, question: QuestionRequest) {
        self.questions.insert(question.question_id.clone(), question);
    }

    pub fn contribution(&self, id: &ContributionId) -> Result<&Contribution, QaError> {
        self.contributions
            .get(id)
            .ok_or_else(|| QaError::UnknownContribution(id.clone()))
    }

    pub fn contribution_mut(&mut self, id: &ContributionId) -> Result<&mut Contribution, QaError> {
        self.contributions
            .get_mut(id)
            .ok_or_else(|| QaError::UnknownContribution(id.clone()))
    }

    pub fn contributions(&self) -> impl Iterator<Item = &Contribution> {
        self.contributions.values()
    }

    pub fn insert_contribution(&mut self, contribution: Contribution) {
        self.contributions
            .insert(contribution.contribution_id.clone(), contribution);
    }

    pub fn contributions_for<'a>(&'a self, question: &'a QuestionId) -> impl Iterator<Item = &'a Contribution> + 'a {
        self.contributions
            .values()
            .filter(move |c| &c.question_id == question)
    }

    /// The poster's questions, newest first.
    pub fn questions_by(&self, poster: &UserId) -> Vec<&QuestionRequest> {
        let mut out: Vec<&QuestionRequest> = self.questions.values().filter(|q| &q.poster == poster).collect();
        out.sort_by(|a, b| b.created.cmp(&a.created).then_with(|| b.question_id.cmp(&a.question_id)));
        out
    }
}

/// Who sent an invitation, as far as the recipient may know.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosterIntro<'a> {
    pub full_name: &'a str,
    pub handle: &'a str,
}

fn bullet_lines(out: &mut String, lines: &[String]) {
    for line in lines {
        out.push_str("- ");
        out.push_str(line);
        out.push('\n');
    }
}

/// Private invitation to an expert. Names the poster only when `reveal` is
/// given.
pub fn expert_invite_message(
    expert_name: &str,
    reveal: Option<PosterIntro<'_>>,
    question_id: &QuestionId,
    text: &str,
    public_lines: &[String],
    private_lines: &[String],
) -> String {
    let mut out = format!("Hello {expert_name},\n");
    match reveal {
        Some(poster) => out.push_str(&format!(
            "{} ({}) would like your expert answer to a question.\n",
            poster.full_name, poster.handle
        )),
        None => out.push_str("Someone would like your expert answer to a question.\n"),
    }
    out.push_str(&format!("Question {question_id}: {text}\n"));
    if !public_lines.is_empty() {
        out.push_str("Shown publicly with the question:\n");
        bullet_lines(&mut out, public_lines);
    }
    if !private_lines.is_empty() {
        out.push_str("Shared only with you:\n");
        bullet_lines(&mut out, private_lines);
    }
    out.push_str("You can reply to the public thread, or answer through the platform.");
    out
}

/// Invitation to a helper, who always learns who is asking.
pub fn helper_invite_message(poster: PosterIntro<'_>, question_id: &QuestionId, text: &str) -> String {
    format!(
        "Hello,\n{} ({}) asked a question and would like your help spreading it to people who can answer.\n\
         Question {question_id}: {text}\n\
         Please share the public thread with your network.",
        poster.full_name, poster.handle
    )
}

pub const PREVIEW_QUESTION: &str = "Any recommendations on papers that study trust in AI?";

/// Endorsement request with an example of how the endorsee could post.
pub fn endorsement_request_message(
    endorsee: PosterIntro<'_>,
    endorsement_id: &EndorsementId,
    preview_lines: &[String],
) -> String {
    let categories: Vec<&str> = RelationshipCategory::ALL.iter().map(|c| c.label()).collect();
    let mut out = format!(
        "{} ({}) asked you to endorse them (request {endorsement_id}).\n\
         If you accept, their questions could show details about you like this example:\n\n{PREVIEW_QUESTION}\n",
        endorsee.full_name, endorsee.handle
    );
    for line in preview_lines {
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&format!(
        "\nOn accepting you pick how you know them ({}) and whether your name may be shown.",
        categories.join(", ")
    ));
    out
}

pub fn verification_message(handle: &str, token: &str) -> String {
    format!("Confirm that {handle} belongs to you with this verification code: {token}")
}

pub fn pending_contribution_message(question_id: &QuestionId, contribution_id: &ContributionId, text: &str) -> String {
    format!(
        "A new answer to your question {question_id} awaits your approval (contribution {contribution_id}).\n\
         Answer: {text}\n\
         Approve it to broadcast it, or reject it to keep it off every public surface."
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expert_message_hides_name_unless_revealed() {
        let q = QuestionId::from("q1");
        let hidden = expert_invite_message("Rita Skeeter", None, &q, "Why?", &[], &["secret".into()]);
        assert!(!hidden.contains("Alice"));
        assert!(hidden.contains("- secret\n"));
        let intro = PosterIntro { full_name: "Alice Liddell", handle: "@alice_l" };
        let shown = expert_invite_message("Rita Skeeter", Some(intro), &q, "Why?", &[], &[]);
        assert!(shown.contains("Alice Liddell (@alice_l)"));
    }

    #[test]
    fn helper_message_names_poster() {
        let intro = PosterIntro { full_name: "Alice Liddell", handle: "@alice_l" };
        assert!(helper_invite_message(intro, &"q1".into(), "Why?").contains("Alice Liddell"));
    }

    #[test]
    fn questions_by_lists_newest_first() {
        let mut board = Board::new();
        let t0 = DateTime::parse_from_rfc3339("2024-03-01T12:00:00Z").unwrap().with_timezone(&Utc);
        for (i, poster) in ["u1", "u2", "u1", "u1"].iter().enumerate() {
            let id = board.next_question_id();
            board.insert_question(QuestionRequest {
                question_id: id,
                poster: UserId::from(*poster),
                text: "t".into(),
                meronym: Meronym::anonymous(),
                experts: vec![],
                helpers: vec![],
                endorsement_id_at_publish: None,
                threads: BTreeMap::new(),
                created: t0 + chrono::Duration::minutes(i as i64),
                status: QuestionStatus::Published,
            });
        }
        let ids: Vec<&str> = board.questions_by(&"u1".into()).iter().map(|q| q.question_id.as_str()).collect();
        assert_eq!(ids, ["q4", "q3", "q1"]);
        assert!(board.questions_by(&"u3".into()).is_empty());
    }
}
