//! The bundled demo corpus and a scripted walkthrough over it.
//!
//! Alice, a junior researcher, is endorsed by her advisor Mark. She asks a
//! question under a partial identity, privately tells the expert Rita that
//! her endorser co-authored with Rita, asks Dave to help spread the word,
//! and approves an answer from Matt.

use std::io::Cursor;

use crate::corpus::{ingest_corpus, CorpusSnapshot};
use crate::identity::Endorsement;
use crate::ids::{ContributionId, QuestionId, UserId};
use crate::qa::{Contribution, ExpertRequest, HelperRequest, QuestionRequest};
use crate::service::{NewQuestion, Result, Service};
use crate::signals::{IdentitySignal, RelationshipCategory, Seniority, SignalKind, SignalPayload, Subject};

pub const PUBLICATIONS: &str = include_str!("../../../fixtures/scholars/publications.jsonl");
pub const AUTHORS: &str = include_str!("../../../fixtures/scholars/authors.jsonl");
pub const FOLLOWS: &str = include_str!("../../../fixtures/scholars/follows.jsonl");

pub const QUESTION_TEXT: &str =
    "Any recommendations on papers that study how people calibrate trust in AI systems? Looking for both lab studies and field deployments.";
pub const ANSWER_TEXT: &str =
    "Start with the FAccT work on algorithmic accountability and the CHI papers on explanation; both have solid field evidence.";
pub const RITA_EMAIL: &str = "rita.skeeter@ravenclaw.edu";
pub const DAVE_HANDLE: &str = "@dave_b";

/// Names under which the walkthrough can be seeded.
pub const SEED_NAMES: &[&str] = &["walkthrough", "fig2"];

/// The bundled demo corpus.
pub fn demo_corpus() -> CorpusSnapshot {
    ingest_corpus(
        Cursor::new(PUBLICATIONS),
        Cursor::new(AUTHORS),
        Cursor::new(FOLLOWS),
    )
    .expect("bundled corpus is valid")
}

#[derive(Debug, Clone)]
pub struct Walkthrough {
    pub alice: UserId,
    pub mark: UserId,
    pub matt: UserId,
    pub endorsement: Endorsement,
    pub question: QuestionRequest,
    pub answer: Contribution,
}

impl Walkthrough {
    pub fn question_id(&self) -> &QuestionId {
        &self.question.question_id
    }

    pub fn answer_id(&self) -> &ContributionId {
        &self.answer.contribution_id
    }
}

fn enabled_account(
    service: &Service,
    name: &str,
    handle: &str,
    seniority: Seniority,
    author: Option<&str>,
) -> Result<UserId> {
    let reg = service.register(name, handle, None, seniority)?;
    let id = reg.account.user_id;
    service.verify(&id, &reg.verification_token)?;
    if let Some(author) = author {
        service.claim(&id, author)?;
        service.approve_claim(&id)?;
    }
    Ok(id)
}

fn pick(signals: &[IdentitySignal], subject: Subject, kind: SignalKind) -> Option<IdentitySignal> {
    signals
        .iter()
        .find(|s| s.subject == subject && s.kind() == kind)
        .cloned()
}

/// The public meronym Alice posts under: her seniority and citation count,
/// and her endorser's CHI history and citation count.
pub fn alice_meronym(service: &Service, alice: &UserId) -> Result<Vec<IdentitySignal>> {
    let own = service.self_signals(alice)?;
    let endorser = service.endorser_signals(alice)?;
    let chi = IdentitySignal::endorser(SignalPayload::VenueHistory { venue: "CHI".into() });
    Ok([
        pick(&own, Subject::Poster, SignalKind::Seniority),
        pick(&own, Subject::Poster, SignalKind::CitationMetric),
        endorser.contains(&chi).then_some(chi),
        pick(&endorser, Subject::Endorser, SignalKind::CitationMetric),
    ]
    .into_iter()
    .flatten()
    .collect())
}

/// Runs the whole walkthrough against `service`, which should hold the demo
/// corpus and no accounts yet.
pub fn seed_walkthrough(service: &Service) -> Result<Walkthrough> {
    let alice = enabled_account(service, "Alice Liddell", "@alice_l", Seniority::Junior, Some("a01"))?;

    // Mark has no account when Alice asks; the request binds once he claims.
    let requested = service.request_endorsement(&alice, "https://scholar.example/author/a02", "@mark_sloan")?;
    let mark = enabled_account(service, "Mark Sloan", "@mark_sloan", Seniority::Senior, Some("a02"))?;
    let endorsement = service.respond_endorsement(
        &mark,
        &requested.endorsement_id,
        true,
        Some(RelationshipCategory::Advisor),
        false,
    )?;

    let meronym = alice_meronym(service, &alice)?;
    let to_rita: Vec<IdentitySignal> = service
        .relational_signals(&alice, "a03")?
        .into_iter()
        .filter(|s| s.subject == Subject::Endorser && s.kind() == SignalKind::CoauthorRelation)
        .collect();
    let question = service.create_question(
        &alice,
        &NewQuestion {
            text: QUESTION_TEXT.into(),
            meronym,
            experts: vec![ExpertRequest {
                profile: "https://scholar.example/author/a03".into(),
                contact: RITA_EMAIL.into(),
                private_signals: to_rita,
                reveal_name: false,
                mention_publicly: true,
            }],
            helpers: vec![HelperRequest {
                contact: DAVE_HANDLE.into(),
            }],
        },
    )?;

    let matt = enabled_account(service, "Matt Murdock", "@matt_m", Seniority::Senior, Some("a05"))?;
    let matt_meronym: Vec<IdentitySignal> = service
        .self_signals(&matt)?
        .into_iter()
        .filter(|s| matches!(s.kind(), SignalKind::Seniority | SignalKind::VenueHistory))
        .collect();
    let pending = service.create_answer(&matt, &question.question_id, ANSWER_TEXT, &matt_meronym)?;
    let answer = service.moderate(&alice, &pending.contribution_id, true)?;

    Ok(Walkthrough {
        alice,
        mark,
        matt,
        endorsement,
        question,
        answer,
    })
}
