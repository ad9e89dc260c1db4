//! Identity signals: derivation from the corpus and canonical rendering.
//!
//! Every sentence shown to readers comes from [`TEMPLATES`]. A signal is a
//! `(subject, payload)` pair; the payload variant fixes its [`SignalKind`], and
//! the derived ordering on [`IdentitySignal`] is the catalog order used when a
//! meronym is composed (poster signals first, then endorser signals).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AuthorMetrics, CorpusError, CorpusSnapshot};
use crate::ids::AuthorId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SignalError {
    #[error("unknown author `{0}`")]
    UnknownAuthor(AuthorId),
    #[error("no active endorsement")]
    NoActiveEndorsement,
}

impl SignalError {
    pub fn code(&self) -> &'static str {
        match self {
            SignalError::UnknownAuthor(_) => "UnknownAuthor",
            SignalError::NoActiveEndorsement => "NoActiveEndorsement",
        }
    }
}

impl From<CorpusError> for SignalError {
    fn from(err: CorpusError) -> Self {
        match err {
            CorpusError::UnknownAuthor(id) => SignalError::UnknownAuthor(id),
            other => unreachable!("snapshot lookups only fail with UnknownAuthor: {other}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subject {
    Poster,
    Endorser,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignalKind {
    Name,
    Relationship,
    Affiliation,
    CitationMetric,
    PublicationMetric,
    CombinedMetrics,
    Seniority,
    VenueHistory,
    VenuePubCount,
    VenueYear,
    Coauthorship,
    CitedRelation,
    CoauthorRelation,
    FollowRelation,
}

impl SignalKind {
    pub fn is_relational(self) -> bool {
        matches!(
            self,
            SignalKind::CitedRelation | SignalKind::CoauthorRelation | SignalKind::FollowRelation
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RelationshipCategory {
    Advisor,
    Collaborator,
    Labmate,
    FellowResearcher,
}

impl RelationshipCategory {
    pub const ALL: [RelationshipCategory; 4] = [
        RelationshipCategory::Advisor,
        RelationshipCategory::Collaborator,
        RelationshipCategory::Labmate,
        RelationshipCategory::FellowResearcher,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RelationshipCategory::Advisor => "advisor",
            RelationshipCategory::Collaborator => "collaborator",
            RelationshipCategory::Labmate => "labmate",
            RelationshipCategory::FellowResearcher => "fellow researcher",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seniority {
    Junior,
    Senior,
}

impl Seniority {
    pub fn phrase(self) -> &'static str {
        match self {
            Seniority::Junior => "a junior student or researcher",
            Seniority::Senior => "a senior professor or researcher",
        }
    }
}

/// First publication at least this many years before the reference year
/// suggests a senior researcher.
pub const SENIOR_AFTER_YEARS: i32 = 8;

/// Advisory seniority guess from publication history. Never authoritative:
/// accounts declare their seniority at registration.
pub fn suggest_seniority(metrics: &AuthorMetrics, reference_year: i32) -> Seniority {
    let long_record = metrics
        .first_pub_year
        .is_some_and(|first| reference_year - first >= SENIOR_AFTER_YEARS);
    let prolific = PublicationBucket::from_count(metrics.publication_count)
        == Some(PublicationBucket::MoreThanFifteen);
    if long_record || prolific {
        Seniority::Senior
    } else {
        Seniority::Junior
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublicationBucket {
    OneToFive,
    SixToFifteen,
    MoreThanFifteen,
}

impl PublicationBucket {
    pub fn from_count(count: u32) -> Option<Self> {
        match count {
            0 => None,
            1..=5 => Some(PublicationBucket::OneToFive),
            6..=15 => Some(PublicationBucket::SixToFifteen),
            _ => Some(PublicationBucket::MoreThanFifteen),
        }
    }

    pub fn phrase(self) -> &'static str {
        match self {
            PublicationBucket::OneToFive => "1 to 5",
            PublicationBucket::SixToFifteen => "6 to 15",
            PublicationBucket::MoreThanFifteen => "more than 15",
        }
    }
}

/// Successive values of the citation ladder: 5, 10, 25, 50, 100, 250, ...
pub fn citation_ladder() -> impl Iterator<Item = u64> {
    let mut decade: u64 = 1;
    let mut step = 0usize;
    std::iter::from_fn(move || {
        let value = decade.checked_mul([5, 10, 25][step])?;
        step += 1;
        if step == 3 {
            step = 0;
            decade = decade.checked_mul(10)?;
        }
        Some(value)
    })
}

/// Rounds a citation count to the nearest ladder value; ties go to the lower
/// rung.
pub fn citation_bucket(count: u64) -> u64 {
    let mut below: Option<u64> = None;
    for rung in citation_ladder() {
        if rung >= count {
            return match below {
                Some(lower) if count - lower <= rung - count => lower,
                _ => rung,
            };
        }
        below = Some(rung);
    }
    below.unwrap_or(count)
}

/// Kind-specific content of a signal. The variant order is the catalog order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SignalPayload {
    Name {
        full_name: String,
        handle: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relationship: Option<RelationshipCategory>,
    },
    Relationship {
        relationship: RelationshipCategory,
    },
    Affiliation {
        institution: String,
    },
    CitationMetric {
        around: u64,
    },
    PublicationMetric {
        bucket: PublicationBucket,
    },
    CombinedMetrics {
        around: u64,
        bucket: PublicationBucket,
    },
    Seniority {
        level: Seniority,
    },
    VenueHistory {
        venue: String,
    },
    VenuePubCount {
        venue: String,
        count: u32,
    },
    VenueYear {
        venue: String,
        year: i32,
    },
    Coauthorship {
        coauthor: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relationship: Option<RelationshipCategory>,
    },
    CitedRelation,
    CoauthorRelation,
    FollowRelation {
        platform: String,
    },
}

impl SignalPayload {
    pub fn kind(&self) -> SignalKind {
        match self {
            SignalPayload::Name { .. } => SignalKind::Name,
            SignalPayload::Relationship { .. } => SignalKind::Relationship,
            SignalPayload::Affiliation { .. } => SignalKind::Affiliation,
            SignalPayload::CitationMetric { .. } => SignalKind::CitationMetric,
            SignalPayload::PublicationMetric { .. } => SignalKind::PublicationMetric,
            SignalPayload::CombinedMetrics { .. } => SignalKind::CombinedMetrics,
            SignalPayload::Seniority { .. } => SignalKind::Seniority,
            SignalPayload::VenueHistory { .. } => SignalKind::VenueHistory,
            SignalPayload::VenuePubCount { .. } => SignalKind::VenuePubCount,
            SignalPayload::VenueYear { .. } => SignalKind::VenueYear,
            SignalPayload::Coauthorship { .. } => SignalKind::Coauthorship,
            SignalPayload::CitedRelation => SignalKind::CitedRelation,
            SignalPayload::CoauthorRelation => SignalKind::CoauthorRelation,
            SignalPayload::FollowRelation { .. } => SignalKind::FollowRelation,
        }
    }

    fn placeholders(&self) -> Vec<(&'static str, String)> {
        let rel = |r: &Option<RelationshipCategory>| {
            r.map(RelationshipCategory::label)
                .unwrap_or(FALLBACK_RELATIONSHIP)
                .to_owned()
        };
        match self {
            SignalPayload::Name {
                full_name,
                handle,
                relationship,
            } => vec![
                ("full_name", full_name.clone()),
                ("handle", handle.clone()),
                ("relationship", rel(relationship)),
            ],
            SignalPayload::Relationship { relationship } => {
                vec![("relationship", relationship.label().to_owned())]
            }
            SignalPayload::Affiliation { institution } => {
                vec![("institution", institution.clone())]
            }
            SignalPayload::CitationMetric { around } => vec![("citations", around.to_string())],
            SignalPayload::PublicationMetric { bucket } => {
                vec![("publications", bucket.phrase().to_owned())]
            }
            SignalPayload::CombinedMetrics { around, bucket } => vec![
                ("citations", around.to_string()),
                ("publications", bucket.phrase().to_owned()),
            ],
            SignalPayload::Seniority { level } => vec![("seniority", level.phrase().to_owned())],
            SignalPayload::VenueHistory { venue } => vec![("venue", venue.clone())],
            SignalPayload::VenuePubCount { venue, count } => {
                vec![("venue", venue.clone()), ("count", count.to_string())]
            }
            SignalPayload::VenueYear { venue, year } => {
                vec![("venue", venue.clone()), ("year", year.to_string())]
            }
            SignalPayload::Coauthorship {
                coauthor,
                relationship,
            } => vec![
                ("coauthor", coauthor.clone()),
                ("relationship", rel(relationship)),
            ],
            SignalPayload::CitedRelation | SignalPayload::CoauthorRelation => Vec::new(),
            SignalPayload::FollowRelation { platform } => vec![("platform", platform.clone())],
        }
    }
}

/// One atom of identity, attributed to the poster or to their endorser.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdentitySignal {
    pub subject: Subject,
    #[serde(flatten)]
    pub payload: SignalPayload,
}

impl IdentitySignal {
    pub fn poster(payload: SignalPayload) -> Self {
        Self {
            subject: Subject::Poster,
            payload,
        }
    }

    pub fn endorser(payload: SignalPayload) -> Self {
        Self {
            subject: Subject::Endorser,
            payload,
        }
    }

    pub fn kind(&self) -> SignalKind {
        self.payload.kind()
    }

    pub fn is_relational(&self) -> bool {
        self.kind().is_relational()
    }

    pub fn render(&self) -> String {
        render_signal(self)
    }
}

impl fmt::Display for IdentitySignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Stand-in for `{relationship}` when an endorser-side signal carries none.
pub const FALLBACK_RELATIONSHIP: &str = "endorser";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Template {
    pub kind: SignalKind,
    pub subject: Subject,
    pub template: &'static str,
}

const fn t(kind: SignalKind, subject: Subject, template: &'static str) -> Template {
    Template {
        kind,
        subject,
        template,
    }
}

/// Canonical sentence templates, one per (kind, subject).
///
/// Placeholders: `{full_name}` `{handle}` `{relationship}` `{institution}`
/// `{citations}` `{publications}` `{seniority}` `{venue}` `{count}` `{year}`
/// `{coauthor}` `{platform}`.
pub const TEMPLATES: &[Template] = {
    use SignalKind::*;
    use Subject::*;
    &[
        t(Name, Poster, "Posted by {full_name}, {handle}"),
        t(Name, Endorser, "The poster is endorsed by their {relationship}, {full_name}, {handle}"),
        t(Relationship, Poster, "Posted by someone endorsed by their {relationship}"),
        t(Relationship, Endorser, "The poster is endorsed by their {relationship}"),
        t(Affiliation, Poster, "Posted by someone who worked or is working at {institution}"),
        t(Affiliation, Endorser, "The poster is endorsed by someone who worked or is working at {institution}"),
        t(CitationMetric, Poster, "Posted by someone who has around {citations} citations"),
        t(CitationMetric, Endorser, "The poster is endorsed by someone who has around {citations} citations"),
        t(PublicationMetric, Poster, "Posted by someone who has {publications} publications"),
        t(PublicationMetric, Endorser, "The poster is endorsed by someone who has {publications} publications"),
        t(CombinedMetrics, Poster, "Posted by someone who has around {citations} citations and {publications} publications"),
        t(CombinedMetrics, Endorser, "The poster is endorsed by someone who has around {citations} citations and {publications} publications"),
        t(Seniority, Poster, "Posted by {seniority}"),
        t(Seniority, Endorser, "The poster is endorsed by {seniority}"),
        t(VenueHistory, Poster, "Posted by someone who published before at {venue}"),
        t(VenueHistory, Endorser, "The poster is endorsed by someone who published before at {venue}"),
        t(VenuePubCount, Poster, "Posted by someone who has {count} publications at {venue}"),
        t(VenuePubCount, Endorser, "The poster is endorsed by someone who has {count} publications at {venue}"),
        t(VenueYear, Poster, "Posted by someone who published at {venue} {year}"),
        t(VenueYear, Endorser, "The poster is endorsed by someone who published at {venue} {year}"),
        t(Coauthorship, Poster, "Posted by someone who co-authored with {coauthor}"),
        t(Coauthorship, Endorser, "The poster is endorsed by their {relationship} who is someone that co-authored with {coauthor}"),
        t(CitedRelation, Poster, "The poster is someone who cited you before or someone you cited before"),
        t(CitedRelation, Endorser, "The poster is endorsed by someone who cited you before or you cited before"),
        t(CoauthorRelation, Poster, "The poster is someone you worked with before"),
        t(CoauthorRelation, Endorser, "The poster is endorsed by someone you worked with before"),
        t(FollowRelation, Poster, "The poster is someone who you follow or who follows you on {platform}"),
        t(FollowRelation, Endorser, "The poster is endorsed by someone who you follow or who follows you on {platform}"),
    ]
};

pub fn template_for(kind: SignalKind, subject: Subject) -> &'static str {
    TEMPLATES
        .iter()
        .find(|entry| entry.kind == kind && entry.subject == subject)
        .map(|entry| entry.template)
        .expect("template catalog covers every kind and subject")
}

/// Renders a signal to its canonical sentence.
pub fn render_signal(signal: &IdentitySignal) -> String {
    let mut out = template_for(signal.kind(), signal.subject).to_owned();
    for (key, value) in signal.payload.placeholders() {
        out = out.replace(&format!("{{{key}}}"), &value);
    }
    out
}

/// Who is being described: enough to derive their signals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Persona {
    pub full_name: String,
    pub handle: String,
    pub seniority: Seniority,
    /// Present only for an approved profile claim.
    pub author_id: Option<AuthorId>,
}

/// What an active endorsement grants the endorsee.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndorserGrant {
    pub endorser: Persona,
    pub relationship: RelationshipCategory,
    pub name_reveal_allowed: bool,
    /// The endorsee's own profile and name, never listed among the endorser's
    /// coauthors since that would name the poster.
    pub endorsee_author_id: Option<AuthorId>,
    pub endorsee_name: String,
}

fn profile_signals(snapshot: &CorpusSnapshot, author_id: &AuthorId) -> Result<Vec<SignalPayload>, SignalError> {
    let record = snapshot.author(author_id)?;
    let metrics = snapshot.author_metrics(author_id)?;
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    for institution in &record.affiliations {
        let institution = institution.trim();
        if !institution.is_empty() && seen.insert(institution.to_owned()) {
            out.push(SignalPayload::Affiliation {
                institution: institution.to_owned(),
            });
        }
    }

    if let Some(bucket) = PublicationBucket::from_count(metrics.publication_count) {
        let around = citation_bucket(metrics.citation_count);
        out.push(SignalPayload::CitationMetric { around });
        out.push(SignalPayload::PublicationMetric { bucket });
        out.push(SignalPayload::CombinedMetrics { around, bucket });
    }

    for (venue, &count) in &metrics.venue_counts {
        out.push(SignalPayload::VenueHistory {
            venue: venue.clone(),
        });
        if count >= 2 {
            out.push(SignalPayload::VenuePubCount {
                venue: venue.clone(),
                count,
            });
        }
        if let Some(&year) = metrics.venue_years.get(venue).and_then(|y| y.last()) {
            out.push(SignalPayload::VenueYear {
                venue: venue.clone(),
                year,
            });
        }
    }

    let coauthors: BTreeSet<&str> = metrics
        .coauthor_ids
        .iter()
        .filter_map(|id| snapshot.author(id).ok())
        .map(|a| a.full_name.as_str())
        .collect();
    for coauthor in coauthors {
        out.push(SignalPayload::Coauthorship {
            coauthor: coauthor.to_owned(),
            relationship: None,
        });
    }
    Ok(out)
}

/// Self-descriptive signals available to a poster, in catalog order.
///
/// Without a claimed profile only the name/handle and the declared seniority
/// are available.
pub fn derive_self_signals(
    snapshot: &CorpusSnapshot,
    persona: &Persona,
) -> Result<Vec<IdentitySignal>, SignalError> {
    let mut out = vec![
        IdentitySignal::poster(SignalPayload::Name {
            full_name: persona.full_name.clone(),
            handle: persona.handle.clone(),
            relationship: None,
        }),
        IdentitySignal::poster(SignalPayload::Seniority {
            level: persona.seniority,
        }),
    ];
    if let Some(author_id) = &persona.author_id {
        out.extend(
            profile_signals(snapshot, author_id)?
                .into_iter()
                .map(IdentitySignal::poster),
        );
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// The endorser's self-descriptive signals as the endorsee may show them.
pub fn derive_endorser_signals(
    snapshot: &CorpusSnapshot,
    grant: Option<&EndorserGrant>,
) -> Result<Vec<IdentitySignal>, SignalError> {
    let grant = grant.ok_or(SignalError::NoActiveEndorsement)?;
    let relationship = Some(grant.relationship);
    let endorsee_coauthor_name = grant
        .endorsee_author_id
        .as_ref()
        .and_then(|id| snapshot.author(id).ok())
        .map(|a| a.full_name.clone());

    let mut out = vec![
        IdentitySignal::endorser(SignalPayload::Relationship {
            relationship: grant.relationship,
        }),
        IdentitySignal::endorser(SignalPayload::Seniority {
            level: grant.endorser.seniority,
        }),
    ];
    if grant.name_reveal_allowed {
        out.push(IdentitySignal::endorser(SignalPayload::Name {
            full_name: grant.endorser.full_name.clone(),
            handle: grant.endorser.handle.clone(),
            relationship,
        }));
    }
    if let Some(author_id) = &grant.endorser.author_id {
        for payload in profile_signals(snapshot, author_id)? {
            let payload = match payload {
                SignalPayload::Coauthorship { coauthor, .. } => {
                    if coauthor == grant.endorsee_name
                        || Some(&coauthor) == endorsee_coauthor_name.as_ref()
                    {
                        continue;
                    }
                    SignalPayload::Coauthorship {
                        coauthor,
                        relationship,
                    }
                }
                other => other,
            };
            out.push(IdentitySignal::endorser(payload));
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn relations_with_expert(
    snapshot: &CorpusSnapshot,
    subject: Subject,
    persona: &Persona,
    expert: &AuthorId,
    expert_handle: Option<&str>,
    platform_label: &str,
) -> Result<Vec<IdentitySignal>, SignalError> {
    if persona.author_id.as_ref() == Some(expert) {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    if let Some(author_id) = &persona.author_id {
        let metrics = snapshot.author_metrics(author_id)?;
        if metrics.cited_author_ids.contains(expert) || metrics.citing_author_ids.contains(expert) {
            out.push(SignalPayload::CitedRelation);
        }
        if metrics.coauthor_ids.contains(expert) {
            out.push(SignalPayload::CoauthorRelation);
        }
    }
    if let Some(expert_handle) = expert_handle {
        if snapshot
            .follow_graph()
            .either_follows(&persona.handle, expert_handle)
        {
            out.push(SignalPayload::FollowRelation {
                platform: platform_label.to_owned(),
            });
        }
    }
    Ok(out
        .into_iter()
        .map(|payload| IdentitySignal { subject, payload })
        .collect())
}

/// Relational signals between the poster (and their endorser, when the grant
/// is present) and one expert. Only ever disclosed to that expert.
pub fn derive_relational_signals(
    snapshot: &CorpusSnapshot,
    poster: &Persona,
    grant: Option<&EndorserGrant>,
    expert: &AuthorId,
    platform_label: &str,
) -> Result<Vec<IdentitySignal>, SignalError> {
    let expert_handle = snapshot.author(expert)?.handle.clone();
    let mut out = relations_with_expert(
        snapshot,
        Subject::Poster,
        poster,
        expert,
        expert_handle.as_deref(),
        platform_label,
    )?;
    if let Some(grant) = grant {
        out.extend(relations_with_expert(
            snapshot,
            Subject::Endorser,
            &grant.endorser,
            expert,
            expert_handle.as_deref(),
            platform_label,
        )?);
    }
    Ok(out)
}
