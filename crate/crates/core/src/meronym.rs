//! Meronym composition and de-anonymization audit.
//!
//! The audit counts how many corpus authors are consistent with every public
//! signal of a meronym. Each signal becomes a set of matching authors, built
//! from the snapshot's precomputed metrics; the anonymity set is the
//! intersection of those sets.
//!
//! The corpus holds no endorsement records, so endorser-side signals are
//! checked against each candidate's coauthors: a candidate matches when at
//! least one coauthor satisfies the corresponding self-descriptive predicate.
//! This is a proxy and can under-count a real poster whose endorser never
//! published with them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AuthorMetrics, CorpusSnapshot};
use crate::ids::AuthorId;
use crate::signals::{
    citation_bucket, suggest_seniority, IdentitySignal, PublicationBucket, Seniority, SignalKind,
    SignalPayload, Subject,
};

pub const DEFAULT_K_THRESHOLD: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeronymError {
    #[error("relational signal cannot appear in a public meronym: {0}")]
    RelationalSignalInPublicMeronym(String),
    #[error("signal is not available to this account: {0}")]
    UnownedSignal(String),
}

impl MeronymError {
    pub fn code(&self) -> &'static str {
        match self {
            MeronymError::RelationalSignalInPublicMeronym(_) => "RelationalSignalInPublicMeronym",
            MeronymError::UnownedSignal(_) => "UnownedSignal",
        }
    }
}

/// An ordered selection of public identity signals and their rendered lines.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Meronym {
    signals: Vec<IdentitySignal>,
    rendered_lines: Vec<String>,
    #[serde(default)]
    anonymity_k: Option<usize>,
}

impl Meronym {
    /// The empty meronym: a fully anonymous post.
    pub fn anonymous() -> Self {
        Self::default()
    }

    /// Validates and orders a selection. Every selected signal must appear in
    /// `available` (what the signals module derived for this account).
    pub fn compose(
        selected: &[IdentitySignal],
        available: &[IdentitySignal],
    ) -> Result<Self, MeronymError> {
        for signal in selected {
            if signal.is_relational() {
                return Err(MeronymError::RelationalSignalInPublicMeronym(signal.render()));
            }
            if !available.contains(signal) {
                return Err(MeronymError::UnownedSignal(signal.render()));
            }
        }
        let ordered: BTreeSet<IdentitySignal> = selected.iter().cloned().collect();
        let signals: Vec<IdentitySignal> = ordered.into_iter().collect();
        let rendered_lines = signals.iter().map(IdentitySignal::render).collect();
        Ok(Self {
            signals,
            rendered_lines,
            anonymity_k: None,
        })
    }

    pub fn signals(&self) -> &[IdentitySignal] {
        &self.signals
    }

    pub fn rendered_lines(&self) -> &[String] {
        &self.rendered_lines
    }

    pub fn is_anonymous(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn anonymity_k(&self) -> Option<usize> {
        self.anonymity_k
    }

    pub fn set_anonymity_k(&mut self, k: usize) {
        self.anonymity_k = Some(k);
    }

    /// True when the poster's own name is public.
    pub fn reveals_poster_name(&self) -> bool {
        self.signals
            .iter()
            .any(|s| s.subject == Subject::Poster && s.kind() == SignalKind::Name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RiskVerdict {
    Safe,
    Risky,
}

/// Advisory only: a Risky verdict never blocks posting.
pub fn risk_warning(k: usize, threshold: usize) -> RiskVerdict {
    if k < threshold {
        RiskVerdict::Risky
    } else {
        RiskVerdict::Safe
    }
}

/// Seniority of corpus authors for the audit: the declared value when an
/// account has claimed the profile, otherwise the advisory suggestion.
#[derive(Debug, Clone, Default)]
pub struct SeniorityLookup {
    pub declared: BTreeMap<AuthorId, Seniority>,
    pub reference_year: i32,
}

impl SeniorityLookup {
    pub fn suggested_only(reference_year: i32) -> Self {
        Self {
            declared: BTreeMap::new(),
            reference_year,
        }
    }

    pub fn resolve(&self, author: &AuthorId, metrics: &AuthorMetrics) -> Seniority {
        self.declared
            .get(author)
            .copied()
            .unwrap_or_else(|| suggest_seniority(metrics, self.reference_year))
    }
}

/// Per-signal lookups resolved once before scanning authors.
struct Prepared<'a> {
    venue: Option<&'a str>,
    coauthor_ids: BTreeSet<&'a AuthorId>,
}

impl<'a> Prepared<'a> {
    fn new(snapshot: &'a CorpusSnapshot, payload: &SignalPayload) -> Self {
        let venue = match payload {
            SignalPayload::VenueHistory { venue }
            | SignalPayload::VenuePubCount { venue, .. }
            | SignalPayload::VenueYear { venue, .. } => snapshot.canonical_venue(venue),
            _ => None,
        };
        let coauthor_ids = match payload {
            SignalPayload::Coauthorship { coauthor, .. } => snapshot
                .authors()
                .filter(|a| a.full_name == *coauthor)
                .map(|a| &a.author_id)
                .collect(),
            _ => BTreeSet::new(),
        };
        Self { venue, coauthor_ids }
    }
}

/// Whether one author, on their own record, satisfies a self-descriptive
/// predicate.
fn self_predicate(
    snapshot: &CorpusSnapshot,
    seniority: &SeniorityLookup,
    prepared: &Prepared<'_>,
    author: &AuthorId,
    payload: &SignalPayload,
) -> bool {
    let Ok(metrics) = snapshot.author_metrics(author) else {
        return false;
    };
    let Ok(record) = snapshot.author(author) else {
        return false;
    };
    let venue_count = || {
        prepared
            .venue
            .and_then(|label| metrics.venue_counts.get(label))
            .copied()
            .unwrap_or(0)
    };
    match payload {
        SignalPayload::Name { full_name, .. } => record.full_name == *full_name,
        SignalPayload::Relationship { .. } => true,
        SignalPayload::Affiliation { institution } => record
            .affiliations
            .iter()
            .any(|a| a.trim() == institution.trim()),
        SignalPayload::CitationMetric { around } => citation_bucket(metrics.citation_count) == *around,
        SignalPayload::PublicationMetric { bucket } => {
            PublicationBucket::from_count(metrics.publication_count) == Some(*bucket)
        }
        SignalPayload::CombinedMetrics { around, bucket } => {
            citation_bucket(metrics.citation_count) == *around
                && PublicationBucket::from_count(metrics.publication_count) == Some(*bucket)
        }
        SignalPayload::Seniority { level } => seniority.resolve(author, metrics) == *level,
        SignalPayload::VenueHistory { .. } => venue_count() >= 1,
        SignalPayload::VenuePubCount { count, .. } => venue_count() == *count,
        SignalPayload::VenueYear { year, .. } => prepared
            .venue
            .and_then(|label| metrics.venue_years.get(label))
            .is_some_and(|years| years.contains(year)),
        SignalPayload::Coauthorship { .. } => metrics
            .coauthor_ids
            .iter()
            .any(|id| prepared.coauthor_ids.contains(id)),
        SignalPayload::CitedRelation
        | SignalPayload::CoauthorRelation
        | SignalPayload::FollowRelation { .. } => false,
    }
}

/// Authors consistent with one signal.
pub fn signal_match_set(
    snapshot: &CorpusSnapshot,
    seniority: &SeniorityLookup,
    signal: &IdentitySignal,
) -> BTreeSet<AuthorId> {
    let prepared = Prepared::new(snapshot, &signal.payload);
    let direct: BTreeSet<AuthorId> = snapshot
        .authors()
        .map(|a| &a.author_id)
        .filter(|id| self_predicate(snapshot, seniority, &prepared, id, &signal.payload))
        .cloned()
        .collect();
    match signal.subject {
        Subject::Poster => direct,
        // Anyone who coauthored with a matching author could be endorsed by them.
        Subject::Endorser => direct
            .iter()
            .filter_map(|id| snapshot.author_metrics(id).ok())
            .flat_map(|m| m.coauthor_ids.iter().cloned())
            .collect(),
    }
}

/// The anonymity set: authors consistent with every signal.
pub fn anonymity_set(
    snapshot: &CorpusSnapshot,
    seniority: &SeniorityLookup,
    signals: &[IdentitySignal],
) -> BTreeSet<AuthorId> {
    let mut current: Option<BTreeSet<AuthorId>> = None;
    for signal in signals {
        if signal.is_relational() {
            continue;
        }
        let matches = signal_match_set(snapshot, seniority, signal);
        current = Some(match current {
            None => matches,
            Some(acc) => acc.intersection(&matches).cloned().collect(),
        });
        if current.as_ref().is_some_and(BTreeSet::is_empty) {
            break;
        }
    }
    current.unwrap_or_else(|| snapshot.authors().map(|a| a.author_id.clone()).collect())
}

pub fn anonymity_set_size(
    snapshot: &CorpusSnapshot,
    seniority: &SeniorityLookup,
    meronym: &Meronym,
) -> usize {
    anonymity_set(snapshot, seniority, meronym.signals()).len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateReport {
    pub line: String,
    pub matches: usize,
    /// Seniority is self-declared and cannot be checked against the corpus.
    pub unverified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub k: usize,
    pub threshold: usize,
    pub verdict: RiskVerdict,
    pub predicates: Vec<PredicateReport>,
}

impl AuditReport {
    /// Stable line-oriented rendering used by the CLI.
    pub fn lines(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .predicates
            .iter()
            .map(|p| {
                let flag = if p.unverified { " (unverified)" } else { "" };
                format!("predicate: {} => {}{}", p.line, p.matches, flag)
            })
            .collect();
        out.push(format!("k: {}", self.k));
        out.push(format!(
            "verdict: {}",
            match self.verdict {
                RiskVerdict::Safe => "Safe",
                RiskVerdict::Risky => "Risky",
            }
        ));
        out
    }
}

pub fn audit(
    snapshot: &CorpusSnapshot,
    seniority: &SeniorityLookup,
    meronym: &Meronym,
    threshold: usize,
) -> AuditReport {
    let predicates = meronym
        .signals()
        .iter()
        .map(|signal| PredicateReport {
            line: signal.render(),
            matches: signal_match_set(snapshot, seniority, signal).len(),
            unverified: signal.kind() == SignalKind::Seniority,
        })
        .collect();
    let k = anonymity_set_size(snapshot, seniority, meronym);
    AuditReport {
        k,
        threshold,
        verdict: risk_warning(k, threshold),
        predicates,
    }
}

/// Audits a raw signal list without ownership checks (admin tooling).
pub fn audit_signals(
    snapshot: &CorpusSnapshot,
    seniority: &SeniorityLookup,
    signals: &[IdentitySignal],
    threshold: usize,
) -> Result<AuditReport, MeronymError> {
    let meronym = Meronym::compose(signals, signals)?;
    Ok(audit(snapshot, seniority, &meronym, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AuthorRecord, Publication};
    use crate::signals::RelationshipCategory;

    fn poster(payload: SignalPayload) -> IdentitySignal {
        IdentitySignal::poster(payload)
    }

    /// Ten authors, four of whom published at CHI.
    fn ten_authors() -> CorpusSnapshot {
        let authors = (0..10)
            .map(|i| AuthorRecord {
                author_id: format!("a{i}").into(),
                full_name: format!("Person {i}"),
                affiliations: vec![if i % 2 == 0 { "MIT" } else { "CMU" }.into()],
                publication_ids: vec![],
                handle: None,
            })
            .collect();
        let venue = |i: usize| if i < 4 { "CHI" } else { "UIST" };
        let pubs = (0..10)
            .map(|i| Publication {
                pub_id: format!("p{i}").into(),
                title: "t".into(),
                venue: venue(i).into(),
                year: 2020,
                author_ids: vec![format!("a{i}").into()],
                cites: vec![],
            })
            .collect();
        CorpusSnapshot::build(pubs, authors, vec![]).unwrap()
    }

    #[test]
    fn empty_meronym_matches_everyone() {
        let snap = ten_authors();
        let lookup = SeniorityLookup::suggested_only(2024);
        assert_eq!(anonymity_set_size(&snap, &lookup, &Meronym::anonymous()), 10);
    }

    #[test]
    fn venue_history_counts_venue_publishers() {
        let snap = ten_authors();
        let lookup = SeniorityLookup::suggested_only(2024);
        let m = Meronym::compose(
            &[poster(SignalPayload::VenueHistory { venue: "CHI".into() })],
            &[poster(SignalPayload::VenueHistory { venue: "CHI".into() })],
        )
        .unwrap();
        assert_eq!(anonymity_set_size(&snap, &lookup, &m), 4);
    }

    #[test]
    fn unique_name_gives_k_one() {
        let snap = ten_authors();
        let lookup = SeniorityLookup::suggested_only(2024);
        let name = poster(SignalPayload::Name {
            full_name: "Person 3".into(),
            handle: "@p3".into(),
            relationship: None,
        });
        let report = audit_signals(&snap, &lookup, &[name], DEFAULT_K_THRESHOLD).unwrap();
        assert_eq!(report.k, 1);
        assert_eq!(report.verdict, RiskVerdict::Risky);
    }

    #[test]
    fn risk_boundaries() {
        assert_eq!(risk_warning(1, 5), RiskVerdict::Risky);
        assert_eq!(risk_warning(5, 5), RiskVerdict::Safe);
        assert_eq!(risk_warning(1000, 5), RiskVerdict::Safe);
    }

    #[test]
    fn compose_orders_by_catalog_and_rejects_relational() {
        let junior = poster(SignalPayload::Seniority { level: Seniority::Junior });
        let chi = poster(SignalPayload::VenueHistory { venue: "CHI".into() });
        let cites = poster(SignalPayload::CitationMetric { around: 25 });
        let endorser_cites = IdentitySignal::endorser(SignalPayload::CitationMetric { around: 500 });
        let available = vec![junior.clone(), chi.clone(), cites.clone(), endorser_cites.clone()];
        let m = Meronym::compose(
            &[endorser_cites.clone(), chi.clone(), junior.clone(), cites.clone()],
            &available,
        )
        .unwrap();
        assert_eq!(
            m.rendered_lines(),
            [
                "Posted by someone who has around 25 citations",
                "Posted by a junior student or researcher",
                "Posted by someone who published before at CHI",
                "The poster is endorsed by someone who has around 500 citations",
            ]
        );

        let relational = poster(SignalPayload::CitedRelation);
        assert!(matches!(
            Meronym::compose(&[relational.clone()], &[relational]),
            Err(MeronymError::RelationalSignalInPublicMeronym(_))
        ));
        assert!(matches!(
            Meronym::compose(&[junior], &[chi]),
            Err(MeronymError::UnownedSignal(_))
        ));
        assert_eq!(Meronym::compose(&[], &[]).unwrap().rendered_lines().len(), 0);
    }

    #[test]
    fn duplicate_selections_collapse() {
        let chi = poster(SignalPayload::VenueHistory { venue: "CHI".into() });
        let m = Meronym::compose(&[chi.clone(), chi.clone()], &[chi]).unwrap();
        assert_eq!(m.signals().len(), 1);
    }

    #[test]
    fn endorser_predicates_use_coauthors() {
        let authors = ["x", "y", "z"]
            .iter()
            .map(|id| AuthorRecord {
                author_id: (*id).into(),
                full_name: id.to_uppercase(),
                affiliations: vec![],
                publication_ids: vec![],
                handle: None,
            })
            .collect();
        let pubs = vec![
            Publication {
                pub_id: "p1".into(),
                title: "t".into(),
                venue: "CHI".into(),
                year: 2020,
                author_ids: vec!["x".into(), "y".into()],
                cites: vec![],
            },
            Publication {
                pub_id: "p2".into(),
                title: "t".into(),
                venue: "UIST".into(),
                year: 2020,
                author_ids: vec!["z".into()],
                cites: vec![],
            },
        ];
        let snap = CorpusSnapshot::build(pubs, authors, vec![]).unwrap();
        let lookup = SeniorityLookup::suggested_only(2024);
        let endorsed_by_chi = IdentitySignal::endorser(SignalPayload::VenueHistory { venue: "chi".into() });
        let set = signal_match_set(&snap, &lookup, &endorsed_by_chi);
        assert_eq!(set, ["x", "y"].into_iter().map(AuthorId::from).collect());
        let rel = IdentitySignal::endorser(SignalPayload::Relationship {
            relationship: RelationshipCategory::Advisor,
        });
        assert_eq!(signal_match_set(&snap, &lookup, &rel).len(), 2);
    }
}
