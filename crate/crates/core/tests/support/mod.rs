//! Shared fixtures for integration tests: seeded random corpora and a
//! brute-force anonymity oracle that works from raw records only.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use meronym_core::clock::ManualClock;
use meronym_core::corpus::{AuthorRecord, CorpusSnapshot, Publication};
use meronym_core::ids::{AuthorId, PubId, UserId};
use meronym_core::signals::{IdentitySignal, Seniority, SignalPayload, Subject};
use meronym_core::{Service, ServiceConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const VENUES: &[&str] = &["CHI", "chi", " CHI ", "UIST", "CSCW", "NeurIPS", "FAccT", "uist"];
pub const INSTITUTIONS: &[&str] = &["MIT", "Stanford", "Hogwarts University", "Ravenclaw AI Lab", "ETH Zurich", "KAIST"];
const GIVEN: &[&str] = &["Ada", "Alan", "Grace", "Edsger", "Barbara", "Donald", "Frances", "Tony"];
const FAMILY: &[&str] = &["Lovelace", "Turing", "Hopper", "Dijkstra", "Liskov", "Knuth", "Allen", "Hoare"];

pub fn start_time() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2024-03-01T12:00:00Z")
        .unwrap()
        .with_timezone(&Utc)
}

#[derive(Debug, Clone)]
pub struct RawCorpus {
    pub publications: Vec<Publication>,
    pub authors: Vec<AuthorRecord>,
    pub follows: Vec<(String, String)>,
}

impl RawCorpus {
    pub fn snapshot(&self) -> CorpusSnapshot {
        CorpusSnapshot::build(self.publications.clone(), self.authors.clone(), self.follows.clone())
            .expect("generated corpus is valid")
    }
}

/// A random corpus. With `unique_names` every author gets a distinct name
/// that is not a substring of any other; otherwise names repeat.
pub fn random_corpus(rng: &mut ChaCha8Rng, n_authors: usize, unique_names: bool) -> RawCorpus {
    let authors: Vec<AuthorRecord> = (0..n_authors)
        .map(|i| {
            let full_name = if unique_names {
                format!("{}{i:04}x {}{i:04}x", GIVEN[i % GIVEN.len()], FAMILY[(i / GIVEN.len()) % FAMILY.len()])
            } else {
                format!("{} {}", GIVEN.choose(rng).unwrap(), FAMILY.choose(rng).unwrap())
            };
            let n_aff = rng.gen_range(0..=2);
            let affiliations = INSTITUTIONS
                .choose_multiple(rng, n_aff)
                .map(|s| s.to_string())
                .collect();
            AuthorRecord {
                author_id: AuthorId::new(format!("r{i:04}")),
                full_name,
                affiliations,
                publication_ids: Vec::new(),
                handle: rng.gen_bool(0.8).then(|| format!("@h{i:04}")),
            }
        })
        .collect();

    // Skewed authorship so that some authors publish a lot.
    let weights: Vec<f64> = (0..n_authors).map(|i| 1.0 / (1.0 + (i % 37) as f64)).collect();
    let dist = rand::distributions::WeightedIndex::new(&weights).unwrap();
    let n_pubs = if n_authors == 0 { 0 } else { rng.gen_range(n_authors / 2..=n_authors * 2) };
    let mut publications: Vec<Publication> = Vec::with_capacity(n_pubs);
    for p in 0..n_pubs {
        let mut ids = BTreeSet::new();
        let want = rng.gen_range(1..=4.min(n_authors));
        while ids.len() < want {
            let idx = if rng.gen_bool(0.7) { rng.sample(&dist) } else { rng.gen_range(0..n_authors) };
            ids.insert(idx);
        }
        let mut author_ids: Vec<AuthorId> = ids.into_iter().map(|i| authors[i].author_id.clone()).collect();
        author_ids.shuffle(rng);
        let n_cites = if p == 0 { 0 } else { rng.gen_range(0..=5.min(p)) };
        let cites: BTreeSet<usize> = (0..n_cites).map(|_| rng.gen_range(0..p)).collect();
        publications.push(Publication {
            pub_id: PubId::new(format!("x{p:05}")),
            title: format!("Paper {p}"),
            venue: VENUES.choose(rng).unwrap().to_string(),
            year: rng.gen_range(2000..=2024),
            author_ids,
            cites: cites.into_iter().map(|c| PubId::new(format!("x{c:05}"))).collect(),
        });
    }

    let handles: Vec<&String> = authors.iter().filter_map(|a| a.handle.as_ref()).collect();
    let mut follows = BTreeSet::new();
    if handles.len() > 1 {
        for _ in 0..n_authors {
            let a = handles.choose(rng).unwrap();
            let b = handles.choose(rng).unwrap();
            if a != b {
                follows.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    RawCorpus {
        publications,
        authors,
        follows: follows.into_iter().collect(),
    }
}

/// Independent per-author predicate scan over raw records.
pub struct Oracle<'a> {
    raw: &'a RawCorpus,
    pubs_of: HashMap<&'a AuthorId, Vec<&'a Publication>>,
    venue_of: HashMap<&'a PubId, String>,
    incoming: HashMap<&'a PubId, u64>,
    names: HashMap<&'a AuthorId, &'a str>,
    records: HashMap<&'a AuthorId, &'a AuthorRecord>,
    coauthors: HashMap<&'a AuthorId, BTreeSet<&'a AuthorId>>,
    declared: BTreeMap<AuthorId, Seniority>,
    reference_year: i32,
}

fn venue_norm(label: &str) -> String {
    label.trim().to_lowercase()
}

/// 5, 10, 25, 50, 100, 250, ... as far as u64 allows.
pub fn ladder() -> Vec<u64> {
    let mut out = Vec::new();
    let mut scale: u64 = 1;
    loop {
        for base in [5u64, 10, 25] {
            match scale.checked_mul(base) {
                Some(v) => out.push(v),
                None => return out,
            }
        }
        match scale.checked_mul(10) {
            Some(s) => scale = s,
            None => return out,
        }
    }
}

/// Nearest rung, ties toward the smaller rung.
pub fn nearest_rung(count: u64) -> u64 {
    ladder()
        .into_iter()
        .min_by_key(|&r| (r.abs_diff(count), r))
        .unwrap()
}

impl<'a> Oracle<'a> {
    pub fn new(raw: &'a RawCorpus, declared: BTreeMap<AuthorId, Seniority>, reference_year: i32) -> Self {
        let mut pubs_of: HashMap<&AuthorId, Vec<&Publication>> = HashMap::new();
        let mut venue_of = HashMap::new();
        let mut incoming: HashMap<&PubId, u64> = HashMap::new();
        for p in &raw.publications {
            for a in &p.author_ids {
                pubs_of.entry(a).or_default().push(p);
            }
            venue_of.insert(&p.pub_id, venue_norm(&p.venue));
            for c in &p.cites {
                *incoming.entry(c).or_default() += 1;
            }
        }
        let names = raw.authors.iter().map(|a| (&a.author_id, a.full_name.as_str())).collect();
        let records = raw.authors.iter().map(|a| (&a.author_id, a)).collect();
        let mut coauthors: HashMap<&AuthorId, BTreeSet<&AuthorId>> = HashMap::new();
        for p in &raw.publications {
            for a in &p.author_ids {
                let set = coauthors.entry(a).or_default();
                set.extend(p.author_ids.iter().filter(|b| *b != a));
            }
        }
        Self {
            raw,
            pubs_of,
            venue_of,
            incoming,
            names,
            records,
            coauthors,
            declared,
            reference_year,
        }
    }

    fn pubs(&self, author: &AuthorId) -> &[&'a Publication] {
        self.pubs_of.get(author).map(Vec::as_slice).unwrap_or(&[])
    }

    fn coauthors(&self, author: &AuthorId) -> impl Iterator<Item = &'a AuthorId> + '_ {
        self.coauthors.get(author).into_iter().flatten().copied()
    }

    fn citations(&self, author: &AuthorId) -> u64 {
        self.pubs(author)
            .iter()
            .map(|p| self.incoming.get(&p.pub_id).copied().unwrap_or(0))
            .sum()
    }

    fn pub_bucket(count: usize) -> Option<&'static str> {
        match count {
            0 => None,
            1..=5 => Some("1 to 5"),
            6..=15 => Some("6 to 15"),
            _ => Some("more than 15"),
        }
    }

    fn seniority(&self, author: &AuthorId) -> Seniority {
        if let Some(s) = self.declared.get(author) {
            return *s;
        }
        let pubs = self.pubs(author);
        let first = pubs.iter().map(|p| p.year).min();
        if first.is_some_and(|y| self.reference_year - y >= 8) || pubs.len() > 15 {
            Seniority::Senior
        } else {
            Seniority::Junior
        }
    }

    fn self_match(&self, author: &AuthorId, payload: &SignalPayload) -> bool {
        let record = self.records[author];
        let pubs = self.pubs(author);
        let same_venue = |p: &Publication, venue: &str| self.venue_of[&p.pub_id] == venue_norm(venue);
        let at_venue = |venue: &str| pubs.iter().filter(|p| same_venue(p, venue)).count();
        match payload {
            SignalPayload::Name { full_name, .. } => &record.full_name == full_name,
            SignalPayload::Relationship { .. } => true,
            SignalPayload::Affiliation { institution } => {
                record.affiliations.iter().any(|a| a.trim() == institution.trim())
            }
            SignalPayload::CitationMetric { around } => nearest_rung(self.citations(author)) == *around,
            SignalPayload::PublicationMetric { bucket } => {
                Self::pub_bucket(pubs.len()) == Some(bucket.phrase())
            }
            SignalPayload::CombinedMetrics { around, bucket } => {
                nearest_rung(self.citations(author)) == *around
                    && Self::pub_bucket(pubs.len()) == Some(bucket.phrase())
            }
            SignalPayload::Seniority { level } => self.seniority(author) == *level,
            SignalPayload::VenueHistory { venue } => at_venue(venue) >= 1,
            SignalPayload::VenuePubCount { venue, count } => at_venue(venue) == *count as usize,
            SignalPayload::VenueYear { venue, year } => {
                pubs.iter().any(|p| same_venue(p, venue) && p.year == *year)
            }
            SignalPayload::Coauthorship { coauthor, .. } => self
                .coauthors(author)
                .any(|c| self.names.get(c).is_some_and(|n| n == coauthor)),
            SignalPayload::CitedRelation | SignalPayload::CoauthorRelation | SignalPayload::FollowRelation { .. } => {
                false
            }
        }
    }

    pub fn holds(&self, author: &AuthorId, signal: &IdentitySignal) -> bool {
        match signal.subject {
            Subject::Poster => self.self_match(author, &signal.payload),
            Subject::Endorser => self
                .coauthors(author)
                .any(|c| self.self_match(c, &signal.payload)),
        }
    }

    /// Number of authors satisfying every signal.
    pub fn count(&self, signals: &[IdentitySignal]) -> usize {
        self.raw
            .authors
            .iter()
            .filter(|a| signals.iter().all(|s| self.holds(&a.author_id, s)))
            .count()
    }
}

pub fn manual_service(snapshot: CorpusSnapshot, config: ServiceConfig) -> (Service, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(start_time()));
    (Service::new(config, snapshot, clock.clone()), clock)
}

/// Registers and verifies an account, claiming `author` when given.
pub fn enabled_user(svc: &Service, name: &str, handle: &str, author: Option<&AuthorId>, seniority: Seniority) -> UserId {
    let reg = svc.register(name, handle, None, seniority).unwrap();
    let id = reg.account.user_id;
    svc.verify(&id, &reg.verification_token).unwrap();
    if let Some(author) = author {
        svc.claim(&id, author.as_str()).unwrap();
        svc.approve_claim(&id).unwrap();
    }
    id
}

/// A random string of words; never blank.
pub fn random_words(rng: &mut ChaCha8Rng, words: usize) -> String {
    const POOL: &[&str] = &["trust", "models", "how", "do", "people", "study", "fairness", "any", "papers", "on", "AI", "explanations", "field", "lab"];
    (0..words.max(1))
        .map(|_| *POOL.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}
