//! Scholarly corpus ingestion and per-author metrics.
//!
//! A [`CorpusSnapshot`] is built once from three line-delimited JSON streams
//! (publications, authors, follows) and never mutated afterwards. Re-ingestion
//! builds a fresh snapshot and publishes it through [`CorpusHandle::replace`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::normalize_handle;
use crate::ids::{AuthorId, PubId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Publications,
    Authors,
    Follows,
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stream::Publications => "publications",
            Stream::Authors => "authors",
            Stream::Follows => "follows",
        })
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{stream} line {line}: {reason}")]
    Parse {
        stream: Stream,
        line: usize,
        reason: String,
    },
    #[error("dangling reference to {kind} `{id}`")]
    DanglingReference { kind: &'static str, id: String },
    #[error("duplicate {kind} `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unknown author `{0}`")]
    UnknownAuthor(AuthorId),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::Parse { .. } => "ParseError",
            CorpusError::DanglingReference { .. } => "DanglingReference",
            CorpusError::DuplicateId { .. } => "DuplicateId",
            CorpusError::UnknownAuthor(_) => "UnknownAuthor",
            CorpusError::Io { .. } => "IoError",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub pub_id: PubId,
    pub title: String,
    pub venue: String,
    pub year: i32,
    pub author_ids: Vec<AuthorId>,
    #[serde(default)]
    pub cites: Vec<PubId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorRecord {
    pub author_id: AuthorId,
    pub full_name: String,
    #[serde(default)]
    pub affiliations: Vec<String>,
    /// Filled from the publications stream, ordered by (year, pub_id).
    #[serde(default, skip_deserializing)]
    pub publication_ids: Vec<PubId>,
    #[serde(default)]
    pub handle: Option<String>,
}

#[derive(Debug, Deserialize)]
struct FollowRecord {
    follower_handle: String,
    followee_handle: String,
}

/// Directed follow edges between normalized platform handles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FollowGraph {
    edges: BTreeSet<(String, String)>,
}

impl FollowGraph {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn follows(&self, follower: &str, followee: &str) -> bool {
        self.edges
            .contains(&(normalize_handle(follower), normalize_handle(followee)))
    }

    pub fn either_follows(&self, a: &str, b: &str) -> bool {
        self.follows(a, b) || self.follows(b, a)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuthorMetrics {
    pub author_id: AuthorId,
    pub citation_count: u64,
    pub publication_count: u32,
    /// Keyed by the canonical venue label.
    pub venue_counts: BTreeMap<String, u32>,
    pub venue_years: BTreeMap<String, BTreeSet<i32>>,
    pub coauthor_ids: BTreeSet<AuthorId>,
    pub cited_author_ids: BTreeSet<AuthorId>,
    pub citing_author_ids: BTreeSet<AuthorId>,
    pub first_pub_year: Option<i32>,
}

impl AuthorMetrics {
    fn empty(author_id: AuthorId) -> Self {
        Self {
            author_id,
            citation_count: 0,
            publication_count: 0,
            venue_counts: BTreeMap::new(),
            venue_years: BTreeMap::new(),
            coauthor_ids: BTreeSet::new(),
            cited_author_ids: BTreeSet::new(),
            citing_author_ids: BTreeSet::new(),
            first_pub_year: None,
        }
    }
}

/// Case-insensitive comparison key for venue labels.
pub fn venue_key(label: &str) -> String {
    label.trim().to_lowercase()
}

/// Immutable, fully indexed view of one ingested corpus.
#[derive(Debug, Clone, Default)]
pub struct CorpusSnapshot {
    publications: BTreeMap<PubId, Publication>,
    authors: BTreeMap<AuthorId, AuthorRecord>,
    follows: FollowGraph,
    metrics: BTreeMap<AuthorId, AuthorMetrics>,
    venue_labels: BTreeMap<String, String>,
    by_handle: BTreeMap<String, AuthorId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub authors: usize,
    pub publications: usize,
    pub follows: usize,
}

impl fmt::Display for CorpusSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "authors: {}, publications: {}, follows: {}",
            self.authors, self.publications, self.follows
        )
    }
}

impl CorpusSnapshot {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn summary(&self) -> CorpusSummary {
        CorpusSummary {
            authors: self.authors.len(),
            publications: self.publications.len(),
            follows: self.follows.len(),
        }
    }

    pub fn author(&self, id: &AuthorId) -> Result<&AuthorRecord, CorpusError> {
        self.authors
            .get(id)
            .ok_or_else(|| CorpusError::UnknownAuthor(id.clone()))
    }

    pub fn author_metrics(&self, id: &AuthorId) -> Result<&AuthorMetrics, CorpusError> {
        self.metrics
            .get(id)
            .ok_or_else(|| CorpusError::UnknownAuthor(id.clone()))
    }

    pub fn authors(&self) -> impl Iterator<Item = &AuthorRecord> {
        self.authors.values()
    }

    pub fn author_count(&self) -> usize {
        self.authors.len()
    }

    pub fn publication(&self, id: &PubId) -> Option<&Publication> {
        self.publications.get(id)
    }

    pub fn publications(&self) -> impl Iterator<Item = &Publication> {
        self.publications.values()
    }

    pub fn follow_graph(&self) -> &FollowGraph {
        &self.follows
    }

    pub fn author_by_handle(&self, handle: &str) -> Option<&AuthorRecord> {
        self.by_handle
            .get(&normalize_handle(handle))
            .and_then(|id| self.authors.get(id))
    }

    /// Canonical display label for a venue, if any publication uses it.
    pub fn canonical_venue(&self, label: &str) -> Option<&str> {
        self.venue_labels.get(&venue_key(label)).map(String::as_str)
    }

    /// Builds a snapshot from already-parsed records, enforcing every
    /// referential and uniqueness rule.
    pub fn build(
        publications: Vec<Publication>,
        authors: Vec<AuthorRecord>,
        follows: Vec<(String, String)>,
    ) -> Result<Self, CorpusError> {
        let mut author_map = BTreeMap::new();
        let mut by_handle = BTreeMap::new();
        for mut author in authors {
            author.publication_ids.clear();
            if let Some(handle) = &author.handle {
                let key = normalize_handle(handle);
                if by_handle.insert(key.clone(), author.author_id.clone()).is_some() {
                    return Err(CorpusError::DuplicateId {
                        kind: "handle",
                        id: key,
                    });
                }
            }
            let id = author.author_id.clone();
            if author_map.insert(id.clone(), author).is_some() {
                return Err(CorpusError::DuplicateId {
                    kind: "author",
                    id: id.to_string(),
                });
            }
        }

        let mut pub_map = BTreeMap::new();
        for publication in publications {
            for author in &publication.author_ids {
                if !author_map.contains_key(author) {
                    return Err(CorpusError::DanglingReference {
                        kind: "author",
                        id: author.to_string(),
                    });
                }
            }
            let id = publication.pub_id.clone();
            if pub_map.insert(id.clone(), publication).is_some() {
                return Err(CorpusError::DuplicateId {
                    kind: "publication",
                    id: id.to_string(),
                });
            }
        }
        for publication in pub_map.values() {
            for cited in &publication.cites {
                if !pub_map.contains_key(cited) {
                    return Err(CorpusError::DanglingReference {
                        kind: "publication",
                        id: cited.to_string(),
                    });
                }
            }
        }

        let mut edges = BTreeSet::new();
        for (follower, followee) in follows {
            edges.insert((normalize_handle(&follower), normalize_handle(&followee)));
        }

        let mut snapshot = CorpusSnapshot {
            publications: pub_map,
            authors: author_map,
            follows: FollowGraph { edges },
            metrics: BTreeMap::new(),
            venue_labels: BTreeMap::new(),
            by_handle,
        };
        snapshot.index();
        Ok(snapshot)
    }

    fn index(&mut self) {
        // First label seen (in pub_id order) becomes the canonical one.
        for publication in self.publications.values() {
            self.venue_labels
                .entry(venue_key(&publication.venue))
                .or_insert_with(|| publication.venue.trim().to_owned());
        }

        let mut incoming: HashMap<&PubId, u64> = HashMap::new();
        for publication in self.publications.values() {
            for cited in &publication.cites {
                *incoming.entry(cited).or_default() += 1;
            }
        }

        let mut metrics: BTreeMap<AuthorId, AuthorMetrics> = self
            .authors
            .keys()
            .map(|id| (id.clone(), AuthorMetrics::empty(id.clone())))
            .collect();

        let mut ordered: Vec<&Publication> = self.publications.values().collect();
        ordered.sort_by(|a, b| (a.year, &a.pub_id).cmp(&(b.year, &b.pub_id)));

        for publication in &ordered {
            let venue = self.venue_labels[&venue_key(&publication.venue)].clone();
            let received = incoming.get(&publication.pub_id).copied().unwrap_or(0);
            for author in &publication.author_ids {
                let m = metrics.get_mut(author).expect("author checked at build");
                m.publication_count += 1;
                m.citation_count += received;
                *m.venue_counts.entry(venue.clone()).or_default() += 1;
                m.venue_years
                    .entry(venue.clone())
                    .or_default()
                    .insert(publication.year);
                m.first_pub_year = Some(match m.first_pub_year {
                    Some(y) => y.min(publication.year),
                    None => publication.year,
                });
                for other in &publication.author_ids {
                    if other != author {
                        m.coauthor_ids.insert(other.clone());
                    }
                }
                self.authors
                    .get_mut(author)
                    .expect("author checked at build")
                    .publication_ids
                    .push(publication.pub_id.clone());
            }
        }

        for citing in self.publications.values() {
            for cited_id in &citing.cites {
                let cited = &self.publications[cited_id];
                for from in &citing.author_ids {
                    for to in &cited.author_ids {
                        if from == to {
                            continue;
                        }
                        metrics
                            .get_mut(from)
                            .expect("author checked at build")
                            .cited_author_ids
                            .insert(to.clone());
                        metrics
                            .get_mut(to)
                            .expect("author checked at build")
                            .citing_author_ids
                            .insert(from.clone());
                    }
                }
            }
        }
        self.metrics = metrics;
    }
}

fn parse_lines<T, R>(reader: R, stream: Stream) -> Result<Vec<(usize, T)>, CorpusError>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| CorpusError::Parse {
            stream,
            line: line_no,
            reason: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            stream,
            line: line_no,
            reason: e.to_string(),
        })?;
        out.push((line_no, record));
    }
    Ok(out)
}

fn parse_error(stream: Stream, line: usize, reason: impl Into<String>) -> CorpusError {
    CorpusError::Parse {
        stream,
        line,
        reason: reason.into(),
    }
}

/// Parses the three record streams and builds a snapshot.
///
/// Record-level invariants (non-empty author lists, no self-citation, no
/// self-follow, non-empty names) are reported as parse errors carrying the
/// offending line number.
pub fn ingest_corpus<P, A, F>(
    publications: P,
    authors: A,
    follows: F,
) -> Result<CorpusSnapshot, CorpusError>
where
    P: BufRead,
    A: BufRead,
    F: BufRead,
{
    let authors: Vec<(usize, AuthorRecord)> = parse_lines(authors, Stream::Authors)?;
    for (line, author) in &authors {
        if author.full_name.trim().is_empty() {
            return Err(parse_error(Stream::Authors, *line, "full_name is empty"));
        }
    }

    let publications: Vec<(usize, Publication)> =
        parse_lines(publications, Stream::Publications)?;
    for &(line, ref publication) in &publications {
        if publication.author_ids.is_empty() {
            return Err(parse_error(Stream::Publications, line, "author_ids is empty"));
        }
        let distinct: BTreeSet<_> = publication.author_ids.iter().collect();
        if distinct.len() != publication.author_ids.len() {
            return Err(parse_error(
                Stream::Publications,
                line,
                "author_ids contains duplicates",
            ));
        }
        if publication.cites.contains(&publication.pub_id) {
            return Err(parse_error(
                Stream::Publications,
                line,
                "publication cites itself",
            ));
        }
    }

    let records: Vec<(usize, FollowRecord)> = parse_lines(follows, Stream::Follows)?;
    let mut edges = Vec::with_capacity(records.len());
    for (line, record) in records {
        if normalize_handle(&record.follower_handle) == normalize_handle(&record.followee_handle) {
            return Err(parse_error(Stream::Follows, line, "self-follow edge"));
        }
        edges.push((record.follower_handle, record.followee_handle));
    }

    CorpusSnapshot::build(
        publications.into_iter().map(|(_, p)| p).collect(),
        authors.into_iter().map(|(_, a)| a).collect(),
        edges,
    )
}

/// Paths of the three corpus files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPaths {
    pub publications: PathBuf,
    pub authors: PathBuf,
    pub follows: PathBuf,
}

impl CorpusPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            publications: dir.join("publications.jsonl"),
            authors: dir.join("authors.jsonl"),
            follows: dir.join("follows.jsonl"),
        }
    }

    pub fn load(&self) -> Result<CorpusSnapshot, CorpusError> {
        let open = |path: &Path| {
            File::open(path)
                .map(BufReader::new)
                .map_err(|source| CorpusError::Io {
                    path: path.to_owned(),
                    source,
                })
        };
        ingest_corpus(
            open(&self.publications)?,
            open(&self.authors)?,
            open(&self.follows)?,
        )
    }
}

/// Shared pointer to the current snapshot. Readers clone the `Arc` and keep
/// using it even if a new snapshot is published meanwhile.
#[derive(Debug, Default)]
pub struct CorpusHandle {
    current: RwLock<Arc<CorpusSnapshot>>,
}

impl CorpusHandle {
    pub fn new(snapshot: CorpusSnapshot) -> Self {
        Self {
            current: RwLock::new(Arc::new(snapshot)),
        }
    }

    pub fn current(&self) -> Arc<CorpusSnapshot> {
        self.current.read().clone()
    }

    pub fn replace(&self, snapshot: CorpusSnapshot) -> Arc<CorpusSnapshot> {
        std::mem::replace(&mut *self.current.write(), Arc::new(snapshot))
    }
}
