//! Splitting a post into a reply thread under a platform character limit.
//!
//! Layout: body posts (greedy packing at word boundaries), then identity posts
//! (meronym lines, one per line, packed), then an optional mention post.
//! When body plus identity posts number more than one, each carries a
//! ` (i/n)` counter that counts toward the limit. Mention posts are not
//! counted since they can be appended after publication.
//!
//! Lengths are measured in Unicode scalar values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MENTION_SENTENCE: &str = "is knowledgeable on the topic of this question";
pub const ORIGINAL_POSTER_MARKER: &str = "This reply is from the original poster.";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ThreadError {
    #[error("post text is empty")]
    EmptyText,
    #[error("a token cannot be split to fit a {limit}-character post")]
    UnsplittableToken { limit: usize },
}

impl ThreadError {
    pub fn code(&self) -> &'static str {
        match self {
            ThreadError::EmptyText => "EmptyText",
            ThreadError::UnsplittableToken { .. } => "UnsplittableToken",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    Body,
    Identity,
    Mention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadPost {
    pub text: String,
    pub section: Section,
    /// The post ends mid-token with an added `-`.
    #[serde(default)]
    pub hyphenated: bool,
    #[serde(default)]
    pub counter: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostThread {
    pub platform: String,
    pub char_limit: usize,
    pub posts: Vec<ThreadPost>,
}

pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn counter_suffix(index: usize, total: usize) -> String {
    format!(" ({index}/{total})")
}

pub fn mention_line(handle: &str) -> String {
    format!("{handle} {MENTION_SENTENCE}")
}

impl PostThread {
    pub fn texts(&self) -> Vec<&str> {
        self.posts.iter().map(|p| p.text.as_str()).collect()
    }

    /// Recovers the source text from the body posts: counters and hyphens
    /// added by splitting are removed and the pieces concatenated.
    pub fn body_text(&self) -> String {
        let mut out = String::new();
        for post in self.posts.iter().filter(|p| p.section == Section::Body) {
            let mut text = post.text.as_str();
            if let Some((i, n)) = post.counter {
                text = text
                    .strip_suffix(&counter_suffix(i, n))
                    .expect("counter suffix present");
            }
            if post.hyphenated {
                text = text.strip_suffix('-').expect("hyphen present");
            }
            out.push_str(text);
        }
        out
    }

    /// Appends mention posts for newly enlisted experts and returns them.
    pub fn append_mentions(&mut self, handles: &[String]) -> Result<Vec<ThreadPost>, ThreadError> {
        let lines: Vec<String> = handles.iter().map(|h| mention_line(h)).collect();
        let new_posts: Vec<ThreadPost> = pack_lines(&lines, self.char_limit)?
            .into_iter()
            .map(|(text, hyphenated)| ThreadPost {
                text,
                section: Section::Mention,
                hyphenated,
                counter: None,
            })
            .collect();
        self.posts.extend(new_posts.iter().cloned());
        Ok(new_posts)
    }
}

/// Greedy packing of `text` into pieces of at most `avail` characters. Pieces
/// concatenate back to `text` once the hyphen on hyphenated pieces is dropped.
pub fn pack_text(text: &str, avail: usize) -> Result<Vec<(String, bool)>, ThreadError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        if chars.len() - pos <= avail {
            out.push((chars[pos..].iter().collect(), false));
            break;
        }
        let window = (pos + 1)..=(pos + avail);
        let clean = window
            .clone()
            .rev()
            .find(|&p| chars[p - 1].is_whitespace() && !chars[p].is_whitespace());
        let any = || {
            window
                .clone()
                .rev()
                .find(|&p| chars[p - 1].is_whitespace() || chars[p].is_whitespace())
        };
        match clean.or_else(any) {
            Some(cut) => {
                out.push((chars[pos..cut].iter().collect(), false));
                pos = cut;
            }
            None => {
                if avail < 2 {
                    return Err(ThreadError::UnsplittableToken { limit: avail });
                }
                let cut = pos + avail - 1;
                let mut piece: String = chars[pos..cut].iter().collect();
                piece.push('-');
                out.push((piece, true));
                pos = cut;
            }
        }
    }
    Ok(out)
}

/// Packs whole lines into posts joined by newlines; a line longer than
/// `avail` is split on its own.
fn pack_lines(lines: &[String], avail: usize) -> Result<Vec<(String, bool)>, ThreadError> {
    let mut out = Vec::new();
    let mut current = String::new();
    for line in lines {
        let len = char_len(line);
        if len > avail {
            if !current.is_empty() {
                out.push((std::mem::take(&mut current), false));
            }
            out.extend(pack_text(line, avail)?);
        } else if current.is_empty() {
            current = line.clone();
        } else if char_len(&current) + 1 + len <= avail {
            current.push('\n');
            current.push_str(line);
        } else {
            out.push((std::mem::replace(&mut current, line.clone()), false));
        }
    }
    if !current.is_empty() {
        out.push((current, false));
    }
    Ok(out)
}

fn layout(
    text: &str,
    identity_lines: &[String],
    avail: usize,
) -> Result<Vec<(String, Section, bool)>, ThreadError> {
    if avail == 0 {
        return Err(ThreadError::UnsplittableToken { limit: avail });
    }
    let mut parts: Vec<(String, Section, bool)> = pack_text(text, avail)?
        .into_iter()
        .map(|(t, h)| (t, Section::Body, h))
        .collect();
    parts.extend(
        pack_lines(identity_lines, avail)?
            .into_iter()
            .map(|(t, h)| (t, Section::Identity, h)),
    );
    Ok(parts)
}

/// Renders a post and its identity lines into a thread for one platform.
pub fn render_thread(
    text: &str,
    identity_lines: &[String],
    platform: &str,
    char_limit: usize,
    mentions: &[String],
) -> Result<PostThread, ThreadError> {
    if text.trim().is_empty() {
        return Err(ThreadError::EmptyText);
    }
    let mut reserve = 0;
    let parts = loop {
        let avail = char_limit
            .checked_sub(reserve)
            .ok_or(ThreadError::UnsplittableToken { limit: 0 })?;
        let parts = layout(text, identity_lines, avail)?;
        let total = parts.len();
        if total == 1 {
            break parts;
        }
        let needed = char_len(&counter_suffix(total, total));
        if needed <= reserve {
            break parts;
        }
        reserve = needed;
    };

    let total = parts.len();
    let mut thread = PostThread {
        platform: platform.to_owned(),
        char_limit,
        posts: parts
            .into_iter()
            .enumerate()
            .map(|(i, (mut text, section, hyphenated))| {
                let counter = (total > 1).then_some((i + 1, total));
                if let Some((i, n)) = counter {
                    text.push_str(&counter_suffix(i, n));
                }
                ThreadPost {
                    text,
                    section,
                    hyphenated,
                    counter,
                }
            })
            .collect(),
    };
    if !mentions.is_empty() {
        thread.append_mentions(mentions)?;
    }
    Ok(thread)
}
