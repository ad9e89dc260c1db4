//! Contact addresses and the rule that picks a private delivery channel.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Private delivery channel for a notification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Channel {
    Email,
    DirectMessage,
}

/// A normalized contact: either an email address or a platform handle.
///
/// A string holding `@` with a non-empty local part and a dot-bearing domain is
/// an email address. Anything else is a handle, stored lowercase with a single
/// leading `@`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "address", rename_all = "snake_case")]
pub enum Contact {
    Email(String),
    Handle(String),
}

impl Contact {
    pub fn parse(raw: &str) -> Option<Contact> {
        let raw = raw.trim();
        if raw.is_empty() {
            return None;
        }
        if let Some((local, domain)) = raw.rsplit_once('@') {
            let domain_ok = domain.contains('.')
                && !domain.starts_with('.')
                && !domain.ends_with('.');
            if !local.is_empty() && !local.starts_with('@') && domain_ok {
                return Some(Contact::Email(raw.to_lowercase()));
            }
        }
        let handle = normalize_handle(raw);
        if handle.len() <= 1 || handle.chars().any(char::is_whitespace) {
            return None;
        }
        Some(Contact::Handle(handle))
    }

    pub fn channel(&self) -> Channel {
        match self {
            Contact::Email(_) => Channel::Email,
            Contact::Handle(_) => Channel::DirectMessage,
        }
    }

    pub fn address(&self) -> &str {
        match self {
            Contact::Email(a) | Contact::Handle(a) => a,
        }
    }

    pub fn as_handle(&self) -> Option<&str> {
        match self {
            Contact::Handle(h) => Some(h),
            Contact::Email(_) => None,
        }
    }
}

impl fmt::Display for Contact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.address())
    }
}

/// Lowercases a handle and gives it exactly one leading `@`.
pub fn normalize_handle(raw: &str) -> String {
    let trimmed = raw.trim().trim_start_matches('@');
    format!("@{}", trimmed.to_lowercase())
}
