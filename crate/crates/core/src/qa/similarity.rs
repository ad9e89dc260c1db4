//! Heuristic check that an expert's contact plausibly belongs to the named
//! profile. Advisory only.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NameCheck {
    Pass,
    Warn,
}

fn name_tokens(name: &str) -> Vec<String> {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Local part of an email, or a handle without its `@`, with every
/// non-alphanumeric character removed.
fn contact_key(contact: &str) -> String {
    let contact = contact.trim().to_lowercase();
    let local = match contact.strip_prefix('@') {
        Some(handle) => handle.to_owned(),
        None => contact
            .split_once('@')
            .map(|(local, _)| local.to_owned())
            .unwrap_or(contact.clone()),
    };
    local.chars().filter(|c| c.is_alphanumeric()).collect()
}

/// Pass when a name token of three or more characters occurs in the contact,
/// or the contact contains initials followed by the surname (`rskeeter`).
pub fn name_similarity(profile_name: &str, contact: &str) -> NameCheck {
    let tokens = name_tokens(profile_name);
    let key = contact_key(contact);
    if tokens.is_empty() || key.is_empty() {
        return NameCheck::Warn;
    }
    if tokens
        .iter()
        .any(|t| t.chars().count() >= 3 && key.contains(t.as_str()))
    {
        return NameCheck::Pass;
    }
    if let Some((surname, given)) = tokens.split_last() {
        let initials: String = given.iter().filter_map(|t| t.chars().next()).collect();
        let first_initial: String = given.iter().take(1).filter_map(|t| t.chars().next()).collect();
        if !given.is_empty()
            && (key.contains(&format!("{initials}{surname}"))
                || key.contains(&format!("{first_initial}{surname}")))
        {
            return NameCheck::Pass;
        }
    }
    NameCheck::Warn
}
