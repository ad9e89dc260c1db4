//! Accounts, profile claims and endorsements.
//!
//! Endorsement transitions:
//!
//! ```text
//! Requested --accept--> Active --revoke--> Revoked
//!     \--decline--> Declined
//! ```
//!
//! An endorsee holds at most one endorsement in `Requested` or `Active`. An
//! endorser may hold any number of active endorsements.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use rand::distributions::Alphanumeric;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::Contact;
use crate::ids::{AuthorId, EndorsementId, UserId};
use crate::signals::{EndorserGrant, Persona, RelationshipCategory, Seniority};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdentityError {
    #[error("handle {0} is already registered")]
    HandleTaken(String),
    #[error("unknown user `{0}`")]
    UnknownUser(UserId),
    #[error("invalid contact `{0}`")]
    InvalidContact(String),
    #[error("verification token is not valid for this account")]
    InvalidToken,
    #[error("unknown author `{0}`")]
    UnknownAuthor(AuthorId),
    #[error("author `{0}` is already claimed")]
    AlreadyClaimed(AuthorId),
    #[error("account `{0}` has no pending claim")]
    NoPendingClaim(UserId),
    #[error("an endorsement is already requested or active")]
    EndorsementAlreadyPendingOrActive,
    #[error("unknown endorser profile `{0}`")]
    UnknownEndorser(String),
    #[error("cannot endorse yourself")]
    SelfEndorsement,
    #[error("unknown endorsement `{0}`")]
    UnknownEndorsement(EndorsementId),
    #[error("endorsement is not awaiting a response")]
    NotRequested,
    #[error("only the named endorser can respond")]
    NotTheEndorser,
    #[error("accepting requires a relationship category")]
    MissingRelationship,
    #[error("endorsement is not active")]
    NotActive,
    #[error("only the endorser or endorsee can revoke")]
    NotAParty,
}

impl IdentityError {
    pub fn code(&self) -> &'static str {
        match self {
            IdentityError::HandleTaken(_) => "HandleTaken",
            IdentityError::UnknownUser(_) => "UnknownUser",
            IdentityError::InvalidContact(_) => "InvalidContact",
            IdentityError::InvalidToken => "InvalidToken",
            IdentityError::UnknownAuthor(_) => "UnknownAuthor",
            IdentityError::AlreadyClaimed(_) => "AlreadyClaimed",
            IdentityError::NoPendingClaim(_) => "NoPendingClaim",
            IdentityError::EndorsementAlreadyPendingOrActive => "EndorsementAlreadyPendingOrActive",
            IdentityError::UnknownEndorser(_) => "UnknownEndorser",
            IdentityError::SelfEndorsement => "SelfEndorsement",
            IdentityError::UnknownEndorsement(_) => "UnknownEndorsement",
            IdentityError::NotRequested => "NotRequested",
            IdentityError::NotTheEndorser => "NotTheEndorser",
            IdentityError::MissingRelationship => "MissingRelationship",
            IdentityError::NotActive => "NotActive",
            IdentityError::NotAParty => "NotAParty",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClaimState {
    None,
    Pending,
    Approved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: UserId,
    pub full_name: String,
    pub handle: String,
    pub handle_verified: bool,
    pub claimed_author_id: Option<AuthorId>,
    pub claim_state: ClaimState,
    pub declared_seniority: Seniority,
    pub contact_email: Option<String>,
    pub created: DateTime<Utc>,
}

impl UserAccount {
    pub fn approved_author(&self) -> Option<&AuthorId> {
        match self.claim_state {
            ClaimState::Approved => self.claimed_author_id.as_ref(),
            _ => None,
        }
    }

    pub fn persona(&self) -> Persona {
        Persona {
            full_name: self.full_name.clone(),
            handle: self.handle.clone(),
            seniority: self.declared_seniority,
            author_id: self.approved_author().cloned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndorsementState {
    Requested,
    Active,
    Declined,
    Revoked,
}

impl EndorsementState {
    pub fn is_open(self) -> bool {
        matches!(self, EndorsementState::Requested | EndorsementState::Active)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endorsement {
    pub endorsement_id: EndorsementId,
    pub endorsee: UserId,
    /// Unset while the endorser has no approved account (provisional invite).
    pub endorser: Option<UserId>,
    pub endorser_author_id: AuthorId,
    pub endorser_contact: Contact,
    pub state: EndorsementState,
    pub relationship: Option<RelationshipCategory>,
    pub name_reveal_allowed: bool,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

/// One entry of the append-only audit journal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEvent {
    pub at: DateTime<Utc>,
    pub entity: String,
    pub event: String,
    pub actor: Option<UserId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct VerificationToken {
    user: UserId,
    used: bool,
}

/// Issued by [`Registry::register`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registration {
    pub account: UserAccount,
    pub verification_token: String,
    pub session_token: String,
}

/// Extracts the author id from a profile URL (last path segment) or a bare id.
pub fn parse_author_ref(reference: &str) -> AuthorId {
    let trimmed = reference.trim();
    let without_query = trimmed.split(['?', '#']).next().unwrap_or(trimmed);
    let last = without_query
        .trim_end_matches('/')
        .rsplit('/')
        .next()
        .unwrap_or(without_query);
    AuthorId::new(last)
}

fn random_token(len: usize) -> String {
    rand::thread_rng()
        .sample_iter(&Alphanumeric)
        .take(len)
        .map(char::from)
        .collect()
}

/// All identity state. Callers serialize access; every method is one atomic
/// transition.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Registry {
    accounts: BTreeMap<UserId, UserAccount>,
    endorsements: BTreeMap<EndorsementId, Endorsement>,
    verification_tokens: BTreeMap<String, VerificationToken>,
    sessions: BTreeMap<String, UserId>,
    next_user: u64,
    next_endorsement: u64,
    #[serde(skip)]
    journal: Vec<JournalEvent>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    fn log(
        &mut self,
        at: DateTime<Utc>,
        entity: impl Into<String>,
        event: &str,
        actor: Option<&UserId>,
        detail: Option<String>,
    ) {
        self.journal.push(JournalEvent {
            at,
            entity: entity.into(),
            event: event.to_owned(),
            actor: actor.cloned(),
            detail,
        });
    }

    /// Journal entries recorded since the last drain.
    pub fn drain_journal(&mut self) -> Vec<JournalEvent> {
        std::mem::take(&mut self.journal)
    }

    pub fn account(&self, user: &UserId) -> Result<&UserAccount, IdentityError> {
        self.accounts
            .get(user)
            .ok_or_else(|| IdentityError::UnknownUser(user.clone()))
    }

    pub fn accounts(&self) -> impl Iterator<Item = &UserAccount> {
        self.accounts.values()
    }

    pub fn endorsement(&self, id: &EndorsementId) -> Result<&Endorsement, IdentityError> {
        self.endorsements
            .get(id)
            .ok_or_else(|| IdentityError::UnknownEndorsement(id.clone()))
    }

    pub fn endorsements(&self) -> impl Iterator<Item = &Endorsement> {
        self.endorsements.values()
    }

    pub fn user_for_session(&self, token: &str) -> Option<&UserId> {
        self.sessions.get(token)
    }

    pub fn account_for_author(&self, author: &AuthorId) -> Option<&UserAccount> {
        self.accounts
            .values()
            .find(|a| a.approved_author() == Some(author))
    }

    pub fn register(
        &mut self,
        full_name: &str,
        handle: &str,
        contact_email: Option<&str>,
        seniority: Seniority,
        now: DateTime<Utc>,
    ) -> Result<Registration, IdentityError> {
        let handle = match Contact::parse(handle) {
            Some(Contact::Handle(h)) => h,
            _ => return Err(IdentityError::InvalidContact(handle.to_owned())),
        };
        if full_name.trim().is_empty() {
            return Err(IdentityError::InvalidContact(full_name.to_owned()));
        }
        if self.accounts.values().any(|a| a.handle == handle) {
            return Err(IdentityError::HandleTaken(handle));
        }
        let contact_email = match contact_email.map(str::trim).filter(|e| !e.is_empty()) {
            Some(raw) => match Contact::parse(raw) {
                Some(Contact::Email(e)) => Some(e),
                _ => return Err(IdentityError::InvalidContact(raw.to_owned())),
            },
            None => None,
        };

        self.next_user += 1;
        let user_id = UserId::new(format!("u{}", self.next_user));
        let account = UserAccount {
            user_id: user_id.clone(),
            full_name: full_name.trim().to_owned(),
            handle,
            handle_verified: false,
            claimed_author_id: None,
            claim_state: ClaimState::None,
            declared_seniority: seniority,
            contact_email,
            created: now,
        };
        self.accounts.insert(user_id.clone(), account.clone());

        let verification_token = random_token(24);
        self.verification_tokens.insert(
            verification_token.clone(),
            VerificationToken {
                user: user_id.clone(),
                used: false,
            },
        );
        let session_token = random_token(32);
        self.sessions.insert(session_token.clone(), user_id.clone());
        self.log(now, user_id.as_str(), "account.registered", Some(&user_id), None);

        Ok(Registration {
            account,
            verification_token,
            session_token,
        })
    }

    /// Marks the handle verified. Replaying an already-used token for the
    /// same account succeeds without further effect.
    pub fn verify_handle(
        &mut self,
        user: &UserId,
        token: &str,
        now: DateTime<Utc>,
    ) -> Result<&UserAccount, IdentityError> {
        self.account(user)?;
        let entry = self
            .verification_tokens
            .get_mut(token)
            .filter(|t| &t.user == user)
            .ok_or(IdentityError::InvalidToken)?;
        let first_use = !entry.used;
        entry.used = true;
        if first_use {
            self.accounts.get_mut(user).expect("checked above").handle_verified = true;
            self.log(now, user.as_str(), "account.handle_verified", Some(user), None);
        }
        self.account(user)
    }

    /// Starts a claim. `author_exists` comes from the current corpus snapshot.
    pub fn claim_profile(
        &mut self,
        user: &UserId,
        author: &AuthorId,
        author_exists: bool,
        now: DateTime<Utc>,
    ) -> Result<ClaimState, IdentityError> {
        self.account(user)?;
        if !author_exists {
            return Err(IdentityError::UnknownAuthor(author.clone()));
        }
        let taken = self.accounts.values().any(|a| {
            &a.user_id != user
                && a.claimed_author_id.as_ref() == Some(author)
                && a.claim_state != ClaimState::None
        });
        if taken {
            return Err(IdentityError::AlreadyClaimed(author.clone()));
        }
        let account = self.accounts.get_mut(user).expect("checked above");
        if account.claim_state == ClaimState::Approved && account.claimed_author_id.as_ref() == Some(author) {
            return Ok(ClaimState::Approved);
        }
        account.claimed_author_id = Some(author.clone());
        account.claim_state = ClaimState::Pending;
        self.log(now, user.as_str(), "claim.requested", Some(user), Some(author.to_string()));
        Ok(ClaimState::Pending)
    }

    /// Admin approval of a pending claim. Binds any provisional endorsement
    /// requests addressed to the claimed author.
    pub fn approve_claim(&mut self, user: &UserId, now: DateTime<Utc>) -> Result<&UserAccount, IdentityError> {
        let account = self.account(user)?;
        if account.claim_state != ClaimState::Pending {
            return Err(IdentityError::NoPendingClaim(user.clone()));
        }
        let author = account.claimed_author_id.clone().expect("pending claim names an author");
        let account = self.accounts.get_mut(user).expect("checked above");
        account.claim_state = ClaimState::Approved;
        self.log(now, user.as_str(), "claim.approved", None, Some(author.to_string()));

        let provisional: Vec<EndorsementId> = self
            .endorsements
            .values()
            .filter(|e| e.endorser.is_none() && e.endorser_author_id == author && &e.endorsee != user)
            .map(|e| e.endorsement_id.clone())
            .collect();
        for id in provisional {
            let e = self.endorsements.get_mut(&id).expect("collected above");
            e.endorser = Some(user.clone());
            e.updated = now;
            self.log(now, id.as_str(), "endorsement.endorser_bound", Some(user), None);
        }
        self.account(user)
    }

    /// Opens a `Requested` endorsement. The endorser is bound immediately if an
    /// account has an approved claim on the referenced author, otherwise when
    /// such a claim is approved later.
    pub fn request_endorsement(
        &mut self,
        endorsee: &UserId,
        endorser_author: &AuthorId,
        author_exists: bool,
        contact: &str,
        now: DateTime<Utc>,
    ) -> Result<&Endorsement, IdentityError> {
        let account = self.account(endorsee)?;
        if !author_exists {
            return Err(IdentityError::UnknownEndorser(endorser_author.to_string()));
        }
        if account.approved_author() == Some(endorser_author) {
            return Err(IdentityError::SelfEndorsement);
        }
        let contact = Contact::parse(contact).ok_or_else(|| IdentityError::InvalidContact(contact.to_owned()))?;
        if self
            .endorsements
            .values()
            .any(|e| &e.endorsee == endorsee && e.state.is_open())
        {
            return Err(IdentityError::EndorsementAlreadyPendingOrActive);
        }
        let endorser = self.account_for_author(endorser_author).map(|a| a.user_id.clone());
        if endorser.as_ref() == Some(endorsee) {
            return Err(IdentityError::SelfEndorsement);
        }

        self.next_endorsement += 1;
        let id = EndorsementId::new(format!("e{}", self.next_endorsement));
        self.endorsements.insert(
            id.clone(),
            Endorsement {
                endorsement_id: id.clone(),
                endorsee: endorsee.clone(),
                endorser,
                endorser_author_id: endorser_author.clone(),
                endorser_contact: contact,
                state: EndorsementState::Requested,
                relationship: None,
                name_reveal_allowed: false,
                created: now,
                updated: now,
            },
        );
        self.log(now, id.as_str(), "endorsement.requested", Some(endorsee), Some(endorser_author.to_string()));
        Ok(&self.endorsements[&id])
    }

    pub fn respond_endorsement(
        &mut self,
        responder: &UserId,
        id: &EndorsementId,
        accept: bool,
        relationship: Option<RelationshipCategory>,
        name_reveal_allowed: bool,
        now: DateTime<Utc>,
    ) -> Result<&Endorsement, IdentityError> {
        self.account(responder)?;
        let endorsement = self.endorsement(id)?;
        if endorsement.state != EndorsementState::Requested {
            return Err(IdentityError::NotRequested);
        }
        if endorsement.endorser.as_ref() != Some(responder) {
            return Err(IdentityError::NotTheEndorser);
        }
        if accept && relationship.is_none() {
            return Err(IdentityError::MissingRelationship);
        }
        let e = self.endorsements.get_mut(id).expect("checked above");
        e.updated = now;
        let event = if accept {
            e.state = EndorsementState::Active;
            e.relationship = relationship;
            e.name_reveal_allowed = name_reveal_allowed;
            "endorsement.accepted"
        } else {
            e.state = EndorsementState::Declined;
            "endorsement.declined"
        };
        let detail = relationship.filter(|_| accept).map(|r| format!("{r:?}, name_reveal={name_reveal_allowed}"));
        self.log(now, id.as_str(), event, Some(responder), detail);
        Ok(&self.endorsements[id])
    }

    /// Either party may revoke. Published posts are left untouched.
    pub fn revoke_endorsement(
        &mut self,
        actor: &UserId,
        id: &EndorsementId,
        now: DateTime<Utc>,
    ) -> Result<&Endorsement, IdentityError> {
        let endorsement = self.endorsement(id)?;
        if endorsement.state != EndorsementState::Active {
            return Err(IdentityError::NotActive);
        }
        if &endorsement.endorsee != actor && endorsement.endorser.as_ref() != Some(actor) {
            return Err(IdentityError::NotAParty);
        }
        let e = self.endorsements.get_mut(id).expect("checked above");
        e.state = EndorsementState::Revoked;
        e.updated = now;
        self.log(now, id.as_str(), "endorsement.revoked", Some(actor), None);
        Ok(&self.endorsements[id])
    }

    pub fn active_endorsement(&self, endorsee: &UserId) -> Option<&Endorsement> {
        self.endorsements
            .values()
            .find(|e| &e.endorsee == endorsee && e.state == EndorsementState::Active)
    }

    /// Verified handle plus either an approved claim or an active endorsement.
    pub fn is_enabled(&self, user: &UserId) -> Result<bool, IdentityError> {
        let account = self.account(user)?;
        Ok(account.handle_verified
            && (account.claim_state == ClaimState::Approved || self.active_endorsement(user).is_some()))
    }

    /// What the endorsee may draw on from their active endorsement.
    pub fn active_grant(&self, endorsee: &UserId) -> Option<EndorserGrant> {
        let endorsement = self.active_endorsement(endorsee)?;
        let endorser = self.accounts.get(endorsement.endorser.as_ref()?)?;
        let endorsee_account = self.accounts.get(endorsee)?;
        Some(EndorserGrant {
            endorser: endorser.persona(),
            relationship: endorsement.relationship?,
            name_reveal_allowed: endorsement.name_reveal_allowed,
            endorsee_author_id: endorsee_account.claimed_author_id.clone(),
            endorsee_name: endorsee_account.full_name.clone(),
        })
    }

    /// Declared seniority for every approved profile claim.
    pub fn declared_seniority(&self) -> BTreeMap<AuthorId, Seniority> {
        self.accounts
            .values()
            .filter_map(|a| a.approved_author().map(|id| (id.clone(), a.declared_seniority)))
            .collect()
    }
}
