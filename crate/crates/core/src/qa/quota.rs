//! Daily quotas keyed by UTC calendar date.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::UserId;

pub const DAILY_ASK_LIMIT: u32 = 3;
pub const DEFAULT_EXPERT_DAILY_CAP: u32 = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QuotaError {
    #[error("daily question limit of {limit} reached")]
    DailyAskQuotaExceeded { limit: u32 },
    #[error("{contact} already received {cap} invitations today")]
    ExpertDailyCapExceeded { contact: String, cap: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuotaLimits {
    pub daily_asks: u32,
    pub expert_daily_cap: u32,
}

impl Default for QuotaLimits {
    fn default() -> Self {
        Self {
            daily_asks: DAILY_ASK_LIMIT,
            expert_daily_cap: DEFAULT_EXPERT_DAILY_CAP,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerCounts {
    pub questions_created: BTreeMap<NaiveDate, BTreeMap<UserId, u32>>,
    pub invites_received: BTreeMap<NaiveDate, BTreeMap<String, u32>>,
}

/// Per-user ask counts and per-expert-contact invite counts.
///
/// [`QuotaLedger::try_admit`] checks every affected key and increments all
/// of them under one lock, so concurrent callers can never over-admit.
#[derive(Debug)]
pub struct QuotaLedger {
    limits: QuotaLimits,
    counts: Mutex<LedgerCounts>,
}

impl QuotaLedger {
    pub fn new(limits: QuotaLimits) -> Self {
        Self::with_counts(limits, LedgerCounts::default())
    }

    pub fn with_counts(limits: QuotaLimits, counts: LedgerCounts) -> Self {
        Self {
            limits,
            counts: Mutex::new(counts),
        }
    }

    pub fn limits(&self) -> QuotaLimits {
        self.limits
    }

    pub fn snapshot(&self) -> LedgerCounts {
        self.counts.lock().clone()
    }

    pub fn questions_created(&self, day: NaiveDate, user: &UserId) -> u32 {
        let counts = self.counts.lock();
        counts
            .questions_created
            .get(&day)
            .and_then(|m| m.get(user))
            .copied()
            .unwrap_or(0)
    }

    pub fn invites_received(&self, day: NaiveDate, contact: &str) -> u32 {
        let counts = self.counts.lock();
        counts
            .invites_received
            .get(&day)
            .and_then(|m| m.get(contact))
            .copied()
            .unwrap_or(0)
    }

    /// Admits one new question by `asker` (when given) and one invitation to
    /// each contact, or nothing at all.
    pub fn try_admit(
        &self,
        day: NaiveDate,
        asker: Option<&UserId>,
        expert_contacts: &[String],
    ) -> Result<(), QuotaError> {
        let mut counts = self.counts.lock();
        if let Some(asker) = asker {
            let used = counts
                .questions_created
                .get(&day)
                .and_then(|m| m.get(asker))
                .copied()
                .unwrap_or(0);
            if used >= self.limits.daily_asks {
                return Err(QuotaError::DailyAskQuotaExceeded {
                    limit: self.limits.daily_asks,
                });
            }
        }
        let mut wanted: BTreeMap<&str, u32> = BTreeMap::new();
        for contact in expert_contacts {
            *wanted.entry(contact.as_str()).or_default() += 1;
        }
        for (contact, extra) in &wanted {
            let used = counts
                .invites_received
                .get(&day)
                .and_then(|m| m.get(*contact))
                .copied()
                .unwrap_or(0);
            if used + extra > self.limits.expert_daily_cap {
                return Err(QuotaError::ExpertDailyCapExceeded {
                    contact: (*contact).to_owned(),
                    cap: self.limits.expert_daily_cap,
                });
            }
        }

        if let Some(asker) = asker {
            *counts
                .questions_created
                .entry(day)
                .or_default()
                .entry(asker.clone())
                .or_default() += 1;
        }
        let day_invites = counts.invites_received.entry(day).or_default();
        for (contact, extra) in wanted {
            *day_invites.entry(contact.to_owned()).or_default() += extra;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn day(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2024, 3, d).unwrap()
    }

    #[test]
    fn fourth_question_same_day_is_refused() {
        let ledger = QuotaLedger::new(QuotaLimits::default());
        let user = UserId::from("u1");
        for _ in 0..3 {
            ledger.try_admit(day(1), Some(&user), &[]).unwrap();
        }
        assert_eq!(
            ledger.try_admit(day(1), Some(&user), &[]).unwrap_err(),
            QuotaError::DailyAskQuotaExceeded { limit: 3 }
        );
        ledger.try_admit(day(2), Some(&user), &[]).unwrap();
    }

    #[test]
    fn rejection_leaves_counts_untouched() {
        let ledger = QuotaLedger::new(QuotaLimits { daily_asks: 3, expert_daily_cap: 1 });
        let user = UserId::from("u1");
        ledger.try_admit(day(1), None, &["@rita".into()]).unwrap();
        let err = ledger
            .try_admit(day(1), Some(&user), &["@bob".into(), "@rita".into()])
            .unwrap_err();
        assert_eq!(err, QuotaError::ExpertDailyCapExceeded { contact: "@rita".into(), cap: 1 });
        assert_eq!(ledger.questions_created(day(1), &user), 0);
        assert_eq!(ledger.invites_received(day(1), "@bob"), 0);
    }

    #[test]
    fn concurrent_admissions_never_exceed_cap() {
        let ledger = Arc::new(QuotaLedger::new(QuotaLimits::default()));
        let admitted: usize = std::thread::scope(|s| {
            let handles: Vec<_> = (0..32)
                .map(|i| {
                    let ledger = ledger.clone();
                    s.spawn(move || {
                        let user = UserId::new(format!("u{i}"));
                        ledger.try_admit(day(1), Some(&user), &["@rita".into()]).is_ok() as usize
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).sum()
        });
        assert_eq!(admitted, 3);
        assert_eq!(ledger.invites_received(day(1), "@rita"), 3);
    }
}
