use std::collections::HashMap;

use chrono::{Days, NaiveDate};

use crate::vrf_io::{ChangeRecord, ChangeType};

/// Window for the "recent changes" counts.
pub const RECENT_DAYS: u64 = 183;

/// Per-voter change history: `(posterior_date, change_type)` pairs.
#[derive(Debug, Clone, Default)]
pub struct ChangeIndex {
    by_voter: HashMap<String, Vec<(NaiveDate, ChangeType)>>,
}

/// Counts per change type: `[recent, all_time]`.
pub type HistoryCounts = [[u32; 2]; 7];

impl ChangeIndex {
    pub fn from_changes<'a>(changes: impl IntoIterator<Item = &'a ChangeRecord>) -> Self {
        let mut index = Self::default();
        for c in changes {
            index.insert(c);
        }
        index
    }

    pub fn insert(&mut self, c: &ChangeRecord) {
        self.by_voter
            .entry(c.voter_id.clone())
            .or_default()
            .push((c.posterior_date, c.change_type));
    }

    pub fn len(&self) -> usize {
        self.by_voter.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_voter.is_empty()
    }

    /// Changes of `voter_id` strictly before `as_of`; the recent column
    /// covers `[as_of - 183 days, as_of)`.
    pub fn counts(&self, voter_id: &str, as_of: NaiveDate) -> HistoryCounts {
        let mut out = [[0u32; 2]; 7];
        let recent_start = as_of - Days::new(RECENT_DAYS);
        if let Some(events) = self.by_voter.get(voter_id) {
            for &(date, ct) in events {
                if date >= as_of {
                    continue;
                }
                let slot = &mut out[ct.index()];
                slot[1] += 1;
                if date >= recent_start {
                    slot[0] += 1;
                }
            }
        }
        out
    }
}
