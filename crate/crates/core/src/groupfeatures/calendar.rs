use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::vrf_io::VoterRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Election {
    pub id: String,
    pub date: NaiveDate,
    /// Voters whose history contains this election.
    pub turnout: u64,
    /// Some ballot in this election carried a party.
    pub primary: bool,
}

/// Elections known from vote histories.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ElectionCalendar {
    elections: Vec<Election>,
    by_id: BTreeMap<String, usize>,
}

impl ElectionCalendar {
    pub fn new(mut elections: Vec<Election>) -> Self {
        elections.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
        let by_id = elections.iter().enumerate().map(|(k, e)| (e.id.clone(), k)).collect();
        Self { elections, by_id }
    }

    /// Union of the election ids found in `voters`' histories.
    pub fn from_voters<'a>(voters: impl IntoIterator<Item = &'a VoterRecord>) -> Self {
        let mut acc: BTreeMap<&str, (NaiveDate, u64, bool)> = BTreeMap::new();
        for v in voters {
            for vote in &v.vote_history {
                let e = acc.entry(&vote.election_id).or_insert((vote.date, 0, false));
                e.0 = e.0.min(vote.date);
                e.1 += 1;
                e.2 |= vote.party_ballot.as_deref().is_some_and(|p| !p.trim().is_empty());
            }
        }
        Self::new(
            acc.into_iter()
                .map(|(id, (date, turnout, primary))| Election {
                    id: id.to_string(),
                    date,
                    turnout,
                    primary,
                })
                .collect(),
        )
    }

    pub fn elections(&self) -> &[Election] {
        &self.elections
    }

    pub fn get(&self, id: &str) -> Option<&Election> {
        self.by_id.get(id).map(|&k| &self.elections[k])
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.elections.first().map(|e| e.date)
    }

    pub fn max_turnout(&self) -> u64 {
        self.elections.iter().map(|e| e.turnout).max().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.elections.is_empty()
    }
}
