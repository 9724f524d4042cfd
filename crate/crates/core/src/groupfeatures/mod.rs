//! Mean demographic, voting-history and change-history features of the
//! voters in one change group (a locale, interval and change type).

mod calendar;
mod history;
mod io;
mod scaler;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modmatrix::Interval;
use crate::vrf_io::{BallotKind, ChangeRecord, ChangeType, VoterRecord, VoterStatus};

pub use calendar::{Election, ElectionCalendar};
pub use history::{ChangeIndex, HistoryCounts, RECENT_DAYS};
pub use io::{features_to_csv, manifest_path, read_features, read_manifest, write_features, write_manifest, FeatureManifest};
pub use scaler::{standardize, Scaler};

/// Bumped whenever the feature list or a formula changes.
pub const FEATURE_VERSION: u32 = 1;

pub const GENDERS: [&str; 3] = ["f", "m", "unknown"];
pub const PARTIES: [&str; 5] = ["dem", "rep", "lib", "np", "other"];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub months_since_last_update: bool,
}

/// Feature names in vector order.
pub fn feature_names(config: FeatureConfig) -> Vec<String> {
    let mut names: Vec<String> = ["months_since_registration", "years_old", "years_old_missing"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(GENDERS.iter().map(|g| format!("gender_{g}")));
    names.extend(VoterStatus::ALL.iter().map(|s| format!("status_{}", s.as_str())));
    names.extend(PARTIES.iter().map(|p| format!("party_{p}")));
    names.extend(
        [
            "days_since_last_voted",
            "partisanship",
            "participation",
            "engagement",
            "provisional_votes",
            "absentee_votes",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    if config.months_since_last_update {
        names.push("months_since_last_update".into());
    }
    for ct in ChangeType::ALL {
        names.push(format!("{ct}_changes_last_6_months"));
        names.push(format!("{ct}_changes_all_time"));
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventLabel {
    InactivityMailingResponseProcessing,
    SystematicSeptemberMaintenance,
    NcoaMailings,
    Other,
}

impl EventLabel {
    pub const ALL: [EventLabel; 4] = [
        Self::InactivityMailingResponseProcessing,
        Self::SystematicSeptemberMaintenance,
        Self::NcoaMailings,
        Self::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::InactivityMailingResponseProcessing => "inactivity_mailing_response_processing",
            Self::SystematicSeptemberMaintenance => "systematic_september_maintenance",
            Self::NcoaMailings => "ncoa_mailings",
            Self::Other => "other",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown event label '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupKey {
    pub locale: String,
    pub interval: Interval,
    pub change_type: ChangeType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupFeatureVector {
    pub key: GroupKey,
    pub n_voters: usize,
    pub features: Vec<f64>,
    pub label: Option<EventLabel>,
}

fn completed_months(from: NaiveDate, to: NaiveDate) -> i64 {
    let mut months = i64::from(to.year() - from.year()) * 12 + i64::from(to.month()) - i64::from(from.month());
    if to.day() < from.day() {
        months -= 1;
    }
    months
}

fn gender_slot(g: &str) -> usize {
    match g.trim().to_lowercase().as_str() {
        "f" | "female" => 0,
        "m" | "male" => 1,
        _ => 2,
    }
}

fn party_token(p: &str) -> &'static str {
    match p.trim().to_lowercase().as_str() {
        "dem" => "dem",
        "rep" => "rep",
        "lib" => "lib",
        "" | "np" => "np",
        _ => "other",
    }
}

/// Feature vector of one voter at `as_of`, in [`feature_names`] order.
///
/// `years_old` is `NaN` when the birth date is missing. Never-voters get
/// `days_since_last_voted = (as_of - first election).days + 1`, which exceeds
/// every real value.
pub fn voter_features(
    v: &VoterRecord,
    as_of: NaiveDate,
    calendar: &ElectionCalendar,
    history: &HistoryCounts,
    config: FeatureConfig,
) -> Result<Vec<f64>> {
    if as_of < v.registration_date {
        return Err(Error::Precondition(format!(
            "voter {} registered {} after as-of date {as_of}",
            v.voter_id, v.registration_date
        )));
    }
    let mut f = Vec::with_capacity(feature_names(config).len());
    f.push(completed_months(v.registration_date, as_of) as f64);
    match v.birth_date {
        Some(b) => {
            f.push((completed_months(b, as_of) / 12) as f64);
            f.push(0.0);
        }
        None => {
            f.push(f64::NAN);
            f.push(1.0);
        }
    }
    let mut gender = [0.0; 3];
    gender[gender_slot(&v.gender)] = 1.0;
    f.extend(gender);
    f.extend(VoterStatus::ALL.map(|s| if s == v.status { 1.0 } else { 0.0 }));
    let party = party_token(&v.party);
    f.extend(PARTIES.map(|p| if p == party { 1.0 } else { 0.0 }));

    let votes: Vec<_> = v.vote_history.iter().filter(|r| r.date <= as_of).collect();
    let last_voted = votes.iter().map(|r| r.date).max();
    let never = calendar
        .first_date()
        .map(|d| (as_of - d).num_days().max(0) + 1)
        .unwrap_or(1);
    f.push(last_voted.map(|d| (as_of - d).num_days()).unwrap_or(never) as f64);

    let eligible: Vec<&Election> = calendar
        .elections()
        .iter()
        .filter(|e| e.date > v.registration_date && e.date <= as_of)
        .collect();
    let voted_in = |e: &Election| votes.iter().find(|r| r.election_id == e.id);
    let primaries = eligible.iter().filter(|e| e.primary).count();
    let party_primaries = eligible
        .iter()
        .filter(|e| e.primary)
        .filter(|e| {
            voted_in(e)
                .and_then(|r| r.party_ballot.as_deref())
                .is_some_and(|p| party != "np" && party_token(p) == party)
        })
        .count();
    f.push(if primaries > 0 { party_primaries as f64 / primaries as f64 } else { 0.0 });
    let participated = eligible.iter().filter(|e| voted_in(e).is_some()).count();
    f.push(if eligible.is_empty() { 0.0 } else { participated as f64 / eligible.len() as f64 });

    let max_turnout = calendar.max_turnout();
    let sizes: Vec<f64> = votes
        .iter()
        .filter_map(|r| calendar.get(&r.election_id))
        .map(|e| e.turnout as f64 / max_turnout.max(1) as f64)
        .collect();
    f.push(if sizes.is_empty() { 0.0 } else { sizes.iter().sum::<f64>() / sizes.len() as f64 });
    f.push(votes.iter().filter(|r| r.kind == BallotKind::Provisional).count() as f64);
    f.push(votes.iter().filter(|r| r.kind == BallotKind::Absentee).count() as f64);
    if config.months_since_last_update {
        f.push(completed_months(v.last_update_date.min(as_of), as_of) as f64);
    }
    for counts in history {
        f.push(f64::from(counts[0]));
        f.push(f64::from(counts[1]));
    }
    Ok(f)
}

/// Result of [`group_features`]: the vector plus voters that could not be
/// resolved and were left out of the means.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub vector: GroupFeatureVector,
    pub unresolved: Vec<String>,
}

/// Column-wise mean of the voter features of a change group.
///
/// `resolve` returns the record a change refers to (the anterior record for
/// removals, the posterior record otherwise). Each change is evaluated at its
/// posterior date, and change-history counts only include changes strictly
/// before it. A voter appearing in several changes counts once, at its
/// earliest change. `years_old` averages over voters with a birth date.
pub fn group_features<'a, F>(
    key: &GroupKey,
    changes: &[ChangeRecord],
    resolve: F,
    calendar: &ElectionCalendar,
    index: &ChangeIndex,
    config: FeatureConfig,
) -> Result<GroupReport>
where
    F: Fn(&ChangeRecord) -> Option<&'a VoterRecord>,
{
    let mut first: BTreeMap<&str, &ChangeRecord> = BTreeMap::new();
    for c in changes {
        if c.locale != key.locale || c.change_type != key.change_type || !key.interval.contains(c.posterior_date) {
            return Err(Error::Precondition(format!(
                "change of voter {} ({} in {} on {}) is not in group {} {} {}",
                c.voter_id, c.change_type, c.locale, c.posterior_date, key.change_type, key.locale, key.interval
            )));
        }
        let slot = first.entry(&c.voter_id).or_insert(c);
        if (c.posterior_date, c.anterior_date) < (slot.posterior_date, slot.anterior_date) {
            *slot = c;
        }
    }
    let width = feature_names(config).len();
    let age_slot = 1;
    let mut sums = vec![0.0; width];
    let mut aged = 0usize;
    let mut n = 0usize;
    let mut unresolved = Vec::new();
    for (id, c) in first {
        let Some(v) = resolve(c) else {
            unresolved.push(id.to_string());
            continue;
        };
        let f = voter_features(v, c.posterior_date, calendar, &index.counts(id, c.posterior_date), config)?;
        for (k, x) in f.iter().enumerate() {
            if k == age_slot {
                if !x.is_nan() {
                    sums[k] += x;
                    aged += 1;
                }
            } else {
                sums[k] += x;
            }
        }
        n += 1;
    }
    if !unresolved.is_empty() {
        log::warn!(
            "group {} {} {}: {} voter(s) not found in the snapshot: {}",
            key.change_type,
            key.locale,
            key.interval.start,
            unresolved.len(),
            unresolved.iter().take(5).cloned().collect::<Vec<_>>().join(", ")
        );
    }
    if n == 0 {
        return Err(Error::Data(format!(
            "group {} {} {} has no resolvable voters",
            key.change_type, key.locale, key.interval.start
        )));
    }
    let features = sums
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if k == age_slot {
                if aged == 0 {
                    f64::NAN
                } else {
                    s / aged as f64
                }
            } else {
                s / n as f64
            }
        })
        .collect();
    Ok(GroupReport {
        vector: GroupFeatureVector {
            key: key.clone(),
            n_voters: n,
            features,
            label: None,
        },
        unresolved,
    })
}

/// Groups `changes` of `change_type` by locale and interval.
pub fn group_changes<'c>(
    changes: &'c [ChangeRecord],
    change_type: ChangeType,
    intervals: &[Interval],
) -> BTreeMap<GroupKey, Vec<&'c ChangeRecord>> {
    let mut groups: BTreeMap<GroupKey, Vec<&ChangeRecord>> = BTreeMap::new();
    for c in changes.iter().filter(|c| c.change_type == change_type) {
        if let Some(iv) = intervals.iter().find(|iv| iv.contains(c.posterior_date)) {
            groups
                .entry(GroupKey {
                    locale: c.locale.clone(),
                    interval: *iv,
                    change_type,
                })
                .or_default()
                .push(c);
        }
    }
    groups
}

#[cfg(test)]
mod tests {
    use chrono::Days;

    use super::*;
    use crate::vrf_io::VoteRecord;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn voter(id: &str, birth: Option<NaiveDate>) -> VoterRecord {
        VoterRecord {
            voter_id: id.into(),
            locale: "POLK".into(),
            first_name: "A".into(),
            middle_name: String::new(),
            last_name: "B".into(),
            address: BTreeMap::new(),
            status: VoterStatus::Inactive,
            party: "dem".into(),
            gender: "f".into(),
            birth_date: birth,
            registration_date: d(2017, 3, 15),
            last_update_date: d(2017, 3, 15),
            vote_history: vec![],
        }
    }

    fn slot(name: &str) -> usize {
        feature_names(FeatureConfig::default()).iter().position(|n| n == name).unwrap()
    }

    fn deactivation(id: &str, on: NaiveDate) -> ChangeRecord {
        ChangeRecord {
            voter_id: id.into(),
            locale: "POLK".into(),
            change_type: ChangeType::Deactivation,
            anterior_date: on - Days::new(7),
            posterior_date: on,
            field_deltas: vec![],
        }
    }

    #[test]
    fn single_voter_basics() {
        let v = voter("V1", Some(d(1980, 1, 1)));
        let cal = ElectionCalendar::from_voters([&v]);
        let f = voter_features(&v, d(2019, 3, 15), &cal, &[[0; 2]; 7], FeatureConfig::default()).unwrap();
        assert_eq!(f.len(), feature_names(FeatureConfig::default()).len());
        assert_eq!(f[slot("months_since_registration")], 24.0);
        assert_eq!(f[slot("years_old")], 39.0);
        assert_eq!(f[slot("participation")], 0.0);
        assert_eq!(f[slot("days_since_last_voted")], 1.0);
        assert_eq!(f[slot("gender_f")] + f[slot("gender_m")] + f[slot("gender_unknown")], 1.0);
    }

    #[test]
    fn provisional_and_participation() {
        let mut v = voter("V1", None);
        let ballot = |id: &str, date: NaiveDate, kind, party: Option<&str>| VoteRecord {
            election_id: id.into(),
            date,
            kind,
            party_ballot: party.map(String::from),
        };
        v.vote_history = vec![
            ballot("P18", d(2018, 6, 5), BallotKind::Provisional, Some("dem")),
            ballot("G18", d(2018, 11, 6), BallotKind::Provisional, None),
        ];
        let mut other = voter("V2", None);
        other.vote_history = vec![
            ballot("G16", d(2016, 11, 8), BallotKind::Regular, None),
            ballot("G18", d(2018, 11, 6), BallotKind::Absentee, None),
        ];
        let cal = ElectionCalendar::from_voters([&v, &other]);
        let f = voter_features(&v, d(2019, 3, 15), &cal, &[[0; 2]; 7], FeatureConfig::default()).unwrap();
        assert_eq!(f[slot("provisional_votes")], 2.0);
        assert_eq!(f[slot("participation")], 1.0);
        assert_eq!(f[slot("partisanship")], 1.0);
        assert_eq!(f[slot("days_since_last_voted")], (d(2019, 3, 15) - d(2018, 11, 6)).num_days() as f64);
        assert_eq!(f[slot("engagement")], (0.5 + 1.0) / 2.0);
        assert!(f[slot("years_old")].is_nan());
        assert_eq!(f[slot("years_old_missing")], 1.0);
    }

    #[test]
    fn group_means_and_current_change_exclusion() {
        let on = d(2019, 5, 10);
        let a = voter("A", Some(d(1989, 1, 1)));
        let b = voter("B", Some(d(1969, 1, 1)));
        let key = GroupKey {
            locale: "POLK".into(),
            interval: Interval { start: d(2019, 5, 4), end: d(2019, 5, 11) },
            change_type: ChangeType::Deactivation,
        };
        let changes = vec![deactivation("A", on), deactivation("B", on)];
        let cal = ElectionCalendar::default();
        let resolve = |c: &ChangeRecord| if c.voter_id == "A" { Some(&a) } else { Some(&b) };
        let empty = ChangeIndex::default();
        let with_current = ChangeIndex::from_changes(&changes);
        let g1 = group_features(&key, &changes, resolve, &cal, &empty, FeatureConfig::default()).unwrap();
        let g2 = group_features(&key, &changes, resolve, &cal, &with_current, FeatureConfig::default()).unwrap();
        assert_eq!(g1.vector.features, g2.vector.features);
        assert_eq!(g1.vector.n_voters, 2);
        assert_eq!(g1.vector.features[slot("years_old")], 40.0);
        assert_eq!(g1.vector.features[slot("deactivation_changes_all_time")], 0.0);

        let mut earlier = changes.clone();
        earlier.push(deactivation("A", d(2019, 1, 4)));
        let idx = ChangeIndex::from_changes(&earlier);
        let g3 = group_features(&key, &changes, resolve, &cal, &idx, FeatureConfig::default()).unwrap();
        assert_eq!(g3.vector.features[slot("deactivation_changes_all_time")], 0.5);
        assert_eq!(g3.vector.features[slot("deactivation_changes_last_6_months")], 0.5);

        let single = group_features(&key, &changes[..1], resolve, &cal, &empty, FeatureConfig::default()).unwrap();
        let alone = voter_features(&a, on, &cal, &[[0; 2]; 7], FeatureConfig::default()).unwrap();
        assert_eq!(single.vector.features, alone);

        let none = |_: &ChangeRecord| -> Option<&VoterRecord> { None };
        assert!(group_features(&key, &changes, none, &cal, &empty, FeatureConfig::default()).is_err());
    }

    #[test]
    fn optional_feature_flag() {
        let base = feature_names(FeatureConfig::default());
        let more = feature_names(FeatureConfig { months_since_last_update: true });
        assert_eq!(more.len(), base.len() + 1);
        assert!(!base.iter().any(|n| n == "months_since_last_update"));
    }
}
