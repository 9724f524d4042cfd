use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;

use super::BiasProfile;
use crate::vrf_io::{normalize, BallotKind, VoteRecord, VoterRecord, VoterStatus};

const FIRST: [&str; 24] = [
    "Mary", "James", "Linda", "John", "Susan", "Robert", "Karen", "Michael", "Nancy", "David", "Lisa", "William",
    "Donna", "Richard", "Carol", "Thomas", "Sandra", "Mark", "Emily", "Kevin", "Amy", "Brian", "Megan", "Jason",
];
const MIDDLE: [&str; 10] = ["", "A", "B", "C", "E", "J", "L", "M", "R", "S"];
const LAST: [&str; 32] = [
    "Smith", "Johnson", "Miller", "Anderson", "Peterson", "Larson", "Nelson", "Olson", "Hansen", "Schmidt",
    "Meyer", "Wagner", "Becker", "Schultz", "Hoffman", "Clark", "Lewis", "Walker", "Hall", "Young", "King",
    "Wright", "Hill", "Green", "Baker", "Adams", "Nelsen", "Carlson", "Jensen", "Koch", "Weber", "Thompson",
];
const STREETS: [&str; 24] = [
    "Oak", "Maple", "Elm", "Pine", "Cedar", "Walnut", "Main", "Park", "Lake", "Hill", "Church", "Mill", "River",
    "Prairie", "Grand", "Locust", "Cherry", "Spruce", "Jefferson", "Lincoln", "Washington", "Adams", "Court",
    "Market",
];
const SUFFIXES: [&str; 5] = ["St", "Ave", "Dr", "Rd", "Ln"];

/// Party codes with their shares.
pub(crate) const PARTIES: [(&str, f64); 5] = [("DEM", 0.32), ("REP", 0.33), ("LIB", 0.02), ("NP", 0.30), ("OTH", 0.03)];
const GENDERS: [(&str, f64); 3] = [("F", 0.51), ("M", 0.47), ("U", 0.02)];

fn pick<'a, R: Rng>(rng: &mut R, table: &[(&'a str, f64)]) -> &'a str {
    let mut u = rng.random::<f64>() * table.iter().map(|(_, w)| w).sum::<f64>();
    for (v, w) in table {
        if u < *w {
            return v;
        }
        u -= w;
    }
    table[table.len() - 1].0
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).expect("valid weekday of month")
}

/// Even-year June primaries and November generals before `before`.
pub(crate) fn election_schedule(before: NaiveDate) -> Vec<(String, NaiveDate, bool)> {
    let mut out = Vec::new();
    for year in (1990..=before.year()).filter(|y| y % 2 == 0) {
        let primary = nth_weekday(year, 6, Weekday::Tue, 1);
        // First Tuesday after the first Monday.
        let general = nth_weekday(year, 11, Weekday::Mon, 1) + Days::new(1);
        for (id, date, is_primary) in [(format!("P{year}"), primary, true), (format!("G{year}"), general, false)] {
            if date < before {
                out.push((id, date, is_primary));
            }
        }
    }
    out
}

fn add_years(d: NaiveDate, years: i32) -> NaiveDate {
    d.with_year(d.year() + years)
        .unwrap_or_else(|| NaiveDate::from_ymd_opt(d.year() + years, 2, 28).unwrap())
}

fn uniform_date<R: Rng>(rng: &mut R, from: NaiveDate, to: NaiveDate) -> NaiveDate {
    if to <= from {
        return from;
    }
    from + Days::new(rng.random_range(0..=(to - from).num_days()) as u64)
}

pub(crate) fn voter_id(index: usize) -> String {
    format!("V{:09}", index + 1)
}

pub(crate) fn voter_index(id: &str) -> Option<usize> {
    id.strip_prefix('V')?.parse::<usize>().ok()?.checked_sub(1)
}

pub(crate) struct Factory {
    pub schedule: Vec<(String, NaiveDate, bool)>,
}

impl Factory {
    pub fn new(start: NaiveDate) -> Self {
        Self {
            schedule: election_schedule(start),
        }
    }

    fn base<R: Rng>(&self, rng: &mut R, index: usize, locale_index: usize, locale: &str) -> VoterRecord {
        let mut address = BTreeMap::new();
        address.insert("house_num".to_string(), rng.random_range(1..10_000).to_string());
        address.insert(
            "street_name".to_string(),
            format!(
                "{} {}",
                STREETS[rng.random_range(0..STREETS.len())],
                SUFFIXES[rng.random_range(0..SUFFIXES.len())]
            ),
        );
        let unit = if rng.random_bool(0.1) {
            format!("Apt {}", rng.random_range(1..40))
        } else {
            String::new()
        };
        address.insert("unit".to_string(), unit);
        address.insert("city".to_string(), format!("{locale} City"));
        address.insert("zip".to_string(), format!("{:05}", 50_000 + locale_index));
        let start = NaiveDate::MIN;
        VoterRecord {
            voter_id: voter_id(index),
            locale: locale.to_string(),
            first_name: FIRST[rng.random_range(0..FIRST.len())].to_string(),
            middle_name: MIDDLE[rng.random_range(0..MIDDLE.len())].to_string(),
            last_name: LAST[rng.random_range(0..LAST.len())].to_string(),
            address,
            status: VoterStatus::Active,
            party: pick(rng, &PARTIES).to_string(),
            gender: pick(rng, &GENDERS).to_string(),
            birth_date: None,
            registration_date: start,
            last_update_date: start,
            vote_history: Vec::new(),
        }
    }

    /// A voter registered before `as_of`, with a vote history over the
    /// schedule. Propensity to vote rises with age.
    pub fn existing<R: Rng>(
        &self,
        rng: &mut R,
        index: usize,
        locale_index: usize,
        locale: &str,
        status: VoterStatus,
        as_of: NaiveDate,
    ) -> VoterRecord {
        let mut v = self.base(rng, index, locale_index, locale);
        let age_years = 18.0 + 72.0 * rng.random::<f64>().powf(1.2);
        let birth = as_of - Days::new((age_years * 365.25) as u64);
        let adult = add_years(birth, 18);
        let earliest = adult.max(add_years(as_of, -40));
        v.registration_date = uniform_date(rng, earliest, as_of - Days::new(1));
        v.last_update_date = uniform_date(rng, v.registration_date, as_of - Days::new(1));
        v.birth_date = (!rng.random_bool(0.01)).then_some(birth);
        v.status = status;
        let propensity = (0.1 + 0.5 * rng.random::<f64>() + 0.4 * (age_years - 18.0) / 72.0).min(0.97);
        let partisan = matches!(v.party.as_str(), "DEM" | "REP" | "LIB");
        for (id, date, primary) in &self.schedule {
            if *date <= v.registration_date || *date >= as_of {
                continue;
            }
            let p = if *primary { propensity * 0.45 } else { propensity };
            if !rng.random_bool(p) {
                continue;
            }
            let u = rng.random::<f64>();
            let kind = if u < 0.85 {
                BallotKind::Regular
            } else if u < 0.97 {
                BallotKind::Absentee
            } else {
                BallotKind::Provisional
            };
            let party_ballot = primary.then(|| {
                if partisan {
                    v.party.clone()
                } else if rng.random_bool(0.5) {
                    "DEM".to_string()
                } else {
                    "REP".to_string()
                }
            });
            v.vote_history.push(VoteRecord {
                election_id: id.clone(),
                date: *date,
                kind,
                party_ballot,
            });
        }
        v
    }

    /// A young voter registering on `date`.
    pub fn registrant<R: Rng>(&self, rng: &mut R, index: usize, locale_index: usize, locale: &str, date: NaiveDate) -> VoterRecord {
        let mut v = self.base(rng, index, locale_index, locale);
        let age_years = 18.0 + 30.0 * rng.random::<f64>().powi(2);
        v.birth_date = Some(date - Days::new((age_years * 365.25) as u64));
        v.registration_date = date;
        v.last_update_date = date;
        v
    }
}

/// Replaces `current` with a different (after normalisation) entry of `options`.
fn different<R: Rng>(rng: &mut R, current: &str, options: impl Fn(&mut R) -> String) -> String {
    let cur = normalize(current);
    loop {
        let next = options(rng);
        if normalize(&next) != cur {
            return next;
        }
    }
}

pub(crate) fn new_house_num<R: Rng>(rng: &mut R, current: &str) -> String {
    different(rng, current, |r| r.random_range(1..10_000).to_string())
}

pub(crate) fn new_street<R: Rng>(rng: &mut R, current: &str) -> String {
    different(rng, current, |r| {
        format!(
            "{} {}",
            STREETS[r.random_range(0..STREETS.len())],
            SUFFIXES[r.random_range(0..SUFFIXES.len())]
        )
    })
}

pub(crate) fn new_last_name<R: Rng>(rng: &mut R, current: &str) -> String {
    different(rng, current, |r| LAST[r.random_range(0..LAST.len())].to_string())
}

pub(crate) fn new_party<R: Rng>(rng: &mut R, current: &str) -> String {
    different(rng, current, |r| pick(r, &PARTIES).to_string())
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Sampling weight of a voter under a bias profile. Always positive.
pub(crate) fn bias_weight(profile: BiasProfile, v: &VoterRecord, changes: u32, as_of: NaiveDate) -> f64 {
    let years = |d: NaiveDate| (as_of - d).num_days() as f64 / 365.25;
    let since_vote = v.vote_history.iter().map(|r| r.date).max().map(years).unwrap_or(40.0);
    let age = v.birth_date.map(years).unwrap_or(45.0);
    match profile {
        BiasProfile::Uniform => 1.0,
        BiasProfile::NonVoters => 0.02 + clamp01(since_vote / 6.0).powi(3) * clamp01((70.0 - age) / 30.0),
        BiasProfile::OlderNonVoters => 0.01 + clamp01((age - 50.0) / 25.0).powi(3) * clamp01(since_vote / 6.0),
        BiasProfile::StableRecords => {
            let tenure = clamp01(years(v.registration_date) / 25.0);
            let untouched = if changes == 0 { 1.0 } else { 0.05 };
            0.02 + tenure.powi(3) * untouched * clamp01(3.0 - since_vote)
        }
    }
}
