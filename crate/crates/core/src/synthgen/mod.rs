//! Seeded synthetic voter files with known ground truth.
//!
//! Generation runs at two levels. [`plan_scenario`] draws every cell's change
//! count (organic Poisson background, systematic events, planted anomalies)
//! while tracking per-locale active/inactive/pending pools exactly, so the
//! modification matrices of a full-size scenario are available without
//! materialising a single voter. [`Realizer`] then turns a plan into voter
//! records, one interval at a time, producing exactly the planned counts.

mod plan;
mod realize;
mod truth;
mod voters;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groupfeatures::EventLabel;
use crate::seed;
use crate::vrf_io::{ChangeType, Snapshot};

pub use plan::{plan_scenario, ScenarioPlan};
pub use realize::{Realizer, Step};
pub use truth::{
    labeled_group_features, scenario_labels, Cause, CellLabel, CellTruth, GroundTruth, LabelRequest, TaggedChange,
};

/// Locale sizes are log-normal around `median`, floored at `min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub median: f64,
    pub sigma: f64,
    pub min: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            median: 10_000.0,
            sigma: 0.6,
            min: 1_000,
        }
    }
}

/// How an event picks the voters it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasProfile {
    Uniform,
    /// Voters who have not voted for years.
    NonVoters,
    /// Long-registered voters whose records have not changed.
    StableRecords,
    /// Older voters who stopped voting.
    OlderNonVoters,
}

/// Size of an event or anomaly in one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Amount {
    /// Poisson with mean `multiplier ×` the change type's base rate.
    Multiplier(f64),
    /// Exactly `round(rate · days · pop / 1000)` changes.
    Rate(f64),
    Count(u64),
}

impl Amount {
    fn validate(&self, what: &str) -> Result<()> {
        match *self {
            Amount::Multiplier(x) | Amount::Rate(x) if !(x.is_finite() && x >= 0.0) => {
                Err(Error::Config(format!("{what}: amount must be finite and ≥ 0, got {x}")))
            }
            _ => Ok(()),
        }
    }

    pub(crate) fn draw<R: Rng>(&self, base_rate: f64, days: u32, population: u64, scale: f64, rng: &mut R) -> u64 {
        let exposure = f64::from(days) * population as f64 / 1000.0;
        match *self {
            Amount::Multiplier(m) => poisson(rng, scale * m * base_rate * exposure),
            Amount::Rate(r) => (scale * r * exposure).round() as u64,
            Amount::Count(n) => n,
        }
    }
}

pub(crate) fn poisson<R: Rng>(rng: &mut R, lambda: f64) -> u64 {
    use rand_distr::{Distribution, Poisson};
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive finite mean").sample(rng) as u64
}

/// A systematic process hitting a set of locales in a set of intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub label: EventLabel,
    pub change_type: ChangeType,
    pub locales: Vec<usize>,
    pub intervals: Vec<usize>,
    pub amount: Amount,
    pub bias: BiasProfile,
    /// Each affected locale scales multiplier and rate amounts by a factor
    /// drawn once from `1 ± spread`, shared by all of the event's intervals.
    #[serde(default)]
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedAnomaly {
    pub locale: usize,
    pub interval: usize,
    pub change_type: ChangeType,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_locales: usize,
    pub n_intervals: usize,
    pub interval_days: u32,
    /// Date of the first snapshot.
    pub start_date: NaiveDate,
    pub population: PopulationConfig,
    /// Organic changes per day per 1000 registered voters. Missing types
    /// have rate 0.
    pub base_rates: BTreeMap<ChangeType, f64>,
    pub pending_fraction: f64,
    pub inactive_fraction: f64,
    pub events: Vec<EventSpec>,
    pub planted: Vec<PlantedAnomaly>,
    pub seed: u64,
}

pub fn default_base_rates() -> BTreeMap<ChangeType, f64> {
    use ChangeType::*;
    BTreeMap::from([
        (Address, 0.3),
        (Name, 0.05),
        (Removal, 0.1),
        (Registration, 0.4),
        (Deactivation, 0.1),
        (Activation, 0.08),
        (Party, 0.05),
    ])
}

/// Event occurrences and planted cells as fractions of the timeline. On the
/// default weekly grid from January 2019 the September positions fall in
/// September of each year.
const SEPTEMBER_POSITIONS: [f64; 3] = [0.235, 0.584, 0.933];
const MAILING_POSITIONS: [f64; 2] = [0.45, 0.792];
const NCOA_POSITIONS: [f64; 3] = [0.054, 0.403, 0.698];
const PLANTED_POSITIONS: [f64; 4] = [0.134, 0.336, 0.503, 0.872];
const OTHER_CLUSTERS: usize = 30;
/// Locale-to-locale intensity variation of the standard events.
const EVENT_SPREAD: f64 = 0.5;
const OTHER_MAX_VOTERS: u64 = 15;
/// Planted anomalies are this many times the expected deactivation mean.
pub const PLANTED_FACTOR: f64 = 10.0;

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::standard(0)
    }
}

impl ScenarioConfig {
    /// 99 locales × 149 weekly intervals of organic background only.
    pub fn quiet(seed: u64) -> Self {
        Self {
            n_locales: 99,
            n_intervals: 149,
            interval_days: 7,
            start_date: NaiveDate::from_ymd_opt(2019, 1, 3).unwrap(),
            population: PopulationConfig::default(),
            base_rates: default_base_rates(),
            pending_fraction: 0.02,
            inactive_fraction: 0.08,
            events: Vec::new(),
            planted: Vec::new(),
            seed,
        }
    }

    /// The default 99 × 149 scenario with the four deactivation event kinds
    /// and four planted deactivation anomalies.
    pub fn standard(seed: u64) -> Self {
        Self::standard_shape(99, 149, seed)
    }

    /// Standard events and anomalies laid out on an arbitrary grid.
    ///
    /// Every event runs for two consecutive intervals per occurrence.
    /// Inactivity mailings hit every locale in two occurrences, each with its
    /// own locale profile; September maintenance hits about 45% of locales
    /// each September; NCOA processing hits about 40% of locales three
    /// times. 30 small clusters of at most 15 voters land on random cells
    /// outside those columns.
    pub fn standard_shape(n_locales: usize, n_intervals: usize, seed: u64) -> Self {
        let mut c = Self::quiet(seed);
        c.n_locales = n_locales;
        c.n_intervals = n_intervals;
        if n_locales == 0 || n_intervals == 0 {
            return c;
        }
        let at = |f: f64| ((f * n_intervals as f64).round() as usize).min(n_intervals - 1);
        let spans = |fs: &[f64]| {
            fs.iter()
                .flat_map(|&f| [at(f), (at(f) + 1).min(n_intervals - 1)])
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect::<Vec<_>>()
        };
        let subset = |name: &str, share: f64| {
            let n = ((share * n_locales as f64).round() as usize).clamp(1, n_locales);
            let mut v = index::sample(&mut seed::sub_rng(seed, name, 0), n_locales, n).into_vec();
            v.sort_unstable();
            v
        };
        let all: Vec<usize> = (0..n_locales).collect();
        let mailing = |f: f64| EventSpec {
            label: EventLabel::InactivityMailingResponseProcessing,
            change_type: ChangeType::Deactivation,
            locales: all.clone(),
            intervals: spans(&[f]),
            amount: Amount::Multiplier(40.0),
            bias: BiasProfile::NonVoters,
            spread: EVENT_SPREAD,
        };
        c.events = vec![
            mailing(MAILING_POSITIONS[0]),
            mailing(MAILING_POSITIONS[1]),
            EventSpec {
                label: EventLabel::SystematicSeptemberMaintenance,
                change_type: ChangeType::Deactivation,
                locales: subset("september-locales", 45.0 / 99.0),
                intervals: spans(&SEPTEMBER_POSITIONS),
                amount: Amount::Multiplier(25.0),
                bias: BiasProfile::StableRecords,
                spread: EVENT_SPREAD,
            },
            EventSpec {
                label: EventLabel::NcoaMailings,
                change_type: ChangeType::Deactivation,
                locales: subset("ncoa-locales", 40.0 / 99.0),
                intervals: spans(&NCOA_POSITIONS),
                amount: Amount::Multiplier(30.0),
                bias: BiasProfile::OlderNonVoters,
                spread: EVENT_SPREAD,
            },
        ];
        let busy: BTreeSet<usize> = c.events.iter().flat_map(|e| e.intervals.iter().copied()).collect();
        let rate = PLANTED_FACTOR * c.expected_mean(ChangeType::Deactivation);
        let mut rng = seed::sub_rng(seed, "planted", 0);
        let mut taken = BTreeSet::new();
        for f in PLANTED_POSITIONS {
            let cell = (rng.random_range(0..n_locales), at(f));
            if taken.insert(cell) {
                c.planted.push(PlantedAnomaly {
                    locale: cell.0,
                    interval: cell.1,
                    change_type: ChangeType::Deactivation,
                    amount: Amount::Rate(rate),
                });
            }
        }
        let free: Vec<usize> = (0..n_intervals).filter(|j| !busy.contains(j)).collect();
        let mut rng = seed::sub_rng(seed, "other-clusters", 0);
        let mut attempts = 0;
        let mut clusters = 0;
        while clusters < OTHER_CLUSTERS && !free.is_empty() && attempts < 100 * OTHER_CLUSTERS {
            attempts += 1;
            let cell = (rng.random_range(0..n_locales), free[rng.random_range(0..free.len())]);
            if !taken.insert(cell) {
                continue;
            }
            c.events.push(EventSpec {
                label: EventLabel::Other,
                change_type: ChangeType::Deactivation,
                locales: vec![cell.0],
                intervals: vec![cell.1],
                amount: Amount::Count(rng.random_range(3..=OTHER_MAX_VOTERS)),
                bias: BiasProfile::Uniform,
                spread: 0.0,
            });
            clusters += 1;
        }
        c
    }

    pub fn base_rate(&self, change_type: ChangeType) -> f64 {
        self.base_rates.get(&change_type).copied().unwrap_or(0.0)
    }

    /// Expected matrix mean of `change_type` from the base rate and the
    /// multiplier events. Count and rate amounts are ignored.
    pub fn expected_mean(&self, change_type: ChangeType) -> f64 {
        let cells = (self.n_locales * self.n_intervals).max(1) as f64;
        let lift: f64 = self
            .events
            .iter()
            .filter(|e| e.change_type == change_type)
            .map(|e| match e.amount {
                Amount::Multiplier(m) => m * (e.locales.len() * e.intervals.len()) as f64 / cells,
                _ => 0.0,
            })
            .sum();
        self.base_rate(change_type) * (1.0 + lift)
    }

    pub fn locale_names(&self) -> Vec<String> {
        (0..self.n_locales).map(|i| format!("L{:03}", i + 1)).collect()
    }

    pub fn snapshot_dates(&self) -> Vec<NaiveDate> {
        (0..=self.n_intervals)
            .map(|j| self.start_date + chrono::Days::new(u64::from(self.interval_days) * j as u64))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_locales == 0 || self.n_intervals == 0 || self.interval_days == 0 {
            return Err(Error::Config(format!(
                "scenario needs at least one locale, interval and day, got {} × {} × {}",
                self.n_locales, self.n_intervals, self.interval_days
            )));
        }
        let p = &self.population;
        if !(p.median.is_finite() && p.median >= 0.0 && p.sigma.is_finite() && p.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "population median and sigma must be finite and ≥ 0, got {} and {}",
                p.median, p.sigma
            )));
        }
        for (ct, r) in &self.base_rates {
            if !(r.is_finite() && *r >= 0.0) {
                return Err(Error::Config(format!("base rate for {ct} must be finite and ≥ 0, got {r}")));
            }
        }
        for (name, f) in [("pending", self.pending_fraction), ("inactive", self.inactive_fraction)] {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("{name} fraction must be in [0, 1), got {f}")));
            }
        }
        if self.pending_fraction + self.inactive_fraction >= 1.0 {
            return Err(Error::Config("pending and inactive fractions leave no active voters".into()));
        }
        for (k, e) in self.events.iter().enumerate() {
            let what = format!("event {k} ({})", e.label);
            e.amount.validate(&what)?;
            if !(0.0..=1.0).contains(&e.spread) {
                return Err(Error::Config(format!("{what}: spread must be in [0, 1], got {}", e.spread)));
            }
            if let Some(i) = e.locales.iter().find(|&&i| i >= self.n_locales) {
                return Err(Error::Config(format!(
                    "{what} references unknown locale {i} (scenario has {})",
                    self.n_locales
                )));
            }
            if let Some(j) = e.intervals.iter().find(|&&j| j >= self.n_intervals) {
                return Err(Error::Config(format!(
                    "{what} references unknown interval {j} (scenario has {})",
                    self.n_intervals
                )));
            }
        }
        for (k, a) in self.planted.iter().enumerate() {
            let what = format!("planted anomaly {k}");
            a.amount.validate(&what)?;
            if a.locale >= self.n_locales || a.interval >= self.n_intervals {
                return Err(Error::Config(format!(
                    "{what} at ({}, {}) is outside the {} × {} grid",
                    a.locale, a.interval, self.n_locales, self.n_intervals
                )));
            }
        }
        Ok(())
    }
}

/// Snapshots at every interval boundary plus the ground truth, with each
/// change tagged by its cause. Holds every snapshot in memory, so meant for
/// small populations; [`Realizer`] streams instead.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<(Vec<Snapshot>, GroundTruth)> {
    let plan = plan_scenario(config)?;
    let mut truth = plan.truth();
    let mut realizer = Realizer::new(&plan)?;
    let mut snapshots = vec![realizer.snapshot()?];
    while let Some(step) = realizer.step()? {
        truth.changes.extend(step.changes);
        snapshots.push(realizer.snapshot()?);
    }
    Ok((snapshots, truth))
}

#[cfg(test)]
mod tests;
