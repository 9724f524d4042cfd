use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Realizer, ScenarioPlan};
use crate::error::{Error, Result};
use crate::groupfeatures::{group_features, ChangeIndex, EventLabel, FeatureConfig, GroupFeatureVector, GroupKey};
use crate::modmatrix::{IntervalGrid, MatrixEntryRef};
use crate::seed;
use crate::vrf_io::{ChangeRecord, ChangeType};

/// Why a change happened. `event` and `anomaly` index the scenario
/// configuration's lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum Cause {
    Organic,
    Event { label: EventLabel, event: usize },
    Planted { anomaly: usize },
}

/// Non-organic changes in one cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellTruth {
    pub change_type: ChangeType,
    pub locale: usize,
    pub interval: usize,
    #[serde(flatten)]
    pub cause: Cause,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedChange {
    #[serde(flatten)]
    pub change: ChangeRecord,
    #[serde(flatten)]
    pub cause: Cause,
}

/// Dominant cause of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellLabel {
    Organic,
    Event(EventLabel),
    Anomaly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub locales: Vec<String>,
    pub snapshot_dates: Vec<NaiveDate>,
    pub interval_days: u32,
    /// Sorted by change type, locale, interval and cause.
    pub cells: Vec<CellTruth>,
    pub inserted_voters: u64,
    pub removed_voters: u64,
    /// Every change of a realised scenario, in diff order per interval.
    /// Empty for plan-only scenarios.
    pub changes: Vec<TaggedChange>,
}

impl GroundTruth {
    pub fn n_intervals(&self) -> usize {
        self.snapshot_dates.len().saturating_sub(1)
    }

    pub fn grid(&self) -> Result<IntervalGrid> {
        let first = *self
            .snapshot_dates
            .first()
            .ok_or_else(|| Error::Validation("ground truth has no snapshot dates".into()))?;
        IntervalGrid::for_snapshots(first, self.interval_days, self.n_intervals())
    }

    /// Cells holding planted changes of `change_type`.
    pub fn planted_cells(&self, change_type: ChangeType) -> BTreeSet<MatrixEntryRef> {
        self.cells
            .iter()
            .filter(|c| c.change_type == change_type && matches!(c.cause, Cause::Planted { .. }) && c.count > 0)
            .map(|c| MatrixEntryRef::new(c.locale, c.interval))
            .collect()
    }

    /// Planted cells win; otherwise the event with the most changes, ties
    /// to the earlier event.
    pub fn cell_label(&self, change_type: ChangeType, locale: usize, interval: usize) -> CellLabel {
        let mut best: Option<(u64, usize, EventLabel)> = None;
        for c in self
            .cells
            .iter()
            .filter(|c| c.change_type == change_type && c.locale == locale && c.interval == interval && c.count > 0)
        {
            match c.cause {
                Cause::Planted { .. } => return CellLabel::Anomaly,
                Cause::Event { label, event } => {
                    let better = match best {
                        None => true,
                        Some((n, e, _)) => c.count > n || (c.count == n && event < e),
                    };
                    if better {
                        best = Some((c.count, event, label));
                    }
                }
                Cause::Organic => {}
            }
        }
        best.map_or(CellLabel::Organic, |(_, _, l)| CellLabel::Event(l))
    }

    /// Cells of `change_type` whose dominant cause is a systematic event.
    pub fn systematic_cells(&self, change_type: ChangeType) -> Vec<(usize, usize, EventLabel)> {
        let cells: BTreeSet<(usize, usize)> = self
            .cells
            .iter()
            .filter(|c| c.change_type == change_type)
            .map(|c| (c.locale, c.interval))
            .collect();
        cells
            .into_iter()
            .filter_map(|(i, j)| match self.cell_label(change_type, i, j) {
                CellLabel::Event(l) => Some((i, j, l)),
                _ => None,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Validation(format!("malformed ground truth: {e}")))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// How many labeled groups to draw and in what class proportions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRequest {
    pub total: usize,
    pub proportions: Vec<(EventLabel, f64)>,
}

impl Default for LabelRequest {
    fn default() -> Self {
        Self {
            total: 184,
            proportions: vec![
                (EventLabel::InactivityMailingResponseProcessing, 99.0),
                (EventLabel::SystematicSeptemberMaintenance, 37.0),
                (EventLabel::NcoaMailings, 27.0),
                (EventLabel::Other, 21.0),
            ],
        }
    }
}

impl LabelRequest {
    /// Per-label counts by largest remainder, ties to the earlier label.
    pub fn counts(&self) -> Vec<(EventLabel, usize)> {
        let sum: f64 = self.proportions.iter().map(|(_, p)| p.max(0.0)).sum();
        if sum <= 0.0 {
            return self.proportions.iter().map(|(l, _)| (*l, 0)).collect();
        }
        let exact: Vec<f64> = self
            .proportions
            .iter()
            .map(|(_, p)| self.total as f64 * p.max(0.0) / sum)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
        let short = self.total - counts.iter().sum::<usize>();
        for &k in order.iter().take(short) {
            counts[k] += 1;
        }
        self.proportions.iter().map(|(l, _)| *l).zip(counts).collect()
    }
}

/// Draws labeled change groups from the systematic cells of `change_type`.
///
/// Each label gets its share of `request.total`; when a label has fewer
/// cells than its share, all of them are used and a warning is logged.
/// Returned pairs are sorted by group key.
pub fn scenario_labels(
    truth: &GroundTruth,
    change_type: ChangeType,
    request: &LabelRequest,
    seed: u64,
) -> Result<Vec<(GroupKey, EventLabel)>> {
    let cells = truth.systematic_cells(change_type);
    let kinds: BTreeSet<EventLabel> = cells.iter().map(|c| c.2).collect();
    if kinds.len() < 2 {
        return Err(Error::Precondition(format!(
            "labeling needs at least two event kinds for {change_type}, found {}",
            kinds.len()
        )));
    }
    let grid = truth.grid()?;
    let mut out = Vec::new();
    for (label, want) in request.counts() {
        let mut pool: Vec<(usize, usize)> = cells.iter().filter(|c| c.2 == label).map(|c| (c.0, c.1)).collect();
        pool.shuffle(&mut seed::sub_rng(seed, "labels", label.index() as u64));
        if pool.len() < want {
            log::warn!("only {} {label} cells available, {want} requested", pool.len());
        }
        for (i, j) in pool.into_iter().take(want) {
            out.push((
                GroupKey {
                    locale: truth.locales[i].clone(),
                    interval: grid.interval(j),
                    change_type,
                },
                label,
            ));
        }
    }
    out.sort();
    Ok(out)
}

/// Realises `plan` and computes the feature vector of each labeled group
/// from the voters as they stand right after its interval. Output follows
/// the order of `labels`.
pub fn labeled_group_features(
    plan: &ScenarioPlan,
    labels: &[(GroupKey, EventLabel)],
    config: FeatureConfig,
) -> Result<Vec<GroupFeatureVector>> {
    let grid = plan.grid();
    let mut wanted: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, (key, _)) in labels.iter().enumerate() {
        let j = grid
            .index_of(key.interval.start)
            .filter(|&j| grid.interval(j) == key.interval)
            .ok_or_else(|| Error::Validation(format!("group interval {} is not on the scenario grid", key.interval)))?;
        wanted.entry(j).or_default().push(k);
    }
    let last = wanted.keys().next_back().copied();
    let mut out: Vec<Option<GroupFeatureVector>> = vec![None; labels.len()];
    let mut realizer = Realizer::new(plan)?;
    let mut index = ChangeIndex::default();
    while let Some(step) = realizer.step()? {
        for c in &step.changes {
            index.insert(&c.change);
        }
        if let Some(ks) = wanted.get(&step.interval) {
            for &k in ks {
                let (key, label) = &labels[k];
                let members: Vec<ChangeRecord> = step
                    .changes
                    .iter()
                    .filter(|c| c.change.change_type == key.change_type && c.change.locale == key.locale)
                    .map(|c| c.change.clone())
                    .collect();
                let report = group_features(
                    key,
                    &members,
                    |c| {
                        if c.change_type == ChangeType::Removal {
                            step.removed.get(&c.voter_id)
                        } else {
                            realizer.get(&c.voter_id)
                        }
                    },
                    realizer.calendar(),
                    &index,
                    config,
                )?;
                let mut v = report.vector;
                v.label = Some(*label);
                out[k] = Some(v);
            }
        }
        if Some(step.interval) == last {
            break;
        }
    }
    Ok(out.into_iter().map(|v| v.expect("every labeled interval was realised")).collect())
}
