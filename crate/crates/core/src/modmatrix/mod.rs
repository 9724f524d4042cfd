//! Modification matrices: locales × date intervals of normalised change counts.
//!
//! Entry `(i, j)` holds the number of changes of one type in locale `i`
//! during interval `j`, expressed as changes per day per 1000 registered
//! voters. The population used is the locale's registered count at the
//! interval start.

pub(crate) mod csv_support;
mod population;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Days, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::vrf_io::{ChangeRecord, ChangeType};

pub use csv_support::{csv_to_matrix, format_sig, matrix_to_csv, read_matrix, write_matrix};
pub use population::PopulationTable;

/// Half-open date interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Interval {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Interval {
    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days()
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date < self.end
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Equal-width contiguous intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalGrid {
    pub start: NaiveDate,
    pub days: u32,
    pub count: usize,
}

impl IntervalGrid {
    pub fn new(start: NaiveDate, days: u32, count: usize) -> Result<Self> {
        if days == 0 {
            return Err(Error::Precondition("interval_days must be at least 1".into()));
        }
        if count == 0 {
            return Err(Error::Precondition("an interval grid needs at least one interval".into()));
        }
        Ok(Self { start, days, count })
    }

    /// Grid for snapshots taken every `days` days starting at `first_snapshot`.
    ///
    /// A diff between snapshots at `t` and `t + days` covers the days
    /// `t + 1 ..= t + days`; keyed by posterior date it therefore lands in
    /// `[t + 1, t + days + 1)`, whose start is preceded by the anterior
    /// snapshot.
    pub fn for_snapshots(first_snapshot: NaiveDate, days: u32, count: usize) -> Result<Self> {
        Self::new(first_snapshot + Days::new(1), days, count)
    }

    /// Smallest grid of `days`-wide intervals, aligned on the first snapshot
    /// in `populations`, that covers every snapshot after it.
    pub fn for_population_table(populations: &PopulationTable, days: u32) -> Result<Self> {
        let (first, last) = match (populations.first_date(), populations.last_date()) {
            (Some(f), Some(l)) if l > f => (f, l),
            _ => {
                return Err(Error::Precondition(
                    "population table needs at least two snapshot dates".into(),
                ))
            }
        };
        if days == 0 {
            return Err(Error::Precondition("interval_days must be at least 1".into()));
        }
        let span = (last - first).num_days() as usize;
        let count = span.div_ceil(days as usize);
        Self::for_snapshots(first, days, count)
    }

    pub fn interval(&self, j: usize) -> Interval {
        let start = self.start + Days::new(j as u64 * u64::from(self.days));
        Interval {
            start,
            end: start + Days::new(u64::from(self.days)),
        }
    }

    pub fn intervals(&self) -> Vec<Interval> {
        (0..self.count).map(|j| self.interval(j)).collect()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        if offset < 0 {
            return None;
        }
        let j = (offset / i64::from(self.days)) as usize;
        (j < self.count).then_some(j)
    }
}

/// Row/column coordinates of one matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MatrixEntryRef {
    pub locale_index: usize,
    pub interval_index: usize,
}

impl MatrixEntryRef {
    pub fn new(locale_index: usize, interval_index: usize) -> Self {
        Self {
            locale_index,
            interval_index,
        }
    }
}

/// Changes per day per 1000 voters.
pub fn normalized_rate(count: u64, days: i64, population: u64) -> f64 {
    if population == 0 {
        return 0.0;
    }
    count as f64 / days as f64 / (population as f64 / 1000.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModificationMatrix {
    change_type: ChangeType,
    locales: Vec<String>,
    intervals: Vec<Interval>,
    values: DMatrix<f64>,
    raw_counts: DMatrix<u64>,
    populations: DMatrix<u64>,
}

impl ModificationMatrix {
    /// Builds a matrix from counts, deriving the normalised values.
    ///
    /// Cells with population 0 are excluded: they must have no changes, get
    /// value 0, and are left out of every detector's statistics.
    pub fn from_counts(
        change_type: ChangeType,
        locales: Vec<String>,
        intervals: Vec<Interval>,
        raw_counts: DMatrix<u64>,
        populations: DMatrix<u64>,
    ) -> Result<Self> {
        let values = DMatrix::from_fn(raw_counts.nrows(), raw_counts.ncols(), |i, j| {
            let days = intervals.get(j).map(Interval::days).unwrap_or(1);
            normalized_rate(raw_counts[(i, j)], days, populations[(i, j)])
        });
        let m = Self {
            change_type,
            locales,
            intervals,
            values,
            raw_counts,
            populations,
        };
        m.validate()?;
        for ((i, j), _) in m.excluded_cells() {
            if m.raw_counts[(i, j)] > 0 {
                return Err(Error::Data(format!(
                    "missing population for occupied cell (locale {}, interval {})",
                    m.locales[i], m.intervals[j]
                )));
            }
        }
        Ok(m)
    }

    /// Matrix with placeholder labels (locales `L000..`, weekly intervals from
    /// 2019-01-01), populations of 1000 and no raw counts. For detector work
    /// on bare grids.
    pub fn from_grid(change_type: ChangeType, values: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = values.shape();
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "matrices must have ℓ ≥ 1 and d ≥ 1, got {rows}×{cols}"
            )));
        }
        let grid = IntervalGrid::new(NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), 7, cols)?;
        let m = Self {
            change_type,
            locales: (0..rows).map(|i| format!("L{i:03}")).collect(),
            intervals: grid.intervals(),
            values,
            raw_counts: DMatrix::zeros(rows, cols),
            populations: DMatrix::from_element(rows, cols, 1000),
        };
        m.validate()?;
        Ok(m)
    }

    /// Replaces the value grid, keeping labels, counts and populations.
    /// Used for values-level perturbations, after which values are no
    /// longer derivable from counts.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::Dimension {
                expected: self.values.len(),
                actual: values.len(),
            });
        }
        let m = Self {
            values,
            ..self.clone()
        };
        m.validate()?;
        Ok(m)
    }

    pub(crate) fn from_parts(
        change_type: ChangeType,
        locales: Vec<String>,
        intervals: Vec<Interval>,
        values: DMatrix<f64>,
        raw_counts: DMatrix<u64>,
        populations: DMatrix<u64>,
    ) -> Result<Self> {
        let m = Self {
            change_type,
            locales,
            intervals,
            values,
            raw_counts,
            populations,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let (rows, cols) = (self.locales.len(), self.intervals.len());
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "matrices must have ℓ ≥ 1 and d ≥ 1, got {rows}×{cols}"
            )));
        }
        for grid in [self.values.shape(), self.raw_counts.shape(), self.populations.shape()] {
            if grid != (rows, cols) {
                return Err(Error::Dimension {
                    expected: rows * cols,
                    actual: grid.0 * grid.1,
                });
            }
        }
        if let Some(w) = self.locales.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Validation(format!(
                "locales must be unique and ascending ('{}' then '{}')",
                w[0], w[1]
            )));
        }
        for (j, iv) in self.intervals.iter().enumerate() {
            if iv.end <= iv.start {
                return Err(Error::Validation(format!("interval {j} {iv} is empty")));
            }
            if let Some(next) = self.intervals.get(j + 1) {
                if next.start != iv.end {
                    return Err(Error::Validation(format!(
                        "intervals {iv} and {next} are not contiguous"
                    )));
                }
            }
        }
        if let Some(((i, j), v)) = self
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| ((k % rows, k / rows), v))
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::Validation(format!(
                "value {v} at (locale {}, interval {}) is not a finite non-negative number",
                self.locales[i], self.intervals[j].start
            )));
        }
        Ok(())
    }

    pub fn change_type(&self) -> ChangeType {
        self.change_type
    }

    pub fn locales(&self) -> &[String] {
        &self.locales
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn raw_counts(&self) -> &DMatrix<u64> {
        &self.raw_counts
    }

    pub fn populations(&self) -> &DMatrix<u64> {
        &self.populations
    }

    /// `(locales, intervals)`.
    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_excluded(&self, i: usize, j: usize) -> bool {
        self.populations[(i, j)] == 0
    }

    fn excluded_cells(&self) -> impl Iterator<Item = ((usize, usize), u64)> + '_ {
        let (rows, cols) = self.shape();
        (0..rows)
            .flat_map(move |i| (0..cols).map(move |j| (i, j)))
            .filter(|&(i, j)| self.is_excluded(i, j))
            .map(|(i, j)| ((i, j), self.raw_counts[(i, j)]))
    }

    /// Mean over all entries.
    pub fn mean_value(&self) -> f64 {
        self.values.mean()
    }

    pub fn total_count(&self) -> u64 {
        self.raw_counts.iter().sum()
    }
}

/// Aggregates `changes` of type `change_type` into a modification matrix.
///
/// Each matching change increments the cell of its locale and the interval
/// containing its posterior date. Rows cover every locale seen in either the
/// changes or the population table.
pub fn build_matrix(
    changes: &[ChangeRecord],
    change_type: ChangeType,
    grid: &IntervalGrid,
    populations: &PopulationTable,
) -> Result<ModificationMatrix> {
    let intervals = grid.intervals();
    let mut locale_set: BTreeSet<&str> = populations.locales().collect();
    let mut counts: BTreeMap<(&str, usize), u64> = BTreeMap::new();
    let mut outside = Vec::new();
    for c in changes.iter().filter(|c| c.change_type == change_type) {
        match grid.index_of(c.posterior_date) {
            Some(j) => {
                locale_set.insert(&c.locale);
                *counts.entry((c.locale.as_str(), j)).or_insert(0) += 1;
            }
            None => outside.push(c.posterior_date),
        }
    }
    if !outside.is_empty() {
        outside.sort();
        outside.dedup();
        return Err(Error::Data(format!(
            "{} posterior date(s) fall outside the interval grid [{}, {}): {}",
            outside.len(),
            grid.start,
            grid.interval(grid.count - 1).end,
            outside.iter().take(5).map(ToString::to_string).collect::<Vec<_>>().join(", ")
        )));
    }
    let locales: Vec<String> = locale_set.iter().map(|s| s.to_string()).collect();
    let (rows, cols) = (locales.len(), intervals.len());
    let mut raw = DMatrix::<u64>::zeros(rows, cols);
    let mut pops = DMatrix::<u64>::zeros(rows, cols);
    let mut excluded = 0usize;
    for (i, locale) in locales.iter().enumerate() {
        for (j, iv) in intervals.iter().enumerate() {
            let count = counts.get(&(locale.as_str(), j)).copied().unwrap_or(0);
            let pop = populations.population(locale, iv.start).unwrap_or(0);
            if pop == 0 {
                if count > 0 {
                    return Err(Error::Data(format!(
                        "missing population for occupied cell (locale {locale}, interval {iv})"
                    )));
                }
                excluded += 1;
            }
            raw[(i, j)] = count;
            pops[(i, j)] = pop;
        }
    }
    if excluded > 0 {
        log::warn!(
            "{change_type} matrix: {excluded} cell(s) have no registered voters and are excluded"
        );
    }
    ModificationMatrix::from_counts(change_type, locales, intervals, raw, pops)
}

/// Largest `count` singular values of the value grid, non-increasing.
pub fn top_singular_values(m: &ModificationMatrix, count: usize) -> Result<Vec<f64>> {
    let (rows, cols) = m.shape();
    if count > rows.min(cols) {
        return Err(Error::Precondition(format!(
            "requested {count} singular values from a {rows}×{cols} matrix"
        )));
    }
    let mut s = linalg::singular_values(m.values());
    s.truncate(count);
    Ok(s)
}
