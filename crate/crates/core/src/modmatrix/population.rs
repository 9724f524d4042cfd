use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result, RowError};
use crate::vrf_io::{parse_date, Snapshot};

/// Registered voters per locale at each snapshot date.
///
/// Stored as CSV with columns `snapshot_date,locale,registered`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PopulationTable {
    by_date: BTreeMap<NaiveDate, BTreeMap<String, u64>>,
}

impl PopulationTable {
    pub fn insert(&mut self, date: NaiveDate, locale: &str, registered: u64) {
        self.by_date
            .entry(date)
            .or_default()
            .insert(locale.to_string(), registered);
    }

    pub fn insert_counts(&mut self, date: NaiveDate, counts: &BTreeMap<String, u64>) {
        let row = self.by_date.entry(date).or_default();
        for (locale, n) in counts {
            row.insert(locale.clone(), *n);
        }
    }

    pub fn add_snapshot(&mut self, snapshot: &Snapshot) {
        let counts: BTreeMap<String, u64> = snapshot
            .locale_counts()
            .iter()
            .map(|(l, n)| (l.clone(), *n as u64))
            .collect();
        self.by_date.insert(snapshot.date(), counts);
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.by_date.keys().next().copied()
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.by_date.keys().next_back().copied()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.by_date.keys().copied()
    }

    /// Every locale appearing at any date, ascending.
    pub fn locales(&self) -> impl Iterator<Item = &str> + '_ {
        let mut all: Vec<&str> = self
            .by_date
            .values()
            .flat_map(|m| m.keys().map(String::as_str))
            .collect();
        all.sort_unstable();
        all.dedup();
        all.into_iter()
    }

    /// Registered count from the latest snapshot dated on or before `at`.
    /// A locale missing from that snapshot has 0 voters; `None` if no
    /// snapshot precedes `at`.
    pub fn population(&self, locale: &str, at: NaiveDate) -> Option<u64> {
        let (_, row) = self.by_date.range(..=at).next_back()?;
        Some(row.get(locale).copied().unwrap_or(0))
    }

    pub fn counts_at(&self, date: NaiveDate) -> Option<&BTreeMap<String, u64>> {
        self.by_date.get(&date)
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["snapshot_date", "locale", "registered"])?;
        for (date, row) in &self.by_date {
            for (locale, n) in row {
                out.write_record([date.to_string(), locale.clone(), n.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(r);
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["snapshot_date", "locale", "registered"] {
            return Err(Error::Schema(format!(
                "population table header must be snapshot_date,locale,registered; got {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut table = Self::default();
        let mut errors = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let line = k as u64 + 2;
            let rec = rec?;
            let parsed = (|| -> std::result::Result<(NaiveDate, String, u64), String> {
                let date = parse_date(rec.get(0).unwrap_or("")).map_err(|e| e.to_string())?;
                let locale = rec.get(1).unwrap_or("").to_string();
                if locale.is_empty() {
                    return Err("empty locale".into());
                }
                let n = rec
                    .get(2)
                    .unwrap_or("")
                    .parse::<u64>()
                    .map_err(|e| format!("bad registered count: {e}"))?;
                Ok((date, locale, n))
            })();
            match parsed {
                Ok((date, locale, n)) => table.insert(date, &locale, n),
                Err(message) => errors.push(RowError { line, message }),
            }
        }
        if !errors.is_empty() {
            return Err(Error::Rows(errors));
        }
        Ok(table)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
