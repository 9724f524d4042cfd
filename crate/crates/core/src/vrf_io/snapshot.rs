use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::record::{decode_vote_history, encode_vote_history, parse_date, VoterRecord, ADDRESS_FIELDS};
use super::schema::{SnapshotSchema, LOGICAL_FIELDS, REQUIRED_FIELDS};
use crate::error::{Error, Result, RowError};

/// A full copy of the registration file at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    date: NaiveDate,
    records: BTreeMap<String, VoterRecord>,
    locale_counts: BTreeMap<String, u64>,
}

impl Snapshot {
    /// Builds a snapshot, rejecting empty or duplicated voter ids and vote
    /// histories that postdate the snapshot.
    pub fn new(date: NaiveDate, records: impl IntoIterator<Item = VoterRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut duplicates = Vec::new();
        for record in records {
            let id = record.voter_id.clone();
            if map.insert(id.clone(), record).is_some() {
                duplicates.push(id);
            }
        }
        if !duplicates.is_empty() {
            duplicates.sort();
            duplicates.dedup();
            return Err(Error::Integrity(format!(
                "duplicate voter_id(s): {}",
                duplicates.join(", ")
            )));
        }
        Self::from_map(date, map)
    }

    pub fn from_map(date: NaiveDate, records: BTreeMap<String, VoterRecord>) -> Result<Self> {
        if records.contains_key("") {
            return Err(Error::Integrity("empty voter_id".into()));
        }
        for (id, record) in &records {
            if *id != record.voter_id {
                return Err(Error::Integrity(format!(
                    "record keyed '{id}' carries voter_id '{}'",
                    record.voter_id
                )));
            }
            if let Some(v) = record.vote_history.iter().find(|v| v.date > date) {
                return Err(Error::Integrity(format!(
                    "voter '{id}' has vote history entry {} dated after the snapshot ({date})",
                    v.election_id
                )));
            }
        }
        let locale_counts = tally(&records);
        Ok(Self {
            date,
            records,
            locale_counts,
        })
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn records(&self) -> &BTreeMap<String, VoterRecord> {
        &self.records
    }

    pub fn get(&self, voter_id: &str) -> Option<&VoterRecord> {
        self.records.get(voter_id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Registered voters per locale.
    pub fn locale_counts(&self) -> &BTreeMap<String, u64> {
        &self.locale_counts
    }

    pub fn into_records(self) -> BTreeMap<String, VoterRecord> {
        self.records
    }
}

fn tally(records: &BTreeMap<String, VoterRecord>) -> BTreeMap<String, u64> {
    let mut counts = BTreeMap::new();
    for r in records.values() {
        *counts.entry(r.locale.clone()).or_insert(0) += 1;
    }
    counts
}

/// Finds an ISO date (`YYYY-MM-DD`) in a file name such as `snapshot_2019-01-03.csv`.
pub fn snapshot_date_from_path(path: &Path) -> Option<NaiveDate> {
    let stem = path.file_stem()?.to_str()?;
    let bytes = stem.as_bytes();
    (0..bytes.len().saturating_sub(9))
        .rev()
        .filter_map(|i| stem.get(i..i + 10))
        .find_map(|s| NaiveDate::parse_from_str(s, "%Y-%m-%d").ok())
}

/// Parses a delimited snapshot file. The snapshot date is taken from
/// `date` or, when absent, from the file name.
pub fn parse_snapshot(path: impl AsRef<Path>, schema: &SnapshotSchema, date: Option<NaiveDate>) -> Result<Snapshot> {
    let path = path.as_ref();
    let date = match date.or_else(|| snapshot_date_from_path(path)) {
        Some(d) => d,
        None => {
            return Err(Error::Precondition(format!(
                "no snapshot date given and none found in file name {}",
                path.display()
            )))
        }
    };
    let file = std::fs::File::open(path)?;
    read_snapshot(file, schema, date)
}

pub fn read_snapshot<R: Read>(reader: R, schema: &SnapshotSchema, date: NaiveDate) -> Result<Snapshot> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let index_of = |field: &str| headers.iter().position(|h| h.trim() == schema.column(field));

    let missing: Vec<&str> = REQUIRED_FIELDS
        .iter()
        .copied()
        .filter(|f| index_of(f).is_none())
        .collect();
    if !missing.is_empty() {
        let described: Vec<String> = missing
            .iter()
            .map(|f| {
                let col = schema.column(f);
                if col == *f {
                    f.to_string()
                } else {
                    format!("{f} (column '{col}')")
                }
            })
            .collect();
        return Err(Error::Schema(format!(
            "missing required column(s): {}",
            described.join(", ")
        )));
    }
    let columns: BTreeMap<&str, usize> = LOGICAL_FIELDS
        .iter()
        .filter_map(|f| index_of(f).map(|i| (*f, i)))
        .collect();

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        match parse_row(&row, &columns) {
            Ok(record) => records.push(record),
            Err(message) => errors.push(RowError { line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    Snapshot::new(date, records)
}

fn field<'r>(row: &'r csv::StringRecord, columns: &BTreeMap<&str, usize>, name: &str) -> &'r str {
    columns.get(name).and_then(|&i| row.get(i)).unwrap_or("")
}

fn parse_row(row: &csv::StringRecord, columns: &BTreeMap<&str, usize>) -> std::result::Result<VoterRecord, String> {
    let get = |name: &str| field(row, columns, name);
    let voter_id = get("voter_id").trim();
    if voter_id.is_empty() {
        return Err("empty voter_id".into());
    }
    let locale = get("locale").trim();
    if locale.is_empty() {
        return Err(format!("voter {voter_id}: empty locale"));
    }
    let at = |e: Error| format!("voter {voter_id}: {e}");
    let status = get("status").parse().map_err(at)?;
    let registration_date = parse_date(get("registration_date")).map_err(at)?;
    let birth_date = match get("birth_date").trim() {
        "" => None,
        s => Some(parse_date(s).map_err(at)?),
    };
    let last_update_date = match get("last_update_date").trim() {
        "" => registration_date,
        s => parse_date(s).map_err(at)?,
    };
    let vote_history = decode_vote_history(get("vote_history")).map_err(at)?;
    let address = ADDRESS_FIELDS
        .iter()
        .map(|f| (f.to_string(), get(f).to_string()))
        .collect();
    Ok(VoterRecord {
        voter_id: voter_id.to_string(),
        locale: locale.to_string(),
        first_name: get("first_name").to_string(),
        middle_name: get("middle_name").to_string(),
        last_name: get("last_name").to_string(),
        address,
        status,
        party: get("party").to_string(),
        gender: get("gender").to_string(),
        birth_date,
        registration_date,
        last_update_date,
        vote_history,
    })
}

pub fn write_snapshot(snapshot: &Snapshot, path: impl AsRef<Path>, schema: &SnapshotSchema) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_snapshot_to(snapshot, file, schema)
}

pub fn write_snapshot_to<W: Write>(snapshot: &Snapshot, writer: W, schema: &SnapshotSchema) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(schema.delimiter)
        .from_writer(writer);
    wtr.write_record(LOGICAL_FIELDS.iter().map(|f| schema.column(f)))?;
    for r in snapshot.records.values() {
        let birth = r.birth_date.map(|d| d.to_string()).unwrap_or_default();
        let registration = r.registration_date.to_string();
        let update = r.last_update_date.to_string();
        let history = encode_vote_history(&r.vote_history);
        wtr.write_record([
            r.voter_id.as_str(),
            &r.locale,
            &r.first_name,
            &r.middle_name,
            &r.last_name,
            r.address_component("house_num"),
            r.address_component("street_name"),
            r.address_component("unit"),
            r.address_component("city"),
            r.address_component("zip"),
            r.status.as_str(),
            &r.party,
            &r.gender,
            &birth,
            &registration,
            &update,
            &history,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
