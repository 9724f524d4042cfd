use std::io::{Read, Write};
use std::path::Path;

use super::record::{parse_date, ChangeRecord, FieldDelta};
use crate::error::{Error, Result};

pub const CHANGE_COLUMNS: [&str; 6] = [
    "voter_id",
    "locale",
    "change_type",
    "anterior_date",
    "posterior_date",
    "field_deltas",
];

pub fn changes_to_csv(changes: &[ChangeRecord], path: impl AsRef<Path>) -> Result<()> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_changes(changes, file)
}

pub fn write_changes<W: Write>(changes: &[ChangeRecord], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CHANGE_COLUMNS)?;
    for c in changes {
        let deltas = serde_json::to_string(&c.field_deltas)?;
        wtr.write_record([
            c.voter_id.as_str(),
            &c.locale,
            c.change_type.as_str(),
            &c.anterior_date.to_string(),
            &c.posterior_date.to_string(),
            &deltas,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn csv_to_changes(path: impl AsRef<Path>) -> Result<Vec<ChangeRecord>> {
    read_changes(std::fs::File::open(path)?)
}

pub fn read_changes<R: Read>(reader: R) -> Result<Vec<ChangeRecord>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != CHANGE_COLUMNS {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header {}, found {}",
                CHANGE_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let fail = |message: String| Error::Parse { line, message };
        if row.len() != CHANGE_COLUMNS.len() {
            return Err(fail(format!(
                "expected {} fields, found {}",
                CHANGE_COLUMNS.len(),
                row.len()
            )));
        }
        let change_type = row[2].parse().map_err(|e: Error| fail(e.to_string()))?;
        let anterior_date = parse_date(&row[3]).map_err(|e| fail(e.to_string()))?;
        let posterior_date = parse_date(&row[4]).map_err(|e| fail(e.to_string()))?;
        if anterior_date >= posterior_date {
            return Err(fail(format!(
                "anterior_date {anterior_date} is not before posterior_date {posterior_date}"
            )));
        }
        let field_deltas: Vec<FieldDelta> = serde_json::from_str(&row[5])
            .map_err(|e| fail(format!("field_deltas is not a JSON delta array: {e}")))?;
        if row[0].is_empty() {
            return Err(fail("empty voter_id".into()));
        }
        out.push(ChangeRecord {
            voter_id: row[0].to_string(),
            locale: row[1].to_string(),
            change_type,
            anterior_date,
            posterior_date,
            field_deltas,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::vrf_io::ChangeType;

    fn sample() -> Vec<ChangeRecord> {
        let a = NaiveDate::from_ymd_opt(2019, 1, 3).unwrap();
        let b = NaiveDate::from_ymd_opt(2019, 1, 10).unwrap();
        let mk = |id: &str, t: ChangeType, deltas: Vec<FieldDelta>| ChangeRecord {
            voter_id: id.into(),
            locale: "POLK".into(),
            change_type: t,
            anterior_date: a,
            posterior_date: b,
            field_deltas: deltas,
        };
        vec![
            mk("A1", ChangeType::Address, vec![FieldDelta::new("street_name", "Main, St \"1\"", "Elm St")]),
            mk("A1", ChangeType::Deactivation, vec![FieldDelta::new("status", "active", "inactive")]),
            mk("B2", ChangeType::Name, vec![FieldDelta::new("last_name", "Lee", "Lée\nPark")]),
            mk("C3", ChangeType::Removal, vec![]),
            mk("D4", ChangeType::Party, vec![FieldDelta::new("party", "DEM", "")]),
        ]
    }

    #[test]
    fn empty_list_is_header_only() {
        let mut buf = Vec::new();
        write_changes(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 1);
        assert!(read_changes(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn mixed_records_round_trip_bit_identically() {
        let changes = sample();
        let mut buf = Vec::new();
        write_changes(&changes, &mut buf).unwrap();
        let back = read_changes(buf.as_slice()).unwrap();
        assert_eq!(back, changes);
        let mut again = Vec::new();
        write_changes(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn unknown_change_type_names_the_token() {
        let text = "voter_id,locale,change_type,anterior_date,posterior_date,field_deltas\n\
                    A1,POLK,address,2019-01-03,2019-01-10,[]\n\
                    A2,POLK,teleport,2019-01-03,2019-01-10,[]\n";
        match read_changes(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("teleport"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let text = "voter_id,locale,change_type,anterior_date,posterior_date,field_deltas\n\
                    A1,POLK,address,2019-01-03,2019-01-10,{oops\n";
        match read_changes(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
