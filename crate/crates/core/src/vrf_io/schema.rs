use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Logical fields a snapshot file may provide, in canonical column order.
pub const LOGICAL_FIELDS: [&str; 17] = [
    "voter_id",
    "locale",
    "first_name",
    "middle_name",
    "last_name",
    "house_num",
    "street_name",
    "unit",
    "city",
    "zip",
    "status",
    "party",
    "gender",
    "birth_date",
    "registration_date",
    "last_update_date",
    "vote_history",
];

/// Fields that must be mapped to a column present in the file.
pub const REQUIRED_FIELDS: [&str; 12] = [
    "voter_id",
    "locale",
    "first_name",
    "last_name",
    "house_num",
    "street_name",
    "city",
    "zip",
    "status",
    "party",
    "gender",
    "registration_date",
];

/// Maps logical fields to column names of a delimited snapshot file.
///
/// Loaded from a small key-value file:
///
/// ```toml
/// delimiter = ","
/// voter_id = "REGN_NUM"
/// status = "VOTER_STATUS"
/// ```
///
/// Logical fields that are not listed map to a column of the same name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotSchema {
    pub delimiter: u8,
    columns: BTreeMap<String, String>,
}

impl Default for SnapshotSchema {
    fn default() -> Self {
        Self {
            delimiter: b',',
            columns: LOGICAL_FIELDS
                .iter()
                .map(|f| (f.to_string(), f.to_string()))
                .collect(),
        }
    }
}

impl SnapshotSchema {
    pub fn column<'a>(&'a self, field: &'a str) -> &'a str {
        self.columns.get(field).map(String::as_str).unwrap_or(field)
    }

    pub fn with_column(mut self, field: &str, column: &str) -> Result<Self> {
        if !LOGICAL_FIELDS.contains(&field) {
            return Err(Error::Schema(format!("unknown logical field '{field}'")));
        }
        self.columns.insert(field.to_string(), column.to_string());
        Ok(self)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: BTreeMap<String, String> = toml::from_str(s)
            .map_err(|e| Error::Schema(format!("schema file is not a key-value table: {e}")))?;
        let mut schema = Self::default();
        for (key, value) in table {
            if key == "delimiter" {
                let bytes = value.as_bytes();
                let delimiter = match (bytes.len(), value.as_str()) {
                    (_, "\\t") | (_, "tab") => b'\t',
                    (1, _) => bytes[0],
                    _ => {
                        return Err(Error::Schema(format!(
                            "delimiter must be a single byte, got '{value}'"
                        )))
                    }
                };
                schema.delimiter = delimiter;
            } else {
                schema = schema.with_column(&key, &value)?;
            }
        }
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        let delimiter = match self.delimiter {
            b'\t' => "\\t".to_string(),
            d => (d as char).to_string(),
        };
        let mut out = format!("delimiter = {delimiter:?}\n");
        for field in LOGICAL_FIELDS {
            out.push_str(&format!("{field} = {:?}\n", self.column(field)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_file() {
        let schema = SnapshotSchema::from_toml_str(
            "delimiter = \";\"\n# comment\nvoter_id = \"REGN_NUM\"\nstatus = \"VOTER_STATUS\"\n",
        )
        .unwrap();
        assert_eq!(schema.delimiter, b';');
        assert_eq!(schema.column("voter_id"), "REGN_NUM");
        assert_eq!(schema.column("status"), "VOTER_STATUS");
        assert_eq!(schema.column("locale"), "locale");
        let again = SnapshotSchema::from_toml_str(&schema.to_toml_string()).unwrap();
        assert_eq!(again, schema);
    }

    #[test]
    fn rejects_unknown_fields() {
        let err = SnapshotSchema::from_toml_str("shoe_size = \"S\"\n").unwrap_err();
        assert!(err.to_string().contains("shoe_size"));
    }
}
