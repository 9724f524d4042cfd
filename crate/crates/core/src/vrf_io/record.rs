use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Address components compared when detecting address changes.
pub const ADDRESS_FIELDS: [&str; 5] = ["house_num", "street_name", "unit", "city", "zip"];

/// Name components compared when detecting name changes.
pub const NAME_FIELDS: [&str; 3] = ["first_name", "middle_name", "last_name"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoterStatus {
    Active,
    Inactive,
    Pending,
}

impl VoterStatus {
    pub const ALL: [VoterStatus; 3] = [Self::Active, Self::Inactive, Self::Pending];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Active => "active",
            Self::Inactive => "inactive",
            Self::Pending => "pending",
        }
    }
}

impl fmt::Display for VoterStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VoterStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "active" => Ok(Self::Active),
            "inactive" => Ok(Self::Inactive),
            "pending" => Ok(Self::Pending),
            other => Err(Error::Validation(format!("unknown voter status '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallotKind {
    Regular,
    Absentee,
    Provisional,
}

impl BallotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Regular => "regular",
            Self::Absentee => "absentee",
            Self::Provisional => "provisional",
        }
    }
}

impl FromStr for BallotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "regular" => Ok(Self::Regular),
            "absentee" => Ok(Self::Absentee),
            "provisional" => Ok(Self::Provisional),
            other => Err(Error::Validation(format!("unknown ballot kind '{other}'"))),
        }
    }
}

/// One ballot in a voter's participation history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub election_id: String,
    pub date: NaiveDate,
    pub kind: BallotKind,
    /// Party ballot requested in a partisan primary.
    pub party_ballot: Option<String>,
}

impl VoteRecord {
    /// `election_id|date|kind|party`, with an empty trailing party for
    /// non-partisan ballots.
    pub fn encode(&self) -> String {
        format!(
            "{}|{}|{}|{}",
            self.election_id,
            self.date,
            self.kind.as_str(),
            self.party_ballot.as_deref().unwrap_or("")
        )
    }

    pub fn decode(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('|').collect();
        if parts.len() != 4 {
            return Err(Error::Validation(format!(
                "vote history entry '{s}' must have 4 '|'-separated parts"
            )));
        }
        if parts[0].is_empty() {
            return Err(Error::Validation(format!("vote history entry '{s}' has no election id")));
        }
        let date = parse_date(parts[1])?;
        let kind = parts[2].parse()?;
        let party_ballot = (!parts[3].is_empty()).then(|| parts[3].to_string());
        Ok(Self {
            election_id: parts[0].to_string(),
            date,
            kind,
            party_ballot,
        })
    }
}

pub fn encode_vote_history(history: &[VoteRecord]) -> String {
    history.iter().map(VoteRecord::encode).collect::<Vec<_>>().join(";")
}

pub fn decode_vote_history(s: &str) -> Result<Vec<VoteRecord>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(';').map(|part| VoteRecord::decode(part.trim())).collect()
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d")
        .map_err(|e| Error::Validation(format!("invalid date '{s}': {e}")))
}

/// One registered voter at a snapshot instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterRecord {
    pub voter_id: String,
    pub locale: String,
    pub first_name: String,
    pub middle_name: String,
    pub last_name: String,
    /// Named address components; see [`ADDRESS_FIELDS`]. A missing component
    /// compares equal to an empty one.
    pub address: BTreeMap<String, String>,
    pub status: VoterStatus,
    pub party: String,
    pub gender: String,
    pub birth_date: Option<NaiveDate>,
    pub registration_date: NaiveDate,
    pub last_update_date: NaiveDate,
    pub vote_history: Vec<VoteRecord>,
}

impl VoterRecord {
    pub fn address_component(&self, field: &str) -> &str {
        self.address.get(field).map(String::as_str).unwrap_or("")
    }

    pub fn name_component(&self, field: &str) -> &str {
        match field {
            "first_name" => &self.first_name,
            "middle_name" => &self.middle_name,
            "last_name" => &self.last_name,
            _ => "",
        }
    }

    pub(crate) fn set_name_component(&mut self, field: &str, value: String) -> Result<()> {
        match field {
            "first_name" => self.first_name = value,
            "middle_name" => self.middle_name = value,
            "last_name" => self.last_name = value,
            other => return Err(Error::Validation(format!("'{other}' is not a name field"))),
        }
        Ok(())
    }
}

/// The seven modification categories tracked per voter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeType {
    Address,
    Name,
    Removal,
    Registration,
    Deactivation,
    Activation,
    Party,
}

impl ChangeType {
    pub const ALL: [ChangeType; 7] = [
        Self::Address,
        Self::Name,
        Self::Removal,
        Self::Registration,
        Self::Deactivation,
        Self::Activation,
        Self::Party,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Address => "address",
            Self::Name => "name",
            Self::Removal => "removal",
            Self::Registration => "registration",
            Self::Deactivation => "deactivation",
            Self::Activation => "activation",
            Self::Party => "party",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ChangeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChangeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s.trim())
            .ok_or_else(|| Error::Validation(format!("unknown change_type token '{s}'")))
    }
}

/// One changed field: `(field, old value, new value)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDelta {
    pub field: String,
    pub old: String,
    pub new: String,
}

impl FieldDelta {
    pub fn new(field: impl Into<String>, old: impl Into<String>, new: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            old: old.into(),
            new: new.into(),
        }
    }
}

/// One typed modification of one voter between two adjacent snapshots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub voter_id: String,
    pub locale: String,
    pub change_type: ChangeType,
    pub anterior_date: NaiveDate,
    pub posterior_date: NaiveDate,
    pub field_deltas: Vec<FieldDelta>,
}
