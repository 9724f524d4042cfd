//! Typed differences between temporally adjacent snapshots.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use super::record::{
    ChangeRecord, ChangeType, FieldDelta, VoterRecord, VoterStatus, ADDRESS_FIELDS, NAME_FIELDS,
};
use super::snapshot::Snapshot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DiffOptions {
    /// Only `active <-> inactive` status transitions count; `pending -> *`
    /// transitions are ignored.
    pub strict: bool,
}

/// Values compare equal after trimming and case-folding.
pub fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

fn same(a: &str, b: &str) -> bool {
    a.trim() == b.trim() || normalize(a) == normalize(b)
}

pub fn status_change(old: VoterStatus, new: VoterStatus, options: DiffOptions) -> Option<ChangeType> {
    use VoterStatus::*;
    match (old, new) {
        (Active, Inactive) => Some(ChangeType::Deactivation),
        (Inactive, Active) => Some(ChangeType::Activation),
        (Pending, Active) if !options.strict => Some(ChangeType::Activation),
        (Pending, Inactive) if !options.strict => Some(ChangeType::Deactivation),
        _ => None,
    }
}

pub fn diff_snapshots(anterior: &Snapshot, posterior: &Snapshot) -> Result<Vec<ChangeRecord>> {
    diff_snapshots_with(anterior, posterior, DiffOptions::default())
}

/// Emits one [`ChangeRecord`] per (voter, change type), sorted by voter id
/// and then change type.
pub fn diff_snapshots_with(anterior: &Snapshot, posterior: &Snapshot, options: DiffOptions) -> Result<Vec<ChangeRecord>> {
    if anterior.date() >= posterior.date() {
        return Err(Error::Precondition(format!(
            "anterior snapshot ({}) must predate posterior snapshot ({})",
            anterior.date(),
            posterior.date()
        )));
    }
    let dates = (anterior.date(), posterior.date());
    let mut out = Vec::new();
    let mut before = anterior.records().values().peekable();
    let mut after = posterior.records().values().peekable();
    loop {
        let order = match (before.peek(), after.peek()) {
            (None, None) => break,
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (Some(a), Some(b)) => a.voter_id.cmp(&b.voter_id),
        };
        match order {
            Ordering::Less => {
                let a = before.next().unwrap();
                out.push(record(a, &a.locale, ChangeType::Removal, dates, Vec::new()));
            }
            Ordering::Greater => {
                let b = after.next().unwrap();
                out.push(record(b, &b.locale, ChangeType::Registration, dates, Vec::new()));
            }
            Ordering::Equal => {
                let a = before.next().unwrap();
                let b = after.next().unwrap();
                diff_voter(a, b, dates, options, &mut out);
            }
        }
    }
    Ok(out)
}

fn record(
    voter: &VoterRecord,
    locale: &str,
    change_type: ChangeType,
    (anterior_date, posterior_date): (chrono::NaiveDate, chrono::NaiveDate),
    field_deltas: Vec<FieldDelta>,
) -> ChangeRecord {
    ChangeRecord {
        voter_id: voter.voter_id.clone(),
        locale: locale.to_string(),
        change_type,
        anterior_date,
        posterior_date,
        field_deltas,
    }
}

fn diff_voter(
    a: &VoterRecord,
    b: &VoterRecord,
    dates: (chrono::NaiveDate, chrono::NaiveDate),
    options: DiffOptions,
    out: &mut Vec<ChangeRecord>,
) {
    // Emitted in ChangeType order.
    let mut address: Vec<FieldDelta> = ADDRESS_FIELDS
        .iter()
        .filter(|f| !same(a.address_component(f), b.address_component(f)))
        .map(|f| FieldDelta::new(*f, a.address_component(f), b.address_component(f)))
        .collect();
    if !same(&a.locale, &b.locale) {
        address.push(FieldDelta::new("locale", &a.locale, &b.locale));
    }
    if !address.is_empty() {
        out.push(record(b, &b.locale, ChangeType::Address, dates, address));
    }

    let name: Vec<FieldDelta> = NAME_FIELDS
        .iter()
        .filter(|f| !same(a.name_component(f), b.name_component(f)))
        .map(|f| FieldDelta::new(*f, a.name_component(f), b.name_component(f)))
        .collect();
    if !name.is_empty() {
        out.push(record(b, &b.locale, ChangeType::Name, dates, name));
    }

    if let Some(kind) = status_change(a.status, b.status, options) {
        let delta = FieldDelta::new("status", a.status.as_str(), b.status.as_str());
        out.push(record(b, &b.locale, kind, dates, vec![delta]));
    }

    if !same(&a.party, &b.party) {
        let delta = FieldDelta::new("party", &a.party, &b.party);
        out.push(record(b, &b.locale, ChangeType::Party, dates, vec![delta]));
    }
}

/// Applies change records to `anterior`, producing the snapshot at the
/// changes' posterior date. Registrations carry no field values, so inserted
/// voters are fetched through `inserted`.
///
/// Only the fields tracked by change records are reconstructed; everything
/// else is carried over from the anterior record.
pub fn patch_snapshot<'a, F>(anterior: &Snapshot, changes: &[ChangeRecord], inserted: F) -> Result<Snapshot>
where
    F: Fn(&str) -> Option<&'a VoterRecord>,
{
    let posterior_date = match changes.first() {
        Some(c) => c.posterior_date,
        None => return Ok(anterior.clone()),
    };
    let mut records = anterior.records().clone();
    for change in changes {
        if change.posterior_date != posterior_date || change.anterior_date != anterior.date() {
            return Err(Error::Precondition(format!(
                "change for {} spans {}..{}, expected {}..{}",
                change.voter_id,
                change.anterior_date,
                change.posterior_date,
                anterior.date(),
                posterior_date
            )));
        }
        let missing = || Error::Data(format!("voter {} not present in anterior snapshot", change.voter_id));
        match change.change_type {
            ChangeType::Removal => {
                records.remove(&change.voter_id).ok_or_else(missing)?;
            }
            ChangeType::Registration => {
                let record = inserted(&change.voter_id).ok_or_else(|| {
                    Error::Data(format!("no inserted record supplied for {}", change.voter_id))
                })?;
                records.insert(change.voter_id.clone(), record.clone());
            }
            _ => {
                let voter = records.get_mut(&change.voter_id).ok_or_else(missing)?;
                for delta in &change.field_deltas {
                    apply_delta(voter, delta)?;
                }
            }
        }
    }
    Snapshot::from_map(posterior_date, records)
}

fn apply_delta(voter: &mut VoterRecord, delta: &FieldDelta) -> Result<()> {
    let field = delta.field.as_str();
    match field {
        "locale" => voter.locale = delta.new.clone(),
        "status" => voter.status = delta.new.parse()?,
        "party" => voter.party = delta.new.clone(),
        f if ADDRESS_FIELDS.contains(&f) => {
            voter.address.insert(f.to_string(), delta.new.clone());
        }
        f if NAME_FIELDS.contains(&f) => voter.set_name_component(f, delta.new.clone())?,
        other => return Err(Error::Validation(format!("cannot apply delta to field '{other}'"))),
    }
    Ok(())
}

/// Counts of change records per type.
pub fn count_by_type(changes: &[ChangeRecord]) -> BTreeMap<ChangeType, usize> {
    let mut counts = BTreeMap::new();
    for c in changes {
        *counts.entry(c.change_type).or_insert(0) += 1;
    }
    counts
}
