//! Snapshot parsing, diffing and change-record files.

mod changes_csv;
mod diff;
mod record;
mod schema;
mod snapshot;

pub use changes_csv::{changes_to_csv, csv_to_changes, read_changes, write_changes, CHANGE_COLUMNS};
pub use diff::{
    count_by_type, diff_snapshots, diff_snapshots_with, normalize, patch_snapshot, status_change,
    DiffOptions,
};
pub use record::{
    decode_vote_history, encode_vote_history, parse_date, BallotKind, ChangeRecord, ChangeType,
    FieldDelta, VoteRecord, VoterRecord, VoterStatus, ADDRESS_FIELDS, NAME_FIELDS,
};
pub use schema::{SnapshotSchema, LOGICAL_FIELDS, REQUIRED_FIELDS};
pub use snapshot::{
    parse_snapshot, read_snapshot, snapshot_date_from_path, write_snapshot, write_snapshot_to,
    Snapshot,
};
