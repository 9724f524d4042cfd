//! Monitoring voter-registration-file snapshots for anomalous modifications.
//!
//! The crate is organised as a pipeline:
//!
//! * [`vrf_io`] parses snapshots and diffs adjacent ones into typed [`vrf_io::ChangeRecord`]s.
//! * [`modmatrix`] aggregates changes into locale × interval modification matrices,
//!   normalised to changes per day per 1000 registered voters.
//! * [`detectors`] scores every matrix entry (temporal, cross-locale, global,
//!   NMF residual and robust-PCA detectors) and ranks them.
//! * [`evalharness`] measures detectors against planted sparse perturbations.
//! * [`groupfeatures`] and [`gbt`] describe change groups by the mean features of
//!   the affected voters and classify them into known maintenance events.
//! * [`synthgen`] generates seeded synthetic scenarios with full ground truth.

pub mod detectors;
pub mod error;
pub mod evalharness;
pub mod gbt;
pub mod groupfeatures;
pub mod linalg;
pub mod modmatrix;
pub mod render;
pub mod seed;
pub mod synthgen;
pub mod vrf_io;

pub use error::{Error, Result};
