mod classify;
mod detect;
mod pipeline;
mod synth;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use vrf_sentinel::groupfeatures::{EventLabel, GroupKey};
use vrf_sentinel::modmatrix::Interval;
use vrf_sentinel::vrf_io::{parse_date, snapshot_date_from_path, SnapshotSchema};
use vrf_sentinel::{Error, Result};

use crate::args::Command;

pub use classify::{features, predict, train};
pub use detect::{detect, evaluate};
pub use pipeline::{diff, ingest, matrix};
pub use synth::synth;

/// Output directory and run-level flags collected while a command runs.
pub struct Run {
    pub out: PathBuf,
    pub seed: u64,
    pub converged: Option<bool>,
}

impl Run {
    /// Path of an output file, creating its parent directories.
    pub fn output(&self, name: impl AsRef<Path>) -> Result<PathBuf> {
        let path = self.out.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(path)
    }

    pub fn record_convergence(&mut self, converged: bool) {
        self.converged = Some(self.converged.unwrap_or(true) && converged);
    }
}

pub fn execute(command: &Command, run: &mut Run) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a, run),
        Command::Ingest(a) => ingest(a, run),
        Command::Diff(a) => diff(a, run),
        Command::Matrix(a) => matrix(a, run),
        Command::Detect(a) => detect(a, run),
        Command::Evaluate(a) => evaluate(a, run),
        Command::Features(a) => features(a, run),
        Command::Train(a) => train(a, run),
        Command::Predict(a) => predict(a, run),
        Command::Replay(_) => unreachable!("replay is resolved before execution"),
    }
}

fn load_schema(path: Option<&Path>) -> Result<SnapshotSchema> {
    match path {
        Some(p) => SnapshotSchema::load(p),
        None => Ok(SnapshotSchema::default()),
    }
}

/// Dated snapshot CSVs in `dir`, oldest first.
fn snapshot_paths(dir: &Path) -> Result<Vec<(NaiveDate, PathBuf)>> {
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        match snapshot_date_from_path(&path) {
            Some(date) => found.push((date, path)),
            None => log::warn!("skipping {}: no YYYY-MM-DD date in its name", path.display()),
        }
    }
    found.sort();
    if let Some(w) = found.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!(
            "two snapshots dated {}: {} and {}",
            w[0].0,
            w[0].1.display(),
            w[1].1.display()
        )));
    }
    if found.len() < 2 {
        return Err(Error::Precondition(format!(
            "{} holds {} dated snapshot(s); at least 2 are needed",
            dir.display(),
            found.len()
        )));
    }
    Ok(found)
}

const LABEL_COLUMNS: [&str; 5] = ["locale", "interval_start", "interval_end", "change_type", "label"];

fn write_labels(labels: &[(GroupKey, EventLabel)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LABEL_COLUMNS)?;
    for (key, label) in labels {
        w.write_record([
            key.locale.clone(),
            key.interval.start.to_string(),
            key.interval.end.to_string(),
            key.change_type.to_string(),
            label.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn read_labels(path: &Path) -> Result<Vec<(GroupKey, EventLabel)>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != LABEL_COLUMNS {
        return Err(Error::Schema(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            LABEL_COLUMNS.join(","),
            header.join(",")
        )));
    }
    let mut out = Vec::new();
    for (n, row) in r.records().enumerate() {
        let row = row?;
        let line = n as u64 + 2;
        let parse = || -> Result<(GroupKey, EventLabel)> {
            Ok((
                GroupKey {
                    locale: row[0].to_string(),
                    interval: Interval {
                        start: parse_date(&row[1])?,
                        end: parse_date(&row[2])?,
                    },
                    change_type: row[3].parse()?,
                },
                row[4].parse()?,
            ))
        };
        out.push(parse().map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
