use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{feature_names, EventLabel, FeatureConfig, GroupFeatureVector, GroupKey, FEATURE_VERSION};
use crate::error::{Error, Result, RowError};
use crate::modmatrix::Interval;
use crate::vrf_io::parse_date;

const KEY_COLUMNS: [&str; 5] = ["locale", "interval_start", "interval_end", "change_type", "n_voters"];

/// Sidecar describing the feature columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub version: u32,
    pub config: FeatureConfig,
    pub names: Vec<String>,
    /// SHA-256 over the version and the names.
    pub hash: String,
}

impl FeatureManifest {
    pub fn new(config: FeatureConfig) -> Self {
        let names = feature_names(config);
        let hash = Self::hash_of(FEATURE_VERSION, &names);
        Self {
            version: FEATURE_VERSION,
            config,
            names,
            hash,
        }
    }

    pub fn hash_of(version: u32, names: &[String]) -> String {
        let mut h = Sha256::new();
        h.update(format!("v{version}\n"));
        for n in names {
            h.update(n.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks the manifest against what this build computes.
    pub fn check(&self) -> Result<()> {
        let current = FeatureManifest::new(self.config);
        if self.version != current.version || self.hash != current.hash || self.names != current.names {
            return Err(Error::Incompatible(format!(
                "feature manifest version {} (hash {}) does not match this build's version {} (hash {})",
                self.version,
                short(&self.hash),
                current.version,
                short(&current.hash)
            )));
        }
        Ok(())
    }
}

fn short(h: &str) -> &str {
    &h[..h.len().min(12)]
}

pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let mut p = csv_path.as_os_str().to_owned();
    p.push(".manifest.json");
    PathBuf::from(p)
}

pub fn write_manifest(manifest: &FeatureManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<FeatureManifest> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Incompatible(format!("unreadable feature manifest: {e}")))
}

fn fmt_feature(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        x.to_string()
    }
}

pub fn write_features<W: Write>(vectors: &[GroupFeatureVector], manifest: &FeatureManifest, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = KEY_COLUMNS.to_vec();
    header.extend(manifest.names.iter().map(String::as_str));
    header.push("label");
    out.write_record(&header)?;
    for v in vectors {
        if v.features.len() != manifest.names.len() {
            return Err(Error::Dimension {
                expected: manifest.names.len(),
                actual: v.features.len(),
            });
        }
        let mut row = vec![
            v.key.locale.clone(),
            v.key.interval.start.to_string(),
            v.key.interval.end.to_string(),
            v.key.change_type.to_string(),
            v.n_voters.to_string(),
        ];
        row.extend(v.features.iter().map(|&x| fmt_feature(x)));
        row.push(v.label.map(|l| l.to_string()).unwrap_or_default());
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the CSV and its `<path>.manifest.json` sidecar.
pub fn features_to_csv(vectors: &[GroupFeatureVector], config: FeatureConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let manifest = FeatureManifest::new(config);
    write_features(vectors, &manifest, std::io::BufWriter::new(std::fs::File::create(path)?))?;
    write_manifest(&manifest, manifest_path(path))
}

/// Reads feature rows; the header must match `manifest`.
pub fn read_features<R: Read>(r: R, manifest: &FeatureManifest) -> Result<Vec<GroupFeatureVector>> {
    manifest.check()?;
    let mut reader = csv::Reader::from_reader(r);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut expected: Vec<String> = KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    expected.extend(manifest.names.iter().cloned());
    expected.push("label".into());
    if header != expected {
        return Err(Error::Incompatible(format!(
            "feature CSV header does not match the manifest ({} columns vs {})",
            header.len(),
            expected.len()
        )));
    }
    let width = manifest.names.len();
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let rec = rec?;
        let parsed = (|| -> Result<GroupFeatureVector> {
            let key = GroupKey {
                locale: rec[0].to_string(),
                interval: Interval {
                    start: parse_date(&rec[1])?,
                    end: parse_date(&rec[2])?,
                },
                change_type: rec[3].parse()?,
            };
            let n_voters = rec[4]
                .parse::<usize>()
                .map_err(|e| Error::Validation(format!("bad n_voters '{}': {e}", &rec[4])))?;
            let features = (0..width)
                .map(|f| {
                    let cell = &rec[KEY_COLUMNS.len() + f];
                    cell.parse::<f64>()
                        .map_err(|e| Error::Validation(format!("bad value '{cell}' for {}: {e}", manifest.names[f])))
                })
                .collect::<Result<Vec<_>>>()?;
            let label = match &rec[KEY_COLUMNS.len() + width] {
                "" => None,
                s => Some(s.parse::<EventLabel>()?),
            };
            Ok(GroupFeatureVector {
                key,
                n_voters,
                features,
                label,
            })
        })();
        match parsed {
            Ok(v) => out.push(v),
            Err(e) => errors.push(RowError {
                line,
                message: e.to_string(),
            }),
        }
    }
    if !errors.is_empty() {
        return Err(Error::Rows(errors));
    }
    Ok(out)
}
