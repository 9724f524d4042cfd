use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use chrono::NaiveDate;
use vrf_sentinel::gbt::{self, evaluate, split_holdout, write_confusion, write_metrics, GbtConfig, ManifestRef};
use vrf_sentinel::groupfeatures::{
    features_to_csv, manifest_path, group_changes, group_features, read_features, read_manifest, standardize, ChangeIndex,
    ElectionCalendar, EventLabel, FeatureConfig, FeatureManifest, GroupFeatureVector, GroupKey,
};
use vrf_sentinel::modmatrix::{format_sig, IntervalGrid};
use vrf_sentinel::vrf_io::{csv_to_changes, parse_snapshot, ChangeRecord, ChangeType, VoterRecord};
use vrf_sentinel::{seed, Error, Result};

use super::{load_schema, read_labels, snapshot_paths, Run};
use crate::args::{FeaturesArgs, PredictArgs, TrainArgs};

/// Date of the snapshot holding the record a change describes: the
/// anterior one for removals, the posterior one otherwise.
fn record_date(c: &ChangeRecord) -> NaiveDate {
    if c.change_type == ChangeType::Removal {
        c.anterior_date
    } else {
        c.posterior_date
    }
}

pub fn features(a: &FeaturesArgs, run: &mut Run) -> Result<()> {
    let schema = load_schema(a.schema.as_deref())?;
    let changes = csv_to_changes(&a.changes)?;
    let snapshots = snapshot_paths(&a.snapshots)?;
    let (first, last) = (snapshots[0].0, snapshots[snapshots.len() - 1].0);
    if a.interval_days == 0 {
        return Err(Error::Config("interval_days must be at least 1".into()));
    }
    let span = (last - first).num_days() as usize;
    let grid = IntervalGrid::for_snapshots(first, a.interval_days, span.div_ceil(a.interval_days as usize))?;
    let groups = group_changes(&changes, a.change_type, &grid.intervals());

    let wanted: Vec<(GroupKey, Option<EventLabel>)> = match &a.labels {
        Some(path) => {
            let labels = read_labels(path)?;
            for (key, _) in &labels {
                if !groups.contains_key(key) {
                    return Err(Error::Data(format!(
                        "labeled group {} {} {} has no changes",
                        key.change_type, key.locale, key.interval.start
                    )));
                }
            }
            labels.into_iter().map(|(k, l)| (k, Some(l))).collect()
        }
        None => groups.keys().map(|k| (k.clone(), None)).collect(),
    };

    let mut needed: BTreeMap<NaiveDate, BTreeSet<&str>> = BTreeMap::new();
    for (key, _) in &wanted {
        for c in &groups[key] {
            needed.entry(record_date(c)).or_default().insert(&c.voter_id);
        }
    }
    let mut records: BTreeMap<(String, NaiveDate), VoterRecord> = BTreeMap::new();
    let mut calendar = None;
    for (date, path) in &snapshots {
        let ids = needed.get(date);
        if calendar.is_some() && ids.is_none() {
            continue;
        }
        let snapshot = parse_snapshot(path, &schema, Some(*date))?;
        if calendar.is_none() {
            calendar = Some(ElectionCalendar::from_voters(snapshot.records().values()));
        }
        for id in ids.into_iter().flatten() {
            if let Some(v) = snapshot.get(id) {
                records.insert((id.to_string(), *date), v.clone());
            }
        }
    }
    let calendar = calendar.expect("at least two snapshots");
    let index = ChangeIndex::from_changes(&changes);
    let config = FeatureConfig {
        months_since_last_update: a.months_since_last_update,
    };

    let mut vectors = Vec::with_capacity(wanted.len());
    for (key, label) in wanted {
        let members: Vec<ChangeRecord> = groups[&key].iter().map(|c| (*c).clone()).collect();
        let report = group_features(
            &key,
            &members,
            |c| records.get(&(c.voter_id.clone(), record_date(c))),
            &calendar,
            &index,
            config,
        )?;
        let mut v = report.vector;
        v.label = label;
        vectors.push(v);
    }
    features_to_csv(&vectors, config, run.output("features.csv")?)
}

fn load_features(path: &Path) -> Result<(FeatureManifest, Vec<GroupFeatureVector>)> {
    let manifest = read_manifest(manifest_path(path))?;
    let vectors = read_features(BufReader::new(File::open(path)?), &manifest)?;
    Ok((manifest, vectors))
}

pub fn train(a: &TrainArgs, run: &mut Run) -> Result<()> {
    let (manifest, vectors) = load_features(&a.features)?;
    let labeled: Vec<&GroupFeatureVector> = vectors.iter().filter(|v| v.label.is_some()).collect();
    if labeled.len() < vectors.len() {
        log::warn!("{} unlabeled feature vector(s) ignored", vectors.len() - labeled.len());
    }
    let present: BTreeSet<EventLabel> = labeled.iter().filter_map(|v| v.label).collect();
    if present.len() < 2 {
        return Err(Error::Training(format!(
            "training needs at least two labeled classes, found {}",
            present.len()
        )));
    }
    let classes: Vec<EventLabel> = present.into_iter().collect();
    let y: Vec<usize> = labeled
        .iter()
        .map(|v| classes.iter().position(|c| Some(*c) == v.label).expect("label is present"))
        .collect();
    let config = GbtConfig {
        n_estimators: a.n_estimators,
        max_depth: a.max_depth,
        learning_rate: a.learning_rate,
        holdout_fraction: a.holdout,
        seed: run.seed,
    };
    config.validate()?;
    let split = split_holdout(&y, a.holdout, seed::derive(run.seed, "holdout", 0))?;
    let rows = |idx: &[usize]| -> Vec<Vec<f64>> { idx.iter().map(|&k| labeled[k].features.clone()).collect() };
    let labels = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&k| y[k]).collect() };
    let (x_train, scaler) = standardize(&rows(&split.train))?;
    let names = classes.iter().map(|c| c.to_string()).collect();
    let mut model = gbt::train(&x_train, &labels(&split.train), names, &config)?;
    let x_holdout = scaler.transform_all(&rows(&split.holdout))?;
    model.scaler = Some(scaler);
    model.feature_manifest = Some(ManifestRef {
        version: manifest.version,
        hash: manifest.hash.clone(),
    });
    let report = evaluate(&model, &x_holdout, &labels(&split.holdout))?;
    log::info!("holdout accuracy {:.3}, weighted F1 {:.3}", report.accuracy, report.f1);
    gbt::save_model(&model, run.output("model.json")?)?;
    write_metrics(&report, File::create(run.output("metrics.csv")?)?)?;
    write_confusion(&report, File::create(run.output("confusion.csv")?)?)?;
    Ok(())
}

pub fn predict(a: &PredictArgs, run: &mut Run) -> Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(Error::Config(format!("threshold must be in [0, 1], got {}", a.threshold)));
    }
    let manifest = read_manifest(manifest_path(&a.features))?;
    let model = gbt::load_model_checked(&a.model, &manifest)?;
    let (_, vectors) = load_features(&a.features)?;
    let mut w = csv::Writer::from_path(run.output("predictions.csv")?)?;
    let mut header: Vec<String> = ["locale", "interval_start", "interval_end", "change_type", "n_voters", "label", "predicted", "probability"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(model.classes.iter().map(|c| format!("p_{c}")));
    w.write_record(&header)?;
    let mut below = 0usize;
    for v in &vectors {
        let row = match &model.scaler {
            Some(s) => s.transform(&v.features)?,
            None => v.features.clone(),
        };
        let proba = model.predict_proba(&row)?;
        let best = model.predict(&row)?;
        let predicted = if proba[best] >= a.threshold {
            model.classes[best].clone()
        } else {
            below += 1;
            String::new()
        };
        let mut record = vec![
            v.key.locale.clone(),
            v.key.interval.start.to_string(),
            v.key.interval.end.to_string(),
            v.key.change_type.to_string(),
            v.n_voters.to_string(),
            v.label.map(|l| l.to_string()).unwrap_or_default(),
            predicted,
            format_sig(proba[best], 9),
        ];
        record.extend(proba.iter().map(|&p| format_sig(p, 9)));
        w.write_record(&record)?;
    }
    w.flush()?;
    if below > 0 {
        log::info!("{below} prediction(s) below threshold {}", a.threshold);
    }
    Ok(())
}
