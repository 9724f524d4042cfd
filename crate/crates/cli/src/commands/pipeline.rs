use std::collections::{BTreeMap, BTreeSet};

use vrf_sentinel::modmatrix::{build_matrix, matrix_to_csv, IntervalGrid, PopulationTable};
use vrf_sentinel::render::{render_heatmap, HeatmapSource};
use vrf_sentinel::vrf_io::{
    changes_to_csv, count_by_type, csv_to_changes, diff_snapshots_with, parse_snapshot, write_snapshot, ChangeType,
    DiffOptions, SnapshotSchema,
};
use vrf_sentinel::Result;

use super::{load_schema, snapshot_paths, Run};
use crate::args::{DiffArgs, IngestArgs, MatrixArgs};

pub fn ingest(a: &IngestArgs, run: &mut Run) -> Result<()> {
    let schema = load_schema(a.schema.as_deref())?;
    let snapshot = parse_snapshot(&a.snapshot, &schema, a.date)?;
    write_snapshot(
        &snapshot,
        run.output(format!("snapshot_{}.csv", snapshot.date()))?,
        &SnapshotSchema::default(),
    )?;
    let mut statuses: BTreeMap<&str, u64> = BTreeMap::new();
    for v in snapshot.records().values() {
        *statuses.entry(v.status.as_str()).or_default() += 1;
    }
    let summary = serde_json::json!({
        "date": snapshot.date(),
        "records": snapshot.len(),
        "statuses": statuses,
        "locales": snapshot.locale_counts(),
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(run.output("summary.json")?, text)?;
    Ok(())
}

pub fn diff(a: &DiffArgs, run: &mut Run) -> Result<()> {
    let schema = load_schema(a.schema.as_deref())?;
    let options = DiffOptions { strict: a.strict };
    let mut population = PopulationTable::default();
    let mut changes = Vec::new();
    let mut previous = None;
    for (date, path) in snapshot_paths(&a.snapshots)? {
        let snapshot = parse_snapshot(&path, &schema, Some(date))?;
        population.add_snapshot(&snapshot);
        if let Some(prev) = &previous {
            let step = diff_snapshots_with(prev, &snapshot, options)?;
            log::info!("{date}: {} changes", step.len());
            changes.extend(step);
        }
        previous = Some(snapshot);
    }
    for (ct, n) in count_by_type(&changes) {
        log::info!("{ct}: {n}");
    }
    changes_to_csv(&changes, run.output("changes.csv")?)?;
    population.write(run.output("population.csv")?)?;
    Ok(())
}

pub fn matrix(a: &MatrixArgs, run: &mut Run) -> Result<()> {
    let changes = csv_to_changes(&a.changes)?;
    let population = PopulationTable::read(&a.population)?;
    let grid = IntervalGrid::for_population_table(&population, a.interval_days)?;
    let types: Vec<ChangeType> = match a.change_type {
        Some(ct) => vec![ct],
        None => ChangeType::ALL.to_vec(),
    };
    for ct in types {
        let m = build_matrix(&changes, ct, &grid, &population)?;
        matrix_to_csv(&m, run.output(format!("matrix_{ct}.csv"))?)?;
        render_heatmap(HeatmapSource::Matrix(&m), run.output(format!("matrix_{ct}.svg"))?, &BTreeSet::new())?;
    }
    Ok(())
}
