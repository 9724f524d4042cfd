use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::*;
use crate::modmatrix::{build_matrix, top_singular_values};
use crate::vrf_io::{diff_snapshots, write_snapshot_to, SnapshotSchema};

fn small(seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::standard_shape(6, 12, seed);
    c.population = PopulationConfig {
        median: 300.0,
        sigma: 0.3,
        min: 50,
    };
    for r in c.base_rates.values_mut() {
        *r *= 10.0;
    }
    c
}

#[test]
fn zero_rates_give_identical_snapshots() {
    let mut c = ScenarioConfig::quiet(3);
    c.n_locales = 3;
    c.n_intervals = 4;
    c.population.median = 200.0;
    c.population.min = 10;
    c.base_rates.values_mut().for_each(|r| *r = 0.0);
    let (snaps, truth) = generate_scenario(&c).unwrap();
    assert_eq!(snaps.len(), 5);
    for w in snaps.windows(2) {
        assert_eq!(w[0].records(), w[1].records());
    }
    assert!(truth.changes.is_empty());
    assert_eq!((truth.inserted_voters, truth.removed_voters), (0, 0));
}

#[test]
fn diffs_match_tagged_changes_and_plan() {
    let c = small(11);
    let plan = plan_scenario(&c).unwrap();
    let (snaps, truth) = generate_scenario(&c).unwrap();
    let mut from_diff = Vec::new();
    for w in snaps.windows(2) {
        from_diff.extend(diff_snapshots(&w[0], &w[1]).unwrap());
    }
    let tagged: Vec<_> = truth.changes.iter().map(|t| t.change.clone()).collect();
    assert_eq!(from_diff, tagged);
    let count = |ct| from_diff.iter().filter(|c| c.change_type == ct).count() as u64;
    assert_eq!(count(ChangeType::Registration), truth.inserted_voters);
    assert_eq!(count(ChangeType::Removal), truth.removed_voters);
    assert!(ChangeType::ALL.iter().all(|&ct| count(ct) > 0));

    let mut table = crate::modmatrix::PopulationTable::default();
    for s in &snaps {
        table.add_snapshot(s);
    }
    for ct in ChangeType::ALL {
        let built = build_matrix(&from_diff, ct, &plan.grid(), &table).unwrap();
        assert_eq!(built, plan.matrix(ct).unwrap(), "{ct}");
    }
    for cell in &truth.cells {
        let n = truth
            .changes
            .iter()
            .filter(|t| t.cause == cell.cause && t.change.change_type == cell.change_type)
            .filter(|t| t.change.locale == truth.locales[cell.locale])
            .filter(|t| t.change.posterior_date == truth.snapshot_dates[cell.interval + 1])
            .count() as u64;
        assert_eq!(n, cell.count);
    }
}

#[test]
fn planted_count_matches_diff() {
    let mut c = ScenarioConfig::quiet(5);
    c.n_locales = 8;
    c.n_intervals = 42;
    c.population = PopulationConfig {
        median: 600.0,
        sigma: 0.0,
        min: 600,
    };
    c.planted.push(PlantedAnomaly {
        locale: 5,
        interval: 40,
        change_type: ChangeType::Deactivation,
        amount: Amount::Count(200),
    });
    let plan = plan_scenario(&c).unwrap();
    let organic = plan.all_causes(ChangeType::Deactivation, 5, 40).last().unwrap().1;
    let mut r = Realizer::new(&plan).unwrap();
    let mut before = r.snapshot().unwrap();
    while let Some(step) = r.step().unwrap() {
        let after = r.snapshot().unwrap();
        let diff = diff_snapshots(&before, &after).unwrap();
        let in_cell = |ct| diff.iter().filter(|c| c.change_type == ct && c.locale == "L006").count() as u64;
        if step.interval == 40 {
            assert_eq!(in_cell(ChangeType::Deactivation), 200 + organic);
            let planted = step
                .changes
                .iter()
                .filter(|t| matches!(t.cause, Cause::Planted { anomaly: 0 }))
                .count();
            assert_eq!(planted, 200);
        }
        for ct in ChangeType::ALL {
            assert_eq!(in_cell(ct), plan.counts(ct)[(5, step.interval)]);
        }
        before = after;
    }
}

#[test]
fn statewide_event_dominates_the_spectrum() {
    let mut c = ScenarioConfig::quiet(9);
    c.n_locales = 30;
    c.n_intervals = 40;
    c.events.push(EventSpec {
        label: EventLabel::InactivityMailingResponseProcessing,
        change_type: ChangeType::Deactivation,
        locales: (0..30).collect(),
        intervals: vec![17],
        amount: Amount::Multiplier(60.0),
        bias: BiasProfile::NonVoters,
        spread: 0.0,
    });
    let m = plan_scenario(&c).unwrap().matrix(ChangeType::Deactivation).unwrap();
    let svd = m.values().clone().svd(false, true);
    let k = svd.singular_values.imax();
    let v = svd.v_t.unwrap().row(k).transpose();
    assert_eq!(v.iamax(), 17);
    assert!(v[17].abs() > 0.95, "{}", v[17]);
    let s = top_singular_values(&m, 2).unwrap();
    assert!(s[0] > 5.0 * s[1]);
}

#[test]
fn organic_counts_are_poisson() {
    let c = ScenarioConfig::quiet(21);
    let plan = plan_scenario(&c).unwrap();
    let ct = ChangeType::Deactivation;
    let counts = plan.counts(ct);
    let mut stat = 0.0;
    let mut n = 0;
    for j in 0..c.n_intervals {
        for i in 0..c.n_locales {
            let lambda = c.base_rate(ct) * 7.0 * plan.population_at(j)[i] as f64 / 1000.0;
            let d = counts[(i, j)] as f64 - lambda;
            stat += d * d / lambda;
            n += 1;
        }
    }
    assert_eq!(n, 14751);
    let p = 1.0 - ChiSquared::new(n as f64).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square {stat} on {n} cells, p = {p}");
}

#[test]
fn generation_is_deterministic() {
    let c = small(4);
    let (a, ta) = generate_scenario(&c).unwrap();
    let (b, tb) = generate_scenario(&c).unwrap();
    assert_eq!(ta.to_json().unwrap(), tb.to_json().unwrap());
    let schema = SnapshotSchema::default();
    for (x, y) in a.iter().zip(&b) {
        let (mut bx, mut by) = (Vec::new(), Vec::new());
        write_snapshot_to(x, &mut bx, &schema).unwrap();
        write_snapshot_to(y, &mut by, &schema).unwrap();
        assert_eq!(bx, by);
    }
    let (other, _) = generate_scenario(&small(5)).unwrap();
    assert_ne!(a[1].records(), other[1].records());
    assert_eq!(GroundTruth::from_json(&ta.to_json().unwrap()).unwrap(), ta);
}

#[test]
fn labels_follow_requested_proportions() {
    let plan = plan_scenario(&ScenarioConfig::standard(1)).unwrap();
    let truth = plan.truth();
    let labels = scenario_labels(&truth, ChangeType::Deactivation, &LabelRequest::default(), 1).unwrap();
    let mut per: BTreeMap<EventLabel, usize> = BTreeMap::new();
    for (key, label) in &labels {
        *per.entry(*label).or_default() += 1;
        let i = truth.locales.iter().position(|l| *l == key.locale).unwrap();
        let j = truth.grid().unwrap().index_of(key.interval.start).unwrap();
        assert_eq!(truth.cell_label(ChangeType::Deactivation, i, j), CellLabel::Event(*label));
    }
    assert_eq!(per.values().copied().collect::<Vec<_>>(), vec![99, 37, 27, 21]);

    let even = LabelRequest {
        total: 4,
        proportions: EventLabel::ALL.iter().map(|&l| (l, 1.0)).collect(),
    };
    let four = scenario_labels(&truth, ChangeType::Deactivation, &even, 1).unwrap();
    let mut kinds: Vec<_> = four.iter().map(|(_, l)| *l).collect();
    kinds.sort();
    assert_eq!(kinds, EventLabel::ALL.to_vec());

    let quiet = plan_scenario(&ScenarioConfig::quiet(1)).unwrap().truth();
    assert!(scenario_labels(&quiet, ChangeType::Deactivation, &even, 1).is_err());
}

#[test]
fn unknown_locale_is_a_config_error() {
    let mut c = ScenarioConfig::quiet(0);
    c.events.push(EventSpec {
        label: EventLabel::Other,
        change_type: ChangeType::Name,
        locales: vec![99],
        intervals: vec![0],
        amount: Amount::Count(3),
        bias: BiasProfile::Uniform,
        spread: 0.0,
    });
    assert!(matches!(plan_scenario(&c), Err(Error::Config(_))));
}

#[test]
fn standard_layout() {
    let c = ScenarioConfig::standard(0);
    assert_eq!(c.n_locales * c.n_intervals, 14751);
    assert_eq!(c.planted.len(), 4);
    let others = c.events.iter().filter(|e| e.label == EventLabel::Other).count();
    assert_eq!(others, 30);
    let plan = plan_scenario(&c).unwrap();
    let truth = plan.truth();
    assert_eq!(truth.planted_cells(ChangeType::Deactivation).len(), 4);
    let m = plan.matrix(ChangeType::Deactivation).unwrap();
    for e in truth.planted_cells(ChangeType::Deactivation) {
        let v = m.values()[(e.locale_index, e.interval_index)];
        assert!(v > 8.0 * m.mean_value(), "{v} vs mean {}", m.mean_value());
    }
}

#[test]
fn labeled_features_come_from_the_realised_groups() {
    let c = small(2);
    let plan = plan_scenario(&c).unwrap();
    let truth = plan.truth();
    let req = LabelRequest {
        total: 6,
        ..LabelRequest::default()
    };
    let labels = scenario_labels(&truth, ChangeType::Deactivation, &req, 3).unwrap();
    let vectors = labeled_group_features(&plan, &labels, crate::groupfeatures::FeatureConfig::default()).unwrap();
    assert_eq!(vectors.len(), labels.len());
    for (v, (key, label)) in vectors.iter().zip(&labels) {
        assert_eq!(&v.key, key);
        assert_eq!(v.label, Some(*label));
        let i = truth.locales.iter().position(|l| *l == key.locale).unwrap();
        let j = plan.grid().index_of(key.interval.start).unwrap();
        assert_eq!(v.n_voters as u64, plan.counts(ChangeType::Deactivation)[(i, j)]);
    }
}
