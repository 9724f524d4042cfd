use vrf_sentinel::synthgen::{plan_scenario, scenario_labels, LabelRequest, Realizer, ScenarioConfig};
use vrf_sentinel::vrf_io::{write_snapshot, ChangeType, SnapshotSchema};
use vrf_sentinel::{modmatrix, seed, Error, Result};

use super::{write_labels, Run};
use crate::args::{Preset, SynthArgs};

fn resolve_config(a: &SynthArgs, seed: u64) -> Result<ScenarioConfig> {
    let mut config = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut c: ScenarioConfig = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            if let Some(l) = a.n_locales {
                c.n_locales = l;
            }
            if let Some(t) = a.n_intervals {
                c.n_intervals = t;
            }
            c
        }
        None => {
            let (l, t) = (a.n_locales.unwrap_or(99), a.n_intervals.unwrap_or(149));
            match a.preset {
                Preset::Standard => ScenarioConfig::standard_shape(l, t, seed),
                Preset::Quiet => ScenarioConfig {
                    n_locales: l,
                    n_intervals: t,
                    ..ScenarioConfig::quiet(seed)
                },
            }
        }
    };
    config.seed = seed;
    if let Some(d) = a.interval_days {
        config.interval_days = d;
    }
    if let Some(m) = a.population_median {
        config.population.median = m;
    }
    if let Some(s) = a.population_sigma {
        config.population.sigma = s;
    }
    if let Some(m) = a.population_min {
        config.population.min = m;
    }
    if let Some(f) = a.rate_scale {
        if !(f >= 0.0 && f.is_finite()) {
            return Err(Error::Config(format!("rate scale must be finite and non-negative, got {f}")));
        }
        config.base_rates.values_mut().for_each(|r| *r *= f);
    }
    config.validate()?;
    Ok(config)
}

pub fn synth(a: &SynthArgs, run: &mut Run) -> Result<()> {
    let config = resolve_config(a, run.seed)?;
    let mut text = serde_json::to_string_pretty(&config)?;
    text.push('\n');
    std::fs::write(run.output("scenario.json")?, text)?;

    let plan = plan_scenario(&config)?;
    plan.population_table().write(run.output("population.csv")?)?;
    let mut truth = plan.truth();
    if a.matrix_only {
        for ct in ChangeType::ALL {
            modmatrix::matrix_to_csv(&plan.matrix(ct)?, run.output(format!("matrix_{ct}.csv"))?)?;
        }
    } else {
        let schema = SnapshotSchema::default();
        let mut realizer = Realizer::new(&plan)?;
        let write = |r: &Realizer| -> Result<()> {
            let s = r.snapshot()?;
            write_snapshot(&s, run.output(format!("snapshots/snapshot_{}.csv", s.date()))?, &schema)
        };
        write(&realizer)?;
        while let Some(step) = realizer.step()? {
            log::info!("interval {}: {} changes", step.interval, step.changes.len());
            truth.changes.extend(step.changes);
            write(&realizer)?;
        }
    }
    truth.write(run.output("truth.json")?)?;

    let request = LabelRequest {
        total: a.labels,
        ..LabelRequest::default()
    };
    match scenario_labels(&truth, a.label_change_type, &request, seed::derive(run.seed, "labels", 0)) {
        Ok(labels) => write_labels(&labels, &run.output("labels.csv")?)?,
        Err(Error::Precondition(msg)) => log::warn!("no labels written: {msg}"),
        Err(e) => return Err(e),
    }
    Ok(())
}
