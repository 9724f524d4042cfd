use std::collections::BTreeMap;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, LogNormal};

use super::{Cause, CellTruth, GroundTruth, ScenarioConfig};
use crate::error::{Error, Result};
use crate::modmatrix::{IntervalGrid, ModificationMatrix, PopulationTable};
use crate::seed;
use crate::vrf_io::ChangeType;

/// Order in which a cell's change types are drawn and realised. Pool
/// availability depends on it: removals come first, then status changes
/// against the pools as they stood at the interval start.
pub(crate) const DRAW_ORDER: [ChangeType; 7] = [
    ChangeType::Removal,
    ChangeType::Activation,
    ChangeType::Deactivation,
    ChangeType::Registration,
    ChangeType::Address,
    ChangeType::Name,
    ChangeType::Party,
];

/// Per-locale voter counts by status.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct Pools {
    pub active: u64,
    pub inactive: u64,
    pub pending: u64,
}

impl Pools {
    pub fn total(&self) -> u64 {
        self.active + self.inactive + self.pending
    }
}

/// Cell-level counts of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioPlan {
    pub(crate) config: ScenarioConfig,
    pub(crate) locales: Vec<String>,
    pub(crate) dates: Vec<NaiveDate>,
    pub(crate) initial: Vec<Pools>,
    /// `populations[j][i]`: registered voters of locale `i` at snapshot `j`.
    pub(crate) populations: Vec<Vec<u64>>,
    /// Indexed by [`ChangeType::index`].
    pub(crate) counts: Vec<DMatrix<u64>>,
    /// Non-organic causes of a cell in draw order, keyed by
    /// `(interval, locale, change type)`.
    pub(crate) causes: BTreeMap<(usize, usize, ChangeType), Vec<(Cause, u64)>>,
}

/// Causes per `(interval, locale, change type)` with their intensity scale.
fn event_cells(config: &ScenarioConfig) -> BTreeMap<(usize, usize, ChangeType), Vec<(Cause, f64)>> {
    let mut cells: BTreeMap<_, Vec<(Cause, f64)>> = BTreeMap::new();
    for (k, a) in config.planted.iter().enumerate() {
        cells
            .entry((a.interval, a.locale, a.change_type))
            .or_default()
            .push((Cause::Planted { anomaly: k }, 1.0));
    }
    for (k, e) in config.events.iter().enumerate() {
        let mut rng = seed::sub_rng(config.seed, "event-spread", k as u64);
        let scales: Vec<f64> = e
            .locales
            .iter()
            .map(|_| 1.0 + e.spread * (2.0 * rng.random::<f64>() - 1.0))
            .collect();
        for &j in &e.intervals {
            for (&i, &scale) in e.locales.iter().zip(&scales) {
                let cause = Cause::Event {
                    label: e.label,
                    event: k,
                };
                cells.entry((j, i, e.change_type)).or_default().push((cause, scale));
            }
        }
    }
    cells
}

/// Draws every cell's change counts.
///
/// Counts are clamped to what the pools allow: removals take inactive
/// voters first, activations need inactive voters, deactivations active
/// ones, and record edits any voter still registered. Within a cell the
/// causes are drawn planted first, then events in configuration order,
/// then the organic background.
pub fn plan_scenario(config: &ScenarioConfig) -> Result<ScenarioPlan> {
    config.validate()?;
    let (l, t) = (config.n_locales, config.n_intervals);
    let mut rng = seed::sub_rng(config.seed, "population", 0);
    let mut initial = Vec::with_capacity(l);
    let lognormal = LogNormal::new(config.population.median.max(f64::MIN_POSITIVE).ln(), config.population.sigma)
        .map_err(|e| Error::Config(format!("population distribution: {e}")))?;
    for i in 0..l {
        let size = if config.population.median == 0.0 {
            config.population.min
        } else {
            (lognormal.sample(&mut rng).round() as u64).max(config.population.min)
        };
        let mut status_rng = seed::sub_rng(config.seed, "initial-status", i as u64);
        let pending = binomial(&mut status_rng, size, config.pending_fraction);
        let rest = size - pending;
        let inactive_share = config.inactive_fraction / (1.0 - config.pending_fraction);
        let inactive = binomial(&mut status_rng, rest, inactive_share);
        initial.push(Pools {
            active: rest - inactive,
            inactive,
            pending,
        });
    }

    let cause_cells = event_cells(config);
    let mut counts = vec![DMatrix::<u64>::zeros(l, t); ChangeType::ALL.len()];
    let mut causes = BTreeMap::new();
    let mut populations = Vec::with_capacity(t + 1);
    let mut pools = initial.clone();
    let days = config.interval_days;
    for j in 0..t {
        populations.push(pools.iter().map(Pools::total).collect::<Vec<_>>());
        let interval_seed = seed::derive(config.seed, "plan", j as u64);
        for (i, p) in pools.iter_mut().enumerate() {
            let mut rng = seed::sub_rng(interval_seed, "locale", i as u64);
            let pop = p.total();
            let mut removed_inactive = 0;
            let mut removed = 0;
            let mut activated = 0;
            let mut deactivated = 0;
            let mut registered = 0;
            for ct in DRAW_ORDER {
                let mut available = match ct {
                    ChangeType::Removal => p.inactive + p.active,
                    ChangeType::Activation => p.inactive - removed_inactive,
                    ChangeType::Deactivation => p.active - (removed - removed_inactive),
                    ChangeType::Registration => u64::MAX,
                    ChangeType::Address | ChangeType::Name | ChangeType::Party => pop - removed,
                };
                let base = config.base_rate(ct);
                let mut total = 0;
                let mut extra = Vec::new();
                for (cause, scale) in cause_cells.get(&(j, i, ct)).into_iter().flatten() {
                    let amount = match *cause {
                        Cause::Planted { anomaly } => config.planted[anomaly].amount,
                        Cause::Event { event, .. } => config.events[event].amount,
                        Cause::Organic => unreachable!("organic causes are implicit"),
                    };
                    let n = amount.draw(base, days, pop, *scale, &mut rng).min(available);
                    available -= n;
                    total += n;
                    extra.push((*cause, n));
                }
                let organic = super::poisson(&mut rng, base * f64::from(days) * pop as f64 / 1000.0).min(available);
                total += organic;
                if !extra.is_empty() {
                    causes.insert((j, i, ct), extra);
                }
                counts[ct.index()][(i, j)] = total;
                match ct {
                    ChangeType::Removal => {
                        removed = total;
                        removed_inactive = total.min(p.inactive);
                    }
                    ChangeType::Activation => activated = total,
                    ChangeType::Deactivation => deactivated = total,
                    ChangeType::Registration => registered = total,
                    _ => {}
                }
            }
            p.inactive = p.inactive - removed_inactive - activated + deactivated;
            p.active = p.active - (removed - removed_inactive) - deactivated + activated + registered;
        }
    }
    populations.push(pools.iter().map(Pools::total).collect());
    Ok(ScenarioPlan {
        config: config.clone(),
        locales: config.locale_names(),
        dates: config.snapshot_dates(),
        initial,
        populations,
        counts,
        causes,
    })
}

fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p).expect("probability in [0, 1]").sample(rng)
}

impl ScenarioPlan {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn locales(&self) -> &[String] {
        &self.locales
    }

    pub fn snapshot_dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn grid(&self) -> IntervalGrid {
        IntervalGrid::for_snapshots(self.config.start_date, self.config.interval_days, self.config.n_intervals)
            .expect("validated scenario shape")
    }

    /// Registered voters of each locale at snapshot `j`.
    pub fn population_at(&self, j: usize) -> &[u64] {
        &self.populations[j]
    }

    pub fn total_voters(&self, j: usize) -> u64 {
        self.populations[j].iter().sum()
    }

    /// Change counts of `change_type`, locales × intervals.
    pub fn counts(&self, change_type: ChangeType) -> &DMatrix<u64> {
        &self.counts[change_type.index()]
    }

    /// Non-organic causes of one cell with their counts, in draw order.
    pub fn cell_causes(&self, change_type: ChangeType, locale: usize, interval: usize) -> &[(Cause, u64)] {
        self.causes
            .get(&(interval, locale, change_type))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// All causes of one cell including the organic remainder, in draw
    /// order (organic last).
    pub(crate) fn all_causes(&self, change_type: ChangeType, locale: usize, interval: usize) -> Vec<(Cause, u64)> {
        let mut v = self.cell_causes(change_type, locale, interval).to_vec();
        let extra: u64 = v.iter().map(|(_, n)| n).sum();
        let organic = self.counts(change_type)[(locale, interval)] - extra;
        v.push((Cause::Organic, organic));
        v
    }

    pub fn population_table(&self) -> PopulationTable {
        let mut table = PopulationTable::default();
        for (date, pops) in self.dates.iter().zip(&self.populations) {
            for (locale, &n) in self.locales.iter().zip(pops) {
                table.insert(*date, locale, n);
            }
        }
        table
    }

    /// The modification matrix the realised change stream will produce.
    pub fn matrix(&self, change_type: ChangeType) -> Result<ModificationMatrix> {
        let (l, t) = (self.config.n_locales, self.config.n_intervals);
        ModificationMatrix::from_counts(
            change_type,
            self.locales.clone(),
            self.grid().intervals(),
            self.counts(change_type).clone(),
            DMatrix::from_fn(l, t, |i, j| self.populations[j][i]),
        )
    }

    /// Cell-level ground truth; `changes` stays empty until realised.
    pub fn truth(&self) -> GroundTruth {
        let mut cells = Vec::new();
        for (&(j, i, ct), list) in &self.causes {
            for &(cause, count) in list {
                cells.push(CellTruth {
                    change_type: ct,
                    locale: i,
                    interval: j,
                    cause,
                    count,
                });
            }
        }
        cells.sort_by_key(|c| (c.change_type, c.locale, c.interval, c.cause));
        GroundTruth {
            seed: self.config.seed,
            locales: self.locales.clone(),
            snapshot_dates: self.dates.clone(),
            interval_days: self.config.interval_days,
            cells,
            inserted_voters: self.counts(ChangeType::Registration).iter().sum(),
            removed_voters: self.counts(ChangeType::Removal).iter().sum(),
            changes: Vec::new(),
        }
    }
}
