use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use rand::seq::index;
use rand::Rng;

use super::plan::DRAW_ORDER;
use super::voters::{self, bias_weight, Factory};
use super::{BiasProfile, Cause, ScenarioPlan, TaggedChange};
use crate::error::{Error, Result};
use crate::groupfeatures::ElectionCalendar;
use crate::seed;
use crate::vrf_io::{ChangeRecord, ChangeType, FieldDelta, Snapshot, VoterRecord, VoterStatus};

const ACTIVE: usize = 0;
const INACTIVE: usize = 1;
const PENDING: usize = 2;

fn slot(status: VoterStatus) -> usize {
    match status {
        VoterStatus::Active => ACTIVE,
        VoterStatus::Inactive => INACTIVE,
        VoterStatus::Pending => PENDING,
    }
}

/// Changes of one interval.
#[derive(Debug, Clone)]
pub struct Step {
    pub interval: usize,
    pub anterior_date: NaiveDate,
    pub posterior_date: NaiveDate,
    /// Sorted by voter id, then change type, like a snapshot diff.
    pub changes: Vec<TaggedChange>,
    /// Anterior records of removed voters.
    pub removed: BTreeMap<String, VoterRecord>,
}

/// Voter-level state of a scenario, advanced one interval per [`step`](Self::step).
pub struct Realizer<'p> {
    plan: &'p ScenarioPlan,
    factory: Factory,
    voters: Vec<Option<VoterRecord>>,
    /// Changes each voter has had since the first snapshot.
    changes: Vec<u32>,
    /// `pools[locale][status]`: voter indices.
    pools: Vec<[Vec<u32>; 3]>,
    /// Position of each voter inside its pool.
    pos: Vec<u32>,
    calendar: ElectionCalendar,
    next: usize,
}

impl<'p> Realizer<'p> {
    /// Creates the voters of the first snapshot.
    pub fn new(plan: &'p ScenarioPlan) -> Result<Self> {
        let config = &plan.config;
        let factory = Factory::new(config.start_date);
        let total = plan.total_voters(0) as usize;
        let mut r = Self {
            plan,
            factory,
            voters: Vec::with_capacity(total),
            changes: Vec::with_capacity(total),
            pools: vec![Default::default(); plan.locales.len()],
            pos: Vec::with_capacity(total),
            calendar: ElectionCalendar::default(),
            next: 0,
        };
        for (i, p) in plan.initial.iter().enumerate() {
            let mut rng = seed::sub_rng(config.seed, "initial-voters", i as u64);
            let statuses = std::iter::repeat_n(VoterStatus::Pending, p.pending as usize)
                .chain(std::iter::repeat_n(VoterStatus::Inactive, p.inactive as usize))
                .chain(std::iter::repeat_n(VoterStatus::Active, p.active as usize));
            for status in statuses {
                let v = r.factory.existing(&mut rng, r.voters.len(), i, &plan.locales[i], status, config.start_date);
                r.add(v);
            }
        }
        r.calendar = ElectionCalendar::from_voters(r.voters.iter().flatten());
        Ok(r)
    }

    fn add(&mut self, v: VoterRecord) {
        let idx = self.voters.len();
        let locale = self.locale_index(&v.locale);
        let pool = &mut self.pools[locale][slot(v.status)];
        self.pos.push(pool.len() as u32);
        pool.push(idx as u32);
        self.voters.push(Some(v));
        self.changes.push(0);
    }

    fn locale_index(&self, locale: &str) -> usize {
        self.plan
            .locales
            .binary_search_by(|l| l.as_str().cmp(locale))
            .expect("voters live in scenario locales")
    }

    fn unpool(&mut self, locale: usize, status: usize, idx: u32) {
        let pool = &mut self.pools[locale][status];
        let p = self.pos[idx as usize] as usize;
        debug_assert_eq!(pool[p], idx);
        pool.swap_remove(p);
        if p < pool.len() {
            self.pos[pool[p] as usize] = p as u32;
        }
    }

    fn pool(&mut self, locale: usize, status: usize, idx: u32) {
        let pool = &mut self.pools[locale][status];
        self.pos[idx as usize] = pool.len() as u32;
        pool.push(idx);
    }

    /// Elections found in the first snapshot's vote histories.
    pub fn calendar(&self) -> &ElectionCalendar {
        &self.calendar
    }

    /// Date of the current snapshot.
    pub fn date(&self) -> NaiveDate {
        self.plan.dates[self.next]
    }

    /// Index of the next interval to realise.
    pub fn position(&self) -> usize {
        self.next
    }

    pub fn get(&self, voter_id: &str) -> Option<&VoterRecord> {
        self.voters.get(voters::voter_index(voter_id)?)?.as_ref()
    }

    pub fn len(&self) -> usize {
        self.pools.iter().flatten().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> impl Iterator<Item = &VoterRecord> {
        self.voters.iter().flatten()
    }

    pub fn snapshot(&self) -> Result<Snapshot> {
        Snapshot::from_map(
            self.date(),
            self.records().map(|v| (v.voter_id.clone(), v.clone())).collect(),
        )
    }

    /// Picks `n` distinct candidates, removing them from `candidates`.
    fn choose<R: Rng>(
        &self,
        rng: &mut R,
        candidates: &mut Vec<u32>,
        n: usize,
        bias: BiasProfile,
        as_of: NaiveDate,
    ) -> Result<Vec<u32>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        if n > candidates.len() {
            return Err(Error::Data(format!(
                "scenario plan asks for {n} voters from a pool of {}",
                candidates.len()
            )));
        }
        let mut picked = if bias == BiasProfile::Uniform {
            index::sample(rng, candidates.len(), n).into_vec()
        } else {
            let weights: Vec<f64> = candidates
                .iter()
                .map(|&c| {
                    let v = self.voters[c as usize].as_ref().expect("pooled voters exist");
                    bias_weight(bias, v, self.changes[c as usize], as_of)
                })
                .collect();
            index::sample_weighted(rng, candidates.len(), |k| weights[k], n)
                .map_err(|e| Error::Data(format!("weighted voter draw failed: {e}")))?
                .into_vec()
        };
        let chosen: Vec<u32> = picked.iter().map(|&k| candidates[k]).collect();
        picked.sort_unstable_by(|a, b| b.cmp(a));
        for k in picked {
            candidates.swap_remove(k);
        }
        Ok(chosen)
    }

    fn bias_of(&self, cause: Cause) -> BiasProfile {
        match cause {
            Cause::Event { event, .. } => self.plan.config.events[event].bias,
            _ => BiasProfile::Uniform,
        }
    }

    /// Realises the next interval. Returns `None` after the last one.
    pub fn step(&mut self) -> Result<Option<Step>> {
        let j = self.next;
        if j >= self.plan.config.n_intervals {
            return Ok(None);
        }
        let plan = self.plan;
        let (ant, post) = (plan.dates[j], plan.dates[j + 1]);
        let days = plan.config.interval_days;
        let mut out: Vec<TaggedChange> = Vec::new();
        let mut removed = BTreeMap::new();
        let interval_seed = seed::derive(plan.config.seed, "realize", j as u64);
        let record = |v: &VoterRecord, ct: ChangeType, deltas: Vec<FieldDelta>| ChangeRecord {
            voter_id: v.voter_id.clone(),
            locale: v.locale.clone(),
            change_type: ct,
            anterior_date: ant,
            posterior_date: post,
            field_deltas: deltas,
        };
        for i in 0..plan.locales.len() {
            let mut rng = seed::sub_rng(interval_seed, "locale", i as u64);
            let mut held: Vec<(u32, usize)> = Vec::new();
            let mut fresh: Vec<VoterRecord> = Vec::new();
            for ct in DRAW_ORDER {
                let causes = plan.all_causes(ct, i, j);
                if causes.iter().all(|(_, n)| *n == 0) {
                    continue;
                }
                match ct {
                    ChangeType::Removal => {
                        let mut inactive = self.pools[i][INACTIVE].clone();
                        let mut active = self.pools[i][ACTIVE].clone();
                        for (cause, n) in causes {
                            let from_inactive = (n as usize).min(inactive.len());
                            let bias = self.bias_of(cause);
                            let mut chosen = self.choose(&mut rng, &mut inactive, from_inactive, bias, ant)?;
                            chosen.extend(self.choose(&mut rng, &mut active, n as usize - from_inactive, bias, ant)?);
                            for idx in chosen {
                                let v = self.voters[idx as usize].take().expect("pooled voters exist");
                                self.unpool(i, slot(v.status), idx);
                                out.push(TaggedChange {
                                    change: record(&v, ct, Vec::new()),
                                    cause,
                                });
                                removed.insert(v.voter_id.clone(), v);
                            }
                        }
                    }
                    ChangeType::Activation | ChangeType::Deactivation => {
                        let (from, to) = if ct == ChangeType::Activation {
                            (INACTIVE, ACTIVE)
                        } else {
                            (ACTIVE, INACTIVE)
                        };
                        let mut candidates = self.pools[i][from].clone();
                        for (cause, n) in causes {
                            let bias = self.bias_of(cause);
                            for idx in self.choose(&mut rng, &mut candidates, n as usize, bias, ant)? {
                                self.unpool(i, from, idx);
                                held.push((idx, to));
                                self.changes[idx as usize] += 1;
                                let v = self.voters[idx as usize].as_mut().expect("pooled voters exist");
                                let old = v.status;
                                v.status = if to == ACTIVE { VoterStatus::Active } else { VoterStatus::Inactive };
                                v.last_update_date = post;
                                let delta = FieldDelta::new("status", old.as_str(), v.status.as_str());
                                out.push(TaggedChange {
                                    change: record(v, ct, vec![delta]),
                                    cause,
                                });
                            }
                        }
                    }
                    ChangeType::Registration => {
                        for (cause, n) in causes {
                            for _ in 0..n {
                                let date = ant + Days::new(rng.random_range(1..=u64::from(days)));
                                let index = self.voters.len() + fresh.len();
                                let v = self.factory.registrant(&mut rng, index, i, &plan.locales[i], date);
                                out.push(TaggedChange {
                                    change: record(&v, ct, Vec::new()),
                                    cause,
                                });
                                fresh.push(v);
                            }
                        }
                    }
                    ChangeType::Address | ChangeType::Name | ChangeType::Party => {
                        // Status changes of this interval are still held out of
                        // the pools.
                        let mut candidates: Vec<u32> = self.pools[i].iter().flatten().copied().collect();
                        candidates.extend(held.iter().map(|&(idx, _)| idx));
                        for (cause, n) in causes {
                            let bias = self.bias_of(cause);
                            for idx in self.choose(&mut rng, &mut candidates, n as usize, bias, ant)? {
                                self.changes[idx as usize] += 1;
                                let v = self.voters[idx as usize].as_mut().expect("pooled voters exist");
                                let deltas = edit(&mut rng, v, ct);
                                v.last_update_date = post;
                                out.push(TaggedChange {
                                    change: record(v, ct, deltas),
                                    cause,
                                });
                            }
                        }
                    }
                }
            }
            for (idx, to) in held {
                self.pool(i, to, idx);
            }
            for v in fresh {
                self.add(v);
            }
        }
        out.sort_by(|a, b| {
            (&a.change.voter_id, a.change.change_type).cmp(&(&b.change.voter_id, b.change.change_type))
        });
        self.next += 1;
        Ok(Some(Step {
            interval: j,
            anterior_date: ant,
            posterior_date: post,
            changes: out,
            removed,
        }))
    }
}

/// Applies a record edit of type `ct`, returning its field deltas.
fn edit<R: Rng>(rng: &mut R, v: &mut VoterRecord, ct: ChangeType) -> Vec<FieldDelta> {
    match ct {
        ChangeType::Address => {
            let mut deltas = Vec::new();
            for field in ["house_num", "street_name"] {
                let old = v.address_component(field).to_string();
                let new = if field == "house_num" {
                    voters::new_house_num(rng, &old)
                } else {
                    voters::new_street(rng, &old)
                };
                deltas.push(FieldDelta::new(field, old, new.clone()));
                v.address.insert(field.to_string(), new);
            }
            deltas
        }
        ChangeType::Name => {
            let new = voters::new_last_name(rng, &v.last_name);
            let delta = FieldDelta::new("last_name", v.last_name.clone(), new.clone());
            v.last_name = new;
            vec![delta]
        }
        ChangeType::Party => {
            let new = voters::new_party(rng, &v.party);
            let delta = FieldDelta::new("party", v.party.clone(), new.clone());
            v.party = new;
            vec![delta]
        }
        _ => unreachable!("status and membership changes are not record edits"),
    }
}
