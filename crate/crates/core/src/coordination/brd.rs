use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::{ObjectiveContext, PenaltyKind};
use crate::scalar::Real;

use super::best_response::{best_response, Game, Player};
use super::trace::{quantize_profile, IterationTrace, TraceEntry, Updater};
use super::IMPROVEMENT_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// One vehicle at a time; the aggregator refreshes predictions in between.
    Asynchronous,
    /// Every vehicle answers the same snapshot, then all changes apply at once.
    Synchronous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Each vehicle scores all pilot buses.
    Global,
    /// Each vehicle scores only its neighbourhood's pilots.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateOrder {
    /// Ascending vehicle id.
    Ascending,
    /// A fresh seeded permutation every round.
    Shuffled(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyConfig {
    pub schedule: Schedule,
    pub scope: Scope,
    /// Metric used when the scenario driver builds the slot's objective context.
    pub penalty_kind: PenaltyKind,
    pub max_rounds: usize,
    pub br_grid: usize,
    pub order: UpdateOrder,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            schedule: Schedule::Asynchronous,
            scope: Scope::Global,
            penalty_kind: PenaltyKind::Quadratic,
            max_rounds: 100,
            br_grid: 331,
            order: UpdateOrder::Ascending,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationCause {
    /// A full pass in which no vehicle could improve.
    Converged,
    /// A profile repeated; the index is where the cycle starts in the trace.
    CycleDetected(usize),
    RoundCap,
}

impl TerminationCause {
    pub fn name(&self) -> &'static str {
        match self {
            TerminationCause::Converged => "converged",
            TerminationCause::CycleDetected(_) => "cycle",
            TerminationCause::RoundCap => "round_cap",
        }
    }
}

/// Per-vehicle powers (kW) for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChargingProfile<T> {
    pub vehicle_ids: Vec<usize>,
    pub p_kw: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BrdOutcome<T> {
    pub profile: ChargingProfile<T>,
    pub trace: IterationTrace<T>,
    pub termination: TerminationCause,
    /// Applied changes: one per vehicle move (asynchronous) or per round (synchronous).
    pub updates: usize,
    /// Individual vehicle moves applied, counted the same way for both schedules.
    pub vehicle_updates: usize,
    pub rounds: usize,
}

struct Run<'g, 'a, T> {
    game: &'g Game<'a, T>,
    trace: IterationTrace<T>,
    seen: HashMap<Vec<i64>, usize>,
}

impl<T: Real> Run<'_, '_, T> {
    /// Records a profile; returns the first index of an earlier identical profile.
    fn record(&mut self, updater: Updater, profile: &[T]) -> Option<usize> {
        let iter = self.trace.len();
        let delta = self.game.delta(profile);
        let predicted = self.game.ctx.predicted_voltages(&delta).expect("profile matches players");
        self.trace.entries.push(TraceEntry {
            iter,
            updater,
            profile: profile.to_vec(),
            potential: self.game.potential(profile),
            predicted,
        });
        let key = quantize_profile(profile);
        match self.seen.get(&key) {
            Some(&first) => Some(first),
            None => {
                self.seen.insert(key, iter);
                None
            }
        }
    }

    /// Best-potential profile among trace entries `from..`.
    fn best_since(&self, from: usize) -> Vec<T> {
        self.trace.entries[from..]
            .iter()
            .fold(None::<&TraceEntry<T>>, |best, e| match best {
                Some(b) if b.potential <= e.potential => Some(b),
                _ => Some(e),
            })
            .map(|e| e.profile.clone())
            .expect("non-empty cycle")
    }

    /// Best response for `k` against `profile`, if it lowers `k`'s cost enough.
    fn improvement(&self, k: usize, profile: &[T]) -> Result<Option<T>> {
        let x = best_response(self.game, k, profile)?;
        let mut trial = profile.to_vec();
        trial[k] = x;
        let gain = self.game.cost(k, profile) - self.game.cost(k, &trial);
        Ok((gain > T::lit(IMPROVEMENT_THRESHOLD)).then_some(x))
    }
}

/// Runs one slot of best-response dynamics.
///
/// Every vehicle starts at its upper bound. The trace holds the initial
/// profile and then one entry per applied change. A repeated profile stops
/// the run and the lowest-potential profile of the cycle is returned.
pub fn run_slot_brd<T: Real>(players: &[Player<T>], ctx: &ObjectiveContext<T>, policy: &PolicyConfig) -> Result<BrdOutcome<T>> {
    if policy.max_rounds == 0 {
        return Err(Error::Config("max_rounds must be at least 1".into()));
    }
    let game = Game::new(ctx, players, policy.scope, policy.br_grid)?;
    let n = players.len();
    let mut profile: Vec<T> = players.iter().map(|p| p.bounds.p_hi).collect();
    let mut run = Run {
        game: &game,
        trace: IterationTrace::default(),
        seen: HashMap::new(),
    };
    run.record(Updater::Initial, &profile);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| players[k].vehicle_id);
    let mut rng = match policy.order {
        UpdateOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        UpdateOrder::Ascending => None,
    };

    let mut updates = 0;
    let mut vehicle_updates = 0;
    let mut termination = TerminationCause::RoundCap;
    let mut rounds = 0;
    'rounds: for _ in 0..policy.max_rounds {
        rounds += 1;
        if let Some(rng) = rng.as_mut() {
            order.shuffle(rng);
        }
        match policy.schedule {
            Schedule::Asynchronous => {
                let mut moved = false;
                for &k in &order {
                    if let Some(x) = run.improvement(k, &profile)? {
                        profile[k] = x;
                        moved = true;
                        updates += 1;
                        vehicle_updates += 1;
                        if let Some(start) = run.record(Updater::Vehicle(players[k].vehicle_id), &profile) {
                            profile = run.best_since(start);
                            termination = TerminationCause::CycleDetected(start);
                            break 'rounds;
                        }
                    }
                }
                if !moved {
                    termination = TerminationCause::Converged;
                    break;
                }
            }
            Schedule::Synchronous => {
                let mut next = profile.clone();
                let mut movers = 0;
                for &k in &order {
                    if let Some(x) = run.improvement(k, &profile)? {
                        next[k] = x;
                        movers += 1;
                    }
                }
                if movers == 0 {
                    termination = TerminationCause::Converged;
                    break;
                }
                profile = next;
                updates += 1;
                vehicle_updates += movers;
                if let Some(start) = run.record(Updater::All, &profile) {
                    profile = run.best_since(start);
                    termination = TerminationCause::CycleDetected(start);
                    break;
                }
            }
        }
    }

    Ok(BrdOutcome {
        profile: ChargingProfile {
            vehicle_ids: players.iter().map(|p| p.vehicle_id).collect(),
            p_kw: profile,
        },
        trace: run.trace,
        termination,
        updates,
        vehicle_updates,
        rounds,
    })
}
