use crate::error::{Error, Result};
use crate::fleet::PowerBounds;
use crate::metrics::{penalty, ObjectiveContext, PenaltyKind};
use crate::scalar::Real;

use super::brd::Scope;

/// A connected vehicle as seen by the coordination game.
#[derive(Debug, Clone, PartialEq)]
pub struct Player<T> {
    pub vehicle_id: usize,
    pub node: usize,
    pub bounds: PowerBounds<T>,
    /// Power (kW) at the linearization point; `Δp = p − p_ref`.
    pub p_ref: T,
}

/// One slot's auxiliary game: players, their shared prediction model and the
/// objective each of them minimizes.
///
/// `players[k]` controls column `k` of the context's sensitivity.
#[derive(Debug, Clone)]
pub struct Game<'a, T> {
    pub ctx: &'a ObjectiveContext<T>,
    pub players: &'a [Player<T>],
    pub scope: Scope,
    pub br_grid: usize,
    scopes: Vec<Option<Vec<usize>>>,
}

impl<'a, T: Real> Game<'a, T> {
    pub fn new(ctx: &'a ObjectiveContext<T>, players: &'a [Player<T>], scope: Scope, br_grid: usize) -> Result<Self> {
        if players.len() != ctx.control_nodes.len() {
            return Err(Error::Contract(format!(
                "{} players for {} control nodes",
                players.len(),
                ctx.control_nodes.len()
            )));
        }
        for (p, &c) in players.iter().zip(&ctx.control_nodes) {
            if p.node != c {
                return Err(Error::Contract(format!("vehicle {} at node {} mapped to control node {c}", p.vehicle_id, p.node)));
            }
            if !(p.bounds.p_lo <= p.bounds.p_hi) {
                return Err(Error::Infeasible {
                    vehicle: p.vehicle_id,
                    detail: format!("empty power interval [{}, {}]", p.bounds.p_lo, p.bounds.p_hi),
                });
            }
        }
        if br_grid < 2 {
            return Err(Error::Config("br_grid must be at least 2".into()));
        }
        let scopes = players
            .iter()
            .map(|p| match scope {
                Scope::Global => Ok(None),
                Scope::Local => ctx.local_scope(p.node).map(|s| Some(s.to_vec())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            ctx,
            players,
            scope,
            br_grid,
            scopes,
        })
    }

    pub fn delta(&self, profile: &[T]) -> Vec<T> {
        profile.iter().zip(self.players).map(|(&p, pl)| p - pl.p_ref).collect()
    }

    /// Global objective of a profile; the game's exact potential.
    pub fn potential(&self, profile: &[T]) -> T {
        let args = self.ctx.arguments(&self.delta(profile)).expect("profile matches players");
        self.ctx.sum_penalties(&args, None)
    }

    /// Objective player `k` minimizes (global or restricted to its neighbourhood).
    pub fn cost(&self, k: usize, profile: &[T]) -> T {
        let args = self.ctx.arguments(&self.delta(profile)).expect("profile matches players");
        self.ctx.sum_penalties(&args, self.scopes[k].as_deref())
    }

    /// Pilot terms seen by player `k` as affine functions `u(x) = c + s·x` of its power.
    fn affine_terms(&self, k: usize, profile: &[T]) -> (Vec<(T, T)>, T) {
        let args = self.ctx.arguments(&self.delta(profile)).expect("profile matches players");
        let own = profile[k] - self.players[k].p_ref;
        let p_ref = self.players[k].p_ref;
        let mut terms = Vec::new();
        let mut constant = T::zero();
        let mut push = |i: usize| {
            let s = self.ctx.load_sensitivity[(i, k)];
            // u(x) = args_i + s·(x − p_ref − own)
            let c = args[i] - s * (own + p_ref);
            if s == T::zero() {
                constant += penalty(c, &self.ctx.band, self.ctx.kind);
            } else {
                terms.push((c, s));
            }
        };
        match &self.scopes[k] {
            None => (0..args.len()).for_each(&mut push),
            Some(idx) => idx.iter().copied().for_each(&mut push),
        }
        (terms, constant)
    }
}

fn eval_terms<T: Real>(terms: &[(T, T)], x: T, ctx: &ObjectiveContext<T>) -> T {
    terms.iter().fold(T::zero(), |acc, &(c, s)| acc + penalty(c + s * x, &ctx.band, ctx.kind))
}

/// Lowest-cost candidate, preferring the largest power among near-ties.
fn pick<T: Real>(candidates: impl IntoIterator<Item = (T, T)>) -> (T, T) {
    let all: Vec<(T, T)> = candidates.into_iter().collect();
    let best = all.iter().fold(T::infinity(), |m, &(_, f)| m.min(f));
    let margin = T::lit(T::TIE_EPS) * (T::one() + best.abs());
    all.into_iter()
        .filter(|&(_, f)| f <= best + margin)
        .fold((T::neg_infinity(), best), |acc, (x, f)| if x > acc.0 { (x, f) } else { acc })
}

/// Power in `[p_lo, p_hi]` minimizing player `k`'s objective with the others fixed.
///
/// Quadratic penalties make the objective piecewise quadratic in the player's
/// own power: each pilot contributes a hinge that switches on where its
/// predicted voltage crosses a band edge. The minimum is found exactly by
/// checking every breakpoint and the stationary point of each piece. Crenel
/// penalties are minimized over `br_grid` evenly spaced powers. Ties go to
/// the largest power.
pub fn best_response<T: Real>(game: &Game<'_, T>, k: usize, profile: &[T]) -> Result<T> {
    let player = &game.players[k];
    let PowerBounds { p_lo: lo, p_hi: hi } = player.bounds;
    if !(lo <= hi) {
        return Err(Error::Infeasible {
            vehicle: player.vehicle_id,
            detail: format!("empty power interval [{lo}, {hi}]"),
        });
    }
    if lo == hi {
        return Ok(hi);
    }
    let (terms, _) = game.affine_terms(k, profile);
    let ctx = game.ctx;
    let candidates: Vec<T> = match ctx.kind {
        PenaltyKind::Quadratic => quadratic_candidates(&terms, lo, hi, ctx),
        PenaltyKind::Crenel => {
            let steps = T::lit((game.br_grid - 1) as f64);
            (0..game.br_grid)
                .map(|i| if i + 1 == game.br_grid { hi } else { lo + (hi - lo) * T::lit(i as f64) / steps })
                .collect()
        }
    };
    let (x, _) = pick(candidates.into_iter().map(|x| (x, eval_terms(&terms, x, ctx))));
    Ok(x)
}

fn quadratic_candidates<T: Real>(terms: &[(T, T)], lo: T, hi: T, ctx: &ObjectiveContext<T>) -> Vec<T> {
    let mut knots = vec![lo, hi];
    for &(c, s) in terms {
        for edge in [ctx.band.v_lo, ctx.band.v_hi] {
            let x = (edge - c) / s;
            if x > lo && x < hi {
                knots.push(x);
            }
        }
    }
    knots.sort_by(|a, b| a.partial_cmp(b).expect("finite knots"));
    knots.dedup();

    let mut out = knots.clone();
    for w in knots.windows(2) {
        let mid = (w[0] + w[1]) / T::lit(2.0);
        // on this piece the active hinges are fixed: minimize Σ (c + s·x − edge)²
        let (mut num, mut den) = (T::zero(), T::zero());
        for &(c, s) in terms {
            let u = c + s * mid;
            let edge = if u < ctx.band.v_lo {
                ctx.band.v_lo
            } else if u > ctx.band.v_hi {
                ctx.band.v_hi
            } else {
                continue;
            };
            num += s * (edge - c);
            den += s * s;
        }
        if den > T::zero() {
            let x = num / den;
            if x > w[0] && x < w[1] {
                out.push(x);
            }
        }
    }
    out
}
