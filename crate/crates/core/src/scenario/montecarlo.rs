//! Monte Carlo comparison of policies over seeded fleet draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::{PolicyKind, ScenarioConfig};
use super::run::{resolve_fleet, simulate, RunSummary};

/// Seed of draw `draw` under `master`: the first word of ChaCha stream `draw`.
///
/// The seed does not depend on the fleet size, so a draw's smaller fleets
/// share bus order and vehicle attributes with its larger ones.
pub fn draw_seed(master: u64, draw: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(draw as u64);
    rng.next_u64()
}

/// Every policy run on one sampled fleet.
#[derive(Debug, Clone)]
pub struct DrawResult {
    pub fleet_size: usize,
    pub draw: usize,
    pub seed: u64,
    /// Indexed like `MonteCarloReport::policies`.
    pub summaries: Vec<RunSummary>,
}

/// Reference-node minimum voltage statistics for one policy and fleet size.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub policy: PolicyKind,
    pub fleet_size: usize,
    pub mean: f64,
    /// Population standard deviation (zero for a single draw).
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub master_seed: u64,
    pub n_draws: usize,
    pub fleet_sizes: Vec<usize>,
    pub policies: Vec<PolicyKind>,
    pub reference_node: usize,
    /// Ordered by fleet size, then draw.
    pub draws: Vec<DrawResult>,
    /// Ordered by policy, then fleet size.
    pub cells: Vec<CellStats>,
}

impl MonteCarloReport {
    pub fn cell(&self, policy: PolicyKind, fleet_size: usize) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.policy == policy && c.fleet_size == fleet_size)
    }
}

/// Runs `policies` on `n_draws` fleets for each size in `fleet_sizes`.
///
/// Work units run in parallel; the report is assembled in a fixed order so
/// it does not depend on scheduling.
pub fn run_monte_carlo(
    config: &ScenarioConfig,
    n_draws: usize,
    fleet_sizes: &[usize],
    policies: &[PolicyKind],
) -> Result<MonteCarloReport> {
    if n_draws == 0 {
        return Err(Error::Config("at least one draw is required".into()));
    }
    if fleet_sizes.is_empty() || policies.is_empty() {
        return Err(Error::Config("need at least one fleet size and one policy".into()));
    }
    let units: Vec<(usize, usize)> = fleet_sizes
        .iter()
        .flat_map(|&n| (0..n_draws).map(move |d| (n, d)))
        .collect();
    let draws = units
        .par_iter()
        .map(|&(fleet_size, draw)| {
            let seed = draw_seed(config.seed, draw);
            let (vehicles, _) = resolve_fleet(config, Some(fleet_size), seed)?;
            let summaries = policies
                .iter()
                .map(|&p| simulate(config, p, &vehicles).map(|r| r.summary))
                .collect::<Result<Vec<_>>>()?;
            Ok(DrawResult { fleet_size, draw, seed, summaries })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (k, &policy) in policies.iter().enumerate() {
        for &fleet_size in fleet_sizes {
            let xs: Vec<f64> = draws
                .iter()
                .filter(|d| d.fleet_size == fleet_size)
                .map(|d| d.summaries[k].min_v_reference)
                .collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            cells.push(CellStats {
                policy,
                fleet_size,
                mean,
                std: var.sqrt(),
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }
    Ok(MonteCarloReport {
        master_seed: config.seed,
        n_draws,
        fleet_sizes: fleet_sizes.to_vec(),
        policies: policies.to_vec(),
        reference_node: config.reference_node,
        draws,
        cells,
    })
}
