//! Helpers shared by the integration tests: seeded random feeders and
//! reference computations written directly from the circuit equations,
//! without going through the crate's admittance or Jacobian code.
#![allow(dead_code)]

use evcoord::coordination::Player;
use evcoord::fleet::PowerBounds;
use evcoord::linalg::Matrix;
use evcoord::metrics::{Neighborhoods, ObjectiveContext, PenaltyKind, VoltageBand};
use evcoord::network::surrogate::{bundled_feeder, ieee34_neighborhood_ranges};
use evcoord::network::{Bus, FeederModel, Line};
use evcoord::network::{compute_jacobian, extract_sensitivity, load_injections, solve_load_flow};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tree on buses `1..=n` (slack 1), 400 V / 100 kVA bases, light loads.
pub fn random_radial_feeder(rng: &mut ChaCha8Rng, n: usize) -> FeederModel<f64> {
    let buses = (1..=n)
        .map(|id| Bus {
            id,
            base_load_p: if id == 1 { 0.0 } else { rng.random_range(0.0..2.0) },
            base_load_q: if id == 1 { 0.0 } else { rng.random_range(0.0..0.4) },
            is_slack: id == 1,
        })
        .collect();
    let lines = (2..=n)
        .map(|id| Line {
            from_bus: rng.random_range(1..id),
            to_bus: id,
            resistance: rng.random_range(0.002..0.02),
            reactance: rng.random_range(0.002..0.02),
        })
        .collect();
    FeederModel::new(buses, lines, 400.0, 100_000.0).expect("valid tree")
}

/// Bus admittance matrix in pu built straight from the line list.
pub fn ybus(model: &FeederModel<f64>) -> Vec<Vec<Complex64>> {
    let n = model.len();
    let z_base = model.base_voltage() * model.base_voltage() / model.base_power();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for l in model.lines() {
        let (i, j) = (model.index_of(l.from_bus).unwrap(), model.index_of(l.to_bus).unwrap());
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(l.resistance / z_base, l.reactance / z_base);
        y[i][i] += ys;
        y[j][j] += ys;
        y[i][j] -= ys;
        y[j][i] -= ys;
    }
    y
}

/// Complex power injections `S_i = V_i · conj(Σ_j Y_ij V_j)` in pu.
pub fn injections(y: &[Vec<Complex64>], v_mag: &[f64], v_ang: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let v: Vec<Complex64> = v_mag.iter().zip(v_ang).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
    let mut p = Vec::with_capacity(v.len());
    let mut q = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let current: Complex64 = (0..v.len()).map(|j| y[i][j] * v[j]).sum();
        let s = v[i] * current.conj();
        p.push(s.re);
        q.push(s.im);
    }
    (p, q)
}

/// Largest |ΔP|, |ΔQ| in pu at non-slack buses for injections given in kW.
pub fn max_residual(model: &FeederModel<f64>, v_mag: &[f64], v_ang: &[f64], p_kw: &[f64], q_kvar: &[f64]) -> f64 {
    let (p, q) = injections(&ybus(model), v_mag, v_ang);
    let to_pu = 1000.0 / model.base_power();
    (0..model.len())
        .filter(|&i| i != model.slack_index())
        .map(|i| (p[i] - p_kw[i] * to_pu).abs().max((q[i] - q_kvar[i] * to_pu).abs()))
        .fold(0.0, f64::max)
}

/// Central-difference Jacobian of (P, Q) over (δ, V) at non-slack buses, in
/// the block order `[[∂P/∂δ, ∂P/∂V], [∂Q/∂δ, ∂Q/∂V]]`.
pub fn fd_jacobian(model: &FeederModel<f64>, v_mag: &[f64], v_ang: &[f64], h: f64) -> Vec<Vec<f64>> {
    let y = ybus(model);
    let idx: Vec<usize> = (0..model.len()).filter(|&i| i != model.slack_index()).collect();
    let m = idx.len();
    let mut jac = vec![vec![0.0; 2 * m]; 2 * m];
    for (col, &j) in idx.iter().enumerate() {
        for (block, perturb_angle) in [(0, true), (1, false)] {
            let eval = |sign: f64| {
                let (mut v, mut a) = (v_mag.to_vec(), v_ang.to_vec());
                if perturb_angle {
                    a[j] += sign * h;
                } else {
                    v[j] += sign * h;
                }
                injections(&y, &v, &a)
            };
            let (pp, qp) = eval(1.0);
            let (pm, qm) = eval(-1.0);
            for (row, &i) in idx.iter().enumerate() {
                jac[row][block * m + col] = (pp[i] - pm[i]) / (2.0 * h);
                jac[m + row][block * m + col] = (qp[i] - qm[i]) / (2.0 * h);
            }
        }
    }
    jac
}

/// Quadratic band penalty written out independently of the crate.
pub fn quad(u: f64, lo: f64, hi: f64) -> f64 {
    if u < lo {
        (lo - u).powi(2)
    } else if u > hi {
        (u - hi).powi(2)
    } else {
        0.0
    }
}

/// One coordination slot with `n` vehicles on distinct random buses of the
/// bundled feeder, linearized at base load plus random previous powers.
pub fn slot_instance(seed: u64, n: usize, kind: PenaltyKind) -> (ObjectiveContext<f64>, Vec<Player<f64>>) {
    let mut r = rng(seed);
    let model = bundled_feeder::<f64>();
    let mut nodes: Vec<usize> = model.non_slack_ids();
    for i in (1..nodes.len()).rev() {
        nodes.swap(i, r.random_range(0..=i));
    }
    nodes.truncate(n);
    let players: Vec<Player<f64>> = nodes
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let p_lo = if r.random_bool(0.2) { r.random_range(0.0..1.0) } else { 0.0 };
            let p_hi = if r.random_bool(0.2) { r.random_range(p_lo..3.3) } else { 3.3 };
            Player {
                vehicle_id: k + 1,
                node,
                bounds: PowerBounds { p_lo, p_hi },
                p_ref: r.random_range(0.0..3.3),
            }
        })
        .collect();
    let mut ev = vec![0.0; model.len()];
    for p in &players {
        ev[model.index_of(p.node).unwrap()] = p.p_ref;
    }
    let (pi, qi) = load_injections(&model, &ev);
    let op = solve_load_flow(&model, &pi, &qi).unwrap();
    let pilots = model.non_slack_ids();
    let sens = extract_sensitivity(&compute_jacobian(&model, &op).unwrap(), &pilots, &nodes).unwrap();
    let hoods = Neighborhoods::from_ranges(&ieee34_neighborhood_ranges(), &pilots).unwrap();
    let ctx = ObjectiveContext::from_sensitivity(&model, &sens, VoltageBand::default(), kind)
        .unwrap()
        .with_neighborhoods(&hoods);
    (ctx, players)
}

/// Two vehicles on a pilot at risk of under-voltage and a pilot that is
/// already over-voltage; both pilots are equally sensitive to both vehicles,
/// so each best response undoes the other's when they move together.
pub fn antagonistic() -> (ObjectiveContext<f64>, Vec<Player<f64>>) {
    let ctx = ObjectiveContext::new(
        vec![10, 20],
        vec![10, 20],
        vec![0.95, 1.16],
        Matrix::from_fn(2, 2, |_, _| -0.03),
        VoltageBand::default(),
        PenaltyKind::Quadratic,
    )
    .unwrap();
    let players = vec![
        Player { vehicle_id: 1, node: 10, bounds: PowerBounds { p_lo: 0.0, p_hi: 3.3 }, p_ref: 0.0 },
        Player { vehicle_id: 2, node: 20, bounds: PowerBounds { p_lo: 0.0, p_hi: 3.3 }, p_ref: 0.0 },
    ];
    (ctx, players)
}

/// Player `k`'s objective with its power set to `x`, written from Eq. (7)/(8).
pub fn oracle_cost(ctx: &ObjectiveContext<f64>, players: &[Player<f64>], profile: &[f64], k: usize, x: f64, scope: Option<&[usize]>) -> f64 {
    let mut p = profile.to_vec();
    p[k] = x;
    let pilots: Vec<usize> = match scope {
        Some(s) => s.to_vec(),
        None => (0..ctx.pilot_nodes.len()).collect(),
    };
    pilots
        .iter()
        .map(|&i| {
            let shift: f64 = (0..players.len()).map(|c| ctx.load_sensitivity[(i, c)] * (p[c] - players[c].p_ref)).sum();
            let u = ctx.v_measured[i] - ctx.v_ref + shift;
            match ctx.kind {
                PenaltyKind::Quadratic => quad(u, ctx.band.v_lo, ctx.band.v_hi),
                PenaltyKind::Crenel => f64::from(u32::from(!(ctx.band.v_lo..=ctx.band.v_hi).contains(&u))),
            }
        })
        .sum()
}

pub fn distinct_nodes(r: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (2..=34).collect();
    for i in (1..all.len()).rev() {
        all.swap(i, r.random_range(0..=i));
    }
    all.truncate(n);
    all
}

/// Small random game: pilots, vehicles, sensitivities, bounds and a profile.
pub fn random_context(r: &mut ChaCha8Rng, kind: PenaltyKind) -> (ObjectiveContext<f64>, Vec<Player<f64>>, Vec<f64>) {
    let n_pilots = r.random_range(1..=10);
    let n_players = r.random_range(1..=6);
    let pilots = distinct_nodes(r, n_pilots);
    let controls = distinct_nodes(r, n_players);
    let v: Vec<f64> = (0..n_pilots).map(|_| r.random_range(0.84..1.16)).collect();
    let sens = Matrix::from_fn(n_pilots, n_players, |_, _| {
        if r.random_bool(0.1) {
            r.random_range(0.001..0.02)
        } else {
            -r.random_range(0.001..0.03)
        }
    });
    let hoods = Neighborhoods::from_ranges(&[(1, 14), (15, 34)], &pilots).unwrap();
    let ctx = ObjectiveContext::new(pilots, controls.clone(), v, sens, VoltageBand::default(), kind)
        .unwrap()
        .with_v_ref(0.0)
        .with_neighborhoods(&hoods);
    let players: Vec<Player<f64>> = controls
        .iter()
        .enumerate()
        .map(|(k, &node)| {
            let p_lo = if r.random_bool(0.3) { r.random_range(0.0..2.0) } else { 0.0 };
            let p_hi = r.random_range(p_lo..=3.3);
            Player { vehicle_id: k + 1, node, bounds: PowerBounds { p_lo, p_hi }, p_ref: r.random_range(0.0..3.3) }
        })
        .collect();
    let profile = players.iter().map(|p| r.random_range(p.bounds.p_lo..=p.bounds.p_hi)).collect();
    (ctx, players, profile)
}

/// Minimum of `f` over `points` evenly spaced values of `[lo, hi]`.
pub fn grid_min(points: usize, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    (0..points)
        .map(|i| if points == 1 { lo } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 })
        .map(f)
        .fold(f64::INFINITY, f64::min)
}
