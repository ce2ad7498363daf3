use super::feeder::FeederModel;
use super::jacobian::jacobian_at;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Converged bus voltages of a feeder.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFlowSolution<T> {
    /// Per-bus magnitude in pu, indexed like `FeederModel::buses`.
    pub v_mag: Vec<T>,
    /// Per-bus angle in radians.
    pub v_ang: Vec<T>,
    /// Mismatch evaluations performed, including the converged one.
    pub iterations: usize,
    /// Largest |ΔP|, |ΔQ| over non-slack buses at the returned point, in pu.
    pub max_residual: T,
}

impl<T: Real> LoadFlowSolution<T> {
    /// Lowest magnitude and the bus index where it occurs (first on ties).
    pub fn min_voltage(&self) -> (usize, T) {
        self.v_mag
            .iter()
            .enumerate()
            .fold((0, T::infinity()), |best, (i, &v)| if v < best.1 { (i, v) } else { best })
    }
}

#[derive(Debug, Clone)]
pub struct LoadFlowOptions<T> {
    pub tolerance: T,
    pub max_iterations: usize,
    /// `(v_mag, v_ang)` to start from instead of the flat profile.
    pub warm_start: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Real> Default for LoadFlowOptions<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(T::LOAD_FLOW_TOL),
            max_iterations: 50,
            warm_start: None,
        }
    }
}

/// Active and reactive injections (pu) implied by a voltage state:
/// `P_i = Σ_j V_i V_j (G_ij cos δ_ij + B_ij sin δ_ij)`,
/// `Q_i = Σ_j V_i V_j (G_ij sin δ_ij − B_ij cos δ_ij)`.
pub fn power_injections<T: Real>(model: &FeederModel<T>, v_mag: &[T], v_ang: &[T]) -> (Vec<T>, Vec<T>) {
    let y = model.admittance();
    let n = model.len();
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    for i in 0..n {
        for j in 0..n {
            let yij = y[(i, j)];
            if yij.re == T::zero() && yij.im == T::zero() {
                continue;
            }
            let d = v_ang[i] - v_ang[j];
            let (s, c) = d.sin_cos();
            let vv = v_mag[i] * v_mag[j];
            p[i] += vv * (yij.re * c + yij.im * s);
            q[i] += vv * (yij.re * s - yij.im * c);
        }
    }
    (p, q)
}

/// Net injections in kW/kVAr when household demand and the given EV charging
/// (kW per bus) are modelled as loads.
pub fn load_injections<T: Real>(model: &FeederModel<T>, ev_kw: &[T]) -> (Vec<T>, Vec<T>) {
    assert_eq!(ev_kw.len(), model.len(), "one EV entry per bus");
    model
        .buses()
        .iter()
        .zip(ev_kw)
        .map(|(b, &ev)| (-(b.base_load_p + ev), -b.base_load_q))
        .unzip()
}

pub fn solve_load_flow<T: Real>(model: &FeederModel<T>, injections_p: &[T], injections_q: &[T]) -> Result<LoadFlowSolution<T>> {
    solve_load_flow_with(model, injections_p, injections_q, &LoadFlowOptions::default())
}

/// Newton-Raphson in polar form. Injections are kW / kVAr per bus with loads
/// negative; the slack entries are ignored.
pub fn solve_load_flow_with<T: Real>(
    model: &FeederModel<T>,
    injections_p: &[T],
    injections_q: &[T],
    opts: &LoadFlowOptions<T>,
) -> Result<LoadFlowSolution<T>> {
    let n = model.len();
    if injections_p.len() != n || injections_q.len() != n {
        return Err(Error::Contract(format!(
            "expected {n} injections, got {} active / {} reactive",
            injections_p.len(),
            injections_q.len()
        )));
    }
    let slack = model.slack_index();
    let p_spec: Vec<T> = injections_p.iter().map(|&kw| model.kw_to_pu(kw)).collect();
    let q_spec: Vec<T> = injections_q.iter().map(|&kv| model.kw_to_pu(kv)).collect();
    let (mut v, mut a) = match &opts.warm_start {
        Some((v0, a0)) if v0.len() == n && a0.len() == n => (v0.clone(), a0.clone()),
        Some(_) => return Err(Error::Contract("warm start has the wrong dimension".into())),
        None => (vec![T::one(); n], vec![T::zero(); n]),
    };
    v[slack] = T::one();
    a[slack] = T::zero();

    let others: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let m = others.len();
    let mut residual = T::infinity();
    for iter in 1..=opts.max_iterations {
        let (p, q) = power_injections(model, &v, &a);
        let mut mismatch = Vec::with_capacity(2 * m);
        mismatch.extend(others.iter().map(|&i| p_spec[i] - p[i]));
        mismatch.extend(others.iter().map(|&i| q_spec[i] - q[i]));
        residual = mismatch.iter().fold(T::zero(), |r, d| r.max(d.abs()));
        if !residual.is_finite() {
            return Err(Error::Divergence { iterations: iter, residual: f64::INFINITY });
        }
        if residual <= opts.tolerance {
            return Ok(LoadFlowSolution {
                v_mag: v,
                v_ang: a,
                iterations: iter,
                max_residual: residual,
            });
        }
        if iter == opts.max_iterations {
            break;
        }
        // A singular Jacobian away from the flat start means the iterates ran off.
        let lu = jacobian_at(model, &v, &a).full().lu().map_err(|_| Error::Divergence {
            iterations: iter,
            residual: residual.as_f64(),
        })?;
        let step = lu.solve(&mismatch);
        for (k, &i) in others.iter().enumerate() {
            a[i] += step[k];
            v[i] += step[m + k];
        }
    }
    Err(Error::Divergence {
        iterations: opts.max_iterations,
        residual: residual.as_f64(),
    })
}
