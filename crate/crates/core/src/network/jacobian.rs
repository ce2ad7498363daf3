use super::feeder::FeederModel;
use super::loadflow::{power_injections, LoadFlowSolution};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Load-flow Jacobian with the slack bus removed.
///
/// Rows and columns of every block follow `bus_ids`; the assembled matrix is
/// `[[∂P/∂δ, ∂P/∂V], [∂Q/∂δ, ∂Q/∂V]]`.
#[derive(Debug, Clone)]
pub struct JacobianBlocks<T> {
    pub bus_ids: Vec<usize>,
    pub dp_dd: Matrix<T>,
    pub dp_dv: Matrix<T>,
    pub dq_dd: Matrix<T>,
    pub dq_dv: Matrix<T>,
}

impl<T: Real> JacobianBlocks<T> {
    pub fn reduced_dim(&self) -> usize {
        self.bus_ids.len()
    }

    pub fn full(&self) -> Matrix<T> {
        let m = self.reduced_dim();
        Matrix::from_fn(2 * m, 2 * m, |i, j| match (i < m, j < m) {
            (true, true) => self.dp_dd[(i, j)],
            (true, false) => self.dp_dv[(i, j - m)],
            (false, true) => self.dq_dd[(i - m, j)],
            (false, false) => self.dq_dv[(i - m, j - m)],
        })
    }
}

/// Jacobian evaluated at a converged operating point.
#[derive(Debug, Clone)]
pub struct Jacobian<T> {
    pub blocks: JacobianBlocks<T>,
    pub operating_point: LoadFlowSolution<T>,
    pub(crate) base_power: T,
}

impl<T: Real> Jacobian<T> {
    pub fn full(&self) -> Matrix<T> {
        self.blocks.full()
    }
}

pub fn compute_jacobian<T: Real>(model: &FeederModel<T>, solution: &LoadFlowSolution<T>) -> Result<Jacobian<T>> {
    let n = model.len();
    if solution.v_mag.len() != n || solution.v_ang.len() != n {
        return Err(Error::Contract(format!("solution has {} buses, feeder has {n}", solution.v_mag.len())));
    }
    if solution.v_mag.iter().chain(&solution.v_ang).any(|x| !x.is_finite()) {
        return Err(Error::Numerical("operating point is not finite".into()));
    }
    Ok(Jacobian {
        blocks: jacobian_at(model, &solution.v_mag, &solution.v_ang),
        operating_point: solution.clone(),
        base_power: model.base_power(),
    })
}

/// Analytic polar-form derivatives at an arbitrary state.
pub fn jacobian_at<T: Real>(model: &FeederModel<T>, v: &[T], a: &[T]) -> JacobianBlocks<T> {
    let y = model.admittance();
    let slack = model.slack_index();
    let idx: Vec<usize> = (0..model.len()).filter(|&i| i != slack).collect();
    let m = idx.len();
    let (p, q) = power_injections(model, v, a);

    let mut dp_dd = Matrix::zeros(m, m);
    let mut dp_dv = Matrix::zeros(m, m);
    let mut dq_dd = Matrix::zeros(m, m);
    let mut dq_dv = Matrix::zeros(m, m);
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            let (g, b) = (y[(i, j)].re, y[(i, j)].im);
            if i == j {
                let vi2 = v[i] * v[i];
                dp_dd[(r, c)] = -q[i] - b * vi2;
                dp_dv[(r, c)] = p[i] / v[i] + g * v[i];
                dq_dd[(r, c)] = p[i] - g * vi2;
                dq_dv[(r, c)] = q[i] / v[i] - b * v[i];
            } else if g != T::zero() || b != T::zero() {
                let (s, co) = (a[i] - a[j]).sin_cos();
                let gs_bc = g * s - b * co;
                let gc_bs = g * co + b * s;
                dp_dd[(r, c)] = v[i] * v[j] * gs_bc;
                dp_dv[(r, c)] = v[i] * gc_bs;
                dq_dd[(r, c)] = -v[i] * v[j] * gc_bs;
                dq_dv[(r, c)] = v[i] * gs_bc;
            }
        }
    }
    JacobianBlocks {
        bus_ids: idx.iter().map(|&i| model.id_of(i)).collect(),
        dp_dd,
        dp_dv,
        dq_dd,
        dq_dv,
    }
}
