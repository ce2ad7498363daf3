use super::jacobian::Jacobian;
use super::loadflow::LoadFlowSolution;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Linear map from active-power injection changes at control buses to
/// voltage-magnitude changes at pilot buses, `ΔV_p = S·ΔP_c` (pu/pu, with
/// `ΔQ_c = 0`).
///
/// Entries are derivatives with respect to *injection*; a consumer adding
/// load sees the opposite sign. [`SensitivityMatrix::per_kw_of_load`] gives
/// the consumption-oriented form used by the charging objectives.
#[derive(Debug, Clone)]
pub struct SensitivityMatrix<T> {
    pub pilot_nodes: Vec<usize>,
    pub control_nodes: Vec<usize>,
    pub s_vp_pc: Matrix<T>,
    pub operating_point: LoadFlowSolution<T>,
    // ∂V/∂Q block; reactive control is not offered, kept for diagnostics
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) s_vp_qc: Matrix<T>,
    base_power: T,
}

impl<T: Real> SensitivityMatrix<T> {
    /// Predicted `ΔV_p` (pu) for injection changes `ΔP_c` (pu).
    pub fn predict(&self, delta_p_pu: &[T]) -> Vec<T> {
        self.s_vp_pc.mul_vec(delta_p_pu)
    }

    /// Voltage change (pu) per kW of additional *consumption*; non-positive
    /// on a passive feeder.
    pub fn per_kw_of_load(&self) -> Matrix<T> {
        self.s_vp_pc.scale(-T::lit(1000.0) / self.base_power)
    }

    pub fn base_power(&self) -> T {
        self.base_power
    }
}

pub fn extract_sensitivity<T: Real>(
    jacobian: &Jacobian<T>,
    pilot_nodes: &[usize],
    control_nodes: &[usize],
) -> Result<SensitivityMatrix<T>> {
    let ids = &jacobian.blocks.bus_ids;
    let m = ids.len();
    let position = |id: usize, role: &str| {
        ids.iter()
            .position(|&b| b == id)
            .ok_or_else(|| Error::Config(format!("{role} node {id} is the slack bus or not in the feeder")))
    };
    let pilot_pos = pilot_nodes.iter().map(|&p| position(p, "pilot")).collect::<Result<Vec<_>>>()?;
    let control_pos = control_nodes.iter().map(|&c| position(c, "control")).collect::<Result<Vec<_>>>()?;

    let inv = jacobian.full().lu()?.inverse();
    let s_vp_pc = Matrix::from_fn(pilot_pos.len(), control_pos.len(), |r, c| inv[(m + pilot_pos[r], control_pos[c])]);
    let s_vp_qc = Matrix::from_fn(pilot_pos.len(), control_pos.len(), |r, c| {
        inv[(m + pilot_pos[r], m + control_pos[c])]
    });
    Ok(SensitivityMatrix {
        pilot_nodes: pilot_nodes.to_vec(),
        control_nodes: control_nodes.to_vec(),
        s_vp_pc,
        operating_point: jacobian.operating_point.clone(),
        s_vp_qc,
        base_power: jacobian.base_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{compute_jacobian, load_injections, solve_load_flow, Bus, FeederModel, Line};

    fn chain() -> FeederModel<f64> {
        let buses = (1..=4)
            .map(|id| Bus { id, base_load_p: if id == 1 { 0.0 } else { 5.0 }, base_load_q: if id == 1 { 0.0 } else { 1.0 }, is_slack: id == 1 })
            .collect();
        let lines = (1..4).map(|i| Line { from_bus: i, to_bus: i + 1, resistance: 0.05, reactance: 0.05 }).collect();
        FeederModel::new(buses, lines, 400.0, 100_000.0).unwrap()
    }

    fn sensitivity(m: &FeederModel<f64>) -> SensitivityMatrix<f64> {
        let (p, q) = load_injections(m, &[0.0; 4]);
        let sol = solve_load_flow(m, &p, &q).unwrap();
        let jac = compute_jacobian(m, &sol).unwrap();
        extract_sensitivity(&jac, &[2, 3, 4], &[2, 3, 4]).unwrap()
    }

    #[test]
    fn dimensions_and_signs() {
        let s = sensitivity(&chain());
        assert_eq!((s.s_vp_pc.rows(), s.s_vp_pc.cols()), (3, 3));
        let load = s.per_kw_of_load();
        for r in 0..3 {
            for c in 0..3 {
                assert!(s.s_vp_pc[(r, c)] > 0.0);
                assert!(load[(r, c)] < 0.0);
                // reactive coupling points the same way on an R/X = 1 feeder
                assert!(s.s_vp_qc[(r, c)] > 0.0);
            }
        }
        // deepest bus is most sensitive to its own injection
        assert!(s.s_vp_pc[(2, 2)] > s.s_vp_pc[(1, 2)]);
        assert!(s.s_vp_pc[(2, 2)] > s.s_vp_pc[(2, 1)]);
    }

    #[test]
    fn zero_change_predicts_zero() {
        let s = sensitivity(&chain());
        assert!(s.predict(&[0.0; 3]).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn slack_cannot_be_a_pilot() {
        let m = chain();
        let (p, q) = load_injections(&m, &[0.0; 4]);
        let jac = compute_jacobian(&m, &solve_load_flow(&m, &p, &q).unwrap()).unwrap();
        assert!(matches!(extract_sensitivity(&jac, &[1], &[2]), Err(Error::Config(_))));
    }
}
