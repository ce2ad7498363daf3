//! Bundled 34-bus low-voltage surrogate of the IEEE 34-node test feeder.
//!
//! Node numbering follows the usual 1–34 relabelling of the IEEE buses
//! (800 → 1, 802 → 2, …, 838 → 34): a long trunk with laterals, slack at
//! node 1 and node 34 at the far end of the 836–862–838 branch, 19 sections
//! from the source. Every section carries the same impedance; its magnitude
//! comes from `scenario::calibrate`.

use super::feeder::{Bus, FeederModel, Line};
use crate::error::Result;
use crate::scalar::Real;

/// Section list as `(upstream, downstream)` node pairs.
pub const IEEE34_SECTIONS: [(usize, usize); 33] = [
    (1, 2),   // 800-802
    (2, 3),   // 802-806
    (3, 4),   // 806-808
    (4, 5),   // 808-810
    (4, 6),   // 808-812
    (6, 7),   // 812-814
    (7, 8),   // 814-850
    (8, 9),   // 850-816
    (9, 10),  // 816-818
    (10, 11), // 818-820
    (11, 12), // 820-822
    (9, 13),  // 816-824
    (13, 14), // 824-826
    (13, 15), // 824-828
    (15, 16), // 828-830
    (16, 17), // 830-854
    (17, 18), // 854-856
    (17, 19), // 854-852
    (19, 20), // 852-832
    (20, 21), // 832-888
    (21, 22), // 888-890
    (20, 23), // 832-858
    (23, 24), // 858-864
    (23, 25), // 858-834
    (25, 26), // 834-842
    (26, 27), // 842-844
    (27, 28), // 844-846
    (28, 29), // 846-848
    (25, 30), // 834-860
    (30, 31), // 860-836
    (31, 32), // 836-840
    (31, 33), // 836-862
    (33, 34), // 862-838
];

pub const BASE_VOLTAGE_V: f64 = 400.0;
pub const BASE_POWER_VA: f64 = 100_000.0;
/// Household demand applied to every non-slack node by default.
pub const HOUSE_LOAD_KW: f64 = 1.0;
pub const HOUSE_LOAD_KVAR: f64 = 0.2;
/// Deepest node; voltage reports default to it.
pub const REFERENCE_NODE: usize = 34;

/// Uniform-impedance template before calibration.
pub fn ieee34_template<T: Real>(r_ohm: T, x_ohm: T) -> Result<FeederModel<T>> {
    let buses = (1..=34)
        .map(|id| Bus {
            id,
            base_load_p: if id == 1 { T::zero() } else { T::lit(HOUSE_LOAD_KW) },
            base_load_q: if id == 1 { T::zero() } else { T::lit(HOUSE_LOAD_KVAR) },
            is_slack: id == 1,
        })
        .collect();
    let lines = IEEE34_SECTIONS
        .iter()
        .map(|&(a, b)| Line {
            from_bus: a,
            to_bus: b,
            resistance: r_ohm,
            reactance: x_ohm,
        })
        .collect();
    FeederModel::new(buses, lines, T::lit(BASE_VOLTAGE_V), T::lit(BASE_POWER_VA))
}

/// Calibrated feeder shipped with the crate.
pub const BUNDLED_FEEDER: &str = include_str!("../../data/ieee34_lv.csv");

pub fn bundled_feeder<T: Real>() -> FeederModel<T> {
    FeederModel::parse(BUNDLED_FEEDER, "bundled:ieee34_lv.csv").expect("bundled feeder is valid")
}

/// Two-way split used by the local objective: nodes 1–14 and 15–34.
pub fn ieee34_neighborhood_ranges() -> Vec<(usize, usize)> {
    vec![(1, 14), (15, 34)]
}
