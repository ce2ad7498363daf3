//! Scalar abstraction shared by the numerical modules.

use std::fmt::{Debug, Display};
use std::num::ParseFloatError;
use std::str::FromStr;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point type the network, metric and coordination code is generic over.
///
/// Implemented for `f32` and `f64`. Precision-dependent defaults (solver
/// tolerances, tie margins) live here so generic code never hard-codes an
/// `f64` epsilon.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + FromStr<Err = ParseFloatError>
    + Send
    + Sync
    + 'static
{
    /// Default Newton-Raphson mismatch tolerance (pu).
    const LOAD_FLOW_TOL: f64;
    /// Objective gap below which two candidate powers count as tied.
    const TIE_EPS: f64;

    /// Converts an `f64` literal. Never fails for finite inputs.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("real to f64")
    }
}

impl Real for f64 {
    const LOAD_FLOW_TOL: f64 = 1e-8;
    const TIE_EPS: f64 = 1e-14;
}

impl Real for f32 {
    const LOAD_FLOW_TOL: f64 = 1e-4;
    const TIE_EPS: f64 = 1e-7;
}
