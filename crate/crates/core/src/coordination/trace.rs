use std::fmt::Write as _;

use crate::scalar::Real;

use super::PROFILE_QUANTUM_KW;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Updater {
    /// Starting profile, before any update.
    Initial,
    Vehicle(usize),
    /// Synchronous round: every vehicle moved at once.
    All,
}

impl std::fmt::Display for Updater {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Updater::Initial => f.write_str("INIT"),
            Updater::Vehicle(id) => write!(f, "{id}"),
            Updater::All => f.write_str("ALL"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<T> {
    pub iter: usize,
    pub updater: Updater,
    pub profile: Vec<T>,
    pub potential: T,
    /// Linearized pilot voltages for this profile.
    pub predicted: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace<T> {
    pub entries: Vec<TraceEntry<T>>,
}

impl<T: Real> IterationTrace<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn potentials(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.potential).collect()
    }

    /// CSV rows `slot,iter,updater,potential,min_v_pred,p...` for this trace.
    pub fn write_rows(&self, slot: usize, out: &mut String) {
        for e in &self.entries {
            let min_v = e.predicted.iter().fold(T::infinity(), |m, &v| m.min(v));
            let _ = write!(out, "{slot},{},{},{},{}", e.iter, e.updater, e.potential, min_v);
            for p in &e.profile {
                let _ = write!(out, ",{p}");
            }
            out.push('\n');
        }
    }
}

/// Integer key of a profile at [`PROFILE_QUANTUM_KW`] resolution.
pub fn quantize_profile<T: Real>(profile: &[T]) -> Vec<i64> {
    profile.iter().map(|p| (p.as_f64() / PROFILE_QUANTUM_KW).round() as i64).collect()
}

/// Earliest entry whose profile equals the latest one, if any.
pub fn detect_cycle<T: Real>(trace: &IterationTrace<T>) -> Option<usize> {
    let (last, rest) = trace.entries.split_last()?;
    let key = quantize_profile(&last.profile);
    rest.iter().position(|e| quantize_profile(&e.profile) == key)
}
