use std::collections::{HashMap, HashSet};
use std::ops::Index;

use num_complex::Complex;

use super::feeder::{Bus, Line};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense complex bus admittance matrix in per-unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Admittance<T> {
    n: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Admittance<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn scale(&self, k: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|y| y * k).collect(),
        }
    }

    pub fn nonzeros(&self) -> usize {
        self.data.iter().filter(|y| y.re != T::zero() || y.im != T::zero()).count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    pub fn row_sum(&self, i: usize) -> Complex<T> {
        self.data[i * self.n..(i + 1) * self.n]
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, y| acc + y)
    }
}

impl<T> Index<(usize, usize)> for Admittance<T> {
    type Output = Complex<T>;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.n + j]
    }
}

/// Builds `Y` from series branches: `Y[i][j] = -y_ij`, `Y[i][i] = Σ_k y_ik`.
///
/// Rejects anything that is not a connected tree over `buses`: unknown ends,
/// self-loops, parallel lines, wrong line count or islands. Impedances are
/// converted to per-unit with `Z_base = V_base² / S_base`.
pub fn assemble_admittance<T: Real>(
    buses: &[Bus<T>],
    lines: &[Line<T>],
    index_of: &HashMap<usize, usize>,
    base_voltage: T,
    base_power: T,
) -> Result<Admittance<T>> {
    let n = buses.len();
    let z_base = base_voltage * base_voltage / base_power;
    let mut data = vec![Complex::new(T::zero(), T::zero()); n * n];
    let mut pairs = HashSet::with_capacity(lines.len());
    let mut uf = UnionFind::new(n);

    for l in lines {
        let lookup = |id: usize| {
            index_of
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Model(format!("line {}-{} references unknown bus {id}", l.from_bus, l.to_bus)))
        };
        let (a, b) = (lookup(l.from_bus)?, lookup(l.to_bus)?);
        if a == b {
            return Err(Error::Model(format!("line {0}-{0} is a self-loop", l.from_bus)));
        }
        if !(l.resistance > T::zero()) || !(l.reactance > T::zero()) {
            return Err(Error::Model(format!(
                "line {}-{} needs positive resistance and reactance",
                l.from_bus, l.to_bus
            )));
        }
        if !pairs.insert((a.min(b), a.max(b))) {
            return Err(Error::Model(format!("duplicate line between buses {} and {}", l.from_bus, l.to_bus)));
        }
        if !uf.union(a, b) {
            return Err(Error::Model(format!("line {}-{} closes a loop", l.from_bus, l.to_bus)));
        }
        let y = Complex::new(l.resistance / z_base, l.reactance / z_base).inv();
        data[a * n + a] = data[a * n + a] + y;
        data[b * n + b] = data[b * n + b] + y;
        data[a * n + b] = data[a * n + b] - y;
        data[b * n + a] = data[b * n + a] - y;
    }
    if lines.len() + 1 != n {
        return Err(Error::Model(format!(
            "feeder is disconnected: {} buses need {} lines, found {}",
            n,
            n - 1,
            lines.len()
        )));
    }
    Ok(Admittance { n, data })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// False when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}
