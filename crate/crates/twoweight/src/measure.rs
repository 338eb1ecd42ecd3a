//! Atomic measures on a dyadic grid.
//!
//! At scale exponent `m` the real line is cut into cells
//! `[k 2^-m, (k+1) 2^-m)`; a [`GridMeasure`] stores the mass of each cell
//! and places it at the cell centre `(k + 1/2) 2^-m`. Cells are addressed by
//! their integer index, so positions are exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Side length of a grid cell at scale exponent `m`.
pub fn cell_len(scale: i32) -> f64 {
    (-(scale as f64)).exp2()
}

/// Centre of cell `k` at scale exponent `m`.
pub fn cell_center(k: i64, scale: i32) -> f64 {
    (k as f64 + 0.5) * cell_len(scale)
}

/// Index of the cell containing the real point `x`.
pub fn cell_of(x: f64, scale: i32) -> i64 {
    (x * (scale as f64).exp2()).floor() as i64
}

/// Closed range of cells `lo..=hi`, i.e. the real interval
/// `[lo 2^-m, (hi+1) 2^-m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridInterval {
    pub lo: i64,
    pub hi: i64,
}

impl std::fmt::Display for GridInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cells {}..={}", self.lo, self.hi)
    }
}

impl GridInterval {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::EmptyInterval);
        }
        Ok(Self { lo, hi })
    }

    /// Interval of `len` cells starting at cell `lo`.
    pub fn with_len(lo: i64, len: i64) -> Self {
        debug_assert!(len >= 1);
        Self { lo, hi: lo + len - 1 }
    }

    pub fn cells(&self) -> i64 {
        self.hi - self.lo + 1
    }

    pub fn contains(&self, k: i64) -> bool {
        self.lo <= k && k <= self.hi
    }

    pub fn contains_interval(&self, other: &GridInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &GridInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    pub fn length(&self, scale: i32) -> f64 {
        self.cells() as f64 * cell_len(scale)
    }

    pub fn center(&self, scale: i32) -> f64 {
        (self.lo + self.hi + 1) as f64 * 0.5 * cell_len(scale)
    }

    pub fn left(&self, scale: i32) -> f64 {
        self.lo as f64 * cell_len(scale)
    }

    pub fn right(&self, scale: i32) -> f64 {
        (self.hi + 1) as f64 * cell_len(scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Forward,
    Reversed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    scale: i32,
    cells: BTreeMap<i64, f64>,
}

fn check_mass(index: usize, position: f64, mass: f64) -> Result<()> {
    if !mass.is_finite() || !position.is_finite() {
        return Err(Error::NonFinite(format!("atom ({position}, {mass})")));
    }
    if mass < 0.0 {
        return Err(Error::NegativeMass { index, position, mass });
    }
    Ok(())
}

impl GridMeasure {
    pub fn zero(scale: i32) -> Self {
        Self { scale, cells: BTreeMap::new() }
    }

    /// Snap `(position, mass)` atoms to the grid; atoms sharing a cell are summed
    /// and zero masses are dropped.
    pub fn from_atoms(atoms: &[(f64, f64)], scale: i32) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for (i, &(x, m)) in atoms.iter().enumerate() {
            check_mass(i, x, m)?;
            if m > 0.0 {
                *cells.entry(cell_of(x, scale)).or_insert(0.0) += m;
            }
        }
        Ok(Self { scale, cells })
    }

    pub fn from_cells<I: IntoIterator<Item = (i64, f64)>>(scale: i32, cells: I) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (i, (k, m)) in cells.into_iter().enumerate() {
            check_mass(i, cell_center(k, scale), m)?;
            if m > 0.0 {
                *out.entry(k).or_insert(0.0) += m;
            }
        }
        Ok(Self { scale, cells: out })
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn cell_len(&self) -> f64 {
        cell_len(self.scale)
    }

    pub fn center(&self, k: i64) -> f64 {
        cell_center(k, self.scale)
    }

    pub fn mass(&self, k: i64) -> f64 {
        self.cells.get(&k).copied().unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Number of charged cells.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.cells.values().sum()
    }

    /// Charged cells in increasing order.
    pub fn atoms(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.cells.iter().map(|(&k, &m)| (k, m))
    }

    /// `(centre, mass)` pairs in increasing order.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.atoms().map(|(k, m)| (self.center(k), m)).collect()
    }

    /// Smallest grid interval carrying all the mass.
    pub fn hull(&self) -> Option<GridInterval> {
        let lo = *self.cells.keys().next()?;
        let hi = *self.cells.keys().next_back()?;
        Some(GridInterval { lo, hi })
    }

    pub fn interval_mass(&self, i: &GridInterval) -> f64 {
        self.cells.range(i.lo..=i.hi).map(|(_, m)| m).sum()
    }

    pub fn restrict(&self, i: &GridInterval) -> Self {
        Self {
            scale: self.scale,
            cells: self.cells.range(i.lo..=i.hi).map(|(&k, &m)| (k, m)).collect(),
        }
    }

    pub fn restrict_by<F: Fn(i64) -> bool>(&self, keep: F) -> Self {
        Self {
            scale: self.scale,
            cells: self.cells.iter().filter(|(&k, _)| keep(k)).map(|(&k, &m)| (k, m)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_cells(self.scale, self.atoms().map(|(k, m)| (k, c * m)))
    }

    pub fn plus(&self, other: &GridMeasure) -> Result<Self> {
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch(self.scale, other.scale));
        }
        Self::from_cells(self.scale, self.atoms().chain(other.atoms()))
    }

    /// Push forward under `x -> s (x - a)` with `s = +1` or `-1`.
    ///
    /// `a` must be a grid point. For the reversed orientation cell `k` lands on
    /// cell `j - k - 1` where `a = j 2^-m`, so the map is an involution.
    pub fn reflect_translate(&self, a: f64, orientation: Orientation) -> Result<Self> {
        let j = grid_point_index(a, self.scale)?;
        let cells = self.atoms().map(|(k, m)| match orientation {
            Orientation::Forward => (k - j, m),
            Orientation::Reversed => (j - k - 1, m),
        });
        Self::from_cells(self.scale, cells)
    }
}

/// Integer `j` with `a = j 2^-m`, or an error if `a` is not a grid point.
pub fn grid_point_index(a: f64, scale: i32) -> Result<i64> {
    if !a.is_finite() {
        return Err(Error::NonFinite(format!("grid point {a}")));
    }
    let t = a * (scale as f64).exp2();
    if t.fract() != 0.0 || t.abs() > 9.0e15 {
        return Err(Error::OffGrid { point: a, scale });
    }
    Ok(t as i64)
}

/// Real-valued function on grid cells; unlisted cells carry the value zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    scale: i32,
    values: BTreeMap<i64, f64>,
}

impl GridFunction {
    pub fn zero(scale: i32) -> Self {
        Self { scale, values: BTreeMap::new() }
    }

    pub fn from_cells<I: IntoIterator<Item = (i64, f64)>>(scale: i32, values: I) -> Self {
        let mut out = BTreeMap::new();
        for (k, v) in values {
            if v != 0.0 {
                *out.entry(k).or_insert(0.0) += v;
            }
        }
        Self { scale, values: out }
    }

    /// `x -> x` on the listed cells.
    pub fn identity_on<I: IntoIterator<Item = i64>>(scale: i32, cells: I) -> Self {
        Self::from_cells(scale, cells.into_iter().map(|k| (k, cell_center(k, scale))))
    }

    pub fn indicator(scale: i32, i: &GridInterval) -> Self {
        Self::from_cells(scale, (i.lo..=i.hi).map(|k| (k, 1.0)))
    }

    pub fn scale(&self) -> i32 {
        self.scale
    }

    pub fn value(&self, k: i64) -> f64 {
        self.values.get(&k).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self::from_cells(self.scale, self.entries().map(|(k, v)| (k, f(v))))
    }

    /// `sum_k f(k) g(k) mu(k)`.
    pub fn inner(&self, other: &GridFunction, mu: &GridMeasure) -> f64 {
        mu.atoms().map(|(k, m)| m * self.value(k) * other.value(k)).sum()
    }

    pub fn norm(&self, mu: &GridMeasure) -> f64 {
        mu.atoms().map(|(k, m)| m * self.value(k).powi(2)).sum::<f64>().sqrt()
    }

    pub fn integral(&self, mu: &GridMeasure) -> f64 {
        mu.atoms().map(|(k, m)| m * self.value(k)).sum()
    }
}
