//! Shifted dyadic systems, good and bad intervals, martingale differences
//! and the tripled systems `D^u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{cell_center, GridFunction, GridInterval, GridMeasure};

pub const DEFAULT_GAMMA: f64 = 0.25;
pub const DEFAULT_R: u32 = 8;

/// A dyadic interval of `2^level` cells starting at cell `left`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub left: i64,
    pub level: u32,
}

impl std::fmt::Display for DyadicInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "cells {}..{} (level {})", self.left, self.right_end(), self.level)
    }
}

impl DyadicInterval {
    pub fn cells(&self) -> i64 {
        1i64 << self.level
    }

    pub fn right_end(&self) -> i64 {
        self.left + self.cells()
    }

    pub fn grid(&self) -> GridInterval {
        GridInterval { lo: self.left, hi: self.right_end() - 1 }
    }

    pub fn contains_cell(&self, k: i64) -> bool {
        self.left <= k && k < self.right_end()
    }

    pub fn contains(&self, other: &DyadicInterval) -> bool {
        self.left <= other.left && other.right_end() <= self.right_end()
    }

    pub fn children(&self) -> Option<[DyadicInterval; 2]> {
        if self.level == 0 {
            return None;
        }
        let l = self.level - 1;
        Some([
            DyadicInterval { left: self.left, level: l },
            DyadicInterval { left: self.left + (1i64 << l), level: l },
        ])
    }

    /// The child containing `other`, which must be strictly smaller and inside.
    pub fn child_containing(&self, other: &DyadicInterval) -> DyadicInterval {
        debug_assert!(self.contains(other) && other.level < self.level);
        let [a, b] = self.children().expect("level > 0");
        if a.contains(other) {
            a
        } else {
            b
        }
    }

    pub fn length(&self, scale: i32) -> f64 {
        self.grid().length(scale)
    }

    pub fn center(&self, scale: i32) -> f64 {
        self.grid().center(scale)
    }
}

/// `D^0 + omega` restricted to intervals of length at most `|I_0|`, where
/// `I_0 = [i0_lo, i0_lo + 2^depth)` in cells and the shift `omega` is a whole
/// number of cells in `[0, 2^depth)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedDyadicSystem {
    pub scale: i32,
    pub i0_lo: i64,
    pub depth: u32,
    pub shift: i64,
    pub gamma: f64,
    pub r: u32,
}

impl ShiftedDyadicSystem {
    pub fn new(scale: i32, i0_lo: i64, depth: u32, shift: i64, gamma: f64, r: u32) -> Result<Self> {
        if depth > 40 {
            return Err(Error::InvalidParameter(format!("depth {depth} too large")));
        }
        if shift < 0 || shift >= (1i64 << depth).max(1) {
            return Err(Error::InvalidParameter(format!("shift {shift} outside [0, 2^{depth})")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0, 1)")));
        }
        Ok(Self { scale, i0_lo, depth, shift, gamma, r })
    }

    /// Unshifted system whose top interval is the smallest dyadic-length window
    /// starting at the left end of `hull`.
    pub fn covering(scale: i32, hull: GridInterval, gamma: f64, r: u32) -> Result<Self> {
        let mut depth = 0;
        while (1i64 << depth) < hull.cells() {
            depth += 1;
        }
        Self::new(scale, hull.lo, depth, 0, gamma, r)
    }

    pub fn origin(&self) -> i64 {
        self.i0_lo + self.shift
    }

    pub fn i0(&self) -> GridInterval {
        GridInterval::with_len(self.i0_lo, 1i64 << self.depth)
    }

    /// The interval of the given level containing cell `k`.
    pub fn interval_containing(&self, k: i64, level: u32) -> DyadicInterval {
        let len = 1i64 << level;
        let left = k - (k - self.origin()).rem_euclid(len);
        DyadicInterval { left, level }
    }

    pub fn parent(&self, i: &DyadicInterval) -> DyadicInterval {
        self.interval_containing(i.left, i.level + 1)
    }

    /// `I^{(k)}`.
    pub fn ancestor(&self, i: &DyadicInterval, k: u32) -> DyadicInterval {
        self.interval_containing(i.left, i.level + k)
    }

    /// Intervals of the given level meeting `I_0`, left to right.
    pub fn intervals_at(&self, level: u32) -> Vec<DyadicInterval> {
        let i0 = self.i0();
        let mut out = Vec::new();
        let mut cur = self.interval_containing(i0.lo, level);
        while cur.left <= i0.hi {
            out.push(cur);
            cur = DyadicInterval { left: cur.right_end(), level };
        }
        out
    }

    /// All intervals of length `1..=|I_0|` meeting `I_0`, from the top level down.
    pub fn enumerate(&self) -> Vec<DyadicInterval> {
        (0..=self.depth).rev().flat_map(|l| self.intervals_at(l)).collect()
    }

    pub fn tops(&self) -> Vec<DyadicInterval> {
        self.intervals_at(self.depth)
    }

    /// Whole cell range covered by the top-level intervals.
    pub fn window(&self) -> GridInterval {
        let t = self.tops();
        GridInterval { lo: t[0].left, hi: t[t.len() - 1].right_end() - 1 }
    }

    /// `I` is bad if some ancestor `J = I^{(k)}`, `k >= r`, `|J| <= |I_0|`, has
    /// `dist(I, J^c) <= |I|^gamma |J|^{1-gamma}`.
    pub fn is_bad(&self, i: &DyadicInterval) -> bool {
        self.bad_with(i, self.gamma, self.r)
    }

    pub fn bad_with(&self, i: &DyadicInterval, gamma: f64, r: u32) -> bool {
        if i.level > self.depth {
            return false;
        }
        let top = self.depth - i.level;
        (r..=top).any(|k| {
            let j = self.ancestor(i, k);
            let dist = (i.left - j.left).min(j.right_end() - i.right_end()) as f64;
            dist <= (i.level as f64 + k as f64 * (1.0 - gamma)).exp2()
        })
    }

    pub fn is_good(&self, i: &DyadicInterval) -> bool {
        !self.is_bad(i)
    }
}

/// Prefix sums of `mu` and `f dmu` over a contiguous window of cells.
#[derive(Debug, Clone)]
pub struct CellSums {
    lo: i64,
    mass: Vec<f64>,
    moment: Vec<f64>,
}

impl CellSums {
    pub fn new(window: GridInterval, f: &GridFunction, mu: &GridMeasure) -> Self {
        let n = window.cells() as usize;
        let mut mass = vec![0.0; n + 1];
        let mut moment = vec![0.0; n + 1];
        for idx in 0..n {
            let k = window.lo + idx as i64;
            let m = mu.mass(k);
            mass[idx + 1] = mass[idx] + m;
            moment[idx + 1] = moment[idx] + m * f.value(k);
        }
        Self { lo: window.lo, mass, moment }
    }

    fn range(&self, a: i64, b: i64) -> (usize, usize) {
        let n = self.mass.len() as i64 - 1;
        let ia = (a - self.lo).clamp(0, n) as usize;
        let ib = (b - self.lo).clamp(0, n) as usize;
        (ia, ib)
    }

    /// `mu([a, b))` for cells `a..b`.
    pub fn mass(&self, a: i64, b: i64) -> f64 {
        let (ia, ib) = self.range(a, b);
        self.mass[ib] - self.mass[ia]
    }

    pub fn moment(&self, a: i64, b: i64) -> f64 {
        let (ia, ib) = self.range(a, b);
        self.moment[ib] - self.moment[ia]
    }

    pub fn average(&self, i: &DyadicInterval) -> f64 {
        let m = self.mass(i.left, i.right_end());
        if m > 0.0 {
            self.moment(i.left, i.right_end()) / m
        } else {
            0.0
        }
    }
}

/// `Delta_I f`: constant `left` on the left child, `right` on the right child,
/// zero on cells of zero mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaarPiece {
    pub interval: DyadicInterval,
    pub left: f64,
    pub right: f64,
    pub left_mass: f64,
    pub right_mass: f64,
}

impl HaarPiece {
    pub fn norm_sq(&self) -> f64 {
        self.left * self.left * self.left_mass + self.right * self.right * self.right_mass
    }

    pub fn value(&self, k: i64) -> f64 {
        let [a, b] = self.interval.children().expect("level > 0");
        if a.contains_cell(k) {
            self.left
        } else if b.contains_cell(k) {
            self.right
        } else {
            0.0
        }
    }

    pub fn scaled(&self, c: f64) -> HaarPiece {
        HaarPiece { left: c * self.left, right: c * self.right, ..*self }
    }

    pub fn to_function(&self, mu: &GridMeasure) -> GridFunction {
        let g = self.interval.grid();
        GridFunction::from_cells(
            mu.scale(),
            mu.restrict(&g).atoms().map(|(k, _)| (k, self.value(k))),
        )
    }
}

pub fn martingale_difference(
    f: &GridFunction,
    mu: &GridMeasure,
    i: &DyadicInterval,
) -> Result<HaarPiece> {
    let [a, b] = i
        .children()
        .ok_or_else(|| Error::InvalidParameter("a minimal cell has no martingale difference".into()))?;
    let sums = CellSums::new(i.grid(), f, mu);
    Ok(piece_from_sums(&sums, i, &a, &b))
}

fn piece_from_sums(
    sums: &CellSums,
    i: &DyadicInterval,
    a: &DyadicInterval,
    b: &DyadicInterval,
) -> HaarPiece {
    let ma = sums.mass(a.left, a.right_end());
    let mb = sums.mass(b.left, b.right_end());
    let avg = sums.average(i);
    let left = if ma > 0.0 { sums.average(a) - avg } else { 0.0 };
    let right = if mb > 0.0 { sums.average(b) - avg } else { 0.0 };
    HaarPiece { interval: *i, left, right, left_mass: ma, right_mass: mb }
}

/// `f = sum_tops E_T f + sum_I Delta_I f` in `L^2(mu)` for `f` supported in `I_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub scale: i32,
    /// Top-level intervals with the average of `f` on each.
    pub tops: Vec<(DyadicInterval, f64, f64)>,
    /// Martingale differences on intervals where both children carry mass.
    pub pieces: Vec<HaarPiece>,
}

impl Expansion {
    pub fn reconstruct(&self, mu: &GridMeasure) -> GridFunction {
        let mut vals = Vec::new();
        for (t, avg, _) in &self.tops {
            for (k, _) in mu.restrict(&t.grid()).atoms() {
                vals.push((k, *avg));
            }
        }
        for p in &self.pieces {
            for (k, _) in mu.restrict(&p.interval.grid()).atoms() {
                vals.push((k, p.value(k)));
            }
        }
        GridFunction::from_cells(mu.scale(), vals)
    }

    /// `sum_T <f>_T^2 mu(T) + sum_I ||Delta_I f||^2`.
    pub fn energy(&self) -> f64 {
        self.tops.iter().map(|(_, a, m)| a * a * m).sum::<f64>()
            + self.pieces.iter().map(|p| p.norm_sq()).sum::<f64>()
    }
}

pub fn expand(f: &GridFunction, mu: &GridMeasure, sys: &ShiftedDyadicSystem) -> Result<Expansion> {
    let i0 = sys.i0();
    if let Some(h) = mu.restrict_by(|k| f.value(k) != 0.0).hull() {
        if !i0.contains_interval(&h) {
            return Err(Error::SupportViolation("f dmu is not supported in I_0".into()));
        }
    }
    let window = sys.window();
    let f0 = GridFunction::from_cells(f.scale(), f.entries().filter(|(k, _)| i0.contains(*k)));
    let mu0 = mu.restrict(&i0);
    let sums = CellSums::new(window, &f0, &mu0);
    let tops = sys
        .tops()
        .into_iter()
        .map(|t| (t, sums.average(&t), sums.mass(t.left, t.right_end())))
        .collect();
    let mut pieces = Vec::new();
    for level in 1..=sys.depth {
        for i in sys.intervals_at(level) {
            let [a, b] = i.children().expect("level > 0");
            let p = piece_from_sums(&sums, &i, &a, &b);
            if p.left_mass > 0.0 && p.right_mass > 0.0 {
                pieces.push(p);
            }
        }
    }
    Ok(Expansion { scale: mu.scale(), tops, pieces })
}

/// Pieces of `f` (no top averages) restricted to good intervals, and the rest.
/// The top averages are kept with the good part, so `f_bad` is zero when every
/// interval is good.
pub fn good_bad_split(
    f: &GridFunction,
    mu: &GridMeasure,
    sys: &ShiftedDyadicSystem,
) -> Result<(GridFunction, GridFunction)> {
    let e = expand(f, mu, sys)?;
    let mut good = Vec::new();
    let mut bad = Vec::new();
    for (t, avg, _) in &e.tops {
        for (k, _) in mu.restrict(&t.grid()).atoms() {
            good.push((k, *avg));
        }
    }
    for p in &e.pieces {
        let target = if sys.is_bad(&p.interval) { &mut bad } else { &mut good };
        for (k, _) in mu.restrict(&p.interval.grid()).atoms() {
            target.push((k, p.value(k)));
        }
    }
    Ok((GridFunction::from_cells(mu.scale(), good), GridFunction::from_cells(mu.scale(), bad)))
}

/// Mean of `||f_bad|| / ||f||` over all shifts `0..2^depth`.
pub fn mean_bad_ratio(
    f: &GridFunction,
    mu: &GridMeasure,
    scale: i32,
    i0_lo: i64,
    depth: u32,
    gamma: f64,
    r: u32,
) -> Result<f64> {
    let norm = f.norm(mu);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let shifts = 1i64 << depth;
    let mut acc = 0.0;
    for s in 0..shifts {
        let sys = ShiftedDyadicSystem::new(scale, i0_lo, depth, s, gamma, r)?;
        acc += good_bad_split(f, mu, &sys)?.1.norm(mu) / norm;
    }
    Ok(acc / shifts as f64)
}

/// Unit vector spanning the range of `Delta_I^mu`, positive on the right child.
pub fn haar_vector(mu: &GridMeasure, i: &DyadicInterval) -> Option<HaarPiece> {
    let [a, b] = i.children()?;
    let ma = mu.interval_mass(&a.grid());
    let mb = mu.interval_mass(&b.grid());
    if ma <= 0.0 || mb <= 0.0 {
        return None;
    }
    let m = ma + mb;
    Some(HaarPiece {
        interval: *i,
        left: -(mb / (m * ma)).sqrt(),
        right: (ma / (m * mb)).sqrt(),
        left_mass: ma,
        right_mass: mb,
    })
}

/// `<x, h_I>_mu`.
pub fn identity_haar_coefficient(mu: &GridMeasure, i: &DyadicInterval) -> f64 {
    match haar_vector(mu, i) {
        None => 0.0,
        Some(h) => mu
            .restrict(&i.grid())
            .atoms()
            .map(|(k, m)| m * cell_center(k, mu.scale()) * h.value(k))
            .sum(),
    }
}

/// Interval of `3 * 2^level` cells, a member of one of the tripled systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Tile {
    pub left: i64,
    pub level: u32,
}

impl Tile {
    pub fn cells(&self) -> i64 {
        3i64 << self.level
    }

    pub fn right_end(&self) -> i64 {
        self.left + self.cells()
    }

    pub fn grid(&self) -> GridInterval {
        GridInterval { lo: self.left, hi: self.right_end() - 1 }
    }

    pub fn contains_cell(&self, k: i64) -> bool {
        self.left <= k && k < self.right_end()
    }

    pub fn contains(&self, other: &Tile) -> bool {
        self.left <= other.left && other.right_end() <= self.right_end()
    }

    pub fn length(&self, scale: i32) -> f64 {
        self.grid().length(scale)
    }

    pub fn center(&self, scale: i32) -> f64 {
        self.grid().center(scale)
    }
}

/// `D^u`, `u in {0, 1, 2}`: the tripled intervals `3I`, `I` in the dyadic
/// system with the given origin, whose level-`k` members start at
/// `origin + 2^k a_k (mod 3 2^k)` with `a_k = u 2^k mod 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripledSystem {
    pub origin: i64,
    pub u: u8,
}

impl TripledSystem {
    pub fn new(origin: i64, u: u8) -> Result<Self> {
        if u > 2 {
            return Err(Error::InvalidParameter(format!("u = {u} not in {{0, 1, 2}}")));
        }
        Ok(Self { origin, u })
    }

    pub fn all(origin: i64) -> [TripledSystem; 3] {
        [0, 1, 2].map(|u| TripledSystem { origin, u })
    }

    fn base(&self, level: u32) -> i64 {
        let a = (self.u as i64 * (1i64 << level)).rem_euclid(3);
        self.origin + (a << level)
    }

    pub fn tile_containing(&self, k: i64, level: u32) -> Tile {
        let len = 3i64 << level;
        Tile { left: k - (k - self.base(level)).rem_euclid(len), level }
    }

    pub fn parent(&self, t: &Tile) -> Tile {
        self.tile_containing(t.left, t.level + 1)
    }

    pub fn ancestor(&self, t: &Tile, j: u32) -> Tile {
        self.tile_containing(t.left, t.level + j)
    }

    /// Whether `t` belongs to this system.
    pub fn is_member(&self, t: &Tile) -> bool {
        self.tile_containing(t.left, t.level) == *t
    }

    /// `I^u(K)`: the member of length `12 |K|` containing `3K`, if any.
    pub fn i_u(&self, k: &DyadicInterval) -> Option<Tile> {
        let len = k.cells();
        let lo = k.left - len;
        let hi = k.right_end() + len;
        let t = self.tile_containing(lo, k.level + 2);
        (t.right_end() >= hi).then_some(t)
    }

    /// Members of the given level meeting `window`, left to right.
    pub fn tiles_at(&self, level: u32, window: GridInterval) -> Vec<Tile> {
        let mut out = Vec::new();
        let mut cur = self.tile_containing(window.lo, level);
        while cur.left <= window.hi {
            out.push(cur);
            cur = Tile { left: cur.right_end(), level };
        }
        out
    }

    /// The region eventually covered by the ancestors of `t`: all of `R`
    /// except for `u = 0`, whose members never straddle `origin`.
    pub fn ancestor_region(&self, t: &Tile) -> (Option<i64>, Option<i64>) {
        if self.u != 0 {
            return (None, None);
        }
        if t.left >= self.origin {
            (Some(self.origin), None)
        } else {
            (None, Some(self.origin))
        }
    }
}

/// Exhaustive check of the tripling lemma for every dyadic `K` of level at most
/// `max_level` inside the window: at least two `u` give `I^u(K)`, and for each
/// `1 <= j <= max_j` some `u` has `(I^u(K))^{(j)} ⊇ 3 2^j K`.
/// Returns the number of violations.
pub fn tripled_lemma_violations(origin: i64, window: GridInterval, max_level: u32, max_j: u32) -> usize {
    let systems = TripledSystem::all(origin);
    let mut bad = 0;
    for level in 0..=max_level {
        let len = 1i64 << level;
        let mut left = window.lo + (origin - window.lo).rem_euclid(len);
        while left + len - 1 <= window.hi {
            let k = DyadicInterval { left, level };
            let hits: Vec<Tile> = systems.iter().filter_map(|s| s.i_u(&k)).collect();
            if hits.len() < 2 {
                bad += 1;
            }
            // centred dilate 3 2^j K in half-cell units
            let c2 = 2 * k.left + len;
            for j in 1..=max_j {
                let half = 3 * (len << j);
                let (lo2, hi2) = (c2 - half, c2 + half);
                let ok = systems.iter().any(|s| {
                    s.i_u(&k).is_some_and(|t| {
                        let a = s.ancestor(&t, j);
                        2 * a.left <= lo2 && hi2 <= 2 * a.right_end()
                    })
                });
                if !ok {
                    bad += 1;
                }
            }
            left += len;
        }
    }
    bad
}
