//! Dyadic Poisson operators on the tripled systems, Whitney-plane profiles
//! and the Poisson integral with holes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::a2::poisson_q_raw;
use crate::dyadic::{DyadicInterval, Tile, TripledSystem};
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, NormEstimate};
use crate::measure::{GridFunction, GridMeasure};

fn weighted_points(h: &GridFunction, mu: &GridMeasure) -> Vec<(i64, f64)> {
    mu.atoms()
        .map(|(k, m)| (k, h.value(k) * m))
        .filter(|p| p.1 != 0.0)
        .collect()
}

fn in_region(region: (Option<i64>, Option<i64>), k: i64) -> bool {
    region.0.is_none_or(|lo| k >= lo) && region.1.is_none_or(|hi| k < hi)
}

/// `Q^u` on weighted cells; the tail after the ancestors swallow everything
/// they will ever contain is summed in closed form.
fn qu_points(pts: &[(i64, f64)], tile: &Tile, sys: &TripledSystem, scale: i32) -> f64 {
    let region = sys.ancestor_region(tile);
    let reach: Vec<(i64, f64)> = pts.iter().copied().filter(|p| in_region(region, p.0)).collect();
    if reach.is_empty() {
        return 0.0;
    }
    let lo = reach.iter().map(|p| p.0).min().unwrap_or(0);
    let hi = reach.iter().map(|p| p.0).max().unwrap_or(0);
    let total: f64 = reach.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for j in 0..64 {
        let anc = sys.ancestor(tile, j);
        let len = anc.length(scale);
        if anc.contains_cell(lo) && anc.contains_cell(hi) {
            return acc + total * (4.0 / 3.0) / (len * len);
        }
        let inside: f64 = reach.iter().filter(|p| anc.contains_cell(p.0)).map(|p| p.1).sum();
        acc += inside / (len * len);
    }
    acc
}

/// `Q^u(h, I) = sum_{j >= 0} |I^{(j)}|^{-2} int_{I^{(j)}} h dmu`.
pub fn dyadic_qu(h: &GridFunction, mu: &GridMeasure, tile: &Tile, sys: &TripledSystem) -> Result<f64> {
    if !sys.is_member(tile) {
        return Err(Error::InvalidParameter(format!("{tile:?} is not in D^{}", sys.u)));
    }
    Ok(qu_points(&weighted_points(h, mu), tile, sys, mu.scale()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QComparison {
    pub q: f64,
    pub per_u: [Option<f64>; 3],
    pub sum: f64,
    /// `sum / q`, defined as 1 when both vanish
    pub ratio: f64,
}

/// `Q(h, K)` against `sum_u Q^u(h, I^u(K))` for `K` in the dyadic system with
/// the given origin.
pub fn compare_q(h: &GridFunction, mu: &GridMeasure, k: &DyadicInterval, origin: i64) -> Result<QComparison> {
    if h.entries().any(|(_, v)| v < 0.0) {
        return Err(Error::InvalidParameter("h must be nonnegative".into()));
    }
    let scale = mu.scale();
    let pts = weighted_points(h, mu);
    let q = poisson_q_raw(h, mu, k.center(scale), k.length(scale));
    let mut per_u = [None; 3];
    for sys in TripledSystem::all(origin) {
        if let Some(t) = sys.i_u(k) {
            per_u[sys.u as usize] = Some(qu_points(&pts, &t, &sys, scale));
        }
    }
    let sum: f64 = per_u.iter().flatten().sum();
    let ratio = if q == 0.0 && sum == 0.0 { 1.0 } else { sum / q };
    Ok(QComparison { q, per_u, sum, ratio })
}

/// Extreme values of the comparison ratio over single atoms in `[-reach, reach)`
/// and intervals `K` of level `<= max_level` whose left end lies there. Both
/// sides are linear in `h dmu`, so every nonnegative `h` on such atoms lands
/// between these values.
pub fn single_atom_ratio_range(origin: i64, max_level: u32, reach: i64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    let one = GridFunction::from_cells(0, (-reach..reach).map(|k| (k, 1.0)));
    for level in 0..=max_level {
        for k in scan_intervals(origin, level, reach) {
            for x in -reach..reach {
                let mu = GridMeasure::from_cells(0, [(x, 1.0)]).expect("unit mass");
                let c = compare_q(&one, &mu, &k, origin).expect("nonnegative");
                lo = lo.min(c.ratio);
                hi = hi.max(c.ratio);
            }
        }
    }
    (lo, hi)
}

/// Dyadic intervals of the given level, aligned to `origin`, with left end in `[-reach, reach)`.
pub fn scan_intervals(origin: i64, level: u32, reach: i64) -> Vec<DyadicInterval> {
    let len = 1i64 << level;
    let first = -reach + (origin + reach).rem_euclid(len);
    (0..)
        .map(|t| first + t * len)
        .take_while(|&l| l < reach)
        .map(|left| DyadicInterval { left, level })
        .collect()
}

/// Nonnegative coefficients `mu_I` on members of one tripled system, read as
/// point masses at the Whitney centres `(c_I, 3|I|/4)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonProfile {
    pub scale: i32,
    pub system: TripledSystem,
    pub coeffs: BTreeMap<Tile, f64>,
}

impl PoissonProfile {
    pub fn new(scale: i32, system: TripledSystem) -> Self {
        Self { scale, system, coeffs: BTreeMap::new() }
    }

    pub fn add(&mut self, tile: Tile, value: f64) -> Result<()> {
        if !self.system.is_member(&tile) {
            return Err(Error::InvalidParameter(format!("{tile:?} is not in D^{}", self.system.u)));
        }
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!("coefficient {value}")));
        }
        if value > 0.0 {
            *self.coeffs.entry(tile).or_insert(0.0) += value;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `mu(J^)` = sum of `mu_I` over `I ⊆ J`.
    pub fn box_mass(&self, j: &Tile) -> f64 {
        self.coeffs.iter().filter(|(t, _)| j.contains(t)).map(|(_, v)| v).sum()
    }

    /// `(x, y, mass)` of the realised plane measure.
    pub fn whitney_points(&self) -> Vec<(f64, f64, f64)> {
        self.coeffs
            .iter()
            .map(|(t, &v)| {
                let l = t.length(self.scale);
                (t.center(self.scale), 0.75 * l, v)
            })
            .collect()
    }

    fn level_cap(&self, w: &GridMeasure) -> u32 {
        let origin = self.system.origin;
        let mut span: i64 = 1;
        for t in self.coeffs.keys() {
            span = span.max((t.left - origin).abs()).max((t.right_end() - origin).abs());
        }
        for (k, _) in w.atoms() {
            span = span.max((k - origin).abs() + 1);
        }
        let mut l = 0;
        while (1i64 << l) < span {
            l += 1;
        }
        l + 3
    }

    /// Ancestors of the profile tiles up to the level where nothing changes any more.
    fn candidate_tops(&self, w: &GridMeasure) -> BTreeSet<Tile> {
        let cap = self.level_cap(w);
        let mut out = BTreeSet::new();
        for t in self.coeffs.keys() {
            let mut cur = *t;
            while cur.level <= cap {
                out.insert(cur);
                cur = self.system.parent(&cur);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolesTesting {
    pub u: f64,
    pub t: f64,
    pub t_star: f64,
}

struct WSums {
    cells: Vec<i64>,
    prefix: Vec<f64>,
}

impl WSums {
    fn new(w: &GridMeasure) -> Self {
        let cells: Vec<i64> = w.atoms().map(|a| a.0).collect();
        let mut prefix = vec![0.0];
        for (_, m) in w.atoms() {
            prefix.push(prefix[prefix.len() - 1] + m);
        }
        Self { cells, prefix }
    }

    fn mass(&self, lo: i64, end: i64) -> f64 {
        let a = self.cells.partition_point(|&k| k < lo);
        let b = self.cells.partition_point(|&k| k < end);
        self.prefix[b] - self.prefix[a]
    }

    fn tile(&self, t: &Tile) -> f64 {
        self.mass(t.left, t.right_end())
    }
}

fn box_masses(profile: &PoissonProfile, tops: &BTreeSet<Tile>) -> HashMap<Tile, f64> {
    tops.iter().map(|t| (*t, profile.box_mass(t))).collect()
}

/// `U`, `T`, `T*` of the Poisson integral with holes.
pub fn holes_testing(profile: &PoissonProfile, w: &GridMeasure) -> HolesTesting {
    if profile.is_empty() || w.is_empty() {
        return HolesTesting { u: 0.0, t: 0.0, t_star: 0.0 };
    }
    let sys = &profile.system;
    let scale = profile.scale;
    let ws = WSums::new(w);
    let tops = profile.candidate_tops(w);
    let boxes = box_masses(profile, &tops);
    let min_level = profile.coeffs.keys().map(|t| t.level).min().unwrap_or(0);
    let area = |t: &Tile| t.length(scale).powi(2);
    let (mut u, mut tt, mut ts): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for j in &tops {
        let mu_j = boxes[j];
        let parent = sys.parent(j);
        let hole = ws.tile(&parent) - ws.tile(j);
        u = u.max((hole * mu_j).max(0.0).sqrt() / area(j));

        let wj = ws.tile(j);
        if wj > 0.0 {
            let mut acc = 0.0;
            for (i0, &m) in &profile.coeffs {
                if !(j.contains(i0) && i0 != j) {
                    continue;
                }
                let mut s = 0.0;
                let mut i = *i0;
                while i.level < j.level {
                    let p = sys.parent(&i);
                    s += (ws.tile(&p) - ws.tile(&i)) / area(&i);
                    i = p;
                }
                acc += m * s * s;
            }
            tt = tt.max((acc / wj).sqrt());
        }

        if mu_j > 0.0 {
            let mut acc = 0.0;
            for (k, wm) in w.atoms().filter(|(k, _)| j.contains_cell(*k)) {
                let mut v = 0.0;
                let mut level = j.level;
                while level > min_level {
                    let a = sys.tile_containing(k, level);
                    let half = 3i64 << (level - 1);
                    let sib = if k < a.left + half {
                        Tile { left: a.left + half, level: level - 1 }
                    } else {
                        Tile { left: a.left, level: level - 1 }
                    };
                    if let Some(b) = boxes.get(&sib) {
                        v += b / area(&sib);
                    }
                    level -= 1;
                }
                acc += wm * v * v;
            }
            ts = ts.max((acc / mu_j).sqrt());
        }
    }
    HolesTesting { u, t: tt, t_star: ts }
}

/// Matrix of `h -> (sqrt(mu_I) Q^u(1_{I^c} h dw, I))_I` acting on `L^2(w)`.
pub fn holes_matrix(profile: &PoissonProfile, w: &GridMeasure) -> DMatrix<f64> {
    let rows: Vec<(Tile, f64)> = profile.coeffs.iter().map(|(t, v)| (*t, *v)).collect();
    let cols: Vec<(i64, f64)> = w.atoms().collect();
    let sys = &profile.system;
    let scale = profile.scale;
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
        let (tile, m) = rows[a];
        let (k, wk) = cols[b];
        if tile.contains_cell(k) || !in_region(sys.ancestor_region(&tile), k) {
            return 0.0;
        }
        let mut j = 1;
        let anc = loop {
            let t = sys.ancestor(&tile, j);
            if t.contains_cell(k) {
                break t;
            }
            j += 1;
        };
        let len = anc.length(scale);
        m.sqrt() * (4.0 / 3.0) / (len * len) * wk.sqrt()
    })
}

pub fn holes_inequality_norm(profile: &PoissonProfile, w: &GridMeasure) -> NormEstimate {
    spectral_norm(&holes_matrix(profile, w))
}

/// `int q_J sum_{|I| <= |J|} mu_I q_I dw` with `q_H = sum_{I ⊇ H} 1_{I^(1) \ I} / |I|^2`.
pub fn tstar_integral(profile: &PoissonProfile, w: &GridMeasure, j: &Tile) -> f64 {
    let sys = &profile.system;
    let scale = profile.scale;
    let cap = profile.level_cap(w).max(j.level + 1);
    let q = |h: &Tile, k: i64| -> f64 {
        let region = sys.ancestor_region(h);
        if h.contains_cell(k) || !in_region(region, k) {
            return 0.0;
        }
        // the unique I ⊇ H with k in I^(1) \ I
        let mut i = *h;
        while i.level <= cap + 1 {
            let p = sys.parent(&i);
            if p.contains_cell(k) {
                return 1.0 / i.length(scale).powi(2);
            }
            i = p;
        }
        0.0
    };
    w.atoms()
        .map(|(k, wm)| {
            let inner: f64 = profile
                .coeffs
                .iter()
                .filter(|(t, _)| t.level <= j.level)
                .map(|(t, &m)| m * q(t, k))
                .sum();
            wm * q(j, k) * inner
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn point(k: i64, m: f64) -> GridMeasure {
        GridMeasure::from_cells(0, [(k, m)]).unwrap()
    }

    #[test]
    fn qu_closed_form_tail() {
        let sys = TripledSystem::new(0, 1).unwrap();
        let t = sys.tile_containing(10, 2);
        let mu = point(t.left + 1, 2.0);
        let h = GridFunction::from_cells(0, [(t.left + 1, 1.0)]);
        let v = dyadic_qu(&h, &mu, &t, &sys).unwrap();
        assert_relative_eq!(v, (4.0 / 3.0) * 2.0 / 144.0, epsilon = 1e-15);
        assert_eq!(dyadic_qu(&h, &GridMeasure::zero(0), &t, &sys).unwrap(), 0.0);
    }

    #[test]
    fn qu_one_ancestor_step() {
        let sys = TripledSystem::new(0, 2).unwrap();
        let t = sys.tile_containing(0, 0);
        let p = sys.parent(&t);
        // an atom in the parent but outside the tile
        let k = if t.left == p.left { p.right_end() - 1 } else { p.left };
        let mu = point(k, 1.0);
        let one = GridFunction::from_cells(0, [(k, 1.0)]);
        let v = dyadic_qu(&one, &mu, &t, &sys).unwrap();
        assert_relative_eq!(v, (4.0 / 3.0) / 36.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_comparison_is_one() {
        let one = GridFunction::from_cells(0, [(0, 1.0)]);
        let c = compare_q(&one, &GridMeasure::zero(0), &DyadicInterval { left: 0, level: 1 }, 0).unwrap();
        assert_eq!(c.ratio, 1.0);
    }

    #[test]
    fn holes_zero_profile() {
        let p = PoissonProfile::new(0, TripledSystem::new(0, 0).unwrap());
        let h = holes_testing(&p, &point(3, 1.0));
        assert_eq!((h.u, h.t, h.t_star), (0.0, 0.0, 0.0));
        assert_eq!(holes_inequality_norm(&p, &point(3, 1.0)).value, 0.0);
    }

    #[test]
    fn single_row_norm_is_row_length() {
        let sys = TripledSystem::new(0, 1).unwrap();
        let t = sys.tile_containing(0, 1);
        let mut p = PoissonProfile::new(0, sys);
        p.add(t, 2.0).unwrap();
        let w = GridMeasure::from_cells(0, [(t.right_end(), 1.0), (t.right_end() + 20, 3.0)]).unwrap();
        let m = holes_matrix(&p, &w);
        let row: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_relative_eq!(holes_inequality_norm(&p, &w).value, row, epsilon = 1e-14);
        let ht = holes_testing(&p, &w);
        let q = holes_inequality_norm(&p, &w).value;
        assert!(ht.u.max(ht.t).max(ht.t_star) <= 3.0 * q * (1.0 + 1e-12));
    }
}
