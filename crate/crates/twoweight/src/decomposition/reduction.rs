use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dyadic::{expand, martingale_difference, DyadicInterval, HaarPiece, ShiftedDyadicSystem};
use crate::error::Result;
use crate::hilbert::{HilbertForm, IntervalMode};
use crate::measure::{GridFunction, GridMeasure};

/// `(|B|, bound)` for the four combinations of `Delta` and `E` on a pair `I, J`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicBound {
    pub dd: (f64, f64),
    pub ed: (f64, f64),
    pub de: (f64, f64),
    pub ee: (f64, f64),
}

impl BasicBound {
    pub fn all(&self) -> [(f64, f64); 4] {
        [self.dd, self.ed, self.de, self.ee]
    }
}

fn average_part(f: &GridFunction, mu: &GridMeasure, i: &DyadicInterval) -> GridFunction {
    let sub = mu.restrict(&i.grid());
    let m = sub.total_mass();
    let avg = if m > 0.0 { sub.atoms().map(|(k, mk)| mk * f.value(k)).sum::<f64>() / m } else { 0.0 };
    GridFunction::from_cells(mu.scale(), sub.atoms().map(|(k, _)| (k, avg)))
}

/// `|B(X_I f, Y_J g)|` against `c W ||X_I f|| ||Y_J g||` with `c = 2, sqrt 2, sqrt 2, 1`
/// for `(X, Y) = (Delta, Delta), (E, Delta), (Delta, E), (E, E)`; `weak` is `W`.
pub fn basic_bound(
    form: &HilbertForm,
    i: &DyadicInterval,
    j: &DyadicInterval,
    f: &GridFunction,
    g: &GridFunction,
    weak: f64,
) -> Result<BasicBound> {
    let (sigma, w) = (form.sigma(), form.w());
    let df = martingale_difference(f, sigma, i)?.to_function(sigma);
    let dg = martingale_difference(g, w, j)?.to_function(w);
    let ef = average_part(f, sigma, i);
    let eg = average_part(g, w, j);
    let case = |a: &GridFunction, b: &GridFunction, c: f64| {
        (form.pairing(a, b).abs(), c * weak * a.norm(sigma) * b.norm(w))
    };
    let r2 = std::f64::consts::SQRT_2;
    Ok(BasicBound { dd: case(&df, &dg, 2.0), ed: case(&ef, &dg, r2), de: case(&df, &eg, r2), ee: case(&ef, &eg, 1.0) })
}

/// One shift of the probabilistic reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftReduction {
    pub shift: i64,
    pub lhs: f64,
    pub bound: f64,
    /// `|B(f, g) - sum of the split pieces|`
    pub residual: f64,
    pub bad_f: f64,
    pub bad_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionCheck {
    pub h: f64,
    pub h_star: f64,
    pub k_n: f64,
    pub shifts: Vec<ShiftReduction>,
}

impl ReductionCheck {
    pub fn max_residual(&self) -> f64 {
        self.shifts.iter().map(|s| s.residual).fold(0.0, f64::max)
    }

    /// Largest `lhs / bound` over the shifts (zero when every bound vanishes).
    pub fn worst_ratio(&self) -> f64 {
        self.shifts.iter().filter(|s| s.bound > 0.0).map(|s| s.lhs / s.bound).fold(0.0, f64::max)
    }
}

struct Parts {
    average: GridFunction,
    good: GridFunction,
    bad: GridFunction,
}

fn parts_on(top: &DyadicInterval, avg: f64, pieces: &[&HaarPiece], mu: &GridMeasure, sys: &ShiftedDyadicSystem) -> Parts {
    let sub = mu.restrict(&top.grid());
    let average = GridFunction::from_cells(mu.scale(), sub.atoms().map(|(k, _)| (k, avg)));
    let (mut good, mut bad): (BTreeMap<i64, f64>, BTreeMap<i64, f64>) = Default::default();
    for p in pieces.iter().filter(|p| top.contains(&p.interval)) {
        let target = if sys.is_bad(&p.interval) { &mut bad } else { &mut good };
        for (k, _) in mu.restrict(&p.interval.grid()).atoms() {
            *target.entry(k).or_insert(0.0) += p.value(k);
        }
    }
    Parts {
        average,
        good: GridFunction::from_cells(mu.scale(), good),
        bad: GridFunction::from_cells(mu.scale(), bad),
    }
}

fn restrict(f: &GridFunction, top: &DyadicInterval) -> GridFunction {
    GridFunction::from_cells(f.scale(), f.entries().filter(|(k, _)| top.contains_cell(*k)))
}

/// For every shift of the system on `I_0 = [i0_lo, i0_lo + 2^depth)`: split
/// `f` and `g` over the top intervals into averages, bad and good parts, check
/// that the pieces add back to `B(f, g)`, and compare `|B(f, g)|` with the sum
/// of the testing, a priori and good-good bounds of the pieces.
pub fn reduction_check(
    form: &HilbertForm,
    f: &GridFunction,
    g: &GridFunction,
    i0_lo: i64,
    depth: u32,
    gamma: f64,
    r: u32,
) -> Result<ReductionCheck> {
    let (sigma, w) = (form.sigma(), form.w());
    let tc = form.testing_constants(IntervalMode::Exhaustive);
    let (h, h_star) = (tc.h_local.value, tc.h_local_dual.value);
    let k_n = *form.windowed_constants(depth).last().expect("nonempty");
    let total = form.pairing(f, g);
    let mut shifts = Vec::new();
    for shift in 0..(1i64 << depth) {
        let sys = ShiftedDyadicSystem::new(form.scale(), i0_lo, depth, shift, gamma, r)?;
        let ef = expand(f, sigma, &sys)?;
        let eg = expand(g, w, &sys)?;
        let fp: Vec<&HaarPiece> = ef.pieces.iter().collect();
        let gp: Vec<&HaarPiece> = eg.pieces.iter().collect();
        let tops = sys.tops();
        let mut pieces_sum = 0.0;
        let mut bound = 0.0;
        let (mut bad_f, mut bad_g) = (0.0, 0.0);
        for (a, ta) in tops.iter().enumerate() {
            for (b, tb) in tops.iter().enumerate() {
                let fa = restrict(f, ta);
                let gb = restrict(g, tb);
                if a != b {
                    let v = form.pairing(&fa, &gb);
                    pieces_sum += v;
                    bound += v.abs();
                    continue;
                }
                let pf = parts_on(ta, ef.tops[a].1, &fp, sigma, &sys);
                let pg = parts_on(tb, eg.tops[b].1, &gp, w, &sys);
                let terms = [
                    (form.pairing(&pf.average, &gb), h * pf.average.norm(sigma) * gb.norm(w)),
                    (form.pairing(&pf.bad, &gb), k_n * pf.bad.norm(sigma) * gb.norm(w)),
                    (form.pairing(&pf.good, &pg.average), h_star * pf.good.norm(sigma) * pg.average.norm(w)),
                    (form.pairing(&pf.good, &pg.bad), k_n * pf.good.norm(sigma) * pg.bad.norm(w)),
                ];
                let gg = form.pairing(&pf.good, &pg.good);
                pieces_sum += terms.iter().map(|t| t.0).sum::<f64>() + gg;
                bound += terms.iter().map(|t| t.1).sum::<f64>() + gg.abs();
                bad_f += pf.bad.norm(sigma).powi(2);
                bad_g += pg.bad.norm(w).powi(2);
            }
        }
        shifts.push(ShiftReduction {
            shift,
            lhs: total.abs(),
            bound,
            residual: (total - pieces_sum).abs(),
            bad_f: bad_f.sqrt(),
            bad_g: bad_g.sqrt(),
        });
    }
    Ok(ReductionCheck { h, h_star, k_n, shifts })
}
