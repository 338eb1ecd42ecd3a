//! The bilinear form of the Hilbert transform between two grid measures,
//! its norm, truncations, and the interval testing constants.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dyadic::ShiftedDyadicSystem;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, NormEstimate};
use crate::measure::{GridFunction, GridInterval, GridMeasure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum IntervalMode {
    #[default]
    Exhaustive,
    Dyadic,
}

impl std::str::FromStr for IntervalMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "dyadic" => Ok(Self::Dyadic),
            _ => Err(Error::InvalidParameter(format!("interval mode `{s}`"))),
        }
    }
}

/// A supremum together with the interval attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub value: f64,
    pub interval: Option<GridInterval>,
}

impl Witness {
    pub fn zero() -> Self {
        Self { value: 0.0, interval: None }
    }

    fn offer(&mut self, value: f64, i: GridInterval) {
        if value > self.value {
            self.value = value;
            self.interval = Some(i);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestingConstants {
    pub h_glob: Witness,
    pub h_glob_dual: Witness,
    pub h_local: Witness,
    pub h_local_dual: Witness,
    pub h_off: Witness,
    pub h_off_dual: Witness,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWitness {
    pub value: f64,
    pub pair: Option<(GridInterval, GridInterval)>,
}

/// `B(f, g) = sum_{p != q} w_p g(x_p) sigma_q f(x_q) / (x_p - x_q)`.
#[derive(Debug, Clone)]
pub struct HilbertForm {
    sigma: GridMeasure,
    w: GridMeasure,
    cells: Vec<i64>,
    x: Vec<f64>,
    s: Vec<f64>,
    wm: Vec<f64>,
}

impl HilbertForm {
    pub fn new(sigma: GridMeasure, w: GridMeasure) -> Result<Self> {
        if sigma.scale() != w.scale() {
            return Err(Error::ScaleMismatch(sigma.scale(), w.scale()));
        }
        if sigma.is_empty() || w.is_empty() {
            return Err(Error::Degenerate("both measures need nonempty support".into()));
        }
        let mut cells: Vec<i64> = sigma.atoms().map(|a| a.0).chain(w.atoms().map(|a| a.0)).collect();
        cells.sort_unstable();
        cells.dedup();
        let x = cells.iter().map(|&k| sigma.center(k)).collect();
        let s = cells.iter().map(|&k| sigma.mass(k)).collect();
        let wm = cells.iter().map(|&k| w.mass(k)).collect();
        Ok(Self { sigma, w, cells, x, s, wm })
    }

    pub fn sigma(&self) -> &GridMeasure {
        &self.sigma
    }

    pub fn w(&self) -> &GridMeasure {
        &self.w
    }

    pub fn scale(&self) -> i32 {
        self.sigma.scale()
    }

    /// Cells charged by either measure, in increasing order.
    pub fn cells(&self) -> &[i64] {
        &self.cells
    }

    pub fn centers(&self) -> &[f64] {
        &self.x
    }

    pub fn sigma_masses(&self) -> &[f64] {
        &self.s
    }

    pub fn w_masses(&self) -> &[f64] {
        &self.wm
    }

    pub fn hull(&self) -> GridInterval {
        GridInterval { lo: self.cells[0], hi: self.cells[self.cells.len() - 1] }
    }

    /// The pair with `sigma` and `w` exchanged.
    pub fn swapped(&self) -> HilbertForm {
        HilbertForm::new(self.w.clone(), self.sigma.clone()).expect("validated")
    }

    #[inline]
    pub fn kernel(&self, p: usize, q: usize) -> f64 {
        if p == q {
            0.0
        } else {
            1.0 / (self.x[p] - self.x[q])
        }
    }

    /// Joint-support index range `[a, b)` of points inside `i`.
    pub fn index_range(&self, i: &GridInterval) -> (usize, usize) {
        let a = self.cells.partition_point(|&k| k < i.lo);
        let b = self.cells.partition_point(|&k| k <= i.hi);
        (a, b)
    }

    pub fn pairing(&self, f: &GridFunction, g: &GridFunction) -> f64 {
        let fv: Vec<f64> = self.cells.iter().zip(&self.s).map(|(&k, s)| s * f.value(k)).collect();
        let mut acc = 0.0;
        for p in 0..self.cells.len() {
            if self.wm[p] == 0.0 {
                continue;
            }
            let gp = g.value(self.cells[p]);
            if gp == 0.0 {
                continue;
            }
            let h: f64 = (0..self.cells.len()).map(|q| fv[q] * self.kernel(p, q)).sum();
            acc += self.wm[p] * gp * h;
        }
        acc
    }

    /// `H(f dsigma)` at every joint-support point.
    pub fn transform_sigma(&self, f: &GridFunction) -> Vec<f64> {
        let fv: Vec<f64> = self.cells.iter().zip(&self.s).map(|(&k, s)| s * f.value(k)).collect();
        (0..self.cells.len())
            .map(|p| (0..self.cells.len()).map(|q| fv[q] * self.kernel(p, q)).sum())
            .collect()
    }

    /// `H(g dw)` at every joint-support point.
    pub fn transform_w(&self, g: &GridFunction) -> Vec<f64> {
        let gv: Vec<f64> = self.cells.iter().zip(&self.wm).map(|(&k, w)| w * g.value(k)).collect();
        (0..self.cells.len())
            .map(|q| (0..self.cells.len()).map(|p| gv[p] * self.kernel(q, p)).sum())
            .collect()
    }

    /// `B(1_I, 1_J)`.
    pub fn indicator_pairing(&self, i: &GridInterval, j: &GridInterval) -> f64 {
        let (ia, ib) = self.index_range(i);
        let (ja, jb) = self.index_range(j);
        let mut acc = 0.0;
        for p in ja..jb {
            if self.wm[p] == 0.0 {
                continue;
            }
            let h: f64 = (ia..ib).map(|q| self.s[q] * self.kernel(p, q)).sum();
            acc += self.wm[p] * h;
        }
        acc
    }

    fn weighted_matrix_where<F: Fn(usize, usize) -> bool>(&self, keep: F) -> DMatrix<f64> {
        let rows: Vec<usize> = (0..self.cells.len()).filter(|&p| self.wm[p] > 0.0).collect();
        let cols: Vec<usize> = (0..self.cells.len()).filter(|&q| self.s[q] > 0.0).collect();
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| {
            let (p, q) = (rows[a], cols[b]);
            if keep(p, q) {
                self.wm[p].sqrt() * self.kernel(p, q) * self.s[q].sqrt()
            } else {
                0.0
            }
        })
    }

    /// `sqrt(w_p) K(p, q) sqrt(sigma_q)`, rows over supp w, columns over supp sigma.
    pub fn weighted_matrix(&self) -> DMatrix<f64> {
        self.weighted_matrix_where(|_, _| true)
    }

    /// Best constant in `|B(f, g)| <= C ||f||_{L^2(sigma)} ||g||_{L^2(w)}`.
    pub fn operator_norm(&self) -> NormEstimate {
        spectral_norm(&self.weighted_matrix())
    }

    /// Norm with both `f` and `g` supported in `window`.
    pub fn restricted_norm(&self, window: &GridInterval) -> f64 {
        let (a, b) = self.index_range(window);
        let rows: Vec<usize> = (a..b).filter(|&p| self.wm[p] > 0.0).collect();
        let cols: Vec<usize> = (a..b).filter(|&q| self.s[q] > 0.0).collect();
        let m = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
            let (p, q) = (rows[i], cols[j]);
            self.wm[p].sqrt() * self.kernel(p, q) * self.s[q].sqrt()
        });
        spectral_norm(&m).value
    }

    /// Norm of `H_eps`, whose kernel vanishes for `|x - y| <= eps`.
    pub fn truncated_norm(&self, eps: f64) -> f64 {
        let m = self.weighted_matrix_where(|p, q| (self.x[p] - self.x[q]).abs() > eps);
        spectral_norm(&m).value
    }

    /// Geometric grid of truncation radii from half a cell up to the diameter.
    pub fn epsilon_grid(&self, ratio: f64) -> Vec<f64> {
        let diam = self.x[self.x.len() - 1] - self.x[0];
        let mut eps = 0.5 * self.sigma.cell_len();
        let mut out = vec![eps];
        while eps <= diam {
            eps *= ratio;
            out.push(eps);
        }
        out
    }

    /// `sup_eps ||H_eps||` over the given radii, with the maximising radius.
    pub fn truncation_sup(&self, grid: &[f64]) -> (f64, f64) {
        let mut best = (0.0, 0.0);
        for &eps in grid {
            let v = self.truncated_norm(eps);
            if v > best.0 {
                best = (v, eps);
            }
        }
        best
    }

    fn candidate_runs(&self, mode: IntervalMode) -> Vec<(usize, usize, GridInterval)> {
        let n = self.cells.len();
        match mode {
            IntervalMode::Exhaustive => {
                let mut out = Vec::with_capacity(n * (n + 1) / 2);
                for a in 0..n {
                    for b in a..n {
                        out.push((a, b + 1, GridInterval { lo: self.cells[a], hi: self.cells[b] }));
                    }
                }
                out
            }
            IntervalMode::Dyadic => {
                let sys = ShiftedDyadicSystem::covering(self.scale(), self.hull(), 0.5, 1)
                    .expect("hull is nonempty");
                sys.enumerate()
                    .into_iter()
                    .map(|i| {
                        let g = i.grid();
                        let (a, b) = self.index_range(&g);
                        (a, b, g)
                    })
                    .filter(|(a, b, _)| a < b)
                    .collect()
            }
        }
    }

    /// Global, local and off-interval testing constants and their duals.
    pub fn testing_constants(&self, mode: IntervalMode) -> TestingConstants {
        let (glob, local, off) = self.testing_side(mode, &self.s, &self.wm, false);
        let (glob_d, local_d, off_d) = self.testing_side(mode, &self.wm, &self.s, true);
        TestingConstants {
            h_glob: glob,
            h_glob_dual: glob_d,
            h_local: local,
            h_local_dual: local_d,
            h_off: off,
            h_off_dual: off_d,
        }
    }

    /// Test `H(1_I d src)` in `L^2(dst)`; `dual` flips the kernel sign, which
    /// does not change any of the norms.
    fn testing_side(
        &self,
        mode: IntervalMode,
        src: &[f64],
        dst: &[f64],
        dual: bool,
    ) -> (Witness, Witness, Witness) {
        let n = self.cells.len();
        let sign = if dual { -1.0 } else { 1.0 };
        // prefix[p][b] = sum_{q < b} src_q K(p, q)
        let mut prefix = vec![0.0; n * (n + 1)];
        for p in 0..n {
            let row = &mut prefix[p * (n + 1)..(p + 1) * (n + 1)];
            for q in 0..n {
                row[q + 1] = row[q] + sign * src[q] * self.kernel(p, q);
            }
        }
        let mut src_prefix = vec![0.0; n + 1];
        for q in 0..n {
            src_prefix[q + 1] = src_prefix[q] + src[q];
        }
        let (mut glob, mut local, mut off) = (Witness::zero(), Witness::zero(), Witness::zero());
        for (a, b, interval) in self.candidate_runs(mode) {
            let mass = src_prefix[b] - src_prefix[a];
            if mass <= 0.0 {
                continue;
            }
            let (mut inside, mut outside) = (0.0, 0.0);
            for p in 0..n {
                if dst[p] == 0.0 {
                    continue;
                }
                let row = p * (n + 1);
                let h = prefix[row + b] - prefix[row + a];
                let t = dst[p] * h * h;
                if a <= p && p < b {
                    inside += t;
                } else {
                    outside += t;
                }
            }
            glob.offer(((inside + outside) / mass).sqrt(), interval);
            local.offer((inside / mass).sqrt(), interval);
            off.offer((outside / mass).sqrt(), interval);
        }
        (glob, local, off)
    }

    /// `sup |B(1_I, 1_J)| / sqrt(sigma(I) w(J))` over all pairs of intervals.
    pub fn weak_boundedness(&self) -> PairWitness {
        let n = self.cells.len();
        // 2-d prefix of w_p sigma_q K(p, q)
        let stride = n + 1;
        let mut pre = vec![0.0; stride * stride];
        for p in 0..n {
            for q in 0..n {
                let v = self.wm[p] * self.s[q] * self.kernel(p, q);
                pre[(p + 1) * stride + q + 1] =
                    v + pre[p * stride + q + 1] + pre[(p + 1) * stride + q] - pre[p * stride + q];
            }
        }
        let rect = |pa: usize, pb: usize, qa: usize, qb: usize| {
            pre[pb * stride + qb] - pre[pa * stride + qb] - pre[pb * stride + qa] + pre[pa * stride + qa]
        };
        let sig_idx: Vec<usize> = (0..n).filter(|&q| self.s[q] > 0.0).collect();
        let w_idx: Vec<usize> = (0..n).filter(|&p| self.wm[p] > 0.0).collect();
        let mut best = PairWitness { value: 0.0, pair: None };
        for (ia, &qa) in sig_idx.iter().enumerate() {
            let mut smass = 0.0;
            for &qb in &sig_idx[ia..] {
                smass += self.s[qb];
                for (ja, &pa) in w_idx.iter().enumerate() {
                    let mut wmass = 0.0;
                    for &pb in &w_idx[ja..] {
                        wmass += self.wm[pb];
                        let v = rect(pa, pb + 1, qa, qb + 1).abs() / (smass * wmass).sqrt();
                        if v > best.value {
                            best.value = v;
                            best.pair = Some((
                                GridInterval { lo: self.cells[qa], hi: self.cells[qb] },
                                GridInterval { lo: self.cells[pa], hi: self.cells[pb] },
                            ));
                        }
                    }
                }
            }
        }
        best
    }

    /// `K_n` for `n = 0..=n_max`: the largest norm of the form restricted to a
    /// window of `2^n` consecutive cells.
    pub fn windowed_constants(&self, n_max: u32) -> Vec<f64> {
        let hull = self.hull();
        let full = self.operator_norm().value;
        (0..=n_max)
            .map(|n| {
                let len = 1i64 << n;
                if len >= hull.cells() {
                    return full;
                }
                let last = hull.hi - len + 1;
                let mut starts: Vec<i64> = self.cells.iter().map(|&k| k.min(last)).collect();
                starts.dedup();
                starts
                    .into_iter()
                    .map(|s| self.restricted_norm(&GridInterval::with_len(s, len)))
                    .fold(0.0, f64::max)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn lattice(n: i64) -> HilbertForm {
        let mu = GridMeasure::from_cells(0, (0..n).map(|k| (k, 1.0))).unwrap();
        HilbertForm::new(mu.clone(), mu).unwrap()
    }

    #[test]
    fn two_atoms() {
        let sigma = GridMeasure::from_cells(0, [(0, 1.0)]).unwrap();
        let w = GridMeasure::from_cells(0, [(1, 1.0)]).unwrap();
        let b = HilbertForm::new(sigma, w).unwrap();
        assert_relative_eq!(b.operator_norm().value, 1.0, epsilon = 1e-14);
        let one = GridFunction::from_cells(0, [(0, 1.0), (1, 1.0)]);
        assert_relative_eq!(b.pairing(&one, &one), 1.0);
    }

    #[test]
    fn common_atom_has_no_self_interaction() {
        let mu = GridMeasure::from_cells(0, [(3, 2.0)]).unwrap();
        let b = HilbertForm::new(mu.clone(), mu).unwrap();
        assert_eq!(b.operator_norm().value, 0.0);
    }

    #[test]
    fn empty_support_rejected() {
        let mu = GridMeasure::from_cells(0, [(3, 2.0)]).unwrap();
        assert!(HilbertForm::new(mu, GridMeasure::zero(0)).is_err());
    }

    #[test]
    fn lattice_below_pi() {
        let c = lattice(32).operator_norm().value;
        assert!(c < std::f64::consts::PI && c > 2.5);
    }

    #[test]
    fn testing_chain_on_lattice() {
        let b = lattice(12);
        let t = b.testing_constants(IntervalMode::Exhaustive);
        let c = b.operator_norm().value;
        assert!(t.h_local.value <= t.h_glob.value);
        assert!(t.h_off.value <= t.h_glob.value);
        assert!(t.h_glob.value <= c * (1.0 + 1e-12));
        let wb = b.weak_boundedness().value;
        assert!(wb <= c * (1.0 + 1e-12));
        let k = b.windowed_constants(4);
        for n in 0..4 {
            assert!(k[n] <= k[n + 1] + 1e-12);
            assert!(k[n] <= (1u64 << (n + 1)) as f64 * wb * (1.0 + 1e-12));
        }
    }

    #[test]
    fn truncation_at_half_cell_is_full_form() {
        let b = lattice(10);
        assert_relative_eq!(b.truncated_norm(0.5), b.operator_norm().value, epsilon = 1e-12);
        assert_eq!(b.truncated_norm(100.0), 0.0);
    }
}
