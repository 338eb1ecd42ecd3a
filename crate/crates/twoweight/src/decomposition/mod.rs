//! Stopping trees, the projection calculus, the below/above forms and the
//! local and tail pieces extracted from them.
//!
//! Everything is evaluated on an unshifted system with a single top interval
//! `I_0 = S_0`. Inputs `f` (on `sigma`) and `g` (on `w`) must have mean zero
//! and no component on a bad interval; [`good_part`] produces such inputs.

mod forms;
mod local;
mod reduction;
mod stopping;

use std::collections::{BTreeMap, HashMap};

use crate::dyadic::{expand, DyadicInterval, HaarPiece, ShiftedDyadicSystem};
use crate::error::{Error, Result};
use crate::hilbert::HilbertForm;
use crate::measure::{GridFunction, GridMeasure};

pub use forms::{ErrorTerms, ProjectionCheck, Projections, SplitReport};
pub use local::{
    admissible_q, energy_box_ratio, energy_profile, k_family, kj_overlap, monotonicity_check, size_of_q, AdmissiblePairs,
    Monotonicity, SizeOfQ,
};
pub use reduction::{basic_bound, reduction_check, BasicBound, ReductionCheck};
pub use stopping::{
    carleson_embedding, maximal_function, phi, phi_tilde, CarlesonEmbedding, StopCondition, StopNode,
    StoppingTree,
};

/// Relative size below which a mean or a bad component counts as absent.
pub const INPUT_TOL: f64 = 1e-10;

/// The mean-zero good part of `f`: its martingale differences on good
/// intervals of `sys`.
pub fn good_part(f: &GridFunction, mu: &GridMeasure, sys: &ShiftedDyadicSystem) -> Result<GridFunction> {
    let e = expand(f, mu, sys)?;
    let mut vals: BTreeMap<i64, f64> = BTreeMap::new();
    for p in e.pieces.iter().filter(|p| sys.is_good(&p.interval)) {
        for (k, _) in mu.restrict(&p.interval.grid()).atoms() {
            *vals.entry(k).or_insert(0.0) += p.value(k);
        }
    }
    Ok(GridFunction::from_cells(mu.scale(), vals))
}

fn check_system(sys: &ShiftedDyadicSystem) -> Result<DyadicInterval> {
    let tops = sys.tops();
    if tops.len() != 1 {
        return Err(Error::InvalidParameter(format!(
            "the system needs a single top interval, found {} (shift {})",
            tops.len(),
            sys.shift
        )));
    }
    Ok(tops[0])
}

/// Good pieces of a mean-zero function, keyed by interval.
fn pieces_of(
    f: &GridFunction,
    mu: &GridMeasure,
    sys: &ShiftedDyadicSystem,
) -> Result<BTreeMap<DyadicInterval, HaarPiece>> {
    let e = expand(f, mu, sys)?;
    let norm = f.norm(mu);
    let tol = INPUT_TOL * norm.max(f64::MIN_POSITIVE);
    for (_, avg, mass) in &e.tops {
        if avg.abs() * mass.sqrt() > tol {
            return Err(Error::InvalidParameter(format!("nonzero mean {avg} on I_0")));
        }
    }
    let mut out = BTreeMap::new();
    for p in e.pieces {
        if sys.is_bad(&p.interval) {
            if p.norm_sq().sqrt() > tol {
                return Err(Error::BadComponent { left: p.interval.left, cells: p.interval.cells() });
            }
            continue;
        }
        out.insert(p.interval, p);
    }
    Ok(out)
}

/// A pair `(f, g)` prepared for the decomposition, with its stopping tree.
#[derive(Debug, Clone)]
pub struct Decomposition<'a> {
    form: &'a HilbertForm,
    sys: ShiftedDyadicSystem,
    top: DyadicInterval,
    f: BTreeMap<DyadicInterval, HaarPiece>,
    g: BTreeMap<DyadicInterval, HaarPiece>,
    tree: StoppingTree,
    /// prefix over joint points of `w_p H(Delta_I f dsigma)(x_p)`
    hf: HashMap<DyadicInterval, Vec<f64>>,
    /// prefix over joint points of `sigma_q H*(Delta_J g dw)(x_q)`
    hg: HashMap<DyadicInterval, Vec<f64>>,
    /// prefix of `w` and `g w` over joint points
    w_pre: Vec<f64>,
    gw_pre: Vec<f64>,
}

impl<'a> Decomposition<'a> {
    pub fn new(form: &'a HilbertForm, sys: ShiftedDyadicSystem, f: &GridFunction, g: &GridFunction) -> Result<Self> {
        let top = check_system(&sys)?;
        if sys.scale != form.scale() {
            return Err(Error::ScaleMismatch(sys.scale, form.scale()));
        }
        let fp = pieces_of(f, form.sigma(), &sys)?;
        let gp = pieces_of(g, form.w(), &sys)?;
        let tree = StoppingTree::build(form, g, &sys)?;
        let cells = form.cells();
        let n = cells.len();
        let (s, w) = (form.sigma_masses(), form.w_masses());
        let mut hf = HashMap::new();
        for (i, p) in &fp {
            let (a, b) = form.index_range(&i.grid());
            let mut pre = vec![0.0; n + 1];
            for x in 0..n {
                let v = if w[x] > 0.0 {
                    w[x] * (a..b).map(|q| s[q] * p.value(cells[q]) * form.kernel(x, q)).sum::<f64>()
                } else {
                    0.0
                };
                pre[x + 1] = pre[x] + v;
            }
            hf.insert(*i, pre);
        }
        let mut hg = HashMap::new();
        for (j, p) in &gp {
            let (a, b) = form.index_range(&j.grid());
            let mut pre = vec![0.0; n + 1];
            for q in 0..n {
                let v = if s[q] > 0.0 {
                    s[q] * (a..b).map(|x| w[x] * p.value(cells[x]) * form.kernel(x, q)).sum::<f64>()
                } else {
                    0.0
                };
                pre[q + 1] = pre[q] + v;
            }
            hg.insert(*j, pre);
        }
        let mut w_pre = vec![0.0; n + 1];
        let mut gw_pre = vec![0.0; n + 1];
        for x in 0..n {
            w_pre[x + 1] = w_pre[x] + w[x];
            gw_pre[x + 1] = gw_pre[x] + w[x] * g.value(cells[x]);
        }
        Ok(Self { form, sys, top, f: fp, g: gp, tree, hf, hg, w_pre, gw_pre })
    }

    pub fn form(&self) -> &HilbertForm {
        self.form
    }

    pub fn system(&self) -> &ShiftedDyadicSystem {
        &self.sys
    }

    pub fn top(&self) -> DyadicInterval {
        self.top
    }

    pub fn tree(&self) -> &StoppingTree {
        &self.tree
    }

    pub fn f_pieces(&self) -> impl Iterator<Item = &HaarPiece> {
        self.f.values()
    }

    pub fn g_pieces(&self) -> impl Iterator<Item = &HaarPiece> {
        self.g.values()
    }

    fn range(&self, i: &DyadicInterval) -> (usize, usize) {
        self.form.index_range(&i.grid())
    }

    /// `B(Delta_I f, 1_A)`.
    fn pair_f(&self, i: &DyadicInterval, a: &DyadicInterval) -> f64 {
        let pre = &self.hf[i];
        let (x, y) = self.range(a);
        pre[y] - pre[x]
    }

    /// `B(Delta_I f, psi)` for `psi` given at the joint points.
    fn pair_f_with(&self, i: &DyadicInterval, psi: &[f64]) -> f64 {
        let pre = &self.hf[i];
        psi.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(x, v)| v * (pre[x + 1] - pre[x])).sum()
    }

    /// `B(1_A, Delta_J g)`.
    fn pair_g(&self, a: &DyadicInterval, j: &DyadicInterval) -> f64 {
        let pre = &self.hg[j];
        let (x, y) = self.range(a);
        pre[y] - pre[x]
    }

    /// `<g>_I^w`, zero on `w`-null intervals.
    fn g_avg(&self, i: &DyadicInterval) -> f64 {
        let (x, y) = self.range(i);
        let m = self.w_pre[y] - self.w_pre[x];
        if m > 0.0 {
            (self.gw_pre[y] - self.gw_pre[x]) / m
        } else {
            0.0
        }
    }

    /// `<Delta_J g>_{child}`: the value of the piece on that child.
    fn g_on(&self, j: &DyadicInterval, child: &DyadicInterval) -> f64 {
        match self.g.get(j) {
            None => 0.0,
            Some(p) => {
                if child.left == j.left {
                    p.left
                } else {
                    p.right
                }
            }
        }
    }

    /// `<Delta_I f>_{child}`, zero when `I` carries no piece.
    fn f_on(&self, i: &DyadicInterval, child: &DyadicInterval) -> f64 {
        match self.f.get(i) {
            None => 0.0,
            Some(p) => {
                if child.left == i.left {
                    p.left
                } else {
                    p.right
                }
            }
        }
    }

    /// `I^{(k)}` when it is still inside `I_0`.
    fn ancestor(&self, i: &DyadicInterval, k: u32) -> Option<DyadicInterval> {
        (i.level + k <= self.sys.depth).then(|| self.sys.ancestor(i, k))
    }

    /// The stopping interval `S` with `I` in the range of `P~_S`: `pi(I^{(r)})`.
    fn tilde_owner(&self, i: &DyadicInterval) -> Option<usize> {
        self.ancestor(i, self.sys.r).map(|a| self.tree.pi(&a))
    }
}
