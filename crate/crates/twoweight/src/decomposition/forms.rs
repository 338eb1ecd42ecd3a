use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::stopping::{phi, phi_tilde};
use super::Decomposition;
use crate::dyadic::{DyadicInterval, HaarPiece};
use crate::measure::{GridFunction, GridMeasure};

/// `P_S f`, `P~_S f` per stopping node, the high-interval remainder of `f`,
/// and `P_S g`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projections {
    pub p_f: Vec<GridFunction>,
    pub tilde_f: Vec<GridFunction>,
    /// pieces on intervals whose `r`-th ancestor leaves `I_0`
    pub high_f: GridFunction,
    pub p_g: Vec<GridFunction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheck {
    /// `||f - sum_S P_S f||`
    pub reconstruction_p: f64,
    /// `||f - sum_S P~_S f - high||`
    pub reconstruction_tilde: f64,
    pub reconstruction_g: f64,
    /// largest `|<P_S f, P_S' f>|` and `|<P~_S f, P~_S' f>|` over `S != S'`
    pub orthogonality: f64,
}

/// The remainders split off from the below form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorTerms {
    /// `sum_S B(P~_S f, 1_S) <g>_S`
    pub e0: f64,
    /// `k = 1..=r`: `sum_S B(Delta_S^{r-k} P_S f, 1_{S^(k)}) (<g>_{S^(k)} - <g>_{pi S^(k)})`
    pub e_k: Vec<f64>,
}

impl ErrorTerms {
    pub fn total(&self) -> f64 {
        self.e0 + self.e_k.iter().sum::<f64>()
    }

    pub fn abs_total(&self) -> f64 {
        self.e0.abs() + self.e_k.iter().map(|e| e.abs()).sum::<f64>()
    }
}

/// Every quantity of the below-form extraction and the residuals of the
/// identities linking them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub below: f64,
    /// `sum_S B_below(P~_S f, P_S g)`
    pub diagonal: f64,
    /// `sum_{S' ⊋ S} B_below(P~_S f, P_S' g)`
    pub unequal: f64,
    /// `sum_{S' ⊋ S} B_below(P_S P~_S' f, P_S' g)`
    pub resplit: f64,
    pub local: f64,
    /// `k = 0..=r`
    pub tails: Vec<f64>,
    pub errors: ErrorTerms,
    pub residual_split: f64,
    pub residual_unequal: f64,
    pub residual_tail0: f64,
    pub residual_resplit: f64,
    pub residual_resplit2: f64,
    pub residual_tails: f64,
    pub residual_overall: f64,
}

impl SplitReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.residual_split,
            self.residual_unequal,
            self.residual_tail0,
            self.residual_resplit,
            self.residual_resplit2,
            self.residual_tails,
            self.residual_overall,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn sum_pieces<'p>(mu: &GridMeasure, pieces: impl Iterator<Item = &'p HaarPiece>) -> GridFunction {
    let mut vals: BTreeMap<i64, f64> = BTreeMap::new();
    for p in pieces {
        for (k, _) in mu.restrict(&p.interval.grid()).atoms() {
            *vals.entry(k).or_insert(0.0) += p.value(k);
        }
    }
    GridFunction::from_cells(mu.scale(), vals)
}

fn diff_norm(a: &GridFunction, b: &GridFunction, mu: &GridMeasure) -> f64 {
    mu.atoms().map(|(k, m)| m * (a.value(k) - b.value(k)).powi(2)).sum::<f64>().sqrt()
}

impl Decomposition<'_> {
    /// `sum_J sum_{I ⋐ J} B(Delta_I f, 1_{J_I}) <Delta_J g>_{J_I}` over the pairs accepted by `keep`.
    fn below_where<F: Fn(&DyadicInterval, &DyadicInterval) -> bool>(&self, keep: F) -> f64 {
        let r = self.sys.r;
        let mut acc = 0.0;
        for i in self.f.keys() {
            let mut child = self.ancestor(i, r);
            let mut level = i.level + r + 1;
            while level <= self.sys.depth {
                let j = self.sys.ancestor(i, level - i.level);
                let c = child.expect("below the top");
                if self.g.contains_key(&j) && keep(i, &j) {
                    acc += self.pair_f(i, &c) * self.g_on(&j, &c);
                }
                child = Some(j);
                level += 1;
            }
        }
        acc
    }

    pub fn b_below(&self) -> f64 {
        self.below_where(|_, _| true)
    }

    /// `sum_I sum_{J ⋐ I} <Delta_I f>_{I_J} B(1_{I_J}, Delta_J g)`.
    pub fn b_above(&self) -> f64 {
        let r = self.sys.r;
        let mut acc = 0.0;
        for j in self.g.keys() {
            let mut level = j.level + r + 1;
            while level <= self.sys.depth {
                let i = self.sys.ancestor(j, level - j.level);
                if self.f.contains_key(&i) {
                    let c = self.sys.ancestor(j, level - 1 - j.level);
                    acc += self.f_on(&i, &c) * self.pair_g(&c, j);
                }
                level += 1;
            }
        }
        acc
    }

    pub fn projections(&self) -> Projections {
        let n = self.tree.len();
        let (sigma, w) = (self.form.sigma(), self.form.w());
        let mut p_f = vec![Vec::new(); n];
        let mut tilde_f = vec![Vec::new(); n];
        let mut high = Vec::new();
        for (i, p) in &self.f {
            p_f[self.tree.pi(i)].push(p);
            match self.tilde_owner(i) {
                Some(s) => tilde_f[s].push(p),
                None => high.push(p),
            }
        }
        let mut p_g = vec![Vec::new(); n];
        for (j, p) in &self.g {
            p_g[self.tree.pi(j)].push(p);
        }
        Projections {
            p_f: p_f.into_iter().map(|v| sum_pieces(sigma, v.into_iter())).collect(),
            tilde_f: tilde_f.into_iter().map(|v| sum_pieces(sigma, v.into_iter())).collect(),
            high_f: sum_pieces(sigma, high.into_iter()),
            p_g: p_g.into_iter().map(|v| sum_pieces(w, v.into_iter())).collect(),
        }
    }

    /// Reconstruction and orthogonality of the projections, against `f` and `g`
    /// themselves.
    pub fn projection_check(&self, f: &GridFunction, g: &GridFunction) -> ProjectionCheck {
        let (sigma, w) = (self.form.sigma(), self.form.w());
        let pr = self.projections();
        let total = |parts: &[GridFunction], extra: Option<&GridFunction>, mu: &GridMeasure| {
            let vals = mu.atoms().map(|(k, _)| {
                let v: f64 = parts.iter().map(|p| p.value(k)).sum::<f64>() + extra.map_or(0.0, |e| e.value(k));
                (k, v)
            });
            GridFunction::from_cells(mu.scale(), vals)
        };
        let mut orth: f64 = 0.0;
        for family in [&pr.p_f, &pr.tilde_f] {
            for a in 0..family.len() {
                for b in a + 1..family.len() {
                    orth = orth.max(family[a].inner(&family[b], sigma).abs());
                }
            }
        }
        ProjectionCheck {
            reconstruction_p: diff_norm(f, &total(&pr.p_f, None, sigma), sigma),
            reconstruction_tilde: diff_norm(f, &total(&pr.tilde_f, Some(&pr.high_f), sigma), sigma),
            reconstruction_g: diff_norm(g, &total(&pr.p_g, None, w), w),
            orthogonality: orth,
        }
    }

    /// The stopping intervals strictly above `s` in the tree.
    fn is_strict_ancestor(&self, a: usize, s: usize) -> bool {
        let mut cur = self.tree.parent_of(s);
        while let Some(c) = cur {
            if c == a {
                return true;
            }
            cur = self.tree.parent_of(c);
        }
        false
    }

    /// Pieces `Delta_I f` with `I^{(r-k)} = S`, `pi I = S` and `S^{(k)}` inside `I_0`.
    fn layer(&self, s: usize, k: u32) -> Vec<DyadicInterval> {
        let s_int = self.tree.interval(s);
        let r = self.sys.r;
        if s_int.level + k > self.sys.depth || s_int.level < r - k {
            return Vec::new();
        }
        let level = s_int.level - (r - k);
        self.f
            .keys()
            .filter(|i| i.level == level && s_int.contains(i) && self.tree.pi(i) == s)
            .copied()
            .collect()
    }

    /// `w`-side values at the joint points of a function given on the atoms of `w`.
    fn at_joint(&self, h: &GridFunction) -> Vec<f64> {
        self.form.cells().iter().map(|&k| h.value(k)).collect()
    }

    /// `B_tail^{(0)} = sum_S B(P~_S f, Phi_S g)`.
    pub fn tail0(&self, g: &GridFunction) -> f64 {
        let w = self.form.w();
        let mut by_owner: Vec<Vec<DyadicInterval>> = vec![Vec::new(); self.tree.len()];
        for i in self.f.keys() {
            if let Some(s) = self.tilde_owner(i) {
                by_owner[s].push(*i);
            }
        }
        let mut acc = 0.0;
        for (s, members) in by_owner.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let psi = self.at_joint(&phi(&self.tree, g, w, &self.tree.interval(s)));
            acc += members.iter().map(|i| self.pair_f_with(i, &psi)).sum::<f64>();
        }
        acc
    }

    /// `B_tail^{(k)} = sum_S B(Delta_S^{r-k} P_S f, Phi~_{S^(k)} g)`, `1 <= k <= r`.
    pub fn tail_k(&self, g: &GridFunction, k: u32) -> f64 {
        let w = self.form.w();
        let mut acc = 0.0;
        for s in 0..self.tree.len() {
            let layer = self.layer(s, k);
            if layer.is_empty() {
                continue;
            }
            let rk = self.sys.ancestor(&self.tree.interval(s), k);
            let psi = self.at_joint(&phi_tilde(&self.tree, g, w, &rk));
            acc += layer.iter().map(|i| self.pair_f_with(i, &psi)).sum::<f64>();
        }
        acc
    }

    pub fn tail_form(&self, g: &GridFunction, k: u32) -> f64 {
        if k == 0 {
            self.tail0(g)
        } else {
            self.tail_k(g, k)
        }
    }

    /// `B_local = sum_S B_below(P_S f, P_S g)`.
    pub fn local_form(&self) -> f64 {
        self.below_where(|i, j| self.tree.pi(i) == self.tree.pi(j))
    }

    pub fn error_terms(&self) -> ErrorTerms {
        let mut e0 = 0.0;
        for i in self.f.keys() {
            if let Some(s) = self.tilde_owner(i) {
                let s_int = self.tree.interval(s);
                e0 += self.pair_f(i, &s_int) * self.g_avg(&s_int);
            }
        }
        let e_k = (1..=self.sys.r)
            .map(|k| {
                let mut acc = 0.0;
                for s in 0..self.tree.len() {
                    let layer = self.layer(s, k);
                    if layer.is_empty() {
                        continue;
                    }
                    let rk = self.sys.ancestor(&self.tree.interval(s), k);
                    let diff = self.g_avg(&rk) - self.g_avg(&self.tree.interval(self.tree.pi(&rk)));
                    acc += layer.iter().map(|i| self.pair_f(i, &rk)).sum::<f64>() * diff;
                }
                acc
            })
            .collect();
        ErrorTerms { e0, e_k }
    }

    /// `sum_S sum_{J ⊋ S} B(P~_S f, 1_{J_S}) <Delta_J g>_{J_S}`.
    fn unequal_by_ancestors(&self) -> f64 {
        let mut acc = 0.0;
        for i in self.f.keys() {
            let Some(s) = self.tilde_owner(i) else { continue };
            let s_int = self.tree.interval(s);
            let mut child = s_int;
            for l in s_int.level + 1..=self.sys.depth {
                let j = self.sys.ancestor(&s_int, l - s_int.level);
                acc += self.pair_f(i, &child) * self.g_on(&j, &child);
                child = j;
            }
        }
        acc
    }

    /// The `k`-indexed terms of the re-split, before the ladder is pulled out.
    fn resplit_by_layers(&self) -> f64 {
        let mut acc = 0.0;
        for k in 1..=self.sys.r {
            for s in 0..self.tree.len() {
                let s_int = self.tree.interval(s);
                for i in self.layer(s, k) {
                    let rk = self.sys.ancestor(&s_int, k);
                    let top = self.tree.pi(&rk);
                    for l in rk.level + 1..=self.sys.depth {
                        let j = self.sys.ancestor(&rk, l - rk.level);
                        if self.tree.pi(&j) != top {
                            break;
                        }
                        let js = j.child_containing(&s_int);
                        acc += self.pair_f(&i, &js) * self.g_on(&j, &js);
                    }
                }
            }
        }
        acc
    }

    /// Evaluate every piece of the extraction and the residuals of each identity.
    /// `g` must be the function the decomposition was built from.
    pub fn split_identities(&self, g: &GridFunction) -> SplitReport {
        let tree = &self.tree;
        let below = self.b_below();
        let diagonal = self.below_where(|i, j| self.tilde_owner(i) == Some(tree.pi(j)));
        let unequal = self.below_where(|i, j| {
            let pj = tree.pi(j);
            self.tilde_owner(i).is_some_and(|s| self.is_strict_ancestor(pj, s))
        });
        let local = self.local_form();
        let resplit = self.below_where(|i, j| {
            let (pi, pj) = (tree.pi(i), tree.pi(j));
            pi != pj && self.tilde_owner(i) == Some(pj)
        });
        let tails: Vec<f64> = (0..=self.sys.r).map(|k| self.tail_form(g, k)).collect();
        let errors = self.error_terms();
        let unequal_rhs = self.unequal_by_ancestors();
        let layered = self.resplit_by_layers();
        let ladder: f64 = errors.e_k.iter().sum::<f64>() + tails[1..].iter().sum::<f64>();
        let overall = local + tails.iter().sum::<f64>() + errors.total();
        SplitReport {
            below,
            diagonal,
            unequal,
            resplit,
            local,
            residual_split: (below - diagonal - unequal).abs(),
            residual_unequal: (unequal - unequal_rhs).abs(),
            residual_tail0: (unequal - errors.e0 - tails[0]).abs(),
            residual_resplit: (diagonal - local - resplit).abs(),
            residual_resplit2: (resplit - layered).abs(),
            residual_tails: (layered - ladder).abs(),
            residual_overall: (below - overall).abs(),
            tails,
            errors,
        }
    }
}
