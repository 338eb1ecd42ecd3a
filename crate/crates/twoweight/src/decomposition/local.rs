use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::stopping::StoppingTree;
use crate::a2::poisson_q;
use crate::dyadic::{identity_haar_coefficient, martingale_difference, DyadicInterval, Tile, TripledSystem};
use crate::error::{Error, Result};
use crate::hilbert::HilbertForm;
use crate::measure::{cell_center, GridFunction, GridMeasure};
use crate::poisson::PoissonProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Monotonicity {
    /// `|B(sum Delta_I f, g)|`
    pub lhs: f64,
    /// `B(sum eps_I Delta_I f, h)`
    pub mid: f64,
    /// `<sum eps_I Delta_I f, id> Q(h dw, J)`
    pub poisson: f64,
}

/// Both sides of the monotonicity principle for the pieces of `f` on `family`,
/// all inside `j`, against `g` and `h` living off `j` with `|g| <= h`.
pub fn monotonicity_check(
    form: &HilbertForm,
    f: &GridFunction,
    family: &[DyadicInterval],
    j: &DyadicInterval,
    g: &GridFunction,
    h: &GridFunction,
) -> Result<Monotonicity> {
    let (sigma, w) = (form.sigma(), form.w());
    if let Some(i) = family.iter().find(|i| !j.contains(i)) {
        return Err(Error::SupportViolation(format!("{i:?} is not inside {j:?}")));
    }
    for (k, _) in w.atoms() {
        let (gv, hv) = (g.value(k), h.value(k));
        if j.contains_cell(k) && (gv != 0.0 || hv != 0.0) {
            return Err(Error::SupportViolation(format!("g or h charges cell {k} inside J")));
        }
        if gv.abs() > hv {
            return Err(Error::SupportViolation(format!("|g| > h at cell {k}")));
        }
    }
    let mut plain: BTreeMap<i64, f64> = BTreeMap::new();
    let mut signed: BTreeMap<i64, f64> = BTreeMap::new();
    for i in family {
        let p = martingale_difference(f, sigma, i)?;
        let atoms: Vec<(i64, f64)> = sigma.restrict(&i.grid()).atoms().collect();
        let moment: f64 = atoms.iter().map(|&(k, m)| m * p.value(k) * cell_center(k, form.scale())).sum();
        let eps = if moment < 0.0 { -1.0 } else { 1.0 };
        for (k, _) in atoms {
            *plain.entry(k).or_insert(0.0) += p.value(k);
            *signed.entry(k).or_insert(0.0) += eps * p.value(k);
        }
    }
    let plain = GridFunction::from_cells(form.scale(), plain);
    let signed = GridFunction::from_cells(form.scale(), signed);
    let id = GridFunction::identity_on(form.scale(), sigma.atoms().map(|a| a.0));
    Ok(Monotonicity {
        lhs: form.pairing(&plain, g).abs(),
        mid: form.pairing(&signed, h),
        poisson: signed.inner(&id, sigma) * poisson_q(h, w, &j.grid()),
    })
}

/// The collection `{(I, J): I, J ⊊ S good, I ⋐ J, pi I = pi J^(1) = S}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePairs {
    pub top: DyadicInterval,
    pub pairs: Vec<(DyadicInterval, DyadicInterval)>,
}

impl AdmissiblePairs {
    pub fn i_family(&self) -> BTreeSet<DyadicInterval> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn j_family(&self) -> BTreeSet<DyadicInterval> {
        self.pairs.iter().map(|p| p.1).collect()
    }

    /// Number of violations of the two defining properties.
    pub fn violations(&self, tree: &StoppingTree) -> usize {
        let sys = &tree.system;
        let set: BTreeSet<_> = self.pairs.iter().copied().collect();
        let mut bad = 0;
        for (i, j) in &self.pairs {
            let deep = j.contains(i) && j.level > i.level + sys.r;
            let inside = self.top.contains(j) && j.level < self.top.level;
            if !(deep && inside && sys.is_good(i) && sys.is_good(j)) {
                bad += 1;
            }
        }
        for (i, j1) in &self.pairs {
            for (i2, j2) in &self.pairs {
                if i2 != i || !(j2.contains(j1) && j2.level > j1.level) {
                    continue;
                }
                for l in j1.level + 1..j2.level {
                    let j = sys.ancestor(j1, l - j1.level);
                    if sys.is_good(&j) && !set.contains(&(*i, j)) {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}

pub fn admissible_q(tree: &StoppingTree, s: usize) -> AdmissiblePairs {
    let sys = &tree.system;
    let top = tree.interval(s);
    let mut pairs = Vec::new();
    for level in 0..top.level {
        for k in 0..(1i64 << (top.level - level)) {
            let i = DyadicInterval { left: top.left + (k << level), level };
            if !sys.is_good(&i) || tree.pi(&i) != s {
                continue;
            }
            for jl in level + sys.r + 1..top.level {
                let j = sys.ancestor(&i, jl - level);
                if sys.is_good(&j) && tree.pi(&sys.parent(&j)) == s {
                    pairs.push((i, j));
                }
            }
        }
    }
    AdmissiblePairs { top, pairs }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeOfQ {
    pub value: f64,
    pub witness: Option<DyadicInterval>,
}

/// `size(Q)^2 = sup_K w(K)^{-1} Q(1_{S \ K} dw, K)^2 sum_{I ⊆ K, I in I} <id, h_I>^2`
/// over `K` in the two families with `w(K) > 0`.
pub fn size_of_q(q: &AdmissiblePairs, sigma: &GridMeasure, w: &GridMeasure) -> SizeOfQ {
    let ifam = q.i_family();
    let coeff: BTreeMap<DyadicInterval, f64> =
        ifam.iter().map(|i| (*i, identity_haar_coefficient(sigma, i).powi(2))).collect();
    let top = q.top;
    let mut best = SizeOfQ { value: 0.0, witness: None };
    for k in ifam.iter().chain(q.j_family().iter()) {
        let wk = w.interval_mass(&k.grid());
        if wk <= 0.0 {
            continue;
        }
        let outside = GridFunction::from_cells(
            w.scale(),
            w.atoms().filter(|(c, _)| top.contains_cell(*c) && !k.contains_cell(*c)).map(|(c, _)| (c, 1.0)),
        );
        let qv = poisson_q(&outside, w, &k.grid());
        let energy: f64 = coeff.iter().filter(|(i, _)| k.contains(i)).map(|(_, v)| v).sum();
        let v = (qv * qv * energy / wk).sqrt();
        if v > best.value {
            best = SizeOfQ { value: v, witness: Some(*k) };
        }
    }
    best
}

/// Good intervals carrying the projection `P_S^{sigma, k}`.
fn participates(tree: &StoppingTree, s: usize, k: u32, i: &DyadicInterval) -> bool {
    let sys = &tree.system;
    let s_int = tree.interval(s);
    let r = sys.r;
    if i.level == 0 || !s_int.contains(i) || !sys.is_good(i) || s_int.level + k > sys.depth {
        return false;
    }
    if k == 0 {
        i.level + r <= sys.depth && tree.pi(&sys.ancestor(i, r)) == s
    } else {
        k <= r && i.level + (r - k) == s_int.level && tree.pi(i) == s
    }
}

/// `K_S^k`: the maximal good `I ⊆ S` with `I^(r) ⊆ S^(k)` and `pi I^(r) = S`
/// (`k = 0`) or `pi I = S` (`k > 0`).
pub fn k_family(tree: &StoppingTree, s: usize, k: u32) -> Vec<DyadicInterval> {
    let sys = &tree.system;
    let s_int = tree.interval(s);
    let r = sys.r;
    if s_int.level + k > sys.depth {
        return Vec::new();
    }
    let max_level = (s_int.level + k).saturating_sub(r).min(s_int.level);
    if s_int.level + k < r {
        return Vec::new();
    }
    let qualifies = |i: &DyadicInterval| {
        if !sys.is_good(i) {
            return false;
        }
        if k == 0 {
            tree.pi(&sys.ancestor(i, r)) == s
        } else {
            tree.pi(i) == s
        }
    };
    let mut out = Vec::new();
    let mut stack = vec![];
    for j in 0..(1i64 << (s_int.level - max_level)) {
        stack.push(DyadicInterval { left: s_int.left + (j << max_level), level: max_level });
    }
    while let Some(i) = stack.pop() {
        if qualifies(&i) {
            out.push(i);
        } else if let Some(ch) = i.children() {
            stack.extend(ch);
        }
    }
    out.sort();
    out
}

/// `||P_{S,K}^{sigma,k} id||^2`.
fn projected_identity(tree: &StoppingTree, sigma: &GridMeasure, s: usize, k: u32, kk: &DyadicInterval) -> f64 {
    let mut acc = 0.0;
    for level in 1..=kk.level {
        for j in 0..(1i64 << (kk.level - level)) {
            let i = DyadicInterval { left: kk.left + (j << level), level };
            if participates(tree, s, k, &i) {
                acc += identity_haar_coefficient(sigma, &i).powi(2);
            }
        }
    }
    acc
}

/// `mu_I = sum_S sum_{K in K_S^k, I^u(K) = I} ||P_{S,K}^{sigma,k} id||^2` on `D^u`.
/// Intervals `K` without an `I^u(K)` in this system are left to the other two.
pub fn energy_profile(tree: &StoppingTree, sigma: &GridMeasure, k: u32, u: u8) -> Result<PoissonProfile> {
    let tsys = TripledSystem::new(tree.system.origin(), u)?;
    let mut profile = PoissonProfile::new(sigma.scale(), tsys);
    for s in 0..tree.len() {
        for kk in k_family(tree, s, k) {
            if let Some(tile) = tsys.i_u(&kk) {
                profile.add(tile, projected_identity(tree, sigma, s, k, &kk))?;
            }
        }
    }
    Ok(profile)
}

/// `sup_J mu(J^) / (|J|^2 sigma(J))` over the tiles carrying the profile and
/// their ancestors up to `levels` generations.
pub fn energy_box_ratio(profile: &PoissonProfile, sigma: &GridMeasure, levels: u32) -> f64 {
    let sys = &profile.system;
    let mut tiles: BTreeSet<Tile> = BTreeSet::new();
    for t in profile.coeffs.keys() {
        for j in 0..=levels {
            tiles.insert(sys.ancestor(t, j));
        }
    }
    tiles
        .into_iter()
        .map(|t| {
            let m = profile.box_mass(&t);
            if m == 0.0 {
                return 0.0;
            }
            m / (t.length(profile.scale).powi(2) * sigma.interval_mass(&t.grid()))
        })
        .fold(0.0, f64::max)
}

/// Largest number of members of one `K^J` covering a common point, over the
/// tiles `J` of `D^u` above every `I^u(K)` up to `levels` generations.
pub fn kj_overlap(tree: &StoppingTree, k: u32, u: u8, levels: u32) -> Result<usize> {
    let tsys = TripledSystem::new(tree.system.origin(), u)?;
    let mut members: Vec<(DyadicInterval, Tile, DyadicInterval)> = Vec::new();
    for s in 0..tree.len() {
        for kk in k_family(tree, s, k) {
            if let Some(t) = tsys.i_u(&kk) {
                members.push((kk, t, tree.interval(s)));
            }
        }
    }
    let mut candidates: BTreeSet<Tile> = BTreeSet::new();
    for (_, t, _) in &members {
        for j in 0..=levels {
            candidates.insert(tsys.ancestor(t, j));
        }
    }
    let mut best = 0;
    for j in candidates {
        let inside: Vec<DyadicInterval> = members
            .iter()
            .filter(|(_, t, s)| j.contains(t) && !(j.left <= s.left && s.right_end() <= j.right_end()))
            .map(|m| m.0)
            .collect();
        for a in &inside {
            let c = inside.iter().filter(|b| b.contains_cell(a.left)).count();
            best = best.max(c);
        }
    }
    Ok(best)
}
