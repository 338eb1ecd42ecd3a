use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::check_system;
use crate::dyadic::{DyadicInterval, ShiftedDyadicSystem};
use crate::error::{Error, Result};
use crate::hilbert::HilbertForm;
use crate::linalg::max_symmetric_eigenvalue;
use crate::measure::{GridFunction, GridMeasure};

/// Why a node was selected. Nodes with `w(S') = 0` are never selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopCondition {
    Root,
    Mass,
    Energy,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopNode {
    pub interval: DyadicInterval,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub condition: StopCondition,
    pub w_mass: f64,
    /// `<|g|>_S^w`
    pub abs_avg: f64,
    /// `w(S)^{-1} int_S |H(1_S dw)|^2 dsigma`
    pub energy: f64,
}

/// Mass and energy stopping from the top interval, parents before children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingTree {
    pub system: ShiftedDyadicSystem,
    pub nodes: Vec<StopNode>,
    #[serde(skip)]
    index: HashMap<DyadicInterval, usize>,
}

/// Prefix sums over the joint support of the form.
struct Joint<'a> {
    form: &'a HilbertForm,
    w: Vec<f64>,
    abs_g: Vec<f64>,
}

impl<'a> Joint<'a> {
    fn new(form: &'a HilbertForm, g: &GridFunction) -> Self {
        let n = form.cells().len();
        let (mut w, mut abs_g) = (vec![0.0; n + 1], vec![0.0; n + 1]);
        for (x, &k) in form.cells().iter().enumerate() {
            let m = form.w_masses()[x];
            w[x + 1] = w[x] + m;
            abs_g[x + 1] = abs_g[x] + m * g.value(k).abs();
        }
        Self { form, w, abs_g }
    }

    fn range(&self, i: &DyadicInterval) -> (usize, usize) {
        self.form.index_range(&i.grid())
    }

    fn w(&self, i: &DyadicInterval) -> f64 {
        let (a, b) = self.range(i);
        self.w[b] - self.w[a]
    }

    fn abs_avg(&self, i: &DyadicInterval) -> f64 {
        let (a, b) = self.range(i);
        let m = self.w[b] - self.w[a];
        if m > 0.0 {
            (self.abs_g[b] - self.abs_g[a]) / m
        } else {
            0.0
        }
    }
}

impl StoppingTree {
    pub fn build(form: &HilbertForm, g: &GridFunction, sys: &ShiftedDyadicSystem) -> Result<Self> {
        let top = check_system(sys)?;
        let joint = Joint::new(form, g);
        let w0 = joint.w(&top);
        if w0 <= 0.0 {
            return Err(Error::Degenerate("w(S_0) = 0".into()));
        }
        let (s, wm) = (form.sigma_masses(), form.w_masses());
        let mut nodes = vec![StopNode {
            interval: top,
            parent: None,
            children: Vec::new(),
            condition: StopCondition::Root,
            w_mass: w0,
            abs_avg: joint.abs_avg(&top),
            energy: 0.0,
        }];
        let mut next = 0;
        while next < nodes.len() {
            let s_int = nodes[next].interval;
            let (a, b) = joint.range(&s_int);
            // sigma_q H(1_S dw)(x_q)^2 at the points of S
            let h2: Vec<f64> = (a..b)
                .map(|q| {
                    if s[q] == 0.0 {
                        return 0.0;
                    }
                    let h: f64 = (a..b).map(|p| wm[p] * form.kernel(q, p)).sum();
                    s[q] * h * h
                })
                .collect();
            let mut h2_pre = vec![0.0; h2.len() + 1];
            for (x, v) in h2.iter().enumerate() {
                h2_pre[x + 1] = h2_pre[x] + v;
            }
            let node_w = nodes[next].w_mass;
            let energy = h2_pre[h2.len()] / node_w;
            nodes[next].energy = energy;
            let avg = nodes[next].abs_avg;
            let mut stack: Vec<DyadicInterval> = s_int.children().map(|c| c.to_vec()).unwrap_or_default();
            let mut found = Vec::new();
            while let Some(c) = stack.pop() {
                let wc = joint.w(&c);
                if wc <= 0.0 {
                    continue;
                }
                let (ca, cb) = joint.range(&c);
                let mass = joint.abs_avg(&c) > 4.0 * avg;
                let en = (h2_pre[cb - a] - h2_pre[ca - a]) / wc > 4.0 * energy;
                let condition = match (mass, en) {
                    (true, true) => StopCondition::Both,
                    (true, false) => StopCondition::Mass,
                    (false, true) => StopCondition::Energy,
                    (false, false) => {
                        if let Some(ch) = c.children() {
                            stack.extend(ch);
                        }
                        continue;
                    }
                };
                found.push((c, wc, condition));
            }
            found.sort_by_key(|(c, _, _)| c.left);
            for (c, wc, condition) in found {
                let id = nodes.len();
                nodes.push(StopNode {
                    interval: c,
                    parent: Some(next),
                    children: Vec::new(),
                    condition,
                    w_mass: wc,
                    abs_avg: joint.abs_avg(&c),
                    energy: 0.0,
                });
                nodes[next].children.push(id);
            }
            next += 1;
        }
        let index = nodes.iter().enumerate().map(|(i, n)| (n.interval, i)).collect();
        Ok(Self { system: *sys, nodes, index })
    }

    pub fn root(&self) -> &StopNode {
        &self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_of(&self, i: &DyadicInterval) -> Option<usize> {
        self.index.get(i).copied()
    }

    pub fn interval(&self, id: usize) -> DyadicInterval {
        self.nodes[id].interval
    }

    /// `pi I`: the smallest stopping interval containing `I`, which must lie in `I_0`.
    pub fn pi(&self, i: &DyadicInterval) -> usize {
        let mut cur = *i;
        loop {
            if let Some(id) = self.index.get(&cur) {
                return *id;
            }
            debug_assert!(cur.level < self.system.depth, "interval outside I_0");
            cur = self.system.parent(&cur);
        }
    }

    /// `pi` of the stopping interval itself is the node; this is its parent in the tree.
    pub fn parent_of(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    /// Largest `sum_{ch(S)} w(S') / w(S)`.
    pub fn half_mass_ratio(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.children.iter().fold(0.0, |s, &c| s + self.nodes[c].w_mass) / n.w_mass)
            .fold(0.0, f64::max)
    }

    /// `sup_Q sum_{S ⊆ Q} w(S) / w(Q)` over dyadic `Q ⊆ I_0` with `w(Q) > 0`.
    pub fn carleson_ratio(&self, w: &GridMeasure) -> f64 {
        let mut best: f64 = 0.0;
        for q in self.system.enumerate() {
            let wq = w.interval_mass(&q.grid());
            if wq <= 0.0 {
                continue;
            }
            let sum: f64 = self.nodes.iter().filter(|n| q.contains(&n.interval)).map(|n| n.w_mass).sum();
            best = best.max(sum / wq);
        }
        best
    }

    /// Whether every child is disjoint from its siblings, strictly inside its
    /// parent, and maximal (no proper ancestor below the parent qualifies).
    pub fn structure_holds(&self) -> bool {
        self.nodes.iter().all(|n| {
            let ch: Vec<DyadicInterval> = n.children.iter().map(|&c| self.nodes[c].interval).collect();
            let inside = ch.iter().all(|c| n.interval.contains(c) && c.level < n.interval.level);
            let disjoint = ch
                .iter()
                .enumerate()
                .all(|(i, a)| ch[i + 1..].iter().all(|b| !a.contains(b) && !b.contains(a)));
            inside && disjoint
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlesonEmbedding {
    /// `sum_S w(S) <g>_S^2 / ||g||^2`
    pub ratio: f64,
    /// best constant over all `g`: the top eigenvalue of `sum_S w(S) v_S v_S^T`
    pub oracle: f64,
}

pub fn carleson_embedding(tree: &StoppingTree, g: &GridFunction, w: &GridMeasure) -> CarlesonEmbedding {
    let atoms: Vec<(i64, f64)> = w.atoms().collect();
    let norm2: f64 = atoms.iter().map(|&(k, m)| m * g.value(k).powi(2)).sum();
    let mut sum = 0.0;
    let n = atoms.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for node in &tree.nodes {
        let grid = node.interval.grid();
        let members: Vec<usize> = (0..n).filter(|&x| grid.contains(atoms[x].0)).collect();
        let ws: f64 = members.iter().map(|&x| atoms[x].1).sum();
        if ws <= 0.0 {
            continue;
        }
        let avg: f64 = members.iter().map(|&x| atoms[x].1 * g.value(atoms[x].0)).sum::<f64>() / ws;
        sum += ws * avg * avg;
        for &x in &members {
            for &y in &members {
                m[(x, y)] += (atoms[x].1 * atoms[y].1).sqrt() / ws;
            }
        }
    }
    let ratio = if norm2 > 0.0 { sum / norm2 } else { 0.0 };
    CarlesonEmbedding { ratio, oracle: max_symmetric_eigenvalue(&m) }
}

/// Dyadic `M_w g` over intervals of the system inside `I_0`, at the atoms of `w`.
pub fn maximal_function(g: &GridFunction, w: &GridMeasure, sys: &ShiftedDyadicSystem) -> GridFunction {
    let i0 = sys.i0();
    let vals = w.atoms().filter(|(k, _)| i0.contains(*k)).map(|(k, _)| {
        let best = (0..=sys.depth)
            .map(|l| {
                let j = sys.interval_containing(k, l);
                let sub = w.restrict(&j.grid());
                let m = sub.total_mass();
                sub.atoms().map(|(c, mc)| mc * g.value(c).abs()).sum::<f64>() / m
            })
            .fold(0.0, f64::max);
        (k, best)
    });
    GridFunction::from_cells(w.scale(), vals)
}

fn w_avg(g: &GridFunction, w: &GridMeasure, j: &DyadicInterval) -> f64 {
    let sub = w.restrict(&j.grid());
    let m = sub.total_mass();
    if m > 0.0 {
        sub.atoms().map(|(c, mc)| mc * g.value(c)).sum::<f64>() / m
    } else {
        0.0
    }
}

/// `Phi_S g = sum_{J ⊋ S} 1_{J \ J_S} <g>_J`, at the atoms of `w`.
pub fn phi(tree: &StoppingTree, g: &GridFunction, w: &GridMeasure, s: &DyadicInterval) -> GridFunction {
    let sys = &tree.system;
    let vals = w.atoms().filter_map(|(k, _)| {
        if s.contains_cell(k) {
            return None;
        }
        (s.level + 1..=sys.depth)
            .map(|l| sys.ancestor(s, l - s.level))
            .find(|j| j.contains_cell(k))
            .map(|j| (k, w_avg(g, w, &j)))
    });
    GridFunction::from_cells(w.scale(), vals)
}

/// `Phi~_R g = sum_{R ⊊ J ⊆ pi R} 1_{J \ J_R} (<g>_J - <g>_{pi R})`, at the atoms of `w`.
pub fn phi_tilde(tree: &StoppingTree, g: &GridFunction, w: &GridMeasure, r: &DyadicInterval) -> GridFunction {
    let sys = &tree.system;
    let top = tree.interval(tree.pi(r));
    let base = w_avg(g, w, &top);
    let vals = w.atoms().filter_map(|(k, _)| {
        if r.contains_cell(k) || !top.contains_cell(k) {
            return None;
        }
        (r.level + 1..=top.level)
            .map(|l| sys.ancestor(r, l - r.level))
            .find(|j| j.contains_cell(k))
            .map(|j| (k, w_avg(g, w, &j) - base))
    });
    GridFunction::from_cells(w.scale(), vals)
}
