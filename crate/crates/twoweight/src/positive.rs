//! Positive dyadic forms `Lambda(f, g) = sum_Q lambda_Q int_{Q+} f dsigma int_{Q-} g dw`
//! on cubes of `R^d`, their norms, testing constants and principal cubes.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, NormEstimate};

/// Cube `prod_i [index_i 2^level, (index_i + 1) 2^level)` in units of the minimal cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cube {
    pub level: u32,
    pub index: Vec<i64>,
}

impl Cube {
    pub fn cell(index: Vec<i64>) -> Self {
        Cube { level: 0, index }
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    pub fn parent(&self) -> Cube {
        Cube { level: self.level + 1, index: self.index.iter().map(|i| i.div_euclid(2)).collect() }
    }

    pub fn ancestor(&self, level: u32) -> Cube {
        let shift = level.saturating_sub(self.level);
        Cube { level: self.level.max(level), index: self.index.iter().map(|i| i >> shift).collect() }
    }

    /// The `2^d` children in lexicographic order of the offset bits.
    pub fn children(&self) -> Vec<Cube> {
        assert!(self.level > 0, "minimal cubes have no children");
        let d = self.dim();
        (0..1usize << d)
            .map(|bits| Cube {
                level: self.level - 1,
                index: self.index.iter().enumerate().map(|(i, &x)| 2 * x + ((bits >> i) & 1) as i64).collect(),
            })
            .collect()
    }

    pub fn contains(&self, other: &Cube) -> bool {
        other.level <= self.level && other.ancestor(self.level) == *self
    }

    pub fn contains_cell(&self, cell: &[i64]) -> bool {
        cell.iter().zip(&self.index).all(|(&c, &i)| c >> self.level == i)
    }
}

/// Nonnegative masses on minimal cubes.
pub type CubeMeasure = BTreeMap<Vec<i64>, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub cube: Cube,
    pub lambda: f64,
    pub plus: Cube,
    pub minus: Cube,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveDyadicForm {
    pub dim: usize,
    pub p: f64,
    pub sigma: CubeMeasure,
    pub w: CubeMeasure,
    pub terms: Vec<Term>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaTesting {
    pub u: f64,
    pub t: f64,
    pub t_star: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaNorm {
    pub value: f64,
    /// true when `value` is the exact norm, false for an ascent lower bound
    pub exact: bool,
}

fn check_measure(mu: &CubeMeasure, dim: usize, name: &str) -> Result<()> {
    for (k, &m) in mu {
        if k.len() != dim {
            return Err(Error::InvalidParameter(format!("{name} cell {k:?} has dimension {}", k.len())));
        }
        if !m.is_finite() {
            return Err(Error::NonFinite(format!("{name} mass at {k:?}")));
        }
        if m < 0.0 {
            return Err(Error::InvalidParameter(format!("{name} mass {m} at {k:?}")));
        }
    }
    Ok(())
}

impl PositiveDyadicForm {
    pub fn new(dim: usize, p: f64, sigma: CubeMeasure, w: CubeMeasure) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension 0".into()));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 1")));
        }
        check_measure(&sigma, dim, "sigma")?;
        check_measure(&w, dim, "w")?;
        Ok(Self { dim, p, sigma, w, terms: Vec::new() })
    }

    pub fn add_term(&mut self, cube: Cube, lambda: f64, plus: Cube, minus: Cube) -> Result<()> {
        if cube.dim() != self.dim || cube.level == 0 {
            return Err(Error::InvalidParameter(format!("{cube:?} cannot carry a term")));
        }
        if plus == minus || plus.parent() != cube || minus.parent() != cube || plus.level + 1 != cube.level {
            return Err(Error::InvalidParameter("Q+ and Q- must be distinct children of Q".into()));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("coefficient {lambda}")));
        }
        self.terms.push(Term { cube, lambda, plus, minus });
        Ok(())
    }

    pub fn p_dual(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn mass(mu: &CubeMeasure, q: &Cube) -> f64 {
        mu.iter().filter(|(k, _)| q.contains_cell(k)).map(|(_, m)| m).sum()
    }

    fn integral(mu: &CubeMeasure, f: &BTreeMap<Vec<i64>, f64>, q: &Cube) -> f64 {
        mu.iter()
            .filter(|(k, _)| q.contains_cell(k))
            .map(|(k, m)| m * f.get(k).copied().unwrap_or(0.0))
            .sum()
    }

    pub fn sigma_mass(&self, q: &Cube) -> f64 {
        Self::mass(&self.sigma, q)
    }

    pub fn w_mass(&self, q: &Cube) -> f64 {
        Self::mass(&self.w, q)
    }

    pub fn evaluate(&self, f: &BTreeMap<Vec<i64>, f64>, g: &BTreeMap<Vec<i64>, f64>) -> f64 {
        self.terms
            .iter()
            .map(|t| t.lambda * Self::integral(&self.sigma, f, &t.plus) * Self::integral(&self.w, g, &t.minus))
            .sum()
    }

    /// `A[b][a] = sum lambda 1[a in Q+] 1[b in Q-]` over the supports, rows on `w`.
    fn kernel(&self) -> (Vec<Vec<i64>>, Vec<Vec<i64>>, DMatrix<f64>) {
        let scells: Vec<Vec<i64>> = self.sigma.iter().filter(|e| *e.1 > 0.0).map(|e| e.0.clone()).collect();
        let wcells: Vec<Vec<i64>> = self.w.iter().filter(|e| *e.1 > 0.0).map(|e| e.0.clone()).collect();
        let mut a = DMatrix::zeros(wcells.len(), scells.len());
        for t in &self.terms {
            let cols: Vec<usize> = (0..scells.len()).filter(|&j| t.plus.contains_cell(&scells[j])).collect();
            for (i, wc) in wcells.iter().enumerate() {
                if t.minus.contains_cell(wc) {
                    for &j in &cols {
                        a[(i, j)] += t.lambda;
                    }
                }
            }
        }
        (scells, wcells, a)
    }

    /// Exact norm from `L^2(sigma) x L^2(w)` to the scalars.
    pub fn norm_p2(&self) -> NormEstimate {
        let (sc, wc, mut a) = self.kernel();
        for i in 0..wc.len() {
            for j in 0..sc.len() {
                a[(i, j)] *= (self.w[&wc[i]] * self.sigma[&sc[j]]).sqrt();
            }
        }
        spectral_norm(&a)
    }

    /// Norm over nonnegative unit vectors by alternating exact maximisation.
    /// For `p = 2` the singular value is returned instead.
    pub fn norm(&self, restarts: usize, seed: u64) -> LambdaNorm {
        if (self.p - 2.0).abs() < 1e-15 {
            return LambdaNorm { value: self.norm_p2().value, exact: true };
        }
        LambdaNorm { value: self.ascent(restarts, seed), exact: false }
    }

    /// Lower bound for general `p`: each half-step maximises one variable exactly,
    /// so the value never decreases.
    pub fn ascent(&self, restarts: usize, seed: u64) -> f64 {
        let (sc, wc, a) = self.kernel();
        if sc.is_empty() || wc.is_empty() {
            return 0.0;
        }
        let s = DVector::from_iterator(sc.len(), sc.iter().map(|k| self.sigma[k]));
        let w = DVector::from_iterator(wc.len(), wc.iter().map(|k| self.w[k]));
        let (p, q) = (self.p, self.p_dual());
        let lp = |v: &DVector<f64>, mu: &DVector<f64>, e: f64| {
            v.iter().zip(mu.iter()).map(|(x, m)| m * x.abs().powf(e)).sum::<f64>().powf(1.0 / e)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best: f64 = 0.0;
        for r in 0..restarts.max(1) {
            let mut f = DVector::from_fn(sc.len(), |_, _| if r == 0 { 1.0 } else { rng.gen_range(0.05..1.0) });
            let n = lp(&f, &s, p);
            f /= n;
            let mut value = 0.0;
            for _ in 0..500 {
                // Tf(b) = sum_a A[b][a] sigma_a f_a; best g gives ||Tf||_{L^p(w)}
                let tf = &a * f.component_mul(&s);
                let norm_tf = lp(&tf, &w, p);
                if norm_tf == 0.0 {
                    break;
                }
                let g = tf.map(|x| x.powf(p - 1.0)) / norm_tf.powf(p - 1.0);
                let tg = a.transpose() * g.component_mul(&w);
                let norm_tg = lp(&tg, &s, q);
                f = tg.map(|x| x.powf(q - 1.0)) / norm_tg.powf(q - 1.0);
                let done = norm_tg - value <= 1e-13 * norm_tg;
                value = norm_tg;
                if done {
                    break;
                }
            }
            best = best.max(value);
        }
        best
    }

    /// Cubes that can carry a testing supremum: ancestors of term cubes up to a
    /// level above which every ancestor contains the same terms.
    fn testing_cubes(&self) -> BTreeSet<Cube> {
        let mut out = BTreeSet::new();
        let span = self
            .terms
            .iter()
            .flat_map(|t| t.cube.index.iter().map(move |&i| (i.abs() + 1) << t.cube.level))
            .max()
            .unwrap_or(1);
        let cap = 64 - (span as u64).leading_zeros() + 1;
        for t in &self.terms {
            for level in t.cube.level..=cap.max(t.cube.level) {
                out.insert(t.cube.ancestor(level));
            }
        }
        out
    }

    pub fn testing(&self) -> LambdaTesting {
        let (p, q) = (self.p, self.p_dual());
        let mut u: f64 = 0.0;
        let sp: Vec<f64> = self.terms.iter().map(|t| self.sigma_mass(&t.plus)).collect();
        let wm: Vec<f64> = self.terms.iter().map(|t| self.w_mass(&t.minus)).collect();
        for (i, t) in self.terms.iter().enumerate() {
            u = u.max(t.lambda * sp[i].powf(1.0 / q) * wm[i].powf(1.0 / p));
        }
        let mut tt: f64 = 0.0;
        let mut ts: f64 = 0.0;
        for cube in self.testing_cubes() {
            let inside: Vec<usize> = (0..self.terms.len()).filter(|&i| cube.contains(&self.terms[i].cube)).collect();
            let s_q = self.sigma_mass(&cube);
            if s_q > 0.0 {
                // || sum lambda sigma(Q+) 1_{Q-} ||_{L^p(w)}
                let v: f64 = self
                    .w
                    .iter()
                    .map(|(k, m)| {
                        let x: f64 = inside
                            .iter()
                            .filter(|&&i| self.terms[i].minus.contains_cell(k))
                            .map(|&i| self.terms[i].lambda * sp[i])
                            .sum();
                        m * x.powf(p)
                    })
                    .sum();
                tt = tt.max(v.powf(1.0 / p) / s_q.powf(1.0 / p));
            }
            let w_q = self.w_mass(&cube);
            if w_q > 0.0 {
                let v: f64 = self
                    .sigma
                    .iter()
                    .map(|(k, m)| {
                        let x: f64 = inside
                            .iter()
                            .filter(|&&i| self.terms[i].plus.contains_cell(k))
                            .map(|&i| self.terms[i].lambda * wm[i])
                            .sum();
                        m * x.powf(q)
                    })
                    .sum();
                ts = ts.max(v.powf(1.0 / q) / w_q.powf(1.0 / q));
            }
        }
        LambdaTesting { u, t: tt, t_star: ts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalCube {
    pub cube: Cube,
    pub parent: Option<usize>,
    pub average: f64,
    /// `sigma(E(F))`: mass of `F` outside its stopping children
    pub e_mass: f64,
    pub mass: f64,
}

/// Principal cubes of `f >= 0` in `top`: the children of `F` are the maximal
/// `F' ⊊ F` with `<f>_{F'} > 2 <f>_F`.
pub fn principal_cubes(f: &BTreeMap<Vec<i64>, f64>, sigma: &CubeMeasure, top: &Cube) -> Result<Vec<PrincipalCube>> {
    let mut sums: HashMap<Cube, (f64, f64)> = HashMap::new();
    for (k, &m) in sigma {
        if k.len() != top.dim() {
            return Err(Error::InvalidParameter(format!("cell {k:?} has the wrong dimension")));
        }
        let v = f.get(k).copied().unwrap_or(0.0);
        if v < 0.0 {
            return Err(Error::InvalidParameter(format!("f({k:?}) = {v} is negative")));
        }
        if m > 0.0 && !top.contains_cell(k) {
            return Err(Error::SupportViolation(format!("cell {k:?} outside the top cube")));
        }
        let mut c = Cube::cell(k.clone());
        loop {
            let e = sums.entry(c.clone()).or_insert((0.0, 0.0));
            e.0 += m;
            e.1 += m * v;
            if c.level >= top.level {
                break;
            }
            c = c.parent();
        }
    }
    let stat = |c: &Cube| sums.get(c).copied().unwrap_or((0.0, 0.0));
    let avg = |c: &Cube| {
        let (m, i) = stat(c);
        if m > 0.0 {
            i / m
        } else {
            0.0
        }
    };
    let mut out = vec![PrincipalCube { cube: top.clone(), parent: None, average: avg(top), e_mass: 0.0, mass: stat(top).0 }];
    let mut next = 0;
    while next < out.len() {
        let root = out[next].cube.clone();
        let threshold = 2.0 * out[next].average;
        let mut children_mass = 0.0;
        let mut stack = if root.level > 0 { root.children() } else { Vec::new() };
        while let Some(c) = stack.pop() {
            let (m, _) = stat(&c);
            if m <= 0.0 {
                continue;
            }
            if avg(&c) > threshold {
                children_mass += m;
                out.push(PrincipalCube { cube: c.clone(), parent: Some(next), average: avg(&c), e_mass: 0.0, mass: m });
            } else if c.level > 0 {
                stack.extend(c.children());
            }
        }
        out[next].e_mass = out[next].mass - children_mass;
        next += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cells(v: &[(i64, f64)]) -> CubeMeasure {
        v.iter().map(|&(k, m)| (vec![k], m)).collect()
    }

    #[test]
    fn cube_geometry() {
        let c = Cube { level: 2, index: vec![1, -1] };
        assert_eq!(c.children().len(), 4);
        assert!(c.children().iter().all(|k| k.parent() == c && c.contains(k)));
        assert!(c.contains_cell(&[4, -4]) && c.contains_cell(&[7, -1]) && !c.contains_cell(&[8, -1]));
    }

    #[test]
    fn single_term() {
        let mut f = PositiveDyadicForm::new(1, 2.0, cells(&[(0, 2.0)]), cells(&[(1, 3.0)])).unwrap();
        let q = Cube { level: 1, index: vec![0] };
        f.add_term(q.clone(), 1.5, Cube::cell(vec![0]), Cube::cell(vec![1])).unwrap();
        let one: BTreeMap<Vec<i64>, f64> = [(vec![0], 1.0), (vec![1], 1.0)].into_iter().collect();
        assert_relative_eq!(f.evaluate(&one, &one), 1.5 * 6.0);
        assert_relative_eq!(f.norm_p2().value, 1.5 * 6f64.sqrt(), epsilon = 1e-12);
        let t = f.testing();
        assert_relative_eq!(t.u, 1.5 * 6f64.sqrt(), epsilon = 1e-12);
        assert!(f.add_term(q.clone(), 1.0, Cube::cell(vec![0]), Cube::cell(vec![0])).is_err());
        assert!(PositiveDyadicForm::new(1, 1.0, CubeMeasure::new(), CubeMeasure::new()).is_err());
    }

    #[test]
    fn ascent_matches_singular_value_at_two() {
        let mut f = PositiveDyadicForm::new(1, 2.0, cells(&[(0, 1.0), (1, 2.0), (2, 0.5), (3, 1.0)]), cells(&[(0, 1.0), (1, 1.0), (2, 3.0), (3, 0.2)])).unwrap();
        let top = Cube { level: 2, index: vec![0] };
        let [a, b] = [Cube { level: 1, index: vec![0] }, Cube { level: 1, index: vec![1] }];
        f.add_term(top, 0.3, b.clone(), a.clone()).unwrap();
        f.add_term(a, 1.0, Cube::cell(vec![0]), Cube::cell(vec![1])).unwrap();
        f.add_term(b, 0.7, Cube::cell(vec![3]), Cube::cell(vec![2])).unwrap();
        assert_relative_eq!(f.ascent(4, 1), f.norm_p2().value, epsilon = 1e-9);
    }

    #[test]
    fn constant_f_has_no_principal_children() {
        let s = cells(&[(0, 1.0), (1, 2.0), (2, 1.0), (3, 1.0)]);
        let f: BTreeMap<Vec<i64>, f64> = s.keys().map(|k| (k.clone(), 2.0)).collect();
        let fam = principal_cubes(&f, &s, &Cube { level: 2, index: vec![0] }).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam[0].e_mass, 5.0);
    }

    #[test]
    fn grandchild_indicator() {
        let s = cells(&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)]);
        let f: BTreeMap<Vec<i64>, f64> = [(vec![0], 1.0)].into_iter().collect();
        let fam = principal_cubes(&f, &s, &Cube { level: 2, index: vec![0] }).unwrap();
        // <f> = 1/4 on the top, 1/2 on [0,2) (not > 1/2), 1 on cell 0
        assert_eq!(fam.len(), 2);
        assert_eq!(fam[1].cube, Cube::cell(vec![0]));
        assert_eq!(fam[0].e_mass, 3.0);
    }
}
