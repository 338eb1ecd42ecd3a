//! Seeded random instances shared by the tests, the acceptance suite and the
//! envelope regeneration.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::decomposition::good_part;
use crate::dyadic::{ShiftedDyadicSystem, TripledSystem};
use crate::hilbert::HilbertForm;
use crate::measure::{GridFunction, GridMeasure};
use crate::poisson::PoissonProfile;
use crate::positive::{Cube, CubeMeasure, PositiveDyadicForm};

/// Up to `n_max` atoms each for `sigma` and `w` on cells `[0, 2 n_max)` at
/// scale 0, masses log-uniform in `[e^-2, e^2]`. With `shared`, at least one
/// cell carries both measures.
pub fn random_pair(rng: &mut ChaCha8Rng, n_max: usize, shared: bool) -> (GridMeasure, GridMeasure) {
    let span = 2 * n_max.max(1) as i64;
    let one = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..=n_max.max(1));
        (0..n).map(|_| (rng.gen_range(0..span), rng.gen_range(-2.0f64..2.0).exp())).collect::<Vec<_>>()
    };
    let s = one(rng);
    let mut w = one(rng);
    if shared {
        let k = s[rng.gen_range(0..s.len())].0;
        w.push((k, rng.gen_range(-2.0f64..2.0).exp()));
    }
    (GridMeasure::from_cells(0, s).expect("positive masses"), GridMeasure::from_cells(0, w).expect("positive masses"))
}

/// Values uniform in `[-1, 1]` on the support of `mu`.
pub fn random_function(rng: &mut ChaCha8Rng, mu: &GridMeasure) -> GridFunction {
    GridFunction::from_cells(mu.scale(), mu.atoms().map(|(k, _)| (k, rng.gen_range(-1.0..1.0))).collect::<Vec<_>>())
}

/// A pair prepared for the decomposition: measures of density 0.8 on
/// `[0, 2^depth)`, good mean-zero `f` and `g`, `g` carrying a spike that
/// tends to trigger mass stopping.
pub struct DecompositionInstance {
    pub form: HilbertForm,
    pub sys: ShiftedDyadicSystem,
    pub f: GridFunction,
    pub g: GridFunction,
}

pub fn decomposition_instance(rng: &mut ChaCha8Rng, depth: u32, gamma: f64, r: u32) -> DecompositionInstance {
    let n = 1i64 << depth;
    let measure = |rng: &mut ChaCha8Rng| {
        let mut cells = Vec::new();
        for k in 0..n {
            if rng.gen::<f64>() < 0.8 {
                cells.push((k, rng.gen_range(0.05..2.0)));
            }
        }
        GridMeasure::from_cells(0, cells).expect("positive masses")
    };
    let sigma = measure(rng);
    let w = measure(rng);
    let sys = ShiftedDyadicSystem::new(0, 0, depth, 0, gamma, r).expect("valid parameters");
    let f0 = random_function(rng, &sigma);
    let mut g0 = random_function(rng, &w);
    let spike = rng.gen_range(0..n);
    if w.mass(spike) > 0.0 {
        g0 = GridFunction::from_cells(0, g0.entries().map(|(k, v)| (k, if k == spike { 25.0 } else { v })));
    }
    let f = good_part(&f0, &sigma, &sys).expect("grid input");
    let g = good_part(&g0, &w, &sys).expect("grid input");
    let form = HilbertForm::new(sigma, w).expect("common scale");
    DecompositionInstance { form, sys, f, g }
}

/// A positive dyadic form in dimension 1 or 2 on an `8^d` block with up to
/// 19 atoms per measure and up to 11 terms, at exponent `p`.
pub fn random_positive_form(rng: &mut ChaCha8Rng, p: f64) -> PositiveDyadicForm {
    let d = rng.gen_range(1..3usize);
    let side = 8i64;
    let measure = |rng: &mut ChaCha8Rng| {
        let mut mu = CubeMeasure::new();
        for _ in 0..rng.gen_range(1..20) {
            let k: Vec<i64> = (0..d).map(|_| rng.gen_range(0..side)).collect();
            *mu.entry(k).or_insert(0.0) += rng.gen_range(0.0..2.0);
        }
        mu
    };
    let s = measure(rng);
    let w = measure(rng);
    let mut form = PositiveDyadicForm::new(d, p, s, w).expect("valid measures");
    for _ in 0..rng.gen_range(1..12) {
        let level = rng.gen_range(1..4u32);
        let index: Vec<i64> = (0..d).map(|_| rng.gen_range(0..(side >> level))).collect();
        let c = Cube { level, index };
        let ch = c.children();
        let a = rng.gen_range(0..ch.len());
        let mut b = rng.gen_range(0..ch.len());
        while b == a {
            b = rng.gen_range(0..ch.len());
        }
        form.add_term(c, rng.gen_range(0.0..2.0), ch[a].clone(), ch[b].clone()).expect("valid term");
    }
    form
}

/// A few nonnegative coefficients on one tripled system near the origin and
/// a scattered `w` at scale 0.
pub fn random_profile(rng: &mut ChaCha8Rng) -> (PoissonProfile, GridMeasure) {
    let origin = rng.gen_range(-20..20);
    let u = rng.gen_range(0..3u8);
    let sys = TripledSystem::new(origin, u).expect("u < 3");
    let mut p = PoissonProfile::new(0, sys);
    for _ in 0..rng.gen_range(1..6) {
        let t = sys.tile_containing(rng.gen_range(-40..40), rng.gen_range(0..4));
        p.add(t, rng.gen_range(0.0..3.0)).expect("member tile");
    }
    let n = rng.gen_range(1..10);
    let w = GridMeasure::from_cells(0, (0..n).map(|_| (rng.gen_range(-60..60), rng.gen_range(0.0..2.0)))).expect("nonnegative");
    (p, w)
}
