use proptest::prelude::*;

use twoweight::dyadic::{expand, ShiftedDyadicSystem};
use twoweight::hilbert::{HilbertForm, IntervalMode};
use twoweight::io::{format_measures, parse_measures};
use twoweight::measure::{GridFunction, GridInterval, GridMeasure, Orientation};

fn cells(span: i64, max: usize) -> impl Strategy<Value = Vec<(i64, f64)>> {
    prop::collection::vec((0..span, 0.01f64..5.0), 1..max)
}

fn measure(span: i64, max: usize) -> impl Strategy<Value = GridMeasure> {
    cells(span, max).prop_map(|c| GridMeasure::from_cells(0, c).unwrap())
}

fn rel_le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * lhs.abs().max(rhs.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn from_atoms_conserves_mass(atoms in prop::collection::vec((-50.0f64..50.0, 0.0f64..3.0), 0..30), m in -3i32..4) {
        let mu = GridMeasure::from_atoms(&atoms, m).unwrap();
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        prop_assert!((mu.total_mass() - total).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn interval_mass_is_additive(mu in measure(64, 20), lo in -4i64..60, a in 1i64..20, b in 1i64..20) {
        let whole = mu.interval_mass(&GridInterval::with_len(lo, a + b));
        let parts = mu.interval_mass(&GridInterval::with_len(lo, a)) + mu.interval_mass(&GridInterval::with_len(lo + a, b));
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1.0));
    }

    #[test]
    fn reflection_is_an_involution(mu in measure(64, 20), j in -40i64..40) {
        let a = j as f64;
        let once = mu.reflect_translate(a, Orientation::Reversed).unwrap();
        prop_assert_eq!(once.reflect_translate(a, Orientation::Reversed).unwrap(), mu.clone());
        prop_assert!((once.total_mass() - mu.total_mass()).abs() <= 1e-12 * mu.total_mass());
    }

    #[test]
    fn martingale_expansion(mu in measure(32, 24), vals in prop::collection::vec(-1.0f64..1.0, 32), shift in 0i64..32) {
        let f = GridFunction::from_cells(0, vals.iter().enumerate().map(|(k, &v)| (k as i64, v)));
        let sys = ShiftedDyadicSystem::new(0, 0, 5, shift, 0.9, 3).unwrap();
        let ex = expand(&f, &mu, &sys).unwrap();
        let back = ex.reconstruct(&mu);
        for (k, _) in mu.atoms() {
            prop_assert!((back.value(k) - f.value(k)).abs() <= 1e-12);
        }
        let n2 = f.norm(&mu).powi(2);
        prop_assert!((ex.energy() - n2).abs() <= 1e-10 * n2.max(1.0));
    }

    #[test]
    fn testing_chain(s in measure(24, 10), w in measure(24, 10)) {
        let form = HilbertForm::new(s, w).unwrap();
        let c = form.operator_norm().value;
        let t = form.testing_constants(IntervalMode::Exhaustive);
        let d = form.testing_constants(IntervalMode::Dyadic);
        prop_assert!(rel_le(t.h_local.value, t.h_glob.value));
        prop_assert!(rel_le(t.h_local_dual.value, t.h_glob_dual.value));
        prop_assert!(rel_le(t.h_off.value, t.h_glob.value));
        prop_assert!(rel_le(t.h_glob.value, c));
        prop_assert!(rel_le(t.h_glob_dual.value, c));
        prop_assert!(rel_le(d.h_local.value, t.h_local.value));
        let k = form.windowed_constants(5);
        prop_assert!(k.windows(2).all(|p| rel_le(p[0], p[1])));
        prop_assert!(k.iter().all(|&x| rel_le(x, c)));
    }

    #[test]
    fn antisymmetric_when_measures_agree(mu in measure(20, 12), a in prop::collection::vec(-1.0f64..1.0, 20), b in prop::collection::vec(-1.0f64..1.0, 20)) {
        let form = HilbertForm::new(mu.clone(), mu).unwrap();
        let f = GridFunction::from_cells(0, a.iter().enumerate().map(|(k, &v)| (k as i64, v)));
        let g = GridFunction::from_cells(0, b.iter().enumerate().map(|(k, &v)| (k as i64, v)));
        let (x, y) = (form.pairing(&f, &g), form.pairing(&g, &f));
        prop_assert!((x + y).abs() <= 1e-12 * x.abs().max(1.0));
    }

    #[test]
    fn file_round_trip(s in cells(1000, 20), w in cells(1000, 20), m in -4i32..8) {
        let shift = |c: Vec<(i64, f64)>| c.into_iter().map(|(k, v)| (k - 500, v)).collect::<Vec<_>>();
        let sigma = GridMeasure::from_cells(m, shift(s)).unwrap();
        let w = GridMeasure::from_cells(m, shift(w)).unwrap();
        let back = parse_measures(&format_measures(&sigma, &w).unwrap(), None).unwrap();
        prop_assert_eq!(back.sigma, sigma);
        prop_assert_eq!(back.w, w);
    }
}
